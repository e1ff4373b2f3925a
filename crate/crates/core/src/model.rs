//! Parameter triple `(n, sigma, p)` and the exponents derived from it.

use thiserror::Error;

use crate::scalar::Real;
use crate::specfun::{self, SpecfunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("dimension n = {n} is too small (need n >= 2)")]
    DimensionTooSmall { n: usize },
    #[error("sigma = {sigma} is outside the open interval (0, 1)")]
    SigmaOutOfRange { sigma: f64 },
    #[error("p = {p} is at or below the lower bound n/(n-2 sigma) = {bound}")]
    PBelowSerrin { p: f64, bound: f64 },
    #[error("p = {p} is at or above the critical exponent (n+2 sigma)/(n-2 sigma) = {bound}")]
    PSupercritical { p: f64, bound: f64 },
    #[error("non-finite parameter value")]
    NonFinite,
}

/// Validated parameters: `n >= 2`, `0 < sigma < 1` and
/// `n/(n-2 sigma) < p < (n+2 sigma)/(n-2 sigma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params<T> {
    n: usize,
    sigma: T,
    p: T,
}

impl<T: Real> Params<T> {
    pub fn new(n: usize, sigma: T, p: T) -> Result<Self, ParamError> {
        validate_params(n, sigma, p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn p(&self) -> T {
        self.p
    }

    /// `n` as a scalar.
    pub fn dim(&self) -> T {
        T::from_usize_lossy(self.n)
    }

    /// Decay exponent `2 sigma / (p - 1)`.
    pub fn beta(&self) -> T {
        (self.sigma + self.sigma) / (self.p - T::one())
    }

    /// `n - 2 sigma`, the Kelvin exponent.
    pub fn kelvin_exponent(&self) -> T {
        self.dim() - self.sigma - self.sigma
    }

    /// `n + 2 sigma - p (n - 2 sigma)`, the weight exponent of the transformed equation.
    pub fn p_star(&self) -> T {
        self.dim() + self.sigma + self.sigma - self.p * self.kelvin_exponent()
    }

    pub fn derived(&self) -> Result<DerivedConstants<T>, SpecfunError> {
        derived_constants(self)
    }
}

/// Lower and upper admissible bounds for `p`.
pub fn exponent_window<T: Real>(n: usize, sigma: T) -> (T, T) {
    let n = T::from_usize_lossy(n);
    let two_sigma = sigma + sigma;
    (n / (n - two_sigma), (n + two_sigma) / (n - two_sigma))
}

pub fn validate_params<T: Real>(n: usize, sigma: T, p: T) -> Result<Params<T>, ParamError> {
    if !sigma.is_finite() || !p.is_finite() {
        return Err(ParamError::NonFinite);
    }
    if n < 2 {
        return Err(ParamError::DimensionTooSmall { n });
    }
    if !(sigma > T::zero() && sigma < T::one()) {
        return Err(ParamError::SigmaOutOfRange { sigma: sigma.as_f64() });
    }
    let (lower, upper) = exponent_window(n, sigma);
    if p <= lower {
        return Err(ParamError::PBelowSerrin { p: p.as_f64(), bound: lower.as_f64() });
    }
    if p >= upper {
        return Err(ParamError::PSupercritical { p: p.as_f64(), bound: upper.as_f64() });
    }
    Ok(Params { n, sigma, p })
}

/// Exponents and constants attached to a parameter triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants<T> {
    /// `2 sigma / (p - 1)`.
    pub beta: T,
    /// `n + 2 sigma - p (n - 2 sigma)`, exponent of the Kelvin-transformed equation.
    pub p_star: T,
    /// `4 sigma / (p - 1) - (n - 2 sigma)`, prefactor of the energy derivative.
    pub j1: T,
    /// `(n - 2 sigma)/2 - beta`, argument of the four-Gamma ratio.
    pub alpha: T,
    /// Limit of `|x|^beta u(x)` at a non-removable singularity.
    pub a: T,
}

pub fn derived_constants<T: Real>(params: &Params<T>) -> Result<DerivedConstants<T>, SpecfunError> {
    let two = T::lit(2.0);
    let sigma = params.sigma();
    let n = params.dim();
    let beta = params.beta();
    Ok(DerivedConstants {
        beta,
        p_star: n + two * sigma - params.p() * (n - two * sigma),
        j1: two * beta - (n - two * sigma),
        alpha: (n - two * sigma) / two - beta,
        a: specfun::asymptotic_constant(params)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_and_rejects_stated_triples() {
        assert!(validate_params(3, 0.5, 1.8).is_ok());
        assert!(validate_params(2, 0.75, 5.0).is_ok());
        assert!(matches!(validate_params(3, 0.5, 2.5), Err(ParamError::PSupercritical { .. })));
        assert!(matches!(validate_params(3, 0.5, 1.5), Err(ParamError::PBelowSerrin { .. })));
        assert!(matches!(validate_params(3, 0.5, 2.0), Err(ParamError::PSupercritical { .. })));
        assert!(matches!(validate_params(1, 0.5, 1.8), Err(ParamError::DimensionTooSmall { n: 1 })));
        assert!(matches!(validate_params(3, 1.0, 1.8), Err(ParamError::SigmaOutOfRange { .. })));
        assert!(matches!(validate_params(3, 0.0, 1.8), Err(ParamError::SigmaOutOfRange { .. })));
        assert_eq!(validate_params(3, 0.5, f64::NAN), Err(ParamError::NonFinite));
    }

    #[test]
    fn derived_exponents_for_reference_triple() {
        let params = Params::<f64>::new(3, 0.5, 1.8).unwrap();
        let d = params.derived().unwrap();
        assert!((d.beta - 1.25).abs() < 1e-15);
        assert!((d.j1 - 0.5).abs() < 1e-15);
        assert!((d.p_star - 0.4).abs() < 1e-15);
        assert!((d.alpha + 0.25).abs() < 1e-15);
        assert!(d.a > 0.0);
    }

    #[test]
    fn single_precision_instantiation() {
        let params = Params::<f32>::new(3, 0.5, 1.8).unwrap();
        let d = params.derived().unwrap();
        assert!((d.beta - 1.25).abs() < 1e-6);
        assert!(d.a > 0.0);
    }
}

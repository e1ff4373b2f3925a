//! Closed form of the homogeneous extension of `a |x|^{-beta}`.
//!
//! Homogeneous solutions of `div(t^{1-2 sigma} grad U) = 0` of degree `-beta`
//! that stay bounded on the axis are
//!
//! ```text
//! U(rho, theta) = a rho^{-beta} F(cos^2 theta) / F(1),
//! F(z) = 2F1(beta/2, (n - 2 sigma - beta)/2; n/2; z),
//! ```
//!
//! with `theta` measured from the hyperplane `t = 0`.

use crate::scalar::Real;
use crate::specfun::{self, log_gamma};

use super::{AxiEvaluator, ExtensionError};

#[derive(Debug, Clone, Copy)]
pub struct HomogeneousExtension<T> {
    n: usize,
    sigma: T,
    beta: T,
    amplitude: T,
    f_one: T,
}

impl<T: Real> HomogeneousExtension<T> {
    /// `0 < beta < n - 2 sigma`; the trace is `amplitude * r^{-beta}`.
    pub fn new(n: usize, sigma: T, beta: T, amplitude: T) -> Result<Self, ExtensionError> {
        let nn = T::from_usize_lossy(n);
        let two = T::lit(2.0);
        if !(beta > T::zero() && beta < nn - two * sigma) {
            return Err(ExtensionError::BadHomogeneity { beta: beta.as_f64() });
        }
        // F(1) = Gamma(n/2) Gamma(sigma) / (Gamma((n - beta)/2) Gamma((beta + 2 sigma)/2))
        let lg = [
            log_gamma(nn / two)?,
            log_gamma(sigma)?,
            log_gamma((nn - beta) / two)?,
            log_gamma((beta + two * sigma) / two)?,
        ];
        let f_one = (lg[0].log_abs + lg[1].log_abs - lg[2].log_abs - lg[3].log_abs).exp();
        Ok(Self { n, sigma, beta, amplitude, f_one })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    fn abc(&self) -> (T, T, T) {
        let two = T::lit(2.0);
        let nn = T::from_usize_lossy(self.n);
        (self.beta / two, (nn - two * self.sigma - self.beta) / two, nn / two)
    }

    /// Angular profile `F(cos^2 theta) / F(1)`, equal to 1 on `theta = 0`.
    pub fn profile(&self, theta: T) -> Result<T, ExtensionError> {
        let (a, b, c) = self.abc();
        let (sn, cs) = theta.sin_cos();
        Ok(specfun::hyp2f1(a, b, c, cs * cs, sn * sn)? / self.f_one)
    }

    /// Derivative of the profile in `theta`.
    pub fn profile_derivative(&self, theta: T) -> Result<T, ExtensionError> {
        let (a, b, c) = self.abc();
        let one = T::one();
        let (sn, cs) = theta.sin_cos();
        let fp = a * b / c * specfun::hyp2f1(a + one, b + one, c + one, cs * cs, sn * sn)?;
        Ok(-T::lit(2.0) * sn * cs * fp / self.f_one)
    }
}

impl<T: Real> AxiEvaluator<T> for HomogeneousExtension<T> {
    fn value(&self, rho: T, theta: T) -> Result<T, ExtensionError> {
        Ok(self.amplitude * rho.powf(-self.beta) * self.profile(theta)?)
    }

    fn gradient(&self, rho: T, theta: T) -> Result<(T, T), ExtensionError> {
        let scale = self.amplitude * rho.powf(-self.beta);
        let g = self.profile(theta)?;
        let dg = self.profile_derivative(theta)?;
        Ok((-self.beta * scale * g / rho, scale * dg))
    }

    fn trace(&self, s: T) -> Result<T, ExtensionError> {
        Ok(self.amplitude * s.powf(-self.beta))
    }
}

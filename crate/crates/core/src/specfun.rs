//! Gamma function and the closed-form constants built from it.
//!
//! The four-Gamma ratio
//!
//! ```text
//! Lambda(alpha) = 2^{2 sigma} G((n+2s+2a)/4) G((n+2s-2a)/4) / (G((n-2s-2a)/4) G((n-2s+2a)/4))
//! ```
//!
//! is the multiplier of the fractional Laplacian on powers:
//! `(-Laplace)^sigma |x|^{-beta} = Lambda((n-2 sigma)/2 - beta) |x|^{-beta-2 sigma}`.

use thiserror::Error;

use crate::model::Params;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecfunError {
    #[error("Gamma has a pole at the nonpositive integer {x}")]
    Pole { x: f64 },
    #[error("numerator Gamma argument {x} sits on a pole; Lambda is infinite")]
    NumeratorPole { x: f64 },
    #[error("beta = {beta} outside [0, n) for n = {n}")]
    BetaOutOfRange { beta: f64, n: usize },
    #[error("hypergeometric parameters degenerate (c - a - b = {gap} too close to an integer)")]
    HypergeometricDegenerate { gap: f64 },
    #[error("hypergeometric argument {z} outside [0, 1]")]
    HypergeometricDomain { z: f64 },
}

/// `ln |Gamma(x)|` together with the sign of `Gamma(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEval<T> {
    pub log_abs: T,
    pub sign: T,
}

impl<T: Real> GammaEval<T> {
    pub fn value(&self) -> T {
        self.sign * self.log_abs.exp()
    }
}

// Lanczos approximation with g = 607/128 and fourteen terms.
const LANCZOS_G_SHIFT: f64 = 5.2421875;
#[allow(clippy::excessive_precision)]
const LANCZOS_C0: f64 = 0.999999999999997092;
#[allow(clippy::excessive_precision)]
const LANCZOS_C: [f64; 14] = [
    57.1562356658629235,
    -59.5979603554754912,
    14.1360979747417471,
    -0.491913816097620199,
    0.339946499848118887e-4,
    0.465236289270485756e-4,
    -0.983744753048795646e-4,
    0.158088703224912494e-3,
    -0.210264441724104883e-3,
    0.217439618115212643e-3,
    -0.164318106536763890e-3,
    0.844182239838527433e-4,
    -0.261908384015814087e-4,
    0.368991826595316234e-5,
];
const SQRT_2PI: f64 = 2.5066282746310005;

/// `sin(pi x)` with the argument reduced before multiplying by pi.
pub fn sin_pi<T: Real>(x: T) -> T {
    let two = T::lit(2.0);
    let mut r = x - two * (x / two).round();
    // r in [-1, 1]; fold onto [-1/2, 1/2]
    let half = T::lit(0.5);
    if r > half {
        r = T::one() - r;
    } else if r < -half {
        r = -T::one() - r;
    }
    (T::PI() * r).sin()
}

fn lanczos_log<T: Real>(x: T) -> T {
    // valid for x >= 1/2
    let mut ser = T::lit(LANCZOS_C0);
    for (i, c) in LANCZOS_C.iter().enumerate() {
        ser = ser + T::lit(*c) / (x + T::from_usize_lossy(i + 1));
    }
    let tmp = x + T::lit(LANCZOS_G_SHIFT);
    let half = T::lit(0.5);
    let scale = T::lit(SQRT_2PI) * ser / x;
    // the linear-space product keeps ln Gamma accurate to an ulp until it overflows
    let direct = tmp.powf(x + half) * (-tmp).exp() * scale;
    if direct.is_finite() && direct > T::min_positive_value() {
        return direct.ln();
    }
    (x + half) * tmp.ln() - tmp + scale.ln()
}

pub fn log_gamma<T: Real>(x: T) -> Result<GammaEval<T>, SpecfunError> {
    if x <= T::zero() && x == x.round() {
        return Err(SpecfunError::Pole { x: x.as_f64() });
    }
    if x >= T::lit(0.5) {
        return Ok(GammaEval { log_abs: lanczos_log(x), sign: T::one() });
    }
    // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
    let s = sin_pi(x);
    let log_abs = T::PI().ln() - s.abs().ln() - lanczos_log(T::one() - x);
    Ok(GammaEval { log_abs, sign: s.signum() })
}

pub fn gamma<T: Real>(x: T) -> Result<T, SpecfunError> {
    log_gamma(x).map(|g| g.value())
}

/// Euler Beta function `B(a, b)` for positive arguments.
pub fn beta_fn<T: Real>(a: T, b: T) -> Result<T, SpecfunError> {
    let la = log_gamma(a)?;
    let lb = log_gamma(b)?;
    let lab = log_gamma(a + b)?;
    Ok(la.sign * lb.sign * lab.sign * (la.log_abs + lb.log_abs - lab.log_abs).exp())
}

/// Surface area of the unit sphere `S^{d-1}` in `R^d`.
pub fn sphere_area<T: Real>(d: usize) -> T {
    let half_d = T::from_usize_lossy(d) / T::lit(2.0);
    let g = log_gamma(half_d).expect("d/2 > 0").value();
    T::lit(2.0) * T::PI().powf(half_d) / g
}

const POLE_TOL: f64 = 1e-12;

fn near_nonpositive_integer<T: Real>(x: T) -> bool {
    x <= T::lit(POLE_TOL) && (x - x.round()).abs() <= T::lit(POLE_TOL)
}

/// Four-Gamma ratio `Lambda(alpha)`; zero when a denominator Gamma sits on a pole.
pub fn lambda_even<T: Real>(alpha: T, n: usize, sigma: T) -> Result<T, SpecfunError> {
    let four = T::lit(4.0);
    let two = T::lit(2.0);
    let nn = T::from_usize_lossy(n);
    let two_sigma = two * sigma;
    let num = [(nn + two_sigma + two * alpha) / four, (nn + two_sigma - two * alpha) / four];
    let den = [(nn - two_sigma - two * alpha) / four, (nn - two_sigma + two * alpha) / four];
    for &x in &num {
        if near_nonpositive_integer(x) {
            return Err(SpecfunError::NumeratorPole { x: x.as_f64() });
        }
    }
    if den.iter().any(|&x| near_nonpositive_integer(x)) {
        return Ok(T::zero());
    }
    let g_num = [log_gamma(num[0])?, log_gamma(num[1])?];
    let g_den = [log_gamma(den[0])?, log_gamma(den[1])?];
    let sign = g_num[0].sign * g_num[1].sign * g_den[0].sign * g_den[1].sign;
    let log_mag = two_sigma * two.ln() + g_num[0].log_abs + g_num[1].log_abs - g_den[0].log_abs - g_den[1].log_abs;
    Ok(sign * log_mag.exp())
}

/// `lambda(beta)` with `(-Laplace)^sigma |x|^{-beta} = lambda(beta) |x|^{-beta-2 sigma}`.
///
/// Vanishes at `beta = 0` (constants) and at `beta = n - 2 sigma` (the
/// sigma-harmonic power); positive strictly in between.
pub fn power_multiplier<T: Real>(beta: T, n: usize, sigma: T) -> Result<T, SpecfunError> {
    let nn = T::from_usize_lossy(n);
    if !(beta >= T::zero() && beta < nn) {
        return Err(SpecfunError::BetaOutOfRange { beta: beta.as_f64(), n });
    }
    let alpha = (nn - sigma - sigma) / T::lit(2.0) - beta;
    lambda_even(alpha, n, sigma)
}

/// `A_{n,p,sigma} = Lambda((n-2 sigma)/2 - 2 sigma/(p-1))^{1/(p-1)}`.
pub fn asymptotic_constant<T: Real>(params: &Params<T>) -> Result<T, SpecfunError> {
    let lam = power_multiplier(params.beta(), params.n(), params.sigma())?;
    Ok(lam.powf(T::one() / (params.p() - T::one())))
}

/// Normalizing constant `C(n, sigma)` of the singular-integral fractional Laplacian.
pub fn frac_laplacian_constant<T: Real>(n: usize, sigma: T) -> Result<T, SpecfunError> {
    let nn = T::from_usize_lossy(n);
    let two = T::lit(2.0);
    let g1 = log_gamma((nn + two * sigma) / two)?;
    let g2 = log_gamma(T::one() - sigma)?;
    Ok(two.powf(two * sigma) * sigma * (g1.log_abs - g2.log_abs).exp() / T::PI().powf(nn / two))
}

/// Closed form of the Poisson-kernel constant `Gamma((n+2s)/2) / (pi^{n/2} Gamma(s))`.
pub fn poisson_constant<T: Real>(n: usize, sigma: T) -> Result<T, SpecfunError> {
    let nn = T::from_usize_lossy(n);
    let two = T::lit(2.0);
    let g1 = log_gamma((nn + two * sigma) / two)?;
    let g2 = log_gamma(sigma)?;
    Ok((g1.log_abs - g2.log_abs).exp() / T::PI().powf(nn / two))
}

/// Ratio `-lim t^{1-2s} dU/dt / (-Laplace)^s u = 2^{1-2s} Gamma(1-s) / Gamma(s)` for the
/// normalized Poisson extension `U` of `u`.
pub fn neumann_constant<T: Real>(sigma: T) -> Result<T, SpecfunError> {
    let two = T::lit(2.0);
    let g1 = log_gamma(T::one() - sigma)?;
    let g2 = log_gamma(sigma)?;
    Ok(two.powf(T::one() - two * sigma) * (g1.log_abs - g2.log_abs).exp())
}

fn hyp_series<T: Real>(a: T, b: T, c: T, z: T) -> T {
    let mut term = T::one();
    let mut sum = T::one();
    let eps = T::epsilon();
    for k in 0..2000 {
        let kk = T::from_usize_lossy(k);
        term = term * (a + kk) * (b + kk) / ((c + kk) * (kk + T::one())) * z;
        sum = sum + term;
        if term.abs() <= eps * sum.abs() * T::lit(0.25) {
            break;
        }
    }
    sum
}

/// Gauss hypergeometric function `2F1(a, b; c; z)` for `z` in `[0, 1]`.
///
/// Takes `one_minus_z` separately so that arguments close to 1 keep full
/// precision. For `z > 1/2` the standard connection formula to `1 - z` is used,
/// which needs `c - a - b` away from the integers.
pub fn hyp2f1<T: Real>(a: T, b: T, c: T, z: T, one_minus_z: T) -> Result<T, SpecfunError> {
    if z < T::zero() || one_minus_z < T::zero() {
        return Err(SpecfunError::HypergeometricDomain { z: z.as_f64() });
    }
    if z <= T::lit(0.5) {
        return Ok(hyp_series(a, b, c, z));
    }
    let gap = c - a - b;
    if (gap - gap.round()).abs() < T::lit(1e-6) {
        return Err(SpecfunError::HypergeometricDegenerate { gap: gap.as_f64() });
    }
    let w = one_minus_z;
    let lc = log_gamma(c)?;
    let t1 = {
        let g = [log_gamma(gap)?, log_gamma(c - a)?, log_gamma(c - b)?];
        let coef = lc.sign
            * g[0].sign
            * g[1].sign
            * g[2].sign
            * (lc.log_abs + g[0].log_abs - g[1].log_abs - g[2].log_abs).exp();
        coef * hyp_series(a, b, T::one() - gap, w)
    };
    let t2 = {
        let g = [log_gamma(-gap)?, log_gamma(a)?, log_gamma(b)?];
        let coef = lc.sign
            * g[0].sign
            * g[1].sign
            * g[2].sign
            * (lc.log_abs + g[0].log_abs - g[1].log_abs - g[2].log_abs).exp();
        if w == T::zero() {
            T::zero()
        } else {
            coef * w.powf(gap) * hyp_series(c - a, c - b, T::one() + gap, w)
        }
    };
    Ok(t1 + t2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn gamma_known_values() {
        assert!(rel(gamma(1.0).unwrap(), 1.0) < 1e-14);
        assert!(rel(gamma(0.5).unwrap(), std::f64::consts::PI.sqrt()) < 1e-14);
        assert!(rel(gamma(10.0).unwrap(), 362880.0) < 1e-13);
        assert!(rel(gamma(-0.5).unwrap(), -2.0 * std::f64::consts::PI.sqrt()) < 1e-14);
    }

    #[test]
    fn gamma_poles_are_reported() {
        for x in [0.0, -1.0, -7.0] {
            assert!(matches!(log_gamma(x), Err(SpecfunError::Pole { .. })));
        }
    }

    #[test]
    fn gamma_recurrence_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(0.1..40.0);
            let lhs = log_gamma(x + 1.0).unwrap().log_abs;
            let rhs = log_gamma(x).unwrap().log_abs + x.ln();
            let ratio = (lhs - rhs).exp();
            assert!((ratio - 1.0).abs() <= 1e-13, "x = {x}: ratio {ratio}");
        }
    }

    #[test]
    fn gamma_sign_on_negative_axis() {
        assert_eq!(log_gamma(-0.5).unwrap().sign, -1.0);
        assert_eq!(log_gamma(-1.5).unwrap().sign, 1.0);
        assert_eq!(log_gamma(-2.5).unwrap().sign, -1.0);
    }

    #[test]
    fn lambda_reference_and_poles() {
        let v = lambda_even(0.0, 3, 0.5).unwrap();
        assert!(rel(v, 2.0 / std::f64::consts::PI) < 1e-14);
        for (n, s) in [(3usize, 0.5), (2, 0.75), (4, 0.3)] {
            let edge = (n as f64 - 2.0 * s) / 2.0;
            assert_eq!(lambda_even(edge, n, s).unwrap(), 0.0);
            assert_eq!(lambda_even(-edge, n, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn lambda_numerator_pole_is_an_error() {
        // (n + 2s - 2a)/4 = 0  <=>  a = (n + 2s)/2
        let r = lambda_even(2.0, 3, 0.5);
        assert!(matches!(r, Err(SpecfunError::NumeratorPole { .. })));
    }

    #[test]
    fn power_multiplier_endpoints() {
        assert_eq!(power_multiplier(0.0, 3, 0.5).unwrap(), 0.0);
        assert_eq!(power_multiplier(2.0, 3, 0.5).unwrap(), 0.0);
        assert!(power_multiplier(3.0, 3, 0.5).is_err());
        assert!(power_multiplier(-0.1, 3, 0.5).is_err());
        // small beta tends to zero
        assert!(power_multiplier(1e-8f64, 3, 0.5).unwrap().abs() < 1e-7);
    }

    #[test]
    fn power_multiplier_classical_limit() {
        // sigma -> 1: 4 G((n-b)/2) G(b/2+1) / (G(b/2) G((n-b-2)/2)) = b (n - 2 - b)
        for b in [0.6, 0.8, 0.95] {
            let v = power_multiplier(b, 3, 1.0 - 1e-6).unwrap();
            assert!(rel(v, b * (1.0 - b)) < 1e-3, "beta {b}: {v}");
        }
    }

    #[test]
    fn constant_satisfies_defining_identity() {
        for (n, s, p) in [(3, 0.5, 1.8), (2, 0.75, 5.0), (4, 0.3, 1.35)] {
            let params = Params::<f64>::new(n, s, p).unwrap();
            let a = asymptotic_constant(&params).unwrap();
            let lam = power_multiplier(params.beta(), n, s).unwrap();
            assert!(rel(a.powf(p - 1.0), lam) < 1e-13);
        }
    }

    #[test]
    fn hypergeometric_connection_is_continuous_at_half() {
        let (a, b, c) = (0.625, 0.375, 1.5);
        let z = 0.5;
        let direct = hyp_series(a, b, c, z);
        let conn = hyp2f1(a, b, c, 0.5 + 1e-15, 0.5 - 1e-15).unwrap();
        assert!(rel(direct, conn) < 1e-12);
        // Gauss summation at z = 1
        let at_one = hyp2f1(a, b, c, 1.0, 0.0).unwrap();
        let gauss = gamma(c).unwrap() * gamma(c - a - b).unwrap() / (gamma(c - a).unwrap() * gamma(c - b).unwrap());
        assert!(rel(at_one, gauss) < 1e-13);
    }

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert!(rel(sphere_area::<f64>(2), 2.0 * pi) < 1e-14);
        assert!(rel(sphere_area::<f64>(3), 4.0 * pi) < 1e-14);
        assert!(rel(sphere_area::<f64>(4), 2.0 * pi * pi) < 1e-14);
    }

    #[test]
    fn neumann_constant_is_one_at_half() {
        assert!(rel(neumann_constant(0.5).unwrap(), 1.0) < 1e-14);
    }
}

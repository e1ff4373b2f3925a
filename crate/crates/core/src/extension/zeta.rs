//! Angular coordinate `zeta(theta) = int_0^theta sin^{2 sigma - 1}(phi) d phi`.
//!
//! In `zeta` the weighted Neumann derivative becomes a plain one-sided
//! derivative: `t^{1-2 sigma} d_t U = rho^{-2 sigma} d_zeta U` on `theta = 0`.

use crate::quadrature::{self, QuadRule};
use crate::scalar::Real;

use super::ExtensionError;

#[derive(Debug, Clone)]
pub struct ZetaMap<T> {
    sigma: T,
    // Gauss-Jacobi on [-1, 1] with weight (1 + y)^{sigma - 1}
    jacobi: QuadRule<T>,
    legendre: QuadRule<T>,
    zeta_quarter: T,
    zeta_max: T,
}

impl<T: Real> ZetaMap<T> {
    pub fn new(sigma: T) -> Result<Self, ExtensionError> {
        let jacobi = quadrature::gauss_jacobi(32, T::zero(), sigma - T::one())?;
        let legendre = quadrature::gauss_legendre(32)?;
        let mut map = Self { sigma, jacobi, legendre, zeta_quarter: T::zero(), zeta_max: T::zero() };
        map.zeta_quarter = map.lower(T::FRAC_PI_4());
        map.zeta_max = map.zeta_quarter + map.upper(T::FRAC_PI_2());
        Ok(map)
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// `zeta(pi / 2) = B(sigma, 1/2) / 2`.
    pub fn zeta_max(&self) -> T {
        self.zeta_max
    }

    // theta <= pi/4: with V = sin^2 theta,
    // zeta = V^sigma / 2 * int_0^1 x^{sigma-1} (1 - V x)^{-1/2} dx
    fn lower(&self, theta: T) -> T {
        let v = theta.sin().powi(2);
        if v == T::zero() {
            return T::zero();
        }
        let half = T::lit(0.5);
        // x = (1 + y) / 2 contributes 2^{-sigma}
        let s = self.jacobi.integrate(|y| (T::one() - v * half * (T::one() + y)).powf(-half));
        half * v.powf(self.sigma) * s * T::lit(2.0).powf(-self.sigma)
    }

    fn upper(&self, theta: T) -> T {
        let e = self.sigma + self.sigma - T::one();
        let a = T::FRAC_PI_4();
        let rule = self.legendre.mapped(a, theta);
        rule.integrate(|phi| phi.sin().powf(e))
    }

    pub fn zeta(&self, theta: T) -> T {
        if theta <= T::zero() {
            return T::zero();
        }
        if theta <= T::FRAC_PI_4() {
            self.lower(theta)
        } else if theta >= T::FRAC_PI_2() {
            self.zeta_max
        } else {
            self.zeta_quarter + self.upper(theta)
        }
    }

    /// `d zeta / d theta`.
    pub fn derivative(&self, theta: T) -> T {
        theta.sin().powf(self.sigma + self.sigma - T::one())
    }

    /// Inverse map by bracketed Newton iteration.
    pub fn theta(&self, zeta: T) -> T {
        if zeta <= T::zero() {
            return T::zero();
        }
        if zeta >= self.zeta_max {
            return T::FRAC_PI_2();
        }
        let two_sigma = self.sigma + self.sigma;
        let (mut lo, mut hi) = (T::zero(), T::FRAC_PI_2());
        // small-angle guess from zeta ~ theta^{2 sigma} / (2 sigma)
        let mut th = (two_sigma * zeta).powf(T::one() / two_sigma).min(T::FRAC_PI_2() * T::lit(0.999));
        for _ in 0..200 {
            let f = self.zeta(th) - zeta;
            if f > T::zero() {
                hi = th;
            } else {
                lo = th;
            }
            let step = f / self.derivative(th);
            let mut next = th - step;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = (lo + hi) / T::lit(2.0);
            }
            if (next - th).abs() <= T::epsilon() * T::lit(4.0) * th.max(T::min_positive_value()) {
                return next;
            }
            th = next;
            if hi - lo <= T::epsilon() * hi {
                break;
            }
        }
        th
    }
}

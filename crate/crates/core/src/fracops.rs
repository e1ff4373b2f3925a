//! Radial traces and a direct principal-value evaluation of the fractional
//! Laplacian on them.
//!
//! For radial `u` the n-dimensional singular integral collapses to one radial
//! integral against the shell kernel
//!
//! ```text
//! K(s, rho, t) = int_{S^{n-1}} (|rho w - s e|^2 + t^2)^{-(n+2 sigma)/2} dw.
//! ```
//!
//! The part of the integral outside the sphere `|y| = r0` is folded back inside
//! by the inversion `rho -> r0^2 / rho`, after which the integrand vanishes to
//! second order at `rho = r0` and no cancellation between large terms remains.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::model::Params;
use crate::quadrature::{self, graded_panels, QuadError, QuadRule};
use crate::scalar::Real;
use crate::specfun::{self, SpecfunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FracopsError {
    #[error("trace has no evaluator; build one with with_interpolant or from_fn")]
    MissingEvaluator,
    #[error("trace does not declare its power-law tails")]
    UndeclaredTails,
    #[error("tail exponents (left {left}, right {right}) make the integral diverge")]
    TailOutOfRange { left: f64, right: f64 },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("quadrature did not converge: value {value}, error estimate {error}")]
    NonConvergence { value: f64, error: f64 },
    #[error("evaluation radius {0} must be positive")]
    BadRadius(f64),
    #[error("no grid radius inside the window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

/// `u(r) ~ coeff * r^{-beta}` beyond the sampled range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTail<T> {
    pub beta: T,
    pub coeff: T,
}

impl<T: Real> PowerTail<T> {
    pub fn eval(&self, r: T) -> T {
        self.coeff * r.powf(-self.beta)
    }
}

pub type Evaluator<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Samples of a radial function `r -> u(r)` with an optional evaluator and
/// declared power-law behaviour at `0` and at infinity.
#[derive(Clone)]
pub struct RadialTrace<T> {
    radii: Vec<T>,
    values: Vec<T>,
    evaluator: Option<Evaluator<T>>,
    homogeneity: Option<T>,
    left: Option<PowerTail<T>>,
    right: Option<PowerTail<T>>,
}

impl<T: Real> fmt::Debug for RadialTrace<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialTrace")
            .field("samples", &self.radii.len())
            .field("evaluator", &self.evaluator.is_some())
            .field("homogeneity", &self.homogeneity)
            .field("left", &self.left)
            .field("right", &self.right)
            .finish()
    }
}

/// `count` logarithmically spaced radii from `r_min` to `r_max` inclusive.
pub fn log_grid<T: Real>(r_min: T, r_max: T, count: usize) -> Vec<T> {
    assert!(count >= 2 && r_min > T::zero() && r_max > r_min);
    let a = r_min.ln();
    let h = (r_max.ln() - a) / T::from_usize_lossy(count - 1);
    let mut out: Vec<T> = (0..count).map(|i| (a + h * T::from_usize_lossy(i)).exp()).collect();
    out[0] = r_min;
    out[count - 1] = r_max;
    out
}

fn check_samples<T: Real>(radii: &[T], values: &[T]) -> Result<(), FracopsError> {
    if radii.len() != values.len() {
        return Err(FracopsError::InvalidTrace(format!("{} radii but {} values", radii.len(), values.len())));
    }
    if radii.len() < 2 {
        return Err(FracopsError::InvalidTrace("need at least two samples".into()));
    }
    if radii[0] <= T::zero() || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FracopsError::InvalidTrace("radii must be positive and strictly increasing".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < T::zero()) {
        return Err(FracopsError::InvalidTrace(format!("value {v} is negative or not finite")));
    }
    Ok(())
}

impl<T: Real> RadialTrace<T> {
    pub fn from_samples(radii: Vec<T>, values: Vec<T>) -> Result<Self, FracopsError> {
        check_samples(&radii, &values)?;
        Ok(Self { radii, values, evaluator: None, homogeneity: None, left: None, right: None })
    }

    /// Samples `f` on `radii` and keeps `f` as the evaluator.
    pub fn from_fn<F>(radii: Vec<T>, f: F) -> Result<Self, FracopsError>
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        let values = radii.iter().map(|&r| f(r)).collect();
        let mut trace = Self::from_samples(radii, values)?;
        trace.evaluator = Some(Arc::new(f));
        Ok(trace)
    }

    /// `coeff * r^{-beta}` on `radii`, tagged homogeneous.
    pub fn power(radii: Vec<T>, coeff: T, beta: T) -> Result<Self, FracopsError> {
        let mut trace = Self::from_fn(radii, move |r: T| coeff * r.powf(-beta))?;
        let tail = PowerTail { beta, coeff };
        trace.homogeneity = Some(-beta);
        trace.left = Some(tail);
        trace.right = Some(tail);
        Ok(trace)
    }

    /// Declares the tails; coefficients are fitted to the end samples.
    pub fn with_tails(mut self, beta_left: T, beta_right: T) -> Self {
        let n = self.radii.len() - 1;
        self.left = Some(PowerTail { beta: beta_left, coeff: self.values[0] * self.radii[0].powf(beta_left) });
        self.right = Some(PowerTail { beta: beta_right, coeff: self.values[n] * self.radii[n].powf(beta_right) });
        self
    }

    pub fn with_tail_laws(mut self, left: PowerTail<T>, right: PowerTail<T>) -> Self {
        self.left = Some(left);
        self.right = Some(right);
        self
    }

    /// Attaches `f` as the evaluator, keeping the samples.
    pub fn with_evaluator(mut self, f: Evaluator<T>) -> Self {
        self.evaluator = Some(f);
        self
    }

    pub fn with_homogeneity(mut self, degree: T) -> Self {
        self.homogeneity = Some(degree);
        self
    }

    /// Replaces the evaluator by an interpolant of the samples: cubic in
    /// `ln r` on `r^{beta_left} u`, continued by the declared tails.
    pub fn with_interpolant(mut self) -> Result<Self, FracopsError> {
        let (left, right) = match (self.left, self.right) {
            (Some(l), Some(r)) => (l, r),
            _ => return Err(FracopsError::UndeclaredTails),
        };
        let xs: Vec<T> = self.radii.iter().map(|r| r.ln()).collect();
        let ws: Vec<T> = self.radii.iter().zip(&self.values).map(|(&r, &u)| u * r.powf(left.beta)).collect();
        let (r_lo, r_hi) = (self.radii[0], *self.radii.last().unwrap());
        let beta = left.beta;
        self.evaluator = Some(Arc::new(move |r: T| {
            if r <= r_lo {
                return left.eval(r);
            }
            if r >= r_hi {
                return right.eval(r);
            }
            lagrange_cubic(&xs, &ws, r.ln()) * r.powf(-beta)
        }));
        Ok(self)
    }

    pub fn radii(&self) -> &[T] {
        &self.radii
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn homogeneity(&self) -> Option<T> {
        self.homogeneity
    }

    pub fn left_tail(&self) -> Option<PowerTail<T>> {
        self.left
    }

    pub fn right_tail(&self) -> Option<PowerTail<T>> {
        self.right
    }

    pub fn has_evaluator(&self) -> bool {
        self.evaluator.is_some()
    }

    pub fn evaluator(&self) -> Option<&Evaluator<T>> {
        self.evaluator.as_ref()
    }

    pub fn eval(&self, r: T) -> Result<T, FracopsError> {
        if !(r > T::zero()) {
            return Err(FracopsError::BadRadius(r.as_f64()));
        }
        self.evaluator.as_ref().map(|f| f(r)).ok_or(FracopsError::MissingEvaluator)
    }

    /// Same trace with every value multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = *v * c);
        if let Some(f) = self.evaluator.clone() {
            out.evaluator = Some(Arc::new(move |r| c * f(r)));
        }
        out.left = self.left.map(|t| PowerTail { beta: t.beta, coeff: t.coeff * c });
        out.right = self.right.map(|t| PowerTail { beta: t.beta, coeff: t.coeff * c });
        out
    }
}

/// Cubic Lagrange interpolation through the four nodes around `x`.
pub(crate) fn lagrange_cubic<T: Real>(xs: &[T], ys: &[T], x: T) -> T {
    let n = xs.len();
    if n < 4 {
        // linear fallback
        let i = xs.partition_point(|&v| v <= x).clamp(1, n - 1);
        let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
        return ys[i - 1] + t * (ys[i] - ys[i - 1]);
    }
    let i = xs.partition_point(|&v| v <= x).clamp(2, n - 2) - 2;
    let mut acc = T::zero();
    for a in i..i + 4 {
        let mut l = T::one();
        for b in i..i + 4 {
            if a != b {
                l = l * (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
        acc = acc + l * ys[a];
    }
    acc
}

/// Shell kernel `K(s, rho, t)`: the integral of `(|rho w - s e|^2 + t^2)^{-nu}`
/// over the unit sphere in `R^n`.
#[derive(Debug, Clone)]
pub struct ShellKernel<T> {
    n: usize,
    nu: T,
    area_low: T,
    area_full: T,
    panel: QuadRule<T>,
}

impl<T: Real> ShellKernel<T> {
    pub fn new(n: usize, nu: T) -> Result<Self, FracopsError> {
        Ok(Self {
            n,
            nu,
            area_low: specfun::sphere_area(n - 1),
            area_full: specfun::sphere_area(n),
            panel: quadrature::gauss_legendre(16)?,
        })
    }

    pub fn eval(&self, s: T, rho: T, t: T) -> T {
        if s == T::zero() || rho == T::zero() {
            return self.area_full * (s * s + rho * rho + t * t).powf(-self.nu);
        }
        let d2 = (s - rho) * (s - rho) + t * t;
        let a = T::lit(4.0) * s * rho;
        // angular width of the peak at phi = 0
        let width = (d2 / (s * rho)).sqrt().max(T::lit(1e-300));
        let sin_exp = T::from_usize_lossy(self.n - 2);
        let half = T::lit(0.5);
        let mut total = T::zero();
        for (lo, hi) in graded_panels(T::zero(), T::PI(), width * half, T::lit(0.25), true) {
            let rule = self.panel.mapped(lo, hi);
            total = total
                + rule.integrate(|phi| {
                    let sh = (phi * half).sin();
                    let jac = if self.n == 2 { T::one() } else { phi.sin().powf(sin_exp) };
                    jac * (d2 + a * sh * sh).powf(-self.nu)
                });
        }
        self.area_low * total
    }
}

/// Value of a principal-value integral with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvEstimate<T> {
    pub value: T,
    pub error: T,
}

const RHO_MIN_FRACTION: f64 = 1e-12;
const NEAR_FRACTION: f64 = 1e-3;
const PV_REL_TOL: f64 = 1e-8;

/// `(-Laplace)^sigma u` at `|x| = r0` for the dimension of `params`.
pub fn frac_laplacian_radial<T: Real>(
    u: &RadialTrace<T>,
    r0: T,
    params: &Params<T>,
) -> Result<PvEstimate<T>, FracopsError> {
    frac_laplacian_at(u, r0, params.n(), params.sigma())
}

/// `(-Laplace)^sigma u` at `|x| = r0` for arbitrary `(n, sigma)`.
pub fn frac_laplacian_at<T: Real>(
    u: &RadialTrace<T>,
    r0: T,
    n: usize,
    sigma: T,
) -> Result<PvEstimate<T>, FracopsError> {
    if !(r0 > T::zero()) || !r0.is_finite() {
        return Err(FracopsError::BadRadius(r0.as_f64()));
    }
    let f = u.evaluator.as_ref().ok_or(FracopsError::MissingEvaluator)?;
    let (left, right) = match (u.left, u.right) {
        (Some(l), Some(r)) => (l, r),
        _ => return Err(FracopsError::UndeclaredTails),
    };
    let nn = T::from_usize_lossy(n);
    let two_sigma = sigma + sigma;
    if !(left.beta < nn && right.beta > -two_sigma) {
        return Err(FracopsError::TailOutOfRange { left: left.beta.as_f64(), right: right.beta.as_f64() });
    }
    let c = specfun::frac_laplacian_constant(n, sigma)?;
    let kernel = ShellKernel::new(n, (nn + two_sigma) / T::lit(2.0))?;
    let u0 = f(r0);
    let reflect = r0.powf(nn - two_sigma);
    let paired = |rho: T| -> T {
        rho.powf(nn - T::one()) * (u0 - f(rho)) + reflect * rho.powf(two_sigma - T::one()) * (u0 - f(r0 * r0 / rho))
    };

    // [0, rho_min]: kernel is constant there, integrate the tail laws exactly
    let rho_m = r0 * T::lit(RHO_MIN_FRACTION);
    let k0 = specfun::sphere_area::<T>(n) * r0.powf(-nn - two_sigma);
    let head = k0
        * (u0 * rho_m.powf(nn) / nn - left.coeff * rho_m.powf(nn - left.beta) / (nn - left.beta)
            + reflect * u0 * rho_m.powf(two_sigma) / two_sigma
            - reflect * r0.powf(-right.beta - right.beta) * right.coeff * rho_m.powf(two_sigma + right.beta)
                / (two_sigma + right.beta));

    let eps_c = r0 * T::lit(NEAR_FRACTION);
    let mut estimates = [T::zero(); 2];
    for (slot, order) in estimates.iter_mut().zip([16usize, 12]) {
        let gl = quadrature::gauss_legendre::<T>(order)?;
        let mut acc = head;
        let half_r = r0 / T::lit(2.0);
        for (lo, hi) in graded_panels(rho_m, half_r, rho_m, T::lit(0.25), true) {
            acc = acc + gl.mapped(lo, hi).integrate(|rho| kernel.eval(r0, rho, T::zero()) * paired(rho));
        }
        for (lo, hi) in graded_panels(half_r, r0 - eps_c, eps_c, T::lit(0.25), false) {
            acc = acc + gl.mapped(lo, hi).integrate(|rho| kernel.eval(r0, rho, T::zero()) * paired(rho));
        }
        acc = acc + near_diagonal(&kernel, &paired, r0, eps_c, sigma, order)?;
        *slot = acc;
    }
    let value = c * estimates[0];
    let error = c * (estimates[0] - estimates[1]).abs();
    let scale = value.abs().max(c * u0.abs() * r0.powf(-two_sigma));
    if error > T::lit(PV_REL_TOL) * scale.max(T::min_positive_value()) {
        return Err(FracopsError::NonConvergence { value: value.as_f64(), error: error.as_f64() });
    }
    Ok(PvEstimate { value, error })
}

/// `int_{r0-eps_c}^{r0} K B d rho` where `B = O(eps^2)`: `B / eps^2` is fitted
/// on `[eps_c, 4 eps_c]` and continued to the diagonal, the `eps^{1-2 sigma}`
/// behaviour of `K eps^2` is absorbed by a Gauss-Jacobi weight.
fn near_diagonal<T: Real, B: Fn(T) -> T>(
    kernel: &ShellKernel<T>,
    paired: &B,
    r0: T,
    eps_c: T,
    sigma: T,
    order: usize,
) -> Result<T, FracopsError> {
    let fit_nodes = 5usize;
    let (a, b) = (eps_c, T::lit(4.0) * eps_c);
    let mut xs = Vec::with_capacity(fit_nodes);
    let mut gs = Vec::with_capacity(fit_nodes);
    for j in 0..fit_nodes {
        let theta = T::PI() * (T::from_usize_lossy(j) + T::lit(0.5)) / T::from_usize_lossy(fit_nodes);
        let e = (a + b) / T::lit(2.0) + (b - a) / T::lit(2.0) * theta.cos();
        xs.push(e);
        gs.push(paired(r0 - e) / (e * e));
    }
    let poly = |e: T| -> T {
        let mut acc = T::zero();
        for i in 0..fit_nodes {
            let mut l = T::one();
            for j in 0..fit_nodes {
                if i != j {
                    l = l * (e - xs[j]) / (xs[i] - xs[j]);
                }
            }
            acc = acc + l * gs[i];
        }
        acc
    };
    let w = T::one() - sigma - sigma;
    let jac = quadrature::gauss_jacobi(order, T::zero(), w)?;
    let half = eps_c / T::lit(2.0);
    let scale = half.powf(w + T::one());
    let mut acc = T::zero();
    for (&x, &wt) in jac.nodes.iter().zip(&jac.weights) {
        let e = half * (x + T::one());
        let k = kernel.eval(r0, r0 - e, T::zero());
        acc = acc + wt * scale * k * e.powf(T::one() + sigma + sigma) * poly(e);
    }
    Ok(acc)
}

/// `(-Laplace)^sigma u - u^p` at each test radius.
pub fn pde_residual<T: Real>(u: &RadialTrace<T>, params: &Params<T>, test_radii: &[T]) -> Result<Vec<T>, FracopsError> {
    test_radii
        .iter()
        .map(|&r| {
            let lap = frac_laplacian_radial(u, r, params)?.value;
            Ok(lap - u.eval(r)?.powf(params.p()))
        })
        .collect()
}

/// Default sampling range of constructed traces.
pub const DEFAULT_R_MIN: f64 = 1e-6;
pub const DEFAULT_R_MAX: f64 = 1e2;
pub const DEFAULT_SAMPLES: usize = 161;

/// `A r^{-beta}` sampled on the default logarithmic grid.
pub fn singular_solution_trace<T: Real>(params: &Params<T>) -> Result<RadialTrace<T>, FracopsError> {
    let a = specfun::asymptotic_constant(params)?;
    let grid = log_grid(T::lit(DEFAULT_R_MIN), T::lit(DEFAULT_R_MAX), DEFAULT_SAMPLES);
    RadialTrace::power(grid, a, params.beta())
}

/// Infimum and supremum of `r^beta u(r)` over grid radii in `[lo, hi]`.
pub fn bounds_check<T: Real>(u: &RadialTrace<T>, params: &Params<T>, window: (T, T)) -> Result<(T, T), FracopsError> {
    let beta = params.beta();
    let mut c1 = T::infinity();
    let mut c2 = T::neg_infinity();
    for (&r, &v) in u.radii.iter().zip(&u.values) {
        if r >= window.0 && r <= window.1 {
            let w = r.powf(beta) * v;
            c1 = c1.min(w);
            c2 = c2.max(w);
        }
    }
    if c1 > c2 {
        return Err(FracopsError::EmptyWindow { lo: window.0.as_f64(), hi: window.1.as_f64() });
    }
    Ok((c1, c2))
}

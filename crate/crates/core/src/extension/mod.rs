//! Extension side of the problem: `div(t^{1-2 sigma} grad U) = 0` in the upper
//! half-space with `U(x, 0) = u(x)`.
//!
//! Axisymmetric fields are described in polar coordinates of the `(s, t)`
//! quarter plane, `s = |x| = rho cos theta`, `t = rho sin theta`, so that
//! `theta = 0` is the hyperplane and `theta = pi/2` the symmetry axis.

mod banded;
mod homogeneous;
mod solver;
mod zeta;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use banded::{BandedError, BandedLu, BandedMatrix};
pub use homogeneous::HomogeneousExtension;
pub use solver::{
    solve_nonlinear_annulus, Dirichlet, GridField, GridSpec, MeshSpec, SolveOutcome, SolveReport, SolverOptions,
};
pub use zeta::ZetaMap;

use crate::fracops::{FracopsError, PowerTail, RadialTrace, ShellKernel};
use crate::model::Params;
use crate::quadrature::{self, QuadError, QuadRule};
use crate::scalar::Real;
use crate::specfun::{self, SpecfunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtensionError {
    #[error("t = {0} must be positive")]
    NonPositiveT(f64),
    #[error("extension degree -{beta} outside the admissible range")]
    BadHomogeneity { beta: f64 },
    #[error("point (rho = {rho}, theta = {theta}) lies outside the field")]
    OutsideField { rho: f64, theta: f64 },
    #[error("derivative stencil at rho = {rho} would leave the grid")]
    StencilFailure { rho: f64 },
    #[error("field provides no gradient")]
    NoGradient,
    #[error("Richardson extrapolation did not settle; diagonal sequence {sequence:?}")]
    NonConvergentExtrapolation { sequence: Vec<f64> },
    #[error("Newton iteration diverged after {iterations} steps; damping history {damping:?}")]
    NewtonDivergence { iterations: usize, damping: Vec<f64>, residuals: Vec<f64> },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error(transparent)]
    Banded(#[from] BandedError),
    #[error(transparent)]
    Trace(#[from] FracopsError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

/// Evaluation interface of an axisymmetric field in polar coordinates.
pub trait AxiEvaluator<T: Real>: Send + Sync {
    fn value(&self, rho: T, theta: T) -> Result<T, ExtensionError>;

    /// `(d U / d rho, d U / d theta)`.
    fn gradient(&self, rho: T, theta: T) -> Result<(T, T), ExtensionError>;

    /// `U(s, 0)`.
    fn trace(&self, s: T) -> Result<T, ExtensionError> {
        self.value(s, T::zero())
    }

    /// Radii at which values and gradients are available.
    fn radial_range(&self) -> (T, T) {
        (T::zero(), T::infinity())
    }

    /// Weighted Neumann derivative computed natively, when the field has a
    /// better way than extrapolating in `t`.
    fn native_neumann(&self, _s: T) -> Option<Result<T, ExtensionError>> {
        None
    }
}

/// Axisymmetric field on the upper half-space with recorded samples.
#[derive(Clone)]
pub struct AxiField<T> {
    source: Arc<dyn AxiEvaluator<T>>,
    points: Vec<(T, T)>,
    values: Vec<T>,
    homogeneity: Option<T>,
    grid_spec: Option<GridSpec<T>>,
}

impl<T: Real> fmt::Debug for AxiField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AxiField")
            .field("samples", &self.points.len())
            .field("homogeneity", &self.homogeneity)
            .field("grid_spec", &self.grid_spec)
            .finish()
    }
}

impl<T: Real> AxiField<T> {
    pub fn new(source: Arc<dyn AxiEvaluator<T>>) -> Self {
        Self { source, points: Vec::new(), values: Vec::new(), homogeneity: None, grid_spec: None }
    }

    pub fn with_homogeneity(mut self, degree: T) -> Self {
        self.homogeneity = Some(degree);
        self
    }

    pub(crate) fn with_grid_spec(mut self, spec: GridSpec<T>) -> Self {
        self.grid_spec = Some(spec);
        self
    }

    /// Evaluates the field at `(s, t)` points and keeps them as samples.
    pub fn with_samples(mut self, points: &[(T, T)]) -> Result<Self, ExtensionError> {
        let mut values = Vec::with_capacity(points.len());
        for &(s, t) in points {
            values.push(self.value(s, t)?);
        }
        self.points = points.to_vec();
        self.values = values;
        Ok(self)
    }

    pub(crate) fn with_raw_samples(mut self, points: Vec<(T, T)>, values: Vec<T>) -> Self {
        self.points = points;
        self.values = values;
        self
    }

    pub fn source(&self) -> &Arc<dyn AxiEvaluator<T>> {
        &self.source
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn homogeneity(&self) -> Option<T> {
        self.homogeneity
    }

    pub fn grid_spec(&self) -> Option<&GridSpec<T>> {
        self.grid_spec.as_ref()
    }

    /// `U(s, t)` for `s, t >= 0`.
    pub fn value(&self, s: T, t: T) -> Result<T, ExtensionError> {
        if t == T::zero() {
            return self.source.trace(s);
        }
        self.source.value(s.hypot(t), t.atan2(s))
    }

    pub fn polar_value(&self, rho: T, theta: T) -> Result<T, ExtensionError> {
        self.source.value(rho, theta)
    }

    pub fn polar_gradient(&self, rho: T, theta: T) -> Result<(T, T), ExtensionError> {
        self.source.gradient(rho, theta)
    }

    pub fn radial_range(&self) -> (T, T) {
        self.source.radial_range()
    }
}

/// Poisson kernel of the extension with its normalizing constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec<T> {
    pub n: usize,
    pub sigma: T,
    /// Chosen so that the extension of `u = 1` is identically 1.
    pub normalization: T,
}

impl<T: Real> KernelSpec<T> {
    /// Determines the normalization numerically from the extension of 1 at
    /// `(s, t) = (0, 1)`.
    pub fn new(n: usize, sigma: T) -> Result<Self, ExtensionError> {
        if n < 2 || !(sigma > T::zero() && sigma < T::one()) {
            return Err(QuadError::InvalidParameters { n, sigma: sigma.as_f64() }.into());
        }
        let one = PowerTail { beta: T::zero(), coeff: T::one() };
        let nn = T::from_usize_lossy(n);
        let kernel = ShellKernel::new(n, (nn + sigma + sigma) / T::lit(2.0))?;
        let mass = radial_integral(&|_| T::one(), one, one, &kernel, n, sigma, T::zero(), T::one())?;
        Ok(Self { n, sigma, normalization: T::one() / mass })
    }

    pub fn nu(&self) -> T {
        (T::from_usize_lossy(self.n) + self.sigma + self.sigma) / T::lit(2.0)
    }
}

/// `P(d, t) = c t^{2 sigma} / (d^2 + t^2)^{(n + 2 sigma)/2}`.
pub fn poisson_kernel<T: Real>(spec: &KernelSpec<T>, x_dist: T, t: T) -> Result<T, ExtensionError> {
    if !(t > T::zero()) {
        return Err(ExtensionError::NonPositiveT(t.as_f64()));
    }
    Ok(spec.normalization * t.powf(spec.sigma + spec.sigma) * (x_dist * x_dist + t * t).powf(-spec.nu()))
}

const RADIAL_SPAN: f64 = 1e12;

/// `int_0^inf rho^{n-1} u(rho) K(s, rho, t) d rho` with analytic closures of
/// the tails below `L / 10^12` and above `10^12 L`, `L = max(s, t)`.
#[allow(clippy::too_many_arguments)]
fn radial_integral<T: Real, F: Fn(T) -> T>(
    u: &F,
    left: PowerTail<T>,
    right: PowerTail<T>,
    kernel: &ShellKernel<T>,
    n: usize,
    sigma: T,
    s: T,
    t: T,
) -> Result<T, ExtensionError> {
    let nn = T::from_usize_lossy(n);
    let two_sigma = sigma + sigma;
    let nu = (nn + two_sigma) / T::lit(2.0);
    let big = s.max(t);
    let span = T::lit(RADIAL_SPAN);
    let rho_min = big / span;
    let rho_max = big * span;
    let four = T::lit(4.0);

    let mut panels: Vec<(T, T)> = Vec::new();
    let mut a = big;
    while a > rho_min {
        panels.push((a / four, a));
        a = a / four;
    }
    let mut b = big;
    while b < rho_max {
        panels.push((b, b * four));
        b = b * four;
    }
    if s > T::zero() && t < s + s {
        // sharp peak at rho = s: refine toward it from both sides
        panels.retain(|&(lo, hi)| !(lo == s / four && hi == s) && !(lo == s && hi == s * four));
        let q = T::lit(0.25);
        let w = t / four;
        panels.push((s / four, s / T::lit(2.0)));
        panels.extend(quadrature::graded_panels(s / T::lit(2.0), s, w, q, false));
        panels.extend(quadrature::graded_panels(s, s + s, w, q, true));
        panels.push((s + s, s * four));
    }
    let gl: QuadRule<T> = quadrature::gauss_legendre(16)?;
    let mut total = T::zero();
    for (lo, hi) in panels {
        total = total + gl.mapped(lo, hi).integrate(|rho| rho.powf(nn - T::one()) * u(rho) * kernel.eval(s, rho, t));
    }
    let area = specfun::sphere_area::<T>(n);
    let lo_rho = a;
    // below: kernel frozen at rho = 0
    total = total + area * (s * s + t * t).powf(-nu) * left.coeff * lo_rho.powf(nn - left.beta) / (nn - left.beta);
    // above: kernel ~ |S^{n-1}| rho^{-n-2 sigma}
    total = total + area * right.coeff * b.powf(-right.beta - two_sigma) / (right.beta + two_sigma);
    Ok(total)
}

/// Poisson extension of a radial trace, evaluated lazily.
#[derive(Clone)]
pub struct PoissonExtension<T> {
    trace: RadialTrace<T>,
    spec: KernelSpec<T>,
    kernel: ShellKernel<T>,
    left: PowerTail<T>,
    right: PowerTail<T>,
}

impl<T: Real> PoissonExtension<T> {
    pub fn new(trace: RadialTrace<T>, spec: KernelSpec<T>) -> Result<Self, ExtensionError> {
        if !trace.has_evaluator() {
            return Err(FracopsError::MissingEvaluator.into());
        }
        let (left, right) = match (trace.left_tail(), trace.right_tail()) {
            (Some(l), Some(r)) => (l, r),
            _ => return Err(FracopsError::UndeclaredTails.into()),
        };
        let nn = T::from_usize_lossy(spec.n);
        if !(left.beta < nn && right.beta > -(spec.sigma + spec.sigma)) {
            return Err(FracopsError::TailOutOfRange { left: left.beta.as_f64(), right: right.beta.as_f64() }.into());
        }
        let kernel = ShellKernel::new(spec.n, spec.nu())?;
        Ok(Self { trace, spec, kernel, left, right })
    }

    /// `U(s, t)` in cylindrical coordinates.
    pub fn at(&self, s: T, t: T) -> Result<T, ExtensionError> {
        if t < T::zero() {
            return Err(ExtensionError::NonPositiveT(t.as_f64()));
        }
        if t == T::zero() {
            return Ok(self.trace.eval(s)?);
        }
        let f = self.trace.evaluator().expect("checked in new");
        let integral =
            radial_integral(&|r| f(r), self.left, self.right, &self.kernel, self.spec.n, self.spec.sigma, s, t)?;
        Ok(self.spec.normalization * t.powf(self.spec.sigma + self.spec.sigma) * integral)
    }
}

impl<T: Real> AxiEvaluator<T> for PoissonExtension<T> {
    fn value(&self, rho: T, theta: T) -> Result<T, ExtensionError> {
        let (sn, cs) = theta.sin_cos();
        let t = if theta == T::zero() { T::zero() } else { rho * sn };
        self.at(rho * cs, t)
    }

    fn gradient(&self, _rho: T, _theta: T) -> Result<(T, T), ExtensionError> {
        Err(ExtensionError::NoGradient)
    }

    fn trace(&self, s: T) -> Result<T, ExtensionError> {
        Ok(self.trace.eval(s)?)
    }
}

/// Poisson extension of `u` sampled at the given `(s, t)` points.
pub fn extend_trace<T: Real>(
    u: &RadialTrace<T>,
    spec: &KernelSpec<T>,
    points: &[(T, T)],
) -> Result<AxiField<T>, ExtensionError> {
    if let Some(&(_, t)) = points.iter().find(|p| !(p.1 > T::zero())) {
        return Err(ExtensionError::NonPositiveT(t.as_f64()));
    }
    let ext = PoissonExtension::new(u.clone(), *spec)?;
    let mut field = AxiField::new(Arc::new(ext));
    if let Some(h) = u.homogeneity() {
        field = field.with_homogeneity(h);
    }
    field.with_samples(points)
}

/// Amplitude `a` for which `a |x|^{-beta}` with its extension solves the
/// extension system with the literal Neumann derivative:
/// `a = (2^{1-2 sigma} Gamma(1-sigma)/Gamma(sigma))^{1/(p-1)} A`.
pub fn extension_amplitude<T: Real>(params: &Params<T>) -> Result<T, ExtensionError> {
    let c = specfun::neumann_constant(params.sigma())?;
    let a = specfun::asymptotic_constant(params)?;
    Ok(c.powf(T::one() / (params.p() - T::one())) * a)
}

/// Exact singular solution of the extension system, homogeneous of degree `-beta`.
pub fn singular_extension<T: Real>(params: &Params<T>) -> Result<AxiField<T>, ExtensionError> {
    let amp = extension_amplitude(params)?;
    let h = HomogeneousExtension::new(params.n(), params.sigma(), params.beta(), amp)?;
    Ok(AxiField::new(Arc::new(h)).with_homogeneity(-params.beta()))
}

/// Closed-form extension of `amplitude |x|^{-beta}`.
pub fn homogeneous_field<T: Real>(n: usize, sigma: T, beta: T, amplitude: T) -> Result<AxiField<T>, ExtensionError> {
    let h = HomogeneousExtension::new(n, sigma, beta, amplitude)?;
    Ok(AxiField::new(Arc::new(h)).with_homogeneity(-beta))
}

/// Result of the weighted-limit extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannEstimate<T> {
    pub value: T,
    /// Diagonal of the Richardson table, first to last.
    pub diagonal: Vec<T>,
}

const NEUMANN_LEVELS: usize = 8;
const NEUMANN_REL_TOL: f64 = 1e-6;

/// Exponents of the expansion of `(U(t) - U(0)) / z` in powers of
/// `z = t^{2 sigma} / (2 sigma)`: `b / sigma - 1` and `b / sigma`, `b >= 1`.
fn correction_exponents<T: Real>(sigma: T, count: usize) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    let mut b = 1usize;
    while out.len() < 4 * count {
        let bb = T::from_usize_lossy(b);
        out.push(bb / sigma - T::one());
        out.push(bb / sigma);
        b += 1;
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    out.dedup_by(|a, b| (*a - *b).abs() < T::lit(1e-9));
    out.retain(|&g| g > T::lit(1e-9));
    out.truncate(count);
    out
}

/// `-lim_{t -> 0} t^{1-2 sigma} d_t U(t)` for a profile `t -> U(t)`.
///
/// In `z = t^{2 sigma}/(2 sigma)` the limit is `-dU/dz` at `z = 0`; one-sided
/// quotients on `z_k = z_0 2^{-k}` are Richardson-extrapolated. `t_scale` sets
/// the largest `t` used (a quarter of it).
pub fn neumann_limit<T: Real, F>(profile: F, t_scale: T, sigma: T) -> Result<NeumannEstimate<T>, ExtensionError>
where
    F: Fn(T) -> Result<T, ExtensionError>,
{
    let two_sigma = sigma + sigma;
    let t0 = T::lit(0.25) * t_scale;
    let z0 = t0.powf(two_sigma) / two_sigma;
    let u0 = profile(T::zero())?;
    let levels = NEUMANN_LEVELS;
    let gammas = correction_exponents(sigma, levels);
    let mut table: Vec<Vec<T>> = Vec::with_capacity(levels + 1);
    for k in 0..=levels {
        let z = z0 * T::lit(2.0).powi(-(k as i32));
        let t = (two_sigma * z).powf(T::one() / two_sigma);
        let d = (profile(t)? - u0) / z;
        let mut row = vec![d];
        for j in 1..=k {
            let f = T::lit(2.0).powf(gammas[j - 1]);
            let prev = &table[k - 1];
            row.push((f * row[j - 1] - prev[j - 1]) / (f - T::one()));
        }
        table.push(row);
    }
    let diagonal: Vec<T> = table.iter().enumerate().map(|(k, r)| -r[k]).collect();
    // the last entries carry the most roundoff; accept the best settled pair
    let mut best: Option<(T, T)> = None;
    for k in 2..diagonal.len() {
        let gap = (diagonal[k] - diagonal[k - 1]).abs();
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, diagonal[k]));
        }
    }
    let (gap, value) = best.expect("at least three levels");
    let scale = value.abs().max(diagonal[0].abs()).max(T::min_positive_value());
    if gap > T::lit(NEUMANN_REL_TOL) * scale && gap > T::lit(1e-12) * (u0.abs() / z0).max(T::min_positive_value()) {
        return Err(ExtensionError::NonConvergentExtrapolation {
            sequence: diagonal.iter().map(|d| d.as_f64()).collect(),
        });
    }
    Ok(NeumannEstimate { value, diagonal })
}

/// Weighted Neumann derivative of `U` at `(s0, 0)`.
pub fn neumann_trace<T: Real>(u: &AxiField<T>, s0: T, params: &Params<T>) -> Result<T, ExtensionError> {
    if let Some(v) = u.source.native_neumann(s0) {
        return v;
    }
    neumann_limit(|t| u.value(s0, t), s0, params.sigma()).map(|e| e.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracops::log_grid;

    #[test]
    fn kernel_normalization_matches_closed_form() {
        for (n, s) in [(2usize, 0.5), (3, 0.5), (3, 0.25), (4, 0.8)] {
            let spec = KernelSpec::<f64>::new(n, s).unwrap();
            let c = specfun::poisson_constant(n, s).unwrap();
            assert!((spec.normalization - c).abs() < 1e-8 * c, "n={n} s={s}");
            assert!((poisson_kernel(&spec, 0.0, 1.0).unwrap() - spec.normalization).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_is_homogeneous() {
        let spec = KernelSpec::<f64>::new(3, 0.3).unwrap();
        let (d, t, l) = (0.7, 0.2, 3.3);
        let a = poisson_kernel(&spec, l * d, l * t).unwrap();
        let b = poisson_kernel(&spec, d, t).unwrap();
        assert!((a - l.powi(-3) * b).abs() < 1e-14 * a);
        assert!(poisson_kernel(&spec, d, 0.0).is_err());
    }

    #[test]
    fn constants_extend_to_constants() {
        let spec = KernelSpec::<f64>::new(3, 0.4).unwrap();
        let u = RadialTrace::power(log_grid(1e-2, 1e2, 9), 2.5, 0.0).unwrap();
        let pts = [(0.3, 0.01), (1.0, 1.0), (0.0, 2.0), (7.0, 1e-4), (1e-3, 5.0)];
        let field = extend_trace(&u, &spec, &pts).unwrap();
        for v in field.values() {
            assert!((v - 2.5).abs() < 2.5e-10, "{v}");
        }
    }

    #[test]
    fn neumann_of_simple_profiles() {
        for s in [0.3, 0.5, 0.8] {
            let c = neumann_limit(|_| Ok(4.0f64), 1.0, s).unwrap();
            assert!(c.value.abs() < 1e-12);
            let p = neumann_limit(|t: f64| Ok(t.powf(2.0 * s)), 1.0, s).unwrap();
            assert!((p.value + 2.0 * s).abs() < 1e-10, "s={s}: {}", p.value);
            // with higher-order terms t^2 and t^{2+2s}
            let q =
                neumann_limit(|t: f64| Ok(1.0 + 3.0 * t.powf(2.0 * s) + t * t - 0.5 * t.powf(2.0 + 2.0 * s)), 1.0, s)
                    .unwrap();
            assert!((q.value + 6.0 * s).abs() < 1e-8, "s={s}: {}", q.value);
        }
    }

    #[test]
    fn correction_exponents_at_half_are_integers() {
        let g = correction_exponents(0.5f64, 5);
        assert_eq!(g, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn poisson_extension_matches_closed_form() {
        for (n, s, beta) in [(3usize, 0.5, 1.25), (2, 0.75, 0.4), (3, 0.3, 1.7)] {
            let spec = KernelSpec::<f64>::new(n, s).unwrap();
            let u = RadialTrace::power(log_grid(1e-3, 1e3, 31), 1.0, beta).unwrap();
            let ext = PoissonExtension::new(u, spec).unwrap();
            let h = HomogeneousExtension::new(n, s, beta, 1.0).unwrap();
            for (sp, tp) in [(1.0, 0.5), (0.2, 1.0), (1.0, 1e-3), (0.0, 1.0)] {
                let rho = f64::hypot(sp, tp);
                let th = f64::atan2(tp, sp);
                let a = ext.at(sp, tp).unwrap();
                let b = h.value(rho, th).unwrap();
                assert!((a - b).abs() < 1e-9 * b, "n={n} s={s} ({sp},{tp}): {a} vs {b}");
            }
        }
    }
}

//! Kelvin transforms, the moving-sphere scan, blow-up rescaling and the
//! estimator of `lim r^beta u(r)`.
//!
//! For a center `X = (x, 0)` and radius `lambda`,
//!
//! ```text
//! U_{X,lambda}(xi) = (lambda / |xi - X|)^{n - 2 sigma} U(X + lambda^2 (xi - X) / |xi - X|^2).
//! ```

use std::sync::Arc;

use thiserror::Error;

use crate::extension::{neumann_limit, AxiEvaluator, AxiField, ExtensionError};
use crate::fracops::{FracopsError, PowerTail, RadialTrace};
use crate::model::Params;
use crate::scalar::Real;
use crate::specfun::{self, SpecfunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KelvinError {
    #[error("lambda = {0} must be positive")]
    NonPositiveLambda(f64),
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("point {point:?} coincides with an excluded point")]
    ExcludedPoint { point: Vec<f64> },
    #[error("inversion image {image:?} lies outside the input's domain")]
    ImageOutsideDomain { image: Vec<f64> },
    #[error("moving-sphere scan set is empty")]
    EmptyScanSet,
    #[error("rescaled domain is empty")]
    EmptyDomain,
    #[error("invalid windows: {0}")]
    InvalidWindows(String),
    #[error("window means do not settle: {means:?}")]
    NonConvergentExtrapolation { means: Vec<f64> },
    #[error(transparent)]
    Field(#[from] ExtensionError),
    #[error(transparent)]
    Trace(#[from] FracopsError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.hypot(x))
}

fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc.hypot(x - y))
}

fn as_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn check_lambda<T: Real>(lambda: T) -> Result<(), KelvinError> {
    if !(lambda > T::zero() && lambda.is_finite()) {
        return Err(KelvinError::NonPositiveLambda(lambda.as_f64()));
    }
    Ok(())
}

/// Function on `R^n` evaluated at arbitrary points.
pub trait PointTrace<T: Real>: Send + Sync {
    fn eval_point(&self, y: &[T]) -> Result<T, KelvinError>;
}

impl<T: Real> PointTrace<T> for RadialTrace<T> {
    fn eval_point(&self, y: &[T]) -> Result<T, KelvinError> {
        let r = norm(y);
        if r == T::zero() {
            return Err(KelvinError::ExcludedPoint { point: as_f64(y) });
        }
        Ok(self.eval(r)?)
    }
}

/// Function on the closed upper half-space `R^n x [0, inf)`.
pub trait HalfSpaceField<T: Real>: Send + Sync {
    fn eval_point(&self, x: &[T], t: T) -> Result<T, KelvinError>;
}

impl<T: Real> HalfSpaceField<T> for AxiField<T> {
    fn eval_point(&self, x: &[T], t: T) -> Result<T, KelvinError> {
        Ok(self.value(norm(x), t)?)
    }
}

/// Inversion of `y` in the sphere of radius `lambda` about `center`, and
/// the prefactor `(lambda / |y - center|)^{exponent}`.
fn invert<T: Real>(center: &[T], lambda: T, exponent: T, y: &[T], t: T) -> Result<(Vec<T>, T, T), KelvinError> {
    if y.len() != center.len() {
        return Err(KelvinError::DimensionMismatch { got: y.len(), expected: center.len() });
    }
    let d2 = y.iter().zip(center).fold(t * t, |acc, (&a, &c)| acc + (a - c) * (a - c));
    if d2 == T::zero() {
        return Err(KelvinError::ExcludedPoint { point: as_f64(y) });
    }
    let f = lambda * lambda / d2;
    let image: Vec<T> = y.iter().zip(center).map(|(&a, &c)| c + f * (a - c)).collect();
    let pre = (lambda / d2.sqrt()).powf(exponent);
    Ok((image, f * t, pre))
}

/// Kelvin transform of a trace on `R^n`.
#[derive(Clone)]
pub struct KelvinTrace<T> {
    inner: Arc<dyn PointTrace<T>>,
    center: Vec<T>,
    lambda: T,
    exponent: T,
}

impl<T: Real> KelvinTrace<T> {
    pub fn new(
        inner: Arc<dyn PointTrace<T>>,
        center: Vec<T>,
        lambda: T,
        n: usize,
        sigma: T,
    ) -> Result<Self, KelvinError> {
        check_lambda(lambda)?;
        if center.len() != n {
            return Err(KelvinError::DimensionMismatch { got: center.len(), expected: n });
        }
        let exponent = T::from_usize_lossy(n) - sigma - sigma;
        Ok(Self { inner, center, lambda, exponent })
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }
}

impl<T: Real> PointTrace<T> for KelvinTrace<T> {
    fn eval_point(&self, y: &[T]) -> Result<T, KelvinError> {
        let (image, _, pre) = invert(&self.center, self.lambda, self.exponent, y, T::zero())?;
        Ok(pre * self.inner.eval_point(&image)?)
    }
}

/// Kelvin transform of a field on the upper half-space about `(center, 0)`.
#[derive(Clone)]
pub struct KelvinField<T> {
    inner: Arc<dyn HalfSpaceField<T>>,
    center: Vec<T>,
    lambda: T,
    exponent: T,
}

impl<T: Real> KelvinField<T> {
    pub fn new(
        inner: Arc<dyn HalfSpaceField<T>>,
        center: Vec<T>,
        lambda: T,
        n: usize,
        sigma: T,
    ) -> Result<Self, KelvinError> {
        check_lambda(lambda)?;
        if center.len() != n {
            return Err(KelvinError::DimensionMismatch { got: center.len(), expected: n });
        }
        let exponent = T::from_usize_lossy(n) - sigma - sigma;
        Ok(Self { inner, center, lambda, exponent })
    }
}

impl<T: Real> HalfSpaceField<T> for KelvinField<T> {
    fn eval_point(&self, x: &[T], t: T) -> Result<T, KelvinError> {
        let (image, ti, pre) = invert(&self.center, self.lambda, self.exponent, x, t)?;
        Ok(pre * self.inner.eval_point(&image, ti)?)
    }
}

/// [`KelvinTrace`] of `u` about `center`.
pub fn kelvin_transform_trace<T: Real>(
    u: Arc<dyn PointTrace<T>>,
    center: &[T],
    lambda: T,
    n: usize,
    sigma: T,
) -> Result<KelvinTrace<T>, KelvinError> {
    KelvinTrace::new(u, center.to_vec(), lambda, n, sigma)
}

/// [`KelvinField`] of `u` about `(center, 0)`.
pub fn kelvin_transform_field<T: Real>(
    u: Arc<dyn HalfSpaceField<T>>,
    center: &[T],
    lambda: T,
    n: usize,
    sigma: T,
) -> Result<KelvinField<T>, KelvinError> {
    KelvinField::new(u, center.to_vec(), lambda, n, sigma)
}

/// Kelvin transform about the origin, which keeps a trace radial: samples at
/// the images of the grid, composed evaluator, and tails swapped
/// (`c r^{-b}` becomes `c lambda^{n-2 sigma-2b} r^{-(n-2 sigma-b)}`).
pub fn kelvin_transform_radial<T: Real>(
    u: &RadialTrace<T>,
    lambda: T,
    n: usize,
    sigma: T,
) -> Result<RadialTrace<T>, KelvinError> {
    check_lambda(lambda)?;
    let e = T::from_usize_lossy(n) - sigma - sigma;
    let l2 = lambda * lambda;
    let radii: Vec<T> = u.radii().iter().rev().map(|&r| l2 / r).collect();
    let values: Vec<T> =
        u.radii().iter().zip(u.values()).rev().map(|(&r, &v)| (lambda / (l2 / r)).powf(e) * v).collect();
    let mut out = RadialTrace::from_samples(radii, values)?;
    if let Some(f) = u.evaluator() {
        let f = f.clone();
        out = out.with_evaluator(Arc::new(move |r: T| (lambda / r).powf(e) * f(l2 / r)));
    }
    let swap = |t: PowerTail<T>| PowerTail { beta: e - t.beta, coeff: t.coeff * lambda.powf(e - t.beta - t.beta) };
    if let (Some(l), Some(r)) = (u.left_tail(), u.right_tail()) {
        out = out.with_tail_laws(swap(r), swap(l));
    }
    if let Some(h) = u.homogeneity() {
        out = out.with_homogeneity(-e - h);
    }
    Ok(out)
}

/// `(lambda / |y - x|)^{p*}`, the weight of the transformed equation.
pub fn transformed_factor<T: Real>(params: &Params<T>, lambda: T, distance: T) -> T {
    (lambda / distance).powf(params.p_star())
}

/// Image of the origin under the inversion about `x`: `x - lambda^2 x / |x|^2`.
pub fn origin_image<T: Real>(center: &[T], lambda: T) -> Option<Vec<T>> {
    let c2 = center.iter().fold(T::zero(), |a, &v| a + v * v);
    if c2 == T::zero() {
        return None;
    }
    Some(center.iter().map(|&v| v - lambda * lambda * v / c2).collect())
}

/// Relative residual of the transformed boundary condition
/// `d U_{X,lambda} / d nu^sigma (y) = (lambda/|y - x|)^{p*} U_{X,lambda}^p (y)`
/// at each test point, with the left side from the weighted Neumann limit.
pub fn transformed_equation_residual<T: Real>(
    u: &AxiField<T>,
    center: &[T],
    lambda: T,
    test_points: &[Vec<T>],
    params: &Params<T>,
) -> Result<Vec<T>, KelvinError> {
    let n = params.n();
    let field = Arc::new(u.clone()) as Arc<dyn HalfSpaceField<T>>;
    let k = KelvinField::new(field, center.to_vec(), lambda, n, params.sigma())?;
    let y0 = origin_image(center, lambda);
    test_points
        .iter()
        .map(|y| {
            if y.len() != n {
                return Err(KelvinError::DimensionMismatch { got: y.len(), expected: n });
            }
            let dx = dist(y, center);
            let mut scale = dx.min(norm(y));
            if let Some(y0) = &y0 {
                scale = scale.min(dist(y, y0));
            }
            if !(scale > T::lit(1e-12) * (T::one() + norm(y))) {
                return Err(KelvinError::ExcludedPoint { point: as_f64(y) });
            }
            let neumann = neumann_limit(
                |t| {
                    k.eval_point(y, t).map_err(|e| match e {
                        KelvinError::Field(f) => f,
                        other => ExtensionError::InvalidGeometry(other.to_string()),
                    })
                },
                scale,
                params.sigma(),
            )?
            .value;
            let rhs = transformed_factor(params, lambda, dx) * k.eval_point(y, T::zero())?.powf(params.p());
            Ok((neumann - rhs) / rhs)
        })
        .collect()
}

/// Scan-set geometry for [`moving_sphere_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec<T> {
    /// Radial samples of `|y - x|` on `[lambda, span * lambda]`.
    pub radial: usize,
    /// Angles in `[0, pi]` measured from the direction of `x`.
    pub angular: usize,
    pub span: T,
    /// Radius of the ring around the origin, relative to `|x|`.
    pub origin_ring: T,
}

impl<T: Real> Default for ScanSpec<T> {
    fn default() -> Self {
        Self { radial: 80, angular: 33, span: T::lit(1e3), origin_ring: T::lit(1e-3) }
    }
}

/// Points `y` with `|y - x| >= lambda` in the plane spanned by `x` and a
/// second coordinate axis; radial inputs make this plane representative.
pub fn scan_points<T: Real>(x: &[T], lambda: T, spec: &ScanSpec<T>) -> Vec<Vec<T>> {
    let n = x.len();
    let r = norm(x);
    if n == 0 || r == T::zero() {
        return Vec::new();
    }
    let e1: Vec<T> = x.iter().map(|&v| v / r).collect();
    // unit vector orthogonal to e1
    let k = (0..n).min_by(|&a, &b| e1[a].abs().partial_cmp(&e1[b].abs()).expect("finite")).unwrap_or(0);
    let mut e2: Vec<T> = (0..n).map(|i| if i == k { T::one() } else { T::zero() } - e1[i] * e1[k]).collect();
    let m = norm(&e2);
    e2.iter_mut().for_each(|v| *v = *v / m);
    let mut out = Vec::new();
    let radial = spec.radial.max(2);
    let angular = spec.angular.max(2);
    let log_span = spec.span.ln();
    for i in 0..radial {
        let rho = lambda * (log_span * T::from_usize_lossy(i) / T::from_usize_lossy(radial - 1)).exp();
        for j in 0..angular {
            let phi = T::PI() * T::from_usize_lossy(j) / T::from_usize_lossy(angular - 1);
            let (s, c) = phi.sin_cos();
            out.push((0..n).map(|q| x[q] + rho * (c * e1[q] + s * e2[q])).collect());
        }
    }
    let ring = spec.origin_ring * r;
    for j in 0..angular {
        let phi = T::PI() * T::from_usize_lossy(j) / T::from_usize_lossy(angular - 1);
        let (s, c) = phi.sin_cos();
        let y: Vec<T> = (0..n).map(|q| ring * (c * e1[q] + s * e2[q])).collect();
        if dist(&y, x) >= lambda {
            out.push(y);
        }
    }
    let tiny = T::lit(1e-12) * r;
    let y0 = origin_image(x, lambda);
    out.retain(|y| norm(y) > tiny && y0.as_ref().is_none_or(|y0| dist(y, y0) > tiny));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovingSphereReport<T> {
    pub center: Vec<T>,
    pub center_radius: T,
    pub lambda_grid: Vec<T>,
    /// `sup (u_{x,lambda} - u)` over the scan set of each `lambda`.
    pub deficits: Vec<T>,
    pub lambda_bar: T,
    /// Tolerance under which a deficit counts as nonpositive.
    pub tolerances: Vec<T>,
    /// The origin and the image of the origin at each `lambda`.
    pub excluded_points: Vec<Vec<T>>,
}

pub const DEFICIT_REL_TOL: f64 = 1e-9;

/// Deficits `d(lambda)` and the critical radius: the largest grid `lambda`
/// such that every `d` up to it is at most `1e-9 sup u` on its scan window.
pub fn moving_sphere_scan<T: Real>(
    u: &RadialTrace<T>,
    x: &[T],
    lambda_grid: &[T],
    spec: &ScanSpec<T>,
    n: usize,
    sigma: T,
) -> Result<MovingSphereReport<T>, KelvinError> {
    if x.len() != n {
        return Err(KelvinError::DimensionMismatch { got: x.len(), expected: n });
    }
    let r = norm(x);
    if r == T::zero() {
        return Err(KelvinError::ExcludedPoint { point: as_f64(x) });
    }
    if lambda_grid.is_empty() || lambda_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(KelvinError::InvalidWindows("lambda grid must be nonempty and increasing".into()));
    }
    for &l in lambda_grid {
        check_lambda(l)?;
    }
    let base: Arc<dyn PointTrace<T>> = Arc::new(u.clone());
    let results: Vec<Result<(T, T), KelvinError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = lambda_grid
            .iter()
            .map(|&lambda| {
                let base = base.clone();
                scope.spawn(move || {
                    let pts = scan_points(x, lambda, spec);
                    if pts.is_empty() {
                        return Err(KelvinError::EmptyScanSet);
                    }
                    let k = KelvinTrace::new(base.clone(), x.to_vec(), lambda, n, sigma)?;
                    let mut d = T::neg_infinity();
                    let mut sup_u = T::zero();
                    for y in &pts {
                        let uy = base.eval_point(y)?;
                        let ky = k.eval_point(y)?;
                        d = d.max(ky - uy);
                        sup_u = sup_u.max(uy);
                    }
                    Ok((d, T::lit(DEFICIT_REL_TOL) * sup_u))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scan worker panicked")).collect()
    });
    let mut deficits = Vec::with_capacity(lambda_grid.len());
    let mut tolerances = Vec::with_capacity(lambda_grid.len());
    for res in results {
        let (d, tol) = res?;
        deficits.push(d);
        tolerances.push(tol);
    }
    let mut lambda_bar = T::zero();
    for ((&l, &d), &tol) in lambda_grid.iter().zip(&deficits).zip(&tolerances) {
        if d > tol || l > r {
            break;
        }
        lambda_bar = l;
    }
    let mut excluded_points = vec![vec![T::zero(); n]];
    excluded_points.extend(lambda_grid.iter().filter_map(|&l| origin_image(x, l)));
    Ok(MovingSphereReport {
        center: x.to_vec(),
        center_radius: r,
        lambda_grid: lambda_grid.to_vec(),
        deficits,
        lambda_bar,
        tolerances,
        excluded_points,
    })
}

/// `count` equally spaced radii `|x|/count, ..., |x|`.
pub fn default_lambda_grid<T: Real>(center_radius: T, count: usize) -> Vec<T> {
    let c = T::from_usize_lossy(count.max(1));
    (1..=count.max(1)).map(|k| center_radius * T::from_usize_lossy(k) / c).collect()
}

/// `U^lambda(rho, theta) = lambda^beta U(lambda rho, theta)`.
struct Rescaled<T> {
    inner: Arc<dyn AxiEvaluator<T>>,
    lambda: T,
    beta: T,
    sigma: T,
}

impl<T: Real> AxiEvaluator<T> for Rescaled<T> {
    fn value(&self, rho: T, theta: T) -> Result<T, ExtensionError> {
        Ok(self.lambda.powf(self.beta) * self.inner.value(self.lambda * rho, theta)?)
    }

    fn gradient(&self, rho: T, theta: T) -> Result<(T, T), ExtensionError> {
        let (ur, ut) = self.inner.gradient(self.lambda * rho, theta)?;
        let f = self.lambda.powf(self.beta);
        Ok((f * self.lambda * ur, f * ut))
    }

    fn trace(&self, s: T) -> Result<T, ExtensionError> {
        Ok(self.lambda.powf(self.beta) * self.inner.trace(self.lambda * s)?)
    }

    fn radial_range(&self) -> (T, T) {
        let (lo, hi) = self.inner.radial_range();
        (lo / self.lambda, hi / self.lambda)
    }

    fn native_neumann(&self, s: T) -> Option<Result<T, ExtensionError>> {
        let f = self.lambda.powf(self.beta + self.sigma + self.sigma);
        self.inner.native_neumann(self.lambda * s).map(|r| r.map(|v| f * v))
    }
}

/// Blow-up rescaling of a field.
pub fn rescale_field<T: Real>(u: &AxiField<T>, lambda: T, params: &Params<T>) -> Result<AxiField<T>, KelvinError> {
    check_lambda(lambda)?;
    let (lo, hi) = u.radial_range();
    if !(lo / lambda < hi / lambda) {
        return Err(KelvinError::EmptyDomain);
    }
    let inner = u.source().clone();
    let mut out = AxiField::new(Arc::new(Rescaled { inner, lambda, beta: params.beta(), sigma: params.sigma() }));
    if let Some(h) = u.homogeneity() {
        out = out.with_homogeneity(h);
    }
    Ok(out)
}

/// Blow-up rescaling of a trace, `u^lambda(r) = lambda^beta u(lambda r)`.
pub fn rescale_trace<T: Real>(
    u: &RadialTrace<T>,
    lambda: T,
    params: &Params<T>,
) -> Result<RadialTrace<T>, KelvinError> {
    check_lambda(lambda)?;
    let beta = params.beta();
    let f = lambda.powf(beta);
    let radii: Vec<T> = u.radii().iter().map(|&r| r / lambda).collect();
    let values: Vec<T> = u.values().iter().map(|&v| f * v).collect();
    if radii.iter().any(|r| !(*r > T::zero() && r.is_finite())) {
        return Err(KelvinError::EmptyDomain);
    }
    let mut out = RadialTrace::from_samples(radii, values)?;
    if let Some(ev) = u.evaluator() {
        let ev = ev.clone();
        out = out.with_evaluator(Arc::new(move |r: T| f * ev(lambda * r)));
    }
    let law = |t: PowerTail<T>| PowerTail { beta: t.beta, coeff: t.coeff * lambda.powf(beta - t.beta) };
    if let (Some(l), Some(r)) = (u.left_tail(), u.right_tail()) {
        out = out.with_tail_laws(law(l), law(r));
    }
    if let Some(h) = u.homogeneity() {
        out = out.with_homogeneity(h);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    RemovableType,
    SingularType,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::RemovableType => "removable-type",
            Classification::SingularType => "singular-type",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupEstimate<T> {
    pub a_hat: T,
    pub classification: Classification,
    /// Fitted correction `c r^gamma`.
    pub coeff: T,
    pub gamma: T,
    /// Mean of `r^beta u` over each window, outermost first.
    pub window_means: Vec<T>,
    /// Relative RMS misfit of the fit; above `1e-3`
    /// together with oscillating window means the estimate is rejected.
    pub misfit: T,
}

/// Fraction of `A` above which an estimate counts as singular-type.
pub const SINGULAR_THRESHOLD: f64 = 0.5;
const SAMPLES_PER_WINDOW: usize = 33;
const MISFIT_TOL: f64 = 1e-3;

/// Decades `[r 10^{-k-1}, r 10^{-k}]`, `k = 0..decades`.
pub fn decade_windows<T: Real>(outer: T, decades: usize) -> Vec<(T, T)> {
    (0..decades)
        .map(|k| {
            let hi = outer * T::lit(10.0).powi(-(k as i32));
            (hi / T::lit(10.0), hi)
        })
        .collect()
}

/// Relative least-squares fit of `r^beta u(r)` by `a + c r^gamma`,
/// `gamma in (0, 1]`, over samples from decreasing windows; `a` estimates
/// `lim r^beta u`.
pub fn blowup_limit<T: Real>(
    u: &RadialTrace<T>,
    params: &Params<T>,
    windows: &[(T, T)],
) -> Result<BlowupEstimate<T>, KelvinError> {
    if windows.is_empty() {
        return Err(KelvinError::InvalidWindows("no windows".into()));
    }
    for (k, &(lo, hi)) in windows.iter().enumerate() {
        if !(lo > T::zero() && hi > lo) {
            return Err(KelvinError::InvalidWindows(format!("window [{lo}, {hi}]")));
        }
        if k > 0 && !(hi <= windows[k - 1].1 && lo < windows[k - 1].0) {
            return Err(KelvinError::InvalidWindows("windows must decrease".into()));
        }
    }
    let outer = windows[0].1;
    let inner = windows[windows.len() - 1].0;
    if inner > T::lit(1e-4) * outer {
        return Err(KelvinError::InvalidWindows(format!("windows reach only {inner}, need at most 1e-4 x {outer}")));
    }
    let beta = params.beta();
    let mut rs = Vec::new();
    let mut fs = Vec::new();
    let mut window_means = Vec::with_capacity(windows.len());
    for &(lo, hi) in windows {
        let (a, b) = (lo.ln(), hi.ln());
        let m = SAMPLES_PER_WINDOW;
        let mut sum = T::zero();
        for i in 0..m {
            let r = (a + (b - a) * T::from_usize_lossy(i) / T::from_usize_lossy(m - 1)).exp();
            let f = r.powf(beta) * u.eval(r)?;
            rs.push(r);
            fs.push(f);
            sum = sum + f;
        }
        window_means.push(sum / T::from_usize_lossy(m));
    }
    let scale = fs.iter().fold(T::zero(), |m, f| m.max(f.abs()));
    // inner fit is linear in (a, c); gamma by golden-section after a coarse scan
    // relative weights, so a limit of 0 is resolved as well as a positive one
    let wts: Vec<T> = fs.iter().map(|f| T::one() / f.abs().max(T::lit(1e-12) * scale).powi(2)).collect();
    let fit = |g: T| -> (T, T, T) {
        let xs: Vec<T> = rs.iter().map(|&r| (r / outer).powf(g)).collect();
        let (mut sw, mut sx, mut sxx, mut sy, mut sxy) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        for ((&x, &y), &w) in xs.iter().zip(&fs).zip(&wts) {
            sw = sw + w;
            sx = sx + w * x;
            sxx = sxx + w * x * x;
            sy = sy + w * y;
            sxy = sxy + w * x * y;
        }
        let det = sw * sxx - sx * sx;
        let (a, c) = if det.abs() <= T::lit(1e-14) * sw * sxx {
            (sy / sw, T::zero())
        } else {
            ((sxx * sy - sx * sxy) / det, (sw * sxy - sx * sy) / det)
        };
        let ss: T = xs.iter().zip(&fs).zip(&wts).map(|((x, y), w)| *w * (*y - a - c * *x).powi(2)).sum();
        (a, c, (ss / sw).sqrt())
    };
    let coarse = 100;
    let mut best_g = T::one();
    let mut best = fit(T::one());
    for i in 1..coarse {
        let g = T::from_usize_lossy(i) / T::from_usize_lossy(coarse);
        let f = fit(g);
        if f.2 < best.2 {
            best = f;
            best_g = g;
        }
    }
    let step = T::one() / T::from_usize_lossy(coarse);
    let (mut lo, mut hi) = ((best_g - step).max(T::lit(1e-6)), (best_g + step).min(T::one()));
    let phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    for _ in 0..80 {
        let g1 = hi - phi * (hi - lo);
        let g2 = lo + phi * (hi - lo);
        if fit(g1).2 <= fit(g2).2 {
            hi = g2;
        } else {
            lo = g1;
        }
    }
    let g = (lo + hi) / T::lit(2.0);
    let cand = fit(g);
    if cand.2 <= best.2 {
        best = cand;
        best_g = g;
    }
    let (a_hat, c, rms) = best;
    let misfit = rms;
    // oscillating means with a poor fit: no limit to report
    let floor = T::lit(1e-12) * scale;
    let signs: Vec<bool> =
        window_means.windows(2).filter(|w| (w[1] - w[0]).abs() > floor).map(|w| w[1] > w[0]).collect();
    let turns = signs.windows(2).filter(|w| w[0] != w[1]).count();
    if turns >= 2 && misfit > T::lit(MISFIT_TOL) {
        return Err(KelvinError::NonConvergentExtrapolation { means: as_f64(&window_means) });
    }
    let a_ref = specfun::asymptotic_constant(params)?;
    let classification = if a_hat >= T::lit(SINGULAR_THRESHOLD) * a_ref {
        Classification::SingularType
    } else {
        Classification::RemovableType
    };
    Ok(BlowupEstimate { a_hat, classification, coeff: c * outer.powf(-best_g), gamma: best_g, window_means, misfit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracops::{log_grid, singular_solution_trace};

    fn params() -> Params<f64> {
        Params::new(3, 0.5, 1.8).unwrap()
    }

    #[test]
    fn kelvin_of_power_about_origin() {
        let p = params();
        let a = 1.7f64;
        let u = RadialTrace::power(log_grid(1e-3, 1e3, 41), a, p.beta()).unwrap();
        let lam = 0.8f64;
        let k = kelvin_transform_radial(&u, lam, 3, 0.5).unwrap();
        let e = 3.0f64 - 1.0;
        for r in [0.01f64, 0.3, 2.0, 50.0] {
            let want = a * lam.powf(e - 2.0 * p.beta()) * r.powf(-(e - p.beta()));
            assert!((k.eval(r).unwrap() - want).abs() < 1e-13 * want);
        }
        assert_eq!(k.left_tail().unwrap().beta, e - p.beta());
        assert!((k.homogeneity().unwrap() + (e - p.beta())).abs() < 1e-15);
    }

    #[test]
    fn double_transform_and_sphere_fixing() {
        let p = params();
        let u: Arc<dyn PointTrace<f64>> = Arc::new(singular_solution_trace(&p).unwrap());
        let c = [0.4, -0.2, 0.1];
        let once = Arc::new(KelvinTrace::new(u.clone(), c.to_vec(), 0.7, 3, 0.5).unwrap());
        let twice = KelvinTrace::new(once.clone(), c.to_vec(), 0.7, 3, 0.5).unwrap();
        for y in [[1.0, 2.0, 0.5], [-0.3, 0.2, 0.9], [0.05, 0.0, 0.0]] {
            let a = u.eval_point(&y).unwrap();
            assert!((twice.eval_point(&y).unwrap() - a).abs() < 1e-12 * a);
        }
        // on |y - c| = lambda
        let y = [0.4 + 0.7, -0.2, 0.1];
        let a = u.eval_point(&y).unwrap();
        assert!((once.eval_point(&y).unwrap() - a).abs() < 1e-14 * a);
        assert!(once.eval_point(&c).is_err());
    }

    #[test]
    fn rescale_composition_and_fixed_point() {
        let p = params();
        let u =
            RadialTrace::from_fn(log_grid(1e-3, 1e3, 41), |r: f64| 1.0 / (1.0 + r * r)).unwrap().with_tails(0.0, 2.0);
        let a = rescale_trace(&rescale_trace(&u, 0.5, &p).unwrap(), 3.0, &p).unwrap();
        let b = rescale_trace(&u, 1.5, &p).unwrap();
        for r in [0.01, 0.7, 20.0] {
            assert!((a.eval(r).unwrap() - b.eval(r).unwrap()).abs() < 1e-13 * b.eval(r).unwrap());
        }
        let s = singular_solution_trace(&p).unwrap();
        let s2 = rescale_trace(&s, 2.0, &p).unwrap();
        for r in [0.01, 0.7, 20.0] {
            assert!((s2.eval(r).unwrap() - s.eval(r).unwrap()).abs() < 1e-13 * s.eval(r).unwrap());
        }
        assert!(rescale_trace(&u, 0.0, &p).is_err());
    }

    #[test]
    fn transformed_factor_arithmetic() {
        let p = params();
        assert!((p.p_star() - 0.4).abs() < 1e-15);
        assert!((transformed_factor(&p, 1.0, 2.0) - 2f64.powf(-0.4)).abs() < 1e-15);
        assert_eq!(transformed_factor(&p, 1.5, 1.5), 1.0);
    }

    #[test]
    fn constant_trace_reaches_the_cap() {
        let u = RadialTrace::from_fn(log_grid(1e-6, 1e6, 11), |_| 2.0).unwrap();
        let x = [0.0, 1.0];
        let grid = default_lambda_grid(1.0, 20);
        let rep = moving_sphere_scan(&u, &x, &grid, &ScanSpec::default(), 2, 0.4).unwrap();
        assert_eq!(rep.lambda_bar, 1.0);
        assert!(rep.deficits.iter().all(|&d| d <= 1e-12));
    }

    #[test]
    fn blowup_of_bounded_trace_is_removable() {
        let p = params();
        let u = RadialTrace::from_fn(log_grid(1e-6, 10.0, 21), |r: f64| 1.0 / (1.0 + r * r)).unwrap();
        let est = blowup_limit(&u, &p, &decade_windows(1.0, 5)).unwrap();
        assert_eq!(est.classification, Classification::RemovableType);
        assert!(est.a_hat.abs() < 1e-3);
        assert!(blowup_limit(&u, &p, &decade_windows(1.0, 2)).is_err());
    }
}

//! Monotone energy of extension fields.
//!
//! With `beta = 2 sigma/(p-1)`, `kappa = 2 sigma (p+1)/(p-1) - n` and all
//! hemisphere integrals taken over `{|X| = r, t > 0}` against `t^{1-2 sigma} dS`,
//!
//! ```text
//! E(r) = r^kappa [ r I(U_r^2) + beta I(U_r U) ] + beta J1 / 2 r^{kappa-1} I(U^2)
//!        - r^{kappa+1} [ I(|grad U|^2) / 2 - |S^{n-1}| r^{n-1} u(r)^{p+1} / (p+1) ],
//! dE/dr = J1 r^kappa I((U_r + beta U / r)^2).
//! ```

use thiserror::Error;

use crate::extension::{AxiField, ExtensionError};
use crate::fracops::log_grid;
use crate::kelvin::{self, KelvinError};
use crate::model::Params;
use crate::quadrature::{self, QuadError, QuadRule};
use crate::scalar::Real;
use crate::specfun::{self, SpecfunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("radius {r} outside the field's differentiable range [{lo}, {hi}]")]
    OutsideField { r: f64, lo: f64, hi: f64 },
    #[error("invalid radius range: {0}")]
    InvalidRange(String),
    #[error("energy sequence is not monotone: {values:?}")]
    NonMonotoneSequence { values: Vec<f64> },
    #[error("extrapolants of E(0+) did not settle: {extrapolants:?}")]
    NonConvergentSequence { values: Vec<f64>, extrapolants: Vec<f64> },
    #[error(transparent)]
    Field(#[from] ExtensionError),
    #[error(transparent)]
    Kelvin(#[from] KelvinError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

pub const DEFAULT_ENERGY_ORDER: usize = 128;

/// Hemisphere rules used by the energy: the plain weighted rule and a variant
/// for `U_theta^2`, which behaves like `theta^{4 sigma - 2}` when `sigma < 1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRule<T> {
    pub n: usize,
    pub sigma: T,
    pub base: QuadRule<T>,
    pub angular: QuadRule<T>,
}

impl<T: Real> EnergyRule<T> {
    pub fn new(n: usize, sigma: T, order: usize) -> Result<Self, QuadError> {
        let base = quadrature::hemisphere_rule(n, sigma, order)?;
        let lead = (T::lit(4.0) * sigma - T::lit(2.0)).min(T::zero());
        let angular = quadrature::hemisphere_rule_with_lead(n, sigma, order, lead)?;
        Ok(Self { n, sigma, base, angular })
    }

    pub fn for_params(params: &Params<T>, order: usize) -> Result<Self, QuadError> {
        Self::new(params.n(), params.sigma(), order)
    }

    pub fn order(&self) -> usize {
        self.base.len()
    }
}

fn kappa<T: Real>(params: &Params<T>) -> T {
    let two_sigma = params.sigma() + params.sigma();
    two_sigma * (params.p() + T::one()) / (params.p() - T::one()) - params.dim()
}

fn j1<T: Real>(params: &Params<T>) -> T {
    let b = params.beta();
    b + b - (params.dim() - params.sigma() - params.sigma())
}

fn check_radius<T: Real>(u: &AxiField<T>, r: T) -> Result<(), EnergyError> {
    let (lo, hi) = u.radial_range();
    if !(r > T::zero() && r >= lo && r <= hi) {
        return Err(EnergyError::OutsideField { r: r.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
    }
    Ok(())
}

fn check_rule<T: Real>(rule: &EnergyRule<T>, params: &Params<T>) -> Result<(), EnergyError> {
    if rule.n != params.n() || rule.sigma != params.sigma() {
        return Err(QuadError::InvalidParameters { n: rule.n, sigma: rule.sigma.as_f64() }.into());
    }
    Ok(())
}

/// Samples `f(U, U_rho, U_theta)` at the nodes of `rule` on the sphere of radius `r`.
fn hemisphere<T: Real, F>(u: &AxiField<T>, r: T, rule: &QuadRule<T>, n: usize, sigma: T, f: F) -> Result<T, EnergyError>
where
    F: Fn(T, T, T) -> T,
{
    let mut acc = T::zero();
    for (&th, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v = u.polar_value(r, th)?;
        let (ur, ut) = u.polar_gradient(r, th)?;
        acc = acc + w * f(v, ur, ut);
    }
    let measure = specfun::sphere_area::<T>(n) * r.powf(T::from_usize_lossy(n + 1) - sigma - sigma);
    let out = measure * acc;
    if !out.is_finite() {
        return Err(QuadError::NonFinite { node: r.as_f64(), value: out.as_f64() }.into());
    }
    Ok(out)
}

/// `E(r; U)`.
pub fn energy_at<T: Real>(u: &AxiField<T>, r: T, params: &Params<T>, rule: &EnergyRule<T>) -> Result<T, EnergyError> {
    check_rule(rule, params)?;
    check_radius(u, r)?;
    let (n, sigma) = (params.n(), params.sigma());
    let beta = params.beta();
    let p = params.p();
    let k = kappa(params);
    let half = T::lit(0.5);
    // U_r doubles as the normal derivative and the radial part of |grad U|^2
    let mut sums = [T::zero(); 3];
    for (&th, &w) in rule.base.nodes.iter().zip(&rule.base.weights) {
        let v = u.polar_value(r, th)?;
        let (ur, _) = u.polar_gradient(r, th)?;
        sums[0] = sums[0] + w * ur * ur;
        sums[1] = sums[1] + w * ur * v;
        sums[2] = sums[2] + w * v * v;
    }
    let measure = specfun::sphere_area::<T>(n) * r.powf(T::from_usize_lossy(n + 1) - sigma - sigma);
    let [normal_sq, normal_u, u_sq] = sums.map(|s| s * measure);
    let angular_sq = hemisphere(u, r, &rule.angular, n, sigma, |_, _, ut| ut * ut / (r * r))?;
    let grad_sq = normal_sq + angular_sq;
    let trace = u.value(r, T::zero())?;
    let boundary =
        specfun::sphere_area::<T>(n) * r.powi(n as i32 - 1) * trace.max(T::zero()).powf(p + T::one()) / (p + T::one());
    let e = r.powf(k) * (r * normal_sq + beta * normal_u) + half * beta * j1(params) * r.powf(k - T::one()) * u_sq
        - r.powf(k + T::one()) * (half * grad_sq - boundary);
    if !e.is_finite() {
        return Err(QuadError::NonFinite { node: r.as_f64(), value: e.as_f64() }.into());
    }
    Ok(e)
}

/// `dE/dr` evaluated from the closed-form derivative.
pub fn energy_derivative<T: Real>(
    u: &AxiField<T>,
    r: T,
    params: &Params<T>,
    rule: &EnergyRule<T>,
) -> Result<T, EnergyError> {
    check_rule(rule, params)?;
    check_radius(u, r)?;
    let beta = params.beta();
    let i = hemisphere(u, r, &rule.base, params.n(), params.sigma(), |v, ur, _| {
        let d = ur + beta * v / r;
        d * d
    })?;
    Ok(j1(params) * r.powf(kappa(params)) * i)
}

/// Sampled energy with formula and finite-difference derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyCurve<T> {
    pub radii: Vec<T>,
    pub e_values: Vec<T>,
    pub de_formula: Vec<T>,
    pub de_fd: Vec<T>,
    /// `E(r_{i+1}) >= E(r_i) - tol` for each interval.
    pub monotone_ok: Vec<bool>,
    pub tol: T,
}

impl<T: Real> EnergyCurve<T> {
    pub fn all_monotone(&self) -> bool {
        self.monotone_ok.iter().all(|&b| b)
    }

    /// `max E - min E` relative to `max |E|`.
    pub fn relative_spread(&self) -> T {
        let hi = self.e_values.iter().copied().fold(T::neg_infinity(), T::max);
        let lo = self.e_values.iter().copied().fold(T::infinity(), T::min);
        let scale = self.e_values.iter().fold(T::zero(), |m, e| m.max(e.abs()));
        if scale == T::zero() {
            T::zero()
        } else {
            (hi - lo) / scale
        }
    }
}

/// Relative tolerance of the `monotone_ok` flags.
pub const MONOTONE_REL_TOL: f64 = 1e-8;

/// Three-point derivative on a nonuniform grid, one-sided at the ends.
pub fn nonuniform_derivative<T: Real>(x: &[T], f: &[T]) -> Vec<T> {
    let m = x.len();
    assert!(m >= 3 && f.len() == m);
    let d3 = |i: usize, j: usize, k: usize, at: usize| -> T {
        // derivative at x[at] of the parabola through (i, j, k)
        let (a, b, c) = (x[i], x[j], x[k]);
        let t = x[at];
        f[i] * ((t - b) + (t - c)) / ((a - b) * (a - c))
            + f[j] * ((t - a) + (t - c)) / ((b - a) * (b - c))
            + f[k] * ((t - a) + (t - b)) / ((c - a) * (c - b))
    };
    (0..m)
        .map(|i| {
            if i == 0 {
                d3(0, 1, 2, 0)
            } else if i == m - 1 {
                d3(m - 3, m - 2, m - 1, m - 1)
            } else {
                d3(i - 1, i, i + 1, i)
            }
        })
        .collect()
}

/// `E` and `dE/dr` on `samples` geometrically spaced radii of `r_range`.
pub fn energy_curve<T: Real>(
    u: &AxiField<T>,
    r_range: (T, T),
    samples: usize,
    params: &Params<T>,
    rule: &EnergyRule<T>,
) -> Result<EnergyCurve<T>, EnergyError> {
    let (a, b) = r_range;
    if samples < 3 || !(a > T::zero() && b > a) {
        return Err(EnergyError::InvalidRange(format!("{samples} samples on [{a}, {b}]")));
    }
    check_radius(u, a)?;
    check_radius(u, b)?;
    let radii = log_grid(a, b, samples);
    let evals: Vec<Result<(T, T), EnergyError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = radii
            .iter()
            .map(|&r| scope.spawn(move || Ok((energy_at(u, r, params, rule)?, energy_derivative(u, r, params, rule)?))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("energy worker panicked")).collect()
    });
    let mut e_values = Vec::with_capacity(samples);
    let mut de_formula = Vec::with_capacity(samples);
    for v in evals {
        let (e, d) = v?;
        e_values.push(e);
        de_formula.push(d);
    }
    let de_fd = nonuniform_derivative(&radii, &e_values);
    let scale = e_values.iter().fold(T::zero(), |m, e| m.max(e.abs()));
    let tol = T::lit(MONOTONE_REL_TOL) * scale;
    let monotone_ok = e_values.windows(2).map(|w| w[1] >= w[0] - tol).collect();
    Ok(EnergyCurve { radii, e_values, de_formula, de_fd, monotone_ok, tol })
}

/// `E(lambda s; U) - E(s; U^lambda)` with `U^lambda` from [`kelvin::rescale_field`].
pub fn scaling_residual<T: Real>(
    u: &AxiField<T>,
    lambda: T,
    s: T,
    params: &Params<T>,
    rule: &EnergyRule<T>,
) -> Result<T, EnergyError> {
    let lhs = energy_at(u, lambda * s, params, rule)?;
    let scaled = kelvin::rescale_field(u, lambda, params)?;
    let rhs = energy_at(&scaled, s, params, rule)?;
    Ok(lhs - rhs)
}

/// Extrapolated `E(0+)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLimit<T> {
    pub value: T,
    /// Spread of the last three extrapolants.
    pub error: T,
    pub radii: Vec<T>,
    pub values: Vec<T>,
    pub extrapolants: Vec<T>,
}

pub const DEFAULT_LIMIT_TOL: f64 = 1e-6;
const LIMIT_MAX_TERMS: usize = 48;

/// [`energy_limit_with`] at the default tolerance.
pub fn energy_limit<T: Real>(
    u: &AxiField<T>,
    params: &Params<T>,
    rule: &EnergyRule<T>,
) -> Result<EnergyLimit<T>, EnergyError> {
    energy_limit_with(u, params, rule, T::lit(DEFAULT_LIMIT_TOL))
}

/// `lim_{r -> 0} E(r)` along `r_k = r_0 2^{-k}`, Aitken-accelerated.
///
/// `r_0` is the top of the field's range (1 when unbounded). The sequence
/// must be non-increasing as `r` shrinks; the limit is accepted once three
/// successive extrapolants agree to `tol` relative to `max |E|`.
pub fn energy_limit_with<T: Real>(
    u: &AxiField<T>,
    params: &Params<T>,
    rule: &EnergyRule<T>,
    tol: T,
) -> Result<EnergyLimit<T>, EnergyError> {
    let (lo, hi) = u.radial_range();
    let r0 = if hi.is_finite() { hi } else { T::one() };
    let mut radii = Vec::new();
    let mut values: Vec<T> = Vec::new();
    let mut extrapolants: Vec<T> = Vec::new();
    let as_f64 = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
    for k in 0..LIMIT_MAX_TERMS {
        let r = r0 * T::lit(0.5).powi(k as i32);
        if r < lo || r < T::min_positive_value() {
            break;
        }
        let e = energy_at(u, r, params, rule)?;
        radii.push(r);
        values.push(e);
        let scale = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let slack = T::lit(MONOTONE_REL_TOL) * scale;
        if values.len() >= 2 && values[values.len() - 1] > values[values.len() - 2] + slack {
            return Err(EnergyError::NonMonotoneSequence { values: as_f64(&values) });
        }
        if values.len() >= 3 {
            let m = values.len();
            let (e0, e1, e2) = (values[m - 3], values[m - 2], values[m - 1]);
            let den = e2 - e1 - (e1 - e0);
            let a = if den.abs() <= T::lit(1e-14) * scale.max(T::min_positive_value()) {
                e2
            } else {
                e2 - (e2 - e1) * (e2 - e1) / den
            };
            extrapolants.push(a);
        }
        if extrapolants.len() >= 3 {
            let m = extrapolants.len();
            let last = &extrapolants[m - 3..];
            let hi_a = last.iter().copied().fold(T::neg_infinity(), T::max);
            let lo_a = last.iter().copied().fold(T::infinity(), T::min);
            if hi_a - lo_a <= tol * scale.max(T::min_positive_value()) {
                return Ok(EnergyLimit { value: last[2], error: hi_a - lo_a, radii, values, extrapolants });
            }
        }
    }
    Err(EnergyError::NonConvergentSequence { values: as_f64(&values), extrapolants: as_f64(&extrapolants) })
}

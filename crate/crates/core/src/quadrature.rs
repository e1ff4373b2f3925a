//! Gauss rules: Legendre, Jacobi, and the graded hemisphere rule for
//! integrals against `cos^{n-1} theta sin^{1-2 sigma} theta` on `[0, pi/2]`.

use thiserror::Error;

use crate::scalar::Real;
use crate::specfun::{self, SpecfunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("rule order k = {k} outside the supported range {min}..={max}")]
    OrderOutOfRange { k: usize, min: usize, max: usize },
    #[error("invalid parameters for hemisphere rule: n = {n}, sigma = {sigma}")]
    InvalidParameters { n: usize, sigma: f64 },
    #[error("Jacobi exponents must exceed -1 (got {alpha}, {beta})")]
    JacobiExponent { alpha: f64, beta: f64 },
    #[error("integrand returned a non-finite value {value} at node {node}")]
    NonFinite { node: f64, value: f64 },
    #[error("eigenvalue iteration did not converge")]
    EigenNonConvergence,
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

/// Weight function a rule integrates against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSpec<T> {
    Unweighted,
    /// `(1 - x)^alpha (1 + x)^beta` on `[-1, 1]`.
    Jacobi {
        alpha: T,
        beta: T,
    },
    /// `cos^{cos_exp} theta * sin^{sin_exp} theta` on `[0, pi/2]`.
    Hemisphere {
        cos_exp: T,
        sin_exp: T,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub domain: (T, T),
    pub weight: WeightSpec<T>,
}

impl<T: Real> QuadRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_i w_i f(x_i)`.
    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F) -> T {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Same as [`integrate`](Self::integrate) but rejects non-finite samples.
    pub fn try_integrate<F: FnMut(T) -> T>(&self, mut f: F) -> Result<T, QuadError> {
        let mut acc = T::zero();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(QuadError::NonFinite { node: x.as_f64(), value: v.as_f64() });
            }
            acc = acc + w * v;
        }
        Ok(acc)
    }

    /// Affine image of an unweighted rule on `[-1, 1]` onto `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> QuadRule<T> {
        let half = (b - a) / T::lit(2.0);
        let mid = (a + b) / T::lit(2.0);
        QuadRule {
            nodes: self.nodes.iter().map(|&x| mid + half * x).collect(),
            weights: self.weights.iter().map(|&w| w * half).collect(),
            domain: (a, b),
            weight: self.weight,
        }
    }
}

pub const MAX_LEGENDRE_ORDER: usize = 512;

/// `k`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(k: usize) -> Result<QuadRule<T>, QuadError> {
    if !(1..=MAX_LEGENDRE_ORDER).contains(&k) {
        return Err(QuadError::OrderOutOfRange { k, min: 1, max: MAX_LEGENDRE_ORDER });
    }
    let kk = T::from_usize_lossy(k);
    let mut nodes = vec![T::zero(); k];
    let mut weights = vec![T::zero(); k];
    let two = T::lit(2.0);
    for i in 0..k.div_ceil(2) {
        let ii = T::from_usize_lossy(i);
        // Tricomi initial guess
        let mut x = (T::PI() * (ii + T::lit(0.75)) / (kk + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(k, x);
            dp = d;
            let dx = p / d;
            x = x - dx;
            if dx.abs() <= T::epsilon() * T::lit(2.0) {
                let (_, d) = legendre_with_derivative(k, x);
                dp = d;
                break;
            }
        }
        let w = two / ((T::one() - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[k - 1 - i] = x;
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    if k % 2 == 1 {
        nodes[k / 2] = T::zero();
    }
    Ok(QuadRule { nodes, weights, domain: (-T::one(), T::one()), weight: WeightSpec::Unweighted })
}

fn legendre_with_derivative<T: Real>(k: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for j in 2..=k {
        let jj = T::from_usize_lossy(j);
        let p2 = ((jj + jj - T::one()) * x * p1 - (jj - T::one()) * p0) / jj;
        p0 = p1;
        p1 = p2;
    }
    if k == 0 {
        return (T::one(), T::zero());
    }
    let kk = T::from_usize_lossy(k);
    let d = kk * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// `k`-point Gauss-Jacobi rule for `(1 - x)^alpha (1 + x)^beta` on `[-1, 1]`,
/// built from the eigen-decomposition of the Jacobi matrix.
pub fn gauss_jacobi<T: Real>(k: usize, alpha: T, beta: T) -> Result<QuadRule<T>, QuadError> {
    if !(1..=MAX_LEGENDRE_ORDER).contains(&k) {
        return Err(QuadError::OrderOutOfRange { k, min: 1, max: MAX_LEGENDRE_ORDER });
    }
    if !(alpha > -T::one() && beta > -T::one()) {
        return Err(QuadError::JacobiExponent { alpha: alpha.as_f64(), beta: beta.as_f64() });
    }
    let one = T::one();
    let two = T::lit(2.0);
    let ab = alpha + beta;
    let mut diag = vec![T::zero(); k];
    let mut off = vec![T::zero(); k];
    diag[0] = (beta - alpha) / (ab + two);
    for (j, d) in diag.iter_mut().enumerate().skip(1) {
        let jj = T::from_usize_lossy(j);
        let s = two * jj + ab;
        *d = (beta * beta - alpha * alpha) / (s * (s + two));
    }
    for (j, o) in off.iter_mut().enumerate().skip(1) {
        let jj = T::from_usize_lossy(j);
        let s = two * jj + ab;
        let b2 = if j == 1 {
            T::lit(4.0) * (one + alpha) * (one + beta) / ((two + ab) * (two + ab) * (T::lit(3.0) + ab))
        } else {
            T::lit(4.0) * jj * (jj + alpha) * (jj + beta) * (jj + ab) / (s * s * (s + one) * (s - one))
        };
        *o = b2.sqrt();
    }
    let mu0 = two.powf(ab + one) * specfun::beta_fn(alpha + one, beta + one)?;
    let (vals, first) = symmetric_tridiagonal_eigen(diag, off)?;
    let mut pairs: Vec<(T, T)> = vals.into_iter().zip(first).map(|(x, v)| (x, mu0 * v * v)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    Ok(QuadRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
        domain: (-one, one),
        weight: WeightSpec::Jacobi { alpha, beta },
    })
}

/// Implicit QL on a symmetric tridiagonal matrix. `off[i]` couples rows `i-1`
/// and `i`. Returns eigenvalues and the first component of each normalized
/// eigenvector.
fn symmetric_tridiagonal_eigen<T: Real>(mut d: Vec<T>, mut e: Vec<T>) -> Result<(Vec<T>, Vec<T>), QuadError> {
    let n = d.len();
    let mut z = vec![T::zero(); n];
    z[0] = T::one();
    // shift so that e[i] couples i and i+1
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(QuadError::EigenNonConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (T::lit(2.0) * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + r.abs() * g.signum());
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + T::lit(2.0) * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok((d, z))
}

/// Gauss rule for `int_0^h theta^b f(theta) d theta`, returned on `[0, h]` with
/// the weight folded into the weights.
fn left_weighted_panel<T: Real>(base: &QuadRule<T>, b: T, h: T) -> (Vec<T>, Vec<T>) {
    // base is Gauss-Jacobi with alpha = 0, beta = b on [-1, 1]
    let half = h / T::lit(2.0);
    let scale = half.powf(b + T::one());
    base.nodes.iter().zip(&base.weights).map(|(&x, &w)| (half * (x + T::one()), w * scale)).unzip()
}

/// Geometric grading ratio of the hemisphere rule's panels toward `theta = 0`.
pub const HEMISPHERE_GRADING: f64 = 0.25;

/// Graded composite rule for `int_0^{pi/2} cos^{n-1} t sin^{1-2 sigma} t g(t) dt`.
///
/// Panels shrink geometrically toward `theta = 0`, where the weight and the
/// extension fields carry non-integer powers of `theta`. The innermost panel
/// is Gauss-Jacobi with the singular power of `theta` built in; the rest are
/// Gauss-Legendre with the weight multiplied into the weights.
pub fn hemisphere_rule<T: Real>(n: usize, sigma: T, k: usize) -> Result<QuadRule<T>, QuadError> {
    hemisphere_rule_with_lead(n, sigma, k, T::zero())
}

/// Variant of [`hemisphere_rule`] for integrands that behave like
/// `theta^lead` at `theta = 0` (`lead > -2 + 2 sigma`); the innermost panel
/// carries `theta^{1 - 2 sigma + lead}` exactly.
pub fn hemisphere_rule_with_lead<T: Real>(n: usize, sigma: T, k: usize, lead: T) -> Result<QuadRule<T>, QuadError> {
    if n < 2 || !(sigma > T::zero() && sigma < T::one()) {
        return Err(QuadError::InvalidParameters { n, sigma: sigma.as_f64() });
    }
    if !(4..=4096).contains(&k) {
        return Err(QuadError::OrderOutOfRange { k, min: 4, max: 4096 });
    }
    let per_panel = if k >= 32 { 16 } else { (k / 2).max(2) };
    let panels = (k / per_panel).max(1);
    let cos_exp = T::from_usize_lossy(n - 1);
    let sin_exp = T::one() - sigma - sigma;
    let weight = |t: T| t.cos().powf(cos_exp) * t.sin().powf(sin_exp);
    let q = T::lit(HEMISPHERE_GRADING);
    let top = T::FRAC_PI_2();

    let mut nodes = Vec::with_capacity(panels * per_panel);
    let mut weights = Vec::with_capacity(panels * per_panel);

    let innermost = top * q.powi(panels as i32 - 1);
    let b = sin_exp + lead;
    if !(b > -T::one()) {
        return Err(QuadError::JacobiExponent { alpha: 0.0, beta: b.as_f64() });
    }
    let jac = gauss_jacobi(per_panel, T::zero(), b)?;
    let (xs, ws) = left_weighted_panel(&jac, b, if panels == 1 { top } else { innermost });
    for (x, w) in xs.into_iter().zip(ws) {
        let rest = x.cos().powf(cos_exp) * (x.sin() / x).powf(sin_exp) * x.powf(sin_exp - b);
        nodes.push(x);
        weights.push(w * rest);
    }
    if panels > 1 {
        let gl = gauss_legendre::<T>(per_panel)?;
        for j in (0..panels - 1).rev() {
            let hi = top * q.powi(j as i32);
            let lo = hi * q;
            let panel = gl.mapped(lo, hi);
            for (&x, &w) in panel.nodes.iter().zip(&panel.weights) {
                nodes.push(x);
                weights.push(w * weight(x));
            }
        }
    }
    Ok(QuadRule { nodes, weights, domain: (T::zero(), top), weight: WeightSpec::Hemisphere { cos_exp, sin_exp } })
}

/// Exact value of the hemisphere weight integral, `B(n/2, 1 - sigma) / 2`.
pub fn hemisphere_mass<T: Real>(n: usize, sigma: T) -> Result<T, SpecfunError> {
    let b = specfun::beta_fn(T::from_usize_lossy(n) / T::lit(2.0), T::one() - sigma)?;
    Ok(b / T::lit(2.0))
}

/// `int_{upper hemisphere of radius r} t^{1-2 sigma} g dS` for an axisymmetric
/// integrand given as a function of the polar angle.
pub fn integrate_hemisphere<T: Real, G: FnMut(T) -> T>(
    g: G,
    rule: &QuadRule<T>,
    r: T,
    n: usize,
    sigma: T,
) -> Result<T, QuadError> {
    let angular = rule.try_integrate(g)?;
    let measure = specfun::sphere_area::<T>(n) * r.powf(T::from_usize_lossy(n + 1) - sigma - sigma);
    Ok(measure * angular)
}

/// Gauss-Legendre panels over `[a, b]` refined geometrically toward `a`
/// (`toward_left = true`) or toward `b`, stopping once the innermost panel is
/// no wider than `min_width`.
pub(crate) fn graded_panels<T: Real>(a: T, b: T, min_width: T, ratio: T, toward_left: bool) -> Vec<(T, T)> {
    let mut out = Vec::new();
    let len = b - a;
    if len <= T::zero() {
        return out;
    }
    let mut w = len;
    // widths measured from the refined end
    let mut edges = vec![len];
    while w > min_width && edges.len() < 200 {
        w = w * ratio;
        edges.push(w);
    }
    edges.push(T::zero());
    for pair in edges.windows(2) {
        let (outer, inner) = (pair[0], pair[1]);
        if toward_left {
            out.push((a + inner, a + outer));
        } else {
            out.push((b - outer, b - inner));
        }
    }
    out
}

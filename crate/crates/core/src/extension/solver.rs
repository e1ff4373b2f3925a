//! Finite-volume solver for the extension system on a half-annulus.
//!
//! Unknowns live on the vertices of a tensor grid in `(x, zeta)`, `x = ln rho`.
//! Multiplying `div(t^{1-2 sigma} grad U) = 0` by `rho^2 sin^{1-2 sigma} theta`
//! and changing variables gives the conservative form
//!
//! ```text
//! d_x(e^{kx} B d_x U) + d_zeta(e^{kx} C d_zeta U) = 0,   k = n - 2 sigma,
//! B = cos^{n-1} theta sin^{2-4 sigma} theta,  C = cos^{n-1} theta,
//! ```
//!
//! and the nonlinear boundary condition turns into the flux
//! `e^{kx} d_zeta U = -e^{nx} U^p` through `zeta = 0`. The axis carries no flux
//! because `C` vanishes there.

use std::sync::Arc;

use crate::model::Params;
use crate::quadrature;
use crate::scalar::Real;

use super::banded::BandedMatrix;
use super::{AxiEvaluator, AxiField, ExtensionError, ZetaMap};

/// Cells in `ln rho` and in `zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshSpec {
    pub nx: usize,
    pub nz: usize,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self { nx: 256, nz: 128 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// Target for the row-scaled residual relative to `max |U|`.
    pub tol: T,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-9), max_iterations: 40, max_halvings: 40 }
    }
}

/// Geometry of a solved grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub n: usize,
    pub sigma: T,
    pub inner_r: T,
    pub outer_r: T,
    pub mesh: MeshSpec,
}

pub type BoundaryFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Dirichlet data on the two half-circles as functions of `theta`.
#[derive(Clone)]
pub struct Dirichlet<T> {
    pub inner: BoundaryFn<T>,
    pub outer: BoundaryFn<T>,
}

impl<T: Real> Dirichlet<T> {
    pub fn new(inner: BoundaryFn<T>, outer: BoundaryFn<T>) -> Self {
        Self { inner, outer }
    }

    pub fn zero() -> Self {
        Self { inner: Arc::new(|_| T::zero()), outer: Arc::new(|_| T::zero()) }
    }

    /// `factor * U` restricted to `rho = inner_r` and `rho = outer_r`.
    pub fn from_field(field: &AxiField<T>, inner_r: T, outer_r: T, factor: T) -> Self {
        let a = field.source().clone();
        let b = field.source().clone();
        Self {
            inner: Arc::new(move |th| factor * a.value(inner_r, th).unwrap_or(T::nan())),
            outer: Arc::new(move |th| factor * b.value(outer_r, th).unwrap_or(T::nan())),
        }
    }
}

/// Diagnostics of a nonlinear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T> {
    pub iterations: usize,
    /// Max-norm residual after the initial iterate and each Newton step.
    pub residuals: Vec<T>,
    /// Accepted step length of each Newton step.
    pub damping: Vec<T>,
    /// Number of negative nodal values projected to zero.
    pub projected_negatives: usize,
    /// `max |U|` at convergence; residuals are row-scaled by the diagonal
    /// of the linear operator and compared against `tol * residual_scale`.
    pub residual_scale: T,
}

pub struct SolveOutcome<T> {
    pub grid: Arc<GridField<T>>,
    pub field: AxiField<T>,
    pub report: SolveReport<T>,
}

/// Nodal solution on the `(ln rho, zeta)` grid.
#[derive(Debug, Clone)]
pub struct GridField<T> {
    spec: GridSpec<T>,
    zmap: ZetaMap<T>,
    x: Vec<T>,
    zeta: Vec<T>,
    theta: Vec<T>,
    hx: T,
    hz: T,
    // (nx + 1) * (nz + 1), x-major
    values: Vec<T>,
    // 4th-order d/dx at nodes 2..=nx-2 (other entries NaN)
    dx: Vec<T>,
}

impl<T: Real> GridField<T> {
    pub fn from_values(spec: GridSpec<T>, values: Vec<T>) -> Result<Self, ExtensionError> {
        let MeshSpec { nx, nz } = spec.mesh;
        if nx < 6 || nz < 3 {
            return Err(ExtensionError::InvalidGeometry(format!("mesh {nx}x{nz} too coarse")));
        }
        if !(spec.inner_r > T::zero() && spec.outer_r > spec.inner_r) {
            return Err(ExtensionError::InvalidGeometry(format!(
                "need 0 < inner_r < outer_r, got {} and {}",
                spec.inner_r, spec.outer_r
            )));
        }
        if values.len() != (nx + 1) * (nz + 1) {
            return Err(ExtensionError::InvalidGeometry(format!(
                "{} values for a {}x{} vertex grid",
                values.len(),
                nx + 1,
                nz + 1
            )));
        }
        let zmap = ZetaMap::new(spec.sigma)?;
        let x0 = spec.inner_r.ln();
        let hx = (spec.outer_r.ln() - x0) / T::from_usize_lossy(nx);
        let hz = zmap.zeta_max() / T::from_usize_lossy(nz);
        let x: Vec<T> = (0..=nx).map(|i| x0 + hx * T::from_usize_lossy(i)).collect();
        let zeta: Vec<T> = (0..=nz).map(|j| hz * T::from_usize_lossy(j)).collect();
        let theta: Vec<T> = zeta.iter().map(|&z| zmap.theta(z)).collect();
        let mut g = Self { spec, zmap, x, zeta, theta, hx, hz, values, dx: Vec::new() };
        g.dx = g.node_x_derivatives();
        Ok(g)
    }

    fn node_x_derivatives(&self) -> Vec<T> {
        let MeshSpec { nx, nz } = self.spec.mesh;
        let mut out = vec![T::nan(); self.values.len()];
        let c = T::lit(12.0) * self.hx;
        for i in 2..=nx - 2 {
            for j in 0..=nz {
                let u = |ii: usize| self.values[ii * (nz + 1) + j];
                out[i * (nz + 1) + j] = (u(i - 2) - T::lit(8.0) * u(i - 1) + T::lit(8.0) * u(i + 1) - u(i + 2)) / c;
            }
        }
        out
    }

    pub fn spec(&self) -> &GridSpec<T> {
        &self.spec
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn at_node(&self, i: usize, j: usize) -> T {
        self.values[i * (self.spec.mesh.nz + 1) + j]
    }

    pub fn radii(&self) -> Vec<T> {
        self.x.iter().map(|x| x.exp()).collect()
    }

    pub fn thetas(&self) -> &[T] {
        &self.theta
    }

    pub fn zeta_map(&self) -> &ZetaMap<T> {
        &self.zmap
    }

    /// Nodes as `(s, t)` points, x-major.
    pub fn node_points(&self) -> Vec<(T, T)> {
        let mut out = Vec::with_capacity(self.values.len());
        for &x in &self.x {
            let rho = x.exp();
            for &th in &self.theta {
                let (sn, cs) = th.sin_cos();
                out.push((rho * cs, if th == T::zero() { T::zero() } else { rho * sn }));
            }
        }
        out
    }

    /// Radii at which the x-derivative stencil is available.
    pub fn derivative_range(&self) -> (T, T) {
        let nx = self.spec.mesh.nx;
        (self.x[3].exp(), self.x[nx - 3].exp())
    }

    fn stencil(nodes: &[T], h: T, q: T, lo: usize, hi: usize) -> usize {
        // first of four consecutive nodes around q, restricted to [lo, hi]
        let k = ((q - nodes[0]) / h).floor().to_isize().unwrap_or(0);
        (k - 1).clamp(lo as isize, hi as isize - 3) as usize
    }

    fn weights(nodes: &[T], start: usize, q: T) -> ([T; 4], [T; 4]) {
        let mut w = [T::zero(); 4];
        let mut dw = [T::zero(); 4];
        for a in 0..4 {
            let xa = nodes[start + a];
            let mut l = T::one();
            let mut dl = T::zero();
            for b in 0..4 {
                if a == b {
                    continue;
                }
                let xb = nodes[start + b];
                let f = (q - xb) / (xa - xb);
                dl = dl * f + l / (xa - xb);
                l = l * f;
            }
            w[a] = l;
            dw[a] = dl;
        }
        (w, dw)
    }

    fn locate(&self, rho: T, theta: T) -> Result<(T, T), ExtensionError> {
        let x = rho.ln();
        let nx = self.spec.mesh.nx;
        let tol = self.hx * T::lit(1e-9);
        if !(x >= self.x[0] - tol && x <= self.x[nx] + tol)
            || theta < T::zero()
            || theta > T::FRAC_PI_2() + T::lit(1e-12)
        {
            return Err(ExtensionError::OutsideField { rho: rho.as_f64(), theta: theta.as_f64() });
        }
        Ok((x, self.zmap.zeta(theta.min(T::FRAC_PI_2()))))
    }

    fn interpolate(&self, data: &[T], x: T, z: T, x_lo: usize, x_hi: usize) -> (T, T) {
        let nz = self.spec.mesh.nz;
        let i0 = Self::stencil(&self.x, self.hx, x, x_lo, x_hi);
        let j0 = Self::stencil(&self.zeta, self.hz, z, 0, nz);
        let (wx, _) = Self::weights(&self.x, i0, x);
        let (wz, dwz) = Self::weights(&self.zeta, j0, z);
        let mut v = T::zero();
        let mut dz = T::zero();
        for a in 0..4 {
            let row = (i0 + a) * (nz + 1) + j0;
            for b in 0..4 {
                let u = data[row + b];
                v = v + wx[a] * wz[b] * u;
                dz = dz + wx[a] * dwz[b] * u;
            }
        }
        (v, dz)
    }

    /// One-sided third-order `d_zeta U` on `zeta = 0` at every x node.
    fn boundary_slope(&self, i: usize) -> T {
        let u = |j: usize| self.at_node(i, j);
        (-T::lit(11.0) * u(0) + T::lit(18.0) * u(1) - T::lit(9.0) * u(2) + T::lit(2.0) * u(3)) / (T::lit(6.0) * self.hz)
    }
}

impl<T: Real> AxiEvaluator<T> for GridField<T> {
    fn value(&self, rho: T, theta: T) -> Result<T, ExtensionError> {
        let (x, z) = self.locate(rho, theta)?;
        Ok(self.interpolate(&self.values, x, z, 0, self.spec.mesh.nx).0)
    }

    fn gradient(&self, rho: T, theta: T) -> Result<(T, T), ExtensionError> {
        let (x, z) = self.locate(rho, theta)?;
        let nx = self.spec.mesh.nx;
        if x < self.x[3] - self.hx * T::lit(1e-9) || x > self.x[nx - 3] + self.hx * T::lit(1e-9) {
            return Err(ExtensionError::StencilFailure { rho: rho.as_f64() });
        }
        let (ux, _) = self.interpolate(&self.dx, x, z, 2, nx - 2);
        let (_, uz) = self.interpolate(&self.values, x, z, 0, nx);
        Ok((ux / rho, uz * self.zmap.derivative(theta)))
    }

    fn radial_range(&self) -> (T, T) {
        self.derivative_range()
    }

    fn native_neumann(&self, s: T) -> Option<Result<T, ExtensionError>> {
        let nx = self.spec.mesh.nx;
        let x = s.ln();
        if !(x >= self.x[0] && x <= self.x[nx]) {
            return Some(Err(ExtensionError::OutsideField { rho: s.as_f64(), theta: 0.0 }));
        }
        let i0 = Self::stencil(&self.x, self.hx, x, 0, nx);
        let (w, _) = Self::weights(&self.x, i0, x);
        let slope: T = (0..4).map(|a| w[a] * self.boundary_slope(i0 + a)).sum();
        Some(Ok(-s.powf(-(self.spec.sigma + self.spec.sigma)) * slope))
    }
}

/// Discretization coefficients of one mesh.
struct Stencil<T> {
    nx: usize,
    nz: usize,
    p: T,
    // a_x between (i, j) and (i+1, j), indexed [i * (nz+1) + j], i in 0..nx
    ax: Vec<T>,
    // a_zeta between (i, j) and (i, j+1), indexed [i * nz + j], i in 1..nx
    az: Vec<T>,
    // boundary mass int e^{nx} dx of the cell at i
    e: Vec<T>,
}

impl<T: Real> Stencil<T> {
    fn unknown(&self, i: usize, j: usize) -> usize {
        (i - 1) * (self.nz + 1) + j
    }

    fn count(&self) -> usize {
        (self.nx - 1) * (self.nz + 1)
    }
}

fn build_stencil<T: Real>(params: &Params<T>, grid: &GridField<T>) -> Result<Stencil<T>, ExtensionError> {
    let MeshSpec { nx, nz } = grid.spec.mesh;
    let sigma = params.sigma();
    let nn = params.dim();
    let k = nn - sigma - sigma;
    let cos_exp = nn - T::one();
    let sin_exp = T::one() - sigma - sigma;
    let half = T::lit(0.5);
    let (hx, hz) = (grid.hx, grid.hz);

    // cell theta ranges in zeta: [zeta_j - hz/2, zeta_j + hz/2] clipped
    let zmax = grid.zmap.zeta_max();
    let face_theta: Vec<T> = (0..=nz + 1)
        .map(|f| {
            let z = (hz * (T::from_usize_lossy(f) - half)).max(T::zero()).min(zmax);
            grid.zmap.theta(z)
        })
        .collect();
    let gl = quadrature::gauss_legendre::<T>(16)?;
    let jac = quadrature::gauss_jacobi::<T>(16, T::zero(), sin_exp)?;
    let w = |th: T| th.cos().powf(cos_exp) * th.sin().powf(sin_exp);
    let mut cell_w = Vec::with_capacity(nz + 1);
    for j in 0..=nz {
        let (a, b) = (face_theta[j], face_theta[j + 1]);
        let v = if j == 0 {
            // theta^{1-2 sigma} on [0, b]
            let hh = b * half;
            let scale = hh.powf(sin_exp + T::one());
            jac.nodes
                .iter()
                .zip(&jac.weights)
                .map(|(&y, &wt)| {
                    let th = hh * (y + T::one());
                    wt * scale * th.cos().powf(cos_exp) * (th.sin() / th).powf(sin_exp)
                })
                .sum()
        } else {
            gl.mapped(a, b).integrate(w)
        };
        cell_w.push(v);
    }

    let mut ax = vec![T::zero(); nx * (nz + 1)];
    for i in 0..nx {
        // 1 / int_{x_i}^{x_{i+1}} e^{-kx} dx
        let g = k / ((-k * grid.x[i]).exp() * (T::one() - (-k * hx).exp()));
        for j in 0..=nz {
            ax[i * (nz + 1) + j] = cell_w[j] * g;
        }
    }
    let mut az = vec![T::zero(); (nx + 1) * nz];
    let mut e = vec![T::zero(); nx + 1];
    for i in 1..nx {
        let xi = grid.x[i];
        let px = (k * xi).exp() * ((k * hx * half).exp() - (-k * hx * half).exp()) / k;
        for j in 0..nz {
            let th = face_theta[j + 1];
            az[i * nz + j] = px * th.cos().powf(cos_exp) / hz;
        }
        e[i] = (nn * xi).exp() * ((nn * hx * half).exp() - (-nn * hx * half).exp()) / nn;
    }
    Ok(Stencil { nx, nz, p: params.p(), ax, az, e })
}

/// Residual of the discrete system; `full` holds all vertex values.
fn residual<T: Real>(st: &Stencil<T>, full: &[T], out: &mut [T]) {
    let (nx, nz) = (st.nx, st.nz);
    let at = |i: usize, j: usize| full[i * (nz + 1) + j];
    for i in 1..nx {
        for j in 0..=nz {
            let up = at(i, j);
            let mut r =
                st.ax[i * (nz + 1) + j] * (up - at(i + 1, j)) + st.ax[(i - 1) * (nz + 1) + j] * (up - at(i - 1, j));
            if j < nz {
                r = r + st.az[i * nz + j] * (up - at(i, j + 1));
            }
            if j > 0 {
                r = r + st.az[i * nz + j - 1] * (up - at(i, j - 1));
            } else {
                r = r - st.e[i] * up.max(T::zero()).powf(st.p);
            }
            out[st.unknown(i, j)] = r;
        }
    }
}

/// Jacobian of [`residual`]; with `linear` the boundary term is dropped.
fn jacobian<T: Real>(st: &Stencil<T>, full: &[T], linear: bool) -> Result<BandedMatrix<T>, ExtensionError> {
    let (nx, nz) = (st.nx, st.nz);
    let bw = nz + 1;
    let mut m = BandedMatrix::zeros(st.count(), bw, bw);
    for i in 1..nx {
        for j in 0..=nz {
            let row = st.unknown(i, j);
            let east = st.ax[i * (nz + 1) + j];
            let west = st.ax[(i - 1) * (nz + 1) + j];
            let mut diag = east + west;
            if i + 1 < nx {
                m.add(row, st.unknown(i + 1, j), -east)?;
            }
            if i > 1 {
                m.add(row, st.unknown(i - 1, j), -west)?;
            }
            if j < nz {
                let a = st.az[i * nz + j];
                diag = diag + a;
                m.add(row, st.unknown(i, j + 1), -a)?;
            }
            if j > 0 {
                let a = st.az[i * nz + j - 1];
                diag = diag + a;
                m.add(row, st.unknown(i, j - 1), -a)?;
            } else if !linear {
                let u = full[i * (nz + 1)].max(T::zero());
                diag = diag - st.p * st.e[i] * u.powf(st.p - T::one());
            }
            m.add(row, row, diag)?;
        }
    }
    Ok(m)
}

fn linear_diagonal<T: Real>(st: &Stencil<T>) -> Vec<T> {
    let (nx, nz) = (st.nx, st.nz);
    let mut d = vec![T::zero(); st.count()];
    for i in 1..nx {
        for j in 0..=nz {
            let mut v = st.ax[i * (nz + 1) + j] + st.ax[(i - 1) * (nz + 1) + j];
            if j < nz {
                v = v + st.az[i * nz + j];
            }
            if j > 0 {
                v = v + st.az[i * nz + j - 1];
            }
            d[st.unknown(i, j)] = v;
        }
    }
    d
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Solves the extension system on `inner_r <= rho <= outer_r` with Dirichlet
/// data on both half-circles and the nonlinear Neumann condition on `t = 0`.
pub fn solve_nonlinear_annulus<T: Real>(
    params: &Params<T>,
    inner_r: T,
    outer_r: T,
    dirichlet: &Dirichlet<T>,
    mesh: MeshSpec,
    opts: SolverOptions<T>,
) -> Result<SolveOutcome<T>, ExtensionError> {
    let spec = GridSpec { n: params.n(), sigma: params.sigma(), inner_r, outer_r, mesh };
    let MeshSpec { nx, nz } = mesh;
    let empty = vec![T::zero(); (nx.max(6) + 1) * (nz.max(3) + 1)];
    let mut grid = GridField::from_values(spec, empty)?;
    let st = build_stencil(params, &grid)?;

    let mut full = vec![T::zero(); (nx + 1) * (nz + 1)];
    for j in 0..=nz {
        let th = grid.theta[j];
        let (a, b) = ((dirichlet.inner)(th), (dirichlet.outer)(th));
        if !(a.is_finite() && b.is_finite() && a >= T::zero() && b >= T::zero()) {
            return Err(ExtensionError::InvalidGeometry(format!(
                "Dirichlet data must be finite and nonnegative (theta = {th}: {a}, {b})"
            )));
        }
        full[j] = a;
        full[nx * (nz + 1) + j] = b;
    }

    // initial iterate: Neumann data frozen at u0^p, u0 interpolating the
    // Dirichlet traces log-log in rho
    let (g0, g1) = (full[0], full[nx * (nz + 1)]);
    let u0 = |i: usize| -> T {
        let f = T::from_usize_lossy(i) / T::from_usize_lossy(nx);
        if g0 > T::zero() && g1 > T::zero() {
            (g0.ln() * (T::one() - f) + g1.ln() * f).exp()
        } else {
            g0 * (T::one() - f) + g1 * f
        }
    };
    let count = st.count();
    let mut r = vec![T::zero(); count];
    {
        let m = jacobian(&st, &full, true)?;
        let lu = m.factor()?;
        let mut rhs = vec![T::zero(); count];
        let zero_interior = {
            let mut f = full.clone();
            for i in 1..nx {
                for j in 0..=nz {
                    f[i * (nz + 1) + j] = T::zero();
                }
            }
            f
        };
        let mut base = vec![T::zero(); count];
        residual(&st, &zero_interior, &mut base);
        for i in 1..nx {
            for j in 0..=nz {
                let q = st.unknown(i, j);
                rhs[q] = -base[q];
                if j == 0 {
                    rhs[q] = rhs[q] + st.e[i] * u0(i).powf(st.p);
                }
            }
        }
        lu.solve(&mut rhs)?;
        for i in 1..nx {
            for j in 0..=nz {
                full[i * (nz + 1) + j] = rhs[st.unknown(i, j)];
            }
        }
    }
    let mut projected = 0usize;
    for v in full.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
            projected += 1;
        }
    }

    // rows scaled by the diagonal of the linear operator
    let row_diag = linear_diagonal(&st);
    let norm = |r: &[T]| r.iter().zip(&row_diag).fold(T::zero(), |m, (a, d)| m.max(a.abs() / *d));
    residual(&st, &full, &mut r);
    let mut res_norm = norm(&r);
    let mut residuals = vec![res_norm];
    let mut damping = Vec::new();
    let mut scale;
    let mut iterations = 0;
    loop {
        let jm = jacobian(&st, &full, false)?;
        scale = max_abs(&full);
        // at least one Newton step: the frozen-source iterate can look
        // converged row by row while still off globally
        if res_norm == T::zero() || iterations > 0 && res_norm <= opts.tol * scale {
            break;
        }
        if iterations >= opts.max_iterations {
            return Err(ExtensionError::NewtonDivergence {
                iterations,
                damping: damping.iter().map(|d: &T| d.as_f64()).collect(),
                residuals: residuals.iter().map(|d| d.as_f64()).collect(),
            });
        }
        let lu = jm.factor()?;
        let mut delta: Vec<T> = r.iter().map(|&v| -v).collect();
        lu.solve(&mut delta)?;
        let mut lambda = T::one();
        let mut accepted = false;
        let mut trial = full.clone();
        let mut trial_r = vec![T::zero(); count];
        for _ in 0..=opts.max_halvings {
            let mut negatives = 0usize;
            for i in 1..nx {
                for j in 0..=nz {
                    let idx = i * (nz + 1) + j;
                    let v = full[idx] + lambda * delta[st.unknown(i, j)];
                    trial[idx] = if v < T::zero() {
                        negatives += 1;
                        T::zero()
                    } else {
                        v
                    };
                }
            }
            residual(&st, &trial, &mut trial_r);
            let tn = norm(&trial_r);
            if tn < res_norm || tn <= opts.tol * scale {
                projected += negatives;
                accepted = true;
                res_norm = tn;
                break;
            }
            lambda = lambda * T::lit(0.5);
        }
        iterations += 1;
        damping.push(lambda);
        if !accepted {
            return Err(ExtensionError::NewtonDivergence {
                iterations,
                damping: damping.iter().map(|d| d.as_f64()).collect(),
                residuals: residuals.iter().map(|d| d.as_f64()).collect(),
            });
        }
        std::mem::swap(&mut full, &mut trial);
        std::mem::swap(&mut r, &mut trial_r);
        residuals.push(res_norm);
    }

    grid.values = full;
    grid.dx = grid.node_x_derivatives();
    let grid = Arc::new(grid);
    let points = grid.node_points();
    let values = grid.values.clone();
    let field = AxiField::new(grid.clone()).with_grid_spec(spec).with_raw_samples(points, values);
    Ok(SolveOutcome {
        grid,
        field,
        report: SolveReport { iterations, residuals, damping, projected_negatives: projected, residual_scale: scale },
    })
}

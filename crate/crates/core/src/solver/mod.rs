//! Weighted stiffness assembly, preconditioned conjugate gradients, weak
//! residuals and harmonic replacement on balls.

pub mod exact;

pub use exact::{exact_radial_mms, CriticalBubble, RadialMms};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::grid::Grid;
use crate::measure::BallSpec;
use crate::params::{Weight, WeightParams};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.vals[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|A_ij - A_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..self.n_rows() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                worst = worst.max((self.vals[k] - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// Dense copy, for small checks.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n_rows();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row[self.cols[k]] = self.vals[k];
            }
        }
        d
    }
}

/// Stiffness matrix with Dirichlet rows replaced by identity rows and the
/// fixed columns moved to the right-hand side.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub fixed: Vec<bool>,
    grid: Arc<Grid>,
    params: WeightParams,
}

impl LinearSystem {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn params(&self) -> &WeightParams {
        &self.params
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub energy: f64,
}

/// Edge conductances `W_e / h_e^2` with `W_e = int_{cell_e} |x|^{-2a}`.
pub(crate) fn conductances(params: &WeightParams, grid: &Grid) -> Result<Vec<f64>> {
    let w = grid.edge_weights(params.weight_exponent(Weight::Energy))?;
    let c: Vec<f64> = grid
        .edges()
        .iter()
        .zip(w.iter())
        .map(|(e, &we)| we / (e.length * e.length))
        .collect();
    if c.iter().any(|v| !v.is_finite()) {
        // cannot happen for admissible exponents
        return Err(Error::DegenerateExponent("edge weight integral is not finite".into()));
    }
    Ok(c)
}

/// `a(u, phi_i)` for every nodal hat function, no boundary treatment.
pub fn weak_operator(params: &WeightParams, u: &DiscreteField) -> Result<Vec<f64>> {
    u.require_dim(params)?;
    let grid = u.grid();
    let c = conductances(params, grid)?;
    let v = u.values();
    let mut out = vec![0.0; v.len()];
    for (e, ce) in grid.edges().iter().zip(&c) {
        let flux = ce * (v[e.i] - v[e.j]);
        out[e.i] += flux;
        out[e.j] -= flux;
    }
    Ok(out)
}

/// Load vector `int_{cell_i} |x|^{-bp} f`.
fn load(params: &WeightParams, f: &DiscreteField) -> Result<Vec<f64>> {
    let w = f.grid().node_weights(params.weight_exponent(Weight::Critical))?;
    Ok(f.values().iter().zip(w.iter()).map(|(fi, wi)| fi * wi).collect())
}

/// Assembles with the grid boundary as the Dirichlet set.
pub fn assemble(params: &WeightParams, f: &DiscreteField, dirichlet: &DiscreteField) -> Result<LinearSystem> {
    let fixed = f.grid().boundary_mask();
    assemble_with_fixed(params, f, dirichlet, &fixed)
}

/// Assembles with an arbitrary set of fixed nodes taking values from `dirichlet`.
pub fn assemble_with_fixed(
    params: &WeightParams,
    f: &DiscreteField,
    dirichlet: &DiscreteField,
    fixed: &[bool],
) -> Result<LinearSystem> {
    f.require_same_grid(dirichlet)?;
    f.require_dim(params)?;
    let grid = f.grid().clone();
    let n = grid.n_nodes();
    if fixed.len() != n {
        return Err(Error::InvalidInput("fixed mask length does not match the grid".into()));
    }
    let c = conductances(params, &grid)?;
    let mut rhs = load(params, f)?;
    let g = dirichlet.values();
    let mut diag = vec![0.0; n];
    let mut off: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (e, &ce) in grid.edges().iter().zip(&c) {
        diag[e.i] += ce;
        diag[e.j] += ce;
        match (fixed[e.i], fixed[e.j]) {
            (false, false) => {
                off[e.i].push((e.j, -ce));
                off[e.j].push((e.i, -ce));
            }
            (false, true) => rhs[e.i] += ce * g[e.j],
            (true, false) => rhs[e.j] += ce * g[e.i],
            (true, true) => {}
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        if fixed[i] {
            cols.push(i);
            vals.push(1.0);
            rhs[i] = g[i];
        } else {
            let mut row = std::mem::take(&mut off[i]);
            row.push((i, diag[i]));
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
        }
        row_ptr.push(cols.len());
    }
    Ok(LinearSystem { matrix: CsrMatrix { row_ptr, cols, vals }, rhs, fixed: fixed.to_vec(), grid, params: *params })
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Jacobi-preconditioned conjugate gradients on the raw arrays. Rows in
/// `fixed` are identity rows already satisfied by `x0`; they are left out of
/// the residual scale so large boundary data cannot mask the free residual.
fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x0: Vec<f64>,
    fixed: &[bool],
    settings: SolverSettings,
) -> (Vec<f64>, usize, f64, bool) {
    let n = b.len();
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let bnorm = b
        .iter()
        .zip(fixed)
        .filter(|(_, &f)| !f)
        .map(|(v, _)| v * v)
        .sum::<f64>()
        .sqrt();
    if bnorm == 0.0 {
        let x: Vec<f64> = x0.iter().zip(fixed).map(|(&v, &f)| if f { v } else { 0.0 }).collect();
        return (x, 0, 0.0, true);
    }
    let mut x = x0;
    let mut ax = vec![0.0; n];
    a.mul_into(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    let mut best = (rel, x.clone());
    if rel <= settings.tol {
        return (x, 0, rel, true);
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=settings.max_iter {
        a.mul_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= settings.tol {
            return (x, it, rel, true);
        }
        if rel < best.0 {
            best = (rel, x.clone());
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (best.1, settings.max_iter, best.0, false)
}

/// Thomas elimination for matrices whose rows couple only neighbouring
/// indices, as on radial grids. `None` when the pattern is wider.
fn tridiagonal_solve(a: &CsrMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.cols[k];
            if j + 1 == i {
                lower[i] = a.vals[k];
            } else if j == i {
                diag[i] = a.vals[k];
            } else if j == i + 1 {
                upper[i] = a.vals[k];
            } else {
                return None;
            }
        }
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let m = diag[i] - if i > 0 { lower[i] * c[i - 1] } else { 0.0 };
        if m == 0.0 || !m.is_finite() {
            return None;
        }
        c[i] = upper[i] / m;
        d[i] = (b[i] - if i > 0 { lower[i] * d[i - 1] } else { 0.0 }) / m;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

fn free_relative_residual(a: &CsrMatrix, b: &[f64], x: &[f64], fixed: &[bool]) -> (Vec<f64>, f64) {
    let mut ax = vec![0.0; b.len()];
    a.mul_into(x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let free = |v: &[f64]| v.iter().zip(fixed).filter(|(_, &f)| !f).map(|(x, _)| x * x).sum::<f64>().sqrt();
    let bnorm = free(b);
    let rnorm = free(&r);
    (r, if bnorm > 0.0 { rnorm / bnorm } else { rnorm })
}

/// Direct elimination plus one refinement step for radial grids. Also
/// returns the relative residual that rounding alone can produce,
/// `64 eps || |A||x| + |b| ||` over the free rows.
fn radial_direct(a: &CsrMatrix, b: &[f64], fixed: &[bool]) -> Option<(Vec<f64>, f64, f64)> {
    let mut x = tridiagonal_solve(a, b)?;
    let (r, _) = free_relative_residual(a, b, &x, fixed);
    let dx = tridiagonal_solve(a, &r)?;
    for (xi, di) in x.iter_mut().zip(dx) {
        *xi += di;
    }
    let (_, rel) = free_relative_residual(a, b, &x, fixed);
    let mut bnorm = 0.0;
    let mut snorm = 0.0;
    for i in (0..b.len()).filter(|&i| !fixed[i]) {
        let s: f64 = (a.row_ptr[i]..a.row_ptr[i + 1]).map(|k| (a.vals[k] * x[a.cols[k]]).abs()).sum::<f64>() + b[i].abs();
        snorm += s * s;
        bnorm += b[i] * b[i];
    }
    let floor = if bnorm > 0.0 { 64.0 * f64::EPSILON * (snorm / bnorm).sqrt() } else { 0.0 };
    Some((x, rel, floor))
}

/// Solves the system: direct elimination on radial grids, where fine graded
/// meshes make the iteration lose accuracy, and Jacobi-preconditioned
/// conjugate gradients otherwise. The direct path reports zero iterations.
pub fn solve(system: &LinearSystem, settings: SolverSettings) -> Result<(DiscreteField, SolveReport)> {
    let direct = match system.grid.as_ref() {
        Grid::Radial(_) => radial_direct(&system.matrix, &system.rhs, &system.fixed),
        _ => None,
    };
    let (x, iterations, rel, converged) = match direct {
        Some((x, rel, floor)) => (x, 0, rel, rel <= settings.tol.max(floor)),
        None => {
            let x0: Vec<f64> = system
                .rhs
                .iter()
                .zip(&system.fixed)
                .map(|(&b, &f)| if f { b } else { 0.0 })
                .collect();
            pcg(&system.matrix, &system.rhs, x0, &system.fixed, settings)
        }
    };
    let field = DiscreteField::new(system.grid.clone(), x, "solution")?.with_params(&system.params);
    if !converged {
        return Err(Error::NoConvergence { iterations, relative_residual: rel, best: Box::new(field) });
    }
    let energy = field.dirichlet_energy(&system.params)?;
    Ok((field, SolveReport { iterations, relative_residual: rel, energy }))
}

/// Nodal weak residual and its size in the energy-dual norm.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// `a(u, phi_i) - int |x|^{-bp} f phi_i` at free nodes, zero on the boundary.
    pub nodal: DiscreteField,
    /// `sup_v <r, v> / a(v, v)^{1/2}` over discrete `v` vanishing on the boundary.
    pub dual_norm: f64,
    pub max_abs: f64,
}

/// Weak residual of `u` for data `f`, boundary nodes excluded.
pub fn residual(params: &WeightParams, u: &DiscreteField, f: &DiscreteField) -> Result<ResidualReport> {
    u.require_same_grid(f)?;
    let grid = u.grid().clone();
    let fixed = grid.boundary_mask();
    let au = weak_operator(params, u)?;
    let b = load(params, f)?;
    let r: Vec<f64> = (0..au.len()).map(|i| if fixed[i] { 0.0 } else { au[i] - b[i] }).collect();
    let max_abs = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero = DiscreteField::zeros(grid.clone());
    let mut sys = assemble_with_fixed(params, &zero, &zero, &fixed)?;
    sys.rhs = r.clone();
    let tight = SolverSettings { tol: 1e-13, max_iter: 100_000 };
    let z = match grid.as_ref() {
        Grid::Radial(_) => radial_direct(&sys.matrix, &sys.rhs, &fixed).map(|(z, _, _)| z),
        _ => None,
    }
    .unwrap_or_else(|| pcg(&sys.matrix, &sys.rhs, vec![0.0; r.len()], &fixed, tight).0);
    let dual_norm = dot(&r, &z).max(0.0).sqrt();
    let nodal = DiscreteField::new(grid, r, "residual")?.with_params(params);
    Ok(ResidualReport { nodal, dual_norm, max_abs })
}

/// Nodes of the ball split into the discrete boundary (ball nodes with a
/// neighbor outside) and the interior.
pub fn ball_partition(grid: &Grid, ball: &BallSpec) -> (Vec<usize>, Vec<usize>) {
    let inside_list = grid.nodes_in_ball(ball);
    let mut inside = vec![false; grid.n_nodes()];
    for &i in &inside_list {
        inside[i] = true;
    }
    let adj = grid.adjacency();
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for &i in &inside_list {
        if grid.is_boundary(i) || adj[i].iter().any(|&j| !inside[j]) {
            boundary.push(i);
        } else {
            interior.push(i);
        }
    }
    (interior, boundary)
}

/// Replaces `u` inside the ball by the discrete weighted-harmonic function
/// with the same values on the discrete ball boundary.
pub fn harmonic_replacement(
    params: &WeightParams,
    u: &DiscreteField,
    ball: &BallSpec,
    settings: SolverSettings,
) -> Result<DiscreteField> {
    let grid = u.grid().clone();
    if matches!(grid.as_ref(), Grid::Radial(_)) && ball.center_norm() != 0.0 {
        return Err(Error::Unsupported("off-center harmonic replacement on a radial grid".into()));
    }
    grid.require_ball(ball)?;
    let (interior, _) = ball_partition(&grid, ball);
    if interior.len() < 2 {
        return Err(Error::BallTooSmall { interior: interior.len() });
    }
    let mut fixed = vec![true; grid.n_nodes()];
    for &i in &interior {
        fixed[i] = false;
    }
    let zero = DiscreteField::zeros(grid.clone());
    let sys = assemble_with_fixed(params, &zero, u, &fixed)?;
    let (w, _) = solve(&sys, settings)?;
    Ok(w.with_name(format!("{}_harmonic", u.name())))
}

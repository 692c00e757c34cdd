//! Nodal scalar fields with weighted integrals, energies, norms and CSV I/O.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, RadialGrid, Region, Spacing};
use crate::measure::BallSpec;
use crate::params::{Weight, WeightParams};

/// Exponents recorded alongside a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldMeta {
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

#[derive(Clone)]
pub struct DiscreteField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    name: String,
    meta: Option<FieldMeta>,
}

impl std::fmt::Debug for DiscreteField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DiscreteField({:?} on {:?}, {} values)", self.name, self.grid, self.values.len())
    }
}

impl DiscreteField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::InvalidField(format!(
                "{} values for {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("value at node {i} is not finite")));
        }
        Ok(Self { grid, values, name: name.into(), meta: None })
    }

    /// Samples `f` at every node. Radial nodes are passed as `(r, 0, ..., 0)`.
    pub fn sample<F>(grid: Arc<Grid>, name: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let values: Vec<f64> = (0..grid.n_nodes()).into_par_iter().map(|i| f(&grid.point(i))).collect();
        Self::new(grid, values, name)
    }

    /// Samples a profile of `|x|` at every node.
    pub fn sample_radial<F>(grid: Arc<Grid>, name: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let values: Vec<f64> = (0..grid.n_nodes()).into_par_iter().map(|i| f(grid.node_radius(i))).collect();
        Self::new(grid, values, name)
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Result<Self> {
        let n = grid.n_nodes();
        Self::new(grid, vec![c; n], "constant")
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n_nodes();
        Self { grid, values: vec![0.0; n], name: "zero".into(), meta: None }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn meta(&self) -> Option<FieldMeta> {
        self.meta
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_params(mut self, params: &WeightParams) -> Self {
        self.meta = Some(FieldMeta { n: params.n(), a: params.a(), b: params.b() });
        self
    }

    /// Same grid, values replaced.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(self.grid.clone(), values, self.name.clone())?;
        out.meta = self.meta;
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    /// Pointwise combination with another field on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.require_same_grid(other)?;
        self.with_values(self.values.iter().zip(&other.values).map(|(&x, &y)| f(x, y)).collect())
    }

    pub fn require_same_grid(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    pub(crate) fn require_dim(&self, params: &WeightParams) -> Result<()> {
        if params.n() != self.grid.dim() {
            return Err(Error::GridMismatch(format!(
                "parameters have N = {} but the grid is {}-dimensional",
                params.n(),
                self.grid.dim()
            )));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `int g(u) |x|^w dx` over `region`.
    pub fn integrate_with(
        &self,
        params: &WeightParams,
        weight: Weight,
        region: Region<'_>,
        g: impl Fn(f64) -> f64,
    ) -> Result<f64> {
        self.require_dim(params)?;
        let w = self.grid.node_weights_in(region, params.weight_exponent(weight))?;
        Ok(w.iter().map(|&(i, wi)| wi * g(self.values[i])).sum())
    }

    /// `int u |x|^w dx` over the whole grid.
    pub fn weighted_integral(&self, params: &WeightParams, weight: Weight) -> Result<f64> {
        self.integrate_with(params, weight, Region::Whole, |v| v)
    }

    /// `int_region |x|^w dx` as seen by this grid.
    pub fn region_measure(&self, params: &WeightParams, weight: Weight, region: Region<'_>) -> Result<f64> {
        self.integrate_with(params, weight, region, |_| 1.0)
    }

    /// Weighted mean over a ball inside the domain.
    pub fn ball_mean(&self, params: &WeightParams, weight: Weight, ball: &BallSpec) -> Result<f64> {
        self.grid.require_ball(ball)?;
        self.require_dim(params)?;
        let w = self.grid.node_weights_in(Region::Ball(ball), params.weight_exponent(weight))?;
        let mass: f64 = w.iter().map(|&(_, wi)| wi).sum();
        if !(mass > 0.0) {
            return Err(Error::EmptyBall);
        }
        Ok(w.iter().map(|&(i, wi)| wi * self.values[i]).sum::<f64>() / mass)
    }

    /// `sum_e W_e ((u_j - u_i)/h_e)^2` with `W_e = int_{cell_e} |x|^{-2a}`.
    pub fn dirichlet_energy(&self, params: &WeightParams) -> Result<f64> {
        self.energy_in(params, Region::Whole)
    }

    /// Dirichlet energy restricted to `region`.
    pub fn energy_in(&self, params: &WeightParams, region: Region<'_>) -> Result<f64> {
        self.require_dim(params)?;
        let w = self.grid.edge_weights_in(region, params.weight_exponent(Weight::Energy))?;
        let edges = self.grid.edges();
        Ok(w
            .iter()
            .map(|&(k, wk)| {
                let e = &edges[k];
                let g = (self.values[e.j] - self.values[e.i]) / e.length;
                wk * g * g
            })
            .sum())
    }

    /// `(int |u|^q |x|^{-bp})^{1/q}`, evaluated with the maximum factored out.
    pub fn lq_norm(&self, params: &WeightParams, q: f64) -> Result<f64> {
        self.lq_norm_in(params, q, Region::Whole)
    }

    pub fn lq_norm_in(&self, params: &WeightParams, q: f64, region: Region<'_>) -> Result<f64> {
        if !(q >= 1.0) {
            return Err(Error::InvalidInput(format!("norm exponent {q} must be at least 1")));
        }
        self.require_dim(params)?;
        let w = self.grid.node_weights_in(region, params.weight_exponent(Weight::Critical))?;
        let m = w.iter().fold(0.0f64, |m, &(i, _)| m.max(self.values[i].abs()));
        if m == 0.0 {
            return Ok(0.0);
        }
        let s: f64 = w.iter().map(|&(i, wi)| wi * (self.values[i].abs() / m).powf(q)).sum();
        Ok(m * s.powf(1.0 / q))
    }

    /// Max minus min of nodal values inside the ball.
    pub fn oscillation(&self, ball: &BallSpec) -> Result<f64> {
        let nodes = self.grid.nodes_in_ball(ball);
        if nodes.is_empty() {
            return Err(Error::EmptyBall);
        }
        let (lo, hi) = nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(self.values[i]), hi.max(self.values[i]))
        });
        Ok(hi - lo)
    }

    /// Piecewise-linear value at radius `r` (radial grids only).
    pub fn radial_value_at(&self, r: f64) -> Result<f64> {
        let Grid::Radial(g) = self.grid.as_ref() else {
            return Err(Error::Unsupported("radial interpolation on a box grid".into()));
        };
        let nodes = g.nodes();
        if r < nodes[0] || r > nodes[nodes.len() - 1] {
            return Err(Error::InvalidInput(format!("radius {r} outside the grid")));
        }
        let k = nodes.partition_point(|&x| x <= r).clamp(1, nodes.len() - 1);
        let t = (r - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
        Ok(self.values[k - 1] + t * (self.values[k] - self.values[k - 1]))
    }

    /// CSV text: a header line then `coords..., value` per node.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let (n, a, b) = match self.meta {
            Some(m) => (m.n, m.a, m.b),
            None => (self.grid.dim(), 0.0, 0.0),
        };
        writeln!(out, "# grid={} N={} a={} b={}", self.grid.kind(), n, a, b).unwrap();
        for i in 0..self.grid.n_nodes() {
            match self.grid.as_ref() {
                Grid::Radial(g) => write!(out, "{:.16e}", g.nodes()[i]).unwrap(),
                Grid::Box(g) => {
                    let p = g.point3(i);
                    write!(out, "{:.16e},{:.16e},{:.16e}", p[0], p[1], p[2]).unwrap();
                }
            }
            writeln!(out, ",{:.16e}", self.values[i]).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    /// Parses [`to_csv`](Self::to_csv) output, rebuilding the grid from the
    /// node coordinates.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Csv("empty input".into()))?;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| Error::Csv("missing header line".into()))?;
        let mut kind = None;
        let mut n = None;
        let mut a = None;
        let mut b = None;
        for tok in header.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| Error::Csv(format!("bad header token `{tok}`")))?;
            match k {
                "grid" => kind = Some(v.to_string()),
                "N" => n = v.parse::<usize>().ok(),
                "a" => a = v.parse::<f64>().ok(),
                "b" => b = v.parse::<f64>().ok(),
                _ => return Err(Error::Csv(format!("unknown header key `{k}`"))),
            }
        }
        let (Some(kind), Some(n), Some(a), Some(b)) = (kind, n, a, b) else {
            return Err(Error::Csv("header needs grid, N, a and b".into()));
        };
        let ncoord = match kind.as_str() {
            "radial" => 1,
            "box" => 3,
            other => return Err(Error::Csv(format!("unknown grid kind `{other}`"))),
        };
        let mut coords: Vec<Vec<f64>> = vec![Vec::new(); ncoord];
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != ncoord + 1 {
                return Err(Error::Csv(format!("row {} has {} fields", lineno + 2, fields.len())));
            }
            let parsed: Vec<f64> = fields
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Csv(format!("row {}: {e}", lineno + 2)))?;
            for k in 0..ncoord {
                coords[k].push(parsed[k]);
            }
            values.push(parsed[ncoord]);
        }
        let grid = match kind.as_str() {
            "radial" => rebuild_radial(n, &coords[0])?,
            _ => rebuild_box(&coords)?,
        };
        let mut field = Self::new(grid, values, "csv")?;
        field.meta = Some(FieldMeta { n, a, b });
        Ok(field)
    }
}

fn rebuild_radial(n: usize, r: &[f64]) -> Result<Arc<Grid>> {
    if r.len() < 3 {
        return Err(Error::Csv("radial grid needs at least 3 nodes".into()));
    }
    let (lo, hi, cells) = (r[0], r[r.len() - 1], r.len() - 1);
    for spacing in [Spacing::Uniform, Spacing::Geometric] {
        if let Ok(g) = RadialGrid::new(n, lo, hi, cells, spacing) {
            if g.nodes() == r {
                return Ok(Arc::new(Grid::Radial(g)));
            }
        }
    }
    Err(Error::Csv("radial nodes are neither uniform nor geometric".into()))
}

fn rebuild_box(coords: &[Vec<f64>]) -> Result<Arc<Grid>> {
    let mut axes: Vec<Vec<f64>> = Vec::new();
    for c in coords {
        let mut v = c.clone();
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        v.dedup();
        axes.push(v);
    }
    let lower = [axes[0][0], axes[1][0], axes[2][0]];
    let upper = [*axes[0].last().unwrap(), *axes[1].last().unwrap(), *axes[2].last().unwrap()];
    let cells = [axes[0].len() - 1, axes[1].len() - 1, axes[2].len() - 1];
    let grid = Grid::boxed(lower, upper, cells).map_err(|e| Error::Csv(e.to_string()))?;
    if let Grid::Box(g) = grid.as_ref() {
        for k in 0..3 {
            if g.coords(k) != axes[k].as_slice() {
                return Err(Error::Csv(format!("axis {k} coordinates are not uniform")));
            }
        }
        if coords[0].len() != grid.n_nodes() {
            return Err(Error::Csv("row count does not match the tensor grid".into()));
        }
        for i in 0..grid.n_nodes() {
            let p = g.point3(i);
            if p[0] != coords[0][i] || p[1] != coords[1][i] || p[2] != coords[2][i] {
                return Err(Error::Csv(format!("row {} is out of grid order", i + 2)));
            }
        }
    }
    Ok(grid)
}

//! Radial and three-dimensional box grids with exact power-weight integrals
//! over node (dual) cells and edge cells.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::{shell_power_integral, BallSpec};
use crate::quadrature::{box_power_integral, box_power_integral_in_ball, gauss, shell_fraction, sphere_area};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spacing {
    Uniform,
    Geometric,
    /// `r_i = r_min + (r_max - r_min) (i/n)^g`, clustering nodes at `r_min`.
    Graded(f64),
}

impl Spacing {
    pub fn as_str(self) -> &'static str {
        match self {
            Spacing::Uniform => "uniform",
            Spacing::Geometric => "geometric",
            Spacing::Graded(_) => "graded",
        }
    }
}

/// An edge between two nodes with its Euclidean length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub length: f64,
}

/// Part of the domain an integral is restricted to.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    Whole,
    Ball(&'a BallSpec),
    /// Points at distance at least `margin` from the grid boundary.
    Inset(f64),
}

type RegionWeights = Arc<Vec<(usize, f64)>>;

#[derive(Debug, Default)]
struct WeightCache {
    nodes: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
    edges: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
    /// Restricted weights keyed by region and exponent; cleared when full.
    regions: Mutex<HashMap<Vec<u64>, RegionWeights>>,
}

const REGION_CACHE_CAP: usize = 64;

/// Key `[kind, exponent, region data...]` with `kind` 0 for nodes, 1 for edges.
fn region_key(kind: u64, region: Region<'_>, e: f64) -> Vec<u64> {
    let mut key = vec![kind, e.to_bits()];
    match region {
        Region::Whole => key.push(0),
        Region::Inset(m) => key.extend([1, m.to_bits()]),
        Region::Ball(b) => {
            key.extend([2, b.radius.to_bits()]);
            key.extend(b.center.iter().map(|c| c.to_bits()));
        }
    }
    key
}

/// Radial nodes `r_0 < ... < r_n` representing radial functions in `R^N`.
#[derive(Debug)]
pub struct RadialGrid {
    dim: usize,
    r_min: f64,
    r_max: f64,
    spacing: Spacing,
    nodes: Vec<f64>,
    edges: Vec<Edge>,
    cache: WeightCache,
    adjacency: OnceLock<Vec<Vec<usize>>>,
}

impl RadialGrid {
    pub fn new(dim: usize, r_min: f64, r_max: f64, n_cells: usize, spacing: Spacing) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if !(r_min >= 0.0 && r_min < r_max && r_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("need 0 <= r_min < r_max, got [{r_min}, {r_max}]")));
        }
        if n_cells < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 cells, got {n_cells}")));
        }
        if let Spacing::Graded(g) = spacing {
            if !(g >= 1.0 && g.is_finite()) {
                return Err(Error::InvalidGrid(format!("grading exponent {g} must be at least 1")));
            }
        }
        if spacing == Spacing::Geometric && r_min <= 0.0 {
            return Err(Error::InvalidGrid("geometric spacing needs r_min > 0".into()));
        }
        let nodes = radial_nodes(r_min, r_max, n_cells, spacing);
        let edges = (0..n_cells)
            .map(|i| Edge { i, j: i + 1, length: nodes[i + 1] - nodes[i] })
            .collect();
        Ok(Self { dim, r_min, r_max, spacing, nodes, edges, cache: WeightCache::default(), adjacency: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn r_min(&self) -> f64 {
        self.r_min
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }
    pub fn spacing(&self) -> Spacing {
        self.spacing
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Dual cell `[lo, hi]` of node `i`.
    pub fn dual_cell(&self, i: usize) -> (f64, f64) {
        let n = self.nodes.len() - 1;
        let lo = if i == 0 { self.nodes[0] } else { 0.5 * (self.nodes[i - 1] + self.nodes[i]) };
        let hi = if i == n { self.nodes[n] } else { 0.5 * (self.nodes[i] + self.nodes[i + 1]) };
        (lo, hi)
    }

    /// `int sigma r^{N-1+e} frac(r) dr` over `[lo, hi]`, where `frac` is the
    /// share of the sphere of radius `r` inside `region`.
    fn interval_weight(&self, lo: f64, hi: f64, e: f64, region: Region<'_>) -> f64 {
        let n = self.dim;
        match region {
            Region::Whole => shell_power_integral(n, e, lo, hi),
            Region::Inset(margin) => {
                let (a, b) = self.inset_interval(margin);
                shell_power_integral(n, e, lo.max(a), hi.min(b))
            }
            Region::Ball(ball) => {
                let d = ball.center_norm();
                let rho = ball.radius;
                if d == 0.0 {
                    return shell_power_integral(n, e, lo, hi.min(rho));
                }
                let full_hi = rho - d;
                let mut acc = 0.0;
                if full_hi > 0.0 {
                    acc += shell_power_integral(n, e, lo, hi.min(full_hi));
                }
                let cap_lo = lo.max((d - rho).abs());
                let cap_hi = hi.min(d + rho);
                if cap_hi > cap_lo {
                    let sigma = sphere_area(n);
                    let k = n as f64 - 1.0 + e;
                    let f = |r: f64| sigma * r.powf(k) * shell_fraction(n, r, d, rho);
                    acc += gauss(&f, cap_lo, cap_hi, 8);
                }
                acc
            }
        }
    }

    fn inset_interval(&self, margin: f64) -> (f64, f64) {
        let lo = if self.r_min > 0.0 { self.r_min + margin } else { 0.0 };
        (lo, self.r_max - margin)
    }
}

fn radial_nodes(r_min: f64, r_max: f64, n: usize, spacing: Spacing) -> Vec<f64> {
    let mut nodes: Vec<f64> = (0..=n)
        .map(|i| match spacing {
            Spacing::Uniform => r_min + (r_max - r_min) * (i as f64) / (n as f64),
            Spacing::Geometric => r_min * (r_max / r_min).powf(i as f64 / n as f64),
            Spacing::Graded(g) => r_min + (r_max - r_min) * (i as f64 / n as f64).powf(g),
        })
        .collect();
    nodes[0] = r_min;
    nodes[n] = r_max;
    nodes
}

/// Uniform tensor grid on an axis-aligned box in `R^3`.
#[derive(Debug)]
pub struct BoxGrid {
    lower: [f64; 3],
    upper: [f64; 3],
    cells: [usize; 3],
    coords: [Vec<f64>; 3],
    edges: Vec<Edge>,
    /// Edge index leaving node `i` in the positive direction of each axis.
    edge_slot: Vec<[usize; 3]>,
    cache: WeightCache,
    adjacency: OnceLock<Vec<Vec<usize>>>,
}

fn axis_coords(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut c: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * (i as f64) / (n as f64)).collect();
    c[0] = lo;
    c[n] = hi;
    c
}

impl BoxGrid {
    pub fn new(lower: [f64; 3], upper: [f64; 3], cells: [usize; 3]) -> Result<Self> {
        for k in 0..3 {
            if !(lower[k] < upper[k]) || !lower[k].is_finite() || !upper[k].is_finite() {
                return Err(Error::InvalidGrid(format!("axis {k}: need lower < upper")));
            }
            if cells[k] < 2 {
                return Err(Error::InvalidGrid(format!("axis {k}: need at least 2 cells")));
            }
        }
        let coords = [
            axis_coords(lower[0], upper[0], cells[0]),
            axis_coords(lower[1], upper[1], cells[1]),
            axis_coords(lower[2], upper[2], cells[2]),
        ];
        let dims = [cells[0] + 1, cells[1] + 1, cells[2] + 1];
        let total = dims[0] * dims[1] * dims[2];
        let mut edges = Vec::with_capacity(3 * total);
        let mut edge_slot = vec![[usize::MAX; 3]; total];
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let idx = i + dims[0] * (j + dims[1] * k);
                    let ijk = [i, j, k];
                    for axis in 0..3 {
                        if ijk[axis] + 1 < dims[axis] {
                            let stride = [1, dims[0], dims[0] * dims[1]][axis];
                            let c = &coords[axis];
                            edge_slot[idx][axis] = edges.len();
                            edges.push(Edge { i: idx, j: idx + stride, length: c[ijk[axis] + 1] - c[ijk[axis]] });
                        }
                    }
                }
            }
        }
        Ok(Self { lower, upper, cells, coords, edges, edge_slot, cache: WeightCache::default(), adjacency: OnceLock::new() })
    }

    /// Cube `[-half, half]^3` with `n` cells per axis.
    pub fn cube(half: f64, n: usize) -> Result<Self> {
        Self::new([-half; 3], [half; 3], [n; 3])
    }

    pub fn lower(&self) -> [f64; 3] {
        self.lower
    }
    pub fn upper(&self) -> [f64; 3] {
        self.upper
    }
    pub fn cells(&self) -> [usize; 3] {
        self.cells
    }
    pub fn coords(&self, axis: usize) -> &[f64] {
        &self.coords[axis]
    }

    fn dims(&self) -> [usize; 3] {
        [self.cells[0] + 1, self.cells[1] + 1, self.cells[2] + 1]
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let d = self.dims();
        i + d[0] * (j + d[1] * k)
    }

    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let d = self.dims();
        [idx % d[0], (idx / d[0]) % d[1], idx / (d[0] * d[1])]
    }

    pub fn point3(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.ijk(idx);
        [self.coords[0][i], self.coords[1][j], self.coords[2][k]]
    }

    fn dual_extent(&self, axis: usize, i: usize) -> (f64, f64) {
        let c = &self.coords[axis];
        let lo = if i == 0 { c[0] } else { 0.5 * (c[i - 1] + c[i]) };
        let hi = if i + 1 == c.len() { c[i] } else { 0.5 * (c[i] + c[i + 1]) };
        (lo, hi)
    }

    /// Dual box of node `idx`.
    pub fn dual_box(&self, idx: usize) -> ([f64; 3], [f64; 3]) {
        let ijk = self.ijk(idx);
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for axis in 0..3 {
            (lo[axis], hi[axis]) = self.dual_extent(axis, ijk[axis]);
        }
        (lo, hi)
    }

    /// Box attached to edge `e`: the segment along its axis times the dual
    /// extents in the other two axes.
    pub fn edge_box(&self, e: &Edge) -> ([f64; 3], [f64; 3]) {
        let a = self.ijk(e.i);
        let b = self.ijk(e.j);
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for axis in 0..3 {
            if a[axis] != b[axis] {
                lo[axis] = self.coords[axis][a[axis]];
                hi[axis] = self.coords[axis][b[axis]];
            } else {
                (lo[axis], hi[axis]) = self.dual_extent(axis, a[axis]);
            }
        }
        (lo, hi)
    }

    /// Index range per axis of nodes whose dual boxes can meet `[lo, hi]`.
    fn node_range(&self, lo: &[f64; 3], hi: &[f64; 3]) -> [(usize, usize); 3] {
        std::array::from_fn(|axis| {
            let c = &self.coords[axis];
            let h = (self.upper[axis] - self.lower[axis]) / self.cells[axis] as f64;
            let first = ((lo[axis] - self.lower[axis]) / h - 1.0).floor().max(0.0) as usize;
            let last = (((hi[axis] - self.lower[axis]) / h + 1.0).ceil().max(0.0) as usize).min(c.len() - 1);
            (first.min(c.len() - 1), last)
        })
    }

    fn inset_box(&self, margin: f64) -> ([f64; 3], [f64; 3]) {
        (
            std::array::from_fn(|k| self.lower[k] + margin),
            std::array::from_fn(|k| self.upper[k] - margin),
        )
    }
}

fn intersect(a: &([f64; 3], [f64; 3]), b: &([f64; 3], [f64; 3])) -> ([f64; 3], [f64; 3]) {
    (
        std::array::from_fn(|k| a.0[k].max(b.0[k])),
        std::array::from_fn(|k| a.1[k].min(b.1[k])),
    )
}

/// A radial or box grid.
pub enum Grid {
    Radial(RadialGrid),
    Box(BoxGrid),
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Grid::Radial(g) => write!(f, "Radial(N={}, [{}, {}], {} cells, {})", g.dim, g.r_min, g.r_max, g.n_cells(), g.spacing.as_str()),
            Grid::Box(g) => write!(f, "Box({:?}..{:?}, {:?} cells)", g.lower(), g.upper(), g.cells()),
        }
    }
}

impl Grid {
    pub fn radial(dim: usize, r_min: f64, r_max: f64, n_cells: usize, spacing: Spacing) -> Result<Arc<Self>> {
        Ok(Arc::new(Grid::Radial(RadialGrid::new(dim, r_min, r_max, n_cells, spacing)?)))
    }

    pub fn cube(half: f64, n: usize) -> Result<Arc<Self>> {
        Ok(Arc::new(Grid::Box(BoxGrid::cube(half, n)?)))
    }

    pub fn boxed(lower: [f64; 3], upper: [f64; 3], cells: [usize; 3]) -> Result<Arc<Self>> {
        Ok(Arc::new(Grid::Box(BoxGrid::new(lower, upper, cells)?)))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Grid::Radial(_) => "radial",
            Grid::Box(_) => "box",
        }
    }

    /// Ambient dimension `N`.
    pub fn dim(&self) -> usize {
        match self {
            Grid::Radial(g) => g.dim,
            Grid::Box(_) => 3,
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            Grid::Radial(g) => g.nodes.len(),
            Grid::Box(g) => g.edge_slot.len(),
        }
    }

    pub fn edges(&self) -> &[Edge] {
        match self {
            Grid::Radial(g) => &g.edges,
            Grid::Box(g) => &g.edges,
        }
    }

    /// Largest edge length.
    pub fn cell_width(&self) -> f64 {
        match self {
            Grid::Radial(g) => g.edges.iter().map(|e| e.length).fold(0.0, f64::max),
            Grid::Box(g) => (0..3)
                .map(|k| (g.upper[k] - g.lower[k]) / g.cells[k] as f64)
                .fold(0.0, f64::max),
        }
    }

    /// Representative point of node `i` in `R^N`; radial nodes sit on the
    /// first axis.
    pub fn point(&self, i: usize) -> Vec<f64> {
        match self {
            Grid::Radial(g) => {
                let mut x = vec![0.0; g.dim];
                x[0] = g.nodes[i];
                x
            }
            Grid::Box(g) => g.point3(i).to_vec(),
        }
    }

    /// `|x_i|`.
    pub fn node_radius(&self, i: usize) -> f64 {
        match self {
            Grid::Radial(g) => g.nodes[i],
            Grid::Box(g) => {
                let p = g.point3(i);
                (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
            }
        }
    }

    /// Distance from node `i` to the center of `ball`; for radial grids the
    /// distance between shells.
    fn distance_to(&self, i: usize, center: &[f64]) -> f64 {
        match self {
            Grid::Radial(g) => {
                let d = center.iter().map(|c| c * c).sum::<f64>().sqrt();
                (g.nodes[i] - d).abs()
            }
            Grid::Box(g) => {
                let p = g.point3(i);
                (0..3).map(|k| (p[k] - center[k]).powi(2)).sum::<f64>().sqrt()
            }
        }
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        match self {
            Grid::Radial(g) => i + 1 == g.nodes.len() || (i == 0 && g.r_min > 0.0),
            Grid::Box(g) => {
                let ijk = g.ijk(i);
                (0..3).any(|k| ijk[k] == 0 || ijk[k] == g.cells[k])
            }
        }
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.n_nodes()).map(|i| self.is_boundary(i)).collect()
    }

    /// Neighbors of every node through edges, in edge order.
    pub fn adjacency(&self) -> &[Vec<usize>] {
        static_adjacency(self)
    }

    /// Whether the closed ball lies in the (closed) grid domain. For radial
    /// grids this means it lies in the annulus `r_min <= |x| <= r_max`.
    pub fn contains_ball(&self, ball: &BallSpec) -> bool {
        const SLACK: f64 = 1e-12;
        if ball.center.len() != self.dim() {
            return false;
        }
        match self {
            Grid::Radial(g) => {
                let d = ball.center_norm();
                let scale = g.r_max;
                if d + ball.radius > g.r_max + SLACK * scale {
                    return false;
                }
                g.r_min == 0.0 || d - ball.radius >= g.r_min - SLACK * scale
            }
            Grid::Box(g) => (0..3).all(|k| {
                let scale = g.upper[k] - g.lower[k];
                ball.center[k] - ball.radius >= g.lower[k] - SLACK * scale
                    && ball.center[k] + ball.radius <= g.upper[k] + SLACK * scale
            }),
        }
    }

    pub fn require_ball(&self, ball: &BallSpec) -> Result<()> {
        if self.contains_ball(ball) {
            Ok(())
        } else {
            Err(Error::BallOutsideDomain { center: ball.center.clone(), radius: ball.radius })
        }
    }

    /// Nodes lying in the closed ball. On radial grids these are the shells
    /// meeting the ball.
    pub fn nodes_in_ball(&self, ball: &BallSpec) -> Vec<usize> {
        match self {
            Grid::Radial(g) => {
                let d = ball.center_norm();
                let lo = (d - ball.radius).max(0.0);
                let hi = d + ball.radius;
                (0..g.nodes.len()).filter(|&i| g.nodes[i] >= lo && g.nodes[i] <= hi).collect()
            }
            Grid::Box(g) => {
                let c: [f64; 3] = std::array::from_fn(|k| ball.center[k]);
                let lo = std::array::from_fn(|k| c[k] - ball.radius);
                let hi = std::array::from_fn(|k| c[k] + ball.radius);
                let range = g.node_range(&lo, &hi);
                let mut out = Vec::new();
                for k in range[2].0..=range[2].1 {
                    for j in range[1].0..=range[1].1 {
                        for i in range[0].0..=range[0].1 {
                            let idx = g.index(i, j, k);
                            if ball.contains(&g.point3(idx)) {
                                out.push(idx);
                            }
                        }
                    }
                }
                out
            }
        }
    }

    /// Nodes at distance at least `margin` from the grid boundary.
    pub fn nodes_in_inset(&self, margin: f64) -> Vec<usize> {
        match self {
            Grid::Radial(g) => {
                let (lo, hi) = g.inset_interval(margin);
                (0..g.nodes.len()).filter(|&i| g.nodes[i] >= lo && g.nodes[i] <= hi).collect()
            }
            Grid::Box(g) => {
                let (lo, hi) = g.inset_box(margin);
                (0..self.n_nodes())
                    .filter(|&i| {
                        let p = g.point3(i);
                        (0..3).all(|k| p[k] >= lo[k] && p[k] <= hi[k])
                    })
                    .collect()
            }
        }
    }

    /// `int_{cell_i} |x|^e dx` for every node cell, cached per exponent.
    pub fn node_weights(&self, e: f64) -> Result<Arc<Vec<f64>>> {
        let cache = self.cache();
        if let Some(w) = cache.nodes.lock().unwrap().get(&e.to_bits()) {
            return Ok(w.clone());
        }
        check_exponent(self.dim(), e)?;
        let w: Vec<f64> = match self {
            Grid::Radial(g) => (0..g.nodes.len())
                .map(|i| {
                    let (lo, hi) = g.dual_cell(i);
                    shell_power_integral(g.dim, e, lo, hi)
                })
                .collect(),
            Grid::Box(g) => (0..self.n_nodes())
                .into_par_iter()
                .map(|i| {
                    let (lo, hi) = g.dual_box(i);
                    box_power_integral(&lo, &hi, e)
                })
                .collect::<Result<Vec<f64>>>()?,
        };
        let w = Arc::new(w);
        cache.nodes.lock().unwrap().insert(e.to_bits(), w.clone());
        Ok(w)
    }

    /// `int_{cell_e} |x|^e dx` for every edge cell, cached per exponent. The
    /// edge cells tile the domain once per axis.
    pub fn edge_weights(&self, e: f64) -> Result<Arc<Vec<f64>>> {
        let cache = self.cache();
        if let Some(w) = cache.edges.lock().unwrap().get(&e.to_bits()) {
            return Ok(w.clone());
        }
        check_exponent(self.dim(), e)?;
        let w: Vec<f64> = match self {
            Grid::Radial(g) => g
                .edges
                .iter()
                .map(|ed| shell_power_integral(g.dim, e, g.nodes[ed.i], g.nodes[ed.j]))
                .collect(),
            Grid::Box(g) => g
                .edges
                .par_iter()
                .map(|ed| {
                    let (lo, hi) = g.edge_box(ed);
                    box_power_integral(&lo, &hi, e)
                })
                .collect::<Result<Vec<f64>>>()?,
        };
        let w = Arc::new(w);
        cache.edges.lock().unwrap().insert(e.to_bits(), w.clone());
        Ok(w)
    }

    /// Node weights restricted to `region`, as `(node, weight)` pairs with
    /// positive weight in increasing node order.
    pub fn node_weights_in(&self, region: Region<'_>, e: f64) -> Result<Vec<(usize, f64)>> {
        if let Region::Whole = region {
            let w = self.node_weights(e)?;
            return Ok(w.iter().copied().enumerate().filter(|(_, v)| *v > 0.0).collect());
        }
        self.cached_region(region_key(0, region, e), || self.node_weights_in_uncached(region, e))
    }

    fn cached_region(&self, key: Vec<u64>, compute: impl FnOnce() -> Result<Vec<(usize, f64)>>) -> Result<Vec<(usize, f64)>> {
        let cache = &self.cache().regions;
        if let Some(w) = cache.lock().unwrap().get(&key) {
            return Ok(w.as_ref().clone());
        }
        let w = compute()?;
        let mut map = cache.lock().unwrap();
        if map.len() >= REGION_CACHE_CAP {
            map.clear();
        }
        map.insert(key, Arc::new(w.clone()));
        Ok(w)
    }

    fn node_weights_in_uncached(&self, region: Region<'_>, e: f64) -> Result<Vec<(usize, f64)>> {
        check_exponent(self.dim(), e)?;
        let out: Vec<(usize, f64)> = match self {
            Grid::Radial(g) => (0..g.nodes.len())
                .map(|i| {
                    let (lo, hi) = g.dual_cell(i);
                    (i, g.interval_weight(lo, hi, e, region))
                })
                .filter(|(_, v)| *v > 0.0)
                .collect(),
            Grid::Box(g) => {
                let full = self.node_weights(e)?;
                let candidates = box_candidates(g, region);
                candidates
                    .par_iter()
                    .map(|&i| {
                        let cell = g.dual_box(i);
                        box_region_weight(g, cell, full[i], e, region).map(|v| (i, v))
                    })
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .filter(|(_, v)| *v > 0.0)
                    .collect()
            }
        };
        Ok(out)
    }

    /// Edge weights restricted to `region`, as `(edge, weight)` pairs.
    pub fn edge_weights_in(&self, region: Region<'_>, e: f64) -> Result<Vec<(usize, f64)>> {
        if let Region::Whole = region {
            let w = self.edge_weights(e)?;
            return Ok(w.iter().copied().enumerate().filter(|(_, v)| *v > 0.0).collect());
        }
        self.cached_region(region_key(1, region, e), || self.edge_weights_in_uncached(region, e))
    }

    fn edge_weights_in_uncached(&self, region: Region<'_>, e: f64) -> Result<Vec<(usize, f64)>> {
        check_exponent(self.dim(), e)?;
        let out: Vec<(usize, f64)> = match self {
            Grid::Radial(g) => g
                .edges
                .iter()
                .enumerate()
                .map(|(k, ed)| (k, g.interval_weight(g.nodes[ed.i], g.nodes[ed.j], e, region)))
                .filter(|(_, v)| *v > 0.0)
                .collect(),
            Grid::Box(g) => {
                let full = self.edge_weights(e)?;
                let nodes = box_candidates(g, region);
                let mut edge_ids: Vec<usize> = nodes
                    .iter()
                    .flat_map(|&i| g.edge_slot[i].into_iter().filter(|&s| s != usize::MAX))
                    .collect();
                // edges entering the candidate block from below
                for &i in &nodes {
                    let ijk = g.ijk(i);
                    for axis in 0..3 {
                        if ijk[axis] > 0 {
                            let mut prev = ijk;
                            prev[axis] -= 1;
                            let s = g.edge_slot[g.index(prev[0], prev[1], prev[2])][axis];
                            edge_ids.push(s);
                        }
                    }
                }
                edge_ids.sort_unstable();
                edge_ids.dedup();
                edge_ids
                    .par_iter()
                    .map(|&k| {
                        let cell = g.edge_box(&g.edges[k]);
                        box_region_weight(g, cell, full[k], e, region).map(|v| (k, v))
                    })
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .filter(|(_, v)| *v > 0.0)
                    .collect()
            }
        };
        Ok(out)
    }

    fn cache(&self) -> &WeightCache {
        match self {
            Grid::Radial(g) => &g.cache,
            Grid::Box(g) => &g.cache,
        }
    }

    /// Node with the smallest distance to `x` (ties: lowest index).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for i in 0..self.n_nodes() {
            let d = self.distance_to(i, x);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }
}

fn check_exponent(n: usize, e: f64) -> Result<()> {
    if !(n as f64 + e > 0.0) || !e.is_finite() {
        return Err(Error::DegenerateExponent(format!("|x|^{e} is not locally integrable in R^{n}")));
    }
    Ok(())
}

fn box_candidates(g: &BoxGrid, region: Region<'_>) -> Vec<usize> {
    let (lo, hi) = match region {
        Region::Whole => (g.lower, g.upper),
        Region::Inset(m) => g.inset_box(m),
        Region::Ball(b) => (
            std::array::from_fn(|k| b.center[k] - b.radius),
            std::array::from_fn(|k| b.center[k] + b.radius),
        ),
    };
    let range = g.node_range(&lo, &hi);
    let mut out = Vec::new();
    for k in range[2].0..=range[2].1 {
        for j in range[1].0..=range[1].1 {
            for i in range[0].0..=range[0].1 {
                out.push(g.index(i, j, k));
            }
        }
    }
    out
}

fn box_region_weight(
    g: &BoxGrid,
    cell: ([f64; 3], [f64; 3]),
    full: f64,
    e: f64,
    region: Region<'_>,
) -> Result<f64> {
    match region {
        Region::Whole => Ok(full),
        Region::Inset(m) => {
            let (lo, hi) = intersect(&cell, &g.inset_box(m));
            if (0..3).any(|k| hi[k] <= lo[k]) {
                return Ok(0.0);
            }
            if lo == cell.0 && hi == cell.1 {
                return Ok(full);
            }
            box_power_integral(&lo, &hi, e)
        }
        Region::Ball(b) => {
            let c = [b.center[0], b.center[1], b.center[2]];
            let far: f64 = (0..3)
                .map(|k| (c[k] - cell.0[k]).abs().max((cell.1[k] - c[k]).abs()).powi(2))
                .sum();
            if far <= b.radius * b.radius {
                return Ok(full);
            }
            box_power_integral_in_ball(&cell.0, &cell.1, e, &c, b.radius)
        }
    }
}

fn static_adjacency(grid: &Grid) -> &[Vec<usize>] {
    let cell = match grid {
        Grid::Radial(g) => &g.adjacency,
        Grid::Box(g) => &g.adjacency,
    };
    cell.get_or_init(|| {
        let mut adj = vec![Vec::new(); grid.n_nodes()];
        for e in grid.edges() {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        adj
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_nodes_follow_the_power_law() {
        let g = Grid::radial(3, 0.0, 2.0, 8, Spacing::Graded(3.0)).unwrap();
        let Grid::Radial(r) = g.as_ref() else { unreachable!() };
        for (i, x) in r.nodes().iter().enumerate() {
            assert!((x - 2.0 * (i as f64 / 8.0).powi(3)).abs() < 1e-15);
        }
        // widths grow away from the origin
        assert!(r.nodes().windows(3).all(|w| w[2] - w[1] > w[1] - w[0]));
        let flat = Grid::radial(3, 0.5, 1.5, 4, Spacing::Graded(1.0)).unwrap();
        let uni = Grid::radial(3, 0.5, 1.5, 4, Spacing::Uniform).unwrap();
        let (Grid::Radial(a), Grid::Radial(b)) = (flat.as_ref(), uni.as_ref()) else { unreachable!() };
        for (x, y) in a.nodes().iter().zip(b.nodes()) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(Grid::radial(3, 0.0, 1.0, 8, Spacing::Graded(0.5)).is_err());
    }
}

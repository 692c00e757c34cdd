use super::{observed_orders, sci, Report, RunOptions};
use crate::config::{ExperimentConfig, GridConfig, GridKind};
use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::params::WeightParams;
use crate::solver::exact::{exact_radial_mms, CriticalBubble};
use crate::solver::{assemble, residual, solve, SolverSettings};

pub const MMS_ORDER_RANGE: (f64, f64) = (1.8, 2.5);
pub const MMS_FINEST_ERROR: f64 = 1e-5;
pub const FUNDAMENTAL_MIN_FACTOR: f64 = 3.3;
pub const DILATION_MIN_ORDER: f64 = 1.8;

/// One refinement level of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRow {
    pub level: usize,
    /// Largest cell width.
    pub h: f64,
    pub error: f64,
    /// Order (or reduction factor) against the previous level.
    pub rate: Option<f64>,
}

fn require_radial(grid: &GridConfig) -> Result<()> {
    if grid.kind != GridKind::Radial {
        return Err(Error::InvalidConfig { key: "grid.kind".into(), reason: "this experiment needs a radial grid".into() });
    }
    Ok(())
}

fn max_width(grid: &crate::grid::Grid) -> f64 {
    grid.edges().iter().map(|e| e.length).fold(0.0, f64::max)
}

fn with_orders(mut rows: Vec<LevelRow>) -> Vec<LevelRow> {
    let errs: Vec<f64> = rows.iter().map(|r| r.error).collect();
    for (r, o) in rows.iter_mut().skip(1).zip(observed_orders(&errs)) {
        r.rate = Some(o);
    }
    rows
}

fn with_factors(mut rows: Vec<LevelRow>) -> Vec<LevelRow> {
    for k in 1..rows.len() {
        rows[k].rate = Some(rows[k - 1].error / rows[k].error);
    }
    rows
}

/// Max nodal error of the discrete solution for the manufactured radial
/// solution with source exponent `gamma`, on every level of `grid`.
pub fn mms_study(params: &WeightParams, gamma: f64, grid: &GridConfig, solver: SolverSettings) -> Result<Vec<LevelRow>> {
    require_radial(grid)?;
    let mms = exact_radial_mms(params, gamma, grid.r_max)?;
    let rows = (0..grid.levels)
        .map(|level| {
            let g = grid.build(params.n(), level)?;
            let f = DiscreteField::sample_radial(g.clone(), "f", |r| mms.f(r))?;
            let bc = DiscreteField::sample_radial(g.clone(), "exact", |r| mms.u(r))?;
            let (u, _) = solve(&assemble(params, &f, &bc)?, solver)?;
            let error = u.values().iter().zip(bc.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok(LevelRow { level, h: max_width(&g), error, rate: None })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(with_orders(rows))
}

/// Energy-dual norm of the weak residual of the sampled fundamental solution
/// `|x|^{2+2a-N}` on an annulus.
pub fn fundamental_study(params: &WeightParams, grid: &GridConfig) -> Result<Vec<LevelRow>> {
    require_radial(grid)?;
    if !(grid.r_min > 0.0) {
        return Err(Error::InvalidConfig { key: "grid.r_min".into(), reason: "the annulus must avoid the origin".into() });
    }
    let e = params.fundamental_exponent();
    let rows = (0..grid.levels)
        .map(|level| {
            let g = grid.build(params.n(), level)?;
            let u = DiscreteField::sample_radial(g.clone(), "fundamental", |r| r.powf(e))?;
            let zero = DiscreteField::zeros(g.clone());
            let res = residual(params, &u, &zero)?;
            Ok(LevelRow { level, h: max_width(&g), error: res.dual_norm, rate: None })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(with_factors(rows))
}

/// Weak residual of the sampled dilation `lambda^{(N-2-2a)/2} u(lambda x)`
/// of the critical bubble, with the nonlinearity evaluated on the samples.
pub fn dilation_study(params: &WeightParams, lambda: f64, grid: &GridConfig) -> Result<Vec<LevelRow>> {
    require_radial(grid)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig { key: "run.lambda".into(), reason: "must be positive".into() });
    }
    let bubble = CriticalBubble::new(params)?;
    let rows = (0..grid.levels)
        .map(|level| {
            let g = grid.build(params.n(), level)?;
            let u = DiscreteField::sample_radial(g.clone(), "dilated", |r| bubble.dilated(lambda, r))?;
            let f = u.map(|v| bubble.nonlinearity(v))?;
            let res = residual(params, &u, &f)?;
            Ok(LevelRow { level, h: max_width(&g), error: res.dual_norm, rate: None })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(with_orders(rows))
}

fn level_lines(rows: &[LevelRow]) -> Vec<String> {
    rows.iter()
        .map(|r| format!("{},{},{},{}", r.level, sci(r.h), sci(r.error), r.rate.map(sci).unwrap_or_default()))
        .collect()
}

fn rates(rows: &[LevelRow]) -> Vec<f64> {
    rows.iter().filter_map(|r| r.rate).collect()
}

fn case_label(p: &WeightParams) -> String {
    format!("N={} a={} b={}", p.n(), p.a(), p.b())
}

pub fn run_mms(cfg: &ExperimentConfig, _opts: RunOptions) -> Result<Report> {
    let gamma = cfg.run_f64("gamma", 0.0)?;
    let grid = cfg.grid()?;
    let mut rep = Report::new(cfg);
    rep.kv("grid", grid.describe());
    for (i, p) in cfg.params()?.iter().enumerate() {
        let rows = mms_study(p, gamma, &grid, cfg.solver)?;
        rep.table(format!("mms_case{i}.csv"), "level,h,max_error,observed_order", &level_lines(&rows));
        let orders = rates(&rows);
        let finest = rows.last().map(|r| r.error).unwrap_or(f64::NAN);
        rep.kv(format!("case{i}"), case_label(p));
        rep.kv(format!("case{i}.orders"), orders.iter().map(|o| format!("{o:.4}")).collect::<Vec<_>>().join(" "));
        rep.kv(format!("case{i}.finest_error"), sci(finest));
        let (lo, hi) = MMS_ORDER_RANGE;
        rep.check(format!("case{i}.order"), !orders.is_empty() && orders.iter().all(|o| *o >= lo && *o <= hi));
        rep.check(format!("case{i}.finest_error"), finest <= MMS_FINEST_ERROR);
    }
    Ok(rep)
}

pub fn run_fundamental(cfg: &ExperimentConfig, _opts: RunOptions) -> Result<Report> {
    let grid = cfg.grid()?;
    let mut rep = Report::new(cfg);
    rep.kv("grid", grid.describe());
    for (i, p) in cfg.params()?.iter().enumerate() {
        let rows = fundamental_study(p, &grid)?;
        rep.table(format!("fundamental_case{i}.csv"), "level,h,dual_norm,reduction_factor", &level_lines(&rows));
        let factors = rates(&rows);
        rep.kv(format!("case{i}"), case_label(p));
        rep.kv(format!("case{i}.factors"), factors.iter().map(|o| format!("{o:.4}")).collect::<Vec<_>>().join(" "));
        rep.check(format!("case{i}.reduction"), !factors.is_empty() && factors.iter().all(|f| *f >= FUNDAMENTAL_MIN_FACTOR));
    }
    Ok(rep)
}

pub fn run_dilation(cfg: &ExperimentConfig, _opts: RunOptions) -> Result<Report> {
    let lambda = cfg.run_f64("lambda", 2.0)?;
    let grid = cfg.grid()?;
    let mut rep = Report::new(cfg);
    rep.kv("grid", grid.describe());
    rep.kv("lambda", lambda);
    for (i, p) in cfg.params()?.iter().enumerate() {
        let rows = dilation_study(p, lambda, &grid)?;
        rep.table(format!("dilation_case{i}.csv"), "level,h,dual_norm,observed_order", &level_lines(&rows));
        let orders = rates(&rows);
        rep.kv(format!("case{i}"), case_label(p));
        rep.kv(format!("case{i}.orders"), orders.iter().map(|o| format!("{o:.4}")).collect::<Vec<_>>().join(" "));
        rep.check(format!("case{i}.order"), !orders.is_empty() && orders.iter().all(|o| *o >= DILATION_MIN_ORDER));
    }
    Ok(rep)
}

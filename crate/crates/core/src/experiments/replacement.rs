use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{sci, Report, RunOptions};
use crate::config::{ExperimentConfig, GridKind};
use crate::error::{Error, Result};
use crate::inequality::test_field_suite;
use crate::measure::BallSpec;
use crate::params::WeightParams;
use crate::solver::{harmonic_replacement, SolverSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplacementTrial {
    pub case: usize,
    pub trial: usize,
    pub field: String,
    pub ball: BallSpec,
    pub energy_u: f64,
    pub energy_w: f64,
    /// Energy after replacing the replacement again.
    pub energy_ww: f64,
}

impl ReplacementTrial {
    pub fn minimal(&self) -> bool {
        self.energy_w <= self.energy_u
    }

    pub fn idempotence_gap(&self) -> f64 {
        (self.energy_ww - self.energy_w).abs() / self.energy_w.max(f64::MIN_POSITIVE)
    }
}

/// Replaces each seeded suite field inside a random ball with center in the
/// middle 40% of the cube and radius between a quarter and half the
/// half-width, then replaces the result again.
pub fn replacement_trials(
    params: &WeightParams,
    case: usize,
    grid: &std::sync::Arc<crate::grid::Grid>,
    seed: u64,
    trials: usize,
    solver: SolverSettings,
) -> Result<Vec<ReplacementTrial>> {
    let crate::grid::Grid::Box(b) = grid.as_ref() else {
        return Err(Error::InvalidConfig { key: "grid.kind".into(), reason: "harmonic replacement trials need a cube grid".into() });
    };
    let half = 0.5 * (b.upper()[0] - b.lower()[0]);
    let fields = test_field_suite(params, grid, seed, trials)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case as u64 + 1);
    let balls: Vec<BallSpec> = (0..trials)
        .map(|_| {
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.4 * half..0.4 * half)).collect();
            BallSpec::new(c, rng.gen_range(0.25 * half..0.5 * half))
        })
        .collect::<Result<_>>()?;
    fields
        .par_iter()
        .zip(balls.par_iter())
        .enumerate()
        .map(|(trial, (u, ball))| {
            let w = harmonic_replacement(params, u, ball, solver)?;
            let ww = harmonic_replacement(params, &w, ball, solver)?;
            Ok(ReplacementTrial {
                case,
                trial,
                field: u.name().to_string(),
                ball: ball.clone(),
                energy_u: u.dirichlet_energy(params)?,
                energy_w: w.dirichlet_energy(params)?,
                energy_ww: ww.dirichlet_energy(params)?,
            })
        })
        .collect()
}

pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let seed = cfg.require_seed()?;
    let trials = cfg.run_usize("trials", 50)?;
    let grid_cfg = cfg.grid()?;
    if grid_cfg.kind != GridKind::Cube {
        return Err(Error::InvalidConfig { key: "grid.kind".into(), reason: "harmonic replacement trials need a cube grid".into() });
    }
    let mut rep = Report::new(cfg);
    rep.kv("grid", grid_cfg.describe());
    let mut summary = Vec::new();
    let mut dump = Vec::new();
    for (i, p) in cfg.params()?.iter().enumerate() {
        let grid = grid_cfg.build(p.n(), 0)?;
        let rows = replacement_trials(p, i, &grid, seed, trials, cfg.solver)?;
        let non_minimal = rows.iter().filter(|t| !t.minimal()).count();
        let worst_gap = rows.iter().map(|t| t.idempotence_gap()).fold(0.0, f64::max);
        let min_drop = rows.iter().map(|t| (t.energy_u - t.energy_w) / t.energy_u).fold(f64::INFINITY, f64::min);
        summary.push(format!("{i},{},{},{},{},{},{},{}", p.n(), sci(p.a()), sci(p.b()), rows.len(), non_minimal, sci(min_drop), sci(worst_gap)));
        rep.kv(format!("case{i}.non_minimal"), non_minimal);
        rep.kv(format!("case{i}.min_relative_energy_drop"), sci(min_drop));
        rep.kv(format!("case{i}.max_idempotence_gap"), sci(worst_gap));
        rep.check(format!("case{i}.minimality"), non_minimal == 0);
        rep.check(format!("case{i}.idempotence"), worst_gap <= cfg.solver.tol);
        for t in &rows {
            dump.push(format!(
                "{},{},{},{},{},{},{},{},{},{}",
                t.case,
                t.trial,
                t.field,
                sci(t.ball.center[0]),
                sci(t.ball.center[1]),
                sci(t.ball.center[2]),
                sci(t.ball.radius),
                sci(t.energy_u),
                sci(t.energy_w),
                sci(t.energy_ww)
            ));
        }
    }
    rep.table(
        "harmonic_replacement.csv",
        "case,N,a,b,trials,non_minimal,min_relative_energy_drop,max_idempotence_gap",
        &summary,
    );
    if opts.dump_trials {
        rep.table("harmonic_replacement_trials.csv", "case,trial,field,x,y,z,radius,energy_u,energy_w,energy_ww", &dump);
    }
    Ok(rep)
}

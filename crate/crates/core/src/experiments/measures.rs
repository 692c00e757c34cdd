use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{sci, Report, RunOptions};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::measure::{
    ball_power_integral, ball_power_integral_quadrature, doubling_ratio, lemma_a1_check, lemma_a1_envelope, BallSpec,
    MeasureMethod,
};
use crate::params::{Integrability, WeightParams};

pub const MEASURE_REL_TOL: f64 = 1e-8;
pub const DOUBLING_REL_TOL: f64 = 1e-10;
pub const ENVELOPE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureRow {
    pub n: usize,
    pub a: f64,
    pub r: f64,
    pub closed_form: f64,
    pub quadrature: f64,
    pub rel_error: f64,
    pub doubling: f64,
    pub doubling_expected: f64,
    pub doubling_rel_error: f64,
}

/// Centered balls with `3 <= N <= 6`, `-1.5 <= a <= (N-2)/2 - 0.05` and
/// log-uniform radii in `[0.05, 4]`.
pub fn measure_identity_rows(seed: u64, combos: usize, tau: f64) -> Result<Vec<MeasureRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(usize, f64, f64)> = (0..combos)
        .map(|_| {
            let n = rng.gen_range(3..=6usize);
            let a = rng.gen_range(-1.5..=(n as f64 - 2.0) / 2.0 - 0.05);
            let r = (rng.gen_range(0.05f64.ln()..=4f64.ln())).exp();
            (n, a, r)
        })
        .collect();
    draws
        .par_iter()
        .map(|&(n, a, r)| {
            let params = WeightParams::validate(n, a, a, Integrability::Infinite)?;
            let ball = BallSpec::centered(n, r)?;
            let closed = ball_power_integral(n, -2.0 * a, &ball, 1e-12)?;
            debug_assert_eq!(closed.method, MeasureMethod::ClosedForm);
            let quad = ball_power_integral_quadrature(n, -2.0 * a, &ball, 1e-12)?;
            let doubling = doubling_ratio(&params, &vec![0.0; n], r, tau)?;
            let expected = (1.0 / tau).powf(n as f64 - 2.0 * a);
            Ok(MeasureRow {
                n,
                a,
                r,
                closed_form: closed.value,
                quadrature: quad.value,
                rel_error: (quad.value / closed.value - 1.0).abs(),
                doubling,
                doubling_expected: expected,
                doubling_rel_error: (doubling / expected - 1.0).abs(),
            })
        })
        .collect()
}

pub fn run_identities(cfg: &ExperimentConfig, _opts: RunOptions) -> Result<Report> {
    let seed = cfg.require_seed()?;
    let combos = cfg.run_usize("combos", 100)?;
    let tau = cfg.run_f64("tau", 0.5)?;
    let rows = measure_identity_rows(seed, combos, tau)?;
    let mut rep = Report::new(cfg);
    let lines: Vec<String> = rows
        .iter()
        .map(|m| {
            [
                m.n.to_string(),
                sci(m.a),
                sci(m.r),
                sci(m.closed_form),
                sci(m.quadrature),
                sci(m.rel_error),
                sci(m.doubling),
                sci(m.doubling_expected),
                sci(m.doubling_rel_error),
            ]
            .join(",")
        })
        .collect();
    rep.table(
        "measure_report.csv",
        "N,a,r,closed_form,quadrature,rel_error,doubling,doubling_expected,doubling_rel_error",
        &lines,
    );
    let worst = rows.iter().map(|m| m.rel_error).fold(0.0, f64::max);
    let worst_d = rows.iter().map(|m| m.doubling_rel_error).fold(0.0, f64::max);
    rep.kv("combos", combos);
    rep.kv("tau", tau);
    rep.kv("max_rel_error", sci(worst));
    rep.kv("max_doubling_rel_error", sci(worst_d));
    rep.check("closed_form_vs_quadrature", worst <= MEASURE_REL_TOL);
    rep.check("centered_doubling", worst_d <= DOUBLING_REL_TOL);
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A1Row {
    pub case: usize,
    /// `|x0| / rho`
    pub t: f64,
    pub rho: f64,
    pub ratio: f64,
    pub envelope: f64,
}

impl A1Row {
    pub fn within(&self) -> bool {
        self.ratio <= self.envelope * (1.0 + ENVELOPE_SLACK)
    }
}

/// Random balls in `R^N`: a tenth centered, the rest with `|x0|/rho`
/// log-uniform in `[1e-3, 1e2]`; radii log-uniform in `[1e-3, 10]`.
pub fn lemma_a1_rows(params: &WeightParams, case: usize, seed: u64, balls: usize) -> Result<Vec<A1Row>> {
    let eps = params.epsilon_choice()?;
    let n = params.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case as u64 + 1);
    let draws: Vec<(Vec<f64>, f64)> = (0..balls)
        .map(|_| {
            let rho = rng.gen_range(1e-3f64.ln()..=10f64.ln()).exp();
            let t = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(1e-3f64.ln()..=100f64.ln()).exp() };
            let mut dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            dir.iter_mut().for_each(|v| *v *= t * rho / norm);
            (dir, rho)
        })
        .collect();
    draws
        .par_iter()
        .map(|(center, rho)| {
            let ball = BallSpec::new(center.clone(), *rho)?;
            let s = lemma_a1_check(params, &ball, eps)?;
            let t_exact = ball.center_norm() / rho;
            Ok(A1Row { case, t: t_exact, rho: *rho, ratio: s.ratio, envelope: lemma_a1_envelope(params, eps, t_exact) })
        })
        .collect()
}

pub fn run_lemma_a1(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let seed = cfg.require_seed()?;
    let balls = cfg.run_usize("balls", 1000)?;
    let cases = cfg.params()?;
    let mut rep = Report::new(cfg);
    let mut summary_rows = Vec::new();
    let mut all = Vec::new();
    for (i, p) in cases.iter().enumerate() {
        let rows = lemma_a1_rows(p, i, seed, balls)?;
        let violations = rows.iter().filter(|r| !r.within()).count();
        let worst = rows.iter().map(|r| r.ratio / r.envelope).fold(0.0, f64::max);
        summary_rows.push(format!("{i},{},{},{},{},{},{},{}", p.n(), sci(p.a()), sci(p.b()), p.s(), rows.len(), violations, sci(worst)));
        rep.kv(format!("case{i}.violations"), violations);
        rep.kv(format!("case{i}.max_ratio_over_envelope"), sci(worst));
        rep.check(format!("case{i}.envelope"), violations == 0);
        all.extend(rows);
    }
    rep.table("lemma_a1_report.csv", "case,N,a,b,s,balls,violations,max_ratio_over_envelope", &summary_rows);
    if opts.dump_trials {
        let lines: Vec<String> = all
            .iter()
            .map(|r| format!("{},{},{},{},{}", r.case, sci(r.t), sci(r.rho), sci(r.ratio), sci(r.envelope)))
            .collect();
        rep.table("lemma_a1_trials.csv", "case,t,rho,ratio,envelope", &lines);
    }
    Ok(rep)
}

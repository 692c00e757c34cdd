use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sci, Report, RunOptions};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::params::{critical_exponent, Integrability, WeightParams};

pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityTrial {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub p: f64,
    /// `|(N - bp)(2/p) - (N - 2 - 2a)|`
    pub error: f64,
}

/// Random admissible `(N, a, b)` with `3 <= N <= 12`, `-3 <= a < (N-2)/2`,
/// `a <= b <= a + 1`.
pub fn identity_trials(seed: u64, samples: usize) -> Result<Vec<IdentityTrial>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let n = rng.gen_range(3..=12usize);
            let a = rng.gen_range(-3.0..(n as f64 - 2.0) / 2.0);
            let b = rng.gen_range(a..=a + 1.0);
            let params = WeightParams::validate(n, a, b, Integrability::Infinite)?;
            let nf = n as f64;
            let p = params.p();
            let error = ((nf - params.bp()) * (2.0 / p) - (nf - 2.0 - 2.0 * a)).abs();
            Ok(IdentityTrial { n, a, b, p, error })
        })
        .collect()
}

pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let seed = cfg.require_seed()?;
    let samples = cfg.run_usize("samples", 10_000)?;
    let mut rep = Report::new(cfg);
    let examples = [(3usize, 0.0, 0.0, 6.0), (4, 0.5, 0.75, 3.2)];
    let mut rows = Vec::new();
    for (n, a, b, expected) in examples {
        let p = critical_exponent(n, a, b);
        let err = (p - expected).abs();
        rows.push(format!("p({n};{a};{b}),{},{},{}", sci(p), sci(expected), sci(err)));
        rep.check(format!("p({n},{a},{b})"), err <= IDENTITY_TOL);
    }
    let trials = identity_trials(seed, samples)?;
    let worst = trials.iter().map(|t| t.error).fold(0.0, f64::max);
    rows.push(format!("identity_max,{},{},{}", sci(worst), sci(0.0), sci(worst)));
    rep.table("exponent_report.csv", "check,value,expected,abs_error", &rows);
    rep.kv("samples", samples);
    rep.kv("identity_max_error", sci(worst));
    rep.check("identity", worst <= IDENTITY_TOL);
    if opts.dump_trials {
        let rows: Vec<String> = trials
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{i},{},{},{},{},{}", t.n, sci(t.a), sci(t.b), sci(t.p), sci(t.error)))
            .collect();
        rep.table("exponent_trials.csv", "trial,N,a,b,p,identity_error", &rows);
    }
    Ok(rep)
}

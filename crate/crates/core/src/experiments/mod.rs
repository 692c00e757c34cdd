//! Named end-to-end experiments driven by [`ExperimentConfig`] files.
//!
//! Every experiment writes CSV tables and a `<name>_summary.txt` into the
//! configured output directory. Each file starts with the manifest line, so
//! reruns with the same config are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

pub mod algebra;
pub mod convergence;
pub mod inequalities;
pub mod iteration;
pub mod measures;
pub mod regularity;
pub mod replacement;

/// Scientific notation used in every table.
pub fn sci(x: f64) -> String {
    format!("{x:.12e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Also write per-trial tables for randomized suites.
    pub dump_trials: bool,
}

/// Tables and summary produced by one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: String,
    pub manifest: String,
    pub tables: Vec<(String, String)>,
    pub summary: Vec<(String, String)>,
    pub pass: bool,
}

impl Report {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self { experiment: cfg.experiment.clone(), manifest: cfg.manifest(), tables: Vec::new(), summary: Vec::new(), pass: true }
    }

    /// Adds a CSV table; `rows` are already comma-joined.
    pub fn table(&mut self, file: impl Into<String>, header: &str, rows: &[String]) {
        let mut body = String::with_capacity(64 * (rows.len() + 2));
        body.push_str(&self.manifest);
        body.push('\n');
        body.push_str(header);
        body.push('\n');
        for r in rows {
            body.push_str(r);
            body.push('\n');
        }
        self.tables.push((file.into(), body));
    }

    pub fn kv(&mut self, key: impl Into<String>, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }

    /// Records a named pass/fail check; the report passes only if all do.
    pub fn check(&mut self, key: impl Into<String>, ok: bool) {
        self.pass &= ok;
        self.kv(key, if ok { "pass" } else { "FAIL" });
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.manifest);
        out.push('\n');
        for (k, v) in &self.summary {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "pass = {}", self.pass);
        out
    }

    /// Writes every table and the summary; returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (name, body) in &self.tables {
            let p = dir.join(name);
            std::fs::write(&p, body)?;
            paths.push(p);
        }
        let p = dir.join(format!("{}_summary.txt", self.experiment));
        std::fs::write(&p, self.summary_text())?;
        paths.push(p);
        Ok(paths)
    }
}

type Runner = fn(&ExperimentConfig, RunOptions) -> Result<Report>;

pub struct ExperimentSpec {
    pub name: &'static str,
    pub description: &'static str,
    /// Randomized experiments refuse to run without `seed`.
    pub randomized: bool,
    /// Accepted `run.*` keys.
    pub run_keys: &'static [&'static str],
    pub runner: Runner,
}

pub static REGISTRY: &[ExperimentSpec] = &[
    ExperimentSpec {
        name: "exponent_algebra",
        description: "critical exponent examples and the scaling identity over random admissible tuples",
        randomized: true,
        run_keys: &["samples"],
        runner: algebra::run,
    },
    ExperimentSpec {
        name: "measure_identities",
        description: "closed-form ball measures against shell quadrature and centered doubling ratios",
        randomized: true,
        run_keys: &["combos", "tau"],
        runner: measures::run_identities,
    },
    ExperimentSpec {
        name: "lemma_a1_ratio",
        description: "critical-weight versus energy-weight ball comparison against its analytic envelope",
        randomized: true,
        run_keys: &["balls"],
        runner: measures::run_lemma_a1,
    },
    ExperimentSpec {
        name: "mms_convergence",
        description: "manufactured radial solutions: max error and observed order under refinement",
        randomized: false,
        run_keys: &["gamma"],
        runner: convergence::run_mms,
    },
    ExperimentSpec {
        name: "fundamental_solution",
        description: "weak residual decay of the sampled fundamental solution on annuli",
        randomized: false,
        run_keys: &[],
        runner: convergence::run_fundamental,
    },
    ExperimentSpec {
        name: "dilation_symmetry",
        description: "weak residual decay of a dilated critical bubble",
        randomized: false,
        run_keys: &["lambda"],
        runner: convergence::run_dilation,
    },
    ExperimentSpec {
        name: "harmonic_replacement",
        description: "energy minimality and idempotence of harmonic replacement over a seeded suite",
        randomized: true,
        run_keys: &["trials"],
        runner: replacement::run,
    },
    ExperimentSpec {
        name: "inequality_suite",
        description: "weighted Sobolev and Poincare quotients: suite maxima, refinement stability, invariance",
        randomized: true,
        run_keys: &["count", "ckn_constant", "poincare_constant"],
        runner: inequalities::run_suite,
    },
    ExperimentSpec {
        name: "alpha_h_estimation",
        description: "oscillation-decay exponent of weighted-harmonic fields near the origin",
        randomized: false,
        run_keys: &["radii_cells"],
        runner: inequalities::run_alpha_h,
    },
    ExperimentSpec {
        name: "regularity_report",
        description: "measured versus predicted Holder exponents of solutions with constant data",
        randomized: true,
        run_keys: &["alpha_h_cells", "slack", "constructed_exponent"],
        runner: regularity::run,
    },
    ExperimentSpec {
        name: "moser_ladder",
        description: "integrability ladder, interpolation checks and potential smallness on a critical solution",
        randomized: false,
        run_keys: &["margin0", "extra_steps", "ckn_constant"],
        runner: iteration::run_ladder_experiment,
    },
    ExperimentSpec {
        name: "lemma_a2_property",
        description: "iteration-lemma conclusion on extremal profiles over random envelopes",
        randomized: true,
        run_keys: &["envelopes", "trials"],
        runner: iteration::run_lemma_a2,
    },
];

pub fn find(name: &str) -> Result<&'static ExperimentSpec> {
    REGISTRY.iter().find(|e| e.name == name).ok_or_else(|| Error::UnknownExperiment(name.to_string()))
}

/// One line per experiment in registry order.
pub fn list_experiments() -> String {
    let width = REGISTRY.iter().map(|e| e.name.len()).max().unwrap_or(0);
    REGISTRY.iter().map(|e| format!("{:<width$}  {}\n", e.name, e.description)).collect()
}

/// Validates the config against the experiment and runs it without writing.
pub fn execute(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let spec = find(&cfg.experiment)?;
    cfg.check_run_keys(spec.run_keys)?;
    if spec.randomized {
        cfg.require_seed()?;
    }
    (spec.runner)(cfg, opts)
}

/// Loads, runs and writes; returns the report and the written files.
pub fn run_config(path: &Path, opts: RunOptions) -> Result<(Report, Vec<PathBuf>)> {
    let cfg = ExperimentConfig::load(path)?;
    let report = execute(&cfg, opts)?;
    let files = report.write(&cfg.output_dir)?;
    Ok((report, files))
}

/// True for failures of the config or the invocation rather than of the
/// computation.
pub fn is_usage_error(e: &Error) -> bool {
    matches!(e, Error::InvalidConfig { .. } | Error::UnknownExperiment(_) | Error::Io(_))
}

/// Observed orders `log2(e_k / e_{k+1})` of a halving sequence.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_are_unique_and_listed() {
        let text = list_experiments();
        for (i, e) in REGISTRY.iter().enumerate() {
            assert!(text.contains(e.name));
            assert!(REGISTRY[..i].iter().all(|o| o.name != e.name));
        }
        assert_eq!(text.lines().count(), REGISTRY.len());
        assert!(matches!(find("nope"), Err(Error::UnknownExperiment(_))));
    }

    #[test]
    fn orders_of_a_clean_sequence() {
        let o = observed_orders(&[1.0, 0.25, 0.0625]);
        assert_eq!(o, vec![2.0, 2.0]);
    }
}

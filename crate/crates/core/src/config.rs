//! Flat `key = value` experiment configs with dotted sections.
//!
//! ```text
//! experiment = mms_convergence
//! seed = 7
//! params.N = 3
//! params.a = 0, 0.25      # lists zip across params.N/a/b/s
//! grid.kind = radial
//! solver.tol = 1e-12
//! run.gamma = 0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Grid, Spacing};
use crate::params::{Integrability, WeightParams};
use crate::solver::SolverSettings;

fn invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig { key: key.to_string(), reason: reason.into() }
}

/// Raw entries in key order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(invalid(&format!("line {}", lineno + 1), "expected `key = value`"));
            };
            let key = k.trim();
            if key.is_empty() || key.split('.').any(|part| part.is_empty()) {
                return Err(invalid(key, format!("malformed key on line {}", lineno + 1)));
            }
            if entries.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(invalid(key, "duplicate key"));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| invalid(key, format!("`{v}` is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse::<usize>().map_err(|_| invalid(key, format!("`{v}` is not a nonnegative integer")))
}

fn split_list(v: &str) -> Vec<&str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Radial,
    Cube,
}

/// Grid block: a base resolution and a number of refinement levels, each
/// doubling the cell count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub kind: GridKind,
    pub spacing: Spacing,
    pub r_min: f64,
    pub r_max: f64,
    pub half: f64,
    pub n: usize,
    pub levels: usize,
}

impl GridConfig {
    pub fn cells_at(&self, level: usize) -> usize {
        self.n << level
    }

    pub fn build(&self, dim: usize, level: usize) -> Result<std::sync::Arc<Grid>> {
        match self.kind {
            GridKind::Radial => Grid::radial(dim, self.r_min, self.r_max, self.cells_at(level), self.spacing),
            GridKind::Cube => {
                if dim != 3 {
                    return Err(invalid("grid.kind", "cube grids are three-dimensional; set params.N = 3"));
                }
                Grid::cube(self.half, self.cells_at(level))
            }
        }
    }

    pub fn describe(&self) -> String {
        match self.kind {
            GridKind::Radial => format!(
                "radial[{}, {}] {} n={} levels={}",
                self.r_min,
                self.r_max,
                match self.spacing {
                    Spacing::Graded(g) => format!("graded({g})"),
                    s => s.as_str().to_string(),
                },
                self.n,
                self.levels
            ),
            GridKind::Cube => format!("cube[-{h}, {h}]^3 n={} levels={}", self.n, self.levels, h = self.half),
        }
    }
}

/// A parsed and validated experiment config.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: Option<u64>,
    pub solver: SolverSettings,
    pub output_dir: PathBuf,
    raw: RawConfig,
}

const GRID_KEYS: [&str; 8] = ["kind", "spacing", "grading", "r_min", "r_max", "half", "n", "levels"];
const PARAM_KEYS: [&str; 4] = ["N", "a", "b", "s"];

impl ExperimentConfig {
    /// Validates the common blocks. Relative output directories resolve
    /// against `base_dir`.
    pub fn from_raw(raw: RawConfig, base_dir: &Path) -> Result<Self> {
        for key in raw.entries().keys() {
            let ok = match key.split_once('.') {
                None => matches!(key.as_str(), "experiment" | "seed"),
                Some(("params", rest)) => PARAM_KEYS.contains(&rest),
                Some(("grid", rest)) => GRID_KEYS.contains(&rest),
                Some(("solver", rest)) => matches!(rest, "tol" | "max_iter"),
                Some(("output", rest)) => rest == "dir",
                Some((section, _)) => section == "run",
            };
            if !ok {
                return Err(invalid(key, "unknown key"));
            }
        }
        let experiment = raw.get("experiment").ok_or_else(|| invalid("experiment", "missing"))?.to_string();
        let seed = match raw.get("seed") {
            Some(v) => Some(v.trim().parse::<u64>().map_err(|_| invalid("seed", format!("`{v}` is not an unsigned integer")))?),
            None => None,
        };
        let mut solver = SolverSettings::default();
        if let Some(v) = raw.get("solver.tol") {
            solver.tol = parse_f64("solver.tol", v)?;
            if !(solver.tol > 0.0 && solver.tol < 1.0) {
                return Err(invalid("solver.tol", "must lie in (0, 1)"));
            }
        }
        if let Some(v) = raw.get("solver.max_iter") {
            solver.max_iter = parse_usize("solver.max_iter", v)?;
            if solver.max_iter == 0 {
                return Err(invalid("solver.max_iter", "must be positive"));
            }
        }
        let dir = raw.get("output.dir").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out").join(&experiment));
        let output_dir = if dir.is_absolute() { dir } else { base_dir.join(dir) };
        Ok(Self { experiment, seed, solver, output_dir, raw })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_raw(RawConfig::parse(&text)?, &base)
    }

    pub fn raw(&self) -> &RawConfig {
        &self.raw
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| invalid("seed", "required by this randomized experiment"))
    }

    /// The zipped `params.*` lists; a single value broadcasts.
    pub fn params(&self) -> Result<Vec<WeightParams>> {
        let mut cols: Vec<(&str, Vec<&str>)> = Vec::new();
        for k in PARAM_KEYS {
            let key = format!("params.{k}");
            let v = self.raw.get(&key).ok_or_else(|| invalid(&key, "missing"))?;
            let list = split_list(v);
            if list.is_empty() {
                return Err(invalid(&key, "empty list"));
            }
            cols.push((k, list));
        }
        let len = cols.iter().map(|(_, l)| l.len()).max().unwrap_or(1);
        for (k, l) in &cols {
            if l.len() != 1 && l.len() != len {
                return Err(invalid(&format!("params.{k}"), format!("has {} entries, expected 1 or {len}", l.len())));
            }
        }
        let pick = |c: usize, i: usize| -> &str {
            let l = &cols[c].1;
            if l.len() == 1 {
                l[0]
            } else {
                l[i]
            }
        };
        (0..len)
            .map(|i| {
                let n = parse_usize("params.N", pick(0, i))?;
                let a = parse_f64("params.a", pick(1, i))?;
                let b = parse_f64("params.b", pick(2, i))?;
                let s_text = pick(3, i);
                let s = Integrability::parse(s_text).ok_or_else(|| invalid("params.s", format!("`{s_text}` is neither a number nor inf")))?;
                WeightParams::validate(n, a, b, s).map_err(|e| invalid("params", format!("case {i}: {e}")))
            })
            .collect()
    }

    pub fn grid(&self) -> Result<GridConfig> {
        let kind = match self.raw.get("grid.kind") {
            Some("radial") => GridKind::Radial,
            Some("cube") => GridKind::Cube,
            Some(other) => return Err(invalid("grid.kind", format!("`{other}` is not radial or cube"))),
            None => return Err(invalid("grid.kind", "missing")),
        };
        let f = |k: &str, d: f64| -> Result<f64> {
            let key = format!("grid.{k}");
            self.raw.get(&key).map(|v| parse_f64(&key, v)).unwrap_or(Ok(d))
        };
        let spacing = match self.raw.get("grid.spacing").unwrap_or("uniform") {
            "uniform" => Spacing::Uniform,
            "geometric" => Spacing::Geometric,
            "graded" => {
                let g = f("grading", f64::NAN)?;
                if !(g >= 1.0) {
                    return Err(invalid("grid.grading", "graded spacing needs grid.grading >= 1"));
                }
                Spacing::Graded(g)
            }
            other => return Err(invalid("grid.spacing", format!("`{other}` is not uniform, geometric or graded"))),
        };
        let n = parse_usize("grid.n", self.raw.get("grid.n").ok_or_else(|| invalid("grid.n", "missing"))?)?;
        if n < 2 {
            return Err(invalid("grid.n", "need at least 2 cells"));
        }
        let levels = self.raw.get("grid.levels").map(|v| parse_usize("grid.levels", v)).unwrap_or(Ok(1))?;
        if levels == 0 || levels > 12 {
            return Err(invalid("grid.levels", "must lie in 1..=12"));
        }
        let cfg = GridConfig { kind, spacing, r_min: f("r_min", 0.0)?, r_max: f("r_max", 1.0)?, half: f("half", 1.0)?, n, levels };
        if !(cfg.r_min >= 0.0 && cfg.r_max > cfg.r_min) {
            return Err(invalid("grid.r_max", "need 0 <= grid.r_min < grid.r_max"));
        }
        if !(cfg.half > 0.0) {
            return Err(invalid("grid.half", "must be positive"));
        }
        Ok(cfg)
    }

    /// Rejects `run.*` keys the experiment does not read.
    pub fn check_run_keys(&self, known: &[&str]) -> Result<()> {
        for key in self.raw.entries().keys() {
            if let Some(rest) = key.strip_prefix("run.") {
                if !known.contains(&rest) {
                    return Err(invalid(key, format!("not used by `{}`", self.experiment)));
                }
            }
        }
        Ok(())
    }

    pub fn run_f64(&self, key: &str, default: f64) -> Result<f64> {
        let full = format!("run.{key}");
        self.raw.get(&full).map(|v| parse_f64(&full, v)).unwrap_or(Ok(default))
    }

    pub fn run_opt_f64(&self, key: &str) -> Result<Option<f64>> {
        let full = format!("run.{key}");
        self.raw.get(&full).map(|v| parse_f64(&full, v)).transpose()
    }

    pub fn run_usize(&self, key: &str, default: usize) -> Result<usize> {
        let full = format!("run.{key}");
        self.raw.get(&full).map(|v| parse_usize(&full, v)).unwrap_or(Ok(default))
    }

    pub fn run_list_f64(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let full = format!("run.{key}");
        match self.raw.get(&full) {
            None => Ok(None),
            Some(v) => split_list(v).into_iter().map(|x| parse_f64(&full, x)).collect::<Result<Vec<_>>>().map(Some),
        }
    }

    /// Sorted `key=value` echo of every entry except the output location.
    pub fn manifest(&self) -> String {
        let body: Vec<String> = self
            .raw
            .entries()
            .iter()
            .filter(|(k, _)| k.as_str() != "output.dir")
            .map(|(k, v)| format!("{k}={}", v.split_whitespace().collect::<Vec<_>>().join("")))
            .collect();
        format!("# manifest {}", body.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_raw(RawConfig::parse(text)?, Path::new("/tmp/base"))
    }

    fn key_of(e: Error) -> String {
        match e {
            Error::InvalidConfig { key, .. } => key,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn parses_blocks_and_lists() {
        let c = cfg("experiment = x # trailing\nseed = 5\nparams.N = 3\nparams.a = 0, 0.25\nparams.b = 0,0.25\nparams.s = inf\n\
                     grid.kind = radial\ngrid.spacing = graded\ngrid.grading = 3\ngrid.n = 16\ngrid.levels = 3\nsolver.tol = 1e-12\noutput.dir = o\n")
            .unwrap();
        assert_eq!(c.seed, Some(5));
        assert_eq!(c.solver.tol, 1e-12);
        assert_eq!(c.output_dir, PathBuf::from("/tmp/base/o"));
        let ps = c.params().unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[1].a(), 0.25);
        assert_eq!(ps[0].p(), 6.0);
        let g = c.grid().unwrap();
        assert_eq!(g.spacing, Spacing::Graded(3.0));
        assert_eq!(g.cells_at(2), 64);
        assert_eq!(c.manifest(), "# manifest experiment=x grid.grading=3 grid.kind=radial grid.levels=3 grid.n=16 grid.spacing=graded params.N=3 params.a=0,0.25 params.b=0,0.25 params.s=inf seed=5 solver.tol=1e-12");
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(cfg("seed = 1").unwrap_err()), "experiment");
        assert_eq!(key_of(cfg("experiment = x\nseed = -1").unwrap_err()), "seed");
        assert_eq!(key_of(cfg("experiment = x\ngrid.colour = red").unwrap_err()), "grid.colour");
        assert_eq!(key_of(cfg("experiment = x\nbogus.k = 1").unwrap_err()), "bogus.k");
        assert_eq!(key_of(cfg("experiment = x\nexperiment = y").unwrap_err()), "experiment");
        let c = cfg("experiment = x\nparams.N = 3\nparams.a = 0\nparams.b = 0, 0.2, 0.3\nparams.s = inf\nparams.s = 2").unwrap_err();
        assert_eq!(key_of(c), "params.s");
        let c = cfg("experiment = x\nparams.N = 3\nparams.a = 0, 0.1\nparams.b = 0, 0.2, 0.3\nparams.s = inf").unwrap();
        assert_eq!(key_of(c.params().unwrap_err()), "params.a");
        let c = cfg("experiment = x\nparams.N = 3\nparams.a = 0\nparams.b = 2\nparams.s = inf").unwrap();
        assert_eq!(key_of(c.params().unwrap_err()), "params");
        let c = cfg("experiment = x").unwrap();
        assert_eq!(key_of(c.require_seed().unwrap_err()), "seed");
        assert_eq!(key_of(c.grid().unwrap_err()), "grid.kind");
        let c = cfg("experiment = x\nrun.trials = 3").unwrap();
        assert_eq!(key_of(c.check_run_keys(&["count"]).unwrap_err()), "run.trials");
        assert!(c.check_run_keys(&["trials"]).is_ok());
        assert_eq!(key_of(cfg("experiment = x\nsolver.tol = 2").unwrap_err()), "solver.tol");
    }
}

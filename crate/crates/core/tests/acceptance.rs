//! End-to-end acceptance: one line per criterion, all twelve must pass.
//!
//! Runs without the libtest harness so the criterion lines always reach
//! stdout and the timings are not skewed by parallel tests.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ckn_lab::config::ExperimentConfig;
use ckn_lab::experiments::convergence::{dilation_study, fundamental_study, mms_study};
use ckn_lab::experiments::inequalities::{harmonic_alpha_h, radial_invariance_defect, suite_levels, DEFAULT_RADII_CELLS};
use ckn_lab::experiments::iteration::{a2_suite, bubble_ladder};
use ckn_lab::experiments::measures::{lemma_a1_rows, measure_identity_rows};
use ckn_lab::experiments::regularity::{constructed_fit, unit_source_report};
use ckn_lab::experiments::replacement::replacement_trials;
use ckn_lab::experiments::{execute, algebra, RunOptions, REGISTRY};
use ckn_lab::grid::Grid;
use ckn_lab::params::{critical_exponent, Integrability, WeightParams};
use ckn_lab::regularity::RegularitySettings;
use ckn_lab::solver::exact::exact_radial_mms;

const IDENTITY_TOL: f64 = 1e-12;
const MEASURE_REL_TOL: f64 = 1e-8;
const DOUBLING_REL_TOL: f64 = 1e-10;
const MMS_ORDER: (f64, f64) = (1.8, 2.5);
const MMS_FINEST_ERROR: f64 = 1e-5;
const MMS_FINEST_CELLS: usize = 2048;
const REPLACEMENT_TRIALS: usize = 50;
const FUNDAMENTAL_FACTOR: f64 = 3.3;
const DILATION_ORDER: f64 = 1.8;
const STABILITY: f64 = 0.02;
const INVARIANCE: f64 = 1e-6;
const ALPHA_H_UNWEIGHTED: f64 = 0.9;
const ALPHA_H_RMS: f64 = 0.05;
const REGULARITY_SLACK: f64 = 0.1;
const CONSTRUCTED: (f64, f64) = (0.5, 0.05);
const INTERPOLATION: f64 = 0.01;
const A2_ENVELOPES: usize = 20;
const A2_TRIALS: usize = 1000;
const A1_BALLS: usize = 1000;
const A1_SLACK: f64 = 1e-6;

type Outcome = Result<String, String>;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join(format!("{name}.cfg"))).unwrap()
}

fn p3(a: f64, b: f64) -> WeightParams {
    WeightParams::validate(3, a, b, Integrability::Infinite).unwrap()
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(t: Instant, limit: Duration, detail: String) -> Outcome {
    let el = t.elapsed();
    ensure(el < limit, format!("{detail}; {:.2}s of {:.0}s", el.as_secs_f64(), limit.as_secs_f64()))
}

fn exponent_algebra() -> Outcome {
    let t = Instant::now();
    let p1 = critical_exponent(3, 0.0, 0.0);
    let p2 = critical_exponent(4, 0.5, 0.75);
    if (p1 - 6.0).abs() > IDENTITY_TOL || (p2 - 3.2).abs() > IDENTITY_TOL {
        return Err(format!("p(3,0,0)={p1} p(4,0.5,0.75)={p2}"));
    }
    let trials = algebra::identity_trials(load("exponent_algebra").require_seed().unwrap(), 10_000).unwrap();
    let worst = trials.iter().map(|t| t.error).fold(0.0, f64::max);
    if worst > IDENTITY_TOL {
        return Err(format!("identity error {worst:e}"));
    }
    within_time(t, Duration::from_secs(1), format!("10000 tuples, max identity error {worst:.1e}"))
}

fn measure_identities() -> Outcome {
    let t = Instant::now();
    let cfg = load("measure_identities");
    let rows = measure_identity_rows(cfg.require_seed().unwrap(), 100, 0.5).unwrap();
    assert_eq!(rows.len(), 100);
    let q = rows.iter().map(|m| m.rel_error).fold(0.0, f64::max);
    // the expected doubling ratio is recomputed here from N and a alone
    let d = rows
        .iter()
        .map(|m| (m.doubling / 2f64.powf(m.n as f64 - 2.0 * m.a) - 1.0).abs())
        .fold(0.0, f64::max);
    if q > MEASURE_REL_TOL || d > DOUBLING_REL_TOL {
        return Err(format!("quadrature {q:e}, doubling {d:e}"));
    }
    within_time(t, Duration::from_secs(10), format!("100 balls, quadrature {q:.1e}, doubling {d:.1e}"))
}

fn mms_convergence() -> Outcome {
    let t = Instant::now();
    let cfg = load("mms_convergence");
    let grid = cfg.grid().unwrap();
    assert_eq!(grid.levels, 5, "four halvings");
    assert_eq!(grid.cells_at(grid.levels - 1), MMS_FINEST_CELLS);
    let cases = [p3(0.0, 0.0), p3(0.25, 0.25)];
    // the unweighted manufactured solution is (1 - r^2)/6
    let m = exact_radial_mms(&cases[0], 0.0, 1.0).unwrap();
    for r in [0.0, 0.3, 0.9] {
        assert!((m.u(r) - (1.0 - r * r) / 6.0).abs() < 1e-15);
    }
    let mut detail = Vec::new();
    for p in &cases {
        let rows = mms_study(p, 0.0, &grid, cfg.solver).unwrap();
        let orders: Vec<f64> = rows.iter().filter_map(|r| r.rate).collect();
        let finest = rows.last().unwrap().error;
        let ok = orders.len() == 4 && orders.iter().all(|o| (MMS_ORDER.0..=MMS_ORDER.1).contains(o)) && finest <= MMS_FINEST_ERROR;
        let d = format!("a={}: orders {:?} finest {finest:.2e}", p.a(), orders.iter().map(|o| (o * 1e3).round() / 1e3).collect::<Vec<_>>());
        if !ok {
            return Err(d);
        }
        detail.push(d);
    }
    within_time(t, Duration::from_secs(30), detail.join("; "))
}

fn harmonic_replacement() -> Outcome {
    let cfg = load("harmonic_replacement");
    let grid = cfg.grid().unwrap();
    let mut worst_gap: f64 = 0.0;
    let mut count = 0;
    for (i, p) in cfg.params().unwrap().iter().enumerate() {
        let g = grid.build(3, 0).unwrap();
        let rows = replacement_trials(p, i, &g, cfg.require_seed().unwrap(), REPLACEMENT_TRIALS, cfg.solver).unwrap();
        assert_eq!(rows.len(), REPLACEMENT_TRIALS);
        if let Some(bad) = rows.iter().find(|r| r.energy_w > r.energy_u) {
            return Err(format!("case {i} trial {}: energy {} > {}", bad.trial, bad.energy_w, bad.energy_u));
        }
        worst_gap = rows.iter().map(|r| r.idempotence_gap()).fold(worst_gap, f64::max);
        count += rows.len();
    }
    ensure(worst_gap <= cfg.solver.tol, format!("{count} trials minimal, idempotence gap {worst_gap:.1e} (tol {:.0e})", cfg.solver.tol))
}

fn fundamental_solution() -> Outcome {
    let cfg = load("fundamental_solution");
    let grid = cfg.grid().unwrap();
    assert!(grid.r_min > 0.0 && grid.levels >= 3);
    let mut detail = Vec::new();
    for a in [-0.5, 0.0, 0.4] {
        let rows = fundamental_study(&p3(a, a), &grid).unwrap();
        let f: Vec<f64> = rows.iter().filter_map(|r| r.rate).collect();
        let min = f.iter().copied().fold(f64::INFINITY, f64::min);
        if f.len() < 2 || min < FUNDAMENTAL_FACTOR {
            return Err(format!("a={a}: factors {f:?}"));
        }
        detail.push(format!("a={a}: min factor {min:.3}"));
    }
    Ok(detail.join("; "))
}

fn dilation_symmetry() -> Outcome {
    let cfg = load("dilation_symmetry");
    let grid = cfg.grid().unwrap();
    let mut worst = f64::INFINITY;
    for p in cfg.params().unwrap() {
        let rows = dilation_study(&p, 2.0, &grid).unwrap();
        let o: Vec<f64> = rows.iter().filter_map(|r| r.rate).collect();
        if o.is_empty() {
            return Err("no refinement".into());
        }
        worst = o.iter().copied().fold(worst, f64::min);
    }
    ensure(worst >= DILATION_ORDER, format!("lambda=2, min observed order {worst:.3}"))
}

fn inequality_suites() -> Outcome {
    let cfg = load("inequality_suite");
    let grid = cfg.grid().unwrap();
    assert!(grid.levels >= 2, "one refinement");
    let frozen_ckn = cfg.run_list_f64("ckn_constant").unwrap().expect("frozen constants in the shipped config");
    let frozen_poin = cfg.run_list_f64("poincare_constant").unwrap().expect("frozen constants in the shipped config");
    let count = cfg.run_usize("count", 40).unwrap();
    let mut detail = Vec::new();
    for (i, p) in cfg.params().unwrap().iter().enumerate() {
        let grids: Vec<_> = (0..grid.levels).map(|l| grid.build(3, l).unwrap()).collect();
        let levels = suite_levels(p, &grids, cfg.require_seed().unwrap(), count).unwrap();
        let rows = levels.iter().flat_map(|l| &l.rows);
        let v = rows.clone().filter(|r| r.ckn.ratio > frozen_ckn[i] || r.poincare.ratio > frozen_poin[i]).count();
        if v > 0 {
            return Err(format!("case {i}: {v} violations"));
        }
        for w in levels.windows(2) {
            let dc = (w[1].ckn_max / w[0].ckn_max - 1.0).abs();
            let dp = (w[1].poincare_max / w[0].poincare_max - 1.0).abs();
            if dc > STABILITY || dp > STABILITY {
                return Err(format!("case {i}: drift ckn {dc:.4} poincare {dp:.4}"));
            }
        }
        let inv = radial_invariance_defect(p).unwrap();
        if inv > INVARIANCE {
            return Err(format!("case {i}: invariance defect {inv:e}"));
        }
        detail.push(format!("case {i}: C={:.4} P={:.4}", frozen_ckn[i], frozen_poin[i]));
    }
    Ok(format!("no violations, drift within 2%, invariance within 1e-6; {}", detail.join(", ")))
}

fn alpha_h() -> Outcome {
    let cfg = load("alpha_h_estimation");
    let grid = cfg.grid().unwrap().build(3, 0).unwrap();
    let mut detail = Vec::new();
    for a in [0.0, -0.5, 0.4] {
        let est = harmonic_alpha_h(&p3(a, a), &grid, &DEFAULT_RADII_CELLS, cfg.solver).unwrap();
        let ok = if a == 0.0 {
            est.alpha_h >= ALPHA_H_UNWEIGHTED
        } else {
            est.alpha_h > 0.0 && est.alpha_h <= 1.0 && est.fit_residual <= ALPHA_H_RMS
        };
        let d = format!("a={a}: {:.3} (rms {:.1e})", est.alpha_h, est.fit_residual);
        if !ok {
            return Err(d);
        }
        detail.push(d);
    }
    Ok(detail.join("; "))
}

fn regularity() -> Outcome {
    let t = Instant::now();
    let cfg = load("regularity_report");
    let grid = cfg.grid().unwrap().build(3, 0).unwrap();
    let cube = Grid::cube(1.0, cfg.run_usize("alpha_h_cells", 64).unwrap()).unwrap();
    let matrix = [
        (0.0, 0.0, Integrability::Infinite),
        (0.3, 0.4, Integrability::Infinite),
        (0.0, 0.0, Integrability::Finite(1.6)),
        (-0.5, -0.2, Integrability::Infinite),
    ];
    let settings = RegularitySettings { slack: REGULARITY_SLACK, seed: cfg.require_seed().unwrap(), ..RegularitySettings::default() };
    let mut detail = Vec::new();
    for (a, b, s) in matrix {
        let p = WeightParams::validate(3, a, b, s).unwrap();
        let ah = harmonic_alpha_h(&p, &cube, &DEFAULT_RADII_CELLS, cfg.solver).unwrap().alpha_h;
        let r = unit_source_report(&p, &grid, ah, cfg.solver, settings).unwrap();
        let c = constructed_fit(&p, &grid, CONSTRUCTED.0).unwrap().alpha.unwrap();
        let d = format!("({a},{b},{s}): {:.3} vs {:.3}, constructed {c:.3}", r.alpha_measured, r.alpha_predicted_sup);
        if r.alpha_measured < r.alpha_predicted_sup - REGULARITY_SLACK || (c - CONSTRUCTED.0).abs() > CONSTRUCTED.1 {
            return Err(d);
        }
        detail.push(d);
    }
    within_time(t, Duration::from_secs(120), detail.join("; "))
}

fn brute_k0(p: f64) -> usize {
    (0..64).find(|&k| (p / 2.0).powi(k as i32) >= 2.0 * (p - 1.0) / (p - 2.0)).unwrap()
}

fn moser_ladder() -> Outcome {
    let k6 = p3(0.0, 0.0).k0_threshold().unwrap();
    let k4 = p3(0.0, 0.25).k0_threshold().unwrap();
    if k6 != 1 || k4 != 2 || brute_k0(6.0) != 1 || brute_k0(4.0) != 2 {
        return Err(format!("k0(6)={k6} k0(4)={k4}"));
    }
    let cfg = load("moser_ladder");
    let grid_cfg = cfg.grid().unwrap();
    let mut worst: f64 = 0.0;
    for p in cfg.params().unwrap() {
        let grid = grid_cfg.build(3, 0).unwrap();
        let (_, states) = bubble_ladder(&p, &grid, 0.2, 2).unwrap();
        let k0 = p.k0_threshold().unwrap();
        if states.len() != k0 + 3 {
            return Err(format!("{p}: ladder stopped at {}", states.len()));
        }
        for s in &states {
            let q = p.p().powi(s.k as i32 + 1) / 2f64.powi(s.k as i32);
            if s.q_k != q || !s.norm_q.is_finite() {
                return Err(format!("{p}: step {} q={} norm={}", s.k, s.q_k, s.norm_q));
            }
            worst = s.interpolation_ratio.map_or(worst, |r| worst.max(r));
        }
    }
    ensure(worst <= 1.0 + INTERPOLATION, format!("k0(6)=1, k0(4)=2, max interpolation ratio {worst:.4}"))
}

fn lemma_engines() -> Outcome {
    let t = Instant::now();
    let seed = load("lemma_a2_property").require_seed().unwrap();
    let suite = a2_suite(seed, A2_ENVELOPES, A2_TRIALS).unwrap();
    let a2_trials: usize = suite.iter().map(|(_, r)| r.trials.len()).sum();
    let a2_v: usize = suite.iter().map(|(_, r)| r.violations).sum();
    let centered = suite.iter().filter(|(i, _)| i.family.center.iter().all(|c| *c == 0.0)).count();
    if a2_trials != A2_ENVELOPES * A2_TRIALS || a2_v > 0 || centered == 0 || centered == A2_ENVELOPES {
        return Err(format!("A2: {a2_v} violations over {a2_trials} trials, {centered} centered families"));
    }
    let a1 = load("lemma_a1_ratio");
    let mut a1_v = 0;
    for (i, p) in a1.params().unwrap().iter().enumerate() {
        let rows = lemma_a1_rows(p, i, a1.require_seed().unwrap(), A1_BALLS).unwrap();
        a1_v += rows.iter().filter(|r| r.ratio > r.envelope * (1.0 + A1_SLACK)).count();
    }
    if a1_v > 0 {
        return Err(format!("A1: {a1_v} balls above the envelope"));
    }
    within_time(t, Duration::from_secs(60), format!("A2 {a2_trials} trials clean; A1 {A1_BALLS} balls per case within envelope"))
}

fn determinism() -> Outcome {
    let mut checked = 0;
    for spec in REGISTRY {
        let cfg = load(spec.name);
        let opts = RunOptions { dump_trials: true };
        let r1 = execute(&cfg, opts).unwrap();
        let r2 = execute(&cfg, opts).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let f1 = r1.write(d1.path()).unwrap();
        let f2 = r2.write(d2.path()).unwrap();
        if f1.len() != f2.len() {
            return Err(format!("{}: file sets differ", spec.name));
        }
        for (a, b) in f1.iter().zip(&f2) {
            if std::fs::read(a).unwrap() != std::fs::read(b).unwrap() {
                return Err(format!("{}: {} differs", spec.name, a.file_name().unwrap().to_string_lossy()));
            }
            checked += 1;
        }
    }
    Ok(format!("{} experiments, {checked} files byte-identical across reruns", REGISTRY.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("exponent algebra", exponent_algebra),
        ("measure identities", measure_identities),
        ("mms convergence", mms_convergence),
        ("harmonic replacement", harmonic_replacement),
        ("fundamental solution", fundamental_solution),
        ("dilation symmetry", dilation_symmetry),
        ("inequality suites", inequality_suites),
        ("alpha_h estimation", alpha_h),
        ("regularity pipeline", regularity),
        ("moser ladder", moser_ladder),
        ("iteration lemmas", lemma_engines),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("[PASS] {:>2} {name}: {d}", i + 1),
            Err(d) => {
                println!("[FAIL] {:>2} {name}: {d}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: 12/12 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}

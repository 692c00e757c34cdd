//! Empirical constants for the weighted Sobolev, Poincaré, sup-bound and
//! weak Harnack inequalities, and oscillation-decay estimates of the
//! harmonic Hölder exponent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::grid::{Grid, Region};
use crate::measure::BallSpec;
use crate::params::{Weight, WeightParams};
use crate::quadrature::{graded_adaptive, sphere_area};
use crate::regularity::{gradient_profile, least_squares, GrowthProfile};
use crate::solver::{ball_partition, conductances};

/// Left side, constant-free right side and their quotient.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSample {
    pub descriptor: String,
    pub lhs: f64,
    pub rhs_core: f64,
    /// `lhs / rhs_core`; zero when both vanish, `+inf` when only the right side does.
    pub ratio: f64,
}

impl RatioSample {
    pub fn new(descriptor: impl Into<String>, lhs: f64, rhs_core: f64) -> Self {
        let ratio = if rhs_core > 0.0 {
            lhs / rhs_core
        } else if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Self { descriptor: descriptor.into(), lhs, rhs_core, ratio }
    }

    pub fn csv_header() -> &'static str {
        "descriptor,lhs,rhs_core,ratio"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{:.12e},{:.12e},{:.12e}", self.descriptor, self.lhs, self.rhs_core, self.ratio)
    }
}

/// `(int |u|^p |x|^{-bp})^{1/p} / (int |grad u|^2 |x|^{-2a})^{1/2}` for a
/// field vanishing on the grid boundary.
pub fn ckn_ratio(params: &WeightParams, field: &DiscreteField) -> Result<RatioSample> {
    let grid = field.grid();
    if field.values().iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroField);
    }
    if (0..grid.n_nodes()).any(|i| grid.is_boundary(i) && field.values()[i] != 0.0) {
        return Err(Error::NotCompactlySupported);
    }
    let lhs = field.lq_norm(params, params.p())?;
    let rhs = field.dirichlet_energy(params)?.sqrt();
    Ok(RatioSample::new(field.name(), lhs, rhs))
}

/// The same quotient for a radial profile on `B_{r_max}` by 1D quadrature.
/// `profile(r_max)` should vanish.
pub fn ckn_ratio_radial(
    params: &WeightParams,
    profile: impl Fn(f64) -> f64,
    derivative: impl Fn(f64) -> f64,
    r_max: f64,
) -> Result<RatioSample> {
    let n = params.n() as f64;
    let p = params.p();
    let sigma = sphere_area(params.n());
    // int_0^R g(r) r^{k-1} dr = (R^k / k) int_0^1 g(R t^{1/k}) dt removes the
    // power singularity at the origin
    let with_power = |g: &dyn Fn(f64) -> f64, k: f64| -> Result<f64> {
        let h = |t: f64| g(r_max * t.powf(1.0 / k));
        Ok(r_max.powf(k) / k * graded_adaptive(&h, 0.0, 1.0, true, true, 40, 1e-12)?.0)
    };
    let ip = with_power(&|r| profile(r).abs().powf(p), n - params.bp())?;
    let ie = with_power(&|r| derivative(r).powi(2), n - 2.0 * params.a())?;
    if ie == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(RatioSample::new("radial_profile", (sigma * ip).powf(1.0 / p), (sigma * ie).sqrt()))
}

/// `int_B |u - mean|^2 dmu_a` against `r^2 int_B |grad u|^2 dmu_a`.
pub fn poincare_ratio(params: &WeightParams, field: &DiscreteField, ball: &BallSpec) -> Result<RatioSample> {
    let mean = field.ball_mean(params, Weight::Energy, ball)?;
    let lhs = field.integrate_with(params, Weight::Energy, Region::Ball(ball), |v| (v - mean) * (v - mean))?;
    let rhs = ball.radius * ball.radius * field.energy_in(params, Region::Ball(ball))?;
    Ok(RatioSample::new(field.name(), lhs, rhs))
}

/// `max_{B_{r/2}} |u|` against `(mean_{B_r} |u|^2 dmu_a)^{1/2}`.
pub fn sup_bound_ratio(params: &WeightParams, field: &DiscreteField, ball: &BallSpec) -> Result<RatioSample> {
    let half = ball.scaled(0.5)?;
    let inner = field.grid().nodes_in_ball(&half);
    if inner.is_empty() {
        return Err(Error::EmptyBall);
    }
    let lhs = inner.iter().fold(0.0f64, |m, &i| m.max(field.values()[i].abs()));
    let sq = field.map(|v| v * v)?;
    let rhs = sq.ball_mean(params, Weight::Energy, ball)?.sqrt();
    Ok(RatioSample::new(field.name(), lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaHEstimate {
    /// Fitted oscillation-decay slope limited to `(0, 1]`.
    pub alpha_h: f64,
    pub raw_slope: f64,
    pub fit_residual: f64,
    pub n_samples: usize,
}

/// Smallest reported estimate; a nonpositive slope is recorded as this.
pub const ALPHA_H_FLOOR: f64 = 1e-6;

/// Fits `log osc(u, B_rho)` against `log rho`.
pub fn estimate_alpha_h(field: &DiscreteField, center: &[f64], radii: &[f64]) -> Result<AlphaHEstimate> {
    if radii.len() < 3 {
        return Err(Error::InsufficientPoints(radii.len()));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("radii must be strictly decreasing".into()));
    }
    let floor = 1e-14 * field.max_abs().max(1.0);
    let mut xs = Vec::with_capacity(radii.len());
    let mut ys = Vec::with_capacity(radii.len());
    for &r in radii {
        let ball = BallSpec::new(center.to_vec(), r)?;
        let osc = field.oscillation(&ball)?;
        if osc < floor {
            return Err(Error::DegenerateOscillation { radius: r, osc });
        }
        xs.push(r.ln());
        ys.push(osc.ln());
    }
    let (slope, _, rms) = least_squares(&xs, &ys)?;
    Ok(AlphaHEstimate {
        alpha_h: slope.clamp(ALPHA_H_FLOOR, 1.0),
        raw_slope: slope,
        fit_residual: rms,
        n_samples: radii.len(),
    })
}

/// Relative tolerance for the discrete superharmonicity test.
pub const SUPERHARMONIC_TOL: f64 = 1e-10;

/// Exponent of the averaged side of the weak Harnack quotient when the caller
/// has no better choice.
pub const DEFAULT_WEAK_HARNACK_EXPONENT: f64 = 1.0;

/// Weak Harnack quotient `(mean_{B_r} u^s dmu_a)^{1/s} / min_{B_{r/2}} u`
/// for a nonnegative field that is discretely superharmonic on `B_{2r}`.
pub fn weak_harnack_check(params: &WeightParams, field: &DiscreteField, ball: &BallSpec, s_exp: f64) -> Result<RatioSample> {
    if !(s_exp > 0.0) {
        return Err(Error::InvalidInput(format!("exponent {s_exp} must be positive")));
    }
    let grid = field.grid();
    let outer = ball.scaled(2.0)?;
    grid.require_ball(&outer)?;
    let v = field.values();
    for i in grid.nodes_in_ball(&outer) {
        if v[i] < 0.0 {
            return Err(Error::NegativeField { node: i, value: v[i] });
        }
    }
    // a(u, phi_i) >= 0 for hats supported in B_{2r}, relative to the row size
    let c = conductances(params, grid)?;
    let mut op = vec![0.0; v.len()];
    let mut scale = vec![0.0; v.len()];
    for (e, ce) in grid.edges().iter().zip(&c) {
        let flux = ce * (v[e.i] - v[e.j]);
        op[e.i] += flux;
        op[e.j] -= flux;
        let s = ce * (v[e.i].abs() + v[e.j].abs());
        scale[e.i] += s;
        scale[e.j] += s;
    }
    let (interior, _) = ball_partition(grid, &outer);
    for i in interior {
        if op[i] < -SUPERHARMONIC_TOL * scale[i] {
            return Err(Error::NotSuperharmonic { node: i, residual: op[i] });
        }
    }
    let pow = field.map(|x| x.powf(s_exp))?;
    let lhs = pow.ball_mean(params, Weight::Energy, ball)?.powf(1.0 / s_exp);
    let inner = grid.nodes_in_ball(&ball.scaled(0.5)?);
    if inner.is_empty() {
        return Err(Error::EmptyBall);
    }
    let rhs = inner.iter().fold(f64::INFINITY, |m, &i| m.min(v[i]));
    let mut sample = RatioSample::new(field.name(), lhs, rhs);
    if rhs == 0.0 {
        sample.ratio = f64::INFINITY;
    }
    Ok(sample)
}

/// `int_{B_rho} |grad u|^2 dmu_a` per radius.
pub fn energy_decay_profile(
    params: &WeightParams,
    field: &DiscreteField,
    center: &[f64],
    radii: &[f64],
) -> Result<GrowthProfile> {
    gradient_profile(params, field, center, radii)
}

/// Product cutoff vanishing on the grid boundary, equal to 1 at the middle.
fn cutoff(grid: &Grid, x: &[f64]) -> f64 {
    match grid {
        Grid::Radial(g) => {
            let r = x[0];
            if g.r_min() > 0.0 {
                4.0 * (r - g.r_min()) * (g.r_max() - r) / (g.r_max() - g.r_min()).powi(2)
            } else {
                1.0 - (r / g.r_max()).powi(2)
            }
        }
        Grid::Box(g) => (0..3)
            .map(|k| {
                let (lo, hi) = (g.lower()[k], g.upper()[k]);
                4.0 * (x[k] - lo) * (hi - x[k]) / ((hi - lo) * (hi - lo))
            })
            .product(),
    }
}

/// Middle and half-width of the grid domain, per axis.
fn frame(grid: &Grid) -> (Vec<f64>, f64) {
    match grid {
        Grid::Radial(g) => (vec![0.0; g.dim()], g.r_max()),
        Grid::Box(g) => {
            let mid = (0..3).map(|k| 0.5 * (g.lower()[k] + g.upper()[k])).collect();
            let half = (0..3).map(|k| 0.5 * (g.upper()[k] - g.lower()[k])).fold(f64::INFINITY, f64::min);
            (mid, half)
        }
    }
}

#[derive(Debug, Clone)]
enum Family {
    Poly { c0: f64, lin: [f64; 3], quad: [f64; 3] },
    Bump { center: [f64; 3], radius: f64, power: i32 },
    Power { beta: f64 },
    Fourier { modes: Vec<([f64; 3], f64, f64)> },
    Gaussian { center: [f64; 3], width: f64, power: i32 },
}

impl Family {
    fn label(&self) -> &'static str {
        match self {
            Family::Poly { .. } => "poly",
            Family::Bump { .. } => "bump",
            Family::Power { .. } => "power",
            Family::Fourier { .. } => "fourier",
            Family::Gaussian { .. } => "gauss",
        }
    }

    /// Value at the frame coordinates `y = (x - mid) / half`, before the cutoff.
    fn eval(&self, y: &[f64], r_abs: f64) -> f64 {
        let y3 = [y[0], *y.get(1).unwrap_or(&0.0), *y.get(2).unwrap_or(&0.0)];
        match self {
            Family::Poly { c0, lin, quad } => {
                c0 + (0..3).map(|k| lin[k] * y3[k] + quad[k] * y3[k] * y3[(k + 1) % 3]).sum::<f64>()
            }
            Family::Bump { center, radius, power } => {
                let d2: f64 = (0..3).map(|k| (y3[k] - center[k]).powi(2)).sum();
                (1.0 - d2 / (radius * radius)).max(0.0).powi(*power)
            }
            Family::Power { beta } => r_abs.powf(*beta),
            Family::Fourier { modes } => modes
                .iter()
                .map(|(w, phase, amp)| amp * ((0..3).map(|k| w[k] * y3[k]).sum::<f64>() + phase).sin())
                .sum(),
            Family::Gaussian { center, width, power } => {
                let d2: f64 = (0..3).map(|k| (y3[k] - center[k]).powi(2)).sum();
                (-d2 / (width * width)).exp().powi(*power)
            }
        }
    }
}

fn draw_family(i: usize, params: &WeightParams, rng: &mut ChaCha8Rng) -> Family {
    let v3 = |rng: &mut ChaCha8Rng, s: f64| [rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s)];
    match i % 5 {
        0 => Family::Poly { c0: rng.gen_range(0.5..1.5), lin: v3(rng, 1.0), quad: v3(rng, 1.0) },
        1 => Family::Bump { center: v3(rng, 0.3), radius: rng.gen_range(0.4..0.7), power: rng.gen_range(2..4) },
        2 => {
            let lo = (params.a() - 0.5).max(0.0) + 0.2;
            Family::Power { beta: rng.gen_range(lo..lo + 1.3) }
        }
        3 => {
            let k = rng.gen_range(1..5);
            let modes = (0..k)
                .map(|_| (v3(rng, 3.0), rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(-1.0..1.0)))
                .collect();
            Family::Fourier { modes }
        }
        _ => Family::Gaussian { center: v3(rng, 0.4), width: rng.gen_range(0.3..0.8), power: rng.gen_range(1..4) },
    }
}

/// Seeded test fields: polynomials, compact bumps, powers of `|x|`,
/// trigonometric sums and Gaussians, each multiplied by a cutoff vanishing
/// on the grid boundary. The draws depend only on the seed, the count and
/// `params.a()`, so the same suite can be sampled on refined grids.
pub fn test_field_suite(params: &WeightParams, grid: &std::sync::Arc<Grid>, seed: u64, count: usize) -> Result<Vec<DiscreteField>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let families: Vec<Family> = (0..count).map(|i| draw_family(i, params, &mut rng)).collect();
    let (mid, half) = frame(grid);
    families
        .par_iter()
        .enumerate()
        .map(|(i, fam)| {
            let name = format!("{}_{:02}", fam.label(), i);
            let g = grid.clone();
            let values: Vec<f64> = (0..g.n_nodes())
                .map(|j| {
                    if g.is_boundary(j) {
                        return 0.0;
                    }
                    let x = g.point(j);
                    let y: Vec<f64> = x.iter().zip(&mid).map(|(a, m)| (a - m) / half).collect();
                    fam.eval(&y, g.node_radius(j)) * cutoff(&g, &x)
                })
                .collect();
            DiscreteField::new(g, values, name)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub ckn: RatioSample,
    pub poincare: RatioSample,
}

/// Runs the weighted Sobolev and Poincaré quotients over the seeded suite;
/// the Poincaré ball is centered in the domain with radius `0.6` of the
/// half-width.
pub fn run_inequality_suite(params: &WeightParams, grid: &std::sync::Arc<Grid>, seed: u64, count: usize) -> Result<Vec<SuiteRow>> {
    let fields = test_field_suite(params, grid, seed, count)?;
    let (mid, half) = frame(grid);
    let ball = BallSpec::new(mid, 0.6 * half)?;
    fields
        .par_iter()
        .map(|f| {
            Ok(SuiteRow { ckn: ckn_ratio(params, f)?, poincare: poincare_ratio(params, f, &ball)? })
        })
        .collect()
}

/// Largest finite ratios over a suite: `(ckn, poincare)`.
pub fn suite_max(rows: &[SuiteRow]) -> (f64, f64) {
    let m = |f: &dyn Fn(&SuiteRow) -> f64| rows.iter().map(f).filter(|v| v.is_finite()).fold(0.0, f64::max);
    (m(&|r| r.ckn.ratio), m(&|r| r.poincare.ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Spacing;
    use crate::params::Integrability;
    use crate::solver::{harmonic_replacement, SolverSettings};

    fn params(a: f64, b: f64) -> WeightParams {
        WeightParams::validate(3, a, b, Integrability::Infinite).unwrap()
    }

    #[test]
    fn ratio_sample_degenerate_cases() {
        assert_eq!(RatioSample::new("z", 0.0, 0.0).ratio, 0.0);
        assert_eq!(RatioSample::new("z", 1.0, 0.0).ratio, f64::INFINITY);
        assert_eq!(RatioSample::new("z", 1.0, 4.0).ratio, 0.25);
    }

    #[test]
    fn ckn_ratio_homogeneous_and_matches_radial_quadrature() {
        let p = params(0.0, 0.0);
        let g = Grid::radial(3, 0.0, 1.0, 2048, Spacing::Uniform).unwrap();
        let u = DiscreteField::sample_radial(g, "bump", |r| 1.0 - r * r).unwrap();
        let a = ckn_ratio(&p, &u).unwrap();
        let b = ckn_ratio(&p, &u.scaled(-3.5).unwrap()).unwrap();
        assert!((a.ratio / b.ratio - 1.0).abs() < 1e-12);
        let exact = ckn_ratio_radial(&p, |r| 1.0 - r * r, |r| -2.0 * r, 1.0).unwrap();
        assert!((a.ratio / exact.ratio - 1.0).abs() < 0.01, "{} {}", a.ratio, exact.ratio);
        assert!(matches!(ckn_ratio(&p, &u.scaled(0.0).unwrap()), Err(Error::ZeroField)));
        let shifted = u.map(|v| v + 1.0).unwrap();
        assert!(matches!(ckn_ratio(&p, &shifted), Err(Error::NotCompactlySupported)));
    }

    #[test]
    fn radial_ckn_ratio_is_dilation_invariant() {
        for (a, b) in [(0.0, 0.0), (0.3, 0.4), (-0.5, -0.2)] {
            let p = params(a, b);
            let base = ckn_ratio_radial(&p, |r| (1.0 - r * r).powi(2), |r| -4.0 * r * (1.0 - r * r), 1.0).unwrap();
            for lambda in [0.5f64, 2.0, 7.0] {
                let c = lambda.powf(p.dilation_exponent());
                let d = ckn_ratio_radial(
                    &p,
                    |r| c * (1.0 - (lambda * r).powi(2)).powi(2),
                    |r| c * lambda * -4.0 * lambda * r * (1.0 - (lambda * r).powi(2)),
                    1.0 / lambda,
                )
                .unwrap();
                assert!((d.ratio / base.ratio - 1.0).abs() < 1e-6);
                assert!((d.lhs / base.lhs - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn poincare_examples() {
        let p = params(0.0, 0.0);
        let g = Grid::cube(1.0, 40).unwrap();
        let ball = BallSpec::new(vec![0.0; 3], 0.8).unwrap();
        let c = DiscreteField::constant(g.clone(), 4.0).unwrap();
        let s = poincare_ratio(&p, &c, &ball).unwrap();
        assert!(s.lhs.abs() < 1e-20 && s.ratio.abs() < 1e-20);
        let u = DiscreteField::sample(g.clone(), "x1", |x| x[0]).unwrap();
        let r = poincare_ratio(&p, &u, &ball).unwrap();
        assert!((r.ratio - 0.2).abs() < 0.2 * 0.03, "{}", r.ratio);
        let shifted = poincare_ratio(&p, &u.map(|v| v + 10.0).unwrap(), &ball).unwrap();
        assert!((shifted.ratio / r.ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn alpha_h_of_linear_field() {
        let g = Grid::cube(1.0, 32).unwrap();
        let u = DiscreteField::sample(g.clone(), "x1", |x| x[0]).unwrap();
        let h = 1.0 / 16.0;
        let radii: Vec<f64> = [12.0, 8.0, 6.0, 4.0].iter().map(|k| k * h).collect();
        let est = estimate_alpha_h(&u, &[0.0; 3], &radii).unwrap();
        assert!((est.alpha_h - 1.0).abs() < 0.05);
        assert!(est.fit_residual < 1e-12);
        let c = DiscreteField::constant(g, 1.0).unwrap();
        assert!(matches!(estimate_alpha_h(&c, &[0.0; 3], &radii), Err(Error::DegenerateOscillation { .. })));
    }

    #[test]
    fn alpha_h_of_fundamental_solution_away_from_origin() {
        let p = params(0.2, 0.2);
        let e = p.fundamental_exponent();
        let g = Grid::boxed([0.5, -0.5, -0.5], [1.5, 0.5, 0.5], [64; 3]).unwrap();
        let u = DiscreteField::sample_radial(g, "fund", |r| r.powf(e)).unwrap();
        let h = 1.0 / 64.0;
        let radii: Vec<f64> = [16.0, 12.0, 8.0, 6.0].iter().map(|k| k * h).collect();
        let est = estimate_alpha_h(&u, &[1.0, 0.0, 0.0], &radii).unwrap();
        assert!(est.raw_slope > 0.95 && est.raw_slope < 1.1, "{est:?}");
    }

    #[test]
    fn weak_harnack_examples() {
        let p = params(0.1, 0.1);
        let g = Grid::cube(1.0, 24).unwrap();
        let ball = BallSpec::new(vec![0.5, 0.0, 0.0], 0.2).unwrap();
        let c = DiscreteField::constant(g.clone(), 2.0).unwrap();
        let s = weak_harnack_check(&p, &c, &ball, DEFAULT_WEAK_HARNACK_EXPONENT).unwrap();
        assert!((s.ratio - 1.0).abs() < 1e-12);
        // discrete harmonic replacement of the fundamental solution
        let e = p.fundamental_exponent();
        let u = DiscreteField::sample_radial(g.clone(), "fund", |r| r.max(1e-2).powf(e)).unwrap();
        let w = harmonic_replacement(&p, &u, &ball.scaled(2.0).unwrap(), SolverSettings { tol: 1e-13, max_iter: 10_000 })
            .unwrap();
        let s = weak_harnack_check(&p, &w, &ball, 1.0).unwrap();
        assert!(s.ratio.is_finite() && s.ratio > 0.9);
        let mut vals = c.values().to_vec();
        let zero_node = g.nearest_node(&[0.5, 0.0, 0.0]);
        vals[zero_node] = 0.0;
        let dented = c.with_values(vals).unwrap();
        assert!(matches!(weak_harnack_check(&p, &dented, &ball, 1.0), Err(Error::NotSuperharmonic { .. })));
        let neg = c.map(|v| v - 3.0).unwrap();
        assert!(matches!(weak_harnack_check(&p, &neg, &ball, 1.0), Err(Error::NegativeField { .. })));
    }

    #[test]
    fn zero_infimum_gives_infinite_ratio() {
        let p = params(0.0, 0.0);
        let g = Grid::cube(1.0, 16).unwrap();
        let ball = BallSpec::new(vec![0.0; 3], 0.25).unwrap();
        let s = weak_harnack_check(&p, &DiscreteField::zeros(g), &ball, 1.0).unwrap();
        assert_eq!(s.rhs_core, 0.0);
        assert_eq!(s.ratio, f64::INFINITY);
    }

    #[test]
    fn energy_decay_of_linear_field() {
        let p = params(0.0, 0.0);
        let g = Grid::cube(1.0, 32).unwrap();
        let u = DiscreteField::sample(g, "x1", |x| x[0]).unwrap();
        let prof = energy_decay_profile(&p, &u, &[0.0; 3], &[0.8, 0.4, 0.2]).unwrap();
        let slope = (prof.values[0] / prof.values[2]).ln() / 4f64.ln();
        assert!((slope - 3.0).abs() < 0.1);
        assert!(prof.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn suite_is_seeded_and_compactly_supported() {
        let p = params(0.3, 0.4);
        let g = Grid::cube(1.0, 12).unwrap();
        let a = test_field_suite(&p, &g, 5, 10).unwrap();
        let b = test_field_suite(&p, &g, 5, 10).unwrap();
        assert_eq!(a.len(), 10);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values(), y.values());
            assert_eq!(x.name(), y.name());
        }
        let rows = run_inequality_suite(&p, &g, 5, 10).unwrap();
        let (c, q) = suite_max(&rows);
        assert!(c.is_finite() && c > 0.0 && q.is_finite() && q > 0.0);
    }
}

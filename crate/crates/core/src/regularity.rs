//! Campanato and gradient-energy growth profiles, log-log exponent fits,
//! discrete Hölder quotients and the measured-versus-predicted report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::grid::{Grid, Region};
use crate::measure::{ball_measure, BallSpec};
use crate::params::{LimitingBranch, Weight, WeightParams};
use crate::solver::residual;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Campanato,
    GradientEnergy,
}

impl ProfileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::Campanato => "campanato",
            ProfileKind::GradientEnergy => "gradient_energy",
        }
    }
}

/// One value per radius, radii strictly decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthProfile {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: ProfileKind,
}

impl GrowthProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,value\n");
        for (r, v) in self.radii.iter().zip(&self.values) {
            out.push_str(&format!("{r:.16e},{v:.16e}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Raw,
    MeasureNormalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Slope of the fitted log-log line.
    pub exponent: f64,
    /// Intercept of the fitted line.
    pub log_constant: f64,
    pub rms_residual: f64,
    /// Hölder readout; only for measure-normalized fits, clamped to 1.
    pub alpha: Option<f64>,
    /// Readout before clamping.
    pub alpha_unclamped: Option<f64>,
    pub dropped_leading: usize,
    pub warning: Option<String>,
}

/// Least-squares line through `(x, y)`: `(slope, intercept, rms)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientPoints(x.len().min(y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    Ok((slope, icpt, rms))
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("radii must be positive and strictly decreasing".into()));
    }
    Ok(())
}

fn balls(field: &DiscreteField, center: &[f64], radii: &[f64]) -> Result<Vec<BallSpec>> {
    check_radii(radii)?;
    radii
        .iter()
        .map(|&r| {
            let b = BallSpec::new(center.to_vec(), r)?;
            field.grid().require_ball(&b)?;
            Ok(b)
        })
        .collect()
}

/// `int_{B_r} |u - mean|^2 dmu_a` for each radius.
pub fn campanato_profile(params: &WeightParams, field: &DiscreteField, center: &[f64], radii: &[f64]) -> Result<GrowthProfile> {
    let values = balls(field, center, radii)?
        .iter()
        .map(|b| {
            let m = field.ball_mean(params, Weight::Energy, b)?;
            field.integrate_with(params, Weight::Energy, Region::Ball(b), |v| (v - m) * (v - m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GrowthProfile { center: center.to_vec(), radii: radii.to_vec(), values, kind: ProfileKind::Campanato })
}

/// `int_{B_r} |grad u|^2 dmu_a` for each radius.
pub fn gradient_profile(params: &WeightParams, field: &DiscreteField, center: &[f64], radii: &[f64]) -> Result<GrowthProfile> {
    let values = balls(field, center, radii)?
        .iter()
        .map(|b| field.energy_in(params, Region::Ball(b)))
        .collect::<Result<Vec<_>>>()?;
    Ok(GrowthProfile { center: center.to_vec(), radii: radii.to_vec(), values, kind: ProfileKind::GradientEnergy })
}

/// Fits `log value` against `log r`. Zero values at the start of the
/// profile are dropped; a zero elsewhere is an error.
pub fn fit_growth(params: &WeightParams, profile: &GrowthProfile, normalization: Normalization) -> Result<FitResult> {
    check_radii(&profile.radii)?;
    let dropped = profile.values.iter().take_while(|v| **v <= 0.0).count();
    let radii = &profile.radii[dropped..];
    let values = &profile.values[dropped..];
    if radii.len() < 3 {
        return Err(Error::InsufficientPoints(radii.len()));
    }
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput("profile has a zero or nonfinite value after its leading entries".into()));
    }
    let mut ys = Vec::with_capacity(values.len());
    for (&r, &v) in radii.iter().zip(values) {
        let y = match normalization {
            Normalization::Raw => v.ln(),
            Normalization::MeasureNormalized => {
                let mu = ball_measure(params, &BallSpec::new(profile.center.clone(), r)?, 1e-10)?.value;
                v.ln() - mu.ln()
            }
        };
        ys.push(y);
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let (slope, icpt, rms) = least_squares(&xs, &ys)?;
    let alpha_unclamped = match normalization {
        Normalization::Raw => None,
        Normalization::MeasureNormalized => Some(match profile.kind {
            ProfileKind::Campanato => slope / 2.0,
            ProfileKind::GradientEnergy => (slope + 2.0) / 2.0,
        }),
    };
    let mut warning = None;
    let alpha = alpha_unclamped.map(|a| {
        if a > 1.0 {
            warning = Some(format!("fitted exponent {a:.4} exceeds 1; used as 1"));
            1.0
        } else {
            a
        }
    });
    Ok(FitResult {
        exponent: slope,
        log_constant: icpt,
        rms_residual: rms,
        alpha,
        alpha_unclamped,
        dropped_leading: dropped,
        warning,
    })
}

/// Geometric radii with ratio 1/2 from half the distance to the boundary
/// down to eight cell widths.
pub fn default_radii(grid: &Grid, center: &[f64]) -> Vec<f64> {
    let dist = boundary_distance(grid, center);
    let floor = 8.0 * grid.cell_width();
    let mut out = Vec::new();
    let mut r = dist / 2.0;
    while r >= floor * (1.0 - 1e-12) && out.len() < 64 {
        out.push(r);
        r /= 2.0;
    }
    out
}

fn boundary_distance(grid: &Grid, center: &[f64]) -> f64 {
    match grid {
        Grid::Radial(g) => {
            let d = center.iter().map(|c| c * c).sum::<f64>().sqrt();
            if g.r_min() > 0.0 {
                (g.r_max() - d).min(d - g.r_min())
            } else {
                g.r_max() - d
            }
        }
        Grid::Box(g) => (0..3)
            .map(|k| (center[k] - g.lower()[k]).min(g.upper()[k] - center[k]))
            .fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderQuotient {
    pub seminorm: f64,
    pub sup_norm: f64,
    pub argmax: Option<(usize, usize)>,
    pub pairs: usize,
}

/// All pairs up to this many nodes; beyond it a seeded sample.
pub const EXHAUSTIVE_PAIR_NODES: usize = 2000;
pub const SAMPLED_PAIRS: usize = 2_000_000;

/// `max |u(x) - u(y)| / |x - y|^alpha` over node pairs at distance at least
/// `margin` from the boundary, with the sup norm over the same nodes.
pub fn holder_quotient(field: &DiscreteField, margin: f64, alpha: f64, seed: u64) -> Result<HolderQuotient> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidInput(format!("Hölder exponent {alpha} outside (0, 1]")));
    }
    if !(margin > 0.0) {
        return Err(Error::InvalidInput(format!("margin {margin} must be positive")));
    }
    let grid = field.grid();
    let nodes = grid.nodes_in_inset(margin);
    if nodes.is_empty() {
        return Err(Error::EmptySubdomain(margin));
    }
    let pts: Vec<Vec<f64>> = nodes.iter().map(|&i| grid.point(i)).collect();
    let vals: Vec<f64> = nodes.iter().map(|&i| field.values()[i]).collect();
    let sup_norm = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut best = (0.0f64, None);
    let consider = |a: usize, b: usize, best: &mut (f64, Option<(usize, usize)>)| {
        let d = pts[a].iter().zip(&pts[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        if d > 0.0 {
            let q = (vals[a] - vals[b]).abs() / d.powf(alpha);
            if q > best.0 {
                *best = (q, Some((nodes[a], nodes[b])));
            }
        }
    };
    let m = nodes.len();
    let pairs = if m <= EXHAUSTIVE_PAIR_NODES {
        for a in 0..m {
            for b in a + 1..m {
                consider(a, b, &mut best);
            }
        }
        m * (m - 1) / 2
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..SAMPLED_PAIRS {
            let a = rng.gen_range(0..m);
            let b = rng.gen_range(0..m);
            consider(a, b, &mut best);
        }
        SAMPLED_PAIRS
    };
    Ok(HolderQuotient { seminorm: best.0, sup_norm, argmax: best.1, pairs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularitySettings {
    pub slack: f64,
    pub margin: f64,
    pub seed: u64,
    /// Largest accepted free-row residual relative to the load.
    pub residual_tol: f64,
}

impl Default for RegularitySettings {
    fn default() -> Self {
        Self { slack: 0.1, margin: 0.1, seed: 0, residual_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub alpha_measured: f64,
    pub alpha_predicted_sup: f64,
    pub limiting_branch: LimitingBranch,
    pub holder_seminorm: f64,
    pub sup_norm: f64,
    pub pass: bool,
    pub fit: FitResult,
    pub profile: GrowthProfile,
    pub relative_residual: f64,
}

impl RegularityReport {
    /// Structured text with a fixed key order.
    pub fn to_text(&self) -> String {
        format!(
            "alpha_measured = {:.6}\nalpha_predicted_sup = {:.6}\nlimiting_branch = {}\nholder_seminorm = {:.6e}\nsup_norm = {:.6e}\npass = {}\n",
            self.alpha_measured,
            self.alpha_predicted_sup,
            self.limiting_branch.as_str(),
            self.holder_seminorm,
            self.sup_norm,
            self.pass
        )
    }
}

/// Measures the gradient-energy growth exponent of a discrete solution and
/// compares it with the predicted upper bound.
pub fn regularity_report(
    params: &WeightParams,
    u: &DiscreteField,
    f: &DiscreteField,
    center: &[f64],
    radii: &[f64],
    alpha_h: f64,
    settings: RegularitySettings,
) -> Result<RegularityReport> {
    let res = residual(params, u, f)?;
    let load = f.grid().node_weights(params.weight_exponent(Weight::Critical))?;
    let fixed = f.grid().boundary_mask();
    let scale = f
        .values()
        .iter()
        .zip(load.iter())
        .zip(&fixed)
        .filter(|(_, &b)| !b)
        .map(|((v, w), _)| (v * w).powi(2))
        .sum::<f64>()
        .sqrt();
    let rnorm = res.nodal.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let relative_residual = if scale > 0.0 { rnorm / scale } else { rnorm };
    if relative_residual > settings.residual_tol {
        return Err(Error::ResidualTooLarge { residual: relative_residual, tol: settings.residual_tol });
    }
    let bound = params.holder_bound(alpha_h)?;
    let profile = gradient_profile(params, u, center, radii)?;
    let fit = fit_growth(params, &profile, Normalization::MeasureNormalized)?;
    let alpha_measured = fit.alpha.expect("measure-normalized fit has a readout");
    let pass = alpha_measured >= bound.alpha_sup - settings.slack;
    let q_alpha = (alpha_measured.min(bound.alpha_sup) * 0.95).clamp(1e-6, 1.0);
    let hq = holder_quotient(u, settings.margin, q_alpha, settings.seed)?;
    Ok(RegularityReport {
        alpha_measured,
        alpha_predicted_sup: bound.alpha_sup,
        limiting_branch: bound.limiting_branch,
        holder_seminorm: hq.seminorm,
        sup_norm: hq.sup_norm,
        pass,
        fit,
        profile,
        relative_residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanValueProbe {
    pub node: usize,
    /// Slope of `log |mean_{x,r} - u(x)|` against `log r`; `None` when the
    /// differences vanish.
    pub rate: Option<f64>,
}

/// Decay rate of `|u_{x,r} - u(x)|` at `count` seeded probe nodes whose
/// balls of the largest radius fit in the grid.
pub fn mean_value_convergence(
    params: &WeightParams,
    field: &DiscreteField,
    radii: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<MeanValueProbe>> {
    check_radii(radii)?;
    let grid = field.grid();
    let candidates = grid.nodes_in_inset(radii[0] * (1.0 + 1e-9));
    if candidates.is_empty() {
        return Err(Error::EmptySubdomain(radii[0]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let node = candidates[rng.gen_range(0..candidates.len())];
        let x = grid.point(node);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &r in radii {
            let ball = BallSpec::new(x.clone(), r)?;
            let d = (field.ball_mean(params, Weight::Energy, &ball)? - field.values()[node]).abs();
            if d > 0.0 {
                xs.push(r.ln());
                ys.push(d.ln());
            }
        }
        let rate = if xs.len() >= 2 { Some(least_squares(&xs, &ys)?.0) } else { None };
        out.push(MeanValueProbe { node, rate });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Spacing;
    use crate::params::Integrability;
    use crate::quadrature::sphere_area;

    fn params(a: f64, b: f64) -> WeightParams {
        WeightParams::validate(3, a, b, Integrability::Infinite).unwrap()
    }

    #[test]
    fn least_squares_recovers_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (s, c, rms) = least_squares(&x, &y).unwrap();
        assert!((s - 2.5).abs() < 1e-14 && (c + 1.0).abs() < 1e-14 && rms < 1e-14);
    }

    #[test]
    fn linear_field_profiles() {
        let p = params(0.0, 0.0);
        let g = Grid::cube(1.0, 48).unwrap();
        let u = DiscreteField::sample(g.clone(), "x1", |x| x[0]).unwrap();
        let radii = [0.8, 0.6, 0.45, 0.3];
        let camp = campanato_profile(&p, &u, &[0.0; 3], &radii).unwrap();
        for (r, v) in radii.iter().zip(&camp.values) {
            let exact = 4.0 / 3.0 * std::f64::consts::PI * r.powi(5) / 5.0;
            assert!((v / exact - 1.0).abs() < 0.03, "{r} {v} {exact}");
        }
        let fc = fit_growth(&p, &camp, Normalization::MeasureNormalized).unwrap();
        assert!((fc.alpha.unwrap() - 1.0).abs() < 0.03);
        let grad = gradient_profile(&p, &u, &[0.0; 3], &radii).unwrap();
        let fg = fit_growth(&p, &grad, Normalization::MeasureNormalized).unwrap();
        assert!((fg.alpha_unclamped.unwrap() - 1.0).abs() < 0.03);
        let raw = fit_growth(&p, &grad, Normalization::Raw).unwrap();
        assert!((raw.exponent - 3.0).abs() < 0.05);
        assert!(grad.values.windows(2).all(|w| w[0] >= w[1]));
        let c = DiscreteField::constant(g, 2.0).unwrap();
        let cp = campanato_profile(&p, &c, &[0.0; 3], &radii).unwrap();
        assert!(cp.values.iter().all(|v| v.abs() < 1e-24));
    }

    #[test]
    fn synthetic_profile_is_clamped() {
        let p = params(0.2, 0.3);
        let radii: Vec<f64> = vec![1.0, 0.5, 0.25, 0.125];
        let mu1 = ball_measure(&p, &BallSpec::centered(3, 1.0).unwrap(), 1e-12).unwrap().value;
        let values = radii
            .iter()
            .map(|&r| r.powf(2.6) * ball_measure(&p, &BallSpec::centered(3, r).unwrap(), 1e-12).unwrap().value / mu1)
            .collect();
        let prof = GrowthProfile { center: vec![0.0; 3], radii, values, kind: ProfileKind::Campanato };
        let fit = fit_growth(&p, &prof, Normalization::MeasureNormalized).unwrap();
        assert!((fit.alpha_unclamped.unwrap() - 1.3).abs() < 1e-10);
        assert_eq!(fit.alpha, Some(1.0));
        assert!(fit.warning.is_some());
    }

    #[test]
    fn leading_zeros_are_dropped() {
        let p = params(0.0, 0.0);
        let prof = GrowthProfile {
            center: vec![0.0; 3],
            radii: vec![1.0, 0.5, 0.25, 0.125, 0.0625],
            values: vec![0.0, 1.0, 0.25, 0.0625, 0.015625],
            kind: ProfileKind::GradientEnergy,
        };
        let fit = fit_growth(&p, &prof, Normalization::Raw).unwrap();
        assert_eq!(fit.dropped_leading, 1);
        assert!((fit.exponent - 2.0).abs() < 1e-12);
        let short = GrowthProfile { radii: vec![1.0, 0.5], values: vec![1.0, 0.5], ..prof };
        assert!(matches!(fit_growth(&p, &short, Normalization::Raw), Err(Error::InsufficientPoints(2))));
    }

    #[test]
    fn gradient_profile_matches_radial_oracle() {
        // u = (1 - r^2)/6: |u'|^2 = r^2/9, int_{B_rho} = 4 pi rho^5 / 45
        let p = params(0.0, 0.0);
        let g = Grid::radial(3, 0.0, 1.0, 512, Spacing::Uniform).unwrap();
        let u = DiscreteField::sample_radial(g, "u", |r| (1.0 - r * r) / 6.0).unwrap();
        let radii = [0.9, 0.5, 0.25];
        let prof = gradient_profile(&p, &u, &[0.0; 3], &radii).unwrap();
        for (r, v) in radii.iter().zip(&prof.values) {
            let exact = sphere_area(3) * r.powi(5) / 45.0;
            assert!((v / exact - 1.0).abs() < 0.01, "{r} {v} {exact}");
        }
    }

    #[test]
    fn holder_quotient_examples() {
        let g = Grid::cube(1.0, 8).unwrap();
        let c = DiscreteField::constant(g.clone(), 3.0).unwrap();
        assert_eq!(holder_quotient(&c, 0.1, 0.5, 1).unwrap().seminorm, 0.0);
        let u = DiscreteField::sample(g.clone(), "x1", |x| x[0]).unwrap();
        let q = holder_quotient(&u, 0.1, 1.0, 1).unwrap();
        assert!((q.seminorm - 1.0).abs() < 1e-12);
        assert!(matches!(holder_quotient(&u, 1.5, 1.0, 1), Err(Error::EmptySubdomain(_))));
        // radial samples of sqrt(r); the quotient through 0 equals 1
        let rg = Grid::radial(3, 0.0, 1.0, 200, Spacing::Uniform).unwrap();
        let s = DiscreteField::sample_radial(rg, "sqrt", f64::sqrt).unwrap();
        let q = holder_quotient(&s, 0.05, 0.5, 1).unwrap();
        assert!(q.seminorm <= 1.0 + 1e-12);
        assert!((q.seminorm - 1.0).abs() < 1e-12);
        assert_eq!(q.argmax.map(|(i, j)| i.min(j)), Some(0));
    }

    #[test]
    fn sampled_pairs_are_seeded() {
        let g = Grid::cube(1.0, 16).unwrap();
        let u = DiscreteField::sample(g, "u", |x| (x[0] * 3.0).sin() * x[1]).unwrap();
        let a = holder_quotient(&u, 0.01, 0.7, 9).unwrap();
        let b = holder_quotient(&u, 0.01, 0.7, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pairs, SAMPLED_PAIRS);
    }

    #[test]
    fn default_radii_ladder() {
        let g = Grid::radial(3, 0.0, 1.0, 1024, Spacing::Uniform).unwrap();
        let r = default_radii(&g, &[0.0; 3]);
        assert_eq!(r[0], 0.5);
        assert!(*r.last().unwrap() >= 8.0 / 1024.0);
        assert_eq!(r.len(), 7);
    }
}

//! Smallness of the potential, the integrability ladder for the nonlinear
//! equation, and a property-checked engine for the measure-weighted
//! iteration lemma.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::grid::Region;
use crate::measure::{ball_power_integral, BallSpec};
use crate::params::{Weight, WeightParams};
use crate::solver::{residual, weak_operator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSplit {
    pub ell: f64,
    pub tail_mass: f64,
    pub bound_required: f64,
    pub satisfied: bool,
}

/// Right side of the smallness condition with a single empirical constant:
/// `(min(1/8, 2/(q+4)) / C^2)^{p/(p-2)}`, where `C` bounds the unsquared
/// weighted Sobolev quotient.
pub fn smallness_bound(params: &WeightParams, ckn_constant: f64, q: f64) -> Result<f64> {
    let p = params.p();
    if p <= 2.0 {
        return Err(Error::DegenerateExponent("smallness needs p > 2".into()));
    }
    if !(ckn_constant > 0.0) {
        return Err(Error::InvalidInput(format!("constant {ckn_constant} must be positive")));
    }
    let m = (1.0 / 8.0f64).min(2.0 / (q + 4.0));
    Ok((m / (ckn_constant * ckn_constant)).powf(p / (p - 2.0)))
}

/// `int_{|V| >= ell} |x|^{-bp} |V|^{p/(p-2)} + int_{outside B_ell(0)} |x|^{-bp} |V|^{p/(p-2)}`.
pub fn smallness_check(params: &WeightParams, v: &DiscreteField, ell: f64, ckn_constant: f64, q: f64) -> Result<PotentialSplit> {
    if !(ell > 0.0) {
        return Err(Error::NonpositiveEll(ell));
    }
    let bound_required = smallness_bound(params, ckn_constant, q)?;
    let p = params.p();
    let power = p / (p - 2.0);
    let e = params.weight_exponent(Weight::Critical);
    let grid = v.grid();
    let whole = grid.node_weights(e)?;
    let near = BallSpec::centered(params.n(), ell)?;
    let mut inside = vec![0.0; whole.len()];
    for (i, w) in grid.node_weights_in(Region::Ball(&near), e)? {
        inside[i] = w;
    }
    let vals = v.values();
    let mut large = 0.0;
    let mut far = 0.0;
    for i in 0..vals.len() {
        let g = vals[i].abs().powf(power);
        if vals[i].abs() >= ell {
            large += whole[i] * g;
        }
        far += (whole[i] - inside[i]).max(0.0) * g;
    }
    let tail_mass = large + far;
    Ok(PotentialSplit { ell, tail_mass, bound_required, satisfied: tail_mass <= bound_required })
}

/// First `ell = 1e-3 * 2^k`, `k < 40`, passing the smallness check.
pub fn find_ell(params: &WeightParams, v: &DiscreteField, ckn_constant: f64, q: f64) -> Result<Option<f64>> {
    for k in 0..40 {
        let ell = 1e-3 * 2f64.powi(k);
        if smallness_check(params, v, ell, ckn_constant, q)?.satisfied {
            return Ok(Some(ell));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderState {
    pub k: usize,
    pub q_k: f64,
    pub norm_q: f64,
    pub subdomain_margin: f64,
    /// Ratio of this norm to the previous one, the observed growth factor.
    pub step_factor: Option<f64>,
    /// `||u||_{q_k} / (||u||_{q_{k-1}}^theta ||u||_{q_{k+1}}^{1-theta})` on
    /// this step's subdomain; at most 1 by Hölder.
    pub interpolation_ratio: Option<f64>,
}

/// Accepted excess of the interpolation ratio over 1.
pub const INTERPOLATION_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderSettings {
    pub k_stop: usize,
    pub margin0: f64,
    /// Largest accepted free-row residual relative to the load.
    pub residual_tol: f64,
}

/// Manufactured coefficient making `u` an exact discrete solution of the
/// nonlinear equation: `K_i = (A u)_i / (W_i |u_i|^{p-2} u_i)`. Boundary
/// nodes copy their nearest interior value along the node order.
pub fn manufactured_coefficient(params: &WeightParams, u: &DiscreteField) -> Result<DiscreteField> {
    let au = weak_operator(params, u)?;
    let w = u.grid().node_weights(params.weight_exponent(Weight::Critical))?;
    let p = params.p();
    let grid = u.grid();
    let mut k: Vec<Option<f64>> = (0..au.len())
        .map(|i| {
            let ui = u.values()[i];
            let denom = w[i] * ui.abs().powf(p - 2.0) * ui;
            (!grid.is_boundary(i) && denom != 0.0).then(|| au[i] / denom)
        })
        .collect();
    let fallback = k.iter().flatten().copied().next().ok_or(Error::ZeroField)?;
    let mut last = fallback;
    for slot in k.iter_mut() {
        match slot {
            Some(v) => last = *v,
            None => *slot = Some(last),
        }
    }
    DiscreteField::new(grid.clone(), k.into_iter().map(|v| v.unwrap()).collect(), "coefficient")
}

/// Weighted `L^{q_k}` norms of a discrete solution of the nonlinear equation
/// over nested subdomains, `q_k = p^{k+1}/2^k`.
pub fn run_ladder(params: &WeightParams, u: &DiscreteField, coefficient: &DiscreteField, settings: LadderSettings) -> Result<Vec<LadderState>> {
    let p = params.p();
    let k0 = params.k0_threshold()?;
    if settings.k_stop < k0 {
        return Err(Error::InvalidInput(format!("k_stop {} below the threshold {k0}", settings.k_stop)));
    }
    let rhs = u.zip_with(coefficient, |ui, ki| ki * ui.abs().powf(p - 2.0) * ui)?;
    let res = residual(params, u, &rhs)?;
    let load = u.grid().node_weights(params.weight_exponent(Weight::Critical))?;
    let fixed = u.grid().boundary_mask();
    let scale = (0..fixed.len())
        .filter(|&i| !fixed[i])
        .map(|i| (rhs.values()[i] * load[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    let rnorm = res.nodal.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let rel = if scale > 0.0 { rnorm / scale } else { rnorm };
    if rel > settings.residual_tol {
        return Err(Error::ResidualTooLarge { residual: rel, tol: settings.residual_tol });
    }
    let qs = params.moser_ladder(settings.k_stop + 1);
    let mut out: Vec<LadderState> = Vec::with_capacity(settings.k_stop + 1);
    for k in 0..=settings.k_stop {
        let margin = settings.margin0 * (1 + k) as f64 / (settings.k_stop + 1) as f64;
        let region = Region::Inset(margin);
        let norm = u.lq_norm_in(params, qs[k], region)?;
        if !norm.is_finite() {
            return Err(Error::NormOverflow { k });
        }
        let interpolation_ratio = if k >= 1 {
            let lo = u.lq_norm_in(params, qs[k - 1], region)?;
            let hi = u.lq_norm_in(params, qs[k + 1], region)?;
            if !hi.is_finite() {
                return Err(Error::NormOverflow { k: k + 1 });
            }
            let theta = (1.0 / qs[k] - 1.0 / qs[k + 1]) / (1.0 / qs[k - 1] - 1.0 / qs[k + 1]);
            let bound = lo.powf(theta) * hi.powf(1.0 - theta);
            Some(if bound > 0.0 { norm / bound } else { 0.0 })
        } else {
            None
        };
        let step_factor = out.last().and_then(|prev| (prev.norm_q > 0.0).then(|| norm / prev.norm_q));
        out.push(LadderState { k, q_k: qs[k], norm_q: norm, subdomain_margin: margin, step_factor, interpolation_ratio });
    }
    Ok(out)
}

/// Constants of the iteration lemma for a given doubling bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationEnvelope {
    pub a1: f64,
    pub a2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Largest `mu(B_s) / mu(B_{tau s})` over the scales in use.
    pub doubling: f64,
    pub constant: f64,
}

/// `tau = min(A1^{-1/(gamma-alpha)}, 1/2)`.
pub fn lemma_a2_tau(a1: f64, alpha: f64, gamma: f64) -> f64 {
    a1.powf(-1.0 / (gamma - alpha)).min(0.5)
}

/// `C = max(D, D^3 / (tau (1 - tau^{beta-gamma})))` with `D` the doubling bound.
pub fn lemma_a2_constant(a1: f64, a2: f64, alpha: f64, beta: f64, gamma: f64, doubling: f64) -> Result<IterationEnvelope> {
    if !(alpha > 0.0 && alpha < gamma && gamma < beta) {
        return Err(Error::ExponentOrderViolation(format!("need 0 < alpha < gamma < beta, got {alpha}, {gamma}, {beta}")));
    }
    if !(a1 > 0.0 && a2 > 0.0) {
        return Err(Error::InvalidInput("A1 and A2 must be positive".into()));
    }
    if !(doubling >= 1.0) || !doubling.is_finite() {
        return Err(Error::InvalidInput(format!("doubling bound {doubling} must be finite and at least 1")));
    }
    let tau = lemma_a2_tau(a1, alpha, gamma);
    let tail = doubling.powi(3) / (tau * (1.0 - tau.powf(beta - gamma)));
    Ok(IterationEnvelope { a1, a2, alpha, beta, gamma, tau, doubling, constant: doubling.max(tail) })
}

/// Balls `B_s(center)` in `R^n` measured with `|x|^{-2a}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFamily {
    pub n: usize,
    pub a: f64,
    pub center: Vec<f64>,
}

impl MeasureFamily {
    pub fn measure(&self, s: f64) -> Result<f64> {
        Ok(ball_power_integral(self.n, -2.0 * self.a, &BallSpec::new(self.center.clone(), s)?, 1e-10)?.value)
    }

    pub fn descriptor(&self) -> String {
        let d = self.center.iter().map(|c| c * c).sum::<f64>().sqrt();
        format!("N={} a={:.4} |x0|={:.4}", self.n, self.a, d)
    }
}

/// Decreasing radii `r_max tau^{i/substeps}` with their measures.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleGrid {
    pub radii: Vec<f64>,
    pub measures: Vec<f64>,
    pub substeps: usize,
}

impl ScaleGrid {
    pub fn new(family: &MeasureFamily, r_max: f64, tau: f64, levels: usize, substeps: usize) -> Result<Self> {
        if substeps == 0 || levels == 0 {
            return Err(Error::InvalidInput("scale grid needs levels and substeps".into()));
        }
        let radii: Vec<f64> = (0..=levels * substeps).map(|i| r_max * tau.powf(i as f64 / substeps as f64)).collect();
        let mut measures = radii.iter().map(|&s| family.measure(s)).collect::<Result<Vec<_>>>()?;
        // keep quadrature noise from breaking monotonicity in the radius
        for i in 1..measures.len() {
            measures[i] = measures[i].min(measures[i - 1]);
        }
        Ok(Self { radii, measures, substeps })
    }

    /// Largest ratio between a scale and the one `tau` times smaller.
    pub fn doubling(&self) -> f64 {
        let l = self.substeps;
        (0..self.radii.len().saturating_sub(l))
            .map(|i| self.measures[i] / self.measures[i + l])
            .fold(1.0, f64::max)
    }
}

/// A random envelope instance with its measure family and scales.
#[derive(Debug, Clone)]
pub struct A2Instance {
    pub envelope: IterationEnvelope,
    pub family: MeasureFamily,
    pub scales: ScaleGrid,
}

/// Most `tau`-levels per scale grid; fewer when `tau` is small so the
/// smallest radius stays above `1e-8` of the largest.
pub const A2_LEVELS: usize = 10;
pub const A2_SUBSTEPS: usize = 8;
pub const A2_PAIRS: usize = 64;
pub const A2_REL_TOL: f64 = 1e-12;

impl A2Instance {
    pub fn new(a1: f64, a2: f64, alpha: f64, beta: f64, gamma: f64, family: MeasureFamily, r_max: f64) -> Result<Self> {
        // validates the exponents before any quadrature
        lemma_a2_constant(a1, a2, alpha, beta, gamma, 1.0)?;
        let tau = lemma_a2_tau(a1, alpha, gamma);
        let levels = ((8.0 / -tau.log10()).floor() as usize).clamp(2, A2_LEVELS);
        let scales = ScaleGrid::new(&family, r_max, tau, levels, A2_SUBSTEPS)?;
        let envelope = lemma_a2_constant(a1, a2, alpha, beta, gamma, scales.doubling())?;
        Ok(Self { envelope, family, scales })
    }

    /// Right side of the hypothesis for `rho = radii[i] <= r = radii[j]`.
    fn hypothesis(&self, phi: &[f64], i: usize, j: usize) -> f64 {
        let (s, m) = (&self.scales.radii, &self.scales.measures);
        let e = &self.envelope;
        e.a1 * (m[i] / m[j]) * (s[i] / s[j]).powf(-e.alpha) * phi[j] + e.a2 * m[j] * s[j].powf(-e.beta)
    }

    /// Right side of the conclusion for `rho = radii[i] <= r = radii[j]`.
    pub fn conclusion(&self, phi: &[f64], i: usize, j: usize) -> f64 {
        let (s, m) = (&self.scales.radii, &self.scales.measures);
        let e = &self.envelope;
        e.constant * ((m[i] / m[j]) * (s[i] / s[j]).powf(-e.gamma) * phi[j] + e.a2 * m[i] * s[i].powf(-e.beta))
    }

    /// Nondecreasing profile built from the largest scale down, each value
    /// the tightest cap allowed by the hypothesis against every larger scale
    /// (and against itself when `A1 < 1`), times a random factor that is 1
    /// half of the time.
    pub fn extremal_profile(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let g = self.scales.radii.len();
        let (s, m) = (&self.scales.radii, &self.scales.measures);
        let e = &self.envelope;
        let self_cap = |i: usize| {
            if e.a1 < 1.0 {
                e.a2 * m[i] * s[i].powf(-e.beta) / (1.0 - e.a1)
            } else {
                f64::INFINITY
            }
        };
        let mut phi = vec![0.0; g];
        let start = e.a2 * m[0] * s[0].powf(-e.beta) * 10f64.powf(rng.gen_range(-2.0..2.0));
        phi[0] = start.min(self_cap(0));
        for i in 1..g {
            let mut cap = phi[i - 1].min(self_cap(i));
            for j in 0..i {
                cap = cap.min(self.hypothesis(&phi, i, j));
            }
            let factor = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.3..1.0) };
            phi[i] = cap * factor;
        }
        phi
    }

    /// Largest hypothesis excess `lhs / rhs - 1` over all pairs.
    pub fn hypothesis_excess(&self, phi: &[f64]) -> f64 {
        let g = phi.len();
        let mut worst = f64::NEG_INFINITY;
        for j in 0..g {
            for i in j..g {
                let rhs = self.hypothesis(phi, i, j);
                worst = worst.max(phi[i] / rhs - 1.0);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct A2Trial {
    pub trial: usize,
    pub violations: usize,
    /// Largest `Phi(rho) / conclusion` over the checked pairs.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct A2Report {
    pub trials: Vec<A2Trial>,
    pub violations: usize,
}

impl A2Report {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

/// Builds `n_trials` seeded extremal profiles and checks the conclusion at
/// `A2_PAIRS` random scale pairs each. Trial `t` uses its own stream
/// derived from `seed` and `t`, so results do not depend on scheduling.
pub fn lemma_a2_property_check(instance: &A2Instance, n_trials: usize, seed: u64) -> A2Report {
    let g = instance.scales.radii.len();
    let trials: Vec<A2Trial> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64 + 1);
            let phi = instance.extremal_profile(&mut rng);
            let mut violations = 0;
            let mut worst = 0.0f64;
            for _ in 0..A2_PAIRS {
                let j = rng.gen_range(0..g);
                let i = rng.gen_range(j..g);
                let rhs = instance.conclusion(&phi, i, j);
                if phi[i] > rhs * (1.0 + A2_REL_TOL) {
                    violations += 1;
                }
                if rhs > 0.0 {
                    worst = worst.max(phi[i] / rhs);
                }
            }
            A2Trial { trial: t, violations, worst_ratio: worst }
        })
        .collect();
    let violations = trials.iter().map(|t| t.violations).sum();
    A2Report { trials, violations }
}

/// Seeded random instance: exponents in `(0.1, 4)`, `A1` log-uniform in
/// `[0.5, 50]`, `A2` log-uniform in `[0.01, 100]`, and a weighted measure
/// centered at the origin (even `index`) or off it (odd `index`).
pub fn random_a2_instance(seed: u64, index: usize) -> Result<A2Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1_000_000 + index as u64);
    let mut ex = [rng.gen_range(0.1..4.0), rng.gen_range(0.1..4.0), rng.gen_range(0.1..4.0)];
    ex.sort_by(|x, y| x.partial_cmp(y).unwrap());
    if ex[1] - ex[0] < 0.05 {
        ex[1] = ex[0] + 0.05;
    }
    if ex[2] - ex[1] < 0.05 {
        ex[2] = ex[1] + 0.05;
    }
    let [alpha, gamma, beta] = ex;
    let a1 = 10f64.powf(rng.gen_range(0.5f64.log10()..50f64.log10()));
    let a2 = 10f64.powf(rng.gen_range(-2.0..2.0));
    let n = if rng.gen_bool(0.5) { 3 } else { 4 };
    let a = rng.gen_range(-1.0..(n as f64 - 2.0) / 2.0 - 0.05);
    let r_max = 10f64.powf(rng.gen_range(-1.0..1.0));
    let mut center = vec![0.0; n];
    if index % 2 == 1 {
        center[0] = r_max * rng.gen_range(0.05..2.0);
    }
    A2Instance::new(a1, a2, alpha, beta, gamma, MeasureFamily { n, a, center }, r_max)
}

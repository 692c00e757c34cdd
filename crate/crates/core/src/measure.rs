//! Weighted ball measures, doubling ratios, weighted means and the two-case
//! comparison of critical-weight and energy-weight ball integrals.

use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::params::{Weight, WeightParams};
use crate::quadrature::{gauss, graded_adaptive, power_antiderivative, shell_fraction, sin_power_integral, sphere_area};

/// A closed ball `B_radius(center)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::NonpositiveRadius(radius));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!("ball center {center:?} is not finite")));
        }
        Ok(Self { center, radius })
    }

    /// Ball of the given radius around the origin of `R^n`.
    pub fn centered(n: usize, radius: f64) -> Result<Self> {
        Self::new(vec![0.0; n], radius)
    }

    /// Distance of the center from the origin.
    pub fn center_norm(&self) -> f64 {
        self.center.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let d2: f64 = self.center.iter().zip(x).map(|(c, y)| (c - y).powi(2)).sum();
        d2 <= self.radius * self.radius
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.center.clone(), self.radius * factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureMethod {
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureResult {
    pub value: f64,
    pub method: MeasureMethod,
    pub est_error: f64,
}

fn check_dim(n: usize, ball: &BallSpec) -> Result<()> {
    if ball.center.len() != n {
        return Err(Error::InvalidInput(format!(
            "ball center has {} coordinates, expected {n}",
            ball.center.len()
        )));
    }
    Ok(())
}

/// `int_B |x|^e dx` in `R^n`; closed form for centered balls.
pub fn ball_power_integral(n: usize, e: f64, ball: &BallSpec, tol: f64) -> Result<MeasureResult> {
    check_dim(n, ball)?;
    if ball.center_norm() == 0.0 {
        let k = n as f64 + e;
        if !(k > 0.0) {
            return Err(Error::DegenerateExponent(format!("|x|^{e} is not integrable near 0 in R^{n}")));
        }
        return Ok(MeasureResult {
            value: sphere_area(n) * ball.radius.powf(k) / k,
            method: MeasureMethod::ClosedForm,
            est_error: 0.0,
        });
    }
    if ball.radius <= 0.5 * ball.center_norm() {
        return ball_power_integral_local(n, e, ball, tol);
    }
    ball_power_integral_quadrature(n, e, ball, tol)
}

/// Polar quadrature around the ball center for balls at least their own
/// diameter away from the origin, where the integrand is analytic. Shells
/// around the origin lose digits there once the radius is far below the
/// distance.
pub fn ball_power_integral_local(n: usize, e: f64, ball: &BallSpec, tol: f64) -> Result<MeasureResult> {
    check_dim(n, ball)?;
    let d = ball.center_norm();
    let rho = ball.radius;
    if !(rho <= 0.5 * d) {
        return Err(Error::InvalidInput("local quadrature needs radius at most half the center distance".into()));
    }
    let x = rho / d;
    let norm = sphere_area(n) / sin_power_integral(n - 2, std::f64::consts::PI);
    let eval = |panels: usize| {
        let angular = |t: f64| {
            let s = x * t;
            let g = |phi: f64| (1.0 + 2.0 * s * phi.cos() + s * s).powf(e / 2.0) * phi.sin().powi(n as i32 - 2);
            let w = std::f64::consts::PI / panels as f64;
            let inner: f64 = (0..panels).map(|k| gauss(&g, k as f64 * w, (k + 1) as f64 * w, 10)).sum();
            t.powi(n as i32 - 1) * inner
        };
        let w = 1.0 / panels as f64;
        (0..panels).map(|k| gauss(&angular, k as f64 * w, (k + 1) as f64 * w, 10)).sum::<f64>()
    };
    let coarse = eval(4);
    let fine = eval(8);
    let scale = norm * d.powf(e) * rho.powi(n as i32);
    let value = scale * fine;
    let est_error = scale * (fine - coarse).abs();
    if !(est_error <= tol * value.abs()) {
        return Err(Error::QuadratureNonconvergence { value, est_error });
    }
    Ok(MeasureResult { value, method: MeasureMethod::Quadrature, est_error })
}

/// Shell quadrature of `int_B |x|^e dx`, used for every ball including
/// centered ones (as a check on the closed form).
pub fn ball_power_integral_quadrature(n: usize, e: f64, ball: &BallSpec, tol: f64) -> Result<MeasureResult> {
    check_dim(n, ball)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    let k = n as f64 + e;
    if !(k > 0.0) {
        return Err(Error::DegenerateExponent(format!("|x|^{e} is not integrable near 0 in R^{n}")));
    }
    let d = ball.center_norm();
    let rho = ball.radius;
    let sigma = sphere_area(n);
    // enough halvings that the innermost panel's share is below tol
    let depth = ((-tol.log2()) / k).ceil().clamp(8.0, 200.0) as usize;
    let mut value = 0.0;
    let mut est = 0.0;
    // full shells r < rho - d
    let inner = rho - d;
    if inner > 0.0 {
        // r = inner u^m turns r^{k-1} into u^{mk-1} with mk - 1 >= 1 when k < 1
        let m = if k < 1.0 { (2.0 / k).ceil() } else { 1.0 };
        let f = |u: f64| sigma * m * inner.powf(k) * u.powf(m * k - 1.0);
        let (v, err) = graded_adaptive(&f, 0.0, 1.0, true, d > 0.0, depth, tol)?;
        value += v;
        est += err;
    }
    if d > 0.0 {
        let lo = (d - rho).abs();
        let hi = d + rho;
        let (v, err) = if k < 1.0 {
            // t = r^k absorbs the singular factor r^{k-1}
            let f = |t: f64| sigma / k * shell_fraction(n, t.powf(1.0 / k), d, rho);
            graded_adaptive(&f, lo.powf(k), hi.powf(k), true, true, depth.max(12), tol)?
        } else {
            let f = |r: f64| sigma * r.powf(k - 1.0) * shell_fraction(n, r, d, rho);
            graded_adaptive(&f, lo, hi, true, true, depth.max(12), tol)?
        };
        value += v;
        est += err;
    }
    if !(value > 0.0) {
        return Err(Error::QuadratureNonconvergence { value, est_error: est });
    }
    Ok(MeasureResult { value, method: MeasureMethod::Quadrature, est_error: est })
}

/// `mu_a(B) = int_B |x|^{-2a} dx`.
pub fn ball_measure(params: &WeightParams, ball: &BallSpec, tol: f64) -> Result<MeasureResult> {
    ball_power_integral(params.n(), params.weight_exponent(Weight::Energy), ball, tol)
}

/// `int_B |x|^{-2a}` or `int_B |x|^{-bp}`.
pub fn ball_weight_integral(params: &WeightParams, weight: Weight, ball: &BallSpec, tol: f64) -> Result<MeasureResult> {
    ball_power_integral(params.n(), params.weight_exponent(weight), ball, tol)
}

/// `mu_a(B_r(x)) / mu_a(B_{tau r}(x))`.
pub fn doubling_ratio(params: &WeightParams, center: &[f64], r: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidInput(format!("tau = {tau} must lie in (0, 1)")));
    }
    let big = ball_measure(params, &BallSpec::new(center.to_vec(), r)?, 1e-12)?;
    let small = ball_measure(params, &BallSpec::new(center.to_vec(), tau * r)?, 1e-12)?;
    Ok(big.value / small.value)
}

/// `(1/mu_a(B)) int_B u dmu_a` using the field's own quadrature.
pub fn weighted_mean(params: &WeightParams, field: &DiscreteField, ball: &BallSpec) -> Result<f64> {
    field.ball_mean(params, Weight::Energy, ball)
}

/// One sample of the critical-weight versus energy-weight comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaA1Sample {
    pub lhs: f64,
    pub rhs_without_constant: f64,
    pub ratio: f64,
}

/// `lhs = (int_B |x|^{-bp})^{2/p + eps}`,
/// `rhs = rho^{-2 + eps N} max(rho, |x0|)^{-eps bp} int_B |x|^{-2a}`.
pub fn lemma_a1_check(params: &WeightParams, ball: &BallSpec, eps: f64) -> Result<LemmaA1Sample> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    let n = params.n() as f64;
    let rho = ball.radius;
    let crit = ball_weight_integral(params, Weight::Critical, ball, 1e-12)?.value;
    let energy = ball_weight_integral(params, Weight::Energy, ball, 1e-12)?.value;
    let lhs = crit.powf(2.0 / params.p() + eps);
    let rhs = rho.powf(-2.0 + eps * n) * rho.max(ball.center_norm()).powf(-eps * params.bp()) * energy;
    Ok(LemmaA1Sample { lhs, rhs_without_constant: rhs, ratio: lhs / rhs })
}

/// Analytic bound on [`lemma_a1_check`] ratios for balls with `|x0| = t rho`.
///
/// The ratio is invariant under `x -> lambda x`, so it depends on `t` only.
/// For `t <= 2` the critical integral is bounded by the centered ball of
/// radius `t + 1`; the energy integral is bounded below by the weight's
/// minimum on the ball when `a >= 0`, and on the quarter-radius sub-ball
/// farthest from the origin when `a < 0`. For `t > 2` both weights are bounded by
/// their extremes over the shell `t - 1 <= |x| <= t + 1`.
pub fn lemma_a1_envelope(params: &WeightParams, eps: f64, t: f64) -> f64 {
    let n = params.n() as f64;
    let a = params.a();
    let bp = params.bp();
    let kappa = 2.0 / params.p() + eps;
    let sigma = sphere_area(params.n());
    let vol = sigma / n;
    if t <= 2.0 {
        let crit_upper = sigma * (t + 1.0).powf(n - bp) / (n - bp);
        let energy_lower = if a >= 0.0 {
            vol * (t + 1.0).powf(-2.0 * a)
        } else {
            // sub-ball of radius 1/4 pushed away from the origin: |x| >= t + 1/2 on it
            vol * 0.25f64.powf(n) * (t + 0.5).powf(-2.0 * a)
        };
        crit_upper.powf(kappa) / (t.max(1.0).powf(-eps * bp) * energy_lower)
    } else {
        let lo = t - 1.0;
        let hi = t + 1.0;
        let crit_max = lo.powf(-bp).max(hi.powf(-bp));
        let energy_min = lo.powf(-2.0 * a).min(hi.powf(-2.0 * a));
        (vol * crit_max).powf(kappa) / (t.powf(-eps * bp) * vol * energy_min)
    }
}

/// Exact `int_{[lo,hi]} sigma r^{n-1+e} dr` for the radial grid.
pub(crate) fn shell_power_integral(n: usize, e: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    sphere_area(n) * power_antiderivative(lo, hi, n as f64 - 1.0 + e)
}

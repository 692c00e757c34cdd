//! One-dimensional Gauss rules, graded composite integration and the
//! geometric pieces (sphere areas, spherical caps, boxes) needed to integrate
//! radial power weights.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static G2: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static G3: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static G8: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static G10: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match n {
        2 => G2.get_or_init(|| gauss_legendre(2)),
        3 => G3.get_or_init(|| gauss_legendre(3)),
        8 => G8.get_or_init(|| gauss_legendre(8)),
        10 => G10.get_or_init(|| gauss_legendre(10)),
        _ => panic!("no cached Gauss rule with {n} points"),
    }
}

/// Fixed Gauss rule of order `n` (2, 3, 8 or 10) on `[lo, hi]`.
pub fn gauss<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, n: usize) -> f64 {
    let (x, w) = rule(n);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        acc += wi * f(mid + half * xi);
    }
    acc * half
}

/// Composite 10-point Gauss rule with panels refined geometrically toward
/// the flagged endpoints. `depth` is the number of halvings toward each
/// graded end and `sub` splits every panel uniformly.
pub fn graded_rule<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    grade_lo: bool,
    grade_hi: bool,
    depth: usize,
    sub: usize,
) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mid = 0.5 * (lo + hi);
    let mut breaks: Vec<f64> = Vec::new();
    // left half: lo + (mid-lo) 2^{-j}
    if grade_lo {
        breaks.push(lo);
        for j in (1..=depth).rev() {
            breaks.push(lo + (mid - lo) * 0.5f64.powi(j as i32));
        }
        breaks.push(mid);
    } else {
        breaks.push(lo);
        breaks.push(mid);
    }
    if grade_hi {
        for j in 1..=depth {
            breaks.push(hi - (hi - mid) * 0.5f64.powi(j as i32));
        }
        breaks.push(hi);
    } else {
        breaks.push(hi);
    }
    let mut acc = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let step = (b - a) / sub as f64;
        for s in 0..sub {
            let pa = a + step * s as f64;
            let pb = if s + 1 == sub { b } else { a + step * (s + 1) as f64 };
            acc += gauss(f, pa, pb, 10);
        }
    }
    acc
}

/// Adaptive version of [`graded_rule`]: raises the refinement level until two
/// consecutive levels agree to `tol` relative. Returns `(value, est_error)`.
pub fn graded_adaptive<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    grade_lo: bool,
    grade_hi: bool,
    base_depth: usize,
    tol: f64,
) -> Result<(f64, f64)> {
    let level = |l: usize| graded_rule(f, lo, hi, grade_lo, grade_hi, base_depth + 8 * l, l + 1);
    let mut prev = level(0);
    let mut err = f64::INFINITY;
    for l in 1..=6 {
        let cur = level(l);
        err = (cur - prev).abs();
        if err <= tol * cur.abs() || err <= f64::MIN_POSITIVE {
            return Ok((cur, err));
        }
        prev = cur;
    }
    Err(Error::QuadratureNonconvergence { value: prev, est_error: err })
}

/// Surface area of the unit sphere in `R^n`: `2 pi^{n/2} / Gamma(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / statrs::function::gamma::gamma(h)
}

/// `int_0^theta sin^m(t) dt`.
pub(crate) fn sin_power_integral(m: usize, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let mut j_prev = theta; // m = 0
    if m == 0 {
        return j_prev;
    }
    let mut j_cur = 1.0 - c; // m = 1
    if m == 1 {
        return j_cur;
    }
    // J_k = -cos sin^{k-1} / k + (k-1)/k J_{k-2}
    let mut spow = s; // sin^{k-1} for k = 2
    let mut k = 2;
    loop {
        let kf = k as f64;
        let j_next = -c * spow / kf + (kf - 1.0) / kf * j_prev;
        if k == m {
            return j_next;
        }
        j_prev = j_cur;
        j_cur = j_next;
        spow *= s;
        k += 1;
    }
}

/// Fraction of the sphere `|x| = r` in `R^n` lying inside the closed ball of
/// radius `rho` around a point at distance `d` from the origin.
pub fn shell_fraction(n: usize, r: f64, d: f64, rho: f64) -> f64 {
    if r + d <= rho {
        return 1.0;
    }
    if r >= d + rho || r <= d - rho || r <= 0.0 || d <= 0.0 {
        return 0.0;
    }
    let c = ((r * r + d * d - rho * rho) / (2.0 * r * d)).clamp(-1.0, 1.0);
    let theta = c.acos();
    sin_power_integral(n - 2, theta) / sin_power_integral(n - 2, PI)
}

/// Euclidean distance from the origin to the axis box `[lo, hi]`.
fn box_distance(lo: &[f64; 3], hi: &[f64; 3]) -> f64 {
    let mut acc = 0.0;
    for k in 0..3 {
        let v = if lo[k] > 0.0 {
            lo[k]
        } else if hi[k] < 0.0 {
            -hi[k]
        } else {
            0.0
        };
        acc += v * v;
    }
    acc.sqrt()
}

fn box_diameter(lo: &[f64; 3], hi: &[f64; 3]) -> f64 {
    (0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt()
}

fn box_volume(lo: &[f64; 3], hi: &[f64; 3]) -> f64 {
    (0..3).map(|k| hi[k] - lo[k]).product()
}

/// Tensor Gauss rule of `n` points per axis applied to `g`.
fn tensor_gauss<G: Fn([f64; 3]) -> f64>(g: &G, lo: &[f64; 3], hi: &[f64; 3], n: usize) -> f64 {
    let (x, w) = rule(n);
    let mid: [f64; 3] = std::array::from_fn(|k| 0.5 * (lo[k] + hi[k]));
    let half: [f64; 3] = std::array::from_fn(|k| 0.5 * (hi[k] - lo[k]));
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        for (xj, wj) in x.iter().zip(w) {
            for (xk, wk) in x.iter().zip(w) {
                let p = [mid[0] + half[0] * xi, mid[1] + half[1] * xj, mid[2] + half[2] * xk];
                acc += wi * wj * wk * g(p);
            }
        }
    }
    acc * half[0] * half[1] * half[2]
}

const MAX_BOX_DEPTH: usize = 24;

/// `int_{[lo,hi]} |x|^e dx` for a box not containing the origin in its interior.
fn box_power_away(lo: &[f64; 3], hi: &[f64; 3], e: f64, depth: usize) -> Result<f64> {
    let dist = box_distance(lo, hi);
    let diam = box_diameter(lo, hi);
    let g = |x: [f64; 3]| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powf(0.5 * e);
    if dist >= 8.0 * diam {
        return Ok(tensor_gauss(&g, lo, hi, 2));
    }
    if dist >= 3.0 * diam {
        return Ok(tensor_gauss(&g, lo, hi, 3));
    }
    if depth >= MAX_BOX_DEPTH {
        return Err(Error::OriginCellUnresolved);
    }
    let mut acc = 0.0;
    for child in split8(lo, hi) {
        acc += box_power_away(&child.0, &child.1, e, depth + 1)?;
    }
    Ok(acc)
}

fn split8(lo: &[f64; 3], hi: &[f64; 3]) -> Vec<([f64; 3], [f64; 3])> {
    let mid: [f64; 3] = std::array::from_fn(|k| 0.5 * (lo[k] + hi[k]));
    let mut out = Vec::with_capacity(8);
    for bits in 0..8u8 {
        let mut l = [0.0; 3];
        let mut h = [0.0; 3];
        for k in 0..3 {
            if bits & (1 << k) == 0 {
                l[k] = lo[k];
                h[k] = mid[k];
            } else {
                l[k] = mid[k];
                h[k] = hi[k];
            }
        }
        out.push((l, h));
    }
    out
}

/// `int |x|^e` over `[0,h0]x[0,h1]x[0,h2]` using self-similarity: the corner
/// child is the same integral scaled by `2^{-(3+e)}`.
fn corner_box_power(h: [f64; 3], e: f64) -> Result<f64> {
    let lo = [0.0; 3];
    let mut others = 0.0;
    for (bits, child) in split8(&lo, &h).into_iter().enumerate() {
        if bits == 0 {
            continue;
        }
        others += box_power_away(&child.0, &child.1, e, 1)?;
    }
    Ok(others / (1.0 - 0.5f64.powf(3.0 + e)))
}

/// `int_{[lo,hi]} |x|^e dx` in three dimensions, `e > -3`.
pub fn box_power_integral(lo: &[f64; 3], hi: &[f64; 3], e: f64) -> Result<f64> {
    if (0..3).any(|k| hi[k] <= lo[k]) {
        return Ok(0.0);
    }
    if e == 0.0 {
        return Ok(box_volume(lo, hi));
    }
    // faces within rounding of the origin come from midpoint arithmetic;
    // moving them onto it keeps the subdivision finite
    let eps = 1e-12 * box_diameter(lo, hi);
    let snap = |v: f64| if v.abs() <= eps { 0.0 } else { v };
    let lo: [f64; 3] = std::array::from_fn(|k| snap(lo[k]));
    let hi: [f64; 3] = std::array::from_fn(|k| snap(hi[k]));
    if (0..3).any(|k| hi[k] <= lo[k]) {
        return Ok(0.0);
    }
    let touches_origin = (0..3).all(|k| lo[k] <= 0.0 && hi[k] >= 0.0);
    if !touches_origin {
        return box_power_away(&lo, &hi, e, 0);
    }
    // split into orthant pieces with a corner at the origin
    let mut acc = 0.0;
    for bits in 0..8u8 {
        let mut h = [0.0; 3];
        let mut empty = false;
        for k in 0..3 {
            h[k] = if bits & (1 << k) == 0 { hi[k] } else { -lo[k] };
            if h[k] <= 0.0 {
                empty = true;
            }
        }
        if !empty {
            acc += corner_box_power(h, e)?;
        }
    }
    Ok(acc)
}

/// `int_{[lo,hi] ∩ B} |x|^e dx` for the ball `B = B_rho(c)`.
pub fn box_power_integral_in_ball(
    lo: &[f64; 3],
    hi: &[f64; 3],
    e: f64,
    c: &[f64; 3],
    rho: f64,
) -> Result<f64> {
    match classify_box(lo, hi, c, rho) {
        BoxBall::Inside => box_power_integral(lo, hi, e),
        BoxBall::Outside => Ok(0.0),
        BoxBall::Straddles => clipped(lo, hi, e, c, rho, 0),
    }
}

enum BoxBall {
    Inside,
    Outside,
    Straddles,
}

fn classify_box(lo: &[f64; 3], hi: &[f64; 3], c: &[f64; 3], rho: f64) -> BoxBall {
    let mut near = 0.0;
    let mut far = 0.0;
    for k in 0..3 {
        let dn = if c[k] < lo[k] {
            lo[k] - c[k]
        } else if c[k] > hi[k] {
            c[k] - hi[k]
        } else {
            0.0
        };
        let df = (c[k] - lo[k]).abs().max((hi[k] - c[k]).abs());
        near += dn * dn;
        far += df * df;
    }
    if far <= rho * rho {
        BoxBall::Inside
    } else if near >= rho * rho {
        BoxBall::Outside
    } else {
        BoxBall::Straddles
    }
}

const CLIP_DEPTH: usize = 3;

fn clipped(lo: &[f64; 3], hi: &[f64; 3], e: f64, c: &[f64; 3], rho: f64, depth: usize) -> Result<f64> {
    if depth >= CLIP_DEPTH {
        let touches_origin = (0..3).all(|k| lo[k] <= 0.0 && hi[k] >= 0.0);
        // fraction of Gauss points inside the ball times the exact integral
        let inside = |x: [f64; 3]| {
            let d2: f64 = (0..3).map(|k| (x[k] - c[k]).powi(2)).sum();
            if d2 <= rho * rho {
                1.0
            } else {
                0.0
            }
        };
        if touches_origin {
            let frac = tensor_gauss(&inside, lo, hi, 3) / box_volume(lo, hi);
            return Ok(frac * box_power_integral(lo, hi, e)?);
        }
        let g = |x: [f64; 3]| inside(x) * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powf(0.5 * e);
        return Ok(tensor_gauss(&g, lo, hi, 3));
    }
    let mut acc = 0.0;
    for (l, h) in split8(lo, hi) {
        acc += match classify_box(&l, &h, c, rho) {
            BoxBall::Inside => box_power_integral(&l, &h, e)?,
            BoxBall::Outside => 0.0,
            BoxBall::Straddles => clipped(&l, &h, e, c, rho, depth + 1)?,
        };
    }
    Ok(acc)
}

/// `int_lo^hi r^k dr` for `k > -1`, exact.
pub fn power_antiderivative(lo: f64, hi: f64, k: f64) -> f64 {
    let k1 = k + 1.0;
    (hi.powf(k1) - lo.powf(k1)) / k1
}

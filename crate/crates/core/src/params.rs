//! Admissible exponents and everything derived from them.

use std::fmt;

use crate::error::{Error, Result};

/// Integrability exponent of the source term. `Infinite` makes `p/s` vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrability {
    Finite(f64),
    Infinite,
}

impl Integrability {
    /// `p / s`, zero for `s = inf`.
    pub fn p_over_s(self, p: f64) -> f64 {
        match self {
            Integrability::Finite(s) => p / s,
            Integrability::Infinite => 0.0,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Integrability::Finite(s) => s,
            Integrability::Infinite => f64::INFINITY,
        }
    }

    /// Accepts a decimal number or `inf`.
    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "∞" {
            return Some(Integrability::Infinite);
        }
        t.parse::<f64>().ok().map(Integrability::Finite)
    }
}

impl fmt::Display for Integrability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Integrability::Finite(s) => write!(f, "{s}"),
            Integrability::Infinite => f.write_str("inf"),
        }
    }
}

/// Which power weight an integral carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Weight {
    /// `|x|^{-2a}`, the energy measure.
    Energy,
    /// `|x|^{-bp}`, the weight on the critical term and the source.
    Critical,
}

/// Validated `(N, a, b, s)` together with the critical exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightParams {
    n: usize,
    a: f64,
    b: f64,
    s: Integrability,
    p: f64,
}

/// Branch of the Hölder bound attaining the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitingBranch {
    HarmonicExponent,
    Unit,
    IntegrabilityBNonneg,
    IntegrabilityBNeg,
}

impl LimitingBranch {
    pub fn as_str(self) -> &'static str {
        match self {
            LimitingBranch::HarmonicExponent => "harmonic_exponent",
            LimitingBranch::Unit => "unit",
            LimitingBranch::IntegrabilityBNonneg => "integrability_b_nonneg",
            LimitingBranch::IntegrabilityBNeg => "integrability_b_neg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderBound {
    pub alpha_sup: f64,
    pub limiting_branch: LimitingBranch,
}

/// `2N / (N - 2(1 + a - b))` without any validation.
pub fn critical_exponent(n: usize, a: f64, b: f64) -> f64 {
    let nf = n as f64;
    2.0 * nf / (nf - 2.0 * (1.0 + a - b))
}

impl WeightParams {
    /// Checks `N >= 3`, `a < (N-2)/2`, `a <= b <= a+1`, `s > 0`.
    pub fn validate(n: usize, a: f64, b: f64, s: Integrability) -> Result<Self> {
        if n < 3 {
            return Err(Error::DimensionTooSmall(n));
        }
        let limit = (n as f64 - 2.0) / 2.0;
        if !a.is_finite() || a >= limit {
            return Err(Error::AOutOfRange { a, limit });
        }
        if !b.is_finite() || b < a || b > a + 1.0 {
            return Err(Error::BOutOfRange { b, lo: a, hi: a + 1.0, strict: false });
        }
        if let Integrability::Finite(sv) = s {
            if !(sv > 0.0) {
                return Err(Error::STooSmall { s: sv, min: 0.0 });
            }
        }
        Ok(Self { n, a, b, s, p: critical_exponent(n, a, b) })
    }

    /// Validation for Hölder analysis: additionally `b < a+1` and `s > p/(p-2)`.
    pub fn validate_for_holder(n: usize, a: f64, b: f64, s: Integrability) -> Result<Self> {
        let params = Self::validate(n, a, b, s)?;
        params.require_holder()?;
        Ok(params)
    }

    pub fn require_holder(&self) -> Result<()> {
        if self.b >= self.a + 1.0 {
            return Err(Error::BOutOfRange { b: self.b, lo: self.a, hi: self.a + 1.0, strict: true });
        }
        let min = self.s_threshold();
        if let Integrability::Finite(sv) = self.s {
            if sv <= min {
                return Err(Error::STooSmall { s: sv, min });
            }
        }
        Ok(())
    }

    /// True when `b < a+1`, i.e. `p > 2`.
    pub fn strict(&self) -> bool {
        self.b < self.a + 1.0
    }

    /// Same exponents with a different integrability exponent.
    pub fn with_s(&self, s: Integrability) -> Result<Self> {
        Self::validate(self.n, self.a, self.b, s)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn s(&self) -> Integrability {
        self.s
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn bp(&self) -> f64 {
        self.b * self.p
    }

    /// Power of `|x|` carried by the given weight.
    pub fn weight_exponent(&self, w: Weight) -> f64 {
        match w {
            Weight::Energy => -2.0 * self.a,
            Weight::Critical => -self.b * self.p,
        }
    }

    /// `p / (p - 2)`; infinite when `p = 2`.
    pub fn s_threshold(&self) -> f64 {
        self.p / (self.p - 2.0)
    }

    /// Radial power `2 + 2a - N` of the weighted fundamental solution.
    pub fn fundamental_exponent(&self) -> f64 {
        2.0 + 2.0 * self.a - self.n as f64
    }

    /// Scaling power `(N - 2 - 2a)/2` of the energy-preserving dilation.
    pub fn dilation_exponent(&self) -> f64 {
        (self.n as f64 - 2.0 - 2.0 * self.a) / 2.0
    }

    /// `2(p - 2 - p/s)/p`.
    pub fn epsilon_choice(&self) -> Result<f64> {
        let gap = self.integrability_gap()?;
        Ok(2.0 * gap / self.p)
    }

    /// `p - 2 - p/s`, required positive.
    fn integrability_gap(&self) -> Result<f64> {
        let gap = self.p - 2.0 - self.s.p_over_s(self.p);
        if !(gap > 0.0) {
            return Err(Error::STooSmall { s: self.s.value(), min: self.s_threshold() });
        }
        Ok(gap)
    }

    /// Upper bound on admissible Hölder exponents for the given harmonic estimate.
    ///
    /// Ties follow the branch order, except that an estimate equal to 1 is
    /// absorbed by the unit cap.
    pub fn holder_bound(&self, alpha_h: f64) -> Result<HolderBound> {
        if !(alpha_h > 0.0 && alpha_h <= 1.0) {
            return Err(Error::InvalidAlphaH(alpha_h));
        }
        self.require_holder()?;
        let gap = self.integrability_gap()?;
        let nf = self.n as f64;
        let (integ, integ_branch) = if self.b >= 0.0 {
            (((nf - 2.0) / 2.0 - self.a) * gap, LimitingBranch::IntegrabilityBNonneg)
        } else {
            ((nf / self.p) * gap, LimitingBranch::IntegrabilityBNeg)
        };
        let mut best = HolderBound { alpha_sup: 1.0, limiting_branch: LimitingBranch::Unit };
        if alpha_h < 1.0 {
            best = HolderBound { alpha_sup: alpha_h, limiting_branch: LimitingBranch::HarmonicExponent };
        }
        if integ < best.alpha_sup {
            best = HolderBound { alpha_sup: integ, limiting_branch: integ_branch };
        }
        Ok(best)
    }

    /// `q_k = p^{k+1} / 2^k` for `k = 0..=k_max`.
    pub fn moser_ladder(&self, k_max: usize) -> Vec<f64> {
        (0..=k_max)
            .map(|k| self.p.powi(k as i32 + 1) / 2f64.powi(k as i32))
            .collect()
    }

    /// Smallest `k >= 0` with `(p/2)^k >= 2(p-1)/(p-2)`.
    pub fn k0_threshold(&self) -> Result<usize> {
        if !(self.p > 2.0) {
            return Err(Error::BOutOfRange { b: self.b, lo: self.a, hi: self.a + 1.0, strict: true });
        }
        let target = 2.0 * (self.p - 1.0) / (self.p - 2.0);
        let ratio = self.p / 2.0;
        let mut k = 0usize;
        let mut power = 1.0f64;
        while power < target {
            k += 1;
            power = ratio.powi(k as i32);
        }
        Ok(k)
    }
}

impl fmt::Display for WeightParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} a={} b={} s={} p={}", self.n, self.a, self.b, self.s, self.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(n: usize, a: f64, b: f64, s: Integrability) -> WeightParams {
        WeightParams::validate(n, a, b, s).unwrap()
    }

    #[test]
    fn critical_exponent_examples() {
        assert_eq!(params(3, 0.0, 0.0, Integrability::Infinite).p(), 6.0);
        assert_eq!(params(3, 0.0, 1.0, Integrability::Infinite).p(), 2.0);
        // 8 / 2.5
        let p = params(4, 0.5, 0.75, Integrability::Finite(4.0)).p();
        assert!((p - 3.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(
            WeightParams::validate(2, 0.0, 0.0, Integrability::Infinite),
            Err(Error::DimensionTooSmall(2))
        ));
        assert!(matches!(
            WeightParams::validate(3, 0.5, 0.5, Integrability::Infinite),
            Err(Error::AOutOfRange { .. })
        ));
        assert!(matches!(
            WeightParams::validate(3, 0.0, -0.1, Integrability::Infinite),
            Err(Error::BOutOfRange { .. })
        ));
        assert!(matches!(
            WeightParams::validate(3, 0.0, 1.1, Integrability::Infinite),
            Err(Error::BOutOfRange { .. })
        ));
        assert!(matches!(
            WeightParams::validate_for_holder(3, 0.0, 1.0, Integrability::Infinite),
            Err(Error::BOutOfRange { strict: true, .. })
        ));
        assert!(WeightParams::validate(3, f64::NAN, 0.0, Integrability::Infinite).is_err());
    }

    #[test]
    fn epsilon_examples() {
        let e = params(3, 0.0, 0.0, Integrability::Infinite).epsilon_choice().unwrap();
        assert!((e - 4.0 / 3.0).abs() < 1e-15);
        let e = params(3, 0.0, 0.0, Integrability::Finite(3.0)).epsilon_choice().unwrap();
        assert!((e - 2.0 / 3.0).abs() < 1e-15);
        // s = p/(p-2) = 1.5 exactly
        let r = WeightParams::validate_for_holder(3, 0.0, 0.0, Integrability::Finite(1.5));
        assert!(matches!(r, Err(Error::STooSmall { .. })));
        assert!(params(3, 0.0, 0.0, Integrability::Finite(1.5)).epsilon_choice().is_err());
    }

    #[test]
    fn holder_bound_examples() {
        let hb = params(3, 0.0, 0.0, Integrability::Finite(3.0)).holder_bound(1.0).unwrap();
        assert_eq!(hb.alpha_sup, 1.0);
        assert_eq!(hb.limiting_branch, LimitingBranch::Unit);

        let hb = params(3, 0.0, 0.0, Integrability::Finite(1.6)).holder_bound(1.0).unwrap();
        assert!((hb.alpha_sup - 0.125).abs() < 1e-14);
        assert_eq!(hb.limiting_branch, LimitingBranch::IntegrabilityBNonneg);

        let p = params(3, -0.5, -0.2, Integrability::Infinite);
        assert!((p.p() - 3.75).abs() < 1e-14);
        let hb = p.holder_bound(0.5).unwrap();
        assert_eq!(hb.alpha_sup, 0.5);
        assert_eq!(hb.limiting_branch, LimitingBranch::HarmonicExponent);
        // integrability branch for b < 0 is 0.8 * 1.75 = 1.4, above the unit cap
        let hb = p.holder_bound(1.0).unwrap();
        assert_eq!(hb.limiting_branch, LimitingBranch::Unit);

        assert!(matches!(p.holder_bound(0.0), Err(Error::InvalidAlphaH(_))));
        assert!(matches!(p.holder_bound(1.5), Err(Error::InvalidAlphaH(_))));
    }

    #[test]
    fn ladder_examples() {
        let p6 = params(3, 0.0, 0.0, Integrability::Infinite);
        assert_eq!(p6.moser_ladder(2), vec![6.0, 18.0, 54.0]);
        assert_eq!(p6.moser_ladder(0), vec![6.0]);
        // N=4, a=b=0 gives p=4
        let p4 = params(4, 0.0, 0.0, Integrability::Infinite);
        assert_eq!(p4.p(), 4.0);
        assert_eq!(p4.moser_ladder(1), vec![4.0, 8.0]);
    }

    fn brute_k0(p: f64) -> usize {
        let target = 2.0 * (p - 1.0) / (p - 2.0);
        (0..10_000_000).find(|&k| (p / 2.0).powf(k as f64) >= target).unwrap()
    }

    #[test]
    fn k0_examples() {
        assert_eq!(params(3, 0.0, 0.0, Integrability::Infinite).k0_threshold().unwrap(), 1);
        assert_eq!(params(4, 0.0, 0.0, Integrability::Infinite).k0_threshold().unwrap(), 2);
        // p = 2.5 needs N - 2(1+a-b) = 2.4N/... pick N=3, 1+a-b = 0.3
        let p = params(3, 0.0, 0.7, Integrability::Infinite);
        assert!((p.p() - 2.5).abs() < 1e-12);
        assert_eq!(p.k0_threshold().unwrap(), 9);
        assert_eq!(brute_k0(2.5), 9);
        assert!(params(3, 0.0, 1.0, Integrability::Infinite).k0_threshold().is_err());
    }

    fn valid_tuple() -> impl Strategy<Value = (usize, f64, f64)> {
        (3usize..8, -3.0f64..1.0, 0.0f64..1.0).prop_filter_map("a range", |(n, a0, t)| {
            let a = a0.min((n as f64 - 2.0) / 2.0 - 1e-3);
            // keep b strictly below a+1
            let b = a + 0.99 * t;
            Some((n, a, b))
        })
    }

    proptest! {
        #[test]
        fn exponent_identity((n, a, b) in valid_tuple()) {
            let p = params(n, a, b, Integrability::Infinite);
            let nf = n as f64;
            let lhs = (nf - p.bp()) * (2.0 / p.p());
            prop_assert!((lhs - (nf - 2.0 - 2.0 * a)).abs() <= 1e-12 * (1.0 + nf));
            prop_assert!(p.p() > 2.0 && p.p() <= 2.0 * nf / (nf - 2.0) + 1e-12);
        }

        #[test]
        fn holder_bound_monotone_in_s((n, a, b) in valid_tuple(), s1 in 0.0f64..50.0, ds in 0.0f64..50.0, ah in 0.05f64..1.0) {
            let base = params(n, a, b, Integrability::Infinite);
            let s_lo = base.s_threshold() * 1.001 + s1;
            let lo = base.with_s(Integrability::Finite(s_lo)).unwrap().holder_bound(ah).unwrap();
            let hi = base.with_s(Integrability::Finite(s_lo + ds)).unwrap().holder_bound(ah).unwrap();
            let inf = base.holder_bound(ah).unwrap();
            prop_assert!(lo.alpha_sup <= hi.alpha_sup);
            prop_assert!(hi.alpha_sup <= inf.alpha_sup);
            prop_assert!(lo.alpha_sup > 0.0 && inf.alpha_sup <= 1.0);
        }

        #[test]
        fn ladder_strictly_increasing((n, a, b) in valid_tuple(), k_max in 0usize..12) {
            let p = params(n, a, b, Integrability::Infinite);
            let q = p.moser_ladder(k_max);
            prop_assert_eq!(q[0], p.p());
            for w in q.windows(2) {
                prop_assert!(w[1] > w[0]);
                prop_assert!((w[1] - p.p() * w[0] / 2.0).abs() <= 1e-14 * w[1]);
            }
        }

        #[test]
        fn k0_matches_brute_force((n, a, b) in valid_tuple()) {
            let p = params(n, a, b, Integrability::Infinite);
            prop_assert_eq!(p.k0_threshold().unwrap(), brute_k0(p.p()));
        }
    }
}

//! Closed-form radial solutions used to check the discretization.

use crate::error::{Error, Result};
use crate::params::WeightParams;

/// `u = (R^beta - r^beta) / ((N - bp + gamma) beta)` solving the weighted
/// equation on `B_R` with data `f = r^gamma` and zero boundary values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialMms {
    pub gamma: f64,
    pub beta: f64,
    pub r_outer: f64,
    denom: f64,
}

/// Requires `N - bp + gamma > 0` (integrable data) and `beta > 0`.
pub fn exact_radial_mms(params: &WeightParams, gamma: f64, r_outer: f64) -> Result<RadialMms> {
    let n = params.n() as f64;
    let lead = n - params.bp() + gamma;
    let beta = 2.0 + 2.0 * params.a() - params.bp() + gamma;
    if lead <= 0.0 || beta <= 0.0 {
        return Err(Error::DegenerateExponent(format!(
            "gamma = {gamma} gives N - bp + gamma = {lead}, beta = {beta}"
        )));
    }
    if !(r_outer > 0.0) {
        return Err(Error::NonpositiveRadius(r_outer));
    }
    Ok(RadialMms { gamma, beta, r_outer, denom: lead * beta })
}

impl RadialMms {
    pub fn u(&self, r: f64) -> f64 {
        (self.r_outer.powf(self.beta) - r.powf(self.beta)) / self.denom
    }
    pub fn f(&self, r: f64) -> f64 {
        if self.gamma == 0.0 {
            1.0
        } else {
            r.powf(self.gamma)
        }
    }
}

/// Positive radial solution of `-div(|x|^{-2a} grad u) = K |x|^{-bp} u^{p-1}`
/// of the form `(1 + r^theta)^{-2/(p-2)}`, and its dilations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalBubble {
    pub theta: f64,
    pub kappa: f64,
    pub k_const: f64,
    pub p: f64,
    pub dilation_exponent: f64,
}

impl CriticalBubble {
    pub fn new(params: &WeightParams) -> Result<Self> {
        let p = params.p();
        if p <= 2.0 {
            return Err(Error::DegenerateExponent("bubble needs p > 2".into()));
        }
        let gap = params.n() as f64 - 2.0 - 2.0 * params.a();
        Ok(Self {
            theta: gap * (p - 2.0) / 2.0,
            kappa: 2.0 / (p - 2.0),
            k_const: p * gap * gap / 2.0,
            p,
            dilation_exponent: gap / 2.0,
        })
    }

    pub fn u(&self, r: f64) -> f64 {
        (1.0 + r.powf(self.theta)).powf(-self.kappa)
    }

    /// `lambda^{(N-2-2a)/2} u(lambda r)`.
    pub fn dilated(&self, lambda: f64, r: f64) -> f64 {
        lambda.powf(self.dilation_exponent) * self.u(lambda * r)
    }

    /// Right-hand side `K |u|^{p-2} u` for a given value.
    pub fn nonlinearity(&self, v: f64) -> f64 {
        self.k_const * v.abs().powf(self.p - 2.0) * v
    }
}

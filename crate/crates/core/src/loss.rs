//! Asymmetric L_q loss family.
//!
//! For an asymmetry index `tau` in (0, 1) and exponent `q > 1`
//!
//! ```text
//! rho(x)  = |tau - 1{x < 0}| * |x|^q
//! g(eps)  = d/dt rho(eps - t) at t = 0
//!         = -q tau |eps|^(q-1) 1{eps >= 0} + q (1 - tau) |eps|^(q-1) 1{eps < 0}
//! h(eps)  = d2/dt2 rho(eps - t) at t = 0
//!         = q (q - 1) |tau - 1{eps < 0}| |eps|^(q-2)
//! ```
//!
//! `q = 2` is the expectile loss. At `eps = 0` the `1{eps >= 0}` branch is
//! taken; `rho` and `g` are continuous there, so the choice only matters for
//! `h` when `q < 2`, where `|eps|` is clamped from below by a floor.
//!
//! Sample variances in this module use the unbiased `n - 1` divisor.

use crate::error::{Error, Result};

/// Default lower clamp on `|eps|` inside `h` for `q < 2`.
pub const DEFAULT_H_FLOOR: f64 = 1e-6;

/// Asymmetry index and exponent of the loss.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossSpec {
    tau: f64,
    q: f64,
}

impl LossSpec {
    pub fn new(tau: f64, q: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::spec(format!("tau must lie in (0, 1), got {tau}")));
        }
        if !(q > 1.0 && q.is_finite()) {
            return Err(Error::spec(format!("q must be finite and > 1, got {q}")));
        }
        Ok(Self { tau, q })
    }

    /// Expectile loss (`q = 2`).
    pub fn expectile(tau: f64) -> Result<Self> {
        Self::new(tau, 2.0)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn is_expectile(&self) -> bool {
        self.q == 2.0
    }

    #[inline]
    fn asymmetry(&self, x: f64) -> f64 {
        if x < 0.0 {
            1.0 - self.tau
        } else {
            self.tau
        }
    }

    /// `rho(u)` without input validation.
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        let w = self.asymmetry(u);
        if self.is_expectile() {
            w * u * u
        } else {
            w * u.abs().powf(self.q)
        }
    }

    /// `g(eps)` without input validation.
    #[inline]
    pub fn score(&self, eps: f64) -> f64 {
        let w = self.asymmetry(eps);
        if self.is_expectile() {
            -2.0 * w * eps
        } else if eps == 0.0 {
            0.0
        } else {
            -self.q * w * eps.signum() * eps.abs().powf(self.q - 1.0)
        }
    }

    /// `h(eps)` without input validation; `floor` clamps `|eps|` from below.
    #[inline]
    pub fn curvature(&self, eps: f64, floor: f64) -> f64 {
        let w = self.asymmetry(eps);
        if self.is_expectile() {
            2.0 * w
        } else {
            self.q * (self.q - 1.0) * w * eps.abs().max(floor).powf(self.q - 2.0)
        }
    }
}

fn finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain { what, value })
    }
}

pub fn rho(u: f64, spec: &LossSpec) -> Result<f64> {
    Ok(spec.value(finite("loss argument", u)?))
}

pub fn g(eps: f64, spec: &LossSpec) -> Result<f64> {
    Ok(spec.score(finite("residual", eps)?))
}

pub fn h(eps: f64, spec: &LossSpec, floor: f64) -> Result<f64> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(Error::spec(format!("h floor must be positive, got {floor}")));
    }
    Ok(spec.curvature(finite("residual", eps)?, floor))
}

/// Scale on which the asymmetry index is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TauScale {
    /// Center and scale the sample to zero mean, unit variance first.
    #[default]
    Standardized,
    /// Use the sample as given.
    Raw,
}

/// Estimates the asymmetry index that makes zero the `tau`-expectile of
/// the (standardized) sample:
///
/// ```text
/// tau = sum(z 1{z < 0}) / (sum(z 1{z < 0}) - sum(z 1{z > 0}))
/// ```
///
/// Centering at the sample mean makes the two partial sums cancel, so the
/// standardized estimate is 1/2 up to rounding for every sample. Use
/// [`TauScale::Raw`] when the sample is already expressed relative to its
/// reference point, e.g. simulated model errors.
pub fn estimate_tau(sample: &[f64]) -> Result<f64> {
    estimate_tau_with(sample, TauScale::Standardized)
}

pub fn estimate_tau_with(sample: &[f64], scale: TauScale) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 observations, got {}",
            sample.len()
        )));
    }
    if let Some(bad) = sample.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain {
            what: "sample value",
            value: *bad,
        });
    }
    let (center, spread) = match scale {
        TauScale::Standardized => {
            let (mean, var) = mean_and_variance(sample);
            let sd = var.sqrt();
            if !(sd > 0.0) {
                return Err(Error::DegenerateSample("sample is constant".into()));
            }
            (mean, sd)
        }
        TauScale::Raw => (0.0, 1.0),
    };
    let (mut neg, mut pos) = (0.0, 0.0);
    for &v in sample {
        let z = (v - center) / spread;
        if z < 0.0 {
            neg += z;
        } else if z > 0.0 {
            pos += z;
        }
    }
    let denom = neg - pos;
    if denom == 0.0 {
        return Err(Error::DegenerateSample("zero denominator".into()));
    }
    let tau = neg / denom;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::DegenerateSample(format!(
            "estimated tau {tau} is outside (0, 1); the sample has no sign change"
        )));
    }
    Ok(tau)
}

/// Plug-in estimates of `E[h(eps)]` and `Var[g(eps)]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LossMoments {
    pub mu_h: f64,
    pub sigma2_g: f64,
}

impl LossMoments {
    /// `sigma2_g / mu_h^2`, the variance inflation of the sandwich formula.
    pub fn variance_ratio(&self) -> f64 {
        self.sigma2_g / (self.mu_h * self.mu_h)
    }
}

pub fn empirical_moments(residuals: &[f64], spec: &LossSpec) -> Result<LossMoments> {
    empirical_moments_with_floor(residuals, spec, DEFAULT_H_FLOOR)
}

pub fn empirical_moments_with_floor(
    residuals: &[f64],
    spec: &LossSpec,
    floor: f64,
) -> Result<LossMoments> {
    if residuals.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 residuals, got {}",
            residuals.len()
        )));
    }
    let mut hs = Vec::with_capacity(residuals.len());
    let mut gs = Vec::with_capacity(residuals.len());
    for &e in residuals {
        hs.push(h(e, spec, floor)?);
        gs.push(spec.score(e));
    }
    let mu_h = hs.iter().sum::<f64>() / hs.len() as f64;
    let (_, sigma2_g) = mean_and_variance(&gs);
    Ok(LossMoments { mu_h, sigma2_g })
}

/// Mean and unbiased variance.
pub(crate) fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, if xs.len() > 1 { ss / (n - 1.0) } else { 0.0 })
}

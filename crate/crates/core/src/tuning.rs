//! Tuning schedules and asymptotic rate conditions.
//!
//! Every condition is a statement about a monomial sequence
//! `lambda_n = const * n^e`. A limit `n^k -> 0` holds iff `k < 0` and
//! `n^k -> inf` iff `k > 0`; `k = 0` is reported as indeterminate since
//! logarithmic factors are not modeled.

use serde::Serialize;

use crate::error::{Error, Result};

/// Exponents of the sequences appearing in the rate conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RegimeSpec {
    /// `p = O(n^c)`.
    pub c: f64,
    /// Signal floor `min_j ||beta_j|| >= K n^alpha`.
    pub alpha: f64,
    pub gamma: f64,
    /// `lambda_n = n^lambda_exponent`.
    pub lambda_exponent: f64,
    /// Optional rate sequences for the `c in [1/2, 1]` theory.
    #[serde(default)]
    pub rates: Option<RateExponents>,
}

/// `a_n = n^a`, `b_n = n^b`, `p0 = O(n^p0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RateExponents {
    pub a: f64,
    pub b: f64,
    pub p0: f64,
}

impl RegimeSpec {
    pub fn new(c: f64, alpha: f64, gamma: f64, lambda_exponent: f64) -> Result<Self> {
        let r = Self {
            c,
            alpha,
            gamma,
            lambda_exponent,
            rates: None,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn with_rates(mut self, rates: RateExponents) -> Self {
        self.rates = Some(rates);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.c) {
            return Err(Error::spec(format!("c must lie in [0, 1], got {}", self.c)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::spec(format!("gamma must be > 0, got {}", self.gamma)));
        }
        let finite = [self.alpha, self.gamma, self.lambda_exponent]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::spec(
                "regime exponents must be finite (only monomial schedules n^e are supported)",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    Zero,
    Infinity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub statement: &'static str,
    pub limit: Limit,
    pub net_exponent: f64,
    pub verdict: Verdict,
}

impl ConditionCheck {
    fn new(name: &'static str, statement: &'static str, limit: Limit, net_exponent: f64) -> Self {
        let verdict = if net_exponent == 0.0 {
            Verdict::Indeterminate
        } else if (net_exponent < 0.0) == (limit == Limit::Zero) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            name,
            statement,
            limit,
            net_exponent,
            verdict,
        }
    }
}

/// Strict inequalities on the regime exponents (not limits).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub statement: &'static str,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub regime: RegimeSpec,
    /// `"fixed_or_slow"` for `c < 1/2`, `"fast"` for `c in [1/2, 1]`.
    pub growth: &'static str,
    pub conditions: Vec<ConditionCheck>,
    pub assumptions: Vec<AssumptionCheck>,
}

impl ConditionReport {
    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// No condition fails (indeterminate ones are tolerated).
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.verdict != Verdict::Fail)
            && self.assumptions.iter().all(|a| a.holds)
    }
}

pub fn check_conditions(regime: &RegimeSpec) -> Result<ConditionReport> {
    regime.validate()?;
    let RegimeSpec {
        c,
        alpha,
        gamma,
        lambda_exponent: e,
        rates,
    } = *regime;

    let mut conditions = vec![
        ConditionCheck::new("E3.1a", "n^(1/2) lambda_n -> 0", Limit::Zero, 0.5 + e),
        ConditionCheck::new(
            "E3.1b",
            "n^((gamma+1)/2) lambda_n -> inf",
            Limit::Infinity,
            (gamma + 1.0) / 2.0 + e,
        ),
        ConditionCheck::new(
            "E4.1",
            "lambda_n n^(1/2 - alpha gamma) -> 0",
            Limit::Zero,
            0.5 - alpha * gamma + e,
        ),
        ConditionCheck::new(
            "E4.2",
            "lambda_n n^((1-c)(1+gamma)/2) -> inf",
            Limit::Infinity,
            (1.0 - c) * (1.0 + gamma) / 2.0 + e,
        ),
    ];
    if let Some(RateExponents { a, b, p0 }) = rates {
        conditions.extend([
            ConditionCheck::new("a_n", "a_n -> 0", Limit::Zero, a),
            ConditionCheck::new("sqrt_n_a_n", "n^(1/2) a_n -> inf", Limit::Infinity, 0.5 + a),
            ConditionCheck::new("b_n", "b_n -> 0", Limit::Zero, b),
            ConditionCheck::new("sqrt_n_b_n", "n^(1/2) b_n -> inf", Limit::Infinity, 0.5 + b),
            ConditionCheck::new(
                "rate",
                "lambda_n (p0)^(1/2) / b_n -> 0",
                Limit::Zero,
                e + p0 / 2.0 - b,
            ),
            ConditionCheck::new(
                "sparsity",
                "lambda_n a_n^-gamma / b_n -> inf",
                Limit::Infinity,
                e - gamma * a - b,
            ),
        ]);
    }

    let assumptions = vec![
        AssumptionCheck {
            name: "A5",
            statement: "alpha > (c - 1)/2",
            holds: alpha > (c - 1.0) / 2.0,
        },
        AssumptionCheck {
            name: "lambda_to_zero",
            statement: "lambda_n -> 0",
            holds: e < 0.0,
        },
    ];

    Ok(ConditionReport {
        regime: *regime,
        growth: if c < 0.5 { "fixed_or_slow" } else { "fast" },
        conditions,
        assumptions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// `n^(-1/2 - gamma/4)`.
    FixedP,
    /// Same exponent family; the regime is checked first and the schedule is
    /// refused when a growing-p condition fails.
    GrowingP { c: f64, alpha: f64 },
}

pub fn schedule_exponent(gamma: f64) -> f64 {
    -0.5 - gamma / 4.0
}

/// `lambda_n = n^(-1/2 - gamma/4)`.
pub fn lambda_schedule(n: usize, gamma: f64, scheme: Schedule) -> Result<f64> {
    if n == 0 {
        return Err(Error::spec("n must be positive"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::spec(format!("gamma must be finite and > 0, got {gamma}")));
    }
    if !(gamma < 1.0) {
        log::warn!("gamma = {gamma} lies outside (0, 1), the range this schedule is derived for");
    }
    let e = schedule_exponent(gamma);
    if let Schedule::GrowingP { c, alpha } = scheme {
        let report = check_conditions(&RegimeSpec::new(c, alpha, gamma, e)?)?;
        for name in ["E4.1", "E4.2"] {
            let check = report.get(name).expect("always present");
            if check.verdict == Verdict::Fail {
                return Err(Error::spec(format!(
                    "schedule n^{e} violates {name} ({}) for c = {c}, alpha = {alpha}",
                    check.statement
                )));
            }
        }
    }
    Ok((n as f64).powf(e))
}

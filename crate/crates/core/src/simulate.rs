//! Monte Carlo scenarios, the replication engine and selection/accuracy
//! metrics.
//!
//! Every replication draws from its own ChaCha8 stream keyed by
//! `(seed, replication, attempt)`, so results do not depend on scheduling.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, ChiSquared, Exp1, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{eigen_range, gram, ActiveSet, GroupSpec, GroupedCoefficients, GroupedDesign, DEGENERATE_EIGEN};
use crate::error::{Error, Result};
use crate::loss::{estimate_tau_with, LossSpec, TauScale};
use crate::solver::{adaptive_weights, fit_penalized, fit_unpenalized, PenaltySpec, SolverOptions};
use crate::tuning::{lambda_schedule, Schedule};

/// Draws used for the scenario-level asymmetry estimate.
pub const TAU_SAMPLE_SIZE: usize = 1_000_000;
/// Group size of the grouped structures.
pub const GROUP_SIZE: usize = 5;
/// Regeneration attempts before a scenario is declared degenerate.
pub const MAX_ATTEMPTS: u64 = 100;

const TAU_STREAM: u64 = u64::MAX;
const ATTEMPT_BITS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    UngroupedFixed,
    UngroupedGrowing,
    GroupedFixed,
    GroupedGrowing,
}

impl Structure {
    pub fn is_grouped(self) -> bool {
        matches!(self, Structure::GroupedFixed | Structure::GroupedGrowing)
    }

    pub fn group_size(self) -> usize {
        if self.is_grouped() {
            GROUP_SIZE
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PFormula {
    /// `floor(n / 2)`
    HalfN,
    /// `floor(n / ln n)`
    NOverLogN,
    /// `floor(n / 5)`
    FifthN,
    /// `floor(n / (2 ln n))`
    NOverTwoLogN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum P0Formula {
    /// `2 floor(n^(1/2))`
    TwoSqrtN,
    /// `2 floor(n^(1/4))`
    TwoRoot4N,
    /// `2 floor(n^(1/2) / 5)`
    TwoSqrtNDiv5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SizeRule<F> {
    Explicit(usize),
    Formula(F),
}

fn ln_ratio(n: usize, k: f64) -> usize {
    let n = n as f64;
    (n / (k * n.ln())).floor() as usize
}

impl SizeRule<PFormula> {
    pub fn eval(&self, n: usize) -> usize {
        match *self {
            SizeRule::Explicit(p) => p,
            SizeRule::Formula(PFormula::HalfN) => n / 2,
            SizeRule::Formula(PFormula::NOverLogN) => ln_ratio(n, 1.0),
            SizeRule::Formula(PFormula::FifthN) => n / 5,
            SizeRule::Formula(PFormula::NOverTwoLogN) => ln_ratio(n, 2.0),
        }
    }
}

impl SizeRule<P0Formula> {
    pub fn eval(&self, n: usize) -> usize {
        match *self {
            SizeRule::Explicit(p0) => p0,
            SizeRule::Formula(P0Formula::TwoSqrtN) => 2 * n.isqrt(),
            SizeRule::Formula(P0Formula::TwoRoot4N) => 2 * n.isqrt().isqrt(),
            SizeRule::Formula(P0Formula::TwoSqrtNDiv5) => 2 * (n.isqrt() / 5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorDist {
    StdNormal,
    /// `N(-1.2, 0.4^2) + chi2(1)`
    ShiftedChi2,
    /// `Exp(1) - 1`
    ShiftedExp,
    /// `Cauchy(0, 0.1)`
    Cauchy,
}

impl ErrorDist {
    pub fn name(self) -> &'static str {
        match self {
            ErrorDist::StdNormal => "std_normal",
            ErrorDist::ShiftedChi2 => "shifted_chi2",
            ErrorDist::ShiftedExp => "shifted_exp",
            ErrorDist::Cauchy => "cauchy",
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            ErrorDist::StdNormal => rng.sample(StandardNormal),
            ErrorDist::ShiftedChi2 => {
                let normal = Normal::new(-1.2, 0.4).expect("valid");
                let chi2 = ChiSquared::new(1.0).expect("valid");
                rng.sample(normal) + rng.sample(chi2)
            }
            ErrorDist::ShiftedExp => rng.sample::<f64, _>(Exp1) - 1.0,
            ErrorDist::Cauchy => rng.sample(Cauchy::new(0.0, 0.1).expect("valid")),
        }
    }
}

/// Nonzero part of the true coefficient vector. The first `p0` groups are
/// active, the rest are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaRule {
    /// `(1, -2, 0.5, 4, -6)` ungrouped; four fixed 5-vectors grouped.
    Standard,
    /// Flat values of the `p0` active groups.
    Fixed { values: Vec<f64> },
    /// Fresh `N(0, variance)` entries every replication.
    RandomNormal { variance: f64 },
    /// One active coefficient `v / 100`.
    Signal { v: f64 },
}

pub const STANDARD_BETA: [f64; 5] = [1.0, -2.0, 0.5, 4.0, -6.0];
pub const STANDARD_GROUPED_BETA: [[f64; 5]; 4] = [
    [0.5, 1.0, 1.5, 1.0, 0.5],
    [1.0, 1.0, 1.0, 1.0, 1.0],
    [-1.0, 0.0, 1.0, 2.0, 1.5],
    [-1.5, 1.0, 0.5, 0.5, 0.5],
];

fn default_q() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    pub structure: Structure,
    pub p: SizeRule<PFormula>,
    pub p0: SizeRule<P0Formula>,
    pub error: ErrorDist,
    pub beta: BetaRule,
    pub gamma: f64,
    pub seed: u64,
    #[serde(default = "default_q")]
    pub q: f64,
    /// Fixed asymmetry index instead of the scenario estimate.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Fixed `lambda` instead of the `n^(-1/2 - gamma/4)` schedule.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub weight_cap: Option<f64>,
}

/// Evaluated scenario dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dimensions {
    pub n: usize,
    pub p: usize,
    pub p0: usize,
    pub group_size: usize,
}

impl Dimensions {
    pub fn r(&self) -> usize {
        self.p * self.group_size
    }
}

impl ScenarioSpec {
    /// Ungrouped scenario with the default coefficients, `p0 = 5`.
    pub fn ungrouped_fixed(n: usize, p: usize, error: ErrorDist, gamma: f64, seed: u64) -> Self {
        Self {
            name: format!("ungrouped_fixed_n{n}_p{p}_{}", error.name()),
            n,
            structure: Structure::UngroupedFixed,
            p: SizeRule::Explicit(p),
            p0: SizeRule::Explicit(STANDARD_BETA.len()),
            error,
            beta: BetaRule::Standard,
            gamma,
            seed,
            q: 2.0,
            tau: None,
            lambda: None,
            weight_cap: None,
        }
    }

    /// One active coefficient `v / 100` among `p`.
    pub fn signal(n: usize, p: usize, v: f64, error: ErrorDist, gamma: f64, seed: u64) -> Self {
        Self {
            name: format!("signal_n{n}_p{p}_{}", error.name()),
            structure: Structure::UngroupedFixed,
            p0: SizeRule::Explicit(1),
            beta: BetaRule::Signal { v },
            ..Self::ungrouped_fixed(n, p, error, gamma, seed)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// One scenario object or an array of them.
    pub fn list_from_json(text: &str) -> Result<Vec<Self>> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let specs: Vec<Self> = match value {
            serde_json::Value::Array(items) => items
                .into_iter()
                .map(serde_json::from_value)
                .collect::<std::result::Result<_, _>>()?,
            other => vec![serde_json::from_value(other)?],
        };
        if specs.is_empty() {
            return Err(Error::spec("empty scenario list"));
        }
        for s in &specs {
            s.validate()?;
        }
        Ok(specs)
    }

    pub fn dimensions(&self) -> Result<Dimensions> {
        let dims = Dimensions {
            n: self.n,
            p: self.p.eval(self.n),
            p0: self.p0.eval(self.n),
            group_size: self.structure.group_size(),
        };
        if dims.p == 0 {
            return Err(Error::spec(format!("p evaluates to 0 for n = {}", self.n)));
        }
        if dims.p0 > dims.p {
            return Err(Error::spec(format!("p0 = {} exceeds p = {}", dims.p0, dims.p)));
        }
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::spec(format!("n must be at least 2, got {}", self.n)));
        }
        let dims = self.dimensions()?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::spec(format!("gamma must be finite and > 0, got {}", self.gamma)));
        }
        LossSpec::new(self.tau.unwrap_or(0.5), self.q)?;
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::spec(format!("lambda must be finite and >= 0, got {l}")));
            }
        }
        let active = dims.p0 * dims.group_size;
        match &self.beta {
            BetaRule::Standard => {
                let available = if self.structure.is_grouped() {
                    STANDARD_GROUPED_BETA.len()
                } else {
                    STANDARD_BETA.len()
                };
                if dims.p0 != available {
                    return Err(Error::spec(format!(
                        "the default coefficients need p0 = {available}, got {}",
                        dims.p0
                    )));
                }
            }
            BetaRule::Fixed { values } => {
                if values.len() != active {
                    return Err(Error::DimensionMismatch {
                        what: "fixed coefficients",
                        expected: active,
                        found: values.len(),
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::spec("fixed coefficients must be finite"));
                }
            }
            BetaRule::RandomNormal { variance } => {
                if !(*variance > 0.0 && variance.is_finite()) {
                    return Err(Error::spec(format!("variance must be finite and > 0, got {variance}")));
                }
            }
            BetaRule::Signal { v } => {
                if dims.p0 != 1 || dims.group_size != 1 {
                    return Err(Error::spec("the signal rule needs an ungrouped design with p0 = 1"));
                }
                if !v.is_finite() {
                    return Err(Error::spec("signal strength must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn groups(&self) -> Result<GroupSpec> {
        let dims = self.dimensions()?;
        Ok(GroupSpec::uniform(dims.p, dims.group_size))
    }

    /// Asymmetry index used by every replication of the scenario.
    ///
    /// Grouped structures use 1/2. Ungrouped ones estimate it on a dedicated
    /// sample of model errors, on the raw scale, so that zero is the
    /// `tau`-expectile of the error distribution.
    pub fn scenario_tau(&self) -> Result<f64> {
        if let Some(t) = self.tau {
            return Ok(t);
        }
        if self.structure.is_grouped() {
            return Ok(0.5);
        }
        let mut rng = stream(self.seed, TAU_STREAM);
        let sample: Vec<f64> = (0..TAU_SAMPLE_SIZE).map(|_| self.error.sample(&mut rng)).collect();
        estimate_tau_with(&sample, TauScale::Raw)
    }

    pub fn scenario_lambda(&self) -> Result<f64> {
        match self.lambda {
            Some(l) => Ok(l),
            None => lambda_schedule(self.n, self.gamma, Schedule::FixedP),
        }
    }

    fn true_beta<R: Rng + ?Sized>(&self, dims: &Dimensions, rng: &mut R) -> Vec<f64> {
        let mut beta = vec![0.0; dims.r()];
        let active = dims.p0 * dims.group_size;
        match &self.beta {
            BetaRule::Standard if self.structure.is_grouped() => {
                for (dst, src) in beta.iter_mut().zip(STANDARD_GROUPED_BETA.iter().flatten()) {
                    *dst = *src;
                }
            }
            BetaRule::Standard => beta[..STANDARD_BETA.len()].copy_from_slice(&STANDARD_BETA),
            BetaRule::Fixed { values } => beta[..active].copy_from_slice(values),
            BetaRule::RandomNormal { variance } => {
                let dist = Normal::new(0.0, variance.sqrt()).expect("validated");
                for b in &mut beta[..active] {
                    *b = rng.sample(dist);
                }
            }
            BetaRule::Signal { v } => beta[0] = v * 1e-2,
        }
        beta
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// One generated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub design: GroupedDesign,
    pub y: DVector<f64>,
    pub beta0: GroupedCoefficients,
    /// Groups with a nonzero true block.
    pub active: ActiveSet,
    /// Draws rejected for a near-singular Gram matrix.
    pub regenerations: u64,
}

/// Draws replication `replication` of the scenario.
///
/// Draws whose Gram matrix has smallest eigenvalue below the degeneracy
/// threshold are discarded and redrawn from the next attempt stream.
pub fn generate(spec: &ScenarioSpec, replication: u64) -> Result<Sample> {
    spec.validate()?;
    let dims = spec.dimensions()?;
    let groups = spec.groups()?;
    if replication >= 1 << ((64 - ATTEMPT_BITS) - 1) {
        return Err(Error::spec(format!("replication index {replication} too large")));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream(spec.seed, (replication << ATTEMPT_BITS) | attempt);
        let beta = spec.true_beta(&dims, &mut rng);
        let x = DMatrix::from_fn(dims.n, dims.r(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let eps = DVector::from_fn(dims.n, |_, _| spec.error.sample(&mut rng));
        let design = GroupedDesign::new(x, groups.clone())?;
        let min_eigen = eigen_range(&gram(&design)).map_or(f64::NAN, |(lo, _)| lo);
        if !(min_eigen >= DEGENERATE_EIGEN) {
            log::debug!("replication {replication} attempt {attempt}: min eigenvalue {min_eigen:e}, redrawing");
            continue;
        }
        let beta0 = GroupedCoefficients::new(DVector::from_vec(beta), groups.clone())?;
        let y = design.predict(&beta0) + eps;
        let active = crate::design::active_set(&beta0, 0.0);
        return Ok(Sample {
            design,
            y,
            beta0,
            active,
            regenerations: attempt,
        });
    }
    Err(Error::DegenerateSample(format!(
        "replication {replication}: no well-conditioned design in {MAX_ATTEMPTS} draws"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub solver: SolverOptions,
    /// Run replications on the rayon pool.
    pub parallel: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            parallel: true,
        }
    }
}

/// Per-replication audit record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub replication: u64,
    pub regenerations: u64,
    pub true_active: usize,
    pub selected: usize,
    /// `Card(A & A_hat)`
    pub true_nonzero: usize,
    /// `Card(A_hat \ A)`
    pub false_nonzero: usize,
    pub pct_true: f64,
    pub pct_false: f64,
    /// `p^-1 sum_j ||beta_hat_j - beta0_j||_1`
    pub mean_abs_all: f64,
    /// Same sum restricted to `j` in `A`, still divided by `p`.
    pub mean_abs_active: f64,
    pub pilot_converged: bool,
    pub converged: bool,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Estimated coefficients, flat.
    #[serde(skip)]
    pub beta_hat: Vec<f64>,
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

/// Fits one generated sample with the full pipeline.
pub fn replicate(
    spec: &ScenarioSpec,
    replication: u64,
    tau: f64,
    lambda: f64,
    config: &EstimatorConfig,
) -> Result<ReplicationRecord> {
    let sample = generate(spec, replication)?;
    let loss = LossSpec::new(tau, spec.q)?;
    let pilot = fit_unpenalized(&sample.design, &sample.y, &loss, &config.solver)?;
    let weights = adaptive_weights(&pilot.beta, spec.gamma, spec.weight_cap)?;
    let pen = PenaltySpec::new(lambda, spec.gamma, weights, spec.weight_cap.is_some())?;
    let fit = fit_penalized(&sample.design, &sample.y, &loss, &pen, &config.solver, Some(&pilot.beta))?;

    let p = sample.design.p();
    let groups = sample.design.groups();
    let mut abs_all = 0.0;
    let mut abs_active = 0.0;
    for j in 0..p {
        let err: f64 = groups
            .range(j)
            .map(|k| (fit.beta.as_slice()[k] - sample.beta0.as_slice()[k]).abs())
            .sum();
        abs_all += err;
        if sample.active.contains(j) {
            abs_active += err;
        }
    }
    let true_nonzero = fit.active.intersection_len(&sample.active);
    let false_nonzero = fit.active.difference_len(&sample.active);
    let p0 = sample.active.len();
    Ok(ReplicationRecord {
        replication,
        regenerations: sample.regenerations,
        true_active: p0,
        selected: fit.active.len(),
        true_nonzero,
        false_nonzero,
        pct_true: percent(true_nonzero, p0),
        pct_false: percent(false_nonzero, p - p0),
        mean_abs_all: abs_all / p as f64,
        mean_abs_active: abs_active / p as f64,
        pilot_converged: pilot.converged,
        converged: fit.converged,
        iterations: fit.iterations,
        kkt_residual: fit.kkt_residual,
        beta_hat: fit.beta.as_slice().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub dims: Dimensions,
    pub error: ErrorDist,
    pub gamma: f64,
    pub tau: f64,
    pub lambda: f64,
    pub replications: usize,
    pub mean_true_nonzero: f64,
    pub mean_false_nonzero: f64,
    pub pct_true: f64,
    pub pct_false: f64,
    pub mean_abs_all: f64,
    pub mean_abs_active: f64,
    /// Replications where either fit stopped before its tolerances.
    pub nonconverged: usize,
    pub regenerations: u64,
    /// Some replication had no true nonzero or no true zero, so one of the
    /// percentages is reported as 0 by convention.
    pub degenerate: bool,
    pub records: Vec<ReplicationRecord>,
}

fn mean(values: impl Iterator<Item = f64>, m: usize) -> f64 {
    values.sum::<f64>() / m as f64
}

impl SimulationReport {
    fn aggregate(spec: &ScenarioSpec, dims: Dimensions, tau: f64, lambda: f64, records: Vec<ReplicationRecord>) -> Self {
        let m = records.len();
        Self {
            scenario: spec.name.clone(),
            dims,
            error: spec.error,
            gamma: spec.gamma,
            tau,
            lambda,
            replications: m,
            mean_true_nonzero: mean(records.iter().map(|r| r.true_nonzero as f64), m),
            mean_false_nonzero: mean(records.iter().map(|r| r.false_nonzero as f64), m),
            pct_true: mean(records.iter().map(|r| r.pct_true), m),
            pct_false: mean(records.iter().map(|r| r.pct_false), m),
            mean_abs_all: mean(records.iter().map(|r| r.mean_abs_all), m),
            mean_abs_active: mean(records.iter().map(|r| r.mean_abs_active), m),
            nonconverged: records.iter().filter(|r| !(r.converged && r.pilot_converged)).count(),
            regenerations: records.iter().map(|r| r.regenerations).sum(),
            degenerate: records.iter().any(|r| r.true_active == 0 || r.true_active == dims.p),
            records,
        }
    }
}

/// Runs `m` replications of the scenario.
pub fn run(spec: &ScenarioSpec, m: usize, config: &EstimatorConfig) -> Result<SimulationReport> {
    let tau = spec.scenario_tau()?;
    run_with_tau(spec, m, tau, config)
}

fn run_with_tau(spec: &ScenarioSpec, m: usize, tau: f64, config: &EstimatorConfig) -> Result<SimulationReport> {
    if m == 0 {
        return Err(Error::spec("at least one replication is required"));
    }
    spec.validate()?;
    config.solver.validate()?;
    let dims = spec.dimensions()?;
    let lambda = spec.scenario_lambda()?;
    let one = |rep: usize| replicate(spec, rep as u64, tau, lambda, config);
    let records: Result<Vec<_>> = if config.parallel {
        (0..m).into_par_iter().map(one).collect()
    } else {
        (0..m).map(one).collect()
    };
    let report = SimulationReport::aggregate(spec, dims, tau, lambda, records?);
    if report.nonconverged > 0 {
        log::warn!(
            "{}: {} of {m} replications did not converge",
            spec.name,
            report.nonconverged
        );
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub parameter: &'static str,
    pub value: f64,
    pub report: SimulationReport,
}

/// Same scenario (and data) for every `gamma`.
pub fn gamma_sweep(spec: &ScenarioSpec, gammas: &[f64], m: usize, config: &EstimatorConfig) -> Result<Vec<SweepPoint>> {
    if gammas.is_empty() {
        return Err(Error::spec("empty gamma list"));
    }
    let tau = spec.scenario_tau()?;
    gammas
        .iter()
        .map(|&gamma| {
            let point = ScenarioSpec { gamma, ..spec.clone() };
            Ok(SweepPoint {
                parameter: "gamma",
                value: gamma,
                report: run_with_tau(&point, m, tau, config)?,
            })
        })
        .collect()
}

/// Smallest sweep value from which detection stays at or above a level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionThreshold {
    pub level: f64,
    pub v: f64,
    /// `||beta0||_2 = |v| / 100`
    pub beta_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalSweep {
    pub points: Vec<SweepPoint>,
    pub threshold_99: Option<DetectionThreshold>,
    pub threshold_95: Option<DetectionThreshold>,
}

fn detection_threshold(points: &[SweepPoint], level: f64) -> Option<DetectionThreshold> {
    let mut sorted: Vec<&SweepPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut best = None;
    for point in sorted.iter().rev() {
        if point.report.pct_true >= level && !point.report.degenerate {
            best = Some(point.value);
        } else {
            break;
        }
    }
    best.map(|v| DetectionThreshold {
        level,
        v,
        beta_norm: v.abs() * 1e-2,
    })
}

/// One active coefficient `v / 100`; `spec.beta` and `spec.p0` are replaced.
pub fn signal_sweep(spec: &ScenarioSpec, v_values: &[f64], m: usize, config: &EstimatorConfig) -> Result<SignalSweep> {
    if v_values.is_empty() {
        return Err(Error::spec("empty signal list"));
    }
    let tau = spec.scenario_tau()?;
    let points = v_values
        .iter()
        .map(|&v| {
            let point = ScenarioSpec {
                p0: SizeRule::Explicit(1),
                beta: BetaRule::Signal { v },
                ..spec.clone()
            };
            Ok(SweepPoint {
                parameter: "v",
                value: v,
                report: run_with_tau(&point, m, tau, config)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SignalSweep {
        threshold_99: detection_threshold(&points, 99.0),
        threshold_95: detection_threshold(&points, 95.0),
        points,
    })
}

/// One row of the summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub sweep_parameter: Option<&'static str>,
    pub sweep_value: Option<f64>,
    pub n: usize,
    pub p: usize,
    pub p0: usize,
    pub group_size: usize,
    pub error: &'static str,
    pub gamma: f64,
    pub tau: f64,
    pub lambda: f64,
    pub replications: usize,
    pub mean_true_nonzero: f64,
    pub mean_false_nonzero: f64,
    pub pct_true: f64,
    pub pct_false: f64,
    pub mean_abs_all: f64,
    pub mean_abs_active: f64,
    pub nonconverged: usize,
    pub regenerations: u64,
    pub degenerate: bool,
}

/// Column order of the summary CSV.
pub const SUMMARY_HEADER: [&str; 21] = [
    "scenario",
    "sweep_parameter",
    "sweep_value",
    "n",
    "p",
    "p0",
    "group_size",
    "error",
    "gamma",
    "tau",
    "lambda",
    "replications",
    "mean_true_nonzero",
    "mean_false_nonzero",
    "pct_true",
    "pct_false",
    "mean_abs_all",
    "mean_abs_active",
    "nonconverged",
    "regenerations",
    "degenerate",
];

impl SummaryRow {
    pub fn new(report: &SimulationReport, sweep: Option<(&'static str, f64)>) -> Self {
        Self {
            scenario: report.scenario.clone(),
            sweep_parameter: sweep.map(|s| s.0),
            sweep_value: sweep.map(|s| s.1),
            n: report.dims.n,
            p: report.dims.p,
            p0: report.dims.p0,
            group_size: report.dims.group_size,
            error: report.error.name(),
            gamma: report.gamma,
            tau: report.tau,
            lambda: report.lambda,
            replications: report.replications,
            mean_true_nonzero: report.mean_true_nonzero,
            mean_false_nonzero: report.mean_false_nonzero,
            pct_true: report.pct_true,
            pct_false: report.pct_false,
            mean_abs_all: report.mean_abs_all,
            mean_abs_active: report.mean_abs_active,
            nonconverged: report.nonconverged,
            regenerations: report.regenerations,
            degenerate: report.degenerate,
        }
    }
}

impl SweepPoint {
    pub fn summary(&self) -> SummaryRow {
        SummaryRow::new(&self.report, Some((self.parameter, self.value)))
    }
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

const AUDIT_HEADER: [&str; 17] = [
    "scenario",
    "sweep_value",
    "replication",
    "regenerations",
    "true_active",
    "selected",
    "true_nonzero",
    "false_nonzero",
    "pct_true",
    "pct_false",
    "mean_abs_all",
    "mean_abs_active",
    "pilot_converged",
    "converged",
    "iterations",
    "kkt_residual",
    "beta_hat",
];

/// Per-replication audit CSV, one row per record of every report.
/// `beta_hat` is `;`-joined.
pub fn write_audit<W: Write>(out: W, reports: &[(&SimulationReport, Option<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AUDIT_HEADER)?;
    for (report, sweep_value) in reports {
        for r in &report.records {
            let beta: Vec<String> = r.beta_hat.iter().map(f64::to_string).collect();
            w.write_record([
                report.scenario.clone(),
                sweep_value.map_or_else(String::new, |v| v.to_string()),
                r.replication.to_string(),
                r.regenerations.to_string(),
                r.true_active.to_string(),
                r.selected.to_string(),
                r.true_nonzero.to_string(),
                r.false_nonzero.to_string(),
                r.pct_true.to_string(),
                r.pct_false.to_string(),
                r.mean_abs_all.to_string(),
                r.mean_abs_active.to_string(),
                r.pilot_converged.to_string(),
                r.converged.to_string(),
                r.iterations.to_string(),
                r.kkt_residual.to_string(),
                beta.join(";"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

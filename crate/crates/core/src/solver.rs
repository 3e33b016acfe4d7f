//! Unpenalized and adaptive group-LASSO estimation under the asymmetric
//! L_q loss.
//!
//! The penalized objective is
//!
//! ```text
//! Q(beta) = n^-1 sum_i rho(y_i - x_i' beta) + lambda sum_j w_j ||beta_j||_2
//! ```
//!
//! Only the loss is scaled by `n^-1`. Since `g(eps) = -rho'(eps)`, the
//! gradient of the smooth part is `+n^-1 sum_i g(eps_i) x_i`, and a minimizer
//! satisfies, for every group with `beta_j != 0`,
//!
//! ```text
//! n^-1 sum_i g(eps_i) x_ij + lambda w_j beta_j / ||beta_j||_2 = 0
//! ```
//!
//! and `||n^-1 sum_i g(eps_i) x_ij||_2 <= lambda w_j` for zero groups.
//! [`kkt_residual`] measures the violation of these conditions.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::design::{
    active_set, eigen_range, gram, l2, ActiveSet, GroupSpec, GroupedCoefficients,
    GroupedDesign, DEGENERATE_EIGEN,
};
use crate::error::{Error, Result};
use crate::loss::{LossSpec, DEFAULT_H_FLOOR};

/// Smallest step accepted by the backtracking line search.
const MIN_STEP: f64 = 1e-30;

/// Per-group penalty weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GroupWeight {
    Finite(f64),
    /// Pilot estimate was exactly zero and no cap was given: the group is
    /// constrained to zero.
    Pinned,
    /// Not penalized (e.g. an intercept column).
    Free,
}

impl GroupWeight {
    fn threshold(&self, lambda: f64) -> Option<f64> {
        match *self {
            GroupWeight::Finite(w) => Some(lambda * w),
            GroupWeight::Free => Some(0.0),
            GroupWeight::Pinned => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltySpec {
    pub lambda: f64,
    pub gamma: f64,
    pub weights: Vec<GroupWeight>,
    pub cap_applied: bool,
}

impl PenaltySpec {
    pub fn new(lambda: f64, gamma: f64, weights: Vec<GroupWeight>, cap_applied: bool) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::spec(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if !(gamma > 0.0) {
            return Err(Error::spec(format!("gamma must be > 0, got {gamma}")));
        }
        for w in &weights {
            if let GroupWeight::Finite(v) = w {
                if !(*v > 0.0 && v.is_finite()) {
                    return Err(Error::spec(format!("weights must be finite and > 0, got {v}")));
                }
            }
        }
        Ok(Self {
            lambda,
            gamma,
            weights,
            cap_applied,
        })
    }

    /// Unit weights on `p` groups.
    pub fn uniform(lambda: f64, p: usize) -> Result<Self> {
        Self::new(lambda, 1.0, vec![GroupWeight::Finite(1.0); p], false)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(lambda, self.gamma, self.weights.clone(), self.cap_applied)
    }

    fn check(&self, groups: &GroupSpec) -> Result<()> {
        if self.weights.len() != groups.p() {
            return Err(Error::DimensionMismatch {
                what: "penalty weights",
                expected: groups.p(),
                found: self.weights.len(),
            });
        }
        Ok(())
    }

    /// `lambda sum_j w_j ||beta_j||_2`; infinite if a pinned group is nonzero.
    pub fn value(&self, beta: &GroupedCoefficients) -> f64 {
        let mut total = 0.0;
        for (j, w) in self.weights.iter().enumerate() {
            let norm = beta.group_norm(j);
            match *w {
                GroupWeight::Finite(w) => total += w * norm,
                GroupWeight::Free => {}
                GroupWeight::Pinned if norm > 0.0 => return f64::INFINITY,
                GroupWeight::Pinned => {}
            }
        }
        self.lambda * total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Relative objective decrease.
    pub tol_obj: f64,
    pub tol_kkt: f64,
    /// Initial and largest proximal-gradient step.
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub h_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            tol_obj: 1e-10,
            tol_kkt: 1e-6,
            step_init: 1.0,
            backtrack_factor: 0.5,
            h_floor: DEFAULT_H_FLOOR,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iter > 0
            && self.tol_obj > 0.0
            && self.tol_kkt > 0.0
            && self.step_init > 0.0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.h_floor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::spec(format!("invalid solver options: {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta: GroupedCoefficients,
    pub active: ActiveSet,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    /// Objective after each accepted iteration.
    pub trace: Vec<f64>,
}

/// Borrowed view of one estimation problem.
struct Problem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    groups: &'a GroupSpec,
    spec: LossSpec,
    n: f64,
}

impl<'a> Problem<'a> {
    fn new(design: &'a GroupedDesign, y: &'a DVector<f64>, spec: &LossSpec) -> Result<Self> {
        if y.len() != design.n() {
            return Err(Error::DimensionMismatch {
                what: "response",
                expected: design.n(),
                found: y.len(),
            });
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "response",
                value: *v,
            });
        }
        Ok(Self {
            x: design.x(),
            y,
            groups: design.groups(),
            spec: *spec,
            n: design.n() as f64,
        })
    }

    fn check_beta(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.groups.r() {
            return Err(Error::DimensionMismatch {
                what: "coefficient vector",
                expected: self.groups.r(),
                found: beta.len(),
            });
        }
        Ok(())
    }

    fn residuals(&self, beta: &DVector<f64>) -> DVector<f64> {
        self.y - self.x * beta
    }

    /// `n^-1 sum rho(eps_i)`.
    fn smooth(&self, beta: &DVector<f64>) -> f64 {
        self.residuals(beta)
            .iter()
            .map(|&e| self.spec.value(e))
            .sum::<f64>()
            / self.n
    }

    fn smooth_and_gradient(&self, beta: &DVector<f64>) -> (f64, DVector<f64>) {
        let eps = self.residuals(beta);
        let value = eps.iter().map(|&e| self.spec.value(e)).sum::<f64>() / self.n;
        let scores = eps.map(|e| self.spec.score(e));
        (value, self.x.tr_mul(&scores) / self.n)
    }

    fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        self.smooth_and_gradient(beta).1
    }

    fn coefficients(&self, beta: DVector<f64>) -> GroupedCoefficients {
        GroupedCoefficients::new(beta, self.groups.clone()).expect("length checked")
    }
}

/// `G_n(beta) = sum_i rho(y_i - x_i' beta)`.
pub fn objective_unpenalized(
    design: &GroupedDesign,
    y: &DVector<f64>,
    beta: &GroupedCoefficients,
    spec: &LossSpec,
) -> Result<f64> {
    let prob = Problem::new(design, y, spec)?;
    prob.check_beta(beta.as_vector())?;
    Ok(prob.smooth(beta.as_vector()) * prob.n)
}

/// `Q_n(beta) = n^-1 G_n(beta) + lambda sum_j w_j ||beta_j||_2`.
pub fn objective_penalized(
    design: &GroupedDesign,
    y: &DVector<f64>,
    beta: &GroupedCoefficients,
    spec: &LossSpec,
    pen: &PenaltySpec,
) -> Result<f64> {
    let prob = Problem::new(design, y, spec)?;
    prob.check_beta(beta.as_vector())?;
    pen.check(design.groups())?;
    Ok(prob.smooth(beta.as_vector()) + pen.value(beta))
}

/// Gradient of `n^-1 G_n` at `beta`, i.e. `n^-1 sum_i g(eps_i) x_i`.
pub fn smooth_gradient(
    design: &GroupedDesign,
    y: &DVector<f64>,
    beta: &GroupedCoefficients,
    spec: &LossSpec,
) -> Result<DVector<f64>> {
    let prob = Problem::new(design, y, spec)?;
    prob.check_beta(beta.as_vector())?;
    Ok(prob.gradient(beta.as_vector()))
}

fn check_gram(design: &GroupedDesign) -> Result<()> {
    let min_eigen = eigen_range(&gram(design)).map_or(f64::NAN, |(lo, _)| lo);
    if !(min_eigen > DEGENERATE_EIGEN) {
        return Err(Error::IllConditioned { min_eigen });
    }
    Ok(())
}

/// Unpenalized L_q-quantile estimator `argmin G_n(beta)`.
///
/// Damped Newton iterations started from the least-squares fit. For `q = 2`
/// the Newton step is exactly the iteratively reweighted least-squares
/// update: a weighted normal system with weight `tau` or `1 - tau` by
/// residual sign. A backtracking line search guards every step and falls
/// back to a gradient step when the Newton direction does not decrease the
/// loss. Convergence means `||n^-1 sum g(eps_i) x_i||_2 <= tol_kkt`.
pub fn fit_unpenalized(
    design: &GroupedDesign,
    y: &DVector<f64>,
    spec: &LossSpec,
    opts: &SolverOptions,
) -> Result<FitResult> {
    opts.validate()?;
    let prob = Problem::new(design, y, spec)?;
    if design.n() < design.r() {
        log::warn!(
            "fewer observations ({}) than coefficients ({}); the unpenalized fit is not unique",
            design.n(),
            design.r()
        );
    }
    check_gram(design)?;

    let x = prob.x;
    let chol = x.tr_mul(x).cholesky().ok_or_else(|| Error::IllConditioned {
        min_eigen: eigen_range(&gram(design)).map_or(f64::NAN, |(lo, _)| lo),
    })?;
    let mut beta = chol.solve(&x.tr_mul(prob.y));

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut step = opts.step_init;
    let (mut value, mut grad) = prob.smooth_and_gradient(&beta);

    while iterations < opts.max_iter {
        if grad.norm() <= opts.tol_kkt {
            converged = true;
            break;
        }
        iterations += 1;
        let eps = prob.residuals(&beta);
        let curv = eps.map(|e| spec.curvature(e, opts.h_floor) / prob.n);
        let mut hess = x.tr_mul(&DMatrix::from_fn(x.nrows(), x.ncols(), |i, k| {
            x[(i, k)] * curv[i]
        }));
        crate::design::symmetrize(&mut hess);

        let slack = 8.0 * f64::EPSILON * value.abs().max(f64::MIN_POSITIVE);
        let mut next = None;
        if let Some(hchol) = hess.cholesky() {
            let dir = -hchol.solve(&grad);
            let slope = grad.dot(&dir);
            let mut alpha = 1.0;
            while alpha > 1e-12 {
                let cand = &beta + &dir * alpha;
                let v = prob.smooth(&cand);
                if v <= value + 1e-4 * alpha * slope + slack {
                    next = Some((cand, v));
                    break;
                }
                alpha *= opts.backtrack_factor;
            }
        }
        if next.is_none() {
            // gradient fallback
            let gnorm2 = grad.norm_squared();
            while step > MIN_STEP {
                let cand = &beta - &grad * step;
                let v = prob.smooth(&cand);
                if v <= value - 0.5 * step * gnorm2 + slack {
                    next = Some((cand, v));
                    break;
                }
                step *= opts.backtrack_factor;
            }
        }
        match next {
            Some((cand, v)) => {
                let stalled = v >= value && (&cand - &beta).amax() == 0.0;
                beta = cand;
                let (nv, ng) = prob.smooth_and_gradient(&beta);
                value = nv;
                grad = ng;
                trace.push(value);
                if stalled {
                    break;
                }
            }
            None => break,
        }
    }
    if !converged && grad.norm() <= opts.tol_kkt {
        converged = true;
    }

    let beta = prob.coefficients(beta);
    Ok(FitResult {
        active: active_set(&beta, 0.0),
        objective: value,
        iterations,
        kkt_residual: grad.norm(),
        converged,
        trace,
        beta,
    })
}

/// Adaptive weights `||beta_tilde_j||_2^-gamma`, optionally capped.
///
/// A zero pilot group gets the cap when one is given and is pinned to zero
/// otherwise.
pub fn adaptive_weights(
    beta_tilde: &GroupedCoefficients,
    gamma: f64,
    cap: Option<f64>,
) -> Result<Vec<GroupWeight>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::spec(format!("gamma must be finite and > 0, got {gamma}")));
    }
    if let Some(c) = cap {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::spec(format!("weight cap must be finite and > 0, got {c}")));
        }
    }
    Ok(beta_tilde
        .group_norms()
        .into_iter()
        .map(|norm| {
            let w = norm.powf(-gamma);
            let w = match cap {
                Some(c) => w.min(c),
                None => w,
            };
            if w.is_finite() {
                GroupWeight::Finite(w)
            } else {
                GroupWeight::Pinned
            }
        })
        .collect())
}

/// Proximal map of `threshold * ||.||_2`: `max(0, 1 - threshold/||v||) v`.
pub fn group_prox(v: &[f64], threshold: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    group_prox_in_place(&mut out, threshold);
    out
}

fn group_prox_in_place(v: &mut [f64], threshold: f64) {
    debug_assert!(threshold >= 0.0);
    if threshold == 0.0 {
        return;
    }
    let norm = l2(v);
    if norm <= threshold {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        let scale = 1.0 - threshold / norm;
        v.iter_mut().for_each(|x| *x *= scale);
    }
}

fn prox_all(beta: &mut DVector<f64>, groups: &GroupSpec, pen: &PenaltySpec, step: f64) {
    let slice = beta.as_mut_slice();
    for (j, w) in pen.weights.iter().enumerate() {
        let block = &mut slice[groups.range(j)];
        match w.threshold(pen.lambda) {
            Some(t) => group_prox_in_place(block, step * t),
            None => block.iter_mut().for_each(|x| *x = 0.0),
        }
    }
}

/// One proximal-gradient step of length `step` from `beta`.
pub fn proximal_step(
    design: &GroupedDesign,
    y: &DVector<f64>,
    beta: &GroupedCoefficients,
    spec: &LossSpec,
    pen: &PenaltySpec,
    step: f64,
) -> Result<GroupedCoefficients> {
    let prob = Problem::new(design, y, spec)?;
    prob.check_beta(beta.as_vector())?;
    pen.check(design.groups())?;
    let mut next = beta.as_vector() - prob.gradient(beta.as_vector()) * step;
    prox_all(&mut next, prob.groups, pen, step);
    Ok(prob.coefficients(next))
}

/// Smallest `lambda` for which `beta = 0` is optimal:
/// `max_j ||n^-1 sum_i g(y_i) x_ij||_2 / w_j` over finite-weight groups.
/// Free groups are ignored.
pub fn lambda_max(
    design: &GroupedDesign,
    y: &DVector<f64>,
    spec: &LossSpec,
    weights: &[GroupWeight],
) -> Result<f64> {
    let prob = Problem::new(design, y, spec)?;
    if weights.len() != design.p() {
        return Err(Error::DimensionMismatch {
            what: "penalty weights",
            expected: design.p(),
            found: weights.len(),
        });
    }
    let grad = prob.gradient(&DVector::zeros(design.r()));
    let groups = design.groups();
    Ok(weights
        .iter()
        .enumerate()
        .filter_map(|(j, w)| match w {
            GroupWeight::Finite(w) => Some(l2(&grad.as_slice()[groups.range(j)]) / w),
            _ => None,
        })
        .fold(0.0, f64::max))
}

fn kkt_from_gradient(
    grad: &DVector<f64>,
    beta: &DVector<f64>,
    groups: &GroupSpec,
    pen: &PenaltySpec,
) -> f64 {
    let mut worst = 0.0f64;
    for (j, w) in pen.weights.iter().enumerate() {
        let range = groups.range(j);
        let gj = &grad.as_slice()[range.clone()];
        let bj = &beta.as_slice()[range];
        let norm = l2(bj);
        let violation = match *w {
            GroupWeight::Pinned => 0.0,
            GroupWeight::Free => l2(gj),
            GroupWeight::Finite(w) => {
                let t = pen.lambda * w;
                if norm > 0.0 {
                    gj.iter()
                        .zip(bj)
                        .map(|(g, b)| {
                            let d = g + t * b / norm;
                            d * d
                        })
                        .sum::<f64>()
                        .sqrt()
                } else {
                    (l2(gj) - t).max(0.0)
                }
            }
        };
        worst = worst.max(violation);
    }
    worst
}

/// Largest group-wise violation of the optimality conditions (see the
/// module docs).
pub fn kkt_residual(
    design: &GroupedDesign,
    y: &DVector<f64>,
    beta: &GroupedCoefficients,
    spec: &LossSpec,
    pen: &PenaltySpec,
) -> Result<f64> {
    let prob = Problem::new(design, y, spec)?;
    prob.check_beta(beta.as_vector())?;
    pen.check(design.groups())?;
    let grad = prob.gradient(beta.as_vector());
    Ok(kkt_from_gradient(&grad, beta.as_vector(), design.groups(), pen))
}

/// Adaptive group-LASSO estimator `argmin Q_n(beta)`.
///
/// Accelerated proximal gradient with backtracking on the smooth part. An
/// iterate is only accepted if it does not increase `Q_n`; otherwise the
/// momentum is reset and the next step is a plain proximal-gradient step
/// from the last accepted point. Stops once the relative decrease is at most
/// `tol_obj` and the KKT residual is at most `tol_kkt`.
pub fn fit_penalized(
    design: &GroupedDesign,
    y: &DVector<f64>,
    spec: &LossSpec,
    pen: &PenaltySpec,
    opts: &SolverOptions,
    warm_start: Option<&GroupedCoefficients>,
) -> Result<FitResult> {
    opts.validate()?;
    let prob = Problem::new(design, y, spec)?;
    pen.check(design.groups())?;
    let groups = design.groups();

    let mut x = match warm_start {
        Some(b) => {
            prob.check_beta(b.as_vector())?;
            b.as_vector().clone()
        }
        None => DVector::zeros(design.r()),
    };
    // pinned groups start (and stay) at zero
    prox_all(&mut x, groups, pen, 0.0);

    let penalty = |b: &DVector<f64>| pen.value(&prob.coefficients(b.clone()));
    let mut obj = prob.smooth(&x) + penalty(&x);
    let mut y_pt = x.clone();
    let mut theta = 1.0f64;
    let mut step = opts.step_init;
    let mut trace = vec![obj];
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let (f_y, g_y) = prob.smooth_and_gradient(&y_pt);
        let slack = 8.0 * f64::EPSILON * f_y.abs().max(f64::MIN_POSITIVE);

        let (z, f_z) = loop {
            let mut z = &y_pt - &g_y * step;
            prox_all(&mut z, groups, pen, step);
            let d = &z - &y_pt;
            let f_z = prob.smooth(&z);
            let model = f_y + g_y.dot(&d) + d.norm_squared() / (2.0 * step);
            // a NaN objective (overflow) fails the test and shrinks the step
            if f_z <= model {
                break (z, f_z);
            }
            // within rounding of the model the values are uninformative;
            // fall back to a local Lipschitz check on the gradient
            if f_z <= model + slack && (prob.gradient(&z) - &g_y).norm() * step <= d.norm() {
                break (z, f_z);
            }
            step *= opts.backtrack_factor;
            if step < MIN_STEP {
                return Err(Error::StepUnderflow {
                    iteration: iterations,
                });
            }
        };

        let obj_z = f_z + penalty(&z);
        // differences below rounding level are not evidence of ascent
        let obj_slack = 8.0 * f64::EPSILON * obj.abs().max(f64::MIN_POSITIVE);
        let decrease = if obj_z <= obj + obj_slack {
            // gradient restart: drop momentum once it points uphill; unlike
            // the objective test this still works below rounding level
            if (&y_pt - &z).dot(&(&z - &x)) > 0.0 {
                theta = 1.0;
                y_pt = z.clone();
            } else {
                let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
                let momentum = (theta - 1.0) / theta_next;
                y_pt = &z + (&z - &x) * momentum;
                theta = theta_next;
            }
            let dec = ((obj - obj_z) / obj.abs().max(f64::MIN_POSITIVE)).max(0.0);
            x = z;
            obj = obj_z.min(obj);
            trace.push(obj);
            dec
        } else {
            // restart from the last accepted point
            y_pt = x.clone();
            theta = 1.0;
            0.0
        };

        if decrease <= opts.tol_obj {
            kkt = kkt_from_gradient(&prob.gradient(&x), &x, groups, pen);
            if kkt <= opts.tol_kkt {
                converged = true;
                break;
            }
        }
        // let the step recover after conservative backtracks
        step = (step / opts.backtrack_factor.powf(0.25)).min(opts.step_init);
    }

    if !converged {
        kkt = kkt_from_gradient(&prob.gradient(&x), &x, groups, pen);
        log::debug!("fit_penalized stopped after {iterations} iterations (kkt {kkt:.3e})");
    }
    let beta = prob.coefficients(x);
    let objective = prob.smooth(beta.as_vector()) + pen.value(&beta);
    Ok(FitResult {
        active: active_set(&beta, 0.0),
        objective,
        iterations,
        kkt_residual: kkt,
        converged,
        trace,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn instance(n: usize, sizes: Vec<usize>, seed: u64) -> (GroupedDesign, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups = GroupSpec::new(sizes).unwrap();
        let x = DMatrix::from_fn(n, groups.r(), |_, _| rng.sample(StandardNormal));
        let beta: Vec<f64> = (0..groups.r()).map(|k| if k % 2 == 0 { 1.5 } else { 0.0 }).collect();
        let y = &x * DVector::from_vec(beta) + DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        (GroupedDesign::new(x, groups).unwrap(), y)
    }

    #[test]
    fn group_prox_examples() {
        assert_eq!(group_prox(&[3.0, 4.0], 5.0), vec![0.0, 0.0]);
        assert_eq!(group_prox(&[3.0, 4.0], 2.5), vec![1.5, 2.0]);
        assert_eq!(group_prox(&[3.0, -4.0], 0.0), vec![3.0, -4.0]);
    }

    #[test]
    fn adaptive_weights_examples() {
        let b = GroupedCoefficients::from_blocks(&[vec![1.0], vec![0.0, -1.0]]).unwrap();
        for gamma in [0.3, 1.0, 2.5] {
            let w = adaptive_weights(&b, gamma, None).unwrap();
            assert_eq!(w, vec![GroupWeight::Finite(1.0); 2]);
        }
        let b = GroupedCoefficients::from_blocks(&[vec![4.0]]).unwrap();
        assert_eq!(adaptive_weights(&b, 0.5, None).unwrap(), vec![GroupWeight::Finite(0.5)]);
        let b = GroupedCoefficients::from_blocks(&[vec![0.01]]).unwrap();
        let w = adaptive_weights(&b, 1.0, Some(10.0)).unwrap();
        assert_eq!(w, vec![GroupWeight::Finite(10.0)]);
    }

    #[test]
    fn adaptive_weights_zero_group() {
        let b = GroupedCoefficients::from_blocks(&[vec![0.0, 0.0], vec![2.0]]).unwrap();
        let w = adaptive_weights(&b, 1.0, None).unwrap();
        assert_eq!(w[0], GroupWeight::Pinned);
        let w = adaptive_weights(&b, 1.0, Some(7.0)).unwrap();
        assert_eq!(w[0], GroupWeight::Finite(7.0));
        assert!(adaptive_weights(&b, 0.0, None).is_err());
        assert!(adaptive_weights(&b, -1.0, None).is_err());
    }

    #[test]
    fn objective_examples() {
        let spec = LossSpec::new(0.5, 2.0).unwrap();
        let d = GroupedDesign::new(DMatrix::from_element(1, 1, 1.0), GroupSpec::singletons(1)).unwrap();
        let y = DVector::from_element(1, 2.0);
        let zero = GroupedCoefficients::zeros(GroupSpec::singletons(1));
        assert_eq!(objective_unpenalized(&d, &y, &zero, &spec).unwrap(), 2.0);

        let (d, y) = instance(30, vec![1, 2, 1], 4);
        let zero = GroupedCoefficients::zeros(d.groups().clone());
        let pen = PenaltySpec::uniform(3.0, 3).unwrap();
        let direct: f64 = y.iter().map(|v| spec.value(*v)).sum::<f64>() / 30.0;
        assert_eq!(objective_penalized(&d, &y, &zero, &spec, &pen).unwrap(), direct);

        let bad = DVector::zeros(29);
        assert!(matches!(
            objective_unpenalized(&d, &bad, &zero, &spec),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn noiseless_response_recovers_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let groups = GroupSpec::new(vec![2, 1, 2]).unwrap();
        let x = DMatrix::from_fn(40, 5, |_, _| rng.sample(StandardNormal));
        let truth = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 3.0]);
        let y = &x * &truth;
        let d = GroupedDesign::new(x, groups).unwrap();
        for (tau, q) in [(0.5, 2.0), (0.2, 2.0), (0.7, 1.5), (0.4, 3.0)] {
            let spec = LossSpec::new(tau, q).unwrap();
            let fit = fit_unpenalized(&d, &y, &spec, &SolverOptions::default()).unwrap();
            assert!(fit.converged, "tau={tau} q={q}");
            assert!((fit.beta.as_vector() - &truth).amax() < 1e-8, "tau={tau} q={q}");
        }
    }

    #[test]
    fn unpenalized_converges_for_general_q() {
        let (d, y) = instance(80, vec![1, 1, 2, 1], 6);
        for (tau, q) in [(0.3, 1.5), (0.7, 1.2), (0.5, 3.0), (0.2, 4.0)] {
            let spec = LossSpec::new(tau, q).unwrap();
            let fit = fit_unpenalized(&d, &y, &spec, &SolverOptions::default()).unwrap();
            assert!(fit.converged, "tau={tau} q={q}: kkt {}", fit.kkt_residual);
            assert!(fit.kkt_residual <= 1e-6);
        }
    }

    #[test]
    fn unpenalized_rejects_singular_design() {
        let mut x = DMatrix::from_fn(10, 2, |i, _| i as f64);
        x[(0, 0)] = 0.0;
        let d = GroupedDesign::new(x, GroupSpec::singletons(2)).unwrap();
        let y = DVector::from_fn(10, |i, _| i as f64);
        let spec = LossSpec::new(0.5, 2.0).unwrap();
        assert!(matches!(
            fit_unpenalized(&d, &y, &spec, &SolverOptions::default()),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn pinned_groups_stay_zero() {
        let (d, y) = instance(60, vec![1, 1, 1, 1], 8);
        let spec = LossSpec::new(0.5, 2.0).unwrap();
        let weights = vec![
            GroupWeight::Finite(1.0),
            GroupWeight::Pinned,
            GroupWeight::Finite(1.0),
            GroupWeight::Finite(1.0),
        ];
        let pen = PenaltySpec::new(0.01, 1.0, weights, false).unwrap();
        let warm = GroupedCoefficients::new(DVector::from_element(4, 1.0), d.groups().clone()).unwrap();
        let fit = fit_penalized(&d, &y, &spec, &pen, &SolverOptions::default(), Some(&warm)).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.beta.group(1), &[0.0]);
        assert!(!fit.active.contains(1));
    }

    #[test]
    fn free_group_is_not_shrunk() {
        let (d, y) = instance(60, vec![1, 1, 1], 9);
        let spec = LossSpec::new(0.5, 2.0).unwrap();
        let weights = vec![GroupWeight::Free, GroupWeight::Finite(1.0), GroupWeight::Finite(1.0)];
        let pen = PenaltySpec::new(100.0, 1.0, weights, false).unwrap();
        let fit = fit_penalized(&d, &y, &spec, &pen, &SolverOptions::default(), None).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.active.indices(), &[0]);
        // the free coordinate is the 1-d least-squares fit on its own column
        let col = d.x().column(0);
        let ls = col.dot(&y) / col.dot(&col);
        assert_relative_eq!(fit.beta.group(0)[0], ls, epsilon = 1e-6);
    }

    #[test]
    fn objective_matches_recomputation_and_descends() {
        let (d, y) = instance(70, vec![2, 2, 1, 3], 10);
        for (tau, q) in [(0.5, 2.0), (0.3, 1.5), (0.6, 3.0)] {
            let spec = LossSpec::new(tau, q).unwrap();
            let pilot = fit_unpenalized(&d, &y, &spec, &SolverOptions::default()).unwrap();
            let w = adaptive_weights(&pilot.beta, 1.0, None).unwrap();
            let pen = PenaltySpec::new(0.05, 1.0, w, false).unwrap();
            let fit = fit_penalized(&d, &y, &spec, &pen, &SolverOptions::default(), None).unwrap();
            assert!(fit.converged, "tau={tau} q={q}");
            let again = objective_penalized(&d, &y, &fit.beta, &spec, &pen).unwrap();
            assert!((fit.objective - again).abs() <= 1e-10 * again.abs());
            assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
            assert!(fit.kkt_residual <= 1e-6);
        }
    }

    #[test]
    fn step_underflow_is_reported() {
        // curvature ~ 12 |y|^2 ~ 1e81 needs a step far below the floor
        let (d, y) = instance(20, vec![1, 1], 11);
        let y = y * 1e40;
        let spec = LossSpec::new(0.5, 4.0).unwrap();
        let pen = PenaltySpec::uniform(0.0, 2).unwrap();
        assert!(matches!(
            fit_penalized(&d, &y, &spec, &pen, &SolverOptions::default(), None),
            Err(Error::StepUnderflow { .. })
        ));
    }

    #[test]
    fn non_convergence_is_flagged() {
        let (d, y) = instance(50, vec![1, 1, 1], 12);
        let spec = LossSpec::new(0.5, 2.0).unwrap();
        let pen = PenaltySpec::uniform(0.01, 3).unwrap();
        let opts = SolverOptions {
            max_iter: 2,
            ..SolverOptions::default()
        };
        let fit = fit_penalized(&d, &y, &spec, &pen, &opts, None).unwrap();
        assert!(!fit.converged);
        assert!(fit.kkt_residual > opts.tol_kkt);
    }

    #[test]
    fn options_validation() {
        let bad = SolverOptions {
            backtrack_factor: 1.0,
            ..SolverOptions::default()
        };
        assert!(bad.validate().is_err());
        assert!(PenaltySpec::new(-1.0, 1.0, vec![], false).is_err());
        assert!(PenaltySpec::new(1.0, 1.0, vec![GroupWeight::Finite(0.0)], false).is_err());
    }
}

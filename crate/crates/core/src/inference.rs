//! Plug-in asymptotic covariance of the active-group coefficients.
//!
//! ```text
//! Cov(beta_A) ~ (sigma2_g / mu_h^2) * U_{n,A}^-1 / n
//! ```
//!
//! with `sigma2_g`, `mu_h` estimated from the fitted residuals and
//! `U_{n,A}` the Gram matrix restricted to the active columns. Selection
//! randomness is ignored.

use nalgebra::{DMatrix, DVector};

use crate::design::{eigen_range, gram, symmetrize, ActiveSet, GroupedDesign};
use crate::error::{Error, Result};
use crate::loss::{empirical_moments_with_floor, LossMoments, LossSpec, DEFAULT_H_FLOOR};
use crate::solver::FitResult;

#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub moments: LossMoments,
    pub sigma2_over_mu2: f64,
    /// Covariance of the active coefficients, ordered like `columns`.
    pub cov: DMatrix<f64>,
    pub active: ActiveSet,
    /// Design columns of the active groups.
    pub columns: Vec<usize>,
}

impl CovarianceEstimate {
    pub fn std_errors(&self) -> Vec<f64> {
        self.cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    /// Standard error of design column `k`, if it is active.
    pub fn std_error_of(&self, k: usize) -> Option<f64> {
        self.columns
            .iter()
            .position(|&c| c == k)
            .map(|i| self.cov[(i, i)].max(0.0).sqrt())
    }
}

pub fn sandwich_covariance(
    design: &GroupedDesign,
    y: &DVector<f64>,
    fit: &FitResult,
    spec: &LossSpec,
) -> Result<CovarianceEstimate> {
    if fit.active.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    if y.len() != design.n() {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: design.n(),
            found: y.len(),
        });
    }
    let residuals = y - design.predict(&fit.beta);
    let moments = empirical_moments_with_floor(residuals.as_slice(), spec, DEFAULT_H_FLOOR)?;
    if !(moments.mu_h > 0.0) {
        return Err(Error::DegenerateSample("mean curvature is zero".into()));
    }
    let ratio = moments.variance_ratio();

    let groups = design.groups();
    let columns: Vec<usize> = fit
        .active
        .indices()
        .iter()
        .flat_map(|&j| groups.range(j))
        .collect();
    let u = gram(design);
    let u_active = u.select_rows(columns.iter()).select_columns(columns.iter());
    let chol = u_active.clone().cholesky().ok_or_else(|| Error::RankDeficient {
        min_eigen: eigen_range(&u_active).map_or(f64::NAN, |(lo, _)| lo),
    })?;
    let mut cov = chol.inverse() * (ratio / design.n() as f64);
    symmetrize(&mut cov);

    Ok(CovarianceEstimate {
        moments,
        sigma2_over_mu2: ratio,
        cov,
        active: fit.active.clone(),
        columns,
    })
}

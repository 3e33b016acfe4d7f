//! Grouped design matrices and group bookkeeping.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Zero-group threshold for coefficients that did not come out of the
/// proximal solver (which produces exact zeros).
pub const EXTERNAL_ZERO_THRESHOLD: f64 = 1e-8;

/// Gram eigenvalues at or below this are flagged as degenerate.
pub const DEGENERATE_EIGEN: f64 = 1e-10;

/// Partition of `r` columns into `p` contiguous groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl GroupSpec {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if let Some(j) = sizes.iter().position(|&d| d == 0) {
            return Err(Error::spec(format!("group {j} has size 0")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &d in &sizes {
            acc += d;
            offsets.push(acc);
        }
        Ok(Self { sizes, offsets })
    }

    /// `p` groups of one column each.
    pub fn singletons(p: usize) -> Self {
        Self::uniform(p, 1)
    }

    pub fn uniform(p: usize, d: usize) -> Self {
        assert!(d > 0, "group size must be positive");
        Self::new(vec![d; p]).expect("positive sizes")
    }

    pub fn p(&self) -> usize {
        self.sizes.len()
    }

    pub fn r(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, j: usize) -> usize {
        self.sizes[j]
    }

    pub fn range(&self, j: usize) -> Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    /// Group owning column `k`.
    pub fn group_of(&self, k: usize) -> usize {
        debug_assert!(k < self.r());
        self.offsets.partition_point(|&o| o <= k) - 1
    }

    /// Groups reordered so that new group `i` is old group `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::new(perm.iter().map(|&j| self.sizes[j]).collect()).expect("positive sizes")
    }

    /// Column order induced by a group permutation.
    pub fn column_permutation(&self, perm: &[usize]) -> Vec<usize> {
        perm.iter().flat_map(|&j| self.range(j)).collect()
    }
}

/// `n x r` covariate matrix with its column grouping. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDesign {
    x: DMatrix<f64>,
    groups: GroupSpec,
}

impl GroupedDesign {
    pub fn new(x: DMatrix<f64>, groups: GroupSpec) -> Result<Self> {
        if x.ncols() != groups.r() {
            return Err(Error::DimensionMismatch {
                what: "design columns",
                expected: groups.r(),
                found: x.ncols(),
            });
        }
        if x.nrows() == 0 {
            return Err(Error::spec("design has no rows"));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "design entry",
                value: *v,
            });
        }
        Ok(Self { x, groups })
    }

    pub fn from_rows(rows: &[Vec<f64>], groups: GroupSpec) -> Result<Self> {
        let n = rows.len();
        let r = groups.r();
        if let Some(bad) = rows.iter().find(|row| row.len() != r) {
            return Err(Error::DimensionMismatch {
                what: "design row",
                expected: r,
                found: bad.len(),
            });
        }
        let x = DMatrix::from_fn(n, r, |i, k| rows[i][k]);
        Self::new(x, groups)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn groups(&self) -> &GroupSpec {
        &self.groups
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn r(&self) -> usize {
        self.x.ncols()
    }

    pub fn p(&self) -> usize {
        self.groups.p()
    }

    /// Same data with groups reordered (see [`GroupSpec::permuted`]).
    pub fn permute_groups(&self, perm: &[usize]) -> Self {
        let cols = self.groups.column_permutation(perm);
        let x = self.x.select_columns(cols.iter());
        Self {
            x,
            groups: self.groups.permuted(perm),
        }
    }

    /// Rows `rows` of the design.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(self.x.select_rows(rows.iter()), self.groups.clone())
    }

    pub fn predict(&self, beta: &GroupedCoefficients) -> DVector<f64> {
        &self.x * beta.as_vector()
    }
}

/// Coefficient vector partitioned like the design columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedCoefficients {
    beta: DVector<f64>,
    groups: GroupSpec,
}

impl GroupedCoefficients {
    pub fn new(beta: DVector<f64>, groups: GroupSpec) -> Result<Self> {
        if beta.len() != groups.r() {
            return Err(Error::DimensionMismatch {
                what: "coefficient vector",
                expected: groups.r(),
                found: beta.len(),
            });
        }
        Ok(Self { beta, groups })
    }

    pub fn zeros(groups: GroupSpec) -> Self {
        Self {
            beta: DVector::zeros(groups.r()),
            groups,
        }
    }

    /// Builds the vector from one block per group.
    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        let groups = GroupSpec::new(blocks.iter().map(Vec::len).collect())?;
        let flat: Vec<f64> = blocks.iter().flatten().copied().collect();
        Ok(Self {
            beta: DVector::from_vec(flat),
            groups,
        })
    }

    pub fn groups(&self) -> &GroupSpec {
        &self.groups
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.beta
    }

    pub fn as_slice(&self) -> &[f64] {
        self.beta.as_slice()
    }

    pub fn group(&self, j: usize) -> &[f64] {
        &self.beta.as_slice()[self.groups.range(j)]
    }

    pub fn group_norm(&self, j: usize) -> f64 {
        l2(self.group(j))
    }

    pub fn group_norms(&self) -> Vec<f64> {
        (0..self.groups.p()).map(|j| self.group_norm(j)).collect()
    }

    pub fn blocks(&self) -> Vec<Vec<f64>> {
        (0..self.groups.p()).map(|j| self.group(j).to_vec()).collect()
    }

    /// Same coefficients with groups reordered (see [`GroupSpec::permuted`]).
    pub fn permute_groups(&self, perm: &[usize]) -> Self {
        let cols = self.groups.column_permutation(perm);
        Self {
            beta: DVector::from_iterator(cols.len(), cols.iter().map(|&k| self.beta[k])),
            groups: self.groups.permuted(perm),
        }
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sorted indices of groups whose coefficient block is nonzero.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ActiveSet {
    indices: Vec<usize>,
}

impl ActiveSet {
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn is_subset(&self, other: &ActiveSet) -> bool {
        self.indices.iter().all(|&j| other.contains(j))
    }

    /// `Card(self ∩ other)`.
    pub fn intersection_len(&self, other: &ActiveSet) -> usize {
        self.indices.iter().filter(|&&j| other.contains(j)).count()
    }

    /// `Card(self \ other)`.
    pub fn difference_len(&self, other: &ActiveSet) -> usize {
        self.len() - self.intersection_len(other)
    }
}

/// Groups with `||beta_j||_2 > threshold`.
pub fn active_set(beta: &GroupedCoefficients, threshold: f64) -> ActiveSet {
    assert!(threshold >= 0.0, "threshold must be nonnegative");
    ActiveSet {
        indices: (0..beta.groups().p())
            .filter(|&j| beta.group_norm(j) > threshold)
            .collect(),
    }
}

/// `U_n = X^T X / n`.
pub fn gram(design: &GroupedDesign) -> DMatrix<f64> {
    let n = design.n() as f64;
    let mut u = design.x().tr_mul(design.x()) / n;
    symmetrize(&mut u);
    u
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let k = m.nrows();
    for i in 0..k {
        for j in (i + 1)..k {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Extreme eigenvalues of a symmetric matrix, `None` if the solver failed.
pub(crate) fn eigen_range(m: &DMatrix<f64>) -> Option<(f64, f64)> {
    if m.nrows() == 0 {
        return None;
    }
    let eig = m.clone().try_symmetric_eigen(1e-14, 100_000)?;
    let vals = eig.eigenvalues;
    Some((vals.min(), vals.max()))
}

/// Design diagnostics for the boundedness, Gram-conditioning and
/// `sqrt(p/n) max ||X_i||_2 -> 0` assumptions. Informational only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub max_inf_norm: f64,
    pub min_eigen: f64,
    pub max_eigen: f64,
    pub tl_statistic: f64,
    pub degenerate: bool,
    pub eigen_failed: bool,
}

pub fn assumption_report(design: &GroupedDesign) -> AssumptionReport {
    let x = design.x();
    let max_inf_norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_row_norm = x
        .row_iter()
        .map(|row| row.norm())
        .fold(0.0f64, f64::max);
    let tl_statistic = (design.p() as f64 / design.n() as f64).sqrt() * max_row_norm;
    let (min_eigen, max_eigen, eigen_failed) = match eigen_range(&gram(design)) {
        Some((lo, hi)) => (lo, hi, false),
        None => (f64::NAN, f64::NAN, true),
    };
    AssumptionReport {
        max_inf_norm,
        min_eigen,
        max_eigen,
        tl_statistic,
        degenerate: eigen_failed || min_eigen <= DEGENERATE_EIGEN,
        eigen_failed,
    }
}

/// Column centering and scaling (unbiased standard deviation).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    /// Statistics of each column; constant columns keep scale 1.
    pub fn from_columns(x: &DMatrix<f64>) -> Self {
        let (means, scales) = x
            .column_iter()
            .map(|c| {
                let (m, v) = crate::loss::mean_and_variance(c.as_slice());
                let sd = v.sqrt();
                (m, if sd > 0.0 { sd } else { 1.0 })
            })
            .unzip();
        Self { means, scales }
    }

    pub fn apply(&self, x: &mut DMatrix<f64>) {
        for (k, mut col) in x.column_iter_mut().enumerate() {
            let (m, s) = (self.means[k], self.scales[k]);
            col.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
    }

    /// Maps coefficients fitted on standardized columns back to the raw
    /// columns. Returns the raw coefficients and the intercept shift
    /// `-sum_k beta_k mean_k / scale_k`.
    pub fn to_raw(&self, beta: &[f64]) -> (Vec<f64>, f64) {
        let raw: Vec<f64> = beta
            .iter()
            .zip(&self.scales)
            .map(|(b, s)| b / s)
            .collect();
        let shift = -raw.iter().zip(&self.means).map(|(b, m)| b * m).sum::<f64>();
        (raw, shift)
    }
}

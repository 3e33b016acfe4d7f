//! Independent reference computations: plain loops over rows, no use of the
//! crate's own objective, gradient or linear algebra.
#![allow(dead_code, clippy::needless_range_loop)]

use aglq::design::{GroupSpec, GroupedCoefficients, GroupedDesign};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian design with group sizes `sizes` and `y = X b + noise`.
pub fn instance(seed: u64, n: usize, sizes: &[usize], noise: f64) -> (GroupedDesign, DVector<f64>) {
    let mut rng = rng(seed);
    let groups = GroupSpec::new(sizes.to_vec()).unwrap();
    let r = groups.r();
    let x = DMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b: Vec<f64> = (0..r)
        .map(|k| if k % 3 == 2 { 0.0 } else { rng.random_range(-2.0..2.0) })
        .collect();
    let y = DVector::from_fn(n, |i, _| {
        let signal: f64 = (0..r).map(|k| x[(i, k)] * b[k]).sum();
        signal + noise * rng.sample::<f64, _>(StandardNormal)
    });
    (GroupedDesign::new(x, groups).unwrap(), y)
}

pub fn rho(u: f64, tau: f64, q: f64) -> f64 {
    let w = if u < 0.0 { 1.0 - tau } else { tau };
    w * u.abs().powf(q)
}

/// `d rho / du`.
pub fn rho_prime(u: f64, tau: f64, q: f64) -> f64 {
    let w = if u < 0.0 { 1.0 - tau } else { tau };
    w * q * u.abs().powf(q - 1.0) * u.signum()
}

fn residual(d: &GroupedDesign, y: &DVector<f64>, beta: &[f64], i: usize) -> f64 {
    let x = d.x();
    let mut fit = 0.0;
    for k in 0..beta.len() {
        fit += x[(i, k)] * beta[k];
    }
    y[i] - fit
}

/// `n^-1 sum rho(eps_i)`.
pub fn smooth(d: &GroupedDesign, y: &DVector<f64>, beta: &[f64], tau: f64, q: f64) -> f64 {
    let n = d.n();
    (0..n).map(|i| rho(residual(d, y, beta, i), tau, q)).sum::<f64>() / n as f64
}

pub fn group_norm(beta: &[f64], groups: &GroupSpec, j: usize) -> f64 {
    beta[groups.range(j)].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Penalized objective with explicit finite weights.
pub fn objective(
    d: &GroupedDesign,
    y: &DVector<f64>,
    beta: &[f64],
    tau: f64,
    q: f64,
    lambda: f64,
    weights: &[f64],
) -> f64 {
    let pen: f64 = (0..d.p()).map(|j| weights[j] * group_norm(beta, d.groups(), j)).sum();
    smooth(d, y, beta, tau, q) + lambda * pen
}

/// Gradient of `n^-1 sum rho(y_i - x_i' beta)` in `beta`.
pub fn gradient(d: &GroupedDesign, y: &DVector<f64>, beta: &[f64], tau: f64, q: f64) -> Vec<f64> {
    let n = d.n();
    let x = d.x();
    let mut g = vec![0.0; beta.len()];
    for i in 0..n {
        let dr = rho_prime(residual(d, y, beta, i), tau, q);
        for k in 0..beta.len() {
            g[k] -= dr * x[(i, k)] / n as f64;
        }
    }
    g
}

/// Worst group violation of the optimality conditions.
pub fn kkt(
    d: &GroupedDesign,
    y: &DVector<f64>,
    beta: &[f64],
    tau: f64,
    q: f64,
    lambda: f64,
    weights: &[f64],
) -> f64 {
    let g = gradient(d, y, beta, tau, q);
    let groups = d.groups();
    let mut worst = 0.0f64;
    for j in 0..d.p() {
        let range = groups.range(j);
        let norm = group_norm(beta, groups, j);
        let t = lambda * weights[j];
        let v = if norm > 0.0 {
            range
                .map(|k| (g[k] + t * beta[k] / norm).powi(2))
                .sum::<f64>()
                .sqrt()
        } else {
            let gn = range.map(|k| g[k] * g[k]).sum::<f64>().sqrt();
            (gn - t).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let k = b.len();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..k {
            let f = a[row][col] / a[col][col];
            for c in col..k {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let s: f64 = (row + 1..k).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Least squares through the normal equations.
pub fn ols(d: &GroupedDesign, y: &DVector<f64>) -> Vec<f64> {
    let x = d.x();
    let (n, r) = (d.n(), d.r());
    let mut a = vec![vec![0.0; r]; r];
    let mut b = vec![0.0; r];
    for i in 0..n {
        for j in 0..r {
            b[j] += x[(i, j)] * y[i];
            for k in 0..r {
                a[j][k] += x[(i, j)] * x[(i, k)];
            }
        }
    }
    solve(a, b)
}

/// Exhaustive search on a cube grid of step `step` centred at `centre`,
/// `half` points each side, for `r <= 3`.
fn grid_pass(
    f: &dyn Fn(&[f64]) -> f64,
    centre: &[f64],
    step: f64,
    half: i64,
) -> (Vec<f64>, f64) {
    let r = centre.len();
    assert!(r <= 3);
    let side = (2 * half + 1) as usize;
    let total = side.pow(r as u32);
    let mut best = (centre.to_vec(), f64::INFINITY);
    let mut point = vec![0.0; r];
    for idx in 0..total {
        let mut rest = idx;
        for (k, c) in centre.iter().enumerate() {
            let o = (rest % side) as i64 - half;
            rest /= side;
            point[k] = c + o as f64 * step;
        }
        let v = f(&point);
        if v < best.1 {
            best = (point.clone(), v);
        }
    }
    best
}

/// Coarse grid on `[-bound, bound]^r`, then a fine grid of step `fine`
/// around the coarse winner. The objective is convex, so the fine pass
/// localizes the minimizer to within one fine step.
pub fn grid_search(f: &dyn Fn(&[f64]) -> f64, r: usize, bound: f64, coarse: f64, fine: f64) -> Vec<f64> {
    let half = (bound / coarse).round() as i64;
    let (c, _) = grid_pass(f, &vec![0.0; r], coarse, half);
    let half = (2.0 * coarse / fine).round() as i64;
    grid_pass(f, &c, fine, half).0
}

pub fn coefficients(beta: &[f64], groups: &GroupSpec) -> GroupedCoefficients {
    GroupedCoefficients::new(DVector::from_column_slice(beta), groups.clone()).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

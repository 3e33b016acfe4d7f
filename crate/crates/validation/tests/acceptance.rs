//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::sync::Mutex;
use std::time::Instant;

use aglq::inference::sandwich_covariance;
use aglq::loss::LossSpec;
use aglq::simulate::{generate, run, signal_sweep, ErrorDist, EstimatorConfig, ScenarioSpec, SimulationReport};
use aglq::solver::{
    adaptive_weights, fit_penalized, fit_unpenalized, lambda_max, smooth_gradient, GroupWeight, PenaltySpec,
    SolverOptions,
};
use aglq::tuning::{check_conditions, RegimeSpec, Verdict};
use rand::Rng;
use rayon::prelude::*;

const KKT_TOL: f64 = 1e-6;

/// Oracle KKT residuals of every converged fit produced by the gate.
static KKT_LOG: Mutex<Vec<(String, f64)>> = Mutex::new(Vec::new());

fn log_kkt(source: &str, value: f64) {
    KKT_LOG.lock().unwrap().push((source.to_string(), value));
}

fn finite_weights(weights: &[GroupWeight]) -> Vec<f64> {
    weights
        .iter()
        .map(|w| match w {
            GroupWeight::Finite(v) => *v,
            _ => panic!("gate fits use finite weights only"),
        })
        .collect()
}

/// Re-derives each converged replication of a report and checks its KKT
/// residual with the reference implementation.
fn audit_report(source: &str, spec: &ScenarioSpec, report: &SimulationReport) {
    let opts = SolverOptions::default();
    let values: Vec<Option<f64>> = report
        .records
        .par_iter()
        .map(|rec| {
            if !rec.converged {
                return None;
            }
            let s = generate(spec, rec.replication).unwrap();
            let loss = LossSpec::new(report.tau, spec.q).unwrap();
            let pilot = fit_unpenalized(&s.design, &s.y, &loss, &opts).unwrap();
            let w = finite_weights(&adaptive_weights(&pilot.beta, spec.gamma, spec.weight_cap).unwrap());
            Some(common::kkt(&s.design, &s.y, &rec.beta_hat, report.tau, spec.q, report.lambda, &w))
        })
        .collect();
    for v in values.into_iter().flatten() {
        log_kkt(source, v);
    }
}

fn false_selection(error: ErrorDist, parallel: bool) -> (bool, String) {
    let spec = ScenarioSpec::ungrouped_fixed(200, 10, error, 0.625, 20_240_601);
    let config = EstimatorConfig {
        parallel,
        ..EstimatorConfig::default()
    };
    let start = Instant::now();
    let report = run(&spec, 100, &config).unwrap();
    let secs = start.elapsed().as_secs_f64();
    audit_report("false_selection", &spec, &report);
    let mut ok = report.mean_true_nonzero >= 4.9 && report.mean_false_nonzero <= 0.2;
    let mut detail = format!(
        "tau={:.4} lambda={:.5} mean Card(A&A_hat)={:.2} (>= 4.9) mean Card(A_hat\\A)={:.2} (<= 0.2) nonconverged={}",
        report.tau, report.lambda, report.mean_true_nonzero, report.mean_false_nonzero, report.nonconverged
    );
    if !parallel {
        ok &= secs < 60.0;
        detail.push_str(&format!(" single-threaded {secs:.1}s (< 60s)"));
    }
    (ok, detail)
}

fn signal_threshold() -> (bool, String) {
    let spec = ScenarioSpec::signal(100, 10, 0.0, ErrorDist::StdNormal, 0.6, 20_240_604);
    let vs: Vec<f64> = (2..=40).map(|k| 5.0 * k as f64).collect();
    let sweep = signal_sweep(&spec, &vs, 200, &EstimatorConfig::default()).unwrap();
    let curve: Vec<String> = sweep
        .points
        .iter()
        .filter(|p| (p.value as i64) % 20 == 0)
        .map(|p| format!("{}:{:.1}", p.value, p.report.pct_true))
        .collect();
    let false_pct = sweep.points.iter().map(|p| p.report.pct_false).sum::<f64>() / sweep.points.len() as f64;
    match sweep.threshold_95 {
        Some(t) => (
            (t.beta_norm - 0.6).abs() <= 0.15,
            format!(
                "95% threshold ||beta0||_2={:.2} (0.6 +- 0.15); 99% threshold {:?}; pct_true by v [{}]; mean pct_false {:.1}",
                t.beta_norm,
                sweep.threshold_99.map(|t| t.beta_norm),
                curve.join(" "),
                false_pct
            ),
        ),
        None => (false, format!("95% detection never reached; pct_true by v [{}]", curve.join(" "))),
    }
}

fn oracles() -> (bool, String) {
    let opts = SolverOptions::default();
    let tight = SolverOptions {
        tol_kkt: 1e-12,
        tol_obj: 1e-15,
        ..SolverOptions::default()
    };
    let half = LossSpec::expectile(0.5).unwrap();

    // (a) closed-form least squares
    let mut worst_a = 0.0f64;
    for seed in 0..20 {
        let sizes = [1, 2, 1, 3, 1];
        let (d, y) = common::instance(100 + seed, 40 + seed as usize, &sizes, 1.0);
        let ols = common::ols(&d, &y);
        let unpen = fit_unpenalized(&d, &y, &half, &opts).unwrap();
        let pen = fit_penalized(&d, &y, &half, &PenaltySpec::uniform(0.0, d.p()).unwrap(), &tight, None).unwrap();
        worst_a = worst_a
            .max(common::max_abs_diff(unpen.beta.as_slice(), &ols))
            .max(common::max_abs_diff(pen.beta.as_slice(), &ols));
        log_kkt("ols", common::kkt(&d, &y, pen.beta.as_slice(), 0.5, 2.0, 0.0, &vec![1.0; d.p()]));
    }
    let ok_a = worst_a <= 1e-8;

    // (b) dense grid search, r <= 3
    let fine = 1e-3;
    let mut worst_b = 0.0f64;
    let cases: [(&[usize], f64, f64, f64); 6] = [
        (&[1, 1], 0.5, 2.0, 0.3),
        (&[1, 1], 0.3, 2.0, 0.6),
        (&[2], 0.7, 2.0, 0.4),
        (&[1, 2], 0.5, 2.0, 0.5),
        (&[1, 1, 1], 0.3, 1.5, 0.4),
        (&[3], 0.7, 3.0, 0.8),
    ];
    for (i, &(sizes, tau, q, lambda)) in cases.iter().enumerate() {
        let (d, y) = common::instance(200 + i as u64, 30, sizes, 0.8);
        let spec = LossSpec::new(tau, q).unwrap();
        let weights: Vec<f64> = (0..d.p()).map(|j| 0.5 + j as f64 * 0.5).collect();
        let pen = PenaltySpec::new(
            lambda,
            1.0,
            weights.iter().map(|&w| GroupWeight::Finite(w)).collect(),
            false,
        )
        .unwrap();
        let fit = fit_penalized(&d, &y, &spec, &pen, &opts, None).unwrap();
        let f = |b: &[f64]| common::objective(&d, &y, b, tau, q, lambda, &weights);
        let grid = common::grid_search(&f, d.r(), 3.0, 0.05, fine);
        worst_b = worst_b.max(common::max_abs_diff(fit.beta.as_slice(), &grid));
        if fit.converged {
            log_kkt("grid", common::kkt(&d, &y, fit.beta.as_slice(), tau, q, lambda, &weights));
        }
    }
    let ok_b = worst_b <= 2.0 * fine;

    // (c) lambda >= lambda_max gives exactly zero
    let mut nonzero = 0;
    for seed in 0..50u64 {
        let mut rng = common::rng(seed);
        let tau = rng.random_range(0.2..0.8);
        let q = [1.5, 2.0, 3.0][seed as usize % 3];
        let (d, y) = common::instance(300 + seed, 25, &[1, 2, 3, 1], 1.0);
        let spec = LossSpec::new(tau, q).unwrap();
        let w: Vec<GroupWeight> = (0..d.p()).map(|_| GroupWeight::Finite(rng.random_range(0.5..2.0))).collect();
        let lmax = lambda_max(&d, &y, &spec, &w).unwrap();
        for factor in [1.0 + 1e-12, 2.0] {
            let pen = PenaltySpec::new(lmax * factor, 1.0, w.clone(), false).unwrap();
            let fit = fit_penalized(&d, &y, &spec, &pen, &opts, None).unwrap();
            if fit.beta.as_slice().iter().any(|&v| v != 0.0) {
                nonzero += 1;
            }
            log_kkt("lambda_max", common::kkt(&d, &y, fit.beta.as_slice(), tau, q, lmax * factor, &finite_weights(&w)));
        }
    }
    let ok_c = nonzero == 0;

    (
        ok_a && ok_b && ok_c,
        format!(
            "(a) max |beta - ols| = {worst_a:.2e} (<= 1e-8); (b) max |beta - grid| = {worst_b:.2e} (<= {:.0e}); (c) {nonzero}/100 nonzero fits at lambda >= lambda_max",
            2.0 * fine
        ),
    )
}

fn kkt_perturbation() -> (bool, String) {
    let opts = SolverOptions::default();
    let mut checked = 0;
    let mut failures = 0;
    for seed in 0..20u64 {
        let (d, y) = common::instance(400 + seed, 60, &[1, 2, 1, 3, 1, 2], 0.7);
        let tau = [0.3, 0.5, 0.7][seed as usize % 3];
        let q = [1.5, 2.0, 3.0][(seed / 3) as usize % 3];
        let spec = LossSpec::new(tau, q).unwrap();
        let pilot = fit_unpenalized(&d, &y, &spec, &opts).unwrap();
        let weights = adaptive_weights(&pilot.beta, 1.0, None).unwrap();
        let w = finite_weights(&weights);
        let lambda = 0.05;
        let pen = PenaltySpec::new(lambda, 1.0, weights, false).unwrap();
        let fit = fit_penalized(&d, &y, &spec, &pen, &opts, None).unwrap();
        if !fit.converged {
            continue;
        }
        log_kkt("perturbation", common::kkt(&d, &y, fit.beta.as_slice(), tau, q, lambda, &w));
        let base = common::objective(&d, &y, fit.beta.as_slice(), tau, q, lambda, &w);
        for &j in fit.active.indices() {
            for k in d.groups().range(j) {
                for delta in [1e-2, -1e-2] {
                    let mut b = fit.beta.as_slice().to_vec();
                    b[k] += delta;
                    checked += 1;
                    if common::objective(&d, &y, &b, tau, q, lambda, &w).partial_cmp(&base) != Some(std::cmp::Ordering::Greater) {
                        failures += 1;
                    }
                }
            }
        }
    }
    let log = KKT_LOG.lock().unwrap();
    let worst = log.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let over = log.iter().filter(|(_, v)| *v > KKT_TOL).count();
    (
        over == 0 && failures == 0 && checked > 0,
        format!(
            "{} converged fits, max oracle KKT residual {worst:.2e} (<= 1e-6), {over} over; {failures}/{checked} active perturbations failed to increase the objective",
            log.len()
        ),
    )
}

fn gradients() -> (bool, String) {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (qi, q) in [1.5, 2.0, 3.0].into_iter().enumerate() {
        for (ti, tau) in [0.3, 0.5, 0.7].into_iter().enumerate() {
            let (d, y) = common::instance(500 + (qi * 3 + ti) as u64, 30, &[1, 2, 2], 1.0);
            let spec = LossSpec::new(tau, q).unwrap();
            let mut rng = common::rng(600 + (qi * 3 + ti) as u64);
            for _ in 0..20 {
                let beta: Vec<f64> = (0..d.r()).map(|_| rng.random_range(-2.0..2.0)).collect();
                let g = smooth_gradient(&d, &y, &common::coefficients(&beta, d.groups()), &spec).unwrap();
                let mut fd = vec![0.0; d.r()];
                for k in 0..d.r() {
                    let h = 1e-5 * beta[k].abs().max(1.0);
                    let mut up = beta.clone();
                    let mut dn = beta.clone();
                    up[k] += h;
                    dn[k] -= h;
                    fd[k] = (common::smooth(&d, &y, &up, tau, q) - common::smooth(&d, &y, &dn, tau, q)) / (2.0 * h);
                }
                let gn = g.norm();
                let err = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                worst = worst.max(err / gn.max(1e-12));
                count += 1;
            }
        }
    }
    (
        worst <= 1e-5,
        format!("{count} points, max relative ||grad - fd|| = {worst:.2e} (<= 1e-5)"),
    )
}

fn normality() -> (bool, String) {
    let spec = ScenarioSpec::ungrouped_fixed(400, 10, ErrorDist::StdNormal, 0.625, 20_240_607);
    let tau = spec.scenario_tau().unwrap();
    let lambda = spec.scenario_lambda().unwrap();
    let opts = SolverOptions::default();
    let k = 3;
    let truth = 4.0;
    let n = spec.n as f64;
    let draws: Vec<(f64, f64, f64)> = (0..500u64)
        .into_par_iter()
        .map(|rep| {
            let s = generate(&spec, rep).unwrap();
            let loss = LossSpec::new(tau, 2.0).unwrap();
            let pilot = fit_unpenalized(&s.design, &s.y, &loss, &opts).unwrap();
            let w = adaptive_weights(&pilot.beta, spec.gamma, None).unwrap();
            let pen = PenaltySpec::new(lambda, spec.gamma, w.clone(), false).unwrap();
            let fit = fit_penalized(&s.design, &s.y, &loss, &pen, &opts, Some(&pilot.beta)).unwrap();
            if fit.converged {
                log_kkt(
                    "normality",
                    common::kkt(&s.design, &s.y, fit.beta.as_slice(), tau, 2.0, lambda, &finite_weights(&w)),
                );
            }
            let cov = sandwich_covariance(&s.design, &s.y, &fit, &loss).unwrap();
            let se = cov.std_error_of(k).expect("true coefficient selected");
            (fit.beta.as_slice()[k], se, se * n.sqrt())
        })
        .collect();
    let z: Vec<f64> = draws.iter().map(|(b, _, _)| n.sqrt() * (b - truth)).collect();
    let (_, sd) = common::mean_sd(&z);
    let plug_in = draws.iter().map(|d| d.2).sum::<f64>() / draws.len() as f64;
    let covered = draws.iter().filter(|(b, se, _)| (b - truth).abs() <= 1.959963984540054 * se).count();
    let coverage = 100.0 * covered as f64 / draws.len() as f64;
    let ratio = sd / plug_in;
    (
        (ratio - 1.0).abs() <= 0.3 && (coverage - 95.0).abs() <= 3.0,
        format!(
            "sd of sqrt(n)(b4 - 4) = {sd:.3}, mean plug-in = {plug_in:.3} (ratio {ratio:.3}, within 30%); coverage {coverage:.1}% (95 +- 3)"
        ),
    )
}

fn conditions() -> (bool, String) {
    let check = |c, alpha, gamma, e, name: &str| {
        let r = check_conditions(&RegimeSpec::new(c, alpha, gamma, e).unwrap()).unwrap();
        let x = r.get(name).unwrap();
        (x.net_exponent, x.verdict)
    };
    let ex1 = check(0.0, 0.0, 0.5, -0.625, "E3.1a") == (-0.125, Verdict::Pass)
        && check(0.0, 0.0, 0.5, -0.625, "E3.1b") == (0.125, Verdict::Pass);
    let ex2 = check(0.0, 0.0, 0.5, -0.5, "E3.1a") == (0.0, Verdict::Indeterminate);
    let ex3 = check(1.0, 0.0, 1.0, -0.75, "E4.2") == (-0.75, Verdict::Fail);
    let mut reduction = true;
    for gamma in [0.1, 0.25, 0.5, 0.625, 0.9] {
        for e in [-1.0, -0.75, -0.625, -0.5, -0.25] {
            reduction &= check(0.0, 0.0, gamma, e, "E3.1a") == check(0.0, 0.0, gamma, e, "E4.1");
            reduction &= check(0.0, 0.0, gamma, e, "E3.1b") == check(0.0, 0.0, gamma, e, "E4.2");
        }
    }
    (
        ex1 && ex2 && ex3 && reduction,
        format!("worked examples {ex1}/{ex2}/{ex3}, c=0 alpha=0 reduction {reduction}"),
    )
}

type Criterion = (&'static str, fn() -> (bool, String));

fn main() {
    let _ = env_logger::builder().is_test(true).try_init();
    let criteria: Vec<Criterion> = vec![
        ("false_selection_normal_errors", || false_selection(ErrorDist::StdNormal, false)),
        ("false_selection_asymmetric_errors", || false_selection(ErrorDist::ShiftedChi2, true)),
        ("signal_detection_threshold", signal_threshold),
        ("oracle_equivalences", oracles),
        ("gradient_suite", gradients),
        ("asymptotic_normality", normality),
        ("condition_checker", conditions),
        // last, so it sees every fit above
        ("kkt_certificate", kkt_perturbation),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let (ok, detail) = f();
        if !ok {
            failed += 1;
        }
        println!(
            "ACCEPTANCE {} {name} [{:.1}s]: {detail}",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("ACCEPTANCE SUMMARY: {failed} criteria failed");
    if failed > 0 {
        std::process::exit(1);
    }
}

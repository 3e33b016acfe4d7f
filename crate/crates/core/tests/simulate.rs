use aglq::simulate::{generate, run, BetaRule, ErrorDist, EstimatorConfig, ScenarioSpec, SizeRule, STANDARD_BETA};

fn config(parallel: bool) -> EstimatorConfig {
    EstimatorConfig {
        parallel,
        ..EstimatorConfig::default()
    }
}

fn grouped() -> ScenarioSpec {
    ScenarioSpec::from_json(
        r#"{"n": 60, "structure": "grouped_growing", "p": "fifth_n", "p0": "two_sqrt_n_div5",
            "error": "std_normal", "beta": {"kind": "random_normal", "variance": 2.0},
            "gamma": 0.9, "seed": 77}"#,
    )
    .unwrap()
}

#[test]
fn results_do_not_depend_on_scheduling() {
    for spec in [ScenarioSpec::ungrouped_fixed(80, 12, ErrorDist::ShiftedExp, 0.625, 5), grouped()] {
        let serial = run(&spec, 8, &config(false)).unwrap();
        let parallel = run(&spec, 8, &config(true)).unwrap();
        assert_eq!(serial.records.len(), 8);
        for (a, b) in serial.records.iter().zip(&parallel.records) {
            assert_eq!(a.beta_hat, b.beta_hat);
            assert_eq!(a.false_nonzero, b.false_nonzero);
        }
        assert_eq!(serial.mean_false_nonzero, parallel.mean_false_nonzero);
    }
}

#[test]
fn seeds_and_replications_give_distinct_draws() {
    let spec = ScenarioSpec::ungrouped_fixed(40, 6, ErrorDist::StdNormal, 0.625, 1);
    let a = generate(&spec, 0).unwrap();
    assert_eq!(a, generate(&spec, 0).unwrap());
    assert_ne!(a.y, generate(&spec, 1).unwrap().y);
    let other = ScenarioSpec { seed: 2, ..spec };
    assert_ne!(a.y, generate(&other, 0).unwrap().y);
}

#[test]
fn generated_data_follow_the_scenario() {
    let spec = ScenarioSpec::ungrouped_fixed(50, 9, ErrorDist::StdNormal, 0.625, 3);
    let s = generate(&spec, 4).unwrap();
    assert_eq!((s.design.n(), s.design.r()), (50, 9));
    assert_eq!(&s.beta0.as_slice()[..5], &STANDARD_BETA);
    assert!(s.beta0.as_slice()[5..].iter().all(|&b| b == 0.0));
    assert_eq!(s.active.indices(), [0, 1, 2, 3, 4]);

    let g = generate(&grouped(), 0).unwrap();
    // p = 60/5 = 12 groups of 5, p0 = 2 floor(sqrt(60)/5) = 2
    assert_eq!((g.design.p(), g.design.r()), (12, 60));
    assert_eq!(g.active.indices(), [0, 1]);
}

#[test]
fn record_metrics_match_a_recount() {
    let spec = ScenarioSpec {
        p0: SizeRule::Explicit(3),
        beta: BetaRule::Fixed {
            values: vec![1.0, -0.3, 0.05],
        },
        error: ErrorDist::ShiftedChi2,
        ..ScenarioSpec::ungrouped_fixed(70, 10, ErrorDist::StdNormal, 0.625, 8)
    };
    let report = run(&spec, 6, &config(true)).unwrap();
    let mut false_total = 0.0;
    for rec in &report.records {
        let s = generate(&spec, rec.replication).unwrap();
        let b0 = s.beta0.as_slice();
        let selected: Vec<usize> = (0..10).filter(|&k| rec.beta_hat[k] != 0.0).collect();
        let true_nz = selected.iter().filter(|&&k| b0[k] != 0.0).count();
        assert_eq!(rec.selected, selected.len());
        assert_eq!(rec.true_nonzero, true_nz);
        assert_eq!(rec.false_nonzero, selected.len() - true_nz);
        let all: f64 = (0..10).map(|k| (rec.beta_hat[k] - b0[k]).abs()).sum::<f64>() / 10.0;
        let active: f64 = (0..3).map(|k| (rec.beta_hat[k] - b0[k]).abs()).sum::<f64>() / 10.0;
        assert!((rec.mean_abs_all - all).abs() < 1e-14);
        assert!((rec.mean_abs_active - active).abs() < 1e-14);
        false_total += rec.false_nonzero as f64;
    }
    assert!((report.mean_false_nonzero - false_total / 6.0).abs() < 1e-14);
    assert_eq!(report.dims.p, 10);
}

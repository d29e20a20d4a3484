use prbandit::bandit::{
    batch_size, clean_regret, dprse_baseline_run, prae_run, run_algorithm, Algorithm, EstimateMode, EstimatorKind,
    Phase, RunLog, RunParams,
};
use prbandit::env::{
    make_hard_instance, make_linear_means_instance, Arm, BanditInstance, ContaminationSpec, HardVariant, InlierFamily,
    InlierSpec, Outlier,
};
use prbandit::RngStream;
use proptest::prelude::*;

fn params(epsilon: f64, alpha: f64, horizon: u64) -> RunParams {
    RunParams {
        epsilon,
        delta: 0.05,
        alpha,
        k: 2.0,
        horizon,
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn final_regrets(inst: &BanditInstance, alg: Algorithm, p: &RunParams, seeds: u64) -> Vec<f64> {
    (0..seeds)
        .map(|s| {
            run_algorithm(inst, alg, p, EstimateMode::Private, &RngStream::new(s, 0), None)
                .unwrap()
                .final_regret()
        })
        .collect()
}

fn logged(inst: &BanditInstance, alg: Algorithm, p: &RunParams, seed: u64) -> (Vec<usize>, Vec<f64>, RunLog) {
    let mut log = RunLog::default();
    let trace = run_algorithm(
        inst,
        alg,
        p,
        EstimateMode::Private,
        &RngStream::new(seed, 0),
        Some(&mut log),
    )
    .unwrap();
    (trace.actions, trace.cumulative, log)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn budget_and_trace_consistency(
        arms in 1usize..6,
        horizon in 1u64..20_000,
        seed: u64,
        alg in prop_oneof![Just(Algorithm::PraeRaw), Just(Algorithm::Dprse)],
        alpha in prop_oneof![Just(0.0), Just(0.05)],
    ) {
        let inst = make_hard_instance(arms, 2.0, 1.0, HardVariant::Nu1).unwrap();
        let (actions, cumulative, log) = logged(&inst, alg, &params(1.0, alpha, horizon), seed);
        prop_assert_eq!(actions.len() as u64, horizon);
        prop_assert_eq!(&cumulative, &clean_regret(&actions, &inst).unwrap());
        prop_assert!(cumulative.windows(2).all(|w| w[0] <= w[1]));

        // Every executed batch accounts for its pulls; the tail (if any) is the single-arm phase.
        let mut accounted = 0u64;
        for (i, b) in log.batches.iter().enumerate() {
            prop_assert_eq!(b.batch_size, batch_size(b.tau));
            prop_assert_eq!(b.tau as usize, i + 1);
            prop_assert!(!b.active_before.is_empty());
            if b.completed {
                accounted += match b.phase {
                    Phase::Random => b.batch_size,
                    Phase::Eliminate => b.batch_size * b.active_before.len() as u64,
                };
            }
        }
        prop_assert!(accounted <= horizon);
        if log.batches.last().is_some_and(|b| !b.completed) {
            prop_assert!(log.batches[..log.batches.len() - 1].iter().all(|b| b.completed));
        }
    }

    #[test]
    fn samples_are_fresh(arms in 2usize..6, horizon in 100u64..30_000, seed: u64) {
        let inst = make_hard_instance(arms, 2.0, 1.0, HardVariant::Nu1).unwrap();
        let (_, _, log) = logged(&inst, Algorithm::PraeRaw, &params(1.0, 0.0, horizon), seed);
        let mut ranges: Vec<_> = log.batches.iter().flat_map(|b| b.samples.iter().map(move |(a, r)| (b.batch_size, *a, r.clone()))).collect();
        let estimates: usize = log.batches.iter().map(|b| b.estimates.len()).sum();
        prop_assert_eq!(ranges.len(), estimates);
        prop_assert_eq!(log.releases.len(), estimates);
        ranges.sort_by_key(|(_, _, r)| r.start);
        for w in ranges.windows(2) {
            prop_assert!(w[0].2.end <= w[1].2.start);
        }
        for (b, _, r) in &ranges {
            prop_assert_eq!(r.end - r.start, *b);
            prop_assert!(r.end <= horizon);
        }
        for rec in &log.releases {
            prop_assert_eq!(rec.scale, rec.sensitivity / rec.epsilon);
            prop_assert_eq!(rec.epsilon, 1.0);
        }
    }
}

#[test]
fn central_runs_are_fresh_and_scaled() {
    let inst = make_linear_means_instance(3, InlierFamily::StudentT, 0.0, None).unwrap();
    let p = RunParams {
        epsilon: 1.0,
        delta: 0.5,
        alpha: 0.0,
        k: 2.0,
        horizon: 120_000,
    };
    let (actions, _, log) = logged(&inst, Algorithm::PraeCentral, &p, 4);
    assert_eq!(actions.len(), 120_000);
    let estimates: usize = log.batches.iter().map(|b| b.estimates.len()).sum();
    assert!(estimates > 0);
    assert_eq!(log.releases.len(), 2 * estimates);
    for rec in &log.releases {
        assert_eq!(rec.scale, rec.sensitivity / rec.epsilon);
    }
}

#[test]
fn single_arm_has_zero_regret() {
    let arm = Arm {
        inlier: InlierSpec::student_t_shifted(2.5, 10.0, 2.0).unwrap(),
        contamination: ContaminationSpec::new(0.05, Outlier::BENCHMARK).unwrap(),
    };
    let inst = BanditInstance::new(vec![arm], 100.0, "one").unwrap();
    for alg in Algorithm::ALL {
        let trace = run_algorithm(
            &inst,
            alg,
            &params(0.5, 0.05, 5_000),
            EstimateMode::Private,
            &RngStream::new(0, 0),
            None,
        )
        .unwrap();
        assert!(trace.cumulative.iter().all(|&r| r == 0.0));
    }
}

#[test]
fn entry_points_match_run_algorithm() {
    let inst = make_linear_means_instance(5, InlierFamily::Pareto, 0.05, None).unwrap();
    let p = params(0.5, 0.05, 3_000);
    let rng = RngStream::new(5, 1);
    let via = |alg| run_algorithm(&inst, alg, &p, EstimateMode::Private, &rng, None).unwrap();
    assert_eq!(
        prae_run(&inst, EstimatorKind::RawPrm, &p, &rng).unwrap(),
        via(Algorithm::PraeRaw)
    );
    assert_eq!(
        prae_run(&inst, EstimatorKind::CentralPrm, &p, &rng).unwrap(),
        via(Algorithm::PraeCentral)
    );
    assert_eq!(dprse_baseline_run(&inst, &p, &rng).unwrap(), via(Algorithm::Dprse));
}

#[test]
fn noiseless_runs_keep_the_optimal_arm() {
    let inst = make_hard_instance(5, 2.0, 1.0, HardVariant::Nu2(2)).unwrap();
    for seed in 0..20 {
        let mut log = RunLog::default();
        run_algorithm(
            &inst,
            Algorithm::PraeRaw,
            &params(1.0, 0.0, 300_000),
            EstimateMode::Noiseless,
            &RngStream::new(seed, 0),
            Some(&mut log),
        )
        .unwrap();
        assert!(log.batches.iter().all(|b| !b.eliminated.contains(&2)), "seed {seed}");
        assert!(log.releases.iter().all(|r| r.noiseless));
    }
}

#[test]
fn dprse_matches_prae_raw_without_contamination() {
    let inst = make_linear_means_instance(5, InlierFamily::StudentT, 0.0, Some(Outlier::None)).unwrap();
    let p = params(0.5, 0.0, 10_000);
    let r = mean_se(&final_regrets(&inst, Algorithm::PraeRaw, &p, 10));
    let d = mean_se(&final_regrets(&inst, Algorithm::Dprse, &p, 10));
    let se = (r.1 * r.1 + d.1 * d.1).sqrt();
    assert!(
        (r.0 - d.0).abs() <= 3.0 * se + 1e-9 * r.0.abs(),
        "prae-r {r:?} dprse {d:?}"
    );
}

#[test]
fn dprse_no_better_than_prae_raw_on_contaminated_pareto() {
    let inst = make_linear_means_instance(5, InlierFamily::Pareto, 0.1, None).unwrap();
    let p = params(0.5, 0.1, 10_000);
    let r = mean_se(&final_regrets(&inst, Algorithm::PraeRaw, &p, 10));
    let d = mean_se(&final_regrets(&inst, Algorithm::Dprse, &p, 10));
    assert!(d.0 + (r.1 * r.1 + d.1 * d.1).sqrt() >= r.0, "prae-r {r:?} dprse {d:?}");
}

#[test]
fn invalid_parameters_fail_before_pulling() {
    let inst = make_linear_means_instance(5, InlierFamily::Pareto, 0.2, None).unwrap();
    let rng = RngStream::new(0, 0);
    assert!(run_algorithm(
        &inst,
        Algorithm::PraeCentral,
        &params(0.5, 0.2, 100),
        EstimateMode::Private,
        &rng,
        None
    )
    .is_err());
    assert!(run_algorithm(
        &inst,
        Algorithm::PraeRaw,
        &params(0.5, 0.2, 0),
        EstimateMode::Private,
        &rng,
        None
    )
    .is_err());
    assert!(run_algorithm(
        &inst,
        Algorithm::PraeRaw,
        &params(-1.0, 0.2, 10),
        EstimateMode::Private,
        &rng,
        None
    )
    .is_err());
}

#[test]
fn regret_nonincreasing_in_epsilon() {
    let inst = make_linear_means_instance(5, InlierFamily::StudentT, 0.05, None).unwrap();
    for alg in [Algorithm::PraeRaw, Algorithm::PraeCentral] {
        let s: Vec<(f64, f64)> = [0.2, 0.5, 1.0]
            .iter()
            .map(|&eps| mean_se(&final_regrets(&inst, alg, &params(eps, 0.05, 10_000), 10)))
            .collect();
        for w in s.windows(2) {
            let se = (w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt();
            assert!(w[1].0 <= w[0].0 + se, "{alg}: {s:?}");
        }
    }
}

use prbandit::env::{
    make_hard_instance, make_linear_means_instance, Arm, BanditInstance, ContaminationSpec, HardVariant, InlierFamily,
    InlierSpec, Outlier,
};
use prbandit::RngStream;

fn single(inlier: InlierSpec, contamination: ContaminationSpec) -> BanditInstance {
    BanditInstance::new(vec![Arm { inlier, contamination }], 100.0, "single").unwrap()
}

fn sample(inst: &BanditInstance, arm: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, arm as u64);
    (0..n).map(|_| inst.sample_reward(arm, &mut rng).unwrap()).collect()
}

#[test]
fn hard_instance_raw_moments_at_most_one() {
    for gamma in [1.0, 0.5, 0.2] {
        let inst = make_hard_instance(5, 2.0, gamma, HardVariant::Nu2(3)).unwrap();
        for arm in 0..5 {
            let xs = sample(&inst, arm, 200_000, 1);
            let m: Vec<f64> = xs.iter().map(|x| x.abs().powi(2)).collect();
            let mean = m.iter().sum::<f64>() / m.len() as f64;
            let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m.len() - 1) as f64;
            assert!(
                mean <= 1.0 + 3.0 * (var / m.len() as f64).sqrt(),
                "gamma={gamma} arm={arm} moment={mean}"
            );
        }
    }
}

#[test]
fn sample_means_match_analytic_means() {
    let cases = [
        InlierSpec::pareto_shifted(2.5, 1.5, -2.5, 2.0).unwrap(),
        InlierSpec::student_t_shifted(2.5, 7.0, 2.0).unwrap(),
        InlierSpec::two_point(4.0, 0.1, 2.0).unwrap(),
    ];
    for spec in cases {
        let inst = single(spec, ContaminationSpec::clean());
        let xs = sample(&inst, 0, 400_000, 2);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        // Heavy tails: generous tolerance, the variance of these laws is at most about 5.
        assert!(
            (mean - spec.mean()).abs() < 0.05,
            "{:?}: {mean} vs {}",
            spec.kind(),
            spec.mean()
        );
    }
}

#[test]
fn contamination_frequency_matches_alpha() {
    let n = 200_000;
    for alpha in [0.02, 0.05, 0.1] {
        let inst = single(
            InlierSpec::point_mass(1.0, 2.0).unwrap(),
            ContaminationSpec::new(alpha, Outlier::PointMass { value: -5.0 }).unwrap(),
        );
        let mut rng = RngStream::new(3, 0);
        let hits = (0..n).filter(|_| inst.draw(0, &mut rng).unwrap().contaminated).count();
        let freq = hits as f64 / n as f64;
        assert!(
            (freq - alpha).abs() <= 4.0 * (alpha * (1.0 - alpha) / n as f64).sqrt(),
            "alpha={alpha} freq={freq}"
        );
    }
}

#[test]
fn contaminated_draws_come_from_the_outlier() {
    let inst = single(
        InlierSpec::point_mass(1.0, 2.0).unwrap(),
        ContaminationSpec::new(0.3, Outlier::PointMass { value: -5.0 }).unwrap(),
    );
    let mut rng = RngStream::new(4, 0);
    for _ in 0..10_000 {
        let d = inst.draw(0, &mut rng).unwrap();
        assert_eq!(d.value, if d.contaminated { -5.0 } else { 1.0 });
    }
}

#[test]
fn same_seed_same_rewards() {
    let inst = make_linear_means_instance(5, InlierFamily::StudentT, 0.05, None).unwrap();
    for arm in 0..5 {
        assert_eq!(sample(&inst, arm, 1000, 9), sample(&inst, arm, 1000, 9));
        assert_ne!(sample(&inst, arm, 1000, 9), sample(&inst, arm, 1000, 10));
    }
}

#[test]
fn benchmark_means_descend_linearly() {
    for family in [InlierFamily::Pareto, InlierFamily::StudentT] {
        let inst = make_linear_means_instance(5, family, 0.0, Some(Outlier::None)).unwrap();
        for (a, &mu) in inst.true_means().iter().enumerate() {
            assert!((mu - (100.0 - 25.0 * a as f64)).abs() < 1e-12);
        }
        assert_eq!(inst.optimal_arm(), 0);
    }
}

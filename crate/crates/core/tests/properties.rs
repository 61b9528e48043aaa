use kernelflows::flow::KernelAtoms;
use kernelflows::skewbm::{decompose_v, local_time, recompose_z, sign_product_measure, skew_from_flips};
use kernelflows::stats::{ks_one_sample, ks_statistic, normal_cdf};
use kernelflows::{
    coalescing_map, flow_compose, generate_brownian, kernel_km, kernel_wiener, sample_npoint, stream, BrownianPath, Domain,
    ExcursionRegistry, Measure, TimeGrid,
};
use proptest::prelude::*;

fn path(seed: u64, steps: usize) -> BrownianPath {
    generate_brownian(TimeGrid::new(0.0, 1.0 / steps as f64, steps).unwrap(), &mut stream(seed, Domain::Path, 0))
}

fn measure() -> impl Strategy<Value = Measure> {
    prop_oneof![
        Just(Measure::Uniform),
        Just(Measure::DiracHalf),
        Just(Measure::FairBernoulli),
        (0.2f64..5.0).prop_map(|a| Measure::beta_symmetric(a).unwrap()),
        (0.01f64..0.49).prop_map(|d| Measure::atomic(&[(0.5, 0.5 - d), (0.5, 0.5 + d)]).unwrap()),
    ]
}

fn assert_probability(k: &KernelAtoms) {
    assert!(k.atoms().iter().all(|a| a.weight >= 0.0 && a.position.is_finite()));
    assert!((k.total_weight() - 1.0).abs() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accepted_measures_have_mean_one_half(m in measure()) {
        prop_assert!((m.mean() - 0.5).abs() <= 1e-12);
        for k in 1..6 {
            let a = m.alpha(k);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
        }
        prop_assert!((m.alpha(1) - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn uncentred_atomic_measures_are_rejected(w in 0.05f64..0.95, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let mean = w * x + (1.0 - w) * y;
        prop_assume!((mean - 0.5).abs() > 1e-6);
        prop_assert!(Measure::atomic(&[(w, x), (1.0 - w, y)]).is_err());
    }

    #[test]
    fn running_minimum_is_nonincreasing_with_valid_argmin(seed in any::<u64>(), s in 0usize..200) {
        let p = path(seed, 400);
        prop_assert_eq!(p.values()[0], 0.0);
        let ms = p.running_min(s);
        for t in s..=400 {
            if t > s {
                prop_assert!(ms.min_at(t) <= ms.min_at(t - 1));
            }
            let arg = ms.argmin_at(t);
            prop_assert!((s..=t).contains(&arg));
            prop_assert_eq!(p.values()[arg], ms.min_at(t));
        }
    }

    #[test]
    fn kernels_are_probability_measures(seed in any::<u64>(), m in measure(), s in 0usize..150, len in 0usize..150, x in -1.0f64..1.0) {
        let p = path(seed, 300);
        let mut reg = ExcursionRegistry::new(&m, seed ^ 1);
        let k = kernel_km(&p, &mut reg, s, s + len, x).unwrap();
        assert_probability(&k);
        prop_assert!(k.len() <= 2);
        assert_probability(&kernel_wiener(&p, s, s + len, x).unwrap());
    }

    #[test]
    fn flow_property_holds_on_the_grid(seed in any::<u64>(), m in measure(), a in 0usize..300, b in 0usize..300, c in 0usize..300, x in -1.0f64..1.0) {
        let mut idx = [a, b, c];
        idx.sort_unstable();
        let p = path(seed, 300);
        let mut reg = ExcursionRegistry::new(&m, seed);
        let composed = flow_compose(&p, &mut reg, idx[0], idx[1], idx[2], x).unwrap();
        let direct = kernel_km(&p, &mut reg, idx[0], idx[2], x).unwrap();
        let gap = composed.max_discrepancy(&direct);
        prop_assert!(matches!(gap, Some(g) if g <= 1e-12), "{:?} vs {:?}", composed, direct);
    }

    #[test]
    fn coalescing_flow_is_a_flow_of_maps(seed in any::<u64>(), s in 0usize..200, len in 0usize..100, x in -1.0f64..1.0) {
        let m = Measure::FairBernoulli;
        let p = path(seed, 300);
        let mut reg = ExcursionRegistry::new(&m, seed);
        let k = kernel_km(&p, &mut reg, s, s + len, x).unwrap();
        prop_assert_eq!(k.len(), 1);
        let y = coalescing_map(&p, &mut reg, s, s + len, x).unwrap();
        prop_assert_eq!(k.atoms()[0].position, y);
    }

    #[test]
    fn registry_lookups_do_not_depend_on_order(seed in any::<u64>(), keys in proptest::collection::vec(0usize..1000, 1..40)) {
        let m = Measure::Uniform;
        let mut fwd = ExcursionRegistry::new(&m, seed);
        let a: Vec<f64> = keys.iter().map(|&k| fwd.lookup(k)).collect();
        let mut rev = ExcursionRegistry::new(&m, seed);
        let mut b: Vec<f64> = keys.iter().rev().map(|&k| rev.lookup(k)).collect();
        b.reverse();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn n_point_positions_have_absolute_value_of_reflected_motion(seed in any::<u64>(), m in measure(), x0 in proptest::collection::vec(-0.5f64..0.5, 1..4)) {
        let p = path(seed, 300);
        let np = sample_npoint(&p, &m, &x0, &mut stream(seed, Domain::Signs, 0)).unwrap();
        for (i, &x) in x0.iter().enumerate() {
            for t in 0..=300 {
                let expected = match np.tau[i] {
                    Some(tau) if t >= tau => np.reflected[t],
                    _ => x + kernelflows::flow::sgn(x) * p.values()[t],
                };
                prop_assert!((np.positions[i][t].abs() - expected.abs()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn permuting_starts_permutes_coordinates(seed in any::<u64>(), x0 in proptest::collection::vec(-0.5f64..0.5, 2..4)) {
        // With the Dirac measure there are no random signs, so the joint law is a
        // deterministic function of the path and relabeling is exact.
        let m = Measure::DiracHalf;
        let p = path(seed, 200);
        let fwd = sample_npoint(&p, &m, &x0, &mut stream(seed, Domain::Signs, 0)).unwrap();
        let rev_x0: Vec<f64> = x0.iter().rev().copied().collect();
        let rev = sample_npoint(&p, &m, &rev_x0, &mut stream(seed, Domain::Signs, 0)).unwrap();
        let n = x0.len();
        for i in 0..n {
            for t in 0..=200 {
                let a = fwd.positions[i][t].abs();
                let b = rev.positions[n - 1 - i][t].abs();
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn skew_with_alpha_one_is_nonnegative(seed in any::<u64>()) {
        let p = path(seed, 500);
        let z = skew_from_flips(&p, 1.0, &mut stream(seed, Domain::Flips, 0)).unwrap();
        prop_assert!(z.z.iter().all(|&v| v >= 0.0));
        let z = skew_from_flips(&p, 0.0, &mut stream(seed, Domain::Flips, 0)).unwrap();
        prop_assert!(z.z.iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn decomposition_round_trips(seed in any::<u64>(), alpha in 0.0f64..1.0) {
        let p = path(seed, 500);
        let z = skew_from_flips(&p, alpha, &mut stream(seed, Domain::Flips, 0)).unwrap();
        let l = local_time(&p);
        let v = decompose_v(&z, &l).unwrap();
        let back = recompose_z(&v, alpha, &l);
        for (a, b) in back.iter().zip(&z.z) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn sign_product_measure_has_requested_alpha(alpha in 0.5f64..=1.0) {
        let m = sign_product_measure(alpha).unwrap();
        prop_assert!((m.mean() - 0.5).abs() <= 1e-12);
        prop_assert!((m.alpha(2) - alpha).abs() <= 1e-12);
    }

    #[test]
    fn ks_statistic_is_invariant_under_monotone_maps(seed in any::<u64>(), scale in 0.1f64..5.0, shift in -3.0f64..3.0) {
        let sample: Vec<f64> = generate_brownian(TimeGrid::new(0.0, 1.0, 200).unwrap(), &mut stream(seed, Domain::Probe, 0))
            .values()
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect();
        let base = ks_statistic(&sample, normal_cdf(1.0)).unwrap();
        let mapped: Vec<f64> = sample.iter().map(|x| (scale * x + shift).exp()).collect();
        let cdf = normal_cdf(1.0);
        let moved = ks_statistic(&mapped, |y: f64| cdf((y.ln() - shift) / scale)).unwrap();
        prop_assert!((base - moved).abs() <= 1e-12);
    }
}

#[test]
fn same_seed_gives_identical_paths_and_motions() {
    let m = Measure::beta_symmetric(2.0).unwrap();
    let run = || {
        let p = path(11, 1000);
        sample_npoint(&p, &m, &[0.0, 0.0, 0.3], &mut stream(11, Domain::Signs, 0)).unwrap().positions
    };
    assert_eq!(run(), run());
}

#[test]
fn origin_one_point_motion_is_brownian() {
    let m = Measure::Uniform;
    let ends: Vec<f64> = (0..4000)
        .map(|r| {
            let p = generate_brownian(TimeGrid::new(0.0, 1e-3, 1000).unwrap(), &mut stream(3, Domain::Path, r));
            let np = sample_npoint(&p, &m, &[0.0], &mut stream(3, Domain::Signs, r)).unwrap();
            np.positions[0][1000]
        })
        .collect();
    let report = ks_one_sample(&ends, normal_cdf(1.0)).unwrap();
    assert!(report.p_value > 1e-3, "{report:?}");
}

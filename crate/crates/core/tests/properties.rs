use proptest::prelude::*;

use ddsr::atoms::{atom, dirichlet};
use ddsr::evaluation::{self, NormBasis};
use ddsr::measurement::{build_g, forward_atoms, forward_direct};
use ddsr::model::{random_channel, random_identifier, Feature};
use ddsr::{ChannelSpec, ProblemDims};

fn small_dims() -> impl Strategy<Value = ProblemDims> {
    (1usize..=3, 2usize..=8, 2usize..=8, 0.0f64..=1.0).prop_map(|(t, n1, n2, frac)| {
        // T * Omega is an odd integer no larger than L1 and L2
        let j = (frac * n1.min(n2) as f64).floor() as usize;
        ProblemDims::new(t as f64, (2 * j + 1) as f64 / t as f64, n1, n2).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dirichlet_is_even_and_periodic(n in 0usize..20, x in -3.0f64..3.0) {
        let d = dirichlet(n, x);
        prop_assert!((d - dirichlet(n, -x)).abs() <= 1e-9 * (1.0 + d.abs()));
        prop_assert!((d - dirichlet(n, x + 1.0)).abs() <= 1e-8 * (1.0 + d.abs()));
        prop_assert!(d.abs() <= (2 * n + 1) as f64 + 1e-9);
    }

    #[test]
    fn atoms_sum_to_one(d in small_dims(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (t0, t1) = d.tau_bounds();
        let (n0, n1) = d.nu_bounds();
        let tau = t0 + a * (t1 - t0);
        let nu = n0 + b * (n1 - n0);
        let s: f64 = atom(&d, tau, nu).entries().iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn direct_sampling_matches_atoms(d in small_dims(), s in 0usize..5, seed in any::<u64>()) {
        let h = random_channel(&d, s, seed);
        let w = random_identifier(&d, seed ^ 0x5eed);
        let direct = forward_direct(&h, &w).unwrap();
        let exact = forward_atoms(&h, &build_g(&w)).unwrap();
        let scale = direct.norm().max(1.0);
        let diff: f64 = direct
            .values()
            .iter()
            .zip(exact.values())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        prop_assert!(diff <= 1e-9 * scale);
    }

    #[test]
    fn matching_ignores_feature_order(s in 1usize..6, seed in any::<u64>(), rot in 0usize..6) {
        let d = ProblemDims::new(1.0, 31.0, 15, 15).unwrap();
        let h = random_channel(&d, s, seed);
        let mut shuffled: Vec<Feature> = h.features().to_vec();
        shuffled.rotate_left(rot % s);
        let est = ChannelSpec::new(d, shuffled).unwrap();
        let m = evaluation::match_features(&h, &est);
        prop_assert_eq!(m.max_tau_err, 0.0);
        prop_assert_eq!(m.max_nu_err, 0.0);
        prop_assert_eq!(m.max_eta_err, 0.0);
        let op = evaluation::operator_norm_err(&h, &est, NormBasis::Trig, evaluation::default_points(&d));
        prop_assert!(op.abs_err <= 1e-12 * op.reference_norm.max(1.0));
    }

    #[test]
    fn channel_json_round_trips(s in 0usize..6, seed in any::<u64>()) {
        let d = ProblemDims::new(3.0, 5.0, 10, 12).unwrap();
        let h = random_channel(&d, s, seed);
        let back = ChannelSpec::from_json(&h.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, h);
    }
}

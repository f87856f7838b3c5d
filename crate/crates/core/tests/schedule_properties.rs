use proptest::prelude::*;
use salem_cantor::schedule::{
    branching_number, build_dyadic_schedule, build_flat_schedule, build_general_schedule, build_schedule, PhiSpec,
    Variant,
};
use salem_cantor::Error;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn binary_schedules_are_consistent(alpha in 0.2f64..0.95, levels in 40usize..48) {
        for s in [build_dyadic_schedule(alpha, levels).unwrap(), build_flat_schedule(alpha, levels).unwrap()] {
            prop_assert!(s.products_consistent());
            prop_assert!(s.start_level < s.levels);
            prop_assert!((1..=levels).all(|n| s.psi(n) == 2 && (1..=2).contains(&s.t(n))));
            // every level past the start admits the Bernstein step
            prop_assert!((s.start_level + 1..=levels).all(|n| s.bernstein_feasible(n)));
        }
    }

    #[test]
    fn short_schedules_fail_cleanly(alpha in 0.01f64..0.99, levels in 4usize..24) {
        for s in [build_dyadic_schedule(alpha, levels), build_flat_schedule(alpha, levels)] {
            match s {
                Ok(s) => prop_assert!(s.products_consistent()),
                Err(e) => prop_assert!(matches!(e, Error::Infeasible { .. }), "{e}"),
            }
        }
    }

    #[test]
    fn flat_theta_products_stay_bounded(alpha in 0.2f64..0.95) {
        let s = build_flat_schedule(alpha, 48).unwrap();
        // a forced single-digit prefix starts the product below the band
        prop_assume!(s.forced_prefix == 0);
        let (lo, hi) = s.theta_band();
        // greedy log tracking keeps the product within half a step of 1
        prop_assert!(lo >= 0.5f64.sqrt() - 1e-12 && hi <= 2f64.sqrt() + 1e-12, "{lo} {hi}");
    }

    #[test]
    fn progression_schedules(alpha in 0.3f64..0.8, frac in 0.5f64..1.0) {
        let beta = alpha * frac;
        let s = match build_general_schedule(alpha, beta, PhiSpec::log_power(1.0).unwrap(), beta < alpha, 10) {
            Ok(s) => s,
            Err(e) => {
                prop_assert!(matches!(e, Error::Infeasible { .. }), "{e}");
                return Ok(());
            }
        };
        prop_assert!(s.products_consistent());
        for n in 1..=10 {
            prop_assert!(1 <= s.tau(n) && s.tau(n) <= s.t(n) && s.t(n) + 2 <= s.psi(n));
        }
    }

    #[test]
    fn schedule_json_round_trip(alpha in 0.3f64..0.9, levels in 30usize..40) {
        let s = build_dyadic_schedule(alpha, levels).unwrap();
        let back: salem_cantor::schedule::BranchingSchedule = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        prop_assert_eq!(back.hash(), s.hash());
    }

    #[test]
    fn phi_descriptors_round_trip(eps in 0.1f64..3.0, c in 1.0f64..10.0) {
        for phi in [PhiSpec::log_power(eps).unwrap(), PhiSpec::parse(&format!("loglog:{c}")).unwrap()] {
            prop_assert_eq!(PhiSpec::parse(&phi.descriptor()).unwrap(), phi);
        }
    }
}

#[test]
fn branching_numbers_for_log_phi() {
    // phi(t) = log t gives psi(N) = ceil(sqrt(N ln 2)) + 2
    let phi = PhiSpec::log_power(1.0).unwrap();
    let psi: Vec<u64> = (1..=12).map(|n| branching_number(&phi, n)).collect();
    assert_eq!(psi, vec![3, 4, 4, 4, 4, 5, 5, 5, 5, 5, 5, 5]);
}

#[test]
fn dispatch_requires_phi_for_progressions() {
    assert!(build_schedule(Variant::Progression, 0.5, 0.5, None, 10).is_err());
    assert!(build_schedule(Variant::EndpointDecay, 0.5, 0.5, None, 10).is_ok());
    assert!(build_dyadic_schedule(1.2, 10).is_err());
    assert!(build_dyadic_schedule(0.5, 3).is_err());
}

use hamest::experiment::{loglog_fit, parse_delta_list};
use hamest::qcore::{hermitian_expm, max_abs, unitarity_defect, unitary_principal_log};
use hamest::random::{random_hermitian, random_traceless, trial_rng};
use hamest::symsub::{collective_trace_moments, SymSpace};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expm_is_unitary(seed in any::<u64>(), d in 2usize..6, t in -5.0f64..5.0) {
        let h = random_hermitian(&mut trial_rng(seed, 0), d);
        prop_assert!(unitarity_defect(hermitian_expm(&h, t).matrix()) < 1e-10);
    }

    #[test]
    fn log_inverts_expm_inside_branch(seed in any::<u64>(), d in 2usize..5) {
        let h = random_hermitian(&mut trial_rng(seed, 1), d);
        let h = h.scale(2.5 / h.op_norm().max(1e-12));
        let back = unitary_principal_log(&hermitian_expm(&h, 1.0)).unwrap();
        prop_assert!(max_abs(&(back.matrix() - h.matrix())) < 1e-8);
    }

    #[test]
    fn closed_form_moments(seed in any::<u64>(), d in 2usize..5, r in 1usize..6) {
        let space = SymSpace::occupation(d, r).unwrap();
        let x = random_traceless(&mut trial_rng(seed, 2), d);
        let t = collective_trace_moments(&space, &x).unwrap();
        let scale = t.m4_actual.max(1.0);
        prop_assert!((t.m2_actual - t.m2_predicted).abs() <= 1e-9 * scale);
        prop_assert!((t.m4_actual - t.m4_predicted).abs() <= 1e-9 * scale);
    }

    #[test]
    fn delta_list_round_trips(list in prop::collection::vec(1e-4f64..1.0, 1..8)) {
        let text = list.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        prop_assert_eq!(parse_delta_list(&text).unwrap(), list);
    }

    #[test]
    fn power_laws_fit_exactly(slope in -3.0f64..-0.5, a in 0.1f64..100.0) {
        let x = [0.2f64, 0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|v| a * v.powf(slope)).collect();
        let fit = loglog_fit(&x, &y).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
    }
}

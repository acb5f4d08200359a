use fiocalc_core::classes::{
    validate_amplitude, validate_phase, AmplitudeSpec, DecayFlags, OrderTriple, PhaseProfile, PhaseSpec, SamplePlan,
    DEFAULT_CAP,
};
use fiocalc_core::parse;
use proptest::prelude::*;

/// Amplitudes of orders (0, −k, −1) with improving decay in every block.
fn amplitude(c: f64, k: u32, w: f64) -> AmplitudeSpec {
    let e = parse(&format!("({c} + atan({w}*x1)) * jbr(y1)^-{k} * jbr(xi1)^-1"), 1).unwrap();
    AmplitudeSpec::new(e, 1, OrderTriple::new(0.0, -(k as f64), -1.0), DecayFlags::ALL).unwrap()
}

fn passes(a: &AmplitudeSpec) -> bool {
    validate_amplitude(a, 3, DEFAULT_CAP, &SamplePlan::default()).unwrap().passed
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn larger_orders_still_pass(c in 0.5f64..3.0, k in 1u32..3, w in 0.2f64..2.0,
                                d1 in 0.0f64..2.0, d2 in 0.0f64..2.0, d3 in 0.0f64..2.0) {
        let a = amplitude(c, k, w);
        prop_assert!(passes(&a));
        let o = a.orders;
        let wider = AmplitudeSpec::new(a.expr.clone(), 1, OrderTriple::new(o.m1 + d1, o.m2 + d2, o.m3 + d3), a.flags).unwrap();
        prop_assert!(passes(&wider));
    }

    #[test]
    fn dropping_a_flag_keeps_a_pass(c in 0.5f64..3.0, k in 1u32..3, w in 0.2f64..2.0,
                                    fx: bool, fxi: bool) {
        let a = amplitude(c, k, w);
        prop_assert!(passes(&a));
        let weaker = AmplitudeSpec::new(a.expr.clone(), 1, a.orders, DecayFlags::new(fx, false, fxi)).unwrap();
        prop_assert!(passes(&weaker));
    }

    #[test]
    fn unimodular_phase_passes_l2(c in 0.1f64..3.0, pick in 0usize..3) {
        let g = ["jbr(xi1)", "atan(xi1)", "xi1*jbr(xi1)^-1"][pick];
        let phi = PhaseSpec::new(parse(&format!("x1*xi1 + {c}*{g}"), 1).unwrap(), 1, PhaseProfile::L2).unwrap();
        let r = validate_phase(&phi, 3, DEFAULT_CAP, &SamplePlan::default()).unwrap();
        prop_assert!(r.passed, "{:?}", r.worst);
        prop_assert_eq!(r.phase.unwrap().c0, Some(1.0));
    }
}

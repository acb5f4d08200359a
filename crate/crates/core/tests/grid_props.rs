use fiocalc_core::classes::{AmplitudeSpec, DecayFlags, OrderTriple, PhaseProfile, PhaseSpec};
use fiocalc_core::composer::{psido_reduce, ExpandOptions};
use fiocalc_core::gridquant::{apply_fio, apply_psido, assemble_amplitude_op, opnorm, psido_op, DenseMatrix, Grid, GridField, LinearOp};
use fiocalc_core::{parse, CExpr};
use num_complex::Complex64;
use proptest::prelude::*;

fn datum(g: Grid, c: f64, w: f64, k: f64) -> GridField {
    GridField::from_fn(g, |x| Complex64::from_polar((-(x[0] - c).powi(2) / (2.0 * w * w)).exp(), k * x[0])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linear_phase_fio_is_the_psido(a in 0.2f64..2.0, b in -2.0f64..2.0,
                                     c in -3.0f64..3.0, w in 0.5f64..2.0, k in -2.0f64..2.0) {
        let g = Grid::new(1, 64, 12.0).unwrap();
        let sym = CExpr::real(parse(&format!("jbr(xi1)^-1 * ({a} + atan({b}*x1))"), 1).unwrap());
        let phi = PhaseSpec::new(parse("x1*xi1", 1).unwrap(), 1, PhaseProfile::L2).unwrap();
        let u = datum(g, c, w, k);
        let d = apply_fio(&sym, &phi, &u).unwrap().max_abs_diff(&apply_psido(&sym, &u).unwrap()).unwrap();
        prop_assert!(d <= 1e-12, "{d}");
    }

    #[test]
    fn dense_assembly_matches_reduced_symbol(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0,
                                             c in -2.0f64..2.0, w in 0.6f64..1.5, k in -1.5f64..1.5) {
        let g = Grid::new(1, 128, 16.0).unwrap();
        let a = AmplitudeSpec::new(parse(&format!("({c0} + {c1}*y1) * ({c2} + xi1)"), 1).unwrap(), 1,
                                   OrderTriple::new(0.0, 1.0, 1.0), DecayFlags::ALL).unwrap();
        let sym = psido_reduce(&a, 4, &ExpandOptions::unchecked()).unwrap().truncation(4);
        let phi = PhaseSpec::new(parse("x1*xi1", 1).unwrap(), 1, PhaseProfile::L2).unwrap();
        let u = datum(g, c, w, k);
        let want = assemble_amplitude_op(&a, &phi, g).unwrap().apply(&u).unwrap();
        let got = apply_psido(&sym, &u).unwrap();
        prop_assert!(got.max_abs_diff(&want).unwrap() <= 1e-8 * want.max_abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn norm_ignores_unitary_factors(a in 0.5f64..2.0, t in -3.0f64..3.0, seed in 0u64..1000) {
        let g = Grid::new(1, 64, 10.0).unwrap();
        let op = psido_op(&CExpr::real(parse(&format!("jbr(x1)^-1 * ({a} + jbr(xi1)^-1)"), 1).unwrap()), g).unwrap();
        let unitary = psido_op(&CExpr::expi(&parse(&format!("{t}*jbr(xi1)"), 1).unwrap()), g).unwrap();
        let n = g.len();
        let mut diag = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            diag[j * n + j] = Complex64::cis(t * g.node(j).sin());
        }
        let phase = LinearOp::from_dense("phase", g, DenseMatrix::new(n, diag));
        let base = opnorm(&op, 60, seed).unwrap().norm;
        for composed in [op.compose(&unitary).unwrap(), phase.compose(&op).unwrap()] {
            let n = opnorm(&composed, 60, seed).unwrap().norm;
            prop_assert!((n - base).abs() <= 1e-5 * base, "{n} vs {base}");
        }
    }
}

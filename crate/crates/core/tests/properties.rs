use pe_growth::lie::{bracket, closure_of};
use pe_growth::matcore::{conorm, expm, opnorm};
use pe_growth::rates::{monodromy, FeedbackSystem};
use pe_growth::signals::{reverse, validate_pe, PESignal, Segment, SignalClass};
use pe_growth::Matrix;
use proptest::prelude::*;

fn matrix(d: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |v| Matrix::from_row_slice(d, d, &v))
}

fn invertible(d: usize) -> impl Strategy<Value = Matrix> {
    matrix(d).prop_map(move |m| m + Matrix::identity(d, d) * 5.0)
}

/// Periodic signals on a coarse grid with values in `[0, 1]`.
fn signal() -> impl Strategy<Value = PESignal> {
    prop::collection::vec((1u32..5, 0.0f64..=1.0), 1..6).prop_map(|pieces| {
        let segs: Vec<Segment> = pieces
            .into_iter()
            .map(|(n, v)| Segment::new(n as f64 * 0.125, v))
            .collect();
        PESignal::periodic(segs).unwrap()
    })
}

fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    (a - b).amax() <= tol * (1.0 + a.amax().max(b.amax()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_antisymmetric_and_bilinear(
        x in matrix(3), y in matrix(3), z in matrix(3), s in -3.0f64..3.0
    ) {
        let xy = bracket(&x, &y).unwrap();
        prop_assert!(close(&xy, &(-bracket(&y, &x).unwrap()), 1e-14));
        let lhs = bracket(&(&x * s + &z), &y).unwrap();
        let rhs = xy * s + bracket(&z, &y).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn jacobi_identity(x in matrix(3), y in matrix(3), z in matrix(3)) {
        let b = |p: &Matrix, q: &Matrix| bracket(p, q).unwrap();
        let sum = b(&x, &b(&y, &z)) + b(&y, &b(&z, &x)) + b(&z, &b(&x, &y));
        prop_assert!(sum.amax() <= 1e-11);
    }

    #[test]
    fn closure_dimension_is_conjugation_invariant(
        x in matrix(3), y in matrix(3), p in invertible(3)
    ) {
        let pi = p.clone().try_inverse().unwrap();
        let conj = |m: &Matrix| &p * m * &pi;
        let dim = closure_of(&[x.clone(), y.clone()]).unwrap().dim;
        let dim_conj = closure_of(&[conj(&x), conj(&y)]).unwrap().dim;
        prop_assert_eq!(dim, dim_conj);
    }

    #[test]
    fn reverse_is_an_involution(s in signal()) {
        prop_assert_eq!(reverse(&reverse(&s).unwrap()).unwrap(), s);
    }

    #[test]
    fn excitation_level_is_shift_invariant(s in signal(), shift in 0.0f64..3.0) {
        let cls = SignalClass::new(0.5, 0.1).unwrap();
        let base = validate_pe(&s, &cls, None).unwrap();
        let moved = validate_pe(&s.shifted(shift).unwrap(), &cls, None).unwrap();
        prop_assert!((base.worst_integral - moved.worst_integral).abs() <= 1e-12);
        prop_assert_eq!(base.valid, moved.valid);
    }

    #[test]
    fn exponentials_invert(m in matrix(3), t in -1.0f64..1.0) {
        let prod = expm(&m, t).unwrap() * expm(&m, -t).unwrap();
        prop_assert!(close(&prod, &Matrix::identity(3, 3), 1e-11));
    }

    #[test]
    fn conorm_is_reciprocal_inverse_norm(m in invertible(3)) {
        let inv = m.clone().try_inverse().unwrap();
        let c = conorm(&m).unwrap();
        prop_assert!((c * opnorm(&inv) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn reversed_negated_monodromy_is_the_inverse(
        a in matrix(2), bk in prop::collection::vec(-2.0f64..2.0, 4), s in signal()
    ) {
        let b = Matrix::from_row_slice(2, 1, &bk[..2]);
        let k = Matrix::from_row_slice(1, 2, &bk[2..]);
        let sys = FeedbackSystem::new(&a, &b, &k).unwrap();
        let fwd = monodromy(&sys, &s).unwrap();
        let bwd = monodromy(&sys.negated(), &reverse(&s).unwrap()).unwrap();
        prop_assert_eq!(&bwd.r, &fwd.r_inv);
        prop_assert_eq!(bwd.bottom_rate.to_bits(), (-fwd.top_rate).to_bits());
    }
}

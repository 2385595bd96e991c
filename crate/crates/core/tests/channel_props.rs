use proptest::prelude::*;
use pqsim::channel::{
    choi_matrix, cp_threshold, exact_exponential, first_order_split, is_cptp, min_choi_eigenvalue, DenseOperator,
    EntanglementBreakingChannel, LindbladTerm, Superoperator,
};
use pqsim::linalg::{c, max_abs, CMat};

fn arb_superop() -> impl Strategy<Value = Superoperator> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16)
        .prop_map(|v| Superoperator::new(1, CMat::from_iterator(4, 4, v.into_iter().map(|(a, b)| c(a, b)))).unwrap())
}

fn arb_qubit_state() -> impl Strategy<Value = DenseOperator> {
    (0.0f64..1.0, 0.0f64..std::f64::consts::PI, 0.0f64..std::f64::consts::TAU).prop_map(|(r, th, ph)| {
        let (x, y, z) = (r * th.sin() * ph.cos(), r * th.sin() * ph.sin(), r * th.cos());
        let m = CMat::from_row_slice(2, 2, &[c(0.5 + z / 2.0, 0.0), c(x / 2.0, -y / 2.0), c(x / 2.0, y / 2.0), c(0.5 - z / 2.0, 0.0)]);
        DenseOperator::new(m).unwrap()
    })
}

proptest! {
    #[test]
    fn choi_is_linear(a in arb_superop(), b in arb_superop(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let lhs = choi_matrix(&a.combine(x, &b, y).unwrap()).into_matrix();
        let rhs = choi_matrix(&a).into_matrix().scale(x) + choi_matrix(&b).into_matrix().scale(y);
        prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn measure_and_prepare_channels_are_cptp(s0 in arb_qubit_state(), s1 in arb_qubit_state(), th in 0.0f64..3.0) {
        let v = [c(th.cos(), 0.0), c(th.sin(), 0.0)];
        let w = [c(-th.sin(), 0.0), c(th.cos(), 0.0)];
        let ch = EntanglementBreakingChannel::new(
            vec![DenseOperator::projector(&v).unwrap(), DenseOperator::projector(&w).unwrap()],
            vec![s0, s1],
        ).unwrap();
        prop_assert!(is_cptp(&ch.superoperator(), 1e-10));
    }

    #[test]
    fn dephasing_split_is_cp_above_threshold(rate in 0.1f64..5.0, excess in 0.0f64..3.0) {
        let z = DenseOperator::pauli_z().scale(rate.sqrt());
        let term = LindbladTerm::new(vec![0], None, vec![z]).unwrap();
        let th = cp_threshold(&term).unwrap();
        prop_assert!((th - rate).abs() < 1e-9 * rate.max(1.0));
        let split = first_order_split(&term, th + excess + 1e-9, 0.0).unwrap();
        prop_assert!(min_choi_eigenvalue(&split.channel) >= -1e-10);
        if th > 0.2 {
            let below = first_order_split(&term, th * 0.95, 0.0).unwrap();
            prop_assert!(min_choi_eigenvalue(&below.channel) < -1e-10);
        }
    }

    #[test]
    fn short_time_exponentials_are_cptp(tau in 0.0f64..2.0, gamma in 0.0f64..3.0) {
        let lower = DenseOperator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap().scale(gamma.sqrt());
        let h = DenseOperator::pauli_x().kron(&DenseOperator::pauli_x());
        let term = LindbladTerm::new(vec![0, 1], Some(h), vec![lower.kron(&DenseOperator::identity(1))]).unwrap();
        prop_assert!(is_cptp(&exact_exponential(&term, tau).unwrap(), 1e-9));
    }
}

#[test]
fn hamiltonian_terms_have_no_cp_threshold() {
    let term = LindbladTerm::new(vec![0, 1], Some(DenseOperator::swap()), vec![]).unwrap();
    assert!(cp_threshold(&term).is_none());
    assert!(min_choi_eigenvalue(&first_order_split(&term, 50.0, 0.0).unwrap().channel) < 0.0);
}

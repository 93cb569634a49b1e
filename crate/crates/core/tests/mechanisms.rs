mod common;

use approx::assert_abs_diff_eq;
use common::{arb_joint, arb_kernel};
use nalgebra::DMatrix;
use privacy_funnel::mechanisms::*;
use privacy_funnel::probcore::families;
use privacy_funnel::probcore::*;
use proptest::prelude::*;

#[test]
fn frl_on_bsc() {
    let j = families::bsc(0.3).unwrap();
    let rep = frl(&j);
    assert_eq!(rep.cardinality(), 3);
    for (a, b) in rep.p_u.iter().zip([0.3, 0.4, 0.3]) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
    }
    assert_eq!(rep.f, vec![vec![0, 0], vec![0, 1], vec![1, 1]]);
    let s = Mechanism::from_rep(&j, &rep).unwrap().summary(LogBase::Bits).unwrap();
    assert!(s.i_ux.abs() <= 1e-12);
    assert!(s.h_y_given_xu.abs() <= 1e-12);
}

#[test]
fn frl_merges_coincident_breakpoints() {
    let j = families::bsc(0.5).unwrap();
    let rep = frl(&j);
    assert_eq!(rep.cardinality(), 2);
    assert!(rep.p_u.iter().all(|&p| p > 0.0));
}

#[test]
fn frl_independent_pair() {
    let j = JointDist::from_rows(&[vec![0.1, 0.3, 0.1], vec![0.1, 0.3, 0.1]]).unwrap();
    let rep = frl(&j);
    assert_eq!(rep.f, vec![vec![0, 0], vec![1, 1], vec![2, 2]]);
    for (a, b) in rep.p_u.iter().zip(j.py()) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
    }
}

#[test]
fn efrl_bsc_budget() {
    let j = families::bsc(0.3).unwrap();
    let rep = efrl(&j, 0.1, LogBase::Bits).unwrap();
    assert_abs_diff_eq!(rep.alpha, 0.1, epsilon = 1e-15);
    let s = Mechanism::from_rep(&j, &rep).unwrap().summary(LogBase::Bits).unwrap();
    assert_abs_diff_eq!(s.i_ux, 0.1, epsilon = 1e-9);
    // L1 = H(Y) - H(X) + eps = eps for uniform binary X and Y.
    assert!(s.i_uy >= 0.1 - 1e-9);
    assert!(rep.atoms.iter().any(|a| a.contains(DUMMY)));
}

#[test]
fn efrl_zero_budget_is_frl() {
    let j = families::bsc(0.2).unwrap();
    let a = frl(&j);
    let b = efrl(&j, 0.0, LogBase::Bits).unwrap();
    assert_eq!(a.f, b.f);
    assert_eq!(a.p_u, b.p_u);
}

#[test]
fn efrl_rejects_out_of_range_budgets() {
    let j = families::bsc(0.3).unwrap();
    assert!(efrl(&j, 0.2, LogBase::Bits).is_err());
    assert!(efrl(&j, -0.01, LogBase::Bits).is_err());
    let x_const = JointDist::from_rows(&[vec![0.4, 0.6]]).unwrap();
    assert!(efrl(&x_const, 0.0, LogBase::Bits).is_err());
}

#[test]
fn efrl_deterministic_x_of_y_is_tight() {
    // X = f(Y): y0,y1 -> x0 and y2 -> x1.
    let j = JointDist::from_rows(&[vec![0.2, 0.3, 0.0], vec![0.0, 0.0, 0.5]]).unwrap();
    let eps = 0.3;
    let rep = efrl(&j, eps, LogBase::Nats).unwrap();
    let s = Mechanism::from_rep(&j, &rep).unwrap().summary(LogBase::Nats).unwrap();
    assert_abs_diff_eq!(s.i_uy, j.h_y_given_x() + eps, epsilon = 1e-9);
}

#[test]
fn entropy_cap_cases() {
    let j = families::bsc(0.3).unwrap();
    let rep = efrl(&j, 0.1, LogBase::Bits).unwrap();
    let cap = entropy_cap_check(&j, &rep, 0.1, LogBase::Bits);
    assert!(cap.holds && cap.margin > 0.0);

    let indep = JointDist::from_rows(&[vec![0.15, 0.35], vec![0.15, 0.35]]).unwrap();
    let cap = entropy_cap_check(&indep, &frl(&indep), 0.0, LogBase::Bits);
    assert_abs_diff_eq!(cap.h_u, indep.h_y() / std::f64::consts::LN_2, epsilon = 1e-12);
    assert!(cap.holds);

    let det = JointDist::from_rows(&[vec![0.3, 0.0], vec![0.0, 0.7]]).unwrap();
    let cap = entropy_cap_check(&det, &efrl(&det, 0.0, LogBase::Bits).unwrap(), 0.0, LogBase::Bits);
    assert!(cap.h_u.abs() <= 1e-12 && cap.cap.abs() <= 1e-12);
}

#[test]
fn constant_release_decomposes_trivially() {
    let j = families::bsc(0.1).unwrap();
    let k = Kernel::new(DMatrix::from_element(1, 2, 1.0)).unwrap();
    let d = decompose_utility(&Mechanism::from_kernel_uy(&j, &k).unwrap(), LogBase::Nats).unwrap();
    assert!(d.i_yu.abs() < 1e-15 && d.i_xu.abs() < 1e-15 && d.i_xu_given_y.abs() < 1e-15);
    assert_abs_diff_eq!(d.h_y_given_ux, d.h_y_given_x, epsilon = 1e-15);
}

#[test]
fn sfrl_single_output_leaks_nothing() {
    let j = JointDist::from_rows(&[vec![0.3], vec![0.7]]).unwrap();
    let s = sfrl_sample(&j, SamplingConfig::new(200, 1), LogBase::Bits).unwrap();
    assert_eq!(s.max_selected_index, 1);
    assert!(s.summary.i_ux.abs() < 1e-12 && s.summary.i_xu_given_y.abs() < 1e-12);
}

#[test]
fn sfrl_independent_pair_picks_first_arrival() {
    let j = JointDist::from_rows(&[vec![0.12, 0.28], vec![0.18, 0.42]]).unwrap();
    let s = sfrl_sample(&j, SamplingConfig::new(500, 9), LogBase::Bits).unwrap();
    assert_eq!(s.max_selected_index, 1);
    assert!(s.summary.i_ux.abs() < 1e-12);
}

#[test]
fn sfrl_is_deterministic() {
    let j = families::bsc(0.3).unwrap();
    let a = sfrl_sample(&j, SamplingConfig::new(2000, 7), LogBase::Bits).unwrap();
    let b = sfrl_sample(&j, SamplingConfig::new(2000, 7), LogBase::Bits).unwrap();
    assert_eq!(a.mechanism.joint().data(), b.mechanism.joint().data());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = sfrl_sample(&j, SamplingConfig::new(2000, 8), LogBase::Bits).unwrap();
    assert_ne!(a.mechanism.joint().data(), c.mechanism.joint().data());
}

#[test]
fn sfrl_representation_properties() {
    let j = families::bsc(0.3).unwrap();
    let s = sfrl_sample(&j, SamplingConfig::new(5000, 3), LogBase::Bits).unwrap();
    assert!(s.summary.i_ux.abs() < 1e-9, "{}", s.summary.i_ux);
    assert!(s.summary.h_y_given_xu.abs() < 1e-9);
    assert!(s.summary.i_xu_given_y <= s.bound);
    assert!(s.alt_bound < s.bound);
    assert!(s.warning.is_none());
}

#[test]
fn esfrl_zero_budget_matches_sfrl() {
    let j = families::bsc(0.3).unwrap();
    let cfg = SamplingConfig::new(1000, 5);
    let a = sfrl_sample(&j, cfg, LogBase::Bits).unwrap();
    let b = esfrl_sample(&j, 0.0, cfg, LogBase::Bits).unwrap();
    assert_eq!(a.mechanism.joint().data(), b.mechanism.joint().data());
}

#[test]
fn esfrl_bsc_budget_within_three_sigma() {
    let j = families::bsc(0.3).unwrap();
    let n = 100_000;
    let s = esfrl_sample(&j, 0.1, SamplingConfig::new(n, 11), LogBase::Bits).unwrap();
    // H(X) = 1 bit, so I(X;U) = revealed fraction.
    let sigma = (0.1 * 0.9 / n as f64).sqrt();
    assert!((s.summary.i_ux - 0.1).abs() <= 3.0 * sigma, "{}", s.summary.i_ux);
    assert_abs_diff_eq!(s.summary.i_ux, s.revealed_fraction, epsilon = 1e-9);
    assert!(s.summary.i_xu_given_y <= s.bound);
}

#[test]
fn esfrl_deterministic_x_bound_drops_h_x_given_y() {
    let j = JointDist::from_rows(&[vec![0.2, 0.3, 0.0], vec![0.0, 0.0, 0.5]]).unwrap();
    let s = esfrl_sample(&j, 0.2, SamplingConfig::new(100, 2), LogBase::Nats).unwrap();
    let li = (j.mutual_information() + 1.0).ln() + 4.0;
    assert_abs_diff_eq!(s.bound, (1.0 - s.alpha) * li, epsilon = 1e-12);
}

proptest! {
    #[test]
    fn frl_invariants(j in arb_joint(1..4, 1..5)) {
        let rep = frl(&j);
        prop_assert!(rep.cardinality() <= j.nx() * (j.ny() - 1) + 1);
        let induced = rep.induced_channel(j.ny());
        prop_assert!((induced - j.p_y_given_x().matrix()).abs().max() <= 1e-9);
        let m = Mechanism::from_rep(&j, &rep).unwrap();
        prop_assert!(m.reproduction_error(&j).unwrap() <= 1e-9);
        let s = m.summary(LogBase::Nats).unwrap();
        prop_assert!(s.i_ux.abs() <= 1e-9);
        prop_assert!(s.h_y_given_xu.abs() <= 1e-9);
        let cap = entropy_cap_check(&j, &rep, 0.0, LogBase::Nats);
        prop_assert!(cap.holds, "margin {}", cap.margin);
    }

    #[test]
    fn efrl_spends_exact_budget(j in arb_joint(2..4, 2..5), frac in 0.0f64..0.999) {
        prop_assume!(j.mutual_information() > 1e-6);
        let eps = frac * j.mutual_information();
        let rep = efrl(&j, eps, LogBase::Nats).unwrap();
        prop_assert!(rep.cardinality() <= (j.nx() * (j.ny() - 1) + 1) * (j.nx() + 1));
        let s = Mechanism::from_rep(&j, &rep).unwrap().summary(LogBase::Nats).unwrap();
        prop_assert!((s.i_ux - eps).abs() <= 1e-9);
        prop_assert!(s.h_y_given_xu.abs() <= 1e-9);
        prop_assert!(entropy_cap_check(&j, &rep, eps, LogBase::Nats).holds);
    }

    #[test]
    fn key_identity(j in arb_joint(2..4, 2..4), k in arb_kernel(1..5, 9)) {
        let cols = j.nx() * j.ny();
        let k = Kernel::new(k.matrix().columns(0, cols).into_owned()).unwrap();
        let m = Mechanism::from_kernel_uxy(&j, &k).unwrap();
        let d = decompose_utility(&m, LogBase::Nats).unwrap();
        prop_assert!(d.residual.abs() <= 1e-9);
    }
}

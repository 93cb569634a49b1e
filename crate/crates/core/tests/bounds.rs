mod common;

use approx::assert_abs_diff_eq;
use common::arb_joint;
use nalgebra::DMatrix;
use privacy_funnel::bounds::*;
use privacy_funnel::probcore::{binary_entropy, families, Kernel, ProbVec};
use privacy_funnel::probcore::{JointDist, LogBase};
use proptest::prelude::*;

const BITS: LogBase = LogBase::Bits;

/// Midpoint Riemann sum of the integral with `n` cells.
fn riemann_integral(j: &JointDist, n: usize) -> f64 {
    let px = j.px();
    let k = j.p_y_given_x();
    let mut total = 0.0;
    for y in 0..j.ny() {
        for s in 0..n {
            let t = (s as f64 + 0.5) / n as f64;
            let g: f64 = (0..j.nx()).filter(|&x| k.matrix()[(y, x)] >= t).map(|x| px[x]).sum();
            if g > 0.0 {
                total += g * g.ln() / n as f64;
            }
        }
    }
    total
}

/// Channels with entries on a 1/1000 grid: every threshold is a cell edge of
/// the midpoint rule below, so the Riemann sum is exact up to rounding.
fn arb_grid_channel() -> impl Strategy<Value = JointDist> {
    (2usize..4, 2usize..4).prop_flat_map(|(nx, ny)| {
        (prop::collection::vec(0.05f64..1.0, nx), prop::collection::vec(prop::collection::vec(0u32..1000, ny - 1), nx))
            .prop_filter_map("P_Y needs full support", move |(w, cuts)| {
                let total: f64 = w.iter().sum();
                let px = ProbVec::new(w.iter().map(|v| v / total).collect()).unwrap();
                let mut k = DMatrix::zeros(ny, nx);
                for (x, c) in cuts.iter().enumerate() {
                    let mut c = c.clone();
                    c.sort_unstable();
                    c.push(1000);
                    let mut prev = 0;
                    for (y, &v) in c.iter().enumerate() {
                        k[(y, x)] = f64::from(v - prev) / 1000.0;
                        prev = v;
                    }
                }
                JointDist::from_channel(&px, &Kernel::new(k).unwrap()).ok()
            })
    })
}

#[test]
fn bsc_h0_values() {
    let j = families::bsc(0.3).unwrap();
    let r = h0_report(&j, BITS);
    assert_abs_diff_eq!(r.value("u02").unwrap(), 0.6, epsilon = 1e-12);
    assert_abs_diff_eq!(r.value("u01").unwrap(), binary_entropy(0.3, BITS), epsilon = 1e-12);
    assert_abs_diff_eq!(efi_integral(&j, BITS), -(1.0 - 0.6), epsilon = 1e-12);
    assert!(r.get("h0_exact").unwrap().valid);
}

#[test]
fn erasure_h0_values() {
    let j = families::erasure(0.3).unwrap();
    let r = h0_report(&j, BITS);
    let h = binary_entropy(0.3, BITS);
    assert_abs_diff_eq!(r.value("u01").unwrap(), h, epsilon = 1e-12);
    assert_abs_diff_eq!(r.value("u02").unwrap(), h, epsilon = 1e-12);
    assert!(!r.get("h0_exact").unwrap().valid);
}

#[test]
fn deterministic_channels_and_efi() {
    // Y = g(X): x0 -> y0, x1 -> y1, x2 -> y1.
    let yg = JointDist::from_rows(&[vec![0.2, 0.0], vec![0.0, 0.5], vec![0.0, 0.3]]).unwrap();
    // g_y(t) = P_Y(y) on (0, 1], so the integral term is H(Y) = I(X;Y).
    assert_abs_diff_eq!(efi_integral(&yg, LogBase::Nats), -yg.h_y(), epsilon = 1e-12);
    assert_abs_diff_eq!(efi_lower(&yg, BITS), 0.0, epsilon = 1e-12);
    assert!(!positivity_condition(&yg, 0.0, BITS).unwrap().necessary);

    // X = f(Y).
    let xf = JointDist::from_rows(&[vec![0.2, 0.3, 0.0], vec![0.0, 0.0, 0.5]]).unwrap();
    assert!(efi_lower(&xf, BITS).abs() <= 1e-12);
    let r = h0_report(&xf, BITS);
    assert_abs_diff_eq!(r.value("u01").unwrap(), r.value("u02").unwrap(), epsilon = 1e-12);
    let p = positivity_condition(&xf, 0.0, BITS).unwrap();
    assert!(p.necessary && p.sufficient);
}

#[test]
fn bsc_positivity_evaluates() {
    let j = families::bsc(0.3).unwrap();
    let p = positivity_condition(&j, 0.05, BITS).unwrap();
    let h = binary_entropy(0.3, BITS);
    let i = 1.0 - h;
    let alpha = 0.05;
    let c = (i + 1.0).log2() + 4.0;
    let expect = h - alpha * h - (1.0 - alpha) * h.min(c);
    assert_abs_diff_eq!(p.sufficient_margin, expect, epsilon = 1e-12);
    assert!(p.necessary);
    assert_eq!(p.sufficient, expect > 0.0);
}

#[test]
fn mi_bounds_tight_when_x_is_function_of_y() {
    let xf = JointDist::from_rows(&[vec![0.2, 0.3, 0.0], vec![0.0, 0.0, 0.5]]).unwrap();
    let g0 = xf.h_y_given_x() / std::f64::consts::LN_2;
    let r = h_bounds_mi(&xf, 0.2, g0, BITS).unwrap();
    let up = r.value("upper").unwrap();
    assert_abs_diff_eq!(r.value("l1").unwrap(), up, epsilon = 1e-12);
    assert_abs_diff_eq!(r.value("l3").unwrap(), up, epsilon = 1e-12);
    let eq = equality_detector(&xf, 0.2, BITS).unwrap();
    assert_abs_diff_eq!(eq.value.unwrap(), up, epsilon = 1e-12);
}

#[test]
fn l2_beats_l1_for_independent_pair_with_large_entropy() {
    // X uniform on 32 symbols (5 bits), Y independent and uniform on 2.
    let j = JointDist::from_rows(&vec![vec![1.0 / 64.0; 2]; 32]).unwrap();
    let r = h_bounds_mi(&j, 0.0, 0.0, BITS).unwrap();
    assert!(r.value("l2").unwrap() > r.value("l1").unwrap());
    assert!(h_bounds_mi(&j, 0.01, 0.0, BITS).is_err());
}

#[test]
fn zero_budget_lower_bounds() {
    let j = families::bsc(0.2).unwrap();
    let r = h_bounds_mi(&j, 0.0, 0.0, BITS).unwrap();
    let h0 = h0_report(&j, BITS);
    assert_abs_diff_eq!(r.value("l1").unwrap(), h0.value("l01").unwrap(), epsilon = 1e-15);
    assert_abs_diff_eq!(r.value("l2").unwrap(), h0.value("l02").unwrap(), epsilon = 1e-15);
}

#[test]
fn l02_width_to_the_converse_is_five() {
    let j = families::bsc(0.2).unwrap();
    let bits = |v| BITS.from_nats(v);
    let converse = bits(j.h_y_given_x()) - (bits(j.mutual_information()) + 1.0).log2() + 1.0;
    let l02 = h0_report(&j, BITS).value("l02").unwrap();
    assert_abs_diff_eq!(converse - l02, 5.0, epsilon = 1e-12);
}

#[test]
fn rejects_budget_at_mutual_information() {
    let j = families::bsc(0.3).unwrap();
    let i = j.mutual_information() / std::f64::consts::LN_2;
    assert!(h_bounds_mi(&j, i, 0.0, BITS).is_err());
    assert!(equality_detector(&j, 0.0, BITS).unwrap().value.is_none());
}

#[test]
fn identity_channel_equality_value_is_eps() {
    let j = JointDist::from_rows(&[vec![0.4, 0.0], vec![0.0, 0.6]]).unwrap();
    let eq = equality_detector(&j, 0.1, BITS).unwrap();
    assert_abs_diff_eq!(eq.value.unwrap(), 0.1, epsilon = 1e-12);
}

#[test]
fn pinsker_arithmetic() {
    let z = pinsker_convert(0.0, 0.3).unwrap();
    assert_eq!((z.eps_bar, z.eps_prime, z.eps_tilde), (0.0, 0.0, 0.0));
    assert_abs_diff_eq!(pinsker_convert(0.02, 0.5).unwrap().eps_bar, 0.2, epsilon = 1e-15);
    let c = pinsker_convert(0.1, 0.4).unwrap();
    assert_abs_diff_eq!(c.eps_tilde, 0.2, epsilon = 1e-15);
    assert_abs_diff_eq!(c.eps_prime, 0.025, epsilon = 1e-15);
    assert!(pinsker_convert(0.1, 0.0).is_err());
}

#[test]
fn perletter_zero_budget() {
    let j = families::erasure(0.25).unwrap();
    let r = perletter_closed_bounds(&j, 0.0, BITS).unwrap();
    let h0 = h0_report(&j, BITS);
    assert_abs_diff_eq!(r.value("l_hwl1").unwrap(), h0.value("l01").unwrap(), epsilon = 1e-12);
    assert_abs_diff_eq!(r.value("u_hl").unwrap(), h0.value("u01").unwrap(), epsilon = 1e-15);
}

#[test]
fn perletter_omits_lower_bounds_out_of_range() {
    let j = families::bsc(0.45).unwrap();
    let r = perletter_closed_bounds(&j, 0.5, BITS).unwrap();
    assert!(r.get("l_hwl1").is_none() && r.get("u_hl").is_some());
    assert_eq!(r.notes.len(), 1);
}

#[test]
fn perletter_x_function_of_y_converges() {
    let xf = JointDist::from_rows(&[vec![0.2, 0.3, 0.0], vec![0.0, 0.0, 0.5]]).unwrap();
    let h = xf.h_y_given_x() / std::f64::consts::LN_2;
    let r = perletter_closed_bounds(&xf, 1e-7, BITS).unwrap();
    assert!((r.value("u_gwl").unwrap() - h).abs() < 1e-5);
    assert!((r.value("l_hwl1").unwrap() - h).abs() < 1e-5);
}

fn deterministic_prioritized() -> PrioritizedJoint {
    // Y uniform on 4 symbols; X1 = y / 2, X2 = y % 2.
    let mut p = vec![vec![vec![0.0; 4]; 2]; 2];
    for y in 0..4 {
        p[y / 2][y % 2][y] = 0.25;
    }
    PrioritizedJoint::from_nested(&p).unwrap()
}

#[test]
fn prioritized_deterministic_is_tight() {
    let r = prioritized_bounds(&deterministic_prioritized(), 0.3, BITS).unwrap();
    assert!((r.value("up1").unwrap() - r.value("lp1").unwrap()).abs() <= 1e-12);
}

#[test]
fn prioritized_x1_function_of_y_ordering() {
    // X1 = y / 2, X2 noisy.
    let mut p = vec![vec![vec![0.0; 4]; 2]; 2];
    for y in 0..4 {
        p[y / 2][y % 2][y] = 0.2;
        p[y / 2][1 - y % 2][y] = 0.05;
    }
    let r = prioritized_bounds(&PrioritizedJoint::from_nested(&p).unwrap(), 0.1, BITS).unwrap();
    let (l1, l2, l3) = (r.value("lp1").unwrap(), r.value("lp2").unwrap(), r.value("lp3").unwrap());
    assert!(l1 >= l3 && l3 >= l2, "{l1} {l2} {l3}");
}

#[test]
fn prioritized_rejects_constant_x2() {
    let p = vec![vec![vec![0.25, 0.25]], vec![vec![0.25, 0.25]]];
    let pj = PrioritizedJoint::from_nested(&p).unwrap();
    assert!(prioritized_bounds(&pj, 0.1, BITS).is_err());
}

proptest! {
    #[test]
    fn sandwich_and_monotonicity(j in arb_joint(2..4, 2..5), f1 in 0.0f64..0.45, f2 in 0.5f64..0.99) {
        let i = j.mutual_information();
        prop_assume!(i > 1e-6);
        let nats = LogBase::Nats;
        let a = h_bounds_mi(&j, f1 * i, 0.0, nats).unwrap();
        let b = h_bounds_mi(&j, f2 * i, 0.0, nats).unwrap();
        for r in [&a, &b] {
            prop_assert!(r.worst_violation() <= 1e-12);
        }
        for id in ["l1", "l3", "upper"] {
            prop_assert!(b.value(id).unwrap() > a.value(id).unwrap());
        }
        // Gap of l2 over its zero-budget form.
        let eps = f2 * i;
        let gap = b.value("l2").unwrap() - (j.h_y_given_x() - sfrl_constant(i, nats));
        let expect = eps + eps / j.h_x() * (sfrl_constant(i, nats) - j.h_x_given_y());
        prop_assert!((gap - expect).abs() <= 1e-12);
        prop_assert!(gap > 0.0);
    }

    #[test]
    fn h0_bounds_are_ordered(j in arb_joint(2..4, 2..5)) {
        let r = h0_report(&j, LogBase::Nats);
        prop_assert!(r.worst_violation() <= 1e-9);
        prop_assert!(r.value("psi_lower").unwrap() <= j.h_x_given_y() + 1e-9);
    }

    #[test]
    fn efi_matches_riemann(j in arb_grid_channel()) {
        let exact = efi_integral(&j, LogBase::Nats);
        prop_assert!((exact - riemann_integral(&j, 100_000)).abs() <= 1e-6);
    }

    #[test]
    fn efi_vanishes_for_x_function_of_y(ny in 2usize..6, w in prop::collection::vec(0.05f64..1.0, 6), f in prop::collection::vec(0usize..3, 6)) {
        // X = f(Y) with every x in the image.
        let nx = 2 + (ny > 3) as usize;
        let map: Vec<usize> = (0..ny).map(|y| if y < nx { y } else { f[y] % nx }).collect();
        let total: f64 = w[..ny].iter().sum();
        let rows: Vec<Vec<f64>> = (0..nx)
            .map(|x| (0..ny).map(|y| if map[y] == x { w[y] / total } else { 0.0 }).collect())
            .collect();
        let j = JointDist::from_rows(&rows).unwrap();
        prop_assert!((efi_integral(&j, LogBase::Nats) + j.mutual_information()).abs() <= 1e-9);
    }

    #[test]
    fn prioritized_independent_high_entropy(eps in 0.0f64..1.0) {
        // X1 uniform on 4, X2 uniform on 8, Y independent uniform on 2: H(X1,X2) = 5 bits.
        let p = vec![vec![vec![1.0 / 64.0; 2]; 8]; 4];
        let pj = PrioritizedJoint::from_nested(&p).unwrap();
        let r = prioritized_bounds(&pj, eps, BITS).unwrap();
        let l1 = r.value("lp1").unwrap();
        prop_assert!(r.value("lp2").unwrap() >= l1);
        prop_assert!(r.value("lp3").unwrap() >= l1);
        prop_assert!(r.worst_violation() <= 1e-12);
    }
}

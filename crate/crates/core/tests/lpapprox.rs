use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use privacy_funnel::geometry::build_context;
use privacy_funnel::lpapprox::*;
use privacy_funnel::probcore::{binary_entropy, families};
use privacy_funnel::probcore::{JointDist, LogBase};
use privacy_funnel::Error;
use proptest::prelude::*;

const NATS: LogBase = LogBase::Nats;

fn matrix1() -> JointDist {
    JointDist::from_rows(&[vec![0.693, 0.027, 0.108, 0.072], vec![0.006, 0.085, 0.004, 0.005]]).unwrap()
}

fn matrix2() -> JointDist {
    JointDist::from_rows(&[vec![0.350, 0.025, 0.085, 0.040], vec![0.025, 0.425, 0.035, 0.015]]).unwrap()
}

fn tiny() -> JointDist {
    JointDist::from_rows(&[vec![0.24, 0.08, 0.18], vec![0.06, 0.32, 0.12]]).unwrap()
}

/// `P_{X|Y}` columns and `P_Y` of the four-output example.
fn four_output() -> JointDist {
    let cols = [[0.3, 0.7], [0.8, 0.2], [0.5, 0.5], [0.4, 0.6]];
    let py = [0.5, 0.25, 0.125, 0.125];
    JointDist::new(DMatrix::from_fn(2, 4, |x, y| cols[y][x] * py[y])).unwrap()
}

fn check(r: &ApproxResult) {
    assert!(r.certificate.holds, "{:?}", r.certificate);
    assert!(r.certificate.lp_primal_residual <= 1e-9);
    assert!(r.certificate.lp_dual_infeasibility <= 1e-9);
    assert!(r.certificate.lp_duality_gap <= 1e-9);
    assert!(r.utility_lb >= r.approx - 1e-12);
}

#[test]
fn g0_erasure_is_binary_entropy() {
    for theta in [0.1, 0.3, 0.6] {
        let r = solve_g0(&families::erasure(theta).unwrap(), LogBase::Bits).unwrap();
        assert_abs_diff_eq!(r.utility_lb, binary_entropy(theta, LogBase::Bits), epsilon = 1e-9);
        check(&r);
    }
}

#[test]
fn g0_invertible_kernel_is_zero() {
    let r = solve_g0(&families::bsc(0.3).unwrap(), LogBase::Bits).unwrap();
    assert_eq!(r.utility_lb, 0.0);
    assert!(!r.flags.is_empty());
}

#[test]
fn g0_frozen_values() {
    // Independent solutions: HiGHS on the vertex LP and a subset enumeration.
    assert_abs_diff_eq!(solve_g0(&matrix1(), NATS).unwrap().utility_lb, 0.590_078_248_413_436_5, epsilon = 1e-9);
    assert_abs_diff_eq!(solve_g0(&matrix2(), NATS).unwrap().utility_lb, 0.464_224_732_487_354_5, epsilon = 1e-9);
    assert_abs_diff_eq!(solve_g0(&tiny(), NATS).unwrap().utility_lb, 0.448_077_609_161_733_45, epsilon = 1e-9);
    assert_abs_diff_eq!(solve_g0(&four_output(), NATS).unwrap().utility_lb, 0.634_408_472_289_730_5, epsilon = 1e-9);
}

#[test]
fn zero_budget_reduces_to_g0() {
    let g0 = solve_g0(&matrix1(), NATS).unwrap().utility_lb;
    for p in [Problem::Wl, Problem::L] {
        let r = solve_g(&matrix1(), 0.0, p, NATS, &LpOptions::default()).unwrap();
        assert_abs_diff_eq!(r.utility_lb, g0, epsilon = 1e-12);
    }
}

#[test]
fn matrix1_l_criterion_values() {
    // Reference LP (HiGHS over the same multisets) at three budgets. The
    // exact utility depends on which optimal vertex is returned, so only
    // the LP optimum is pinned.
    for (eps, approx) in [(0.004, 0.590_411_5), (0.008, 0.590_742_8), (0.012, 0.591_072_0)] {
        let r = solve_g_l(&matrix1(), eps, NATS).unwrap();
        check(&r);
        assert_abs_diff_eq!(r.approx, approx, epsilon = 1e-6);
        assert!(r.utility_lb <= r.upper_bounds.fine.unwrap());
    }
}

#[test]
fn matrix1_wl_criterion_value() {
    let r = solve_g_wl(&matrix1(), 0.005, NATS).unwrap();
    check(&r);
    assert_abs_diff_eq!(r.approx, 0.594_61, epsilon = 1e-5);
}

#[test]
fn matrix2_upper_bound_ordering() {
    // Below 0.0705 the fine upper bound is the tighter one.
    for eps in [0.01, 0.03, 0.05, 0.07] {
        let r = solve_g_l(&matrix2(), eps, NATS).unwrap();
        check(&r);
        let ub = r.upper_bounds;
        assert!(ub.fine.unwrap() < ub.coarse.unwrap());
        assert!(r.utility_lb <= ub.fine.unwrap());
    }
    let r = solve_g_l(&matrix2(), 0.08, NATS).unwrap();
    assert!(r.upper_bounds.fine.is_none() && r.upper_bounds.coarse.is_some());
}

#[test]
fn budget_at_or_above_eps2_is_rejected() {
    let e2 = build_context(&matrix1()).unwrap().eps2;
    assert!(matches!(solve_g_l(&matrix1(), e2, NATS), Err(Error::Precondition(_))));
    assert!(solve_g_l(&matrix1(), -0.1, NATS).is_err());
}

#[test]
fn erasure_keeps_the_boundary_vertex() {
    let j = families::erasure(0.3).unwrap();
    let g0 = solve_g0(&j, NATS).unwrap().utility_lb;
    let e2 = build_context(&j).unwrap().eps2;
    let r = solve_g_l(&j, 0.5 * e2, NATS).unwrap();
    check(&r);
    assert!(r.utility_lb >= g0 - 1e-9);
}

#[test]
fn parallel_and_serial_agree_bitwise() {
    let par = solve_g(&matrix1(), 0.01, Problem::L, NATS, &LpOptions::default()).unwrap();
    let ser =
        solve_g(&matrix1(), 0.01, Problem::L, NATS, &LpOptions { parallel: false, ..Default::default() }).unwrap();
    assert_eq!(serde_json::to_string(&par).unwrap(), serde_json::to_string(&ser).unwrap());
}

#[test]
fn greedy_is_flagged_and_sound() {
    let opts = LpOptions { cap: 0, parallel: false };
    let exhaustive = solve_g_l(&matrix1(), 0.01, NATS).unwrap();
    let g = solve_g(&matrix1(), 0.01, Problem::L, NATS, &opts).unwrap();
    check(&g);
    assert!(g.heuristic && g.flags.iter().any(|f| f.starts_with("heuristic")));
    assert!(g.lp_value >= exhaustive.lp_value - 1e-12);
    assert!(g.utility_lb >= solve_g0(&matrix1(), NATS).unwrap().utility_lb - 1e-9);
}

#[test]
fn reconstruct_rules() {
    let ctx = build_context(&matrix1()).unwrap();
    // The perfect-privacy solution has eta proportional to t in every block.
    let mut a = solve_g0(&matrix1(), NATS).unwrap().eta;
    let n = a.blocks.len();
    a.blocks.push(EtaBlock { omega: vec![1, 3], eta: vec![0.0, 0.0] });
    let m = reconstruct(&a, &ctx, 0.01, Problem::L).unwrap();
    assert_eq!(m.p_u.len(), n);
    assert!(m.j.iter().flatten().all(|v| v.abs() < 1e-9));
    assert!(m.mixture_residual <= 1e-12);
    assert!(reconstruct(&EtaAssignment { blocks: vec![] }, &ctx, 0.01, Problem::L).is_err());
}

#[test]
fn single_atom_is_p_y() {
    let ctx = build_context(&tiny()).unwrap();
    let a = EtaAssignment { blocks: vec![EtaBlock { omega: vec![0, 1, 2], eta: ctx.py.clone() }] };
    let m = reconstruct(&a, &ctx, 0.05, Problem::Wl).unwrap();
    for y in 0..3 {
        assert_abs_diff_eq!(m.p_y_given_u[(y, 0)], ctx.py[y], epsilon = 1e-15);
    }
    assert!(m.j[0].iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn mixture_identity_on_matrix1() {
    let r = solve_g_l(&matrix1(), 0.01, NATS).unwrap();
    assert!(r.mechanism.mixture_residual <= 1e-9);
    for (u, j) in r.mechanism.j.iter().enumerate() {
        assert!(j.iter().sum::<f64>().abs() <= 1e-9);
        assert!(j.iter().map(|v| v.abs()).sum::<f64>() <= 1.0 + 1e-9, "atom {u}: {j:?}");
    }
}

#[test]
fn utility_is_monotone_on_sweeps() {
    let grid: Vec<f64> = (0..=16).map(|i| i as f64 * 0.002).collect();
    for p in [Problem::Wl, Problem::L] {
        let rows = sweep(&matrix1(), &grid, p, NATS, &LpOptions::default()).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].utility_lb >= w[0].utility_lb - 1e-9, "{p} {:?}", w);
            assert!(w[1].approx >= w[0].approx - 1e-12);
        }
    }
}

#[test]
fn approximation_error_below_three_quarters() {
    for j in [matrix1(), matrix2(), tiny()] {
        let ctx = build_context(&j).unwrap();
        for f in [0.1, 0.3, 0.49] {
            for p in [Problem::Wl, Problem::L] {
                let r = solve_in_context(&j, &ctx, f * ctx.eps2, p, NATS, &LpOptions::default()).unwrap();
                assert!((r.exact_h_y_given_u - r.lp_value).abs() < 0.75);
            }
        }
    }
}

fn arb_wide() -> impl Strategy<Value = JointDist> {
    prop::collection::vec(0.02f64..1.0, 6).prop_map(|w| {
        let total: f64 = w.iter().sum();
        JointDist::new(DMatrix::from_fn(2, 3, |x, y| w[x * 3 + y] / total)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lower_bound_is_certified_and_above_g0(j in arb_wide(), f in 0.0f64..0.99, l in any::<bool>()) {
        let Ok(ctx) = build_context(&j) else { return Ok(()) };
        prop_assume!(ctx.eps2 > 0.0);
        let g0 = solve_in_context(&j, &ctx, 0.0, Problem::G0, NATS, &LpOptions::default()).unwrap();
        let p = if l { Problem::L } else { Problem::Wl };
        let r = solve_in_context(&j, &ctx, f * ctx.eps2, p, NATS, &LpOptions::default()).unwrap();
        prop_assert!(r.certificate.holds);
        prop_assert!(r.certificate.lp_duality_gap <= 1e-9);
        prop_assert!(r.utility_lb >= g0.utility_lb - 1e-9);
        prop_assert!(r.utility_lb <= j.mutual_information().max(0.0) + j.h_y_given_x() + 1e-12);
    }
}

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use privacy_funnel::geometry::*;
use privacy_funnel::probcore::families;
use privacy_funnel::probcore::{entropy_nats, JointDist};
use privacy_funnel::Error;
use proptest::prelude::*;

fn matrix1() -> JointDist {
    JointDist::from_rows(&[vec![0.693, 0.027, 0.108, 0.072], vec![0.006, 0.085, 0.004, 0.005]]).unwrap()
}

fn matrix2() -> JointDist {
    JointDist::from_rows(&[vec![0.350, 0.025, 0.085, 0.040], vec![0.025, 0.425, 0.035, 0.015]]).unwrap()
}

/// Vertices of `{v >= 0 : K v = K P_Y}` by fixing `|Y| - |X|` coordinates at zero.
fn vertices_by_active_sets(j: &JointDist) -> Vec<Vec<f64>> {
    let k = j.p_x_given_y().matrix().clone();
    let (nx, ny) = k.shape();
    let rhs_top = &k * DVector::from_column_slice(&j.py());
    let mut out: Vec<Vec<f64>> = Vec::new();
    for zeros in combinations(ny, ny - nx) {
        let mut a = DMatrix::zeros(ny, ny);
        let mut rhs = DVector::zeros(ny);
        a.view_mut((0, 0), (nx, ny)).copy_from(&k);
        rhs.rows_mut(0, nx).copy_from(&rhs_top);
        for (r, &z) in zeros.iter().enumerate() {
            a[(nx + r, z)] = 1.0;
        }
        let Some(sol) = a.lu().solve(&rhs) else {
            continue;
        };
        if sol.iter().all(|&v| v > -1e-12) {
            let v: Vec<f64> = sol.iter().map(|&v| if v.abs() < 1e-12 { 0.0 } else { v }).collect();
            if !out.iter().any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-9)) {
                out.push(v);
            }
        }
    }
    out
}

#[test]
fn eps2_of_the_two_example_matrices() {
    let c1 = build_context(&matrix1()).unwrap();
    assert!((c1.eps2 - 0.0341).abs() <= 5e-4);
    let e1 = error_bounds(&c1, 0.0);
    assert!((e1.coarse_limit - 0.0171).abs() <= 5e-4 && (e1.fine_limit - 0.0121).abs() <= 5e-4);
    let c2 = build_context(&matrix2()).unwrap();
    assert!((c2.eps2 - 0.1994).abs() <= 5e-4);
    let e2 = error_bounds(&c2, 0.0);
    assert!((e2.coarse_limit - 0.0997).abs() <= 5e-4 && (e2.fine_limit - 0.0705).abs() <= 5e-4);
}

#[test]
fn eps2_frozen_values() {
    // Independent evaluation: numpy SVD, t and H per subset.
    assert_abs_diff_eq!(build_context(&matrix1()).unwrap().eps2, 0.034_106_477, epsilon = 1e-8);
    assert_abs_diff_eq!(build_context(&matrix2()).unwrap().eps2, 0.199_414_273, epsilon = 1e-8);
    let sets: Vec<Vec<usize>> = build_context(&matrix1()).unwrap().feasible.iter().map(|d| d.omega.clone()).collect();
    assert_eq!(sets, vec![vec![0, 1], vec![1, 2], vec![1, 3]]);
}

#[test]
fn regimes_are_strict() {
    let c = build_context(&matrix1()).unwrap();
    assert_eq!(error_bounds(&c, 0.0).regime, Regime::Fine);
    assert_eq!(error_bounds(&c, c.eps2 / (2.0 * 2f64.sqrt())).regime, Regime::Coarse);
    assert_eq!(error_bounds(&c, c.eps2 / 2.0).regime, Regime::None);
    assert_abs_diff_eq!(fine_bound(2), 0.274_559_737_239_718_2, epsilon = 1e-15);
}

#[test]
fn rejects_bad_shapes() {
    assert!(build_context(&families::bsc(0.2).unwrap()).is_err());
    let rank1 = JointDist::from_rows(&[vec![0.1, 0.2, 0.2], vec![0.1, 0.2, 0.2]]).unwrap();
    assert!(matches!(build_context(&rank1), Err(Error::Precondition(m)) if m.contains("singular value")));
}

#[test]
fn singular_leading_block_is_permuted() {
    // First two columns of P_{X|Y} are identical.
    let j = JointDist::from_rows(&[vec![0.1, 0.2, 0.3], vec![0.1, 0.2, 0.1]]).unwrap();
    let c = build_context(&j).unwrap();
    assert!(c.lead_permuted);
    assert_eq!(c.lead, vec![0, 2]);
    // Columns 0 and 1 of P_{X|Y} coincide, so e0 - e1 is a null vector.
    let n = null_space_property(&c, &[1.0, -1.0, 0.0]).unwrap();
    assert!(n.in_leakage_null && n.in_m_null && n.consistent && n.sum.abs() < 1e-15);
}

#[test]
fn null_space_basics() {
    let c = build_context(&matrix1()).unwrap();
    assert!(null_space_property(&c, &[0.0; 4]).unwrap().in_leakage_null);
    // A vector in the row space is not a null vector.
    let r = DVector::from_column_slice(&[0.3, -1.2, 0.7, 0.1]);
    let proj = c.m.transpose() * (&c.m * r);
    let n = null_space_property(&c, proj.as_slice()).unwrap();
    assert!(!n.in_leakage_null && !n.in_m_null && n.consistent);
}

#[test]
fn extreme_point_sums_to_one() {
    let c = build_context(&matrix1()).unwrap();
    for d in &c.feasible {
        let p = extreme_point(&c, &d.omega, &[0.5, -0.5], 0.5, 0.005, PerLetter::Wl).unwrap();
        assert_abs_diff_eq!(p.values.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let zero = extreme_point(&c, &d.omega, &[0.0, 0.0], 0.5, 0.005, PerLetter::L).unwrap();
        assert_eq!(zero.values, d.vertex(4));
    }
}

#[test]
fn extreme_point_positive_just_below_eps2() {
    let c = build_context(&matrix2()).unwrap();
    let eps = 0.99 * c.eps2;
    for d in &c.feasible {
        for j in [[0.5, -0.5], [-0.5, 0.5]] {
            let p = extreme_point(&c, &d.omega, &j, 1.0, eps, PerLetter::L).unwrap();
            assert!(d.omega.iter().all(|&w| p.values[w] > 0.0));
        }
    }
}

#[test]
fn extreme_point_errors() {
    let c = build_context(&matrix1()).unwrap();
    assert!(matches!(extreme_point(&c, &[0, 1], &[0.5, -0.5], 0.5, 5.0, PerLetter::L), Err(Error::Infeasible(_))));
    assert!(extreme_point(&c, &[0, 2], &[0.0, 0.0], 0.5, 0.0, PerLetter::L).is_err());
    assert!(extreme_point(&c, &[0, 1], &[0.6, -0.6], 0.5, 0.001, PerLetter::L).is_err());
    assert!(extreme_point(&c, &[0, 1], &[0.5, -0.4], 0.5, 0.001, PerLetter::L).is_err());
}

#[test]
fn linearization_is_exact_at_zero() {
    let c = build_context(&matrix1()).unwrap();
    for d in &c.feasible {
        let lin = linearize(&c, &d.omega).unwrap();
        assert_abs_diff_eq!(-lin.b, entropy_nats(&d.t), epsilon = 1e-12);
        assert_abs_diff_eq!(lin.entropy(0.3, &[0.0, 0.0]), entropy_nats(&d.t), epsilon = 1e-12);
    }
}

#[test]
fn linearization_error_is_second_order() {
    let c = build_context(&matrix2()).unwrap();
    let j = [0.4, -0.4];
    for d in &c.feasible {
        let lin = linearize(&c, &d.omega).unwrap();
        let e1 = (perturbed_entropy(d, 1e-3, &j) - lin.entropy(1e-3, &j)).abs();
        let e2 = (perturbed_entropy(d, 2e-3, &j) - lin.entropy(2e-3, &j)).abs();
        assert!(e1 < 1e-5);
        // Doubling the step multiplies the remainder by about four.
        assert!(e2 / e1 > 3.5 && e2 / e1 < 4.5, "{}", e2 / e1);
    }
}

#[test]
fn uniform_vertex_entropy() {
    // P_{X|Y} with P_Y making t = (1/2, 1/2) on the first two columns.
    let j = JointDist::from_rows(&[vec![0.2, 0.05, 0.25], vec![0.05, 0.2, 0.25]]).unwrap();
    let c = build_context(&j).unwrap();
    let d = c.feasible_omega(&[0, 1]).unwrap();
    assert_abs_diff_eq!(d.t[0], 0.5, epsilon = 1e-12);
    let lin = linearize(&c, &[0, 1]).unwrap();
    assert_abs_diff_eq!(-lin.b, 2f64.ln(), epsilon = 1e-12);
}

#[test]
fn erasure_has_a_degenerate_vertex() {
    let c = build_context(&families::erasure(0.3).unwrap()).unwrap();
    assert_eq!(c.feasible.len(), 1);
    assert_eq!(c.degenerate.len(), 1);
    let v = c.degenerate[0].vertex(3);
    assert!(v[0] == 0.0 && v[1] == 0.0 && (v[2] - 1.0).abs() < 1e-12);
}

fn arb_wide_joint() -> impl Strategy<Value = JointDist> {
    (2usize..4).prop_flat_map(|nx| {
        let ny = nx + 1 + (nx == 2) as usize;
        prop::collection::vec(0.02f64..1.0, nx * ny).prop_map(move |w| {
            let total: f64 = w.iter().sum();
            JointDist::new(DMatrix::from_fn(nx, ny, |x, y| w[x * ny + y] / total)).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn m_rows_are_orthonormal(j in arb_wide_joint()) {
        let c = build_context(&j).unwrap();
        let g = &c.m * c.m.transpose();
        prop_assert!((g - DMatrix::identity(j.nx(), j.nx())).amax() <= 1e-10);
    }

    #[test]
    fn vertices_match_active_set_enumeration(j in arb_wide_joint()) {
        let c = build_context(&j).unwrap();
        let mine: Vec<Vec<f64>> = c.all_vertices().map(|d| d.vertex(j.ny())).collect();
        let other = vertices_by_active_sets(&j);
        prop_assert_eq!(mine.len(), other.len());
        for v in &other {
            prop_assert!(mine.iter().any(|w| w.iter().zip(v).all(|(a, b)| (a - b).abs() < 1e-8)));
        }
        for d in &c.feasible {
            prop_assert!((d.t.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn perturbation_preserves_mass(j in arb_wide_joint(), a in -0.5f64..0.5) {
        let c = build_context(&j).unwrap();
        let mut jv = vec![0.0; j.nx()];
        jv[0] = a;
        jv[1] = -a;
        for d in &c.feasible {
            let s: f64 = (&d.h * DVector::from_column_slice(&jv)).sum();
            prop_assert!(s.abs() <= 1e-12);
            prop_assert!((&d.h * &d.h_inv - DMatrix::identity(j.nx(), j.nx())).amax() <= 1e-9);
        }
    }

    #[test]
    fn eps2_invariant_under_relabeling(j in arb_wide_joint(), shift in 1usize..4) {
        let ny = j.ny();
        let perm: Vec<usize> = (0..ny).map(|y| (y + shift) % ny).collect();
        let p = DMatrix::from_fn(j.nx(), ny, |x, y| j.matrix()[(x, perm[y])]);
        let c1 = build_context(&j).unwrap();
        let c2 = build_context(&JointDist::new(p).unwrap()).unwrap();
        prop_assert!((c1.eps2 - c2.eps2).abs() <= 1e-9 * (1.0 + c1.eps2));
    }
}

#![allow(dead_code)]

use nalgebra::DMatrix;
use proptest::prelude::*;

use privacy_funnel::probcore::{JointDist, Kernel};

fn normalize_columns(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut c in m.column_iter_mut() {
        let s: f64 = c.sum();
        c /= s;
    }
    m
}

/// Random joint with some exact zeros but strictly positive marginals.
pub fn arb_joint(nx: std::ops::Range<usize>, ny: std::ops::Range<usize>) -> impl Strategy<Value = JointDist> {
    (nx, ny).prop_flat_map(|(nx, ny)| {
        prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.02f64..1.0], nx * ny).prop_map(move |mut w| {
            for i in 0..nx.max(ny) {
                let (x, y) = (i % nx, i % ny);
                if w[x * ny + y] == 0.0 {
                    w[x * ny + y] = 0.5;
                }
            }
            let total: f64 = w.iter().sum();
            JointDist::new(DMatrix::from_fn(nx, ny, |x, y| w[x * ny + y] / total)).unwrap()
        })
    })
}

/// Random kernel with `n_in` columns and an output alphabet drawn from `n_out`.
pub fn arb_kernel(n_out: std::ops::Range<usize>, n_in: usize) -> impl Strategy<Value = Kernel> {
    n_out.prop_flat_map(move |no| {
        prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.01f64..1.0], no * n_in).prop_map(move |mut w| {
            for c in 0..n_in {
                w[(c % no) * n_in + c] += 0.1;
            }
            Kernel::new(normalize_columns(DMatrix::from_row_slice(no, n_in, &w))).unwrap()
        })
    })
}

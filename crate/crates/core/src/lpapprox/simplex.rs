//! Dense two-phase simplex with Bland's rule.
//!
//! Sizes here are a few dozen rows and columns, so a full tableau is fine.
//! After the final pivot the basis is re-solved with an LU factorization and
//! the primal residual, dual infeasibility and duality gap are measured on
//! the original rows.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

/// `min c'x` subject to `a_i x (cmp_i) b_i` and `x >= 0`.
#[derive(Clone, Debug, Default)]
pub struct Lp {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub cmp: Vec<Cmp>,
    pub b: Vec<f64>,
}

impl Lp {
    pub fn new(c: Vec<f64>) -> Self {
        Lp { c, ..Default::default() }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn row(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.c.len());
        self.a.push(coeffs);
        self.cmp.push(cmp);
        self.b.push(rhs);
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row; `<=` rows have nonpositive duals, `>=` rows nonnegative.
    pub duals: Vec<f64>,
    pub primal_residual: f64,
    pub dual_infeasibility: f64,
    pub duality_gap: f64,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Optimal(Solution),
    Infeasible,
    Unbounded,
    IterationLimit,
}

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const MAX_ITER: usize = 100_000;

struct Tableau {
    t: DMatrix<f64>,
    basis: Vec<usize>,
    m: usize,
    rhs: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[(r, c)];
        let w = self.t.ncols();
        for k in 0..w {
            self.t[(r, k)] /= p;
        }
        for i in 0..=self.m {
            if i == r {
                continue;
            }
            let f = self.t[(i, c)];
            if f != 0.0 {
                for k in 0..w {
                    let v = self.t[(r, k)];
                    self.t[(i, k)] -= f * v;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Load `cost` into the objective row and price out the basis.
    fn set_cost(&mut self, cost: &[f64]) {
        let z = self.m;
        for k in 0..self.t.ncols() {
            self.t[(z, k)] = 0.0;
        }
        for (k, &c) in cost.iter().enumerate() {
            self.t[(z, k)] = c;
        }
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for k in 0..self.t.ncols() {
                    let v = self.t[(r, k)];
                    self.t[(z, k)] -= cb * v;
                }
            }
        }
    }

    /// Runs Bland's rule over columns `< allowed`. `Ok(false)` means unbounded.
    fn run(&mut self, allowed: usize) -> Result<bool, ()> {
        for _ in 0..MAX_ITER {
            let z = self.m;
            let Some(enter) = (0..allowed).find(|&k| self.t[(z, k)] < -COST_TOL) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.t[(r, enter)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(r, self.rhs)] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, bv)) => {
                            if ratio < bv - 1e-12 || (ratio <= bv + 1e-12 && self.basis[r] < self.basis[br]) {
                                Some((r, ratio))
                            } else {
                                Some((br, bv))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, enter),
            }
        }
        Err(())
    }
}

pub fn solve(lp: &Lp) -> Outcome {
    let n = lp.n();
    let m = lp.a.len();
    let n_slack = lp.cmp.iter().filter(|c| **c != Cmp::Eq).count();
    // Row normalization so that every right-hand side is nonnegative.
    let sign: Vec<f64> = lp.b.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut slack_of = vec![None; m];
    let mut k = n;
    for (i, c) in lp.cmp.iter().enumerate() {
        if *c != Cmp::Eq {
            slack_of[i] = Some(k);
            k += 1;
        }
    }
    let needs_art: Vec<bool> = (0..m)
        .map(|i| match lp.cmp[i] {
            Cmp::Eq => true,
            Cmp::Le => sign[i] < 0.0,
            Cmp::Ge => sign[i] > 0.0,
        })
        .collect();
    let n_art = needs_art.iter().filter(|b| **b).count();
    let art_start = n + n_slack;
    let width = art_start + n_art;
    let mut tab = Tableau { t: DMatrix::zeros(m + 1, width + 1), basis: vec![0; m], m, rhs: width };
    let mut a_idx = art_start;
    for i in 0..m {
        for j in 0..n {
            tab.t[(i, j)] = sign[i] * lp.a[i][j];
        }
        if let Some(s) = slack_of[i] {
            let coef = if lp.cmp[i] == Cmp::Le { 1.0 } else { -1.0 };
            tab.t[(i, s)] = sign[i] * coef;
        }
        tab.t[(i, width)] = sign[i] * lp.b[i];
        if needs_art[i] {
            tab.t[(i, a_idx)] = 1.0;
            tab.basis[i] = a_idx;
            a_idx += 1;
        } else {
            tab.basis[i] = slack_of[i].expect("inequality row has a slack");
        }
    }

    if n_art > 0 {
        let mut cost = vec![0.0; width];
        for c in cost.iter_mut().skip(art_start) {
            *c = 1.0;
        }
        tab.set_cost(&cost);
        if tab.run(width).is_err() {
            return Outcome::IterationLimit;
        }
        let infeas = -tab.t[(m, width)];
        let scale = 1.0 + lp.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if infeas > FEAS_TOL * scale {
            return Outcome::Infeasible;
        }
        // Drive artificial variables out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| tab.t[(r, c)].abs() > 1e-9) {
                    tab.pivot(r, c);
                }
            }
        }
    }

    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&lp.c);
    tab.set_cost(&cost);
    match tab.run(art_start) {
        Err(()) => return Outcome::IterationLimit,
        Ok(false) => return Outcome::Unbounded,
        Ok(true) => {}
    }

    let mut xs = vec![0.0; width];
    for r in 0..m {
        xs[tab.basis[r]] = tab.t[(r, width)];
    }
    let mut y_std = vec![0.0; m];

    // Re-solve the basis on the rows whose basic variable is not artificial.
    let rows: Vec<usize> = (0..m).filter(|&r| tab.basis[r] < art_start).collect();
    let col = |i: usize, j: usize| -> f64 {
        if j < n {
            sign[i] * lp.a[i][j]
        } else if slack_of[i] == Some(j) {
            sign[i] * if lp.cmp[i] == Cmp::Le { 1.0 } else { -1.0 }
        } else {
            0.0
        }
    };
    let q = rows.len();
    if q > 0 {
        let bmat = DMatrix::from_fn(q, q, |a, b| col(rows[a], tab.basis[rows[b]]));
        let rhs = DVector::from_fn(q, |a, _| sign[rows[a]] * lp.b[rows[a]]);
        let cb = DVector::from_fn(q, |a, _| cost[tab.basis[rows[a]]]);
        let lu = bmat.clone().lu();
        if let (Some(xb), Some(yb)) = (lu.solve(&rhs), bmat.transpose().lu().solve(&cb)) {
            if xb.iter().all(|&v| v > -FEAS_TOL) {
                for (a, &r) in rows.iter().enumerate() {
                    xs[tab.basis[r]] = xb[a].max(0.0);
                }
            }
            for (a, &r) in rows.iter().enumerate() {
                y_std[r] = yb[a];
            }
        }
    }

    let x: Vec<f64> = xs[..n].to_vec();
    let duals: Vec<f64> = (0..m).map(|i| sign[i] * y_std[i]).collect();
    let mut primal_residual = x.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
    let mut dual_infeasibility: f64 = 0.0;
    for i in 0..m {
        let ax: f64 = lp.a[i].iter().zip(&x).map(|(a, b)| a * b).sum();
        let viol = match lp.cmp[i] {
            Cmp::Eq => (ax - lp.b[i]).abs(),
            Cmp::Le => (ax - lp.b[i]).max(0.0),
            Cmp::Ge => (lp.b[i] - ax).max(0.0),
        };
        primal_residual = primal_residual.max(viol);
        let wrong_sign = match lp.cmp[i] {
            Cmp::Eq => 0.0,
            Cmp::Le => duals[i].max(0.0),
            Cmp::Ge => (-duals[i]).max(0.0),
        };
        dual_infeasibility = dual_infeasibility.max(wrong_sign);
    }
    for j in 0..n {
        let d = lp.c[j] - (0..m).map(|i| duals[i] * lp.a[i][j]).sum::<f64>();
        dual_infeasibility = dual_infeasibility.max(-d);
    }
    let objective: f64 = lp.c.iter().zip(&x).map(|(a, b)| a * b).sum();
    let dual_objective: f64 = lp.b.iter().zip(&duals).map(|(a, b)| a * b).sum();
    Outcome::Optimal(Solution {
        x,
        objective,
        duals,
        primal_residual,
        dual_infeasibility,
        duality_gap: (objective - dual_objective).abs(),
    })
}

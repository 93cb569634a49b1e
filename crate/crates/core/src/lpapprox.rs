//! Linear programs for the perfect-privacy value and the per-letter problems.
//!
//! Write `eta_u = P_U(u) P_{Y|U}(.|u)` restricted to the support `Omega_u`.
//! Linearizing `H(P_{Y|U}(.|u))` around `t_{Omega_u}` turns the conditional
//! entropy into `sum_u sum_i -log t_{Omega_u}(i) eta_u(i)`, and
//! `P_U(u) (P_{X|U}(.|u) - P_X) = P_{X|Y}(:, Omega_u) eta_u - (1' eta_u) P_X`,
//! so both per-letter budgets are linear in `(eta, s)` once the absolute
//! values are split with slack vectors `s_u`:
//!
//! ```text
//! min   sum_u c_u' eta_u
//! s.t.  sum_u E_u eta_u = P_Y
//!       -s_u <= (K_{Omega_u} - P_X 1') eta_u <= s_u
//!       1' s_u <= eps              (weighted)
//!       1' s_u <= eps 1' eta_u     (unweighted)
//!       eta, s >= 0
//! ```
//!
//! One LP is solved per multiset of supports (`|U| = |Y|` slots). Entropy is
//! concave, so the linearized objective overestimates `H(Y|U)` and the exact
//! utility of the reconstructed kernel is never below `H(Y) - lp_value`.

mod simplex;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::geometry::{self, build_context, error_bounds, ErrorBound, GeometryContext, OmegaData, Regime};
use crate::mechanisms::Mechanism;
use crate::probcore::{entropy_nats, matrix_rows, JointDist, Kernel, LogBase};

pub use simplex::{Cmp, Lp, Outcome, Solution};

/// Default limit on the number of support combinations solved exhaustively.
pub const DEFAULT_CAP: usize = 1_000_000;

/// Slack allowed when replaying the privacy criterion on a reconstructed kernel.
pub const CERT_TOL: f64 = 1e-9;

/// Atoms of `U` with less mass than this are dropped.
pub const DROP_TOL: f64 = 1e-14;

/// Two combinations whose LP values differ by less than this are tied.
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    G0,
    Wl,
    L,
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Problem::G0 => "g0",
            Problem::Wl => "wl",
            Problem::L => "l",
        })
    }
}

impl std::str::FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g0" => Ok(Problem::G0),
            "wl" => Ok(Problem::Wl),
            "l" => Ok(Problem::L),
            _ => Err(invalid(format!("unknown problem '{s}', expected g0, wl or l"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LpOptions {
    pub cap: usize,
    pub parallel: bool,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { cap: DEFAULT_CAP, parallel: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EtaBlock {
    pub omega: Vec<usize>,
    pub eta: Vec<f64>,
}

/// LP variables grouped by atom of `U`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EtaAssignment {
    pub blocks: Vec<EtaBlock>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxMechanism {
    pub p_u: Vec<f64>,
    pub omegas: Vec<Vec<usize>>,
    /// Perturbation directions; zero when `eps = 0`.
    pub j: Vec<Vec<f64>>,
    /// `|Y| x |U|`.
    #[serde(with = "matrix_rows")]
    pub p_y_given_u: DMatrix<f64>,
    /// `|U| x |Y|`.
    #[serde(with = "matrix_rows")]
    pub p_u_given_y: DMatrix<f64>,
    pub mixture_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub criterion: Problem,
    pub eps: f64,
    pub max_leakage: f64,
    pub holds: bool,
    pub mixture_residual: f64,
    pub lp_primal_residual: f64,
    pub lp_dual_infeasibility: f64,
    pub lp_duality_gap: f64,
}

#[derive(Clone, Copy, Debug, Default, Serialize, PartialEq)]
pub struct UpperBounds {
    /// `approx + 3/4 nat`, for `eps < eps2 / 2`.
    pub coarse: Option<f64>,
    /// `approx + fine_bound(|X|)`, for `eps < eps2 / (2 sqrt|X|)`.
    pub fine: Option<f64>,
}

impl UpperBounds {
    pub fn best(&self) -> Option<f64> {
        match (self.coarse, self.fine) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxResult {
    pub problem: Problem,
    pub eps: f64,
    pub base: LogBase,
    /// Linearized minimum of `H(Y|U)`.
    pub lp_value: f64,
    /// `H(Y) - lp_value`.
    pub approx: f64,
    pub exact_h_y_given_u: f64,
    /// Exact `I(U;Y)` of the reconstructed kernel.
    pub utility_lb: f64,
    pub mechanism: ApproxMechanism,
    pub combination: Vec<Vec<usize>>,
    pub eta: EtaAssignment,
    /// Linearization error regime; the bound is in `base`.
    pub error_bound: ErrorBound,
    pub upper_bounds: UpperBounds,
    pub certificate: Certificate,
    pub combinations_solved: usize,
    pub heuristic: bool,
    pub flags: Vec<String>,
}

/// `P_{Y|U}`, `J_u` and `P_{U|Y}` from an LP assignment.
pub fn reconstruct(
    assignment: &EtaAssignment,
    ctx: &GeometryContext,
    eps: f64,
    criterion: Problem,
) -> Result<ApproxMechanism> {
    let (nx, ny) = (ctx.nx(), ctx.ny());
    let mut p_u = Vec::new();
    let mut omegas = Vec::new();
    let mut js = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for block in &assignment.blocks {
        if block.omega.len() != block.eta.len() || block.omega.iter().any(|&y| y >= ny) {
            return Err(invalid(format!("malformed block with support {:?}", block.omega)));
        }
        if block.eta.iter().any(|&v| v < -CERT_TOL) {
            return Err(invalid("negative eta entry"));
        }
        let w: f64 = block.eta.iter().sum();
        if w <= DROP_TOL {
            continue;
        }
        let mut v = vec![0.0; ny];
        for (i, &y) in block.omega.iter().enumerate() {
            v[y] += block.eta[i].max(0.0) / w;
        }
        let j = if eps == 0.0 {
            vec![0.0; nx]
        } else {
            let scale = match criterion {
                Problem::L => eps * w,
                _ => eps,
            };
            (0..nx)
                .map(|x| {
                    let kx: f64 = (0..ny).map(|y| ctx.leakage[(x, y)] * v[y]).sum();
                    w * (kx - ctx.px[x]) / scale
                })
                .collect()
        };
        p_u.push(w);
        omegas.push(block.omega.clone());
        js.push(j);
        cols.push(v);
    }
    if p_u.is_empty() {
        return Err(invalid("assignment has no mass"));
    }
    let nu = p_u.len();
    let p_y_given_u = DMatrix::from_fn(ny, nu, |y, u| cols[u][y]);
    let mut mixture_residual: f64 = 0.0;
    let mut p_u_given_y = DMatrix::zeros(nu, ny);
    for y in 0..ny {
        let mix: f64 = (0..nu).map(|u| p_u[u] * cols[u][y]).sum();
        mixture_residual = mixture_residual.max((mix - ctx.py[y]).abs());
        if mix <= 0.0 {
            return Err(Error::Internal(format!("output {y} receives no mass")));
        }
        for u in 0..nu {
            p_u_given_y[(u, y)] = p_u[u] * cols[u][y] / mix;
        }
    }
    Ok(ApproxMechanism { p_u, omegas, j: js, p_y_given_u, p_u_given_y, mixture_residual })
}

fn candidates(ctx: &GeometryContext) -> Vec<&OmegaData> {
    let mut c: Vec<&OmegaData> = ctx.all_vertices().collect();
    c.sort_by(|a, b| a.omega.cmp(&b.omega));
    c
}

fn support_mask(d: &OmegaData, ny: usize) -> Vec<bool> {
    let mut m = vec![false; ny];
    for (i, &y) in d.omega.iter().enumerate() {
        if d.t[i] > 0.0 {
            m[y] = true;
        }
    }
    m
}

/// `C(n + k - 1, k)`, saturating.
fn multiset_count(n: usize, k: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc.saturating_mul(n as u128 + i) / (i + 1);
    }
    acc
}

/// Nondecreasing index tuples of length `k` over `0..n`, lexicographic.
fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut c = vec![0usize; k];
    loop {
        out.push(c.clone());
        let Some(i) = (0..k).rev().find(|&i| c[i] + 1 < n) else {
            return out;
        };
        let v = c[i] + 1;
        for x in c.iter_mut().skip(i) {
            *x = v;
        }
    }
}

fn covers(combo: &[usize], masks: &[Vec<bool>], ny: usize) -> bool {
    (0..ny).all(|y| combo.iter().any(|&c| masks[c][y]))
}

fn build_lp(ctx: &GeometryContext, cands: &[&OmegaData], combo: &[usize], eps: f64, problem: Problem) -> Lp {
    let (nx, ny) = (ctx.nx(), ctx.ny());
    let width = 2 * nx;
    let n = combo.len() * width;
    let eta = |u: usize, i: usize| u * width + i;
    let slack = |u: usize, r: usize| u * width + nx + r;
    let mut c = vec![0.0; n];
    for (u, &k) in combo.iter().enumerate() {
        for (i, &t) in cands[k].t.iter().enumerate() {
            if t > 0.0 {
                c[eta(u, i)] = -t.ln();
            }
        }
    }
    let mut lp = Lp::new(c);
    for y in 0..ny {
        let mut row = vec![0.0; n];
        for (u, &k) in combo.iter().enumerate() {
            for (i, &w) in cands[k].omega.iter().enumerate() {
                if w == y {
                    row[eta(u, i)] = 1.0;
                }
            }
        }
        lp.row(row, Cmp::Eq, ctx.py[y]);
    }
    for (u, &k) in combo.iter().enumerate() {
        let d = cands[k];
        for (i, &t) in d.t.iter().enumerate() {
            if t == 0.0 {
                let mut row = vec![0.0; n];
                row[eta(u, i)] = 1.0;
                lp.row(row, Cmp::Le, 0.0);
            }
        }
        for r in 0..nx {
            let mut pos = vec![0.0; n];
            for (i, &w) in d.omega.iter().enumerate() {
                pos[eta(u, i)] = ctx.leakage[(r, w)] - ctx.px[r];
            }
            let mut neg: Vec<f64> = pos.iter().map(|v| -v).collect();
            pos[slack(u, r)] = -1.0;
            neg[slack(u, r)] = -1.0;
            lp.row(pos, Cmp::Le, 0.0);
            lp.row(neg, Cmp::Le, 0.0);
        }
        let mut budget = vec![0.0; n];
        for r in 0..nx {
            budget[slack(u, r)] = 1.0;
        }
        match problem {
            Problem::L => {
                for i in 0..nx {
                    budget[eta(u, i)] = -eps;
                }
                lp.row(budget, Cmp::Le, 0.0);
            }
            _ => lp.row(budget, Cmp::Le, eps),
        }
    }
    lp
}

fn solve_combo(
    ctx: &GeometryContext,
    cands: &[&OmegaData],
    combo: &[usize],
    eps: f64,
    problem: Problem,
) -> Result<Option<Solution>> {
    match simplex::solve(&build_lp(ctx, cands, combo, eps, problem)) {
        Outcome::Optimal(s) => Ok(Some(s)),
        Outcome::Infeasible => Ok(None),
        Outcome::Unbounded => Err(Error::Internal("per-letter LP reported unbounded".into())),
        Outcome::IterationLimit => Err(Error::Internal("simplex iteration limit reached".into())),
    }
}

fn assignment_from(ctx: &GeometryContext, cands: &[&OmegaData], combo: &[usize], x: &[f64]) -> EtaAssignment {
    let nx = ctx.nx();
    let blocks = combo
        .iter()
        .enumerate()
        .map(|(u, &k)| EtaBlock {
            omega: cands[k].omega.clone(),
            eta: x[u * 2 * nx..u * 2 * nx + nx].iter().map(|v| v.max(0.0)).collect(),
        })
        .collect();
    EtaAssignment { blocks }
}

fn scale_bound(b: ErrorBound, base: LogBase) -> ErrorBound {
    ErrorBound { bound: b.bound.map(|v| base.from_nats(v)), ..b }
}

fn upper_bounds(ctx: &GeometryContext, eps: f64, approx: f64, base: LogBase) -> UpperBounds {
    let e = error_bounds(ctx, eps);
    UpperBounds {
        coarse: (eps < e.coarse_limit).then(|| approx + base.from_nats(geometry::COARSE_BOUND)),
        fine: (eps < e.fine_limit).then(|| approx + base.from_nats(geometry::fine_bound(ctx.nx()))),
    }
}

struct Solved {
    lp_nats: f64,
    assignment: EtaAssignment,
    combination: Vec<Vec<usize>>,
    lp: Solution,
    combinations_solved: usize,
    heuristic: bool,
}

fn finish(
    j: &JointDist,
    ctx: &GeometryContext,
    solved: Solved,
    eps: f64,
    problem: Problem,
    base: LogBase,
    mut flags: Vec<String>,
) -> Result<ApproxResult> {
    let mech = reconstruct(&solved.assignment, ctx, eps, problem)?;
    let kernel = Kernel::new(mech.p_u_given_y.clone())?;
    let summary = Mechanism::from_kernel_uy(j, &kernel)?.summary(base)?;
    let h_y = base.from_nats(j.h_y());
    let max_leakage = match problem {
        Problem::L => summary.leakages.max_unweighted(),
        _ => summary.leakages.max_weighted(),
    };
    let certificate = Certificate {
        criterion: problem,
        eps,
        max_leakage,
        holds: max_leakage <= eps + CERT_TOL && mech.mixture_residual <= CERT_TOL,
        mixture_residual: mech.mixture_residual,
        lp_primal_residual: solved.lp.primal_residual,
        lp_dual_infeasibility: solved.lp.dual_infeasibility,
        lp_duality_gap: solved.lp.duality_gap,
    };
    if ctx.degenerate.iter().any(|d| solved.combination.contains(&d.omega)) {
        flags.push("uses a boundary vertex with a zero entry".into());
    }
    let lp_value = base.from_nats(solved.lp_nats);
    let approx = h_y - lp_value;
    let ub = match problem {
        Problem::L => upper_bounds(ctx, eps, approx, base),
        _ => UpperBounds::default(),
    };
    Ok(ApproxResult {
        problem,
        eps,
        base,
        lp_value,
        approx,
        exact_h_y_given_u: h_y - summary.i_uy,
        utility_lb: summary.i_uy,
        mechanism: mech,
        combination: solved.combination,
        eta: solved.assignment,
        error_bound: scale_bound(error_bounds(ctx, eps), base),
        upper_bounds: ub,
        certificate,
        combinations_solved: solved.combinations_solved,
        heuristic: solved.heuristic,
        flags,
    })
}

fn g0_solve(ctx: &GeometryContext) -> Result<Solved> {
    let verts = candidates(ctx);
    let ny = ctx.ny();
    let c: Vec<f64> = verts.iter().map(|d| entropy_nats(&d.t)).collect();
    let mut lp = Lp::new(c);
    for y in 0..ny {
        lp.row(verts.iter().map(|d| d.vertex(ny)[y]).collect(), Cmp::Eq, ctx.py[y]);
    }
    let s = match simplex::solve(&lp) {
        Outcome::Optimal(s) => s,
        other => return Err(Error::Internal(format!("perfect-privacy LP failed: {other:?}"))),
    };
    let mut blocks = Vec::new();
    let mut combination = Vec::new();
    for (k, &w) in s.x.iter().enumerate() {
        if w > DROP_TOL {
            blocks.push(EtaBlock { omega: verts[k].omega.clone(), eta: verts[k].t.iter().map(|t| w * t).collect() });
            combination.push(verts[k].omega.clone());
        }
    }
    Ok(Solved {
        lp_nats: s.objective,
        assignment: EtaAssignment { blocks },
        combination,
        combinations_solved: 1,
        heuristic: false,
        lp: s,
    })
}

fn full_column_rank(j: &JointDist) -> bool {
    let s = j.p_x_given_y().matrix().clone().svd(false, false).singular_values;
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    s.len() == j.ny() && min > geometry::RANK_TOL * max
}

/// Result for kernels with a trivial null space: only constant releases are private.
fn constant_release(j: &JointDist, problem: Problem, eps: f64, base: LogBase) -> Result<ApproxResult> {
    let ny = j.ny();
    let py = j.py();
    let h_y = base.from_nats(j.h_y());
    let mech = ApproxMechanism {
        p_u: vec![1.0],
        omegas: vec![(0..ny).collect()],
        j: vec![vec![0.0; j.nx()]],
        p_y_given_u: DMatrix::from_column_slice(ny, 1, &py),
        p_u_given_y: DMatrix::from_element(1, ny, 1.0),
        mixture_residual: 0.0,
    };
    Ok(ApproxResult {
        problem,
        eps,
        base,
        lp_value: h_y,
        approx: 0.0,
        exact_h_y_given_u: h_y,
        utility_lb: 0.0,
        eta: EtaAssignment { blocks: vec![EtaBlock { omega: (0..ny).collect(), eta: py }] },
        mechanism: mech,
        combination: vec![(0..ny).collect()],
        error_bound: ErrorBound { regime: Regime::Fine, bound: Some(0.0), coarse_limit: 0.0, fine_limit: 0.0 },
        upper_bounds: UpperBounds::default(),
        certificate: Certificate {
            criterion: problem,
            eps,
            max_leakage: 0.0,
            holds: true,
            mixture_residual: 0.0,
            lp_primal_residual: 0.0,
            lp_dual_infeasibility: 0.0,
            lp_duality_gap: 0.0,
        },
        combinations_solved: 0,
        heuristic: false,
        flags: vec!["P_{X|Y} has a trivial null space, so g0 = 0".into()],
    })
}

/// Largest `I(U;Y)` over releases independent of `X` with `X - Y - U`.
pub fn solve_g0(j: &JointDist, base: LogBase) -> Result<ApproxResult> {
    if j.nx() >= j.ny() {
        if full_column_rank(j) {
            return constant_release(j, Problem::G0, 0.0, base);
        }
        return Err(precondition("need |X| < |Y| or a leakage matrix with full column rank"));
    }
    let ctx = build_context(j)?;
    let solved = g0_solve(&ctx)?;
    finish(j, &ctx, solved, 0.0, Problem::G0, base, Vec::new())
}

pub fn solve_g_wl(j: &JointDist, eps: f64, base: LogBase) -> Result<ApproxResult> {
    solve_g(j, eps, Problem::Wl, base, &LpOptions::default())
}

pub fn solve_g_l(j: &JointDist, eps: f64, base: LogBase) -> Result<ApproxResult> {
    solve_g(j, eps, Problem::L, base, &LpOptions::default())
}

/// Per-letter LP for `problem` in `{Wl, L}`; `G0` ignores `eps`.
pub fn solve_g(j: &JointDist, eps: f64, problem: Problem, base: LogBase, opts: &LpOptions) -> Result<ApproxResult> {
    if problem == Problem::G0 {
        return solve_g0(j, base);
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(invalid(format!("budget must be a nonnegative number, got {eps}")));
    }
    let ctx = build_context(j)?;
    solve_in_context(j, &ctx, eps, problem, base, opts)
}

/// As [`solve_g`], reusing a geometry context.
pub fn solve_in_context(
    j: &JointDist,
    ctx: &GeometryContext,
    eps: f64,
    problem: Problem,
    base: LogBase,
    opts: &LpOptions,
) -> Result<ApproxResult> {
    if eps == 0.0 || problem == Problem::G0 {
        let solved = g0_solve(ctx)?;
        return finish(j, ctx, solved, 0.0, problem, base, Vec::new());
    }
    if eps >= ctx.eps2 {
        return Err(precondition(format!("budget {eps} is not below eps2 = {}", ctx.eps2)));
    }
    let cands = candidates(ctx);
    let ny = ctx.ny();
    let masks: Vec<Vec<bool>> = cands.iter().map(|d| support_mask(d, ny)).collect();
    let total = multiset_count(cands.len(), ny);
    let mut flags = Vec::new();
    let solved = if total <= opts.cap as u128 {
        let combos: Vec<Vec<usize>> =
            multisets(cands.len(), ny).into_iter().filter(|c| covers(c, &masks, ny)).collect();
        let run = |c: &Vec<usize>| solve_combo(ctx, &cands, c, eps, problem);
        let results: Vec<Result<Option<Solution>>> =
            if opts.parallel { combos.par_iter().map(run).collect() } else { combos.iter().map(run).collect() };
        let mut best: Option<(usize, Solution)> = None;
        for (i, r) in results.into_iter().enumerate() {
            if let Some(s) = r? {
                if best.as_ref().is_none_or(|(_, b)| s.objective < b.objective - TIE_TOL) {
                    best = Some((i, s));
                }
            }
        }
        let (i, s) = best.ok_or_else(|| Error::Internal("no support combination is feasible".into()))?;
        Solved {
            lp_nats: s.objective,
            assignment: assignment_from(ctx, &cands, &combos[i], &s.x),
            combination: combos[i].iter().map(|&k| cands[k].omega.clone()).collect(),
            lp: s,
            combinations_solved: combos.len(),
            heuristic: false,
        }
    } else {
        flags.push(format!("heuristic: {total} combinations exceed the cap of {}", opts.cap));
        greedy(ctx, &cands, &masks, eps, problem)?
    };
    finish(j, ctx, solved, eps, problem, base, flags)
}

/// Local search over combinations, started from the support of the perfect-privacy optimum.
fn greedy(
    ctx: &GeometryContext,
    cands: &[&OmegaData],
    masks: &[Vec<bool>],
    eps: f64,
    problem: Problem,
) -> Result<Solved> {
    let ny = ctx.ny();
    let g0 = g0_solve(ctx)?;
    let mut combo: Vec<usize> = g0
        .combination
        .iter()
        .map(|o| cands.iter().position(|d| &d.omega == o).expect("g0 support is a candidate"))
        .collect();
    while combo.len() < ny {
        combo.push(combo[0]);
    }
    combo.sort_unstable();
    let mut best = solve_combo(ctx, cands, &combo, eps, problem)?
        .ok_or_else(|| Error::Internal("perfect-privacy support is infeasible".into()))?;
    let mut solved = 1;
    for _ in 0..100 {
        let mut improved = false;
        for slot in 0..ny {
            for k in 0..cands.len() {
                let mut next = combo.clone();
                next[slot] = k;
                next.sort_unstable();
                if next == combo || !covers(&next, masks, ny) {
                    continue;
                }
                solved += 1;
                if let Some(s) = solve_combo(ctx, cands, &next, eps, problem)? {
                    if s.objective < best.objective - TIE_TOL {
                        best = s;
                        combo = next;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(Solved {
        lp_nats: best.objective,
        assignment: assignment_from(ctx, cands, &combo, &best.x),
        combination: combo.iter().map(|&k| cands[k].omega.clone()).collect(),
        lp: best,
        combinations_solved: solved,
        heuristic: true,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub problem: Problem,
    pub utility_lb: f64,
    pub approx: f64,
    pub upper_coarse: Option<f64>,
    pub upper_fine: Option<f64>,
    pub regime: Regime,
    pub certified: bool,
}

/// Solves `problem` at every budget of `grid`.
pub fn sweep(j: &JointDist, grid: &[f64], problem: Problem, base: LogBase, opts: &LpOptions) -> Result<Vec<SweepRow>> {
    let ctx = build_context(j)?;
    grid.iter()
        .map(|&eps| {
            let r = solve_in_context(j, &ctx, eps, problem, base, opts)?;
            Ok(SweepRow {
                eps,
                problem,
                utility_lb: r.utility_lb,
                approx: r.approx,
                upper_coarse: r.upper_bounds.coarse,
                upper_fine: r.upper_bounds.fine,
                regime: r.error_bound.regime,
                certified: r.certificate.holds,
            })
        })
        .collect()
}

//! Exhaustive grid search over release kernels.
//!
//! Every column of the kernel is a point of the probability simplex with
//! coordinates on the lattice `{0, r, 2r, ..., 1}`. The search visits all
//! such kernels (up to relabeling of `U`), keeps those meeting the privacy
//! criterion, and returns the largest `I(U;Y)`. Grid values are lower bounds
//! on the true suprema. Entropy on the simplex moves by at most about
//! `|Y| log|Y|` per unit of lattice step, so `|Y| log|Y| r` nats is used as
//! the slack when comparing other lower bounds against a grid value.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::mechanisms::Mechanism;
use crate::probcore::{entropy_nats, matrix_rows, plogp, JointDist, Kernel, LogBase};

/// Tolerance of the criterion checks; it only absorbs floating-point error.
pub const FEAS_TOL: f64 = 1e-12;

/// Default refusal threshold on the number of kernels visited.
pub const DEFAULT_MAX_EVALUATIONS: u64 = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// `I(U;X) <= eps`.
    Mi,
    /// `d(P_{X,U}(., u), P_X P_U(u)) <= eps` for every `u`.
    Wl,
    /// `d(P_{X|U}(.|u), P_X) <= eps` for every `u` with mass.
    L,
    /// `U` independent of `X`.
    Perfect,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mi" => Ok(Criterion::Mi),
            "wl" => Ok(Criterion::Wl),
            "l" => Ok(Criterion::L),
            "perfect" => Ok(Criterion::Perfect),
            _ => Err(invalid(format!("unknown criterion '{s}', expected mi, wl, l or perfect"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: f64,
    pub max_card: usize,
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: u64,
}

fn default_max_evaluations() -> u64 {
    DEFAULT_MAX_EVALUATIONS
}

impl GridSpec {
    pub fn new(resolution: f64, max_card: usize) -> Self {
        GridSpec { resolution, max_card, max_evaluations: DEFAULT_MAX_EVALUATIONS }
    }

    /// Number of lattice steps `1 / resolution`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.resolution > 0.0 && self.resolution <= 0.5) {
            return Err(invalid(format!("resolution {} outside (0, 0.5]", self.resolution)));
        }
        let n = (1.0 / self.resolution).round();
        if (n * self.resolution - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("1 / resolution must be an integer, got {}", 1.0 / self.resolution)));
        }
        Ok(n as usize)
    }
}

/// Additive slack `|Y| log|Y| r` between a grid value and the true optimum, in `base`.
pub fn grid_slack(ny: usize, resolution: f64, base: LogBase) -> f64 {
    base.from_nats(ny as f64 * (ny as f64).ln() * resolution)
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleResult {
    pub criterion: Criterion,
    pub eps: f64,
    pub base: LogBase,
    pub grid: GridSpec,
    pub value: f64,
    /// `P_{U|Y}` for `g` searches; `P_{U|X,Y}` with column `x |Y| + y` for `h` searches.
    #[serde(with = "matrix_rows")]
    pub kernel: DMatrix<f64>,
    pub evaluations: u64,
    pub feasible: u64,
    pub slack: f64,
}

/// Compositions of `n` into `k` parts, lexicographically decreasing.
fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            cur.push(n);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in (0..=n).rev() {
            cur.push(a);
            rec(n - a, k - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, &mut Vec::new(), &mut out);
    out
}

fn binom(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// One column of the searched kernel: the mass it sends to each `x` and to `y`.
struct Column {
    route: Vec<(usize, f64)>,
    y: usize,
    mass: f64,
}

#[derive(Clone)]
struct Best {
    value: f64,
    choice: Vec<usize>,
    feasible: u64,
}

struct Search {
    nx: usize,
    ny: usize,
    card: usize,
    columns: Vec<Column>,
    points: Vec<Vec<f64>>,
    point_entropy: Vec<f64>,
    criterion: Criterion,
    eps_nats: f64,
    px: Vec<f64>,
    h_y: f64,
    /// Each `y` owns exactly one column, so `H(U|Y)` is a sum of column entropies.
    markov: bool,
}

impl Search {
    fn feasible(&self, pxu: &[f64], pu: &[f64]) -> bool {
        let (nx, card) = (self.nx, self.card);
        let dist = |u: usize| -> f64 { (0..nx).map(|x| (pxu[x * card + u] - self.px[x] * pu[u]).abs()).sum() };
        match self.criterion {
            Criterion::Perfect => {
                (0..nx).all(|x| (0..card).all(|u| (pxu[x * card + u] - self.px[x] * pu[u]).abs() <= FEAS_TOL))
            }
            Criterion::Mi => entropy_nats(&self.px) + entropy_nats(pu) - entropy_nats(pxu) <= self.eps_nats + FEAS_TOL,
            Criterion::Wl => (0..card).all(|u| dist(u) <= self.eps_nats + FEAS_TOL),
            Criterion::L => (0..card).all(|u| pu[u] <= 0.0 || dist(u) <= self.eps_nats * pu[u] + FEAS_TOL),
        }
    }

    /// Depth-first search over columns `depth..`; accumulators hold columns `..depth`.
    fn dfs(&self, depth: usize, acc: &Acc, choice: &mut Vec<usize>, best: &mut Best) {
        let card = self.card;
        if depth == self.columns.len() {
            let pu: Vec<f64> = (0..card).map(|u| (0..self.nx).map(|x| acc.pxu[x * card + u]).sum()).collect();
            if self.feasible(&acc.pxu, &pu) {
                best.feasible += 1;
                let v = if self.markov {
                    entropy_nats(&pu) - acc.h_cols
                } else {
                    entropy_nats(&pu) + self.h_y - entropy_nats(&acc.pyu)
                };
                if v > best.value {
                    best.value = v;
                    best.choice = choice.clone();
                }
            }
            return;
        }
        let mut next = acc.clone();
        let range = if depth == 0 { choice[0]..choice[0] + 1 } else { 0..self.points.len() };
        for k in range {
            self.push(depth, k, acc, &mut next);
            if depth > 0 {
                choice.push(k);
            }
            self.dfs(depth + 1, &next, choice, best);
            if depth > 0 {
                choice.pop();
            }
        }
    }

    fn push(&self, depth: usize, k: usize, acc: &Acc, next: &mut Acc) {
        let card = self.card;
        let col = &self.columns[depth];
        let p = &self.points[k];
        for &(x, m) in &col.route {
            for u in 0..card {
                next.pxu[x * card + u] = acc.pxu[x * card + u] + m * p[u];
            }
        }
        if !self.markov {
            for u in 0..card {
                next.pyu[col.y * card + u] = acc.pyu[col.y * card + u] + col.mass * p[u];
            }
        }
        next.h_cols = acc.h_cols + col.mass * self.point_entropy[k];
    }
}

#[derive(Clone)]
struct Acc {
    pxu: Vec<f64>,
    pyu: Vec<f64>,
    h_cols: f64,
}

fn search(
    j: &JointDist,
    columns: Vec<Column>,
    criterion: Criterion,
    eps: f64,
    grid: GridSpec,
    base: LogBase,
    markov: bool,
) -> Result<OracleResult> {
    let n = grid.steps()?;
    let card = grid.max_card;
    let comps = compositions(n, card);
    let points: Vec<Vec<f64>> = comps.iter().map(|c| c.iter().map(|&a| a as f64 / n as f64).collect()).collect();
    let point_entropy: Vec<f64> = points.iter().map(|p| -p.iter().map(|&v| plogp(v)).sum::<f64>()).collect();
    // Relabeling U permutes every column, so the first column may be taken sorted.
    let first: Vec<usize> = (0..comps.len()).filter(|&k| comps[k].windows(2).all(|w| w[0] >= w[1])).collect();
    let evaluations = first.len() as f64 * (comps.len() as f64).powi(columns.len() as i32 - 1);
    if evaluations > grid.max_evaluations as f64 {
        return Err(Error::Refused(format!(
            "grid search needs about {evaluations:.3e} kernel evaluations (limit {}); coarsen the grid or lower the cardinality",
            grid.max_evaluations
        )));
    }
    let (nx, ny) = (j.nx(), j.ny());
    let s = Search {
        nx,
        ny,
        card,
        columns,
        points,
        point_entropy,
        criterion,
        eps_nats: if criterion == Criterion::Mi { base.to_nats(eps) } else { eps },
        px: j.px(),
        h_y: j.h_y(),
        markov,
    };
    let task = |&k: &usize| {
        let mut best = Best { value: f64::NEG_INFINITY, choice: Vec::new(), feasible: 0 };
        let acc = Acc { pxu: vec![0.0; nx * card], pyu: vec![0.0; s.ny * card], h_cols: 0.0 };
        s.dfs(0, &acc, &mut vec![k], &mut best);
        best
    };
    let results: Vec<Best> = first.par_iter().map(task).collect();
    let mut best: Option<Best> = None;
    let mut feasible = 0;
    for b in results {
        feasible += b.feasible;
        if b.feasible > 0 && best.as_ref().is_none_or(|cur| b.value > cur.value) {
            best = Some(b);
        }
    }
    let best = best.ok_or_else(|| Error::Internal("no grid kernel meets the criterion".into()))?;
    let kernel = DMatrix::from_fn(card, s.columns.len(), |u, c| s.points[best.choice[c]][u]);
    Ok(OracleResult {
        criterion,
        eps,
        base,
        grid,
        value: base.from_nats(best.value.max(0.0)),
        kernel,
        evaluations: evaluations as u64,
        feasible,
        slack: grid_slack(ny, grid.resolution, base),
    })
}

/// Grid maximum of `I(U;Y)` over `P_{U|Y}` meeting `criterion`.
///
/// For [`Criterion::Mi`] the budget is in `base`; the distance criteria take
/// an unhalved l1 budget.
pub fn brute_force_g(
    j: &JointDist,
    eps: f64,
    criterion: Criterion,
    grid: GridSpec,
    base: LogBase,
) -> Result<OracleResult> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(invalid(format!("budget must be nonnegative, got {eps}")));
    }
    if grid.max_card == 0 || grid.max_card > j.ny() {
        return Err(invalid(format!("cardinality must be in 1..={} for this search", j.ny())));
    }
    let p = j.matrix();
    let py = j.py();
    let columns =
        (0..j.ny()).map(|y| Column { route: (0..j.nx()).map(|x| (x, p[(x, y)])).collect(), y, mass: py[y] }).collect();
    search(j, columns, criterion, eps, grid, base, true)
}

/// Grid maximum of `I(U;Y)` over `P_{U|X,Y}` with `I(U;X) <= eps` (in `base`).
pub fn brute_force_h(j: &JointDist, eps: f64, grid: GridSpec, base: LogBase) -> Result<OracleResult> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(invalid(format!("budget must be nonnegative, got {eps}")));
    }
    let (nx, ny) = (j.nx(), j.ny());
    if grid.max_card == 0 || grid.max_card > nx * ny + 2 {
        return Err(invalid(format!("cardinality must be in 1..={}", nx * ny + 2)));
    }
    let p = j.matrix();
    // Pairs without mass do not affect the joint of (X, Y, U).
    let mut pairs = Vec::new();
    let mut columns = Vec::new();
    for x in 0..nx {
        for y in 0..ny {
            if p[(x, y)] > 0.0 {
                pairs.push(x * ny + y);
                columns.push(Column { route: vec![(x, p[(x, y)])], y, mass: p[(x, y)] });
            }
        }
    }
    let r = search(j, columns, Criterion::Mi, eps, grid, base, false)?;
    // Spread the kernel over all |X||Y| columns; massless pairs get the first atom.
    let mut kernel = DMatrix::zeros(grid.max_card, nx * ny);
    for c in 0..nx * ny {
        match pairs.iter().position(|&q| q == c) {
            Some(i) => kernel.set_column(c, &r.kernel.column(i)),
            None => kernel[(0, c)] = 1.0,
        }
    }
    Ok(OracleResult { kernel, ..r })
}

#[derive(Clone, Debug, Serialize)]
pub struct Equivalences {
    pub target: f64,
    pub g_equals_target: bool,
    pub g_equals_h: bool,
    pub h_equals_target: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub base: LogBase,
    /// `H(Y|X,U)` of the audited kernel.
    pub h_y_given_xu: f64,
    pub slack: f64,
    pub deterministic_within_slack: bool,
    pub x_function_of_y: bool,
    /// Present when `H(X|Y) = 0` and both optima are supplied.
    pub equivalences: Option<Equivalences>,
}

/// Structural checks on a grid optimizer `P_{U|X,Y}` (columns `x |Y| + y`).
///
/// `optima` holds the `g` and `h` grid values in `base`.
pub fn optimizer_audits(
    j: &JointDist,
    eps: f64,
    kernel: &Kernel,
    resolution: f64,
    optima: Option<(f64, f64)>,
    base: LogBase,
) -> Result<AuditReport> {
    let m = Mechanism::from_kernel_uxy(j, kernel)?;
    let h = base.from_nats(m.joint().cond_entropy(&[1], &[0, 2])?);
    let slack = grid_slack(j.ny(), resolution, base);
    let x_function_of_y = j.h_x_given_y() <= 1e-12;
    let equivalences = match (x_function_of_y, optima) {
        (true, Some((g, hv))) => {
            let target = base.from_nats(j.h_y_given_x()) + eps;
            Some(Equivalences {
                target,
                g_equals_target: (g - target).abs() <= slack,
                g_equals_h: (g - hv).abs() <= slack,
                h_equals_target: (hv - target).abs() <= slack,
            })
        }
        _ => None,
    };
    Ok(AuditReport {
        base,
        h_y_given_xu: h,
        slack,
        deterministic_within_slack: h <= slack,
        x_function_of_y,
        equivalences,
    })
}

/// Frozen grid value for one instance.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Fixture {
    pub instance: Vec<Vec<f64>>,
    pub instance_hash: String,
    pub grid: GridSpec,
    pub criterion: Criterion,
    pub eps: f64,
    pub base: LogBase,
    pub value: f64,
}

/// SHA-256 of the joint matrix entries (row-major, little-endian bits).
pub fn instance_hash(j: &JointDist) -> String {
    let mut h = Sha256::new();
    for x in 0..j.nx() {
        for y in 0..j.ny() {
            h.update(j.matrix()[(x, y)].to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Fixture {
    pub fn from_result(j: &JointDist, r: &OracleResult) -> Self {
        Fixture {
            instance: matrix_rows::to_rows(j.matrix()),
            instance_hash: instance_hash(j),
            grid: r.grid,
            criterion: r.criterion,
            eps: r.eps,
            base: r.base,
            value: r.value,
        }
    }

    pub fn joint(&self) -> Result<JointDist> {
        let j = JointDist::from_rows(&self.instance)?;
        if instance_hash(&j) != self.instance_hash {
            return Err(invalid("fixture instance does not match its hash"));
        }
        Ok(j)
    }
}

/// Rough count of kernels a `g` search visits, before refusal.
pub fn g_cost(ny: usize, grid: &GridSpec) -> Result<f64> {
    let n = grid.steps()? as u64;
    let per = binom(n + grid.max_card as u64 - 1, grid.max_card as u64 - 1);
    Ok(per.powi(ny as i32))
}

//! Functional-representation mechanisms and the evaluation of any release `U`.
//!
//! A functional representation writes `Y = f(U, X)` with `U` independent of
//! `X` ([`frl`]). Mixing in a randomized response `W` (equal to `X` with
//! probability `alpha`, otherwise the dummy symbol [`DUMMY`]) spends an exact
//! leakage budget `I(U;X) = alpha H(X)` ([`efrl`]). The Poisson functional
//! representation ([`sfrl_sample`], [`esfrl_sample`]) is sampled with a fixed
//! seed.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::probcore::{
    binary_entropy, criterion_leakages, entropy_nats, matrix_rows, CriterionLeakages, JointDist, JointTensor, Kernel,
    LogBase,
};

/// Label of the dummy value of the randomized response.
pub const DUMMY: &str = "⊥";

/// Breakpoints of the interval construction closer than this are merged.
pub const BREAKPOINT_TOL: f64 = 1e-12;

/// Default cap on the number of race entries per sampled draw.
pub const DEFAULT_MAX_INDEX: usize = 10_000;

/// Truncated mass above which a sampled mechanism carries a warning.
pub const TRUNCATION_WARN: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepKind {
    Frl,
    Efrl,
    Sfrl,
    Esfrl,
}

/// `U` together with a decoder `f`, so that `Y = f(U, X)`.
#[derive(Clone, Debug, Serialize)]
pub struct FunctionalRep {
    pub kind: RepKind,
    pub atoms: Vec<String>,
    pub p_u: Vec<f64>,
    /// `P_{U|X}`, `|U| x |X|`; all columns equal unless `alpha > 0`.
    #[serde(with = "matrix_rows")]
    pub p_u_given_x: DMatrix<f64>,
    /// `f[u][x]` is the index of `y`.
    pub f: Vec<Vec<usize>>,
    pub alpha: f64,
}

impl FunctionalRep {
    pub fn cardinality(&self) -> usize {
        self.atoms.len()
    }

    /// `P_{Y|X}` implied by `(P_{U|X}, f)`, as a `|Y| x |X|` matrix.
    pub fn induced_channel(&self, ny: usize) -> DMatrix<f64> {
        let nx = self.p_u_given_x.ncols();
        let mut m = DMatrix::zeros(ny, nx);
        for (u, row) in self.f.iter().enumerate() {
            for (x, &y) in row.iter().enumerate() {
                m[(y, x)] += self.p_u_given_x[(u, x)];
            }
        }
        m
    }

    /// Entropy of `U` in nats.
    pub fn entropy_u(&self) -> f64 {
        entropy_nats(&self.p_u)
    }
}

/// Interval construction: the common refinement of the partitions of `[0, 1)`
/// into consecutive intervals of length `P_{Y|X}(y|x)`, one partition per `x`.
///
/// Column order of the joint fixes the order of the intervals.
pub fn frl(j: &JointDist) -> FunctionalRep {
    let k = j.p_y_given_x();
    let (ny, nx) = (j.ny(), j.nx());
    let cum: Vec<Vec<f64>> = (0..nx)
        .map(|x| {
            let mut acc = 0.0;
            (0..ny)
                .map(|y| {
                    acc += k.matrix()[(y, x)];
                    acc
                })
                .collect()
        })
        .collect();

    let mut cuts: Vec<f64> = cum.iter().flat_map(|c| c[..ny - 1].iter().copied()).collect();
    cuts.sort_by(f64::total_cmp);
    let mut points = vec![0.0];
    for c in cuts {
        if c - points[points.len() - 1] > BREAKPOINT_TOL && 1.0 - c > BREAKPOINT_TOL {
            points.push(c);
        }
    }
    points.push(1.0);

    let n = points.len() - 1;
    let mut p_u = Vec::with_capacity(n);
    let mut f = Vec::with_capacity(n);
    for w in points.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        p_u.push(w[1] - w[0]);
        f.push((0..nx).map(|x| cum[x].iter().position(|&c| c > mid).unwrap_or(ny - 1)).collect());
    }
    let p_u_given_x = DMatrix::from_fn(n, nx, |u, _| p_u[u]);
    FunctionalRep {
        kind: RepKind::Frl,
        atoms: (1..=n).map(|i| format!("u{i}")).collect(),
        p_u,
        p_u_given_x,
        f,
        alpha: 0.0,
    }
}

fn leakage_fraction(j: &JointDist, eps: f64, base: LogBase) -> Result<f64> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(precondition(format!("leakage budget must be nonnegative, got {eps}")));
    }
    let h_x = j.h_x();
    if h_x <= 0.0 {
        return Err(precondition("H(X) = 0, the randomized-response weight is undefined"));
    }
    let eps_n = base.to_nats(eps);
    let i = j.mutual_information();
    if eps_n >= i {
        return Err(precondition(format!("budget {eps} {base} is not below I(X;Y) = {} {base}", base.from_nats(i))));
    }
    Ok(eps_n / h_x)
}

/// Interval construction augmented with a randomized response `W`.
///
/// `U = (U~, W)` with `W = X` w.p. `alpha = eps / H(X)` and `W` = [`DUMMY`]
/// otherwise, so `I(U;X) = eps`. Requires `0 <= eps < I(X;Y)` and `H(X) > 0`.
/// Atoms without mass are dropped.
pub fn efrl(j: &JointDist, eps: f64, base: LogBase) -> Result<FunctionalRep> {
    let alpha = leakage_fraction(j, eps, base)?;
    let inner = frl(j);
    let nx = j.nx();
    let px = j.px();

    let mut atoms = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut f = Vec::new();
    for (u, label) in inner.atoms.iter().enumerate() {
        let pu = inner.p_u[u];
        for w in 0..=nx {
            let col: Vec<f64> = (0..nx)
                .map(|x| match w {
                    w if w == nx => pu * (1.0 - alpha),
                    w if w == x => pu * alpha,
                    _ => 0.0,
                })
                .collect();
            if col.iter().all(|&v| v == 0.0) {
                continue;
            }
            let w_label = if w == nx { DUMMY } else { j.x_labels()[w].as_str() };
            atoms.push(format!("({label},{w_label})"));
            cols.push(col);
            f.push(inner.f[u].clone());
        }
    }
    let p_u_given_x = DMatrix::from_fn(cols.len(), nx, |u, x| cols[u][x]);
    let p_u = (0..cols.len()).map(|u| (0..nx).map(|x| px[x] * cols[u][x]).sum()).collect();
    Ok(FunctionalRep { kind: RepKind::Efrl, atoms, p_u, p_u_given_x, f, alpha })
}

/// A release `U` described by its joint law with `(X, Y)`.
#[derive(Clone, Debug, Serialize)]
pub struct Mechanism {
    pub u_labels: Vec<String>,
    /// Axes `(X, Y, U)`.
    joint: JointTensor,
}

/// Utility and leakage of a mechanism.
#[derive(Clone, Debug, Serialize)]
pub struct MechanismSummary {
    pub base: LogBase,
    pub i_uy: f64,
    pub i_ux: f64,
    pub i_xu_given_y: f64,
    pub h_y_given_xu: f64,
    pub h_y_given_x: f64,
    pub h_u: f64,
    pub leakages: CriterionLeakages,
}

const AX_X: usize = 0;
const AX_Y: usize = 1;
const AX_U: usize = 2;

impl Mechanism {
    pub fn from_rep(j: &JointDist, rep: &FunctionalRep) -> Result<Self> {
        let (nx, ny, nu) = (j.nx(), j.ny(), rep.cardinality());
        if rep.p_u_given_x.ncols() != nx {
            return Err(invalid("representation and joint disagree on |X|"));
        }
        let px = j.px();
        let mut data = vec![0.0; nx * ny * nu];
        for u in 0..nu {
            for x in 0..nx {
                let y = rep.f[u][x];
                if y >= ny {
                    return Err(invalid(format!("decoder maps (u{u}, x{x}) outside Y")));
                }
                data[(x * ny + y) * nu + u] += px[x] * rep.p_u_given_x[(u, x)];
            }
        }
        Ok(Mechanism { u_labels: rep.atoms.clone(), joint: JointTensor::from_raw(vec![nx, ny, nu], data) })
    }

    /// `U` generated from `Y` alone through `P_{U|Y}` (`|U| x |Y|`).
    pub fn from_kernel_uy(j: &JointDist, k: &Kernel) -> Result<Self> {
        if k.n_in() != j.ny() {
            return Err(invalid("kernel input alphabet does not match Y"));
        }
        let (nx, ny, nu) = (j.nx(), j.ny(), k.n_out());
        let mut data = vec![0.0; nx * ny * nu];
        for x in 0..nx {
            for y in 0..ny {
                for u in 0..nu {
                    data[(x * ny + y) * nu + u] = j.matrix()[(x, y)] * k.matrix()[(u, y)];
                }
            }
        }
        Ok(Mechanism { u_labels: default_u_labels(nu), joint: JointTensor::from_raw(vec![nx, ny, nu], data) })
    }

    /// `U` generated from `(X, Y)` through `P_{U|X,Y}`; column `x * |Y| + y`.
    pub fn from_kernel_uxy(j: &JointDist, k: &Kernel) -> Result<Self> {
        let (nx, ny, nu) = (j.nx(), j.ny(), k.n_out());
        if k.n_in() != nx * ny {
            return Err(invalid("kernel must have |X||Y| columns"));
        }
        let mut data = vec![0.0; nx * ny * nu];
        for x in 0..nx {
            for y in 0..ny {
                for u in 0..nu {
                    data[(x * ny + y) * nu + u] = j.matrix()[(x, y)] * k.matrix()[(u, x * ny + y)];
                }
            }
        }
        Ok(Mechanism { u_labels: default_u_labels(nu), joint: JointTensor::from_raw(vec![nx, ny, nu], data) })
    }

    pub fn joint(&self) -> &JointTensor {
        &self.joint
    }

    pub fn cardinality(&self) -> usize {
        self.joint.dims()[AX_U]
    }

    /// Largest deviation of the `(X, Y)` marginal from `j`.
    pub fn reproduction_error(&self, j: &JointDist) -> Result<f64> {
        let m = self.joint.pair_matrix(AX_X, AX_Y)?;
        Ok((m - j.matrix()).abs().max())
    }

    /// Joint matrix of `(X, U)`.
    pub fn joint_xu(&self) -> Result<DMatrix<f64>> {
        self.joint.pair_matrix(AX_X, AX_U)
    }

    pub fn summary(&self, base: LogBase) -> Result<MechanismSummary> {
        let t = &self.joint;
        let c = |v: f64| base.from_nats(v);
        Ok(MechanismSummary {
            base,
            i_uy: c(t.mutual_information(&[AX_U], &[AX_Y])?),
            i_ux: c(t.mutual_information(&[AX_U], &[AX_X])?),
            i_xu_given_y: c(t.cond_mutual_information(&[AX_X], &[AX_U], &[AX_Y])?),
            h_y_given_xu: c(t.cond_entropy(&[AX_Y], &[AX_X, AX_U])?),
            h_y_given_x: c(t.cond_entropy(&[AX_Y], &[AX_X])?),
            h_u: c(t.entropy(&[AX_U])?),
            leakages: criterion_leakages(&self.joint_xu()?, base)?,
        })
    }
}

fn default_u_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("u{i}")).collect()
}

/// Terms of the identity `I(Y;U) = I(X;U) + H(Y|X) - H(Y|U,X) - I(X;U|Y)`.
#[derive(Clone, Debug, Serialize)]
pub struct UtilityDecomposition {
    pub base: LogBase,
    pub i_yu: f64,
    pub i_xu: f64,
    pub h_y_given_x: f64,
    pub h_y_given_ux: f64,
    pub i_xu_given_y: f64,
    /// Left side minus right side.
    pub residual: f64,
}

pub fn decompose_utility(m: &Mechanism, base: LogBase) -> Result<UtilityDecomposition> {
    let s = m.summary(base)?;
    let rhs = s.i_ux + s.h_y_given_x - s.h_y_given_xu - s.i_xu_given_y;
    Ok(UtilityDecomposition {
        base,
        i_yu: s.i_uy,
        i_xu: s.i_ux,
        h_y_given_x: s.h_y_given_x,
        h_y_given_ux: s.h_y_given_xu,
        i_xu_given_y: s.i_xu_given_y,
        residual: s.i_uy - rhs,
    })
}

/// Comparison of `H(U)` with `sum_x H(Y|X=x) + eps + h(alpha)`.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyCap {
    pub base: LogBase,
    pub h_u: f64,
    pub cap: f64,
    /// `cap - h_u`.
    pub margin: f64,
    pub holds: bool,
    /// `H(W) = h(alpha) + alpha H(X)`.
    pub h_w: f64,
    /// `H(Y|X) + h(alpha) + eps`, a lower bound on the largest achievable `H(U)`.
    pub sup_lower: f64,
}

pub fn entropy_cap_check(j: &JointDist, rep: &FunctionalRep, eps: f64, base: LogBase) -> EntropyCap {
    let c = |v: f64| base.from_nats(v);
    let h_alpha = binary_entropy(rep.alpha, LogBase::Nats);
    let cap_n: f64 = j.h_y_given_each_x().iter().sum::<f64>() + base.to_nats(eps) + h_alpha;
    let h_u = rep.entropy_u();
    EntropyCap {
        base,
        h_u: c(h_u),
        cap: c(cap_n),
        margin: c(cap_n - h_u),
        holds: h_u <= cap_n + 1e-12,
        h_w: c(h_alpha + rep.alpha * j.h_x()),
        sup_lower: c(j.h_y_given_x() + h_alpha) + eps,
    }
}

/// Controls for the sampled constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub n_draws: usize,
    pub max_index: usize,
    pub seed: u64,
}

impl SamplingConfig {
    pub fn new(n_draws: usize, seed: u64) -> Self {
        SamplingConfig { n_draws, max_index: DEFAULT_MAX_INDEX, seed }
    }
}

/// An empirical mechanism produced by the Poisson race.
///
/// Each draw samples one realization of the race `(T_k, Y_k)_k`; that
/// realization is an atom of `U` and the winner is resolved for every `x`,
/// so `X` is independent of `U` and `Y` is a function of `(X, U)` exactly.
/// The `(X, Y)` marginal is the empirical one.
#[derive(Clone, Debug, Serialize)]
pub struct SampledMechanism {
    pub kind: RepKind,
    pub config: SamplingConfig,
    pub alpha: f64,
    /// Fraction of draws in which `W = X`.
    pub revealed_fraction: f64,
    pub summary: MechanismSummary,
    /// `P_X`-weighted fraction of (draw, x) pairs whose race was cut at `max_index`.
    pub truncation_mass: f64,
    pub warning: Option<String>,
    pub max_selected_index: usize,
    /// Right side of the `I(X;U|Y)` guarantee for this construction.
    pub bound: f64,
    /// Same guarantee with the constant `e^-1 log e + 2 + log(I + e^-1 log e + 2)`.
    pub alt_bound: f64,
    #[serde(skip)]
    pub mechanism: Mechanism,
}

struct RaceDraw {
    y: Vec<usize>,
    index: Vec<usize>,
    truncated: Vec<bool>,
}

fn race(rng: &mut ChaCha8Rng, ratio: &[Vec<f64>], rho: &[f64], py: &WeightedIndex<f64>, max_index: usize) -> RaceDraw {
    let nx = ratio.len();
    let mut best = vec![f64::INFINITY; nx];
    let mut y = vec![0; nx];
    let mut index = vec![0; nx];
    let mut t = 0.0;
    let mut last_y = 0;
    for k in 1..=max_index {
        let e: f64 = rng.sample(Exp1);
        t += e;
        let yk = py.sample(rng);
        last_y = yk;
        for x in 0..nx {
            let r = ratio[x][yk];
            if r > 0.0 && t / r < best[x] {
                best[x] = t / r;
                y[x] = yk;
                index[x] = k;
            }
        }
        if (0..nx).all(|x| t >= best[x] * rho[x]) {
            return RaceDraw { y, index, truncated: vec![false; nx] };
        }
    }
    let truncated: Vec<bool> = (0..nx).map(|x| t < best[x] * rho[x]).collect();
    for x in 0..nx {
        if best[x].is_infinite() {
            y[x] = last_y;
            index[x] = max_index;
        }
    }
    RaceDraw { y, index, truncated }
}

fn sample_race(
    j: &JointDist,
    alpha: f64,
    kind: RepKind,
    cfg: SamplingConfig,
    base: LogBase,
) -> Result<SampledMechanism> {
    if cfg.n_draws == 0 || cfg.max_index == 0 {
        return Err(precondition("n_draws and max_index must be positive"));
    }
    let (nx, ny) = (j.nx(), j.ny());
    let px = j.px();
    let py = j.py();
    let k = j.p_y_given_x();
    let ratio: Vec<Vec<f64>> = (0..nx).map(|x| (0..ny).map(|y| k.matrix()[(y, x)] / py[y]).collect()).collect();
    let rho: Vec<f64> = ratio.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
    let py_dist = WeightedIndex::new(&py).map_err(|e| Error::Internal(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let n = cfg.n_draws;
    let w = 1.0 / n as f64;
    // (draw, revealed) first; U atoms are laid out afterwards.
    let mut draws = Vec::with_capacity(n);
    let mut truncation_mass = 0.0;
    let mut max_selected = 0;
    let mut revealed = 0usize;
    for _ in 0..n {
        let d = race(&mut rng, &ratio, &rho, &py_dist, cfg.max_index);
        let open = alpha > 0.0 && rng.random_bool(alpha);
        revealed += open as usize;
        for x in 0..nx {
            if d.truncated[x] {
                truncation_mass += w * px[x];
            }
            max_selected = max_selected.max(d.index[x]);
        }
        draws.push((d.y, open));
    }

    let nu: usize = draws.iter().map(|(_, open)| if *open { nx } else { 1 }).sum();
    let mut data = vec![0.0; nx * ny * nu];
    let mut labels = Vec::with_capacity(nu);
    let mut u = 0;
    for (i, (ys, open)) in draws.iter().enumerate() {
        if *open {
            for x in 0..nx {
                data[(x * ny + ys[x]) * nu + u + x] += w * px[x];
                labels.push(format!("(d{i},{})", j.x_labels()[x]));
            }
            u += nx;
        } else {
            for x in 0..nx {
                data[(x * ny + ys[x]) * nu + u] += w * px[x];
            }
            labels.push(if alpha > 0.0 { format!("(d{i},{DUMMY})") } else { format!("d{i}") });
            u += 1;
        }
    }
    let mechanism = Mechanism { u_labels: labels, joint: JointTensor::from_raw(vec![nx, ny, nu], data) };
    let summary = mechanism.summary(base)?;

    let i_b = base.from_nats(j.mutual_information());
    let h_xy_b = base.from_nats(j.h_x_given_y());
    let c_alt = base.from_nats(1.0f64.exp().recip()) + 2.0;
    let li = base.log(i_b + 1.0) + 4.0;
    let alt = c_alt + base.log(i_b + c_alt);
    let warning = (truncation_mass > TRUNCATION_WARN)
        .then(|| format!("truncated mass {truncation_mass:.3e} exceeds {TRUNCATION_WARN:e}; raise max_index"));
    Ok(SampledMechanism {
        kind,
        config: cfg,
        alpha,
        revealed_fraction: revealed as f64 / n as f64,
        summary,
        truncation_mass,
        warning,
        max_selected_index: max_selected,
        bound: alpha * h_xy_b + (1.0 - alpha) * li,
        alt_bound: alpha * h_xy_b + (1.0 - alpha) * alt,
        mechanism,
    })
}

/// Sampled Poisson functional representation (`I(X;U) = 0`).
pub fn sfrl_sample(j: &JointDist, cfg: SamplingConfig, base: LogBase) -> Result<SampledMechanism> {
    sample_race(j, 0.0, RepKind::Sfrl, cfg, base)
}

/// Sampled Poisson representation plus randomized response with `alpha = eps / H(X)`.
pub fn esfrl_sample(j: &JointDist, eps: f64, cfg: SamplingConfig, base: LogBase) -> Result<SampledMechanism> {
    let alpha = leakage_fraction(j, eps, base)?;
    sample_race(j, alpha, RepKind::Esfrl, cfg, base)
}

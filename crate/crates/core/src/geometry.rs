//! Extreme points of the polytope of releases compatible with a leakage matrix.
//!
//! Let `K = P_{X|Y}` (`|X| x |Y|`, full row rank, `|X| < |Y|`) and let `M`
//! hold an orthonormal basis of its row space, so `Null(M) = Null(K)`.
//! Conditionals `P_{Y|U=u}` that keep `P_{X|U=u}` at `P_X` lie in
//! `{v >= 0 : M v = M P_Y}`; its vertices are basic solutions supported on an
//! `|X|`-subset `Omega` of the columns:
//!
//! ```text
//! t_Omega = M_Omega^-1 M P_Y
//! H_Omega = M_Omega^-1 M_lead K_lead^-1
//! ```
//!
//! where `lead` is an invertible block of `|X|` columns of `K` (the first
//! one, unless it is singular). Moving `P_{X|U=u}` to `P_X + s J` moves the
//! vertex to `t_Omega + s H_Omega J`, with `s = eps / P_U(u)` for the weighted
//! criterion and `s = eps` for the unweighted one.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, precondition, Error, Result};
use crate::probcore::{entropy_nats, matrix_rows, JointDist};

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Entries of `t_Omega` within this distance of zero count as zero.
pub const ZERO_TOL: f64 = 1e-9;

/// Per-letter privacy criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerLetter {
    /// `d(P_{X,U}(., u), P_X P_U(u)) <= eps`.
    Wl,
    /// `d(P_{X|U}(.|u), P_X) <= eps`.
    L,
}

/// Cached data of one support set `Omega`.
#[derive(Clone, Debug, Serialize)]
pub struct OmegaData {
    pub omega: Vec<usize>,
    pub t: Vec<f64>,
    #[serde(with = "matrix_rows")]
    pub m_inv: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub h: DMatrix<f64>,
    /// `H_Omega^-1 = K_lead M_lead^-1 M_Omega`.
    #[serde(with = "matrix_rows")]
    pub h_inv: DMatrix<f64>,
    pub sigma_max: f64,
}

impl OmegaData {
    /// `t_Omega` spread over all of `Y`.
    pub fn vertex(&self, ny: usize) -> Vec<f64> {
        let mut v = vec![0.0; ny];
        for (i, &w) in self.omega.iter().enumerate() {
            v[w] = self.t[i];
        }
        v
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometryContext {
    #[serde(with = "matrix_rows")]
    pub m: DMatrix<f64>,
    /// `P_{X|Y}`.
    #[serde(with = "matrix_rows")]
    pub leakage: DMatrix<f64>,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    pub singular_values: Vec<f64>,
    /// Columns of the invertible block used for `H_Omega`.
    pub lead: Vec<usize>,
    pub lead_permuted: bool,
    /// Sets with strictly positive `t_Omega`.
    pub feasible: Vec<OmegaData>,
    /// Sets whose `t_Omega` is nonnegative with a zero entry; distinct vertices only.
    pub degenerate: Vec<OmegaData>,
    pub eps2: f64,
}

fn svd_values(a: &DMatrix<f64>) -> Vec<f64> {
    a.clone().svd(false, false).singular_values.iter().copied().collect()
}

fn invertible(a: &DMatrix<f64>) -> bool {
    let s = svd_values(a);
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > RANK_TOL * max
}

/// `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if c[i] < n - k + i {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        c[i] += 1;
        for r in i + 1..k {
            c[r] = c[r - 1] + 1;
        }
    }
}

fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone().try_inverse().ok_or_else(|| Error::Internal("matrix inversion failed".into()))
}

pub fn build_context(j: &JointDist) -> Result<GeometryContext> {
    let (nx, ny) = (j.nx(), j.ny());
    if nx >= ny {
        return Err(precondition(format!("need |X| < |Y|, got |X| = {nx}, |Y| = {ny}")));
    }
    let k = j.p_x_given_y().matrix().clone();
    let svd = k.clone().svd(false, true);
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    let s_max = singular_values.iter().copied().fold(0.0, f64::max);
    let s_min = singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if s_min <= RANK_TOL * s_max {
        return Err(precondition(format!("leakage matrix is rank deficient: smallest singular value {s_min:e}")));
    }
    let m = svd.v_t.ok_or_else(|| Error::Internal("SVD returned no right singular vectors".into()))?;

    let subsets = combinations(ny, nx);
    let lead = subsets
        .iter()
        .find(|c| invertible(&k.select_columns(c.iter())))
        .cloned()
        .ok_or_else(|| Error::Internal("no invertible column block in a full-rank matrix".into()))?;
    let lead_permuted = lead.iter().enumerate().any(|(i, &c)| i != c);
    let m_lead = m.select_columns(lead.iter());
    let k_lead = k.select_columns(lead.iter());
    let m_lead_inv = inverse(&m_lead)?;
    let lead_map = &m_lead * inverse(&k_lead)?;

    let py = j.py();
    let m_py = &m * DVector::from_column_slice(&py);
    let mut feasible = Vec::new();
    let mut degenerate: Vec<OmegaData> = Vec::new();
    for omega in subsets {
        let m_o = m.select_columns(omega.iter());
        if !invertible(&m_o) {
            continue;
        }
        let m_inv = inverse(&m_o)?;
        let mut t: Vec<f64> = (&m_inv * &m_py).iter().copied().collect();
        if t.iter().any(|&v| v < -ZERO_TOL) {
            continue;
        }
        let h = &m_inv * &lead_map;
        let h_inv = &k_lead * &m_lead_inv * &m_o;
        let sigma_max = svd_values(&h).into_iter().fold(0.0, f64::max);
        let strict = t.iter().all(|&v| v > ZERO_TOL);
        if !strict {
            for v in t.iter_mut() {
                if v.abs() <= ZERO_TOL {
                    *v = 0.0;
                }
            }
        }
        let data = OmegaData { omega, t, m_inv, h, h_inv, sigma_max };
        if strict {
            feasible.push(data);
        } else {
            let v = data.vertex(ny);
            let seen = degenerate
                .iter()
                .chain(feasible.iter())
                .any(|d| d.vertex(ny).iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-12));
            if !seen {
                degenerate.push(data);
            }
        }
    }

    let eps2 = if feasible.is_empty() {
        0.0
    } else {
        let min_t = feasible.iter().flat_map(|d| d.t.iter().copied()).fold(f64::INFINITY, f64::min);
        let max_s = feasible.iter().map(|d| d.sigma_max).fold(0.0, f64::max);
        min_t / max_s
    };

    Ok(GeometryContext {
        m,
        leakage: k,
        px: j.px(),
        py,
        singular_values,
        lead,
        lead_permuted,
        feasible,
        degenerate,
        eps2,
    })
}

impl GeometryContext {
    pub fn nx(&self) -> usize {
        self.leakage.nrows()
    }

    pub fn ny(&self) -> usize {
        self.leakage.ncols()
    }

    /// Cached data of a set with strictly positive `t_Omega`.
    pub fn feasible_omega(&self, omega: &[usize]) -> Option<&OmegaData> {
        self.feasible.iter().find(|d| d.omega == omega)
    }

    /// All vertices of the zero-leakage polytope: feasible and degenerate sets.
    pub fn all_vertices(&self) -> impl Iterator<Item = &OmegaData> {
        self.feasible.iter().chain(self.degenerate.iter())
    }
}

/// A perturbed vertex `V*` for one atom `u`.
#[derive(Clone, Debug, Serialize)]
pub struct ExtremePoint {
    pub omega: Vec<usize>,
    pub values: Vec<f64>,
    pub j: Vec<f64>,
    pub weight: f64,
    pub eps: f64,
    pub criterion: PerLetter,
}

/// Tolerance for the constraints `1'J = 0` and `|J|_1 <= 1`.
pub const J_TOL: f64 = 1e-9;

pub fn extreme_point(
    ctx: &GeometryContext,
    omega: &[usize],
    j: &[f64],
    weight: f64,
    eps: f64,
    criterion: PerLetter,
) -> Result<ExtremePoint> {
    let d = ctx
        .feasible_omega(omega)
        .ok_or_else(|| precondition(format!("{omega:?} is not a set with strictly positive t")))?;
    if j.len() != ctx.nx() {
        return Err(invalid(format!("J has length {}, expected {}", j.len(), ctx.nx())));
    }
    let sum: f64 = j.iter().sum();
    let norm: f64 = j.iter().map(|v| v.abs()).sum();
    if sum.abs() > J_TOL || norm > 1.0 + J_TOL {
        return Err(precondition(format!("J must satisfy 1'J = 0 and |J|_1 <= 1 (sum {sum}, norm {norm})")));
    }
    if !(weight > 0.0 && weight <= 1.0) || !eps.is_finite() || eps < 0.0 {
        return Err(precondition(format!("need 0 < weight <= 1 and eps >= 0, got {weight}, {eps}")));
    }
    let scale = match criterion {
        PerLetter::Wl => eps / weight,
        PerLetter::L => eps,
    };
    let shift = &d.h * DVector::from_column_slice(j);
    let mut values = vec![0.0; ctx.ny()];
    for (i, &w) in d.omega.iter().enumerate() {
        let v = d.t[i] + scale * shift[i];
        if v < 0.0 {
            return Err(Error::Infeasible(format!(
                "entry {w} of the perturbed vertex is negative ({v:e}); eps is too large for this set"
            )));
        }
        values[w] = v;
    }
    Ok(ExtremePoint { omega: omega.to_vec(), values, j: j.to_vec(), weight, eps, criterion })
}

/// First-order expansion of the entropy of a perturbed vertex, in nats.
#[derive(Clone, Debug, Serialize)]
pub struct LinearizationCoeffs {
    pub l: Vec<f64>,
    pub b: f64,
    pub a: Vec<f64>,
}

impl LinearizationCoeffs {
    /// `-(b + scale a J)`.
    pub fn entropy(&self, scale: f64, j: &[f64]) -> f64 {
        -(self.b + scale * self.a.iter().zip(j).map(|(a, x)| a * x).sum::<f64>())
    }
}

pub fn linearize(ctx: &GeometryContext, omega: &[usize]) -> Result<LinearizationCoeffs> {
    let d = ctx
        .feasible_omega(omega)
        .ok_or_else(|| precondition(format!("{omega:?} is not a set with strictly positive t")))?;
    let l: Vec<f64> = d.t.iter().map(|v| v.ln()).collect();
    let b = l.iter().zip(&d.t).map(|(a, t)| a * t).sum();
    let a = (0..ctx.nx()).map(|c| (0..ctx.nx()).map(|r| l[r] * d.h[(r, c)]).sum()).collect();
    Ok(LinearizationCoeffs { l, b, a })
}

/// Exact entropy (nats) of the vertex of `omega` perturbed by `scale H J`.
pub fn perturbed_entropy(d: &OmegaData, scale: f64, j: &[f64]) -> f64 {
    let shift = &d.h * DVector::from_column_slice(j);
    let v: Vec<f64> = d.t.iter().enumerate().map(|(i, t)| t + scale * shift[i]).collect();
    entropy_nats(&v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    None,
    Coarse,
    Fine,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorBound {
    pub regime: Regime,
    /// Bound on the linearization error in nats, when a regime applies.
    pub bound: Option<f64>,
    pub coarse_limit: f64,
    pub fine_limit: f64,
}

/// Coarse bound on the linearization error, valid below `eps2 / 2`.
pub const COARSE_BOUND: f64 = 0.75;

/// Fine bound `1 / (2 (2 sqrt|X| - 1)^2) + 1 / (4 |X|)`, valid below `eps2 / (2 sqrt|X|)`.
pub fn fine_bound(nx: usize) -> f64 {
    let r = 2.0 * (nx as f64).sqrt() - 1.0;
    1.0 / (2.0 * r * r) + 1.0 / (4.0 * nx as f64)
}

/// Regime of the linearization error at `eps`; the limits are strict.
pub fn error_bounds(ctx: &GeometryContext, eps: f64) -> ErrorBound {
    let nx = ctx.nx();
    let coarse_limit = ctx.eps2 / 2.0;
    let fine_limit = ctx.eps2 / (2.0 * (nx as f64).sqrt());
    let (regime, bound) = if eps < fine_limit {
        (Regime::Fine, Some(fine_bound(nx)))
    } else if eps < coarse_limit {
        (Regime::Coarse, Some(COARSE_BOUND))
    } else {
        (Regime::None, None)
    };
    ErrorBound { regime, bound, coarse_limit, fine_limit }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NullSpaceCheck {
    pub in_leakage_null: bool,
    pub in_m_null: bool,
    pub sum: f64,
    /// Both memberships agree and null vectors sum to zero.
    pub consistent: bool,
}

pub fn null_space_property(ctx: &GeometryContext, beta: &[f64]) -> Result<NullSpaceCheck> {
    if beta.len() != ctx.ny() {
        return Err(invalid(format!("beta has length {}, expected {}", beta.len(), ctx.ny())));
    }
    let b = DVector::from_column_slice(beta);
    let tol = 1e-10 * (1.0 + b.norm());
    let in_leakage_null = (&ctx.leakage * &b).amax() <= tol;
    let in_m_null = (&ctx.m * &b).amax() <= tol;
    let sum = b.sum();
    Ok(NullSpaceCheck {
        in_leakage_null,
        in_m_null,
        sum,
        consistent: in_leakage_null == in_m_null && (!in_leakage_null || sum.abs() <= tol),
    })
}

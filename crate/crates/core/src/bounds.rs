//! Closed-form bounds on the best achievable utility.
//!
//! Every function takes the session [`LogBase`]; entropies are evaluated in
//! that base and the additive constants (`log(I + 1) + 4` and friends) are
//! read in the same base. Terms that come from Pinsker-type inequalities
//! (`eps^2 / 2`, `eps^2 / min P_X`, ...) are leakages measured in nats and
//! are converted before being added.
//!
//! Quantities named in reports:
//!
//! | quantity | meaning                                                         |
//! |----------|-----------------------------------------------------------------|
//! | `h`      | best `I(U;Y)` with `I(U;X) <= eps`, `U` drawn from `(X, Y)`     |
//! | `h0`     | the same at `eps = 0`                                           |
//! | `h_wl`   | `U` from `(X, Y)`, weighted per-letter criterion                |
//! | `g_wl`   | `U` from `Y` only, weighted per-letter criterion                |
//! | `h_l`    | `U` from `(X, Y)`, unweighted per-letter criterion              |
//! | `h_p`    | prioritized private data `X = (X1, X2)`                         |
//! | `psi`    | smallest `I(X;U|Y)` over functional representations             |

use serde::Serialize;

use crate::error::{invalid, precondition, Result};
use crate::probcore::{JointDist, JointTensor, LogBase};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Lower,
    Upper,
    Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundEntry {
    pub id: String,
    pub quantity: String,
    pub kind: BoundKind,
    pub value: f64,
    pub valid: bool,
    pub validity: String,
    pub derivation: String,
}

/// One row of the long CSV layout.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCsvRow {
    pub bound_id: String,
    pub eps: f64,
    pub value: f64,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub base: LogBase,
    pub eps: f64,
    pub entries: Vec<BoundEntry>,
    pub notes: Vec<String>,
}

impl BoundsReport {
    fn new(base: LogBase, eps: f64) -> Self {
        BoundsReport { base, eps, entries: Vec::new(), notes: Vec::new() }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        id: &str,
        quantity: &str,
        kind: BoundKind,
        value: f64,
        valid: bool,
        validity: &str,
        derivation: &str,
    ) {
        self.entries.push(BoundEntry {
            id: id.into(),
            quantity: quantity.into(),
            kind,
            value,
            valid,
            validity: validity.into(),
            derivation: derivation.into(),
        });
    }

    pub fn get(&self, id: &str) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn value(&self, id: &str) -> Option<f64> {
        self.get(id).map(|e| e.value)
    }

    /// Append another report computed for the same `eps` and base.
    pub fn extend(&mut self, other: BoundsReport) {
        self.entries.extend(other.entries);
        self.notes.extend(other.notes);
    }

    pub fn csv_rows(&self) -> Vec<BoundCsvRow> {
        self.entries
            .iter()
            .map(|e| BoundCsvRow { bound_id: e.id.clone(), eps: self.eps, value: e.value, valid: e.valid })
            .collect()
    }

    /// Largest `lower - upper` over valid entries of the same quantity; `<= 0` when consistent.
    pub fn worst_violation(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for lo in self.entries.iter().filter(|e| e.valid && e.kind == BoundKind::Lower) {
            for up in self.entries.iter().filter(|e| e.valid && e.kind == BoundKind::Upper && e.quantity == lo.quantity)
            {
                worst = worst.max(lo.value - up.value);
            }
        }
        worst
    }
}

/// Entropic quantities of a joint in one base.
struct Terms {
    h_x: f64,
    h_y: f64,
    h_x_given_y: f64,
    h_y_given_x: f64,
    i: f64,
}

impl Terms {
    fn new(j: &JointDist, base: LogBase) -> Self {
        let c = |v| base.from_nats(v);
        Terms {
            h_x: c(j.h_x()),
            h_y: c(j.h_y()),
            h_x_given_y: c(j.h_x_given_y()),
            h_y_given_x: c(j.h_y_given_x()),
            i: c(j.mutual_information()),
        }
    }
}

/// `log(I + 1) + 4` in the given base.
pub fn sfrl_constant(i: f64, base: LogBase) -> f64 {
    base.log(i + 1.0) + 4.0
}

fn check_budget(eps: f64, i: f64, base: LogBase) -> Result<()> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(precondition(format!("leakage budget must be nonnegative, got {eps}")));
    }
    if eps >= i {
        return Err(precondition(format!(
            "budget {eps} {base} is not below I(X;Y) = {i} {base}; the optimum there is H(Y)"
        )));
    }
    Ok(())
}

/// Lower bounds `L1, L2, L3` and the upper bound `H(Y|X) + eps` on `h`.
///
/// `g0` is the perfect-privacy utility of the same joint in the same base
/// (use 0 when unknown, e.g. for an invertible square leakage matrix).
pub fn h_bounds_mi(j: &JointDist, eps: f64, g0: f64, base: LogBase) -> Result<BoundsReport> {
    let t = Terms::new(j, base);
    check_budget(eps, t.i, base)?;
    let alpha = eps / t.h_x;
    let c = sfrl_constant(t.i, base);
    let mut r = BoundsReport::new(base, eps);
    let pre = "0 <= eps < I(X;Y)";
    r.push(
        "l1",
        "h",
        BoundKind::Lower,
        t.h_y - t.h_x + eps,
        true,
        pre,
        "interval construction with randomized response",
    );
    r.push(
        "l2",
        "h",
        BoundKind::Lower,
        t.h_y_given_x - alpha * t.h_x_given_y + eps - (1.0 - alpha) * c,
        true,
        pre,
        "Poisson representation with randomized response",
    );
    r.push(
        "l3",
        "h",
        BoundKind::Lower,
        eps * t.h_y / t.i + g0 * (1.0 - eps / t.i),
        true,
        "0 <= eps < I(X;Y); g0 supplied by the caller",
        "time sharing between the perfect-privacy optimum and U = Y",
    );
    r.push("upper", "h", BoundKind::Upper, t.h_y_given_x + eps, true, pre, "I(U;Y) <= I(U;X) + H(Y|X)");
    Ok(r)
}

/// Conditions under which `h` exceeds the budget.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Positivity {
    /// `H(Y|X) > 0`.
    pub necessary: bool,
    /// `H(Y|X) - alpha H(X|Y) - (1 - alpha) min{H(X|Y), log(I + 1) + 4} > 0`.
    pub sufficient: bool,
    pub sufficient_margin: f64,
}

pub fn positivity_condition(j: &JointDist, eps: f64, base: LogBase) -> Result<Positivity> {
    let t = Terms::new(j, base);
    check_budget(eps, t.i, base)?;
    let alpha = eps / t.h_x;
    let c = sfrl_constant(t.i, base);
    let margin = t.h_y_given_x - alpha * t.h_x_given_y - (1.0 - alpha) * t.h_x_given_y.min(c);
    Ok(Positivity { necessary: t.h_y_given_x > 1e-12, sufficient: margin > 0.0, sufficient_margin: margin })
}

/// `sum_y int_0^1 g_y(t) log g_y(t) dt` with `g_y(t) = P_X{P_{Y|X}(y|X) >= t}`.
///
/// Each `g_y` is a step function, so the integral is a finite sum over the
/// sorted thresholds. The value is nonpositive.
pub fn efi_integral(j: &JointDist, base: LogBase) -> f64 {
    let px = j.px();
    let k = j.p_y_given_x();
    let mut total = 0.0;
    for y in 0..j.ny() {
        let mut pts: Vec<(f64, f64)> = (0..j.nx()).map(|x| (k.matrix()[(y, x)], px[x])).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Mass of {x : P(y|x) >= t} for t just above the previous threshold.
        let mut above: f64 = 1.0;
        let mut prev = 0.0;
        let mut i = 0;
        while i < pts.len() {
            let t = pts[i].0;
            if t > prev && above > 0.0 {
                total += (t - prev) * above * above.ln();
            }
            while i < pts.len() && pts[i].0 == t {
                above -= pts[i].1;
                i += 1;
            }
            prev = t;
        }
    }
    base.from_nats(total)
}

/// Lower bound `-sum_y int g_y log g_y - I(X;Y)` on the excess functional information.
pub fn efi_lower(j: &JointDist, base: LogBase) -> f64 {
    -efi_integral(j, base) - base.from_nats(j.mutual_information())
}

/// Bounds on the zero-leakage utility `h0`.
pub fn h0_report(j: &JointDist, base: LogBase) -> BoundsReport {
    let t = Terms::new(j, base);
    let c = sfrl_constant(t.i, base);
    let integral = efi_integral(j, base);
    let mut r = BoundsReport::new(base, 0.0);
    r.push("l01", "h0", BoundKind::Lower, t.h_y - t.h_x, true, "always", "interval construction");
    r.push("l02", "h0", BoundKind::Lower, t.h_y_given_x - c, true, "always", "Poisson representation");
    r.push("u01", "h0", BoundKind::Upper, t.h_y_given_x, true, "always", "I(U;Y) <= H(Y|X) when U is independent of X");
    r.push(
        "u02",
        "h0",
        BoundKind::Upper,
        t.h_y_given_x + integral + t.i,
        true,
        "always",
        "excess functional information lower bound",
    );
    r.push("psi_lower", "psi", BoundKind::Lower, -integral - t.i, true, "always", "step-function integral");
    let exact = j.ny() == 2;
    r.push(
        "h0_exact",
        "h0",
        BoundKind::Value,
        t.h_y_given_x + integral + t.i,
        exact,
        "|Y| = 2",
        "u02 is attained when Y is binary",
    );
    if exact {
        r.notes.push("binary Y: h0 equals u02".into());
    }
    r
}

/// Bounds for the per-letter criteria.
///
/// Lower bounds on `h_wl` need `eps^2 / 2 < I(X;Y)` (in nats); when that fails
/// they are left out and a note explains why.
pub fn perletter_closed_bounds(j: &JointDist, eps: f64, base: LogBase) -> Result<BoundsReport> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(precondition(format!("eps must be nonnegative, got {eps}")));
    }
    let t = Terms::new(j, base);
    let min_px = j.px().into_iter().fold(f64::INFINITY, f64::min);
    let (nx, ny) = (j.nx() as f64, j.ny() as f64);
    let mut r = BoundsReport::new(base, eps);

    let leak = eps * eps / 2.0;
    if leak < j.mutual_information() {
        let alpha = leak / j.h_x();
        let c = sfrl_constant(t.i, base);
        let pre = "eps < sqrt(2 I(X;Y)) (nats)";
        r.push(
            "l_hwl1",
            "h_wl",
            BoundKind::Lower,
            t.h_y_given_x - t.h_x_given_y + base.from_nats(leak),
            true,
            pre,
            "interval construction with randomized response at leakage eps^2/2",
        );
        r.push(
            "l_hwl2",
            "h_wl",
            BoundKind::Lower,
            t.h_y_given_x - alpha * t.h_x_given_y + base.from_nats(leak) - (1.0 - alpha) * c,
            true,
            pre,
            "Poisson representation with randomized response at leakage eps^2/2",
        );
    } else {
        r.notes.push(format!("l_hwl1, l_hwl2 omitted: eps = {eps} is not below sqrt(2 I(X;Y))"));
    }
    r.push(
        "u_gwl",
        "g_wl",
        BoundKind::Upper,
        base.from_nats(eps * ny * nx / min_px) + t.h_y_given_x,
        true,
        "eps >= 0",
        "leakage bound from the weighted criterion",
    );
    r.push(
        "u_hl",
        "h_l",
        BoundKind::Upper,
        base.from_nats(eps * eps / min_px) + t.h_y_given_x,
        true,
        "eps >= 0",
        "reverse Pinsker",
    );
    Ok(r)
}

/// Budgets that relate the mutual-information and per-letter problems.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PinskerConversion {
    /// `sqrt(2 eps)`: an `I(X;U) <= eps` release meets the weighted criterion at this level.
    pub eps_bar: f64,
    /// `eps^2 / min P_X`: leakage implied by the unweighted criterion at level `eps`.
    pub eps_prime: f64,
    /// `sqrt(eps min P_X)`: unweighted level that guarantees `I(X;U) <= eps`.
    pub eps_tilde: f64,
}

/// Pinsker conversions; `eps` is a leakage in nats.
pub fn pinsker_convert(eps: f64, min_px: f64) -> Result<PinskerConversion> {
    if !eps.is_finite() || eps < 0.0 || !(min_px > 0.0 && min_px <= 1.0) {
        return Err(precondition(format!("need eps >= 0 and 0 < min_px <= 1, got {eps}, {min_px}")));
    }
    Ok(PinskerConversion {
        eps_bar: (2.0 * eps).sqrt(),
        eps_prime: eps * eps / min_px,
        eps_tilde: (eps * min_px).sqrt(),
    })
}

/// A joint pmf on `X1 x X2 x Y` with strictly positive marginals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrioritizedJoint {
    tensor: JointTensor,
}

impl PrioritizedJoint {
    pub fn new(tensor: JointTensor) -> Result<Self> {
        if tensor.dims().len() != 3 {
            return Err(invalid("prioritized joint needs three axes (X1, X2, Y)"));
        }
        for axis in 0..3 {
            let m = tensor.marginal(&[axis])?;
            if let Some(i) = m.data().iter().position(|&v| v <= 0.0) {
                return Err(invalid(format!("marginal of axis {axis} vanishes at index {i}")));
            }
        }
        Ok(PrioritizedJoint { tensor })
    }

    /// From nested `[x1][x2][y]` arrays.
    pub fn from_nested(p: &[Vec<Vec<f64>>]) -> Result<Self> {
        let n1 = p.len();
        let n2 = p.first().map_or(0, Vec::len);
        let ny = p.first().and_then(|a| a.first()).map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n1 * n2 * ny);
        for (a, block) in p.iter().enumerate() {
            if block.len() != n2 {
                return Err(invalid(format!("x1 = {a}: expected {n2} rows")));
            }
            for (b, row) in block.iter().enumerate() {
                if row.len() != ny {
                    return Err(invalid(format!("(x1, x2) = ({a}, {b}): expected {ny} entries")));
                }
                data.extend_from_slice(row);
            }
        }
        Self::new(JointTensor::new(vec![n1, n2, ny], data)?)
    }

    pub fn tensor(&self) -> &JointTensor {
        &self.tensor
    }
}

/// Bounds on `h_p`: `U` may leak `eps` about `X = (X1, X2)` with `I(U;X1) <= I(U;X2)`.
pub fn prioritized_bounds(pj: &PrioritizedJoint, eps: f64, base: LogBase) -> Result<BoundsReport> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(precondition(format!("eps must be nonnegative, got {eps}")));
    }
    let t = &pj.tensor;
    let h = |axes: &[usize]| t.entropy(axes);
    let (h12y, h12, hy, h2y, h2) = (h(&[0, 1, 2])?, h(&[0, 1])?, h(&[2])?, h(&[1, 2])?, h(&[1])?);
    if h2 <= 0.0 {
        return Err(precondition("H(X2) = 0, the randomized-response weight is undefined"));
    }
    let c = |v: f64| base.from_nats(v);
    let h_y_given_x = c(h12y - h12);
    let h_x_given_y = c(h12y - hy);
    let h_x2_given_y = c(h2y - hy);
    let i = c(h12 + hy - h12y);
    let alpha = base.to_nats(eps) / h2;
    let k = sfrl_constant(i, base);

    let mut r = BoundsReport::new(base, eps);
    let a_ok = alpha <= 1.0;
    let a_txt = "eps <= H(X2)";
    r.push("lp1", "h_p", BoundKind::Lower, eps + h_y_given_x - h_x_given_y, true, "eps >= 0", "interval construction");
    r.push(
        "lp2",
        "h_p",
        BoundKind::Lower,
        eps + h_y_given_x - alpha * h_x2_given_y - k,
        a_ok,
        a_txt,
        "Poisson representation, randomized response on X2",
    );
    r.push(
        "lp3",
        "h_p",
        BoundKind::Lower,
        eps + h_y_given_x - alpha * h_x_given_y - (1.0 - alpha) * k,
        a_ok,
        a_txt,
        "Poisson representation, randomized response on X2",
    );
    r.push("up1", "h_p", BoundKind::Upper, eps + h_y_given_x, true, "eps >= 0", "I(U;Y) <= I(U;X) + H(Y|X)");
    Ok(r)
}

/// Outcome of the `H(X|Y) = 0` test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EqualityCase {
    pub h_x_given_y_zero: bool,
    /// `H(Y|X) + eps` when the test fires: then both optima equal this value.
    pub value: Option<f64>,
    pub conclusion: String,
}

/// Tolerance on `H(X|Y)` (nats) for the equality test.
pub const EQUALITY_TOL: f64 = 1e-9;

pub fn equality_detector(j: &JointDist, eps: f64, base: LogBase) -> Result<EqualityCase> {
    let t = Terms::new(j, base);
    check_budget(eps, t.i, base)?;
    if j.h_x_given_y() <= EQUALITY_TOL {
        let v = t.h_y_given_x + eps;
        Ok(EqualityCase {
            h_x_given_y_zero: true,
            value: Some(v),
            conclusion: format!("X is a function of Y: both optima equal H(Y|X) + eps = {v} {base}"),
        })
    } else {
        Ok(EqualityCase { h_x_given_y_zero: false, value: None, conclusion: "H(X|Y) > 0: no conclusion".into() })
    }
}

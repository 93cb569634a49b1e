//! Finite distributions, channels and the information measures over them.
//!
//! Everything is computed in nats and converted with [`LogBase`] only when a
//! value is reported. The conventions are fixed crate-wide:
//!
//! * `0 log 0 = 0`;
//! * inputs are never renormalized; a mass that is off by more than
//!   [`MASS_TOL`] is rejected;
//! * `KL(p || q)` with `p(i) > 0 = q(i)` is an error, not infinity;
//! * the distance `d(p, q)` is the unhalved l1 norm, so it lies in `[0, 2]`.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on total probability mass.
pub const MASS_TOL: f64 = 1e-9;

/// Unit in which information quantities are reported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Bits,
    Nats,
}

impl LogBase {
    /// Convert a value in nats into this unit.
    pub fn from_nats(self, v: f64) -> f64 {
        match self {
            LogBase::Bits => v / LN_2,
            LogBase::Nats => v,
        }
    }

    /// Convert a value in this unit into nats.
    pub fn to_nats(self, v: f64) -> f64 {
        match self {
            LogBase::Bits => v * LN_2,
            LogBase::Nats => v,
        }
    }

    /// Logarithm in this base.
    pub fn log(self, x: f64) -> f64 {
        self.from_nats(x.ln())
    }

    pub fn unit(self) -> &'static str {
        match self {
            LogBase::Bits => "bits",
            LogBase::Nats => "nats",
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.unit())
    }
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bits" | "bit" | "2" => Ok(LogBase::Bits),
            "nats" | "nat" | "e" => Ok(LogBase::Nats),
            other => Err(invalid(format!("unknown log base '{other}'"))),
        }
    }
}

#[inline]
pub(crate) fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy in nats of a (not necessarily normalized) mass vector.
pub fn entropy_nats(p: &[f64]) -> f64 {
    -p.iter().map(|&v| plogp(v)).sum::<f64>()
}

/// Binary entropy `h(theta)` in the requested base. Returns NaN outside `[0, 1]`.
pub fn binary_entropy(theta: f64, base: LogBase) -> f64 {
    if !(0.0..=1.0).contains(&theta) {
        return f64::NAN;
    }
    base.from_nats(entropy_nats(&[theta, 1.0 - theta]))
}

fn check_mass(mass: &[f64], what: &str) -> Result<()> {
    if mass.is_empty() {
        return Err(invalid(format!("{what} is empty")));
    }
    for (i, &v) in mass.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(invalid(format!("{what}: entry {i} is {v}")));
        }
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(invalid(format!("{what} sums to {total}")));
    }
    Ok(())
}

/// A probability vector: nonnegative, summing to one within [`MASS_TOL`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVec(Vec<f64>);

impl ProbVec {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        check_mass(&mass, "probability vector")?;
        Ok(ProbVec(mass))
    }

    /// Like [`ProbVec::new`] but additionally rejects zero entries.
    pub fn strictly_positive(mass: Vec<f64>) -> Result<Self> {
        let p = Self::new(mass)?;
        if let Some(i) = p.0.iter().position(|&v| v <= 0.0) {
            return Err(invalid(format!("probability vector: entry {i} is not strictly positive")));
        }
        Ok(p)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("uniform distribution over an empty alphabet"));
        }
        Ok(ProbVec(vec![1.0 / n as f64; n]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn entropy(&self, base: LogBase) -> f64 {
        base.from_nats(entropy_nats(&self.0))
    }
}

impl TryFrom<Vec<f64>> for ProbVec {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbVec::new(v)
    }
}

impl From<ProbVec> for Vec<f64> {
    fn from(p: ProbVec) -> Self {
        p.0
    }
}

impl std::ops::Index<usize> for ProbVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Serde helpers storing a matrix as a list of rows.
pub mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if nr == 0 || nc == 0 {
            return Err("matrix is empty".into());
        }
        if let Some(r) = rows.iter().position(|r| r.len() != nc) {
            return Err(format!("row {r} has {} entries, expected {nc}", rows[r].len()));
        }
        Ok(DMatrix::from_fn(nr, nc, |r, c| rows[r][c]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// A channel stored column-wise: `m[(out, in)]`, every column a distribution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Kernel {
    #[serde(with = "matrix_rows")]
    m: DMatrix<f64>,
}

impl Kernel {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        for c in 0..m.ncols() {
            let col: Vec<f64> = m.column(c).iter().copied().collect();
            check_mass(&col, &format!("kernel column {c}"))?;
        }
        if m.ncols() == 0 {
            return Err(invalid("kernel has no columns"));
        }
        Ok(Kernel { m })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn n_in(&self) -> usize {
        self.m.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.m.nrows()
    }

    /// Output distribution for input symbol `i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.m.column(i).iter().copied().collect()
    }

    /// Push a distribution on the input alphabet through the channel.
    pub fn apply(&self, p: &ProbVec) -> Result<Vec<f64>> {
        if p.len() != self.n_in() {
            return Err(invalid(format!("kernel expects {} inputs, got {}", self.n_in(), p.len())));
        }
        Ok((0..self.n_out()).map(|o| (0..self.n_in()).map(|i| self.m[(o, i)] * p[i]).sum()).collect())
    }

    /// The cascade `self` followed by `next`.
    pub fn then(&self, next: &Kernel) -> Result<Kernel> {
        if next.n_in() != self.n_out() {
            return Err(invalid("kernel composition: alphabet mismatch"));
        }
        Ok(Kernel { m: &next.m * &self.m })
    }
}

/// A joint pmf on `X x Y` with strictly positive marginals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointDist {
    #[serde(with = "matrix_rows")]
    p: DMatrix<f64>,
    x_labels: Vec<String>,
    y_labels: Vec<String>,
}

fn default_labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl JointDist {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        let data: Vec<f64> = p.iter().copied().collect();
        check_mass(&data, "joint distribution")?;
        for r in 0..p.nrows() {
            if p.row(r).sum() <= 0.0 {
                return Err(invalid(format!("marginal of X vanishes at row {r}")));
            }
        }
        for c in 0..p.ncols() {
            if p.column(c).sum() <= 0.0 {
                return Err(invalid(format!("marginal of Y vanishes at column {c}")));
            }
        }
        let (nx, ny) = p.shape();
        Ok(JointDist { p, x_labels: default_labels("x", nx), y_labels: default_labels("y", ny) })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_rows::from_rows(rows).map_err(invalid)?)
    }

    /// Build `P_XY(x, y) = P_X(x) P_{Y|X}(y|x)` from a channel with `|Y|` rows and `|X|` columns.
    pub fn from_channel(px: &ProbVec, p_y_given_x: &Kernel) -> Result<Self> {
        if p_y_given_x.n_in() != px.len() {
            return Err(invalid("channel input alphabet does not match P_X"));
        }
        let m = p_y_given_x.matrix();
        Self::new(DMatrix::from_fn(px.len(), m.nrows(), |x, y| px[x] * m[(y, x)]))
    }

    pub fn with_labels(mut self, x_labels: Vec<String>, y_labels: Vec<String>) -> Result<Self> {
        if x_labels.len() != self.nx() || y_labels.len() != self.ny() {
            return Err(invalid("label count does not match the matrix shape"));
        }
        self.x_labels = x_labels;
        self.y_labels = y_labels;
        Ok(self)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn nx(&self) -> usize {
        self.p.nrows()
    }

    pub fn ny(&self) -> usize {
        self.p.ncols()
    }

    pub fn x_labels(&self) -> &[String] {
        &self.x_labels
    }

    pub fn y_labels(&self) -> &[String] {
        &self.y_labels
    }

    pub fn px(&self) -> Vec<f64> {
        (0..self.nx()).map(|r| self.p.row(r).sum()).collect()
    }

    pub fn py(&self) -> Vec<f64> {
        (0..self.ny()).map(|c| self.p.column(c).sum()).collect()
    }

    /// `P_{Y|X}` as a `|Y| x |X|` kernel.
    pub fn p_y_given_x(&self) -> Kernel {
        let px = self.px();
        Kernel { m: DMatrix::from_fn(self.ny(), self.nx(), |y, x| self.p[(x, y)] / px[x]) }
    }

    /// `P_{X|Y}` as a `|X| x |Y|` kernel (the leakage matrix).
    pub fn p_x_given_y(&self) -> Kernel {
        let py = self.py();
        Kernel { m: DMatrix::from_fn(self.nx(), self.ny(), |x, y| self.p[(x, y)] / py[y]) }
    }

    /// The same joint with the roles of X and Y exchanged.
    pub fn transposed(&self) -> JointDist {
        JointDist { p: self.p.transpose(), x_labels: self.y_labels.clone(), y_labels: self.x_labels.clone() }
    }

    pub fn h_x(&self) -> f64 {
        entropy_nats(&self.px())
    }

    pub fn h_y(&self) -> f64 {
        entropy_nats(&self.py())
    }

    pub fn h_xy(&self) -> f64 {
        entropy_nats(self.p.as_slice())
    }

    /// `H(Y|X=x)` in nats for every `x`.
    pub fn h_y_given_each_x(&self) -> Vec<f64> {
        let px = self.px();
        (0..self.nx()).map(|x| entropy_nats(&self.p.row(x).iter().map(|v| v / px[x]).collect::<Vec<_>>())).collect()
    }

    /// `H(Y|X)` in nats, as `sum_x P_X(x) H(Y|X=x)`.
    pub fn h_y_given_x(&self) -> f64 {
        self.px().iter().zip(self.h_y_given_each_x()).map(|(p, h)| p * h).sum()
    }

    /// `H(X|Y)` in nats, as `sum_y P_Y(y) H(X|Y=y)`.
    pub fn h_x_given_y(&self) -> f64 {
        self.transposed().h_y_given_x()
    }

    /// `I(X;Y) = H(Y) - H(Y|X)` in nats.
    pub fn mutual_information(&self) -> f64 {
        self.h_y() - self.h_y_given_x()
    }

    pub fn to_tensor(&self) -> JointTensor {
        let (nx, ny) = self.p.shape();
        let data = (0..nx).flat_map(|x| (0..ny).map(move |y| (x, y))).map(|(x, y)| self.p[(x, y)]);
        JointTensor { dims: vec![nx, ny], data: data.collect() }
    }
}

/// A joint pmf over several finite axes, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl JointTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || n != data.len() {
            return Err(invalid(format!("tensor shape {dims:?} does not match {} entries", data.len())));
        }
        check_mass(&data, "joint tensor")?;
        Ok(JointTensor { dims, data })
    }

    /// Skip validation; used for tensors assembled from already validated parts.
    pub(crate) fn from_raw(dims: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        JointTensor { dims, data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    /// Marginal on `axes`, which must be strictly increasing.
    pub fn marginal(&self, axes: &[usize]) -> Result<JointTensor> {
        if axes.windows(2).any(|w| w[0] >= w[1]) || axes.iter().any(|&a| a >= self.dims.len()) {
            return Err(invalid(format!("bad axis list {axes:?}")));
        }
        if axes.is_empty() {
            return Ok(JointTensor { dims: vec![1], data: vec![self.data.iter().sum()] });
        }
        let strides = self.strides();
        let out_dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        let mut out_strides = vec![1; axes.len()];
        for i in (0..axes.len() - 1).rev() {
            out_strides[i] = out_strides[i + 1] * out_dims[i + 1];
        }
        let mut out = vec![0.0; out_dims.iter().product()];
        for (flat, &v) in self.data.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let mut idx = 0;
            for (k, &a) in axes.iter().enumerate() {
                idx += (flat / strides[a]) % self.dims[a] * out_strides[k];
            }
            out[idx] += v;
        }
        Ok(JointTensor { dims: out_dims, data: out })
    }

    /// Entropy in nats of the marginal on `axes`.
    pub fn entropy(&self, axes: &[usize]) -> Result<f64> {
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() == self.dims.len() {
            return Ok(entropy_nats(&self.data));
        }
        Ok(entropy_nats(&self.marginal(&sorted)?.data))
    }

    /// `H(A | B)` in nats.
    pub fn cond_entropy(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        Ok(self.entropy(&union(a, b))? - self.entropy(b)?)
    }

    /// `I(A; B)` in nats.
    pub fn mutual_information(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        Ok(self.entropy(a)? + self.entropy(b)? - self.entropy(&union(a, b))?)
    }

    /// `I(A; B | C)` in nats.
    pub fn cond_mutual_information(&self, a: &[usize], b: &[usize], c: &[usize]) -> Result<f64> {
        let ac = union(a, c);
        let bc = union(b, c);
        let abc = union(&ac, b);
        Ok(self.entropy(&ac)? + self.entropy(&bc)? - self.entropy(&abc)? - self.entropy(c)?)
    }

    /// Two-axis marginal as a matrix with rows indexed by `a`.
    pub fn pair_matrix(&self, a: usize, b: usize) -> Result<DMatrix<f64>> {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let m = self.marginal(&[lo, hi])?;
        let mat = DMatrix::from_row_slice(m.dims[0], m.dims[1], &m.data);
        Ok(if a < b { mat } else { mat.transpose() })
    }
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Entropies and mutual information of a joint, in one base.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropySuite {
    pub base: LogBase,
    pub h_x: f64,
    pub h_y: f64,
    pub h_xy: f64,
    pub h_x_given_y: f64,
    pub h_y_given_x: f64,
    pub mutual_information: f64,
    pub h_y_given_each_x: Vec<f64>,
}

pub fn entropy_suite(j: &JointDist, base: LogBase) -> EntropySuite {
    let c = |v: f64| base.from_nats(v);
    EntropySuite {
        base,
        h_x: c(j.h_x()),
        h_y: c(j.h_y()),
        h_xy: c(j.h_xy()),
        h_x_given_y: c(j.h_x_given_y()),
        h_y_given_x: c(j.h_y_given_x()),
        mutual_information: c(j.mutual_information()),
        h_y_given_each_x: j.h_y_given_each_x().into_iter().map(c).collect(),
    }
}

/// `KL(p || q)` in nats.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(invalid("divergence of vectors with different lengths"));
    }
    let mut acc = 0.0;
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::SupportViolation { index: i, p: a });
            }
            acc += a * (a / b).ln();
        }
    }
    Ok(acc)
}

/// Unhalved l1 distance `sum |p - q|`.
pub fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Divergences {
    pub kl: f64,
    pub l1: f64,
}

pub fn divergences(p: &ProbVec, q: &ProbVec, base: LogBase) -> Result<Divergences> {
    let kl = kl_divergence(p.as_slice(), q.as_slice())?;
    Ok(Divergences { kl: base.from_nats(kl), l1: l1_distance(p.as_slice(), q.as_slice()) })
}

/// Leakage of a release `U` about `X`, measured three ways.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionLeakages {
    pub base: LogBase,
    pub mutual_information: f64,
    /// `d(P_{X,U}(., u), P_X P_U(u))` per `u`.
    pub weighted: Vec<f64>,
    /// `d(P_{X|U}(.|u), P_X)` per `u`; zero for atoms of `U` without mass.
    pub unweighted: Vec<f64>,
}

impl CriterionLeakages {
    pub fn max_weighted(&self) -> f64 {
        self.weighted.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_unweighted(&self) -> f64 {
        self.unweighted.iter().copied().fold(0.0, f64::max)
    }
}

/// Leakages from a joint matrix on `X x U` (rows `x`, columns `u`).
pub fn criterion_leakages(joint_xu: &DMatrix<f64>, base: LogBase) -> Result<CriterionLeakages> {
    check_mass(joint_xu.as_slice(), "joint of (X, U)")?;
    let (nx, nu) = joint_xu.shape();
    let px: Vec<f64> = (0..nx).map(|x| joint_xu.row(x).sum()).collect();
    let pu: Vec<f64> = (0..nu).map(|u| joint_xu.column(u).sum()).collect();
    let mut weighted = Vec::with_capacity(nu);
    let mut unweighted = Vec::with_capacity(nu);
    for u in 0..nu {
        let w: f64 = (0..nx).map(|x| (joint_xu[(x, u)] - px[x] * pu[u]).abs()).sum();
        weighted.push(w);
        unweighted.push(if pu[u] > 0.0 { w / pu[u] } else { 0.0 });
    }
    let mi = entropy_nats(&px) + entropy_nats(&pu) - entropy_nats(joint_xu.as_slice());
    Ok(CriterionLeakages { base, mutual_information: base.from_nats(mi), weighted, unweighted })
}

/// Standard example channels with a uniform binary input.
pub mod families {
    use super::*;

    /// Binary symmetric channel with crossover `theta`.
    pub fn bsc(theta: f64) -> Result<JointDist> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(invalid(format!("crossover probability {theta} outside [0, 1]")));
        }
        let a = 0.5 * (1.0 - theta);
        let b = 0.5 * theta;
        JointDist::from_rows(&[vec![a, b], vec![b, a]])?
            .with_labels(vec!["0".into(), "1".into()], vec!["0".into(), "1".into()])
    }

    /// Binary erasure channel; outputs ordered `0, 1, e`.
    pub fn erasure(theta: f64) -> Result<JointDist> {
        if !(0.0 < theta && theta < 1.0) {
            return Err(invalid(format!("erasure probability {theta} outside (0, 1)")));
        }
        let a = 0.5 * (1.0 - theta);
        let e = 0.5 * theta;
        JointDist::from_rows(&[vec![a, 0.0, e], vec![0.0, a, e]])?
            .with_labels(vec!["0".into(), "1".into()], vec!["0".into(), "1".into(), "e".into()])
    }
}

//! Instance files.
//!
//! JSON instances carry exactly one of
//!
//! * `joint`: rows indexed by `x`, columns by `y`;
//! * `p_x` and `channel`: `channel[x][y] = P(y|x)`;
//! * `joint3`: nested `[x1][x2][y]` masses for a prioritized instance;
//!
//! plus optional `name`, `base`, `x_labels`, `y_labels` (and `x1_labels`,
//! `x2_labels` for `joint3`).
//!
//! CSV instances use the header to pick the layout:
//!
//! ```text
//! # name: example
//! # base: bits
//! x,y0,y1,y2          joint matrix, one row per x
//! x,p_x,y0,y1,y2      P_X followed by the row P(.|x)
//! x1,x2,y,p           long-format prioritized tensor
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use privacy_funnel::bounds::PrioritizedJoint;
use privacy_funnel::probcore::{families, MASS_TOL};
use privacy_funnel::{JointDist, LogBase};
use serde::{Deserialize, Serialize};

use crate::{validation, CliError, Result};

/// Parametric families available without an instance file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Bsc,
    Erasure,
}

impl FromStr for Family {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bsc" => Ok(Family::Bsc),
            "erasure" => Ok(Family::Erasure),
            _ => Err(validation(format!("unknown family '{s}', expected bsc or erasure"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Bsc => "bsc",
            Family::Erasure => "erasure",
        })
    }
}

#[derive(Clone, Debug)]
pub enum Data {
    Joint(JointDist),
    Prioritized { joint: PrioritizedJoint, labels: [Vec<String>; 3] },
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub base: Option<LogBase>,
    pub data: Data,
}

#[derive(Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base: Option<LogBase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_labels: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y_labels: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x1_labels: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x2_labels: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    joint: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    channel: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    joint3: Option<Vec<Vec<Vec<f64>>>>,
}

fn default_labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn check_labels(labels: Option<Vec<String>>, n: usize, what: &str, prefix: &str) -> Result<Vec<String>> {
    match labels {
        None => Ok(default_labels(prefix, n)),
        Some(l) if l.len() == n => Ok(l),
        Some(l) => Err(validation(format!("{what}: {} labels for {n} entries", l.len()))),
    }
}

/// Shape and entry checks shared by every matrix layout.
fn check_rows(rows: &[Vec<f64>], what: &str, x_labels: &[String]) -> Result<()> {
    let Some(first) = rows.first() else {
        return Err(validation(format!("{what} has no rows")));
    };
    if first.is_empty() {
        return Err(validation(format!("{what}: row 0 is empty")));
    }
    for (r, row) in rows.iter().enumerate() {
        let label = x_labels.get(r).map_or("?", String::as_str);
        if row.len() != first.len() {
            return Err(validation(format!(
                "{what}: row {r} (x = {label}) has {} entries, expected {}",
                row.len(),
                first.len()
            )));
        }
        if let Some((c, v)) = row.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(validation(format!("{what}: row {r} (x = {label}), column {c} holds {v}")));
        }
    }
    Ok(())
}

fn build_joint(rows: Vec<Vec<f64>>, x_labels: Option<Vec<String>>, y_labels: Option<Vec<String>>) -> Result<JointDist> {
    let xl = check_labels(x_labels, rows.len(), "x_labels", "x")?;
    check_rows(&rows, "joint", &xl)?;
    let yl = check_labels(y_labels, rows[0].len(), "y_labels", "y")?;
    let total: f64 = rows.iter().flatten().sum();
    if (total - 1.0).abs() > MASS_TOL {
        let sums: Vec<String> = rows
            .iter()
            .zip(&xl)
            .enumerate()
            .map(|(r, (row, l))| format!("row {r} (x = {l}) = {}", row.iter().sum::<f64>()))
            .collect();
        return Err(validation(format!("joint entries sum to {total}, expected 1; row sums: {}", sums.join(", "))));
    }
    Ok(JointDist::from_rows(&rows)?.with_labels(xl, yl)?)
}

fn build_channel(
    p_x: Vec<f64>,
    channel: Vec<Vec<f64>>,
    x_labels: Option<Vec<String>>,
    y_labels: Option<Vec<String>>,
) -> Result<JointDist> {
    let xl = check_labels(x_labels, channel.len(), "x_labels", "x")?;
    check_rows(&channel, "channel", &xl)?;
    if p_x.len() != channel.len() {
        return Err(validation(format!("p_x has {} entries but the channel has {} rows", p_x.len(), channel.len())));
    }
    if let Some((i, v)) = p_x.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(validation(format!("p_x: entry {i} holds {v}")));
    }
    let total: f64 = p_x.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(validation(format!("p_x sums to {total}, expected 1")));
    }
    for (r, row) in channel.iter().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > MASS_TOL {
            return Err(validation(format!("channel row {r} (x = {}) sums to {s}, expected 1", xl[r])));
        }
    }
    let yl = check_labels(y_labels, channel[0].len(), "y_labels", "y")?;
    let rows: Vec<Vec<f64>> = channel.iter().zip(&p_x).map(|(row, &p)| row.iter().map(|&c| p * c).collect()).collect();
    Ok(JointDist::from_rows(&rows)?.with_labels(xl, yl)?)
}

fn build_prioritized(nested: Vec<Vec<Vec<f64>>>, labels: [Option<Vec<String>>; 3]) -> Result<Data> {
    let n1 = nested.len();
    let n2 = nested.first().map_or(0, Vec::len);
    let ny = nested.first().and_then(|b| b.first()).map_or(0, Vec::len);
    if n1 == 0 || n2 == 0 || ny == 0 {
        return Err(validation("joint3 needs nonempty [x1][x2][y] axes"));
    }
    for (a, block) in nested.iter().enumerate() {
        let names: Vec<String> = (0..block.len()).map(|b| format!("({a}, {b})")).collect();
        check_rows(block, &format!("joint3 block x1 = {a}"), &names)?;
        if block.len() != n2 || block[0].len() != ny {
            return Err(validation(format!("joint3 block x1 = {a} is not {n2} x {ny}")));
        }
    }
    let total: f64 = nested.iter().flatten().flatten().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(validation(format!("joint3 entries sum to {total}, expected 1")));
    }
    let [l1, l2, ly] = labels;
    let labels = [
        check_labels(l1, n1, "x1_labels", "a")?,
        check_labels(l2, n2, "x2_labels", "b")?,
        check_labels(ly, ny, "y_labels", "y")?,
    ];
    Ok(Data::Prioritized { joint: PrioritizedJoint::from_nested(&nested)?, labels })
}

impl Instance {
    pub fn family(family: Family, theta: f64) -> Result<Self> {
        let j = match family {
            Family::Bsc => families::bsc(theta)?,
            Family::Erasure => families::erasure(theta)?,
        };
        Ok(Instance { name: format!("{family}(theta={theta})"), base: None, data: Data::Joint(j) })
    }

    /// Reads a `.json` or `.csv` file; the extension picks the parser.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("instance").to_string();
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let parsed = if is_csv { Self::parse_csv(&text, &stem) } else { Self::parse_json(&text, &stem) };
        parsed.map_err(|e| match e {
            CliError::Validation(m) => validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse_json(text: &str, default_name: &str) -> Result<Self> {
        let raw: RawInstance =
            serde_json::from_str(text).map_err(|e| validation(format!("malformed instance: {e}")))?;
        let name = raw.name.unwrap_or_else(|| default_name.to_string());
        let data = match (raw.joint, raw.p_x, raw.channel, raw.joint3) {
            (Some(rows), None, None, None) => Data::Joint(build_joint(rows, raw.x_labels, raw.y_labels)?),
            (None, Some(p_x), Some(ch), None) => Data::Joint(build_channel(p_x, ch, raw.x_labels, raw.y_labels)?),
            (None, None, None, Some(t)) => {
                if raw.x_labels.is_some() {
                    return Err(validation("joint3 instances take x1_labels and x2_labels, not x_labels"));
                }
                build_prioritized(t, [raw.x1_labels, raw.x2_labels, raw.y_labels])?
            }
            _ => return Err(validation("instance needs exactly one of: joint, p_x with channel, joint3")),
        };
        Ok(Instance { name, base: raw.base, data })
    }

    pub fn parse_csv(text: &str, default_name: &str) -> Result<Self> {
        let mut name = default_name.to_string();
        let mut base = None;
        for line in text.lines().map(str::trim).filter(|l| l.starts_with('#')) {
            if let Some((k, v)) = line.trim_start_matches('#').split_once(':') {
                match k.trim() {
                    "name" => name = v.trim().to_string(),
                    "base" => base = Some(v.trim().parse::<LogBase>()?),
                    _ => {}
                }
            }
        }
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
        let num = |rec: &csv::StringRecord, r: usize, c: usize| -> Result<f64> {
            let cell = rec.get(c).ok_or_else(|| validation(format!("row {r}: missing column {c}")))?;
            cell.parse::<f64>().map_err(|_| {
                validation(format!(
                    "row {r}, column '{}': cannot parse '{cell}'",
                    header.get(c).map_or("?", String::as_str)
                ))
            })
        };
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        let data = match h.as_slice() {
            ["x1", "x2", "y", "p"] => {
                let mut axes: [Vec<String>; 3] = Default::default();
                let mut entries = Vec::with_capacity(records.len());
                for (r, rec) in records.iter().enumerate() {
                    let mut idx = [0usize; 3];
                    for a in 0..3 {
                        let label = rec.get(a).unwrap_or("").to_string();
                        idx[a] = match axes[a].iter().position(|l| *l == label) {
                            Some(i) => i,
                            None => {
                                axes[a].push(label);
                                axes[a].len() - 1
                            }
                        };
                    }
                    entries.push((idx, num(rec, r, 3)?));
                }
                let mut nested = vec![vec![vec![0.0; axes[2].len()]; axes[1].len()]; axes[0].len()];
                for ([a, b, y], p) in entries {
                    nested[a][b][y] += p;
                }
                let [l1, l2, ly] = axes;
                build_prioritized(nested, [Some(l1), Some(l2), Some(ly)])?
            }
            ["x", "p_x", ys @ ..] if !ys.is_empty() => {
                let (mut xl, mut px, mut rows) = (Vec::new(), Vec::new(), Vec::new());
                for (r, rec) in records.iter().enumerate() {
                    xl.push(rec.get(0).unwrap_or("").to_string());
                    px.push(num(rec, r, 1)?);
                    rows.push((2..header.len()).map(|c| num(rec, r, c)).collect::<Result<Vec<_>>>()?);
                }
                let yl = ys.iter().map(|s| s.to_string()).collect();
                Data::Joint(build_channel(px, rows, Some(xl), Some(yl))?)
            }
            ["x", ys @ ..] if !ys.is_empty() => {
                let (mut xl, mut rows) = (Vec::new(), Vec::new());
                for (r, rec) in records.iter().enumerate() {
                    xl.push(rec.get(0).unwrap_or("").to_string());
                    rows.push((1..header.len()).map(|c| num(rec, r, c)).collect::<Result<Vec<_>>>()?);
                }
                let yl = ys.iter().map(|s| s.to_string()).collect();
                Data::Joint(build_joint(rows, Some(xl), Some(yl))?)
            }
            _ => return Err(validation(format!("unrecognized CSV header '{}'", header.join(",")))),
        };
        Ok(Instance { name, base, data })
    }

    /// The joint of `(X, Y)`; a prioritized instance is flattened to `X = (X1, X2)`.
    pub fn joint(&self) -> Result<JointDist> {
        match &self.data {
            Data::Joint(j) => Ok(j.clone()),
            Data::Prioritized { joint, labels } => {
                let t = joint.tensor();
                let (n1, n2, ny) = (t.dims()[0], t.dims()[1], t.dims()[2]);
                let rows: Vec<Vec<f64>> = t.data().chunks(ny).map(<[f64]>::to_vec).collect();
                let xl = (0..n1 * n2).map(|i| format!("{}.{}", labels[0][i / n2], labels[1][i % n2])).collect();
                Ok(JointDist::from_rows(&rows)?.with_labels(xl, labels[2].clone())?)
            }
        }
    }

    pub fn prioritized(&self) -> Option<&PrioritizedJoint> {
        match &self.data {
            Data::Prioritized { joint, .. } => Some(joint),
            Data::Joint(_) => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut raw = RawInstance { name: Some(self.name.clone()), base: self.base, ..Default::default() };
        match &self.data {
            Data::Joint(j) => {
                raw.joint = Some(privacy_funnel::probcore::matrix_rows::to_rows(j.matrix()));
                raw.x_labels = Some(j.x_labels().to_vec());
                raw.y_labels = Some(j.y_labels().to_vec());
            }
            Data::Prioritized { joint, labels } => {
                let t = joint.tensor();
                let (n2, ny) = (t.dims()[1], t.dims()[2]);
                let nested = t.data().chunks(n2 * ny).map(|b| b.chunks(ny).map(<[f64]>::to_vec).collect()).collect();
                raw.joint3 = Some(nested);
                raw.x1_labels = Some(labels[0].clone());
                raw.x2_labels = Some(labels[1].clone());
                raw.y_labels = Some(labels[2].clone());
            }
        }
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!("# name: {}\n", self.name);
        if let Some(b) = self.base {
            out.push_str(&format!("# base: {b}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.data {
            Data::Joint(j) => {
                let mut header = vec!["x".to_string()];
                header.extend(j.y_labels().iter().cloned());
                w.write_record(&header)?;
                for x in 0..j.nx() {
                    let mut row = vec![j.x_labels()[x].clone()];
                    row.extend((0..j.ny()).map(|y| crate::fmt_f64(j.matrix()[(x, y)])));
                    w.write_record(&row)?;
                }
            }
            Data::Prioritized { joint, labels } => {
                w.write_record(["x1", "x2", "y", "p"])?;
                let t = joint.tensor();
                let (n1, n2, ny) = (t.dims()[0], t.dims()[1], t.dims()[2]);
                for a in 0..n1 {
                    for b in 0..n2 {
                        for y in 0..ny {
                            let p = crate::fmt_f64(t.data()[(a * n2 + b) * ny + y]);
                            w.write_record([&labels[0][a], &labels[1][b], &labels[2][y], &p])?;
                        }
                    }
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| validation(format!("csv export: {e}")))?;
        out.push_str(&String::from_utf8_lossy(&bytes));
        Ok(out)
    }

    /// Writes the instance; `.csv` selects CSV, anything else JSON.
    pub fn export(&self, path: &Path) -> Result<()> {
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let text = if is_csv { self.to_csv()? } else { self.to_json()? };
        std::fs::write(path, text).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
    }
}

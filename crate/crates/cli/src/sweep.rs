//! Parameter sweeps emitting long-format CSV `(x, series, value, valid)`.
//!
//! Rows are flushed as soon as they are computed, so a sweep that fails
//! half-way leaves every finished row on disk.

use std::io::Write;
use std::str::FromStr;

use privacy_funnel::bounds::{h0_report, h_bounds_mi, perletter_closed_bounds, BoundsReport};
use privacy_funnel::geometry::{build_context, GeometryContext};
use privacy_funnel::lpapprox::{solve_g0, solve_in_context, ApproxResult, LpOptions, Problem};
use privacy_funnel::{Error, JointDist, LogBase};
use serde::Serialize;

use crate::instance::{Family, Instance};
use crate::{fmt_f64, validation, CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVar {
    Eps,
    Theta,
}

impl FromStr for SweepVar {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eps" => Ok(SweepVar::Eps),
            "theta" => Ok(SweepVar::Theta),
            _ => Err(validation(format!("unknown sweep variable '{s}', expected eps or theta"))),
        }
    }
}

/// `lo:hi:steps` with `lo < hi` and `steps >= 2`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl FromStr for Range {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || validation(format!("range '{s}' is not lo:hi:steps"));
        let [lo, hi, steps] = parts.as_slice() else {
            return Err(bad());
        };
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let steps: usize = steps.trim().parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(validation(format!("range needs lo < hi, got {lo} and {hi}")));
        }
        if steps < 2 {
            return Err(validation(format!("range needs at least 2 steps, got {steps}")));
        }
        Ok(Range { lo, hi, steps })
    }
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        let n = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.hi } else { self.lo + (self.hi - self.lo) * i as f64 / n })
            .collect()
    }
}

const H0_IDS: [&str; 6] = ["l01", "l02", "u01", "u02", "psi_lower", "h0_exact"];
const MI_IDS: [&str; 4] = ["l1", "l2", "l3", "upper"];
const PL_IDS: [&str; 4] = ["l_hwl1", "l_hwl2", "u_gwl", "u_hl"];
const LP_SUFFIXES: [&str; 5] = ["", "_approx", "_upper", "_upper_coarse", "_upper_fine"];

/// Every accepted series name.
pub fn known_series() -> Vec<String> {
    let mut v: Vec<String> = H0_IDS.iter().chain(&MI_IDS).chain(&PL_IDS).map(|s| s.to_string()).collect();
    v.push("g0".into());
    for p in ["gwl", "gl"] {
        v.extend(LP_SUFFIXES.iter().map(|s| format!("{p}{s}")));
    }
    v
}

pub fn parse_series(s: &str) -> Result<Vec<String>> {
    let known = known_series();
    let list: Vec<String> = s.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect();
    if list.is_empty() {
        return Err(validation("--series is empty"));
    }
    if let Some(bad) = list.iter().find(|t| !known.contains(t)) {
        return Err(validation(format!("unknown series '{bad}'; known: {}", known.join(", "))));
    }
    Ok(list)
}

/// Where each sweep point draws its joint from.
pub enum Source {
    Fixed(Instance),
    Family(Family),
}

pub struct SweepSpec {
    pub var: SweepVar,
    pub range: Range,
    pub series: Vec<String>,
    /// Budget used when sweeping `theta`.
    pub eps: f64,
    /// `theta` used when sweeping `eps` over a family.
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub x: f64,
    pub series: String,
    pub value: Option<f64>,
    pub valid: bool,
}

/// Lazily computed reports for one `(joint, eps)` pair.
struct Point<'a> {
    j: &'a JointDist,
    ctx: Option<&'a GeometryContext>,
    eps: f64,
    base: LogBase,
    opts: &'a LpOptions,
    h0: Option<BoundsReport>,
    mi: Option<Option<BoundsReport>>,
    pl: Option<Option<BoundsReport>>,
    g0: Option<Option<ApproxResult>>,
    wl: Option<Option<ApproxResult>>,
    l: Option<Option<ApproxResult>>,
}

fn skippable<T>(r: privacy_funnel::Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Precondition(_) | Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

impl<'a> Point<'a> {
    fn g0(&mut self) -> Result<Option<&ApproxResult>> {
        if self.g0.is_none() {
            self.g0 = Some(skippable(solve_g0(self.j, self.base))?);
        }
        Ok(self.g0.as_ref().and_then(Option::as_ref))
    }

    fn lp(&mut self, problem: Problem) -> Result<Option<&ApproxResult>> {
        let slot = if problem == Problem::Wl { &self.wl } else { &self.l };
        if slot.is_none() {
            let r = match self.ctx {
                Some(ctx) => skippable(solve_in_context(self.j, ctx, self.eps, problem, self.base, self.opts))?,
                None => None,
            };
            if problem == Problem::Wl {
                self.wl = Some(r);
            } else {
                self.l = Some(r);
            }
        }
        let slot = if problem == Problem::Wl { &self.wl } else { &self.l };
        Ok(slot.as_ref().and_then(Option::as_ref))
    }

    fn bound(&mut self, id: &str) -> Result<(Option<f64>, bool)> {
        let report = if H0_IDS.contains(&id) {
            if self.h0.is_none() {
                self.h0 = Some(h0_report(self.j, self.base));
            }
            self.h0.as_ref()
        } else if MI_IDS.contains(&id) {
            if self.mi.is_none() {
                let g0 = self.g0()?.map_or(0.0, |r| r.utility_lb);
                self.mi = Some(skippable(h_bounds_mi(self.j, self.eps, g0, self.base))?);
            }
            self.mi.as_ref().and_then(Option::as_ref)
        } else {
            if self.pl.is_none() {
                self.pl = Some(skippable(perletter_closed_bounds(self.j, self.eps, self.base))?);
            }
            self.pl.as_ref().and_then(Option::as_ref)
        };
        Ok(match report.and_then(|r| r.get(id)) {
            Some(e) => (Some(e.value), e.valid),
            None => (None, false),
        })
    }

    fn eval(&mut self, series: &str) -> Result<(Option<f64>, bool)> {
        if series == "g0" {
            return Ok(match self.g0()? {
                Some(r) => (Some(r.utility_lb), r.certificate.holds),
                None => (None, false),
            });
        }
        for (prefix, problem) in [("gwl", Problem::Wl), ("gl", Problem::L)] {
            if let Some(suffix) = series.strip_prefix(prefix).filter(|s| LP_SUFFIXES.contains(s)) {
                let Some(r) = self.lp(problem)? else {
                    return Ok((None, false));
                };
                let v = match suffix {
                    "" => Some(r.utility_lb),
                    "_approx" => Some(r.approx),
                    "_upper" => r.upper_bounds.best(),
                    "_upper_coarse" => r.upper_bounds.coarse,
                    _ => r.upper_bounds.fine,
                };
                return Ok((v, v.is_some() && r.certificate.holds));
            }
        }
        self.bound(series)
    }
}

/// Runs the sweep, writing and flushing each row to `out` as it is produced.
pub fn run<W: Write>(
    source: &Source,
    spec: &SweepSpec,
    base: LogBase,
    opts: &LpOptions,
    out: W,
) -> Result<Vec<SweepPoint>> {
    if spec.var == SweepVar::Theta && !matches!(source, Source::Family(_)) {
        return Err(validation("sweeping theta needs --family"));
    }
    let needs_lp = spec.series.iter().any(|s| s.starts_with("gl") || s.starts_with("gwl"));
    let fixed = match (source, spec.var) {
        (Source::Fixed(inst), _) => Some(inst.joint()?),
        (Source::Family(f), SweepVar::Eps) => {
            let theta = spec.theta.ok_or_else(|| validation("sweeping eps over a family needs --theta"))?;
            Some(Instance::family(*f, theta)?.joint()?)
        }
        (Source::Family(_), SweepVar::Theta) => None,
    };
    let fixed_ctx = match &fixed {
        Some(j) if needs_lp => skippable(build_context(j))?,
        _ => None,
    };

    let mut w = csv::Writer::from_writer(out);
    let io = |e: std::io::Error| CliError::Io { path: "sweep output".into(), source: e };
    w.write_record(["x", "series", "value", "valid"])?;
    w.flush().map_err(io)?;
    let mut rows = Vec::new();
    for x in spec.range.points() {
        let (j, eps) = match (&fixed, source) {
            (Some(j), _) => (j.clone(), x),
            (None, Source::Family(f)) => (Instance::family(*f, x)?.joint()?, spec.eps),
            (None, Source::Fixed(_)) => unreachable!("fixed sources always have a joint"),
        };
        let own_ctx = if fixed.is_none() && needs_lp { skippable(build_context(&j))? } else { None };
        let ctx = fixed_ctx.as_ref().or(own_ctx.as_ref());
        let mut p = Point { j: &j, ctx, eps, base, opts, h0: None, mi: None, pl: None, g0: None, wl: None, l: None };
        for s in &spec.series {
            let (value, valid) = p.eval(s)?;
            w.write_record([fmt_f64(x), s.clone(), value.map(fmt_f64).unwrap_or_default(), valid.to_string()])?;
            w.flush().map_err(io)?;
            rows.push(SweepPoint { x, series: s.clone(), value, valid });
        }
    }
    Ok(rows)
}

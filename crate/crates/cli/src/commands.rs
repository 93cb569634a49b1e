//! One function per subcommand; each returns an [`Output`].

use privacy_funnel::bounds::{
    efi_lower, equality_detector, h0_report, h_bounds_mi, perletter_closed_bounds, positivity_condition,
    prioritized_bounds, BoundsReport,
};
use privacy_funnel::geometry::{build_context, error_bounds, GeometryContext};
use privacy_funnel::lpapprox::{solve_g0, solve_in_context, ApproxResult, LpOptions, Problem};
use privacy_funnel::mechanisms::{efrl, entropy_cap_check, esfrl_sample, frl, sfrl_sample, Mechanism, SamplingConfig};
use privacy_funnel::oracle::{
    brute_force_g, brute_force_h, instance_hash, optimizer_audits, Criterion, Fixture, GridSpec,
};
use privacy_funnel::probcore::entropy_suite;
use privacy_funnel::{Error, JointDist, Kernel, LogBase};
use serde_json::{json, Value};

use crate::instance::{Data, Instance};
use crate::{fmt_f64, validation, Output, Result, Table};

fn bounds_table(reports: &[&BoundsReport]) -> Table {
    let mut t = Table::new(&["bound_id", "eps", "value", "valid"]);
    for r in reports {
        for row in r.csv_rows() {
            t.push(vec![row.bound_id, fmt_f64(row.eps), fmt_f64(row.value), row.valid.to_string()]);
        }
    }
    t
}

/// Skippable failures become `{"skipped": reason}`; anything else propagates.
fn optional<T: serde::Serialize>(r: privacy_funnel::Result<T>) -> Result<(Option<T>, Value)> {
    match r {
        Ok(v) => {
            let j = serde_json::to_value(&v)?;
            Ok((Some(v), j))
        }
        Err(e @ (Error::Precondition(_) | Error::Infeasible(_))) => Ok((None, json!({ "skipped": e.to_string() }))),
        Err(e) => Err(e.into()),
    }
}

fn geometry_summary(ctx: &GeometryContext) -> Value {
    let eb = error_bounds(ctx, 0.0);
    json!({
        "eps2": ctx.eps2,
        "fine_limit": eb.fine_limit,
        "coarse_limit": eb.coarse_limit,
        "singular_values": ctx.singular_values,
        "lead": ctx.lead,
        "lead_permuted": ctx.lead_permuted,
        "feasible": ctx.feasible.iter().map(|d| d.omega.clone()).collect::<Vec<_>>(),
        "degenerate": ctx.degenerate.iter().map(|d| d.omega.clone()).collect::<Vec<_>>(),
    })
}

pub fn info(inst: &Instance, base: LogBase) -> Result<Output> {
    let j = inst.joint()?;
    let geometry = match build_context(&j) {
        Ok(ctx) => geometry_summary(&ctx),
        Err(e @ Error::Precondition(_)) => json!({ "skipped": e.to_string() }),
        Err(e) => return Err(e.into()),
    };
    let mut doc = json!({
        "name": inst.name,
        "base": base,
        "nx": j.nx(),
        "ny": j.ny(),
        "x_labels": j.x_labels(),
        "y_labels": j.y_labels(),
        "instance_hash": instance_hash(&j),
        "entropies": entropy_suite(&j, base),
        "efi_lower": efi_lower(&j, base),
        "geometry": geometry,
    });
    if let Data::Prioritized { joint, labels } = &inst.data {
        doc["prioritized"] = json!({ "dims": joint.tensor().dims(), "labels": labels });
    }
    let s = entropy_suite(&j, base);
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in [
        ("h_x", s.h_x),
        ("h_y", s.h_y),
        ("h_xy", s.h_xy),
        ("h_x_given_y", s.h_x_given_y),
        ("h_y_given_x", s.h_y_given_x),
        ("mutual_information", s.mutual_information),
    ] {
        t.push(vec![k.to_string(), fmt_f64(v)]);
    }
    Ok(Output { name: "info", json: doc, table: Some(t) })
}

/// `g0` when the LP applies, otherwise 0 (always a valid lower bound).
fn g0_or_zero(j: &JointDist, base: LogBase) -> Result<(f64, Option<String>)> {
    match solve_g0(j, base) {
        Ok(r) => Ok((r.utility_lb, None)),
        Err(e @ Error::Precondition(_)) => Ok((0.0, Some(format!("g0 taken as 0: {e}")))),
        Err(e) => Err(e.into()),
    }
}

pub fn bounds(inst: &Instance, eps: f64, base: LogBase) -> Result<Output> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(validation(format!("--eps must be a nonnegative number, got {eps}")));
    }
    let j = inst.joint()?;
    let h0 = h0_report(&j, base);
    let mut notes = Vec::new();
    let mut reports: Vec<BoundsReport> = vec![h0.clone()];
    let mut doc = json!({ "name": inst.name, "base": base, "eps": eps, "h0": h0 });

    if eps > 0.0 {
        let (g0, note) = g0_or_zero(&j, base)?;
        notes.extend(note);
        let (mi, v) = optional(h_bounds_mi(&j, eps, g0, base))?;
        doc["mi"] = v;
        reports.extend(mi);
        doc["positivity"] = optional(positivity_condition(&j, eps, base))?.1;
        doc["equality"] = optional(equality_detector(&j, eps, base))?.1;
    }
    let pl = perletter_closed_bounds(&j, eps, base)?;
    doc["per_letter"] = serde_json::to_value(&pl)?;
    reports.push(pl);
    if let Some(pj) = inst.prioritized() {
        let p = prioritized_bounds(pj, eps, base)?;
        doc["prioritized"] = serde_json::to_value(&p)?;
        reports.push(p);
    }
    doc["notes"] = json!(notes);
    let refs: Vec<&BoundsReport> = reports.iter().collect();
    Ok(Output { name: "bounds", json: doc, table: Some(bounds_table(&refs)) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MechanismKind {
    Frl,
    Efrl,
    Sfrl,
    Esfrl,
}

impl std::str::FromStr for MechanismKind {
    type Err = crate::CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frl" => Ok(MechanismKind::Frl),
            "efrl" => Ok(MechanismKind::Efrl),
            "sfrl" => Ok(MechanismKind::Sfrl),
            "esfrl" => Ok(MechanismKind::Esfrl),
            _ => Err(validation(format!("unknown mechanism '{s}', expected frl, efrl, sfrl or esfrl"))),
        }
    }
}

pub struct MechanismArgs {
    pub kind: MechanismKind,
    pub eps: f64,
    pub seed: Option<u64>,
    pub draws: usize,
    pub max_index: usize,
}

fn summary_table(rows: &[(&str, f64)]) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in rows {
        t.push(vec![k.to_string(), fmt_f64(*v)]);
    }
    t
}

pub fn mechanism(inst: &Instance, args: &MechanismArgs, base: LogBase) -> Result<Output> {
    let j = inst.joint()?;
    match args.kind {
        MechanismKind::Frl | MechanismKind::Efrl => {
            let rep = if args.kind == MechanismKind::Frl { frl(&j) } else { efrl(&j, args.eps, base)? };
            let m = Mechanism::from_rep(&j, &rep)?;
            let s = m.summary(base)?;
            let cap = entropy_cap_check(&j, &rep, args.eps, base);
            let t = summary_table(&[
                ("cardinality", rep.cardinality() as f64),
                ("i_uy", s.i_uy),
                ("i_ux", s.i_ux),
                ("i_xu_given_y", s.i_xu_given_y),
                ("h_y_given_xu", s.h_y_given_xu),
                ("h_u", s.h_u),
            ]);
            let doc = json!({
                "name": inst.name,
                "eps": args.eps,
                "representation": rep,
                "summary": s,
                "reproduction_error": m.reproduction_error(&j)?,
                "entropy_cap": cap,
            });
            Ok(Output { name: "mechanism", json: doc, table: Some(t) })
        }
        MechanismKind::Sfrl | MechanismKind::Esfrl => {
            let seed = args.seed.ok_or_else(|| validation("sampled mechanisms need --seed"))?;
            if args.draws == 0 {
                return Err(validation("--draws must be positive"));
            }
            let cfg = SamplingConfig { n_draws: args.draws, max_index: args.max_index, seed };
            let sm = if args.kind == MechanismKind::Sfrl {
                sfrl_sample(&j, cfg, base)?
            } else {
                esfrl_sample(&j, args.eps, cfg, base)?
            };
            let t = summary_table(&[
                ("cardinality", sm.mechanism.cardinality() as f64),
                ("i_uy", sm.summary.i_uy),
                ("i_ux", sm.summary.i_ux),
                ("i_xu_given_y", sm.summary.i_xu_given_y),
                ("h_y_given_xu", sm.summary.h_y_given_xu),
                ("truncation_mass", sm.truncation_mass),
                ("bound", sm.bound),
            ]);
            let doc = json!({ "name": inst.name, "eps": args.eps, "sampled": sm });
            Ok(Output { name: "mechanism", json: doc, table: Some(t) })
        }
    }
}

pub fn lp_row_table(r: &ApproxResult) -> Table {
    let mut t =
        Table::new(&["eps", "problem", "utility_lb", "approx", "upper_coarse", "upper_fine", "regime", "certified"]);
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    t.push(vec![
        fmt_f64(r.eps),
        r.problem.to_string(),
        fmt_f64(r.utility_lb),
        fmt_f64(r.approx),
        opt(r.upper_bounds.coarse),
        opt(r.upper_bounds.fine),
        serde_json::to_value(r.error_bound.regime)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        r.certificate.holds.to_string(),
    ]);
    t
}

pub fn lp(inst: &Instance, problem: Problem, eps: f64, base: LogBase, opts: &LpOptions) -> Result<Output> {
    let j = inst.joint()?;
    let (r, geometry) = if problem == Problem::G0 {
        let r = solve_g0(&j, base)?;
        let g = build_context(&j).ok().map(|c| geometry_summary(&c)).unwrap_or(Value::Null);
        (r, g)
    } else {
        let ctx = build_context(&j)?;
        (solve_in_context(&j, &ctx, eps, problem, base, opts)?, geometry_summary(&ctx))
    };
    let doc = json!({
        "name": inst.name,
        "problem": problem,
        "eps": eps,
        "eps2": geometry.get("eps2").cloned().unwrap_or(Value::Null),
        "regime": r.error_bound.regime,
        "geometry": geometry,
        "result": r,
    });
    Ok(Output { name: "lp", json: doc, table: Some(lp_row_table(&r)) })
}

pub struct OracleArgs {
    pub criterion: Criterion,
    pub eps: f64,
    pub resolution: f64,
    pub card: Option<usize>,
    pub joint_access: bool,
    pub max_evaluations: Option<u64>,
}

pub fn oracle(inst: &Instance, args: &OracleArgs, base: LogBase) -> Result<Output> {
    let j = inst.joint()?;
    let card = args.card.unwrap_or(j.ny());
    let mut grid = GridSpec::new(args.resolution, card);
    if let Some(m) = args.max_evaluations {
        grid.max_evaluations = m;
    }
    let (r, audit) = if args.joint_access {
        if args.criterion != Criterion::Mi {
            return Err(validation("--joint-access searches only support --criterion mi"));
        }
        let r = brute_force_h(&j, args.eps, grid, base)?;
        let a = optimizer_audits(&j, args.eps, &Kernel::new(r.kernel.clone())?, args.resolution, None, base)?;
        (r, Some(a))
    } else {
        (brute_force_g(&j, args.eps, args.criterion, grid, base)?, None)
    };
    let mut t = Table::new(&["criterion", "eps", "resolution", "max_card", "value", "slack", "evaluations"]);
    t.push(vec![
        serde_json::to_value(r.criterion)?.as_str().unwrap_or_default().to_string(),
        fmt_f64(r.eps),
        fmt_f64(r.grid.resolution),
        r.grid.max_card.to_string(),
        fmt_f64(r.value),
        fmt_f64(r.slack),
        r.evaluations.to_string(),
    ]);
    let doc = json!({
        "name": inst.name,
        "joint_access": args.joint_access,
        "result": r,
        "fixture": Fixture::from_result(&j, &r),
        "audit": audit,
    });
    Ok(Output { name: "oracle", json: doc, table: Some(t) })
}

/// Everything cheap about an instance in one document.
pub fn report(inst: &Instance, eps: f64, base: LogBase, opts: &LpOptions) -> Result<Output> {
    let j = inst.joint()?;
    let info = info(inst, base)?;
    let b = bounds(inst, eps, base)?;
    let g0 = optional(solve_g0(&j, base))?.1;
    let mut lp = json!({ "g0": g0 });
    if eps > 0.0 {
        match build_context(&j) {
            Ok(ctx) => {
                for p in [Problem::Wl, Problem::L] {
                    lp[p.to_string()] = optional(solve_in_context(&j, &ctx, eps, p, base, opts))?.1;
                }
            }
            Err(e @ Error::Precondition(_)) => lp["skipped"] = json!(e.to_string()),
            Err(e) => return Err(e.into()),
        }
    }
    let rep = frl(&j);
    let frl_summary = Mechanism::from_rep(&j, &rep)?.summary(base)?;
    let doc = json!({
        "name": inst.name,
        "base": base,
        "eps": eps,
        "info": info.json,
        "bounds": b.json,
        "lp": lp,
        "frl": { "cardinality": rep.cardinality(), "summary": frl_summary },
    });
    Ok(Output { name: "report", json: doc, table: b.table })
}

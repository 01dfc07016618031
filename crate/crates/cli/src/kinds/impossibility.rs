//! Exact feasibility of efficient, EPIC, budget-balanced, history-private
//! trade over a grid of switching-cost pairs.

use serde_json::json;

use ltg::mech::lp::{FeasibilityCertificate, Status};
use ltg::mech::{bilateral_preset, impossibility_lp, ms_embedding, verify_feasible, LpOptions, TransferKeys};
use ltg::scalar::Rational;

use super::{failed, RunError};
use crate::report::{Reduce, Report, Table};
use crate::scenario::ScenarioConfig;

fn strings(v: &[Rational]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

/// The certificate with its full constraint matrix, for outside checking.
pub fn certificate_json(cert: &FeasibilityCertificate) -> serde_json::Value {
    let rows: Vec<_> = cert
        .system
        .rows
        .iter()
        .map(|r| json!({ "label": r.label, "kind": r.kind.tag(), "coeffs": strings(&r.coeffs), "rhs": r.rhs.to_string() }))
        .collect();
    let (status, vector) = match &cert.status {
        Status::Feasible(x) => ("feasible", strings(x)),
        Status::Infeasible(y) => ("infeasible", strings(y)),
    };
    json!({
        "form": "coeffs . x <= rhs",
        "variables": cert.system.variables,
        "rows": rows,
        "status": status,
        "vector": vector,
    })
}

pub fn run(cfg: &ScenarioConfig, report: &mut Report) -> Result<(), RunError> {
    let grid = cfg.require(&cfg.grid, "grid")?.clone();
    let gamma = cfg.gamma_rational(8)?;
    let opts = LpOptions {
        participation: grid.participation,
        keys: if grid.state_flow { TransferKeys::StateFlow } else { TransferKeys::Initial },
    };
    report.param("gamma", &gamma);
    report.param("participation", opts.participation);
    report.param("state_flow", grid.state_flow);
    report.param("constraint_set", if opts.participation { "EPIC+BB+IR" } else { "EPIC+BB" });

    let mut cells = Table::new(&[
        "cell", "kappa_l", "kappa_h", "status", "infeasible", "verified", "end_to_end", "rows", "embedding_agrees", "efficient_profiles",
    ]);
    for (a, kl) in grid.kappa_l.iter().enumerate() {
        for (b, kh) in grid.kappa_h.iter().enumerate() {
            let kl = kl.rational().map_err(failed)?;
            let kh = kh.rational().map_err(failed)?;
            let cell = format!("{a}-{b}");
            let (base, ts) = bilateral_preset(kl.clone(), kh.clone(), &gamma).map_err(failed)?;
            let inst = ms_embedding(&base, &ts, &gamma).map_err(failed)?;
            let agrees = inst.rows.iter().all(|r| r.optimum_activates.map_or(true, |o| o == r.efficient));
            let efficient = inst.rows.iter().filter(|r| r.efficient).count();
            let cert = impossibility_lp(&inst, opts);
            let verified = cert.verify();
            let end_to_end = match verify_feasible(&base, &ts, &gamma, &inst, &cert).map_err(failed)? {
                Some((epic, budget)) => (epic.holds && budget.balanced).to_string(),
                None => "n/a".into(),
            };
            let infeasible = !cert.is_feasible();
            cells.push(vec![
                cell.clone(),
                kl.to_string(),
                kh.to_string(),
                if infeasible { "Infeasible" } else { "Feasible" }.into(),
                infeasible.to_string(),
                verified.to_string(),
                end_to_end,
                cert.system.rows.len().to_string(),
                agrees.to_string(),
                efficient.to_string(),
            ]);
            let mut body = serde_json::to_string_pretty(&certificate_json(&cert)).map_err(failed)?;
            body.push('\n');
            report.files.insert(format!("certificates/cell-{cell}.json"), body);
        }
    }
    report.table("cells", cells);
    let total = report.headline("cells", "cells", "cell", Reduce::Count)?;
    let verified = report.headline("all_verified", "cells", "verified", Reduce::All)?;
    let infeasible = report.headline("infeasible_cells", "cells", "infeasible", Reduce::CountTrue)?;
    let agrees = report.headline("embedding_agrees", "cells", "embedding_agrees", Reduce::All)?;
    report.check("every certificate verifies exactly", verified == "true", format!("{total} cells"));
    let t = &report.tables["cells"];
    let bad: Vec<String> = t.rows.iter().filter(|r| r[6] == "false").map(|r| r[0].clone()).collect();
    report.check("every feasible point passes EPIC and budget balance end to end", bad.is_empty(), bad.join(" "));
    report.check("embedding predicate matches the social optimum", agrees == "true", "");
    let note = if infeasible == "0" { "no infeasible cell in this grid".to_string() } else { format!("{infeasible} infeasible of {total}") };
    report.check("infeasible cells identified or their absence recorded", true, note);
    Ok(())
}

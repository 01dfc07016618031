//! The status-quo family under both edge kinds: survival of all-Sleep in
//! `Γ_C` under bounded transfers, and its fate in `Γ_D`.

use ltg::inertia::{random_transfers, test_survival};
use ltg::intervene::{apply_structural, embed_profile, stay_profile, DominanceFamily, StructuralEdit};
use ltg::model::{validate_game, EdgeKind};
use ltg::solve::{enumerate_mpe, joint_value, verify_mpe};
use ltg::uniformize::uniformize;

use super::{failed, num, profile_label, RunError};
use crate::report::{Reduce, Report, Table};
use crate::scenario::ScenarioConfig;

pub fn run(cfg: &ScenarioConfig, report: &mut Report) -> Result<(), RunError> {
    let f = cfg.require(&cfg.family, "family")?.clone();
    let gamma = cfg.gamma_f64(20)?;
    let tol = cfg.tol();
    let samples = cfg.samples.unwrap_or(100);
    let seed = cfg.seed();
    let cap = cfg.cap.unwrap_or(1_000_000) as u128;
    let mut fam = DominanceFamily::new(f.budget, f.horizon, gamma);
    fam.latency = f.latency.unwrap_or(0.0);
    for (k, v) in [
        ("gamma", num(gamma)),
        ("tol", num(tol)),
        ("budget", num(f.budget)),
        ("horizon", num(f.horizon)),
        ("switching_cost", num(fam.switching_cost())),
        ("latency", num(fam.latency)),
        ("samples", samples.to_string()),
        ("seed", seed.to_string()),
    ] {
        report.param(k, v);
    }
    let (c, _) = fam.build::<f64>().map_err(failed)?;
    let retype = StructuralEdit::RetypeEdge { index: 0, kind: EdgeKind::DiscreteTransport, latency: fam.latency };
    let (d, remaps) = apply_structural(&c, &[retype]).map_err(failed)?;
    let ug_c = uniformize(&validate_game(c).map_err(failed)?, gamma).map_err(failed)?;
    let ug_d = uniformize(&validate_game(d).map_err(failed)?, gamma).map_err(failed)?;
    let s0 = ug_c.initial();

    // (i) flow edge
    let sq_c = stay_profile(&ug_c);
    let eq_c = verify_mpe(&ug_c, &sq_c, tol).map_err(failed)?;
    report.check("all-Sleep is an MPE with a flow edge", eq_c.is_mpe, format!("max gain {}", num(eq_c.max_gain())));
    let mut survival = Table::new(&["scheme", "norm", "gain_at_point", "survives", "full_mpe"]);
    for j in 0..samples {
        let t = random_transfers(&ug_c, f.budget, seed, j as u64);
        let out = test_survival(&ug_c, &sq_c, &t, 0, s0, tol).map_err(failed)?;
        survival.push(vec![
            format!("random-{j}"),
            num(*t.norm()),
            num(out.gain_at_point),
            out.survives.to_string(),
            out.report.is_mpe.to_string(),
        ]);
    }
    report.table("survival", survival);
    let survived = report.headline("survivors", "survival", "survives", Reduce::CountTrue)?;
    report.check(
        "all-Sleep survives every sampled scheme within the budget",
        survived == samples.to_string(),
        format!("{survived}/{samples}"),
    );

    // (ii) transport edge
    let sq_d = embed_profile(&ug_c, &ug_d, &sq_c, &remaps);
    let eq_d = verify_mpe(&ug_d, &sq_d, tol).map_err(failed)?;
    let sq_welfare = joint_value(&ug_d, &sq_d).map_err(failed)?.total(0, ug_d.initial());
    let mut status = Table::new(&["game", "is_mpe", "max_gain", "welfare"]);
    let welfare_c = joint_value(&ug_c, &sq_c).map_err(failed)?.total(0, s0);
    status.push(vec!["flow".into(), eq_c.is_mpe.to_string(), num(eq_c.max_gain()), num(welfare_c)]);
    status.push(vec!["transport".into(), eq_d.is_mpe.to_string(), num(eq_d.max_gain()), num(sq_welfare)]);
    report.table("status_quo", status);
    report.check(
        "all-Sleep fails verify_mpe with a transport edge",
        !eq_d.is_mpe,
        format!("max gain {}", num(eq_d.max_gain())),
    );

    let found = enumerate_mpe(&ug_d, tol, cap).map_err(failed)?;
    let d0 = ug_d.initial();
    let mut mpes = Table::new(&["profile", "activating", "welfare", "beats_status_quo"]);
    for (profile, _) in &found {
        let activating = (0..ug_d.players()).any(|i| profile.control(i, 0, d0) != sq_d.control(i, 0, d0));
        let w = joint_value(&ug_d, profile).map_err(failed)?.total(0, d0);
        let beats = activating && w > sq_welfare + tol;
        mpes.push(vec![profile_label(profile), activating.to_string(), num(w), beats.to_string()]);
    }
    report.table("transport_mpes", mpes);
    report.headline("transport_mpe_count", "transport_mpes", "profile", Reduce::Count)?;
    let better = report.headline("activating_improvements", "transport_mpes", "beats_status_quo", Reduce::CountTrue)?;
    report.check(
        "an activating MPE with higher welfare exists with a transport edge",
        better != "0",
        format!("{better} of {} MPEs", found.len()),
    );
    Ok(())
}

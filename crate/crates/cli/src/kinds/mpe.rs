//! Stationary MPE enumeration, cross-checked by one-shot deviations.

use std::collections::BTreeSet;

use ltg::model::validate_game;
use ltg::scalar::Scalar;
use ltg::solve::{enumerate_mpe, joint_value, stationary_candidate, stationary_count, verify_mpe, PolicyProfile};
use ltg::uniformize::{uniformize, UniformizedGame};

use super::{failed, num, profile_label, RunError};
use crate::report::{Reduce, Report, Table};
use crate::scenario::ScenarioConfig;

/// Indices of stationary candidates at which no player gains more than
/// `tol` from changing one control at one `(stage, state)` and then
/// reverting. In a finite horizon that is exactly subgame perfection.
pub fn one_shot_mpes<S: Scalar>(ug: &UniformizedGame<S>, tol: &S) -> BTreeSet<u128> {
    let mut out = BTreeSet::new();
    let grid = ug.controls();
    for index in 0..stationary_count(ug) {
        let profile = stationary_candidate(ug, index);
        let values = joint_value(ug, &profile).expect("candidate fits the game");
        let mut ok = true;
        'search: for k in 0..ug.stages {
            for s in 0..ug.states() {
                let u = profile.joint(grid, k, s);
                for i in 0..ug.players() {
                    let held = values.get(i, k, s).clone();
                    for c in 0..grid.count(i) {
                        let alt = grid.with_control(u, i, c);
                        let mut q = ug.reward(k, s, alt, i) - ug.jump_cost(s, alt, i).clone();
                        for (t, p) in ug.row(s, alt) {
                            q = q + p.clone() * values.get(i, k + 1, *t).clone();
                        }
                        if q > held.clone() + tol.clone() {
                            ok = false;
                            break 'search;
                        }
                    }
                }
            }
        }
        if ok {
            out.insert(index);
        }
    }
    out
}

pub fn run(cfg: &ScenarioConfig, report: &mut Report) -> Result<(), RunError> {
    let path = cfg.require(&cfg.game, "game")?.clone();
    let gamma = cfg.gamma_f64(20)?;
    let tol = cfg.tol();
    let cap = cfg.cap.unwrap_or(1_000_000) as u128;
    report.param("gamma", num(gamma));
    report.param("tol", num(tol));
    report.param("cap", cap);
    let spec = cfg.game::<f64>(report, &path)?;
    let ug = match &cfg.intervention {
        Some(p) => cfg.intervention(report, p)?.induce(&spec, gamma).map_err(failed)?,
        None => uniformize(&validate_game(spec).map_err(failed)?, gamma).map_err(failed)?,
    };
    report.param("stages", ug.stages);
    report.param("states", ug.states());

    let found = enumerate_mpe(&ug, tol, cap).map_err(failed)?;
    let mut table = Table::new(&["index", "profile", "welfare", "max_gain"]);
    let mut listed = BTreeSet::new();
    for (profile, eq) in &found {
        let index = candidate_index(&ug, profile);
        listed.insert(index);
        let welfare = joint_value(&ug, profile).map_err(failed)?.total(0, ug.initial());
        table.push(vec![index.to_string(), profile_label(profile), num(welfare), num(eq.max_gain())]);
    }
    report.table("mpes", table);
    report.headline("mpe_count", "mpes", "index", Reduce::Count)?;
    report.headline("best_welfare", "mpes", "welfare", Reduce::Max)?;

    let oracle = one_shot_mpes(&ug, &tol);
    report.check(
        "enumeration matches one-shot deviation oracle",
        oracle == listed,
        format!("enumerated {}, oracle {}", listed.len(), oracle.len()),
    );
    let all_verify = found.iter().all(|(p, _)| verify_mpe(&ug, p, tol).map(|r| r.is_mpe).unwrap_or(false));
    report.check("every listed profile re-verifies", all_verify, "");

    if let Some(cs) = &cfg.status_quo {
        let sq = PolicyProfile::constant(cs, ug.stages, ug.states());
        let eq = verify_mpe(&ug, &sq, tol).map_err(failed)?;
        let mut t = Table::new(&["player", "gain", "stage", "state"]);
        for (i, g) in eq.gains.iter().enumerate() {
            let (k, s) = eq.worst_at[i];
            t.push(vec![i.to_string(), num(*g), k.to_string(), ug.state_label(s)]);
        }
        report.table("status_quo", t);
        report.headline("status_quo_max_gain", "status_quo", "gain", Reduce::Max)?;
        report.param("status_quo_is_mpe", eq.is_mpe);
    }
    Ok(())
}

/// Inverse of `stationary_candidate`.
pub fn candidate_index<S: Scalar>(ug: &UniformizedGame<S>, profile: &PolicyProfile) -> u128 {
    let mut index: u128 = 0;
    for i in 0..ug.players() {
        let radix = ug.controls().count(i) as u128;
        for s in 0..ug.states() {
            index = index * radix + profile.control(i, 0, s) as u128;
        }
    }
    index
}

//! Inertia depth of a status quo and both transfer bounds.

use ltg::inertia::{converse_transfer, inertia_depth, random_transfers, structured_transfers, test_survival};
use ltg::intervene::{stay_profile, DominanceFamily};
use ltg::model::validate_game;
use ltg::solve::PolicyProfile;
use ltg::uniformize::{uniformize, UniformizedGame};

use super::{failed, num, RunError};
use crate::report::{Reduce, Report, Table};
use crate::scenario::{InputError, ScenarioConfig};

/// The game and status quo a scenario studies: the family's `Γ_C` with the
/// stay profile, or a game file with constant `status_quo` controls.
pub(crate) fn status_quo_game(
    cfg: &ScenarioConfig,
    report: &mut Report,
    gamma: f64,
) -> Result<(UniformizedGame<f64>, PolicyProfile), RunError> {
    if let Some(f) = &cfg.family {
        let mut fam = DominanceFamily::new(f.budget, f.horizon, gamma);
        fam.latency = f.latency.unwrap_or(0.0);
        report.param("budget", num(f.budget));
        report.param("horizon", num(f.horizon));
        report.param("switching_cost", num(fam.switching_cost()));
        let (c, _) = fam.build::<f64>().map_err(failed)?;
        let ug = uniformize(&validate_game(c).map_err(failed)?, gamma).map_err(failed)?;
        let sq = stay_profile(&ug);
        return Ok((ug, sq));
    }
    let path = cfg.require(&cfg.game, "game or family")?.clone();
    let controls = cfg.require(&cfg.status_quo, "status_quo")?.clone();
    let spec = cfg.game::<f64>(report, &path)?;
    if controls.len() != spec.players() {
        return Err(InputError::Missing("status_quo needs one control per player".into()).into());
    }
    let ug = uniformize(&validate_game(spec).map_err(failed)?, gamma).map_err(failed)?;
    let sq = PolicyProfile::constant(&controls, ug.stages, ug.states());
    Ok((ug, sq))
}

pub fn run(cfg: &ScenarioConfig, report: &mut Report) -> Result<(), RunError> {
    let gamma = cfg.gamma_f64(4000)?;
    let tol = cfg.tol();
    let samples = cfg.samples.unwrap_or(100);
    let seed = cfg.seed();
    report.param("gamma", num(gamma));
    report.param("tol", num(tol));
    report.param("samples", samples);
    report.param("seed", seed);
    let (ug, sq) = status_quo_game(cfg, report, gamma)?;
    let s_sq = ug.initial();
    report.param("status_quo_state", ug.state_label(s_sq));

    let depth = inertia_depth(&ug, &sq, 0, s_sq, tol, None).map_err(failed)?;
    let mut per_player = Table::new(&["player", "departure_gain", "literal_gain"]);
    for (i, d) in depth.d.iter().enumerate() {
        per_player.push(vec![i.to_string(), d.map(num).unwrap_or_default(), num(depth.literal[i])]);
    }
    report.table("depth", per_player);
    let mut bounds = Table::new(&["theta", "remaining", "survival_delta", "converse_delta", "epsilon"]);
    bounds.push(vec![
        num(depth.theta),
        num(depth.remaining),
        num(depth.survival_delta),
        num(depth.converse_delta),
        num(depth.epsilon),
    ]);
    report.table("bounds", bounds);
    report.headline("theta", "bounds", "theta", Reduce::First)?;
    report.headline("survival_delta", "bounds", "survival_delta", Reduce::First)?;

    let mut survival = Table::new(&["scheme", "norm", "gain_at_point", "survives", "full_mpe"]);
    for j in 0..samples {
        let t = random_transfers(&ug, depth.survival_delta, seed, j as u64);
        let out = test_survival(&ug, &sq, &t, 0, s_sq, tol).map_err(failed)?;
        survival.push(vec![
            format!("random-{j}"),
            num(*t.norm()),
            num(out.gain_at_point),
            out.survives.to_string(),
            out.report.is_mpe.to_string(),
        ]);
    }
    report.table("survival", survival);
    let mut structured = Table::new(&["scheme", "norm", "gain_at_point", "survives", "full_mpe"]);
    for (name, t) in structured_transfers(&ug, &depth.survival_delta, s_sq) {
        let out = test_survival(&ug, &sq, &t, 0, s_sq, tol).map_err(failed)?;
        structured.push(vec![
            name.to_string(),
            num(*t.norm()),
            num(out.gain_at_point),
            out.survives.to_string(),
            out.report.is_mpe.to_string(),
        ]);
    }
    report.table("structured", structured);
    let survived = report.headline("survivors", "survival", "survives", Reduce::CountTrue)?;
    let worst = report.headline("max_sample_gain", "survival", "gain_at_point", Reduce::Max)?;
    report.check(
        "status quo survives every sampled scheme below the survival bound",
        survived == samples.to_string(),
        format!("{survived}/{samples} survive, worst gain {worst}"),
    );

    let penalty = converse_transfer(&ug, &depth.theta, 0, &depth.epsilon, s_sq).map_err(failed)?;
    let out = test_survival(&ug, &sq, &penalty, 0, s_sq, tol).map_err(failed)?;
    let mut converse = Table::new(&["norm", "gain_at_point", "survives", "full_mpe"]);
    converse.push(vec![num(*penalty.norm()), num(out.gain_at_point), out.survives.to_string(), out.report.is_mpe.to_string()]);
    report.table("converse", converse);
    let still = report.headline("converse_full_mpe", "converse", "full_mpe", Reduce::First)?;
    report.check("converse scheme eliminates the status quo", still == "false", format!("gain at point {}", num(out.gain_at_point)));
    Ok(())
}

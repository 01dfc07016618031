//! Uniformization fidelity: DP values against exact-clock Monte Carlo.

use ltg::model::validate_game;
use ltg::solve::{joint_value, social_optimum, PolicyProfile};
use ltg::uniformize::{simulate, uniformize};

use super::{constant_controls, failed, num, RunError};
use crate::report::{Reduce, Report, Table};
use crate::scenario::{InputError, ScenarioConfig};

const Z_LIMIT: f64 = 3.0;
const EXACT: f64 = 1e-9;

pub fn run(cfg: &ScenarioConfig, report: &mut Report) -> Result<(), RunError> {
    if cfg.games.is_empty() {
        return Err(InputError::Missing("uniformize-check needs `games`".into()).into());
    }
    let gamma = cfg.gamma_f64(1000)?;
    let paths = cfg.paths.unwrap_or(100_000);
    let seed = cfg.seed();
    report.param("gamma", num(gamma));
    report.param("paths", paths);
    report.param("seed", seed);
    report.param("z_limit", num(Z_LIMIT));

    let mut oracle = Table::new(&["game", "profile", "player", "stages", "dp", "mc", "std_err", "z", "pass"]);
    let mut refine = Table::new(&["game", "profile", "gamma", "value", "step_change", "shrinking"]);
    for (g, path) in cfg.games.iter().enumerate() {
        let label = path.display().to_string();
        let game = validate_game(cfg.game::<f64>(report, path)?).map_err(failed)?;
        let ug = uniformize(&game, gamma).map_err(failed)?;
        let mut profiles: Vec<(String, PolicyProfile)> = constant_controls(&game.controls)
            .into_iter()
            .map(|(name, cs)| (name, PolicyProfile::constant(&cs, ug.stages, ug.states())))
            .collect();
        profiles.push(("optimum".into(), social_optimum(&ug).0));
        for (p, (name, profile)) in profiles.iter().enumerate() {
            let dp = joint_value(&ug, profile).map_err(failed)?;
            let stream_seed = seed.wrapping_add((g * 1000 + p) as u64);
            let mc = simulate(&game, gamma, profile, 0.0, &game.initial, stream_seed, paths).map_err(failed)?;
            for i in 0..game.players() {
                let v = *dp.get(i, 0, ug.initial());
                let diff = (v - mc.mean[i]).abs();
                // paths that never jump give a zero or rounding-sized std error
                let z = if diff <= EXACT { 0.0 } else if mc.std_err[i] > 0.0 { diff / mc.std_err[i] } else { f64::MAX };
                oracle.push(vec![
                    label.clone(),
                    name.clone(),
                    i.to_string(),
                    ug.stages.to_string(),
                    num(v),
                    num(mc.mean[i]),
                    num(mc.std_err[i]),
                    num(z),
                    (z <= Z_LIMIT).to_string(),
                ]);
            }
        }
        // coarser grids for the constant profiles: the change per halving should shrink
        for (name, cs) in constant_controls(&game.controls) {
            let mut prev: Option<f64> = None;
            let mut prev_change: Option<f64> = None;
            for factor in [8.0, 4.0, 2.0, 1.0] {
                let gm = gamma / factor;
                let ug_g = uniformize(&game, gm).map_err(failed)?;
                let profile = PolicyProfile::constant(&cs, ug_g.stages, ug_g.states());
                let v = joint_value(&ug_g, &profile).map_err(failed)?.total(0, ug_g.initial());
                let change = prev.map(|p| (v - p).abs());
                let shrinking = match (prev_change, change) {
                    (Some(a), Some(b)) => b <= a + 1e-12,
                    _ => true,
                };
                refine.push(vec![
                    label.clone(),
                    name.clone(),
                    num(gm),
                    num(v),
                    change.map(num).unwrap_or_default(),
                    shrinking.to_string(),
                ]);
                prev = Some(v);
                prev_change = change.or(prev_change);
            }
        }
    }
    report.table("oracle", oracle);
    report.table("refinement", refine);
    let worst = report.headline("max_z", "oracle", "z", Reduce::Max)?;
    let all = report.headline("all_within", "oracle", "pass", Reduce::All)?;
    report.headline("comparisons", "oracle", "pass", Reduce::Count)?;
    report.check("dp matches monte carlo within 3 standard errors", all == "true", format!("max z = {worst}"));
    let shrink = report.headline("refinement_shrinks", "refinement", "shrinking", Reduce::All)?;
    report.check("value change shrinks as gamma doubles", shrink == "true", "");
    Ok(())
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Failed(e.to_string())
    }
}

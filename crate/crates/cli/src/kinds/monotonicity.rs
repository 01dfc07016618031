//! Implementable outcomes can only grow when an edge becomes transport.

use ltg::intervene::{apply_structural, embed_profile, implementable_set, ControlRemap, DominanceFamily, StructuralEdit};
use ltg::model::{validate_game, EdgeKind, GameSpec};
use ltg::solve::{enumerate_mpe, joint_value};
use ltg::uniformize::uniformize;

use super::{failed, num, RunError};
use crate::report::{Reduce, Report, Table};
use crate::scenario::ScenarioConfig;

struct Pair {
    label: String,
    c: GameSpec<f64>,
    d: GameSpec<f64>,
    remaps: Vec<ControlRemap>,
    expect_strict: bool,
}

pub fn run(cfg: &ScenarioConfig, report: &mut Report) -> Result<(), RunError> {
    let gamma = cfg.gamma_f64(20)?;
    let tol = cfg.tol();
    let cap = cfg.cap.unwrap_or(1_000_000) as u128;
    report.param("gamma", num(gamma));
    report.param("tol", num(tol));
    let mut pairs = Vec::new();
    for p in &cfg.pairs {
        let c = cfg.game::<f64>(report, &p.game)?;
        let edits = cfg.intervention(report, &p.intervention)?.edits::<f64>().map_err(failed)?;
        let (d, remaps) = apply_structural(&c, &edits).map_err(failed)?;
        let label = format!("{}+{}", p.game.display(), p.intervention.display());
        pairs.push(Pair { label, c, d, remaps, expect_strict: p.expect_strict });
    }
    if let Some(f) = &cfg.family {
        let mut fam = DominanceFamily::new(f.budget, f.horizon, gamma);
        fam.latency = f.latency.unwrap_or(0.0);
        let (c, _) = fam.build::<f64>().map_err(failed)?;
        let retype = StructuralEdit::RetypeEdge { index: 0, kind: EdgeKind::DiscreteTransport, latency: fam.latency };
        let (d, remaps) = apply_structural(&c, &[retype]).map_err(failed)?;
        report.param("family_budget", num(f.budget));
        pairs.push(Pair { label: format!("family(B={})", num(f.budget)), c, d, remaps, expect_strict: true });
    }

    let mut sets = Table::new(&["pair", "game", "terminal", "welfare"]);
    let mut verdicts = Table::new(&["pair", "flow_outcomes", "transport_outcomes", "included", "strict", "expect_strict", "embedding_gap"]);
    for pair in &pairs {
        let ug_c = uniformize(&validate_game(pair.c.clone()).map_err(failed)?, gamma).map_err(failed)?;
        let ug_d = uniformize(&validate_game(pair.d.clone()).map_err(failed)?, gamma).map_err(failed)?;
        let imp_c = implementable_set(&ug_c, tol, cap).map_err(failed)?;
        let imp_d = implementable_set(&ug_d, tol, cap).map_err(failed)?;
        for (name, set) in [("flow", &imp_c), ("transport", &imp_d)] {
            for sig in set {
                sets.push(vec![pair.label.clone(), name.into(), sig.terminal.to_string(), num(sig.welfare())]);
            }
        }
        // the embedding must carry every flow-game MPE to a profile with identical values
        let mut gap: f64 = 0.0;
        for (profile, _) in enumerate_mpe(&ug_c, tol, cap).map_err(failed)? {
            let image = embed_profile(&ug_c, &ug_d, &profile, &pair.remaps);
            let vc = joint_value(&ug_c, &profile).map_err(failed)?;
            let vd = joint_value(&ug_d, &image).map_err(failed)?;
            for k in 0..=ug_c.stages {
                for s in 0..ug_c.states() {
                    for i in 0..ug_c.players() {
                        gap = gap.max((vc.get(i, k, s) - vd.get(i, k, ug_d.lift(ug_c.base_state(s)))).abs());
                    }
                }
            }
        }
        let included = imp_c.is_subset(&imp_d);
        let strict = included && imp_d.len() > imp_c.len();
        verdicts.push(vec![
            pair.label.clone(),
            imp_c.len().to_string(),
            imp_d.len().to_string(),
            included.to_string(),
            strict.to_string(),
            pair.expect_strict.to_string(),
            num(gap),
        ]);
        report.check(&format!("{}: flow outcomes included in transport outcomes", pair.label), included, "");
        report.check(&format!("{}: embedded profiles keep their values", pair.label), gap <= 1e-9, format!("max gap {}", num(gap)));
        if pair.expect_strict {
            report.check(
                &format!("{}: strict inclusion witness", pair.label),
                strict,
                format!("{} vs {} outcomes", imp_c.len(), imp_d.len()),
            );
        }
    }
    report.table("outcomes", sets);
    report.table("pairs", verdicts);
    report.headline("pairs_included", "pairs", "included", Reduce::CountTrue)?;
    report.headline("pairs_strict", "pairs", "strict", Reduce::CountTrue)?;
    report.headline("max_embedding_gap", "pairs", "embedding_gap", Reduce::Max)?;
    Ok(())
}

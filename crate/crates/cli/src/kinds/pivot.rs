//! The pivot mechanism: ex post incentives and the deficit bound, exactly.

use ltg::mech::{bilateral_preset, check_budget, check_epic, pivot_all, pivot_deficit_bound, pivot_spec, EpicReport, EpicScope, PivotMode, TypeSpace};
use ltg::model::GameSpec;
use ltg::scalar::Rational;

use super::{failed, RunError};
use crate::report::{Reduce, Report, Table};
use crate::scenario::ScenarioConfig;

/// Base game, type space and pivot mode from a preset or from game and
/// mechanism files.
pub(crate) fn typed_setup(
    cfg: &ScenarioConfig,
    report: &mut Report,
    gamma: &Rational,
) -> Result<(GameSpec<Rational>, TypeSpace<Rational>, PivotMode, Option<ltg::config::MechanismFile>), RunError> {
    if let Some(p) = &cfg.preset {
        let kl = p.kappa_l.rational().map_err(failed)?;
        let kh = p.kappa_h.rational().map_err(failed)?;
        report.param("kappa_l", &kl);
        report.param("kappa_h", &kh);
        let (base, ts) = bilateral_preset(kl, kh, gamma).map_err(failed)?;
        return Ok((base, ts, PivotMode::absent(2), None));
    }
    let game = cfg.require(&cfg.game, "game or preset")?.clone();
    let mech = cfg.require(&cfg.mechanism, "mechanism")?.clone();
    let base = cfg.game::<Rational>(report, &game)?;
    let file = cfg.mechanism(report, &mech)?;
    let ts = file.type_space().map_err(failed)?;
    let mode = file.pivot_mode(base.players()).map_err(failed)?;
    Ok((base, ts, mode, Some(file)))
}

fn epic_table(ts: &TypeSpace<Rational>, r: &EpicReport<Rational>) -> Table {
    let mut t = Table::new(&["player", "truth", "misreport", "diff", "stage", "state"]);
    for e in &r.entries {
        t.push(vec![
            e.player.to_string(),
            ts.label(e.truth),
            ts.types(e.player)[e.misreport].label.clone(),
            e.diff.to_string(),
            e.at.0.to_string(),
            e.at.1.to_string(),
        ]);
    }
    t
}

pub fn run(cfg: &ScenarioConfig, report: &mut Report) -> Result<(), RunError> {
    let gamma = cfg.gamma_rational(40)?;
    report.param("gamma", &gamma);
    let (base, ts, mode, file) = typed_setup(cfg, report, &gamma)?;
    report.param("pivot_mode", format!("{mode:?}"));
    let outcomes = pivot_all(&base, &ts, &gamma, &mode).map_err(failed)?;

    let mut transfers = Table::new(&["reports", "player", "others", "without", "transfer"]);
    for (code, o) in outcomes.iter().enumerate() {
        for i in 0..ts.players() {
            transfers.push(vec![
                ts.label(code),
                i.to_string(),
                o.others[i].to_string(),
                o.without[i].to_string(),
                o.transfers[i].to_string(),
            ]);
        }
    }
    report.table("transfers", transfers);

    let spec = pivot_spec(&ts, &outcomes).map_err(failed)?;
    let zero = Rational::from_integer(0.into());
    let at_zero = check_epic(&base, &ts, &spec, &gamma, EpicScope::Initial, &zero).map_err(failed)?;
    let reach = check_epic(&base, &ts, &spec, &gamma, EpicScope::Reachable, &zero).map_err(failed)?;
    report.param("epic_points_checked", reach.points_checked);
    report.table("epic_initial", epic_table(&ts, &at_zero));
    report.table("epic_reachable", epic_table(&ts, &reach));
    let m0 = report.headline("epic_min_diff_initial", "epic_initial", "diff", Reduce::Min)?;
    let mr = report.headline("epic_min_diff_reachable", "epic_reachable", "diff", Reduce::Min)?;
    report.check("pivot is EPIC at time zero (exact)", at_zero.min_diff >= zero, format!("min diff {m0}"));
    report.check("pivot is EPIC at every reachable point (exact)", reach.min_diff >= zero, format!("min diff {mr}"));

    let deficit = pivot_deficit_bound(&ts, &outcomes);
    let mut table = Table::new(&["reports", "welfare", "deficit"]);
    for (code, (w, d)) in deficit.welfare.iter().zip(&deficit.deficits).enumerate() {
        table.push(vec![ts.label(code), w.to_string(), d.to_string()]);
    }
    report.table("deficit", table);
    let mut bound = Table::new(&["w_max", "w_min", "bound"]);
    bound.push(vec![deficit.w_max.to_string(), deficit.w_min.to_string(), deficit.bound.to_string()]);
    report.table("deficit_bound", bound);
    let hi = report.headline("max_deficit", "deficit", "deficit", Reduce::Max)?;
    let lo = report.headline("min_deficit", "deficit", "deficit", Reduce::Min)?;
    let b = report.headline("deficit_bound", "deficit_bound", "bound", Reduce::First)?;
    report.check(
        "0 <= deficit <= n(W_max - W_min) (exact)",
        deficit.min_deficit >= zero && deficit.max_deficit <= deficit.bound,
        format!("deficit in [{lo}, {hi}], bound {b}"),
    );
    let budget = check_budget(&spec);
    report.param("pivot_budget_balanced", budget.balanced);

    if let Some(file) = file {
        let mech = file.mechanism(&base, &gamma).map_err(failed)?;
        let epic = check_epic(&base, &ts, &mech, &gamma, EpicScope::Initial, &zero).map_err(failed)?;
        report.table("file_epic", epic_table(&ts, &epic));
        report.headline("file_epic_min_diff", "file_epic", "diff", Reduce::Min)?;
        report.param("file_budget_balanced", check_budget(&mech).balanced);
        if let Some(expect) = cfg.expect_epic {
            report.check("mechanism file EPIC verdict as expected", epic.holds == expect, format!("holds = {}", epic.holds));
        }
    }
    Ok(())
}

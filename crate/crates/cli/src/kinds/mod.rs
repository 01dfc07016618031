mod dominance;
mod impossibility;
mod inertia;
mod monotonicity;
mod mpe;
mod pivot;
mod uniformize;

use ltg::model::ControlGrid;
use ltg::solve::PolicyProfile;

use crate::report::Report;
use crate::scenario::{InputError, Kind, ScenarioConfig};

pub use self::mpe::{candidate_index, one_shot_mpes};

/// Why a scenario produced no report.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{0}")]
    Failed(String),
}

pub(crate) fn failed(e: impl std::fmt::Display) -> RunError {
    RunError::Failed(e.to_string())
}

pub fn run(cfg: &ScenarioConfig) -> Result<Report, RunError> {
    let mut report = Report::new(cfg.kind.name(), &cfg.name());
    match cfg.kind {
        Kind::UniformizeCheck => uniformize::run(cfg, &mut report)?,
        Kind::MpeVerify => mpe::run(cfg, &mut report)?,
        Kind::Inertia => inertia::run(cfg, &mut report)?,
        Kind::Dominance => dominance::run(cfg, &mut report)?,
        Kind::Monotonicity => monotonicity::run(cfg, &mut report)?,
        Kind::Pivot => pivot::run(cfg, &mut report)?,
        Kind::Impossibility => impossibility::run(cfg, &mut report)?,
    }
    Ok(report)
}

pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}

/// `p0:[c c c]/p1:[c c c]` for a stationary profile; staged profiles list
/// stage 0 only, which is all the reports need to identify them.
pub(crate) fn profile_label(profile: &PolicyProfile) -> String {
    (0..profile.players())
        .map(|i| {
            let cs: Vec<String> = (0..profile.states()).map(|s| profile.control(i, 0, s).to_string()).collect();
            format!("p{i}:[{}]", cs.join(" "))
        })
        .collect::<Vec<_>>()
        .join("/")
}

/// Every constant control profile of `grid`, labelled, in profile-code order.
pub(crate) fn constant_controls(grid: &ControlGrid) -> Vec<(String, Vec<usize>)> {
    (0..grid.profiles())
        .map(|u| {
            let cs: Vec<usize> = (0..grid.players()).map(|i| grid.control(u, i)).collect();
            (format!("const{cs:?}").replace(' ', ""), cs)
        })
        .collect()
}

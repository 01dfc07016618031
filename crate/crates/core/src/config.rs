//! TOML formats for games, interventions and mechanisms.
//!
//! Every number may be an integer, a float, or a string such as `"1/5"`;
//! all are read as exact rationals and converted to the working scalar
//! afterwards, so `0.2` and `"1/5"` mean the same thing. Unknown keys are
//! rejected.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::intervene::{apply_structural, SignalKernel, StructuralEdit, TransferTable};
use crate::mech::{MechTransfers, MechanismSpec, PivotMode, TypeOverride, TypeSpace};
use crate::model::{validate_game, ControlGrid, EdgeKind, EdgeSpec, GameSpec, JointState, ModelError, PlayerState};
use crate::scalar::{parse_rational, rational_from_decimal_f64, Rational, Scalar};
use crate::solve::{social_optimum, PolicyProfile};
use crate::uniformize::{uniformize, UniformizedGame};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error("bad number {0:?}: {1}")]
    Number(String, String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Intervene(#[from] crate::intervene::InterveneError),
    #[error(transparent)]
    Uniformize(#[from] crate::uniformize::UniformizeError),
    #[error(transparent)]
    Mech(#[from] crate::mech::MechError),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// A number as written in a config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    pub fn rational(&self) -> Result<Rational, ConfigError> {
        match self {
            Num::Int(v) => Ok(Rational::from_integer((*v).into())),
            Num::Float(v) => rational_from_decimal_f64(*v).map_err(|e| ConfigError::Number(v.to_string(), e)),
            Num::Text(s) => parse_rational(s).map_err(|e| ConfigError::Number(s.clone(), e)),
        }
    }

    pub fn value<S: Scalar>(&self) -> Result<S, ConfigError> {
        Ok(S::from_rational(&self.rational()?))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub horizon: Num,
    pub initial: Vec<PlayerState>,
    #[serde(default)]
    pub lambda_max: Option<Num>,
    pub players: Vec<PlayerEntry>,
    #[serde(default)]
    pub rates: Vec<RateEntry>,
    #[serde(default)]
    pub switch_costs: Vec<SwitchCostEntry>,
    #[serde(default)]
    pub benefits: Vec<BenefitEntry>,
    #[serde(default)]
    pub terminal: Vec<TerminalEntry>,
    #[serde(default)]
    pub edges: Vec<EdgeEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerEntry {
    pub states: Vec<PlayerState>,
    /// Control points; each a list of coordinates.
    #[serde(default)]
    pub controls: Option<Vec<Vec<f64>>>,
    /// Shorthand for `controls = [[0], [1], ...]`.
    #[serde(default)]
    pub control_count: Option<usize>,
    #[serde(default)]
    pub control_cost: Vec<Num>,
}

/// A rate for `player` moving to `to` under `control`. `state` names a
/// full joint state; `from` instead applies to every joint state in which
/// the player is in `from`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub player: usize,
    #[serde(default)]
    pub state: Option<Vec<PlayerState>>,
    #[serde(default)]
    pub from: Option<PlayerState>,
    pub to: PlayerState,
    pub control: usize,
    pub rate: Num,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchCostEntry {
    pub player: usize,
    pub from: PlayerState,
    pub to: PlayerState,
    pub cost: Num,
}

/// Base benefit of `player` in `state`; with `controls` absent it applies
/// to every control profile.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenefitEntry {
    pub state: Vec<PlayerState>,
    #[serde(default)]
    pub controls: Option<Vec<usize>>,
    pub player: usize,
    pub value: Num,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalEntry {
    pub state: Vec<PlayerState>,
    pub player: usize,
    pub value: Num,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub src: usize,
    pub dst: usize,
    #[serde(default = "continuous")]
    pub kind: EdgeKind,
    #[serde(default)]
    pub latency: Option<Num>,
    #[serde(default)]
    pub weight: Option<Num>,
    #[serde(default)]
    pub send_coord: Option<usize>,
}

fn continuous() -> EdgeKind {
    EdgeKind::ContinuousFlow
}

impl EdgeEntry {
    fn build<S: Scalar>(&self) -> Result<EdgeSpec<S>, ConfigError> {
        Ok(EdgeSpec {
            src: self.src,
            dst: self.dst,
            kind: self.kind,
            latency: self.latency.as_ref().map_or(Ok(S::zero()), Num::value)?,
            weight: self.weight.as_ref().map_or(Ok(S::one()), Num::value)?,
            send_coord: self.send_coord,
        })
    }
}

impl GameFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Builds and validates the game.
    pub fn build<S: Scalar>(&self) -> Result<GameSpec<S>, ConfigError> {
        let allowed: Vec<Vec<PlayerState>> = self.players.iter().map(|p| p.states.clone()).collect();
        let mut points = Vec::with_capacity(self.players.len());
        for (i, p) in self.players.iter().enumerate() {
            points.push(match (&p.controls, p.control_count) {
                (Some(c), None) => c.clone(),
                (None, Some(k)) => (0..k).map(|c| vec![c as f64]).collect(),
                (None, None) => vec![vec![0.0]],
                (Some(_), Some(_)) => return Err(invalid(format!("player {i}: give controls or control_count, not both"))),
            });
        }
        let grid = ControlGrid::new(points)?;
        let mut g = GameSpec::empty(allowed, grid, self.horizon.value()?, JointState(self.initial.clone()))?;
        g.rates.lambda_max = match &self.lambda_max {
            Some(v) => v.value()?,
            None => S::zero(),
        };
        for (i, p) in self.players.iter().enumerate() {
            for (c, v) in p.control_cost.iter().enumerate() {
                g.set_control_cost(i, c, v.value()?)?;
            }
        }
        for (k, r) in self.rates.iter().enumerate() {
            let rate = r.rate.value()?;
            match (&r.state, r.from) {
                (Some(js), None) => {
                    let s = g.space.index(&JointState(js.clone()))?;
                    g.set_rate(s, r.player, r.to, r.control, rate)?;
                }
                (None, Some(from)) => g.set_rate_from(r.player, from, r.to, r.control, rate)?,
                _ => return Err(invalid(format!("rate entry {k}: give exactly one of state or from"))),
            }
        }
        for c in &self.switch_costs {
            g.set_switch_cost(c.player, c.from, c.to, c.cost.value()?)?;
        }
        for b in &self.benefits {
            let s = g.space.index(&JointState(b.state.clone()))?;
            check_player(&g, b.player)?;
            let v: S = b.value.value()?;
            match &b.controls {
                Some(cs) => {
                    if cs.len() != g.players() || cs.iter().enumerate().any(|(i, &c)| c >= g.controls.count(i)) {
                        return Err(invalid(format!("benefit controls {cs:?} do not name a profile")));
                    }
                    let u = g.controls.encode(cs);
                    g.set_benefit(s, u, b.player, v);
                }
                None => {
                    for u in 0..g.controls.profiles() {
                        g.set_benefit(s, u, b.player, v.clone());
                    }
                }
            }
        }
        for t in &self.terminal {
            let s = g.space.index(&JointState(t.state.clone()))?;
            check_player(&g, t.player)?;
            g.set_terminal(s, t.player, t.value.value()?);
        }
        for e in &self.edges {
            g.edges.push(e.build()?);
        }
        if self.lambda_max.is_none() {
            g.rates.lambda_max = max_exit_rate(&g);
        }
        Ok(validate_game(g)?.into_spec())
    }
}

fn check_player<S: Scalar>(g: &GameSpec<S>, player: usize) -> Result<(), ConfigError> {
    if player >= g.players() {
        return Err(ModelError::UnknownPlayer(player).into());
    }
    Ok(())
}

/// Largest total exit rate over all states and profiles; the default
/// `lambda_max` when a file does not declare one.
pub fn max_exit_rate<S: Scalar>(g: &GameSpec<S>) -> S {
    let mut best = S::zero();
    for s in 0..g.space.count() {
        for u in 0..g.controls.profiles() {
            best = S::max_of(best, g.exit_rate(s, u));
        }
    }
    best
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionFile {
    #[serde(default)]
    pub transfers: Vec<TransferEntry>,
    #[serde(default)]
    pub edits: Vec<EditEntry>,
    #[serde(default)]
    pub signal: Option<SignalEntry>,
}

/// Sparse transfer entry; absent selectors match everything.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferEntry {
    #[serde(default)]
    pub stage: Option<usize>,
    #[serde(default)]
    pub state: Option<Vec<PlayerState>>,
    #[serde(default)]
    pub controls: Option<Vec<usize>>,
    #[serde(default)]
    pub player: Option<usize>,
    pub value: Num,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "op", rename_all = "lowercase")]
pub enum EditEntry {
    Delete { index: usize },
    Add { edge: EdgeEntry },
    Retype { index: usize, kind: EdgeKind, #[serde(default)] latency: Option<Num> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalEntry {
    pub labels: Vec<String>,
    #[serde(default)]
    pub rows: Vec<SignalRow>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalRow {
    #[serde(default)]
    pub stage: Option<usize>,
    pub state: Vec<PlayerState>,
    pub probs: Vec<Num>,
}

impl InterventionFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn edits<S: Scalar>(&self) -> Result<Vec<StructuralEdit<S>>, ConfigError> {
        self.edits
            .iter()
            .map(|e| {
                Ok(match e {
                    EditEntry::Delete { index } => StructuralEdit::DeleteEdge(*index),
                    EditEntry::Add { edge } => StructuralEdit::AddEdge(edge.build()?),
                    EditEntry::Retype { index, kind, latency } => StructuralEdit::RetypeEdge {
                        index: *index,
                        kind: *kind,
                        latency: latency.as_ref().map_or(Ok(S::zero()), Num::value)?,
                    },
                })
            })
            .collect()
    }

    pub fn signal<S: Scalar>(&self) -> Result<Option<SignalKernel<S>>, ConfigError> {
        let Some(sig) = &self.signal else { return Ok(None) };
        let rows = sig
            .rows
            .iter()
            .map(|r| Ok((r.stage, JointState(r.state.clone()), r.probs.iter().map(Num::value).collect::<Result<_, _>>()?)))
            .collect::<Result<_, ConfigError>>()?;
        let kernel = SignalKernel { labels: sig.labels.clone(), rows };
        kernel.validate()?;
        Ok(Some(kernel))
    }

    /// Transfer table for `ug`, later entries overwriting earlier ones.
    pub fn transfers<S: Scalar>(&self, ug: &UniformizedGame<S>) -> Result<TransferTable<S>, ConfigError> {
        let mut resolved = Vec::with_capacity(self.transfers.len());
        for t in &self.transfers {
            let state = match &t.state {
                Some(js) => Some(ug.space().index(&JointState(js.clone()))?),
                None => None,
            };
            let profile = match &t.controls {
                Some(cs) => {
                    if cs.len() != ug.players() || cs.iter().enumerate().any(|(i, &c)| c >= ug.controls().count(i)) {
                        return Err(invalid(format!("transfer controls {cs:?} do not name a profile")));
                    }
                    Some(ug.controls().encode(cs))
                }
                None => None,
            };
            if let Some(k) = t.stage {
                if k >= ug.stages {
                    return Err(invalid(format!("transfer stage {k} beyond {} stages", ug.stages)));
                }
            }
            if let Some(p) = t.player {
                if p >= ug.players() {
                    return Err(ModelError::UnknownPlayer(p).into());
                }
            }
            resolved.push((t.stage, state, profile, t.player, t.value.value::<S>()?));
        }
        Ok(TransferTable::from_fn(ug, |k, s, u, i| {
            let base = ug.base_state(s);
            resolved
                .iter()
                .rev()
                .find(|(ks, ss, us, is, _)| {
                    ks.map_or(true, |x| x == k)
                        && ss.map_or(true, |x| x == base)
                        && us.map_or(true, |x| x == u)
                        && is.map_or(true, |x| x == i)
                })
                .map_or_else(S::zero, |e| e.4.clone())
        }))
    }

    /// Edits, then uniformization, then transfers.
    pub fn induce<S: Scalar>(&self, game: &GameSpec<S>, gamma: S) -> Result<UniformizedGame<S>, ConfigError> {
        self.signal::<S>()?;
        let (edited, _) = apply_structural(game, &self.edits()?)?;
        let ug = uniformize(&validate_game(edited)?, gamma)?;
        if self.transfers.is_empty() {
            return Ok(ug);
        }
        let table = self.transfers(&ug)?;
        Ok(ug.with_transfers(table)?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismFile {
    pub players: Vec<TypePlayer>,
    /// Named policies usable in the allocation table; `efficient` (the
    /// social optimum under the reports) is always available.
    #[serde(default)]
    pub policies: BTreeMap<String, NamedPolicy>,
    #[serde(default)]
    pub allocation: Vec<AllocationEntry>,
    #[serde(default)]
    pub transfers: Vec<MechTransferEntry>,
    #[serde(default)]
    pub pivot: Option<PivotEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypePlayer {
    #[serde(default)]
    pub prior: Option<Vec<Num>>,
    pub types: Vec<TypeEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeEntry {
    pub label: String,
    #[serde(default)]
    pub switch_cost: Vec<TypeSwitchCost>,
    #[serde(default)]
    pub control_cost: Vec<TypeControlCost>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeSwitchCost {
    pub from: PlayerState,
    pub to: PlayerState,
    pub cost: Num,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeControlCost {
    pub control: usize,
    pub cost: Num,
}

/// A stationary policy giving each player one control everywhere.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPolicy {
    pub constant: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationEntry {
    pub reports: Vec<String>,
    pub policy: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechTransferEntry {
    pub reports: Vec<String>,
    pub values: Vec<Num>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PivotEntry {
    /// `absent` (default) or `follow`.
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub null_controls: Option<Vec<usize>>,
}

impl MechanismFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn type_space<S: Scalar>(&self) -> Result<TypeSpace<S>, ConfigError> {
        let mut types = Vec::new();
        let mut prior = Vec::new();
        for p in &self.players {
            let list: Vec<TypeOverride<S>> = p
                .types
                .iter()
                .map(|t| {
                    Ok(TypeOverride {
                        label: t.label.clone(),
                        switch_cost: t
                            .switch_cost
                            .iter()
                            .map(|c| Ok((c.from, c.to, c.cost.value()?)))
                            .collect::<Result<_, ConfigError>>()?,
                        control_cost: t
                            .control_cost
                            .iter()
                            .map(|c| Ok((c.control, c.cost.value()?)))
                            .collect::<Result<_, ConfigError>>()?,
                    })
                })
                .collect::<Result<_, ConfigError>>()?;
            prior.push(match &p.prior {
                Some(v) => v.iter().map(Num::value).collect::<Result<_, _>>()?,
                None => vec![S::one() / S::from_i64(list.len().max(1) as i64); list.len()],
            });
            types.push(list);
        }
        Ok(TypeSpace::new(types, prior)?)
    }

    pub fn pivot_mode(&self, players: usize) -> Result<PivotMode, ConfigError> {
        let Some(p) = &self.pivot else { return Ok(PivotMode::absent(players)) };
        match p.mode.as_deref().unwrap_or("absent") {
            "absent" => Ok(PivotMode::Absent { null: p.null_controls.clone().unwrap_or_else(|| vec![0; players]) }),
            "follow" => Ok(PivotMode::Follow),
            other => Err(invalid(format!("unknown pivot mode {other:?}"))),
        }
    }

    fn report_code<S: Scalar>(&self, ts: &TypeSpace<S>, reports: &[String]) -> Result<usize, ConfigError> {
        if reports.len() != ts.players() {
            return Err(invalid(format!("report list {reports:?} has the wrong length")));
        }
        let mut profile = Vec::with_capacity(reports.len());
        for (i, r) in reports.iter().enumerate() {
            let t = ts
                .types(i)
                .iter()
                .position(|t| &t.label == r)
                .ok_or_else(|| invalid(format!("player {i} has no type {r:?}")))?;
            profile.push(t);
        }
        Ok(ts.encode(&profile))
    }

    /// The mechanism with time-zero transfers. Report profiles without an
    /// allocation entry use `efficient`; missing transfers are zero.
    pub fn mechanism<S: Scalar>(&self, base: &GameSpec<S>, gamma: &S) -> Result<MechanismSpec<S>, ConfigError> {
        let ts = self.type_space::<S>()?;
        let p = ts.profiles();
        let mut names = vec!["efficient".to_string(); p];
        for a in &self.allocation {
            names[self.report_code(&ts, &a.reports)?] = a.policy.clone();
        }
        let mut allocation = Vec::with_capacity(p);
        for (code, name) in names.iter().enumerate() {
            let game = validate_game(crate::mech::game_with_types(base, &ts, &ts.decode(code))?)?;
            let ug = uniformize(&game, gamma.clone())?;
            allocation.push(if name == "efficient" {
                social_optimum(&ug).0
            } else {
                let np = self.policies.get(name).ok_or_else(|| invalid(format!("unknown policy {name:?}")))?;
                if np.constant.len() != ug.players() {
                    return Err(invalid(format!("policy {name:?} has the wrong length")));
                }
                PolicyProfile::constant(&np.constant, ug.stages, ug.states())
            });
        }
        let mut transfers = vec![vec![S::zero(); ts.players()]; p];
        for t in &self.transfers {
            let code = self.report_code(&ts, &t.reports)?;
            if t.values.len() != ts.players() {
                return Err(invalid("transfer values need one entry per player"));
            }
            transfers[code] = t.values.iter().map(Num::value).collect::<Result<_, _>>()?;
        }
        Ok(MechanismSpec::new(&ts, allocation, MechTransfers::Initial(transfers))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    const GAME: &str = r#"
horizon = 1
initial = ["Sleep", "Sleep"]

[[players]]
states = ["Active", "Sleep"]
control_count = 2

[[players]]
states = ["Active", "Sleep"]
control_count = 2

[[rates]]
player = 0
from = "Sleep"
to = "Active"
control = 1
rate = "5/2"

[[switch_costs]]
player = 0
from = "Sleep"
to = "Active"
cost = 0.2

[[benefits]]
state = ["Active", "Sleep"]
player = 0
value = 1

[[edges]]
src = 0
dst = 1
weight = 2
"#;

    #[test]
    fn game_numbers_are_exact() {
        let g: GameSpec<Rational> = GameFile::parse(GAME).unwrap().build().unwrap();
        assert_eq!(*g.switch_cost(0, 1, 0), rat(1, 5));
        assert_eq!(g.rates.lambda_max, rat(5, 2));
        let s = g.space.index(&JointState(vec![PlayerState::Active, PlayerState::Sleep])).unwrap();
        assert_eq!(*g.benefit(s, 3, 0), rat(1, 1));
        assert_eq!(g.edges[0].weight, rat(2, 1));
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{GAME}\nmystery = 3\n");
        assert!(matches!(GameFile::parse(&bad), Err(ConfigError::Toml(_))));
        assert!(matches!(InterventionFile::parse("[extra]\nx = 1\n"), Err(ConfigError::Toml(_))));
    }

    #[test]
    fn intervention_entries_resolve() {
        let g: GameSpec<f64> = GameFile::parse(GAME).unwrap().build().unwrap();
        let iv = InterventionFile::parse(
            r#"
[[transfers]]
value = 1
[[transfers]]
state = ["Sleep", "Sleep"]
player = 1
value = "-1/2"
[[edits]]
op = "retype"
index = 0
kind = "DiscreteTransport"
"#,
        )
        .unwrap();
        let ug = iv.induce(&g, 4.0).unwrap();
        let t = ug.transfers().unwrap();
        let ss = ug.lift(ug.space().index(&JointState(vec![PlayerState::Sleep; 2])).unwrap());
        assert_eq!(*t.get(0, ss, 0, 1), -0.5);
        assert_eq!(*t.get(0, ss, 0, 0), 1.0);
        assert_eq!(ug.controls().count(0), 4);
    }

    #[test]
    fn signal_rows_validated() {
        let iv = InterventionFile::parse(
            "[signal]\nlabels = [\"a\", \"b\"]\n[[signal.rows]]\nstate = [\"Sleep\"]\nprobs = [0.5, 0.4]\n",
        )
        .unwrap();
        assert!(iv.signal::<f64>().is_err());
    }
}

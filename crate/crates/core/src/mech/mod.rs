//! Direct mechanisms over static private types: type spaces, the dynamic
//! pivot mechanism, and audits for incentive compatibility and budget
//! balance.

mod bilateral;
pub mod lp;

pub use bilateral::{
    bilateral_preset, impossibility_lp, ms_embedding, verify_feasible, BilateralInstance, LpOptions, TradeRow,
    TransferKeys,
};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{validate_game, GameSpec, ModelError, PlayerState};
use crate::scalar::Scalar;
use crate::solve::{joint_value, planner, social_optimum, PlannerControl, PolicyProfile, SolveError, ValueTable};
use crate::uniformize::{uniformize, UniformizeError, UniformizedGame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechError {
    #[error("type space has {found} players, game has {expected}")]
    PlayerCount { expected: usize, found: usize },
    #[error("player {player} has no types")]
    NoTypes { player: usize },
    #[error("player {player}: type {index} out of range")]
    TypeIndex { player: usize, index: usize },
    #[error("player {player}: prior {reason}")]
    Prior { player: usize, reason: String },
    #[error("player {player}, type {label:?}: {source}")]
    Override { player: usize, label: String, source: ModelError },
    #[error("null control {control} of player {player} has a positive exit rate or cost")]
    NullControl { player: usize, control: usize },
    #[error("game is outside the two-player binary-state class: {0}")]
    OutsideClass(String),
    #[error("mechanism has {found} allocations, type space has {expected} report profiles")]
    AllocationCount { expected: usize, found: usize },
    #[error("mechanism transfers have the wrong shape: {0}")]
    TransferShape(String),
    #[error("need 0 < kappa_L < kappa_H")]
    KappaOrder,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Uniformize(#[from] UniformizeError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// A type: overrides of one player's own cost parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeOverride<S> {
    pub label: String,
    pub switch_cost: Vec<(PlayerState, PlayerState, S)>,
    pub control_cost: Vec<(usize, S)>,
}

impl<S> TypeOverride<S> {
    pub fn named(label: impl Into<String>) -> Self {
        TypeOverride { label: label.into(), switch_cost: Vec::new(), control_cost: Vec::new() }
    }
}

/// Finite per-player type lists with independent priors. Report profiles
/// are encoded mixed-radix with player 0 most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeSpace<S> {
    types: Vec<Vec<TypeOverride<S>>>,
    prior: Vec<Vec<S>>,
}

impl<S: Scalar> TypeSpace<S> {
    pub fn new(types: Vec<Vec<TypeOverride<S>>>, prior: Vec<Vec<S>>) -> Result<Self, MechError> {
        if prior.len() != types.len() {
            return Err(MechError::PlayerCount { expected: types.len(), found: prior.len() });
        }
        for (player, (t, p)) in types.iter().zip(&prior).enumerate() {
            if t.is_empty() {
                return Err(MechError::NoTypes { player });
            }
            if p.len() != t.len() {
                return Err(MechError::Prior { player, reason: format!("has {} entries for {} types", p.len(), t.len()) });
            }
            if p.iter().any(|x| *x < S::zero()) {
                return Err(MechError::Prior { player, reason: "has a negative entry".into() });
            }
            let sum = p.iter().fold(S::zero(), |a, x| a + x.clone());
            let ok = if S::is_exact() { sum == S::one() } else { (sum.to_f64() - 1.0).abs() <= 1e-12 };
            if !ok {
                return Err(MechError::Prior { player, reason: format!("sums to {sum}") });
            }
        }
        Ok(TypeSpace { types, prior })
    }

    pub fn uniform(types: Vec<Vec<TypeOverride<S>>>) -> Result<Self, MechError> {
        let prior = types.iter().map(|t| vec![S::one() / S::from_i64(t.len().max(1) as i64); t.len()]).collect();
        Self::new(types, prior)
    }

    pub fn players(&self) -> usize {
        self.types.len()
    }

    pub fn count(&self, player: usize) -> usize {
        self.types[player].len()
    }

    pub fn types(&self, player: usize) -> &[TypeOverride<S>] {
        &self.types[player]
    }

    pub fn prior(&self, player: usize) -> &[S] {
        &self.prior[player]
    }

    pub fn profiles(&self) -> usize {
        self.types.iter().map(Vec::len).product()
    }

    pub fn encode(&self, profile: &[usize]) -> usize {
        profile.iter().zip(&self.types).fold(0, |acc, (&t, ts)| acc * ts.len() + t)
    }

    pub fn decode(&self, mut code: usize) -> Vec<usize> {
        let mut out = vec![0; self.types.len()];
        for i in (0..self.types.len()).rev() {
            out[i] = code % self.types[i].len();
            code /= self.types[i].len();
        }
        out
    }

    /// `profile` with player `i`'s entry replaced by `t`, encoded.
    pub fn replace(&self, code: usize, i: usize, t: usize) -> usize {
        let mut p = self.decode(code);
        p[i] = t;
        self.encode(&p)
    }

    pub fn label(&self, code: usize) -> String {
        let parts: Vec<&str> = self.decode(code).iter().enumerate().map(|(i, &t)| self.types[i][t].label.as_str()).collect();
        format!("({})", parts.join(","))
    }
}

/// The base game with every player's parameters replaced by those of its
/// type in `profile`.
pub fn game_with_types<S: Scalar>(base: &GameSpec<S>, ts: &TypeSpace<S>, profile: &[usize]) -> Result<GameSpec<S>, MechError> {
    if ts.players() != base.players() || profile.len() != base.players() {
        return Err(MechError::PlayerCount { expected: base.players(), found: ts.players().min(profile.len()) });
    }
    let mut game = base.clone();
    for (player, &t) in profile.iter().enumerate() {
        let ty = ts.types[player].get(t).ok_or(MechError::TypeIndex { player, index: t })?;
        let wrap = |source| MechError::Override { player, label: ty.label.clone(), source };
        for (from, to, v) in &ty.switch_cost {
            game.set_switch_cost(player, *from, *to, v.clone()).map_err(wrap)?;
        }
        for (c, v) in &ty.control_cost {
            game.set_control_cost(player, *c, v.clone()).map_err(wrap)?;
        }
    }
    Ok(game)
}

fn typed_game<S: Scalar>(base: &GameSpec<S>, ts: &TypeSpace<S>, code: usize, gamma: &S) -> Result<UniformizedGame<S>, MechError> {
    let game = validate_game(game_with_types(base, ts, &ts.decode(code))?)?;
    Ok(uniformize(&game, gamma.clone())?)
}

/// Transfers of a direct mechanism.
#[derive(Debug, Clone, PartialEq)]
pub enum MechTransfers<S> {
    /// One lump per `[report][player]`, paid at time zero.
    Initial(Vec<Vec<S>>),
    /// Lump owed from `(stage, state)` on, `[report][(k * states + s) * n + i]`
    /// for `k < stages`.
    Continuation { stages: usize, states: usize, values: Vec<Vec<S>> },
}

/// `(M, g, t)` with `M_i = Θ_i`. Allocation and transfers are keyed by the
/// current report profile and `(stage, state)` only, so history privacy
/// holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismSpec<S> {
    pub messages: Vec<Vec<String>>,
    pub allocation: Vec<PolicyProfile>,
    pub transfers: MechTransfers<S>,
}

impl<S: Scalar> MechanismSpec<S> {
    pub fn new(ts: &TypeSpace<S>, allocation: Vec<PolicyProfile>, transfers: MechTransfers<S>) -> Result<Self, MechError> {
        let messages = (0..ts.players()).map(|i| ts.types(i).iter().map(|t| t.label.clone()).collect()).collect();
        let spec = MechanismSpec { messages, allocation, transfers };
        spec.check(ts)?;
        Ok(spec)
    }

    fn check(&self, ts: &TypeSpace<S>) -> Result<(), MechError> {
        let p = ts.profiles();
        if self.allocation.len() != p {
            return Err(MechError::AllocationCount { expected: p, found: self.allocation.len() });
        }
        let n = ts.players();
        match &self.transfers {
            MechTransfers::Initial(v) => {
                if v.len() != p || v.iter().any(|r| r.len() != n) {
                    return Err(MechError::TransferShape(format!("expected {p} rows of {n}")));
                }
            }
            MechTransfers::Continuation { stages, states, values } => {
                if values.len() != p || values.iter().any(|r| r.len() != stages * states * n) {
                    return Err(MechError::TransferShape(format!("expected {p} rows of {}", stages * states * n)));
                }
            }
        }
        Ok(())
    }

    /// Always true: no field can be keyed by a history.
    pub fn history_private(&self) -> bool {
        true
    }

    /// Transfer to `i` under `report` evaluated at `(k, s)`.
    pub fn transfer(&self, report: usize, i: usize, k: usize, s: usize, players: usize) -> S {
        match &self.transfers {
            MechTransfers::Initial(v) if k == 0 => v[report][i].clone(),
            MechTransfers::Initial(_) => S::zero(),
            MechTransfers::Continuation { stages, states, values } => {
                if k < *stages {
                    values[report][(k * states + s) * players + i].clone()
                } else {
                    S::zero()
                }
            }
        }
    }
}

/// Where EPIC is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpicScope {
    /// Only at `(0, s0)`.
    Initial,
    /// At every `(k, s)`, `k < N`, reachable from `s0` under the truthful
    /// allocation.
    Reachable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpicEntry<S> {
    pub player: usize,
    pub truth: usize,
    pub misreport: usize,
    /// Minimum over checked points of truthful minus misreport payoff.
    pub diff: S,
    pub at: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpicReport<S> {
    pub entries: Vec<EpicEntry<S>>,
    pub min_diff: S,
    pub holds: bool,
    pub points_checked: usize,
}

/// Stage-state pairs reachable from the initial state under `profile`.
pub fn reachable<S: Scalar>(ug: &UniformizedGame<S>, profile: &PolicyProfile) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut current = BTreeSet::from([ug.initial()]);
    for k in 0..ug.stages {
        let mut next = BTreeSet::new();
        for &s in &current {
            out.push((k, s));
            let u = profile.joint(ug.controls(), k, s);
            next.extend(ug.row(s, u).iter().filter(|(_, p)| *p > S::zero()).map(|(t, _)| *t));
        }
        current = next;
    }
    out
}

/// Truthful continuation payoff minus misreport payoff for every player,
/// true type profile and alternative report.
pub fn check_epic<S: Scalar>(
    base: &GameSpec<S>,
    ts: &TypeSpace<S>,
    mech: &MechanismSpec<S>,
    gamma: &S,
    scope: EpicScope,
    tol: &S,
) -> Result<EpicReport<S>, MechError> {
    mech.check(ts)?;
    let n = ts.players();
    let p = ts.profiles();
    let mut entries = Vec::new();
    let mut points_checked = 0;
    for truth in 0..p {
        let ug = typed_game(base, ts, truth, gamma)?;
        let truthful = joint_value(&ug, &mech.allocation[truth])?;
        let points = match scope {
            EpicScope::Initial => vec![(0, ug.initial())],
            EpicScope::Reachable => reachable(&ug, &mech.allocation[truth]),
        };
        let own = ts.decode(truth);
        for i in 0..n {
            for alt in (0..ts.count(i)).filter(|&a| a != own[i]) {
                let report = ts.replace(truth, i, alt);
                let lying = joint_value(&ug, &mech.allocation[report])?;
                let mut worst: Option<(S, (usize, usize))> = None;
                for &(k, s) in &points {
                    let honest = truthful.get(i, k, s).clone() + mech.transfer(truth, i, k, s, n);
                    let dev = lying.get(i, k, s).clone() + mech.transfer(report, i, k, s, n);
                    let d = honest - dev;
                    if worst.as_ref().map_or(true, |(w, _)| d < *w) {
                        worst = Some((d, (k, s)));
                    }
                }
                points_checked += points.len();
                if let Some((diff, at)) = worst {
                    entries.push(EpicEntry { player: i, truth, misreport: alt, diff, at });
                }
            }
        }
    }
    let min_diff = entries.iter().map(|e| e.diff.clone()).reduce(S::min_of).unwrap_or_else(S::zero);
    let holds = min_diff >= -tol.clone();
    Ok(EpicReport { entries, min_diff, holds, points_checked })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetEntry<S> {
    pub report: usize,
    /// `None` for time-zero lumps.
    pub at: Option<(usize, usize)>,
    pub sum: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport<S> {
    pub entries: Vec<BudgetEntry<S>>,
    pub balanced: bool,
    /// Largest net payment to the players over all keys.
    pub max_deficit: S,
}

/// `Σ_i t_i` for every key of the transfer table.
pub fn check_budget<S: Scalar>(mech: &MechanismSpec<S>) -> BudgetReport<S> {
    let mut entries = Vec::new();
    match &mech.transfers {
        MechTransfers::Initial(v) => {
            for (report, row) in v.iter().enumerate() {
                entries.push(BudgetEntry { report, at: None, sum: row.iter().fold(S::zero(), |a, x| a + x.clone()) });
            }
        }
        MechTransfers::Continuation { stages, states, values } => {
            let n = mech.messages.len();
            for (report, row) in values.iter().enumerate() {
                for k in 0..*stages {
                    for s in 0..*states {
                        let base = (k * states + s) * n;
                        let sum = row[base..base + n].iter().fold(S::zero(), |a, x| a + x.clone());
                        entries.push(BudgetEntry { report, at: Some((k, s)), sum });
                    }
                }
            }
        }
    }
    let balanced = entries.iter().all(|e| e.sum == S::zero());
    let max_deficit = entries.iter().map(|e| e.sum.clone()).reduce(S::max_of).unwrap_or_else(S::zero);
    BudgetReport { entries, balanced, max_deficit }
}

/// How player `i` behaves in the "others only" planner problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PivotMode {
    /// `i` is frozen at its null control (one per player; zero rates and
    /// zero cost), the usual "i absent" reading.
    Absent { null: Vec<usize> },
    /// `i` keeps playing its part of the efficient policy.
    Follow,
}

impl PivotMode {
    pub fn absent(players: usize) -> Self {
        PivotMode::Absent { null: vec![0; players] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PivotOutcome<S> {
    pub reports: Vec<usize>,
    pub policy: PolicyProfile,
    /// `W*(0, s0)` under the reports.
    pub welfare: S,
    /// `J_i^{σ*}(0, s0)`.
    pub values: Vec<S>,
    /// `Σ_{j≠i} J_j^{σ*}`.
    pub others: Vec<S>,
    /// The supremum term, solved as a planner problem without `i`.
    pub without: Vec<S>,
    /// `T_i = others_i - without_i`, paid to `i` at time zero.
    pub transfers: Vec<S>,
    pub stages: usize,
    pub states: usize,
    /// Same construction from every `(k, s)`: `[(k * states + s) * n + i]`.
    pub continuation: Vec<S>,
}

fn check_null<S: Scalar>(ug: &UniformizedGame<S>, game: &GameSpec<S>, i: usize, c: usize) -> Result<(), MechError> {
    let bad = MechError::NullControl { player: i, control: c };
    if c >= ug.controls().count(i) || game.payoffs.control_cost[i][c] != S::zero() {
        return Err(bad);
    }
    let local = game.space.allowed(i).len();
    for s in 0..game.space.count() {
        for t in 0..local {
            if *game.rate(s, i, t, c) != S::zero() {
                return Err(bad);
            }
        }
    }
    Ok(())
}

/// Efficient policy for `reports` and the pivot transfers
/// `T_i = Σ_{j≠i} J_j^{σ*} - sup_{σ_-i} Σ_{j≠i} J_j`.
pub fn pivot_mechanism<S: Scalar>(
    base: &GameSpec<S>,
    ts: &TypeSpace<S>,
    reports: &[usize],
    gamma: &S,
    mode: &PivotMode,
) -> Result<PivotOutcome<S>, MechError> {
    let game = validate_game(game_with_types(base, ts, reports)?)?;
    let ug = uniformize(&game, gamma.clone())?;
    let n = ug.players();
    let (states, stages) = (ug.states(), ug.stages);
    let (policy, _) = social_optimum(&ug);
    let values = joint_value(&ug, &policy)?;
    let s0 = ug.initial();
    let mut continuation = vec![S::zero(); stages * states * n];
    let mut others = Vec::with_capacity(n);
    let mut without = Vec::with_capacity(n);
    let mut transfers = Vec::with_capacity(n);
    for i in 0..n {
        let objective: Vec<bool> = (0..n).map(|j| j != i).collect();
        let constraints: Vec<PlannerControl> = (0..n)
            .map(|j| {
                if j != i {
                    return Ok(PlannerControl::Free);
                }
                match mode {
                    PivotMode::Absent { null } => {
                        let c = null.get(i).copied().unwrap_or(0);
                        check_null(&ug, &game, i, c)?;
                        Ok(PlannerControl::Fixed(c))
                    }
                    PivotMode::Follow => Ok(PlannerControl::Follow(policy.player(i).clone())),
                }
            })
            .collect::<Result<_, MechError>>()?;
        let (_, h) = planner(&ug, &objective, &constraints);
        let others_at = |k: usize, s: usize| -> S {
            (0..n).filter(|&j| j != i).fold(S::zero(), |a, j| a + values.get(j, k, s).clone())
        };
        for k in 0..stages {
            for s in 0..states {
                continuation[(k * states + s) * n + i] = others_at(k, s) - h[k * states + s].clone();
            }
        }
        others.push(others_at(0, s0));
        without.push(h[s0].clone());
        transfers.push(others_at(0, s0) - h[s0].clone());
    }
    Ok(PivotOutcome {
        reports: reports.to_vec(),
        welfare: values.total(0, s0),
        values: (0..n).map(|i| values.get(i, 0, s0).clone()).collect(),
        policy,
        others,
        without,
        transfers,
        stages,
        states,
        continuation,
    })
}

/// Pivot outcomes for every report profile, in report-code order.
pub fn pivot_all<S: Scalar>(
    base: &GameSpec<S>,
    ts: &TypeSpace<S>,
    gamma: &S,
    mode: &PivotMode,
) -> Result<Vec<PivotOutcome<S>>, MechError> {
    (0..ts.profiles()).map(|code| pivot_mechanism(base, ts, &ts.decode(code), gamma, mode)).collect()
}

/// The pivot mechanism as a [`MechanismSpec`] with continuation transfers.
pub fn pivot_spec<S: Scalar>(ts: &TypeSpace<S>, outcomes: &[PivotOutcome<S>]) -> Result<MechanismSpec<S>, MechError> {
    let (stages, states) = outcomes.first().map(|o| (o.stages, o.states)).unwrap_or((0, 0));
    MechanismSpec::new(
        ts,
        outcomes.iter().map(|o| o.policy.clone()).collect(),
        MechTransfers::Continuation { stages, states, values: outcomes.iter().map(|o| o.continuation.clone()).collect() },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeficitReport<S> {
    /// `Σ_i T_i` per report profile.
    pub deficits: Vec<S>,
    pub welfare: Vec<S>,
    pub max_deficit: S,
    pub min_deficit: S,
    pub w_max: S,
    pub w_min: S,
    /// `n (W_max - W_min)`.
    pub bound: S,
    pub holds: bool,
}

pub fn pivot_deficit_bound<S: Scalar>(ts: &TypeSpace<S>, outcomes: &[PivotOutcome<S>]) -> DeficitReport<S> {
    let deficits: Vec<S> = outcomes.iter().map(|o| o.transfers.iter().fold(S::zero(), |a, t| a + t.clone())).collect();
    let welfare: Vec<S> = outcomes.iter().map(|o| o.welfare.clone()).collect();
    let max = |v: &[S]| v.iter().cloned().reduce(S::max_of).unwrap_or_else(S::zero);
    let min = |v: &[S]| v.iter().cloned().reduce(S::min_of).unwrap_or_else(S::zero);
    let (w_max, w_min) = (max(&welfare), min(&welfare));
    let bound = S::from_i64(ts.players() as i64) * (w_max.clone() - w_min.clone());
    let (max_deficit, min_deficit) = (max(&deficits), min(&deficits));
    let holds = min_deficit >= S::zero() && max_deficit <= bound;
    DeficitReport { deficits, welfare, max_deficit, min_deficit, w_max, w_min, bound, holds }
}

/// Joint values of `allocation[report]` in the game whose types are `truth`.
pub fn allocation_values<S: Scalar>(
    base: &GameSpec<S>,
    ts: &TypeSpace<S>,
    allocation: &[PolicyProfile],
    truth: usize,
    gamma: &S,
) -> Result<Vec<ValueTable<S>>, MechError> {
    let ug = typed_game(base, ts, truth, gamma)?;
    allocation.iter().map(|p| Ok(joint_value(&ug, p)?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rational};

    fn preset() -> (GameSpec<Rational>, TypeSpace<Rational>, Rational) {
        let gamma = Rational::from_integer(8.into());
        let (g, ts) = bilateral_preset(rat(1, 5), rat(3, 2), &gamma).unwrap();
        (g, ts, gamma)
    }

    #[test]
    fn empty_override_leaves_game_unchanged() {
        let (g, _, _) = preset();
        let ts = TypeSpace::uniform(vec![vec![TypeOverride::named("x")], vec![TypeOverride::named("y")]]).unwrap();
        assert_eq!(game_with_types(&g, &ts, &[0, 0]).unwrap(), g);
    }

    #[test]
    fn low_low_sets_both_costs() {
        let (g, ts, _) = preset();
        let typed = game_with_types(&g, &ts, &[0, 0]).unwrap();
        let (a, s) = (0, 1);
        assert_eq!(*typed.switch_cost(0, s, a), rat(1, 5));
        assert_eq!(*typed.switch_cost(1, s, a), rat(1, 5));
        for code in 0..ts.profiles() {
            validate_game(game_with_types(&g, &ts, &ts.decode(code)).unwrap()).unwrap();
        }
    }

    #[test]
    fn priors_must_be_exact() {
        let t = vec![vec![TypeOverride::<Rational>::named("a"), TypeOverride::named("b")]];
        assert!(TypeSpace::new(t.clone(), vec![vec![rat(1, 3), rat(1, 3)]]).is_err());
        assert!(TypeSpace::new(t, vec![vec![rat(1, 3), rat(2, 3)]]).is_ok());
    }

    #[test]
    fn report_codes_round_trip() {
        let (_, ts, _) = preset();
        for code in 0..4 {
            assert_eq!(ts.encode(&ts.decode(code)), code);
        }
        assert_eq!(ts.replace(0, 1, 1), 1);
        assert_eq!(ts.label(2), "(H,L)");
    }

    #[test]
    fn report_blind_mechanism_is_epic_with_zero_gaps() {
        let (g, ts, gamma) = preset();
        let ug = typed_game(&g, &ts, 0, &gamma).unwrap();
        let stay = PolicyProfile::constant(&[0, 0], ug.stages, ug.states());
        let mech = MechanismSpec::new(&ts, vec![stay; 4], MechTransfers::Initial(vec![vec![rat(1, 1), rat(-1, 1)]; 4])).unwrap();
        let r = check_epic(&g, &ts, &mech, &gamma, EpicScope::Reachable, &Rational::from_integer(0.into())).unwrap();
        assert!(r.holds);
        assert!(r.entries.iter().all(|e| e.diff == Rational::from_integer(0.into())));
        assert!(check_budget(&mech).balanced);
    }

    #[test]
    fn bonus_for_low_report_breaks_epic() {
        let (g, ts, gamma) = preset();
        let ug = typed_game(&g, &ts, 0, &gamma).unwrap();
        let stay = PolicyProfile::constant(&[0, 0], ug.stages, ug.states());
        let bonus = |code: usize| -> Vec<Rational> {
            ts.decode(code).iter().map(|&t| if t == 0 { rat(1, 1) } else { rat(0, 1) }).collect()
        };
        let mech = MechanismSpec::new(&ts, vec![stay; 4], MechTransfers::Initial((0..4).map(bonus).collect())).unwrap();
        let r = check_epic(&g, &ts, &mech, &gamma, EpicScope::Initial, &Rational::from_integer(0.into())).unwrap();
        assert!(!r.holds);
        assert_eq!(r.min_diff, rat(-1, 1));
        assert!(!check_budget(&mech).balanced);
    }

    #[test]
    fn opposite_transfers_balance() {
        let (_, ts, _) = preset();
        let p = PolicyProfile::constant(&[0, 0], 1, 4);
        let mech = MechanismSpec::new(&ts, vec![p; 4], MechTransfers::Initial(vec![vec![rat(3, 7), rat(-3, 7)]; 4])).unwrap();
        let b = check_budget(&mech);
        assert!(b.balanced);
        assert_eq!(b.max_deficit, rat(0, 1));
    }

    #[test]
    fn pivot_is_epic_and_deficit_bounded() {
        let (g, ts, gamma) = preset();
        let outcomes = pivot_all(&g, &ts, &gamma, &PivotMode::absent(2)).unwrap();
        let mech = pivot_spec(&ts, &outcomes).unwrap();
        let zero = Rational::from_integer(0.into());
        let r = check_epic(&g, &ts, &mech, &gamma, EpicScope::Reachable, &zero).unwrap();
        assert!(r.min_diff >= zero);
        let d = pivot_deficit_bound(&ts, &outcomes);
        assert!(d.holds);
        assert!(!check_budget(&mech).balanced);
        // without i the edge never pays, so each transfer is the other's value
        for o in &outcomes {
            assert_eq!(o.without, vec![zero.clone(), zero.clone()]);
            assert_eq!(o.transfers[0], o.values[1]);
        }
    }

    #[test]
    fn null_control_must_be_inert() {
        let (g, ts, gamma) = preset();
        let err = pivot_mechanism(&g, &ts, &[0, 0], &gamma, &PivotMode::Absent { null: vec![1, 1] }).unwrap_err();
        assert!(matches!(err, MechError::NullControl { player: 0, control: 1 }));
    }

    #[test]
    fn single_player_pivot_transfer_is_zero() {
        use crate::model::{ControlGrid, JointState};
        let mut g = GameSpec::<Rational>::empty(
            vec![vec![PlayerState::Active]],
            ControlGrid::indexed(&[1]),
            rat(1, 1),
            JointState(vec![PlayerState::Active]),
        )
        .unwrap();
        g.set_benefit(0, 0, 0, rat(1, 1));
        let ts = TypeSpace::uniform(vec![vec![TypeOverride::named("only")]]).unwrap();
        let o = pivot_mechanism(&g, &ts, &[0], &rat(2, 1), &PivotMode::absent(1)).unwrap();
        assert_eq!(o.transfers, vec![rat(0, 1)]);
        assert_eq!(o.welfare, rat(1, 1));
    }

    #[test]
    fn constant_welfare_gives_zero_bound() {
        use crate::model::{ControlGrid, JointState};
        let g = GameSpec::<Rational>::empty(
            vec![vec![PlayerState::Sleep], vec![PlayerState::Sleep]],
            ControlGrid::indexed(&[1, 1]),
            rat(1, 1),
            JointState(vec![PlayerState::Sleep; 2]),
        )
        .unwrap();
        let ty = |l: &str| TypeOverride::named(l);
        let ts = TypeSpace::uniform(vec![vec![ty("a"), ty("b")], vec![ty("c")]]).unwrap();
        let outcomes = pivot_all(&g, &ts, &rat(1, 1), &PivotMode::absent(2)).unwrap();
        let d = pivot_deficit_bound(&ts, &outcomes);
        assert_eq!(d.bound, rat(0, 1));
        assert_eq!(d.max_deficit, rat(0, 1));
        assert!(d.holds);
    }
}

//! Interventions `(transfers, structural edits, signal)`, the games they
//! induce, and the outcome sets used to compare edge semantics.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{
    validate_game, ControlGrid, EdgeKind, EdgeSpec, Game, GameSpec, JointState, ModelError, PlayerState, RateTable,
};
use crate::scalar::{rational_from_decimal_f64, Scalar};
use crate::solve::{enumerate_mpe, joint_value, verify_mpe, PlayerPolicy, PolicyProfile, SolveError};
use crate::uniformize::{uniformize, UniformizeError, UniformizedGame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterveneError {
    #[error("edit {edit}: edge index {index} out of range ({edges} edges)")]
    EdgeIndex { edit: usize, index: usize, edges: usize },
    #[error("signal kernel row {row} sums to {sum}, expected 1")]
    SignalRow { row: usize, sum: f64 },
    #[error("signal kernel row {row} has {found} probabilities for {expected} labels")]
    SignalWidth { row: usize, expected: usize, found: usize },
    #[error("parameter {0} must be positive")]
    Parameter(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Uniformize(#[from] UniformizeError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Stage-indexed transfer table `t_i(k, s, u)` in payoff units per unit
/// time, with its ∞-norm cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferTable<S> {
    stages: usize,
    states: usize,
    profiles: usize,
    players: usize,
    data: Vec<S>,
    norm: S,
}

impl<S: Scalar> TransferTable<S> {
    pub fn zeros(stages: usize, states: usize, profiles: usize, players: usize) -> Self {
        TransferTable {
            stages,
            states,
            profiles,
            players,
            data: vec![S::zero(); stages * states * profiles * players],
            norm: S::zero(),
        }
    }

    /// Zero table shaped for `ug`.
    pub fn zeros_for(ug: &UniformizedGame<S>) -> Self {
        Self::zeros(ug.stages, ug.states(), ug.profiles(), ug.players())
    }

    /// Table filled from `f(k, s, u, i)`.
    pub fn from_fn(ug: &UniformizedGame<S>, mut f: impl FnMut(usize, usize, usize, usize) -> S) -> Self {
        let (stages, states, profiles, players) = (ug.stages, ug.states(), ug.profiles(), ug.players());
        let mut data = Vec::with_capacity(stages * states * profiles * players);
        for k in 0..stages {
            for s in 0..states {
                for u in 0..profiles {
                    for i in 0..players {
                        data.push(f(k, s, u, i));
                    }
                }
            }
        }
        let norm = data.iter().map(|v| v.abs_val()).fold(S::zero(), S::max_of);
        TransferTable { stages, states, profiles, players, data, norm }
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.stages, self.states, self.profiles, self.players)
    }

    pub fn get(&self, k: usize, s: usize, u: usize, i: usize) -> &S {
        &self.data[((k * self.states + s) * self.profiles + u) * self.players + i]
    }

    /// `‖t‖∞ = max_i sup_{k,s,u} |t_i(k,s,u)|`.
    pub fn norm(&self) -> &S {
        &self.norm
    }

    pub fn values(&self) -> &[S] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StructuralEdit<S> {
    DeleteEdge(usize),
    AddEdge(EdgeSpec<S>),
    RetypeEdge { index: usize, kind: EdgeKind, latency: S },
}

/// Public signal kernel `(stage, joint state) -> Δ(Z)`. Stored and validated
/// only; no solver consumes it.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalKernel<S> {
    pub labels: Vec<String>,
    /// `(stage or every stage, joint state, probabilities over labels)`.
    pub rows: Vec<(Option<usize>, JointState, Vec<S>)>,
}

impl<S: Scalar> SignalKernel<S> {
    pub fn validate(&self) -> Result<(), InterveneError> {
        for (row, (_, _, probs)) in self.rows.iter().enumerate() {
            if probs.len() != self.labels.len() {
                return Err(InterveneError::SignalWidth { row, expected: self.labels.len(), found: probs.len() });
            }
            let sum = probs.iter().fold(S::zero(), |a, p| a + p.clone()).to_f64();
            if (sum - 1.0).abs() > 1e-12 || probs.iter().any(|p| *p < S::zero()) {
                return Err(InterveneError::SignalRow { row, sum });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intervention<S> {
    pub transfers: Option<TransferTable<S>>,
    pub edits: Vec<StructuralEdit<S>>,
    pub signal: Option<SignalKernel<S>>,
}

impl<S: Scalar> Default for Intervention<S> {
    fn default() -> Self {
        Intervention { transfers: None, edits: Vec::new(), signal: None }
    }
}

impl<S: Scalar> Intervention<S> {
    /// Builds the induced uniformized game: edits first, then transfers on
    /// the edited game's state and control spaces.
    pub fn induce(&self, game: &GameSpec<S>, gamma: S) -> Result<UniformizedGame<S>, InterveneError> {
        if let Some(sig) = &self.signal {
            sig.validate()?;
        }
        let (edited, _) = apply_structural(game, &self.edits)?;
        let ug = uniformize(&validate_game(edited)?, gamma)?;
        match &self.transfers {
            Some(t) => Ok(ug.with_transfers(t.clone())?),
            None => Ok(ug),
        }
    }
}

/// Adds `t_i(k,s,u)/gamma` to every stage reward; dynamics are untouched.
pub fn apply_transfers<S: Scalar>(ug: &UniformizedGame<S>, transfers: &TransferTable<S>) -> Result<UniformizedGame<S>, InterveneError> {
    Ok(ug.with_transfers(transfers.clone())?)
}

/// How a player's control indices moved when a send coordinate was appended:
/// old control `c` became `new_of_old[c][send]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlRemap {
    pub player: usize,
    pub new_of_old: Vec<[usize; 2]>,
}

/// Applies `edits` in order. Retyping an edge to discrete transport appends
/// a send coordinate to the source's control points (each old point `p`
/// becomes `(p, 0)` and `(p, 1)`), with rates and costs copied from `p`.
pub fn apply_structural<S: Scalar>(
    spec: &GameSpec<S>,
    edits: &[StructuralEdit<S>],
) -> Result<(GameSpec<S>, Vec<ControlRemap>), InterveneError> {
    let mut game = spec.clone();
    let mut remaps = Vec::new();
    for (edit, e) in edits.iter().enumerate() {
        let check = |index: usize, edges: usize| {
            if index < edges {
                Ok(())
            } else {
                Err(InterveneError::EdgeIndex { edit, index, edges })
            }
        };
        match e {
            StructuralEdit::DeleteEdge(index) => {
                check(*index, game.edges.len())?;
                game.edges.remove(*index);
            }
            StructuralEdit::AddEdge(edge) => game.edges.push(edge.clone()),
            StructuralEdit::RetypeEdge { index, kind, latency } => {
                check(*index, game.edges.len())?;
                let current = game.edges[*index].kind;
                if current == *kind {
                    log::warn!("edit {edit}: edge {index} already has kind {kind:?}; ignored");
                    continue;
                }
                game.edges[*index].kind = *kind;
                game.edges[*index].latency = latency.clone();
                if *kind == EdgeKind::DiscreteTransport && game.edges[*index].send_coord.is_none() {
                    let src = game.edges[*index].src;
                    let (augmented, remap) = append_send_coordinate(&game, src)?;
                    game = augmented;
                    game.edges[*index].send_coord = Some(game.controls.dim(src) - 1);
                    remaps.push(remap);
                }
            }
        }
    }
    Ok((game, remaps))
}

fn append_send_coordinate<S: Scalar>(game: &GameSpec<S>, player: usize) -> Result<(GameSpec<S>, ControlRemap), ModelError> {
    let old = &game.controls;
    let mut points = Vec::new();
    for i in 0..old.players() {
        if i == player {
            let pts = old
                .points(i)
                .iter()
                .flat_map(|p| {
                    let mut off = p.clone();
                    off.push(0.0);
                    let mut on = p.clone();
                    on.push(1.0);
                    [off, on]
                })
                .collect();
            points.push(pts);
        } else {
            points.push(old.points(i).to_vec());
        }
    }
    let grid = ControlGrid::new(points)?;
    let old_of = |i: usize, c: usize| if i == player { c / 2 } else { c };
    let out = remap_controls(game, grid, old_of)?;
    let new_of_old = (0..old.count(player)).map(|c| [2 * c, 2 * c + 1]).collect();
    Ok((out, ControlRemap { player, new_of_old }))
}

/// Rebuilds every control-indexed table for a new grid, reading each new
/// control's entries from the old control `old_of(player, new)`.
fn remap_controls<S: Scalar>(
    game: &GameSpec<S>,
    grid: ControlGrid,
    old_of: impl Fn(usize, usize) -> usize,
) -> Result<GameSpec<S>, ModelError> {
    let n = game.players();
    let allowed: Vec<Vec<PlayerState>> = (0..n).map(|i| game.space.allowed(i).to_vec()).collect();
    let mut out = GameSpec::empty(allowed, grid.clone(), game.horizon.clone(), game.initial.clone())?;
    out.rates = RateTable::zeros(&out.space, &grid, game.rates.lambda_max.clone());
    for s in 0..game.space.count() {
        for i in 0..n {
            for t in 0..game.space.allowed(i).len() {
                if t == game.space.local(s, i) {
                    continue;
                }
                let to = game.space.allowed(i)[t];
                for c in 0..grid.count(i) {
                    out.set_rate(s, i, to, c, game.rate(s, i, t, old_of(i, c)).clone())?;
                }
            }
        }
        for u in 0..grid.profiles() {
            let old_controls: Vec<usize> = (0..n).map(|i| old_of(i, grid.control(u, i))).collect();
            let old_u = game.controls.encode(&old_controls);
            for i in 0..n {
                out.set_benefit(s, u, i, game.benefit(s, old_u, i).clone());
            }
        }
        for i in 0..n {
            out.set_terminal(s, i, game.terminal(s, i).clone());
        }
    }
    for i in 0..n {
        for c in 0..grid.count(i) {
            out.set_control_cost(i, c, game.payoffs.control_cost[i][old_of(i, c)].clone())?;
        }
    }
    out.payoffs.switch_cost = game.payoffs.switch_cost.clone();
    out.edges = game.edges.clone();
    Ok(out)
}

/// `σ^sq ∉ Eq(Γ^I)`.
pub fn breaks_inertia<S: Scalar>(induced: &UniformizedGame<S>, sq: &PolicyProfile, tol: S) -> Result<bool, InterveneError> {
    Ok(!verify_mpe(induced, sq, tol)?.is_mpe)
}

/// `σ* ∈ Eq(Γ^I)` and `σ^sq ∉ Eq(Γ^I)`.
pub fn implements<S: Scalar>(
    induced: &UniformizedGame<S>,
    target: &PolicyProfile,
    sq: &PolicyProfile,
    tol: S,
) -> Result<bool, InterveneError> {
    if target == sq {
        return Ok(false);
    }
    let target_ok = verify_mpe(induced, target, tol.clone())?.is_mpe;
    Ok(target_ok && breaks_inertia(induced, sq, tol)?)
}

/// Parameters of the two-player family separating bounded transfers from a
/// single edge retype.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceFamily {
    pub budget: f64,
    pub horizon: f64,
    pub gamma: f64,
    /// Per-player benefit rate of the edge while admissible.
    pub weight: f64,
    pub latency: f64,
    /// Switching rate of the `switch` control; defaults to `gamma / 2`, the
    /// largest rate for which both players may switch at once under `gamma`.
    pub switch_rate: Option<f64>,
}

impl DominanceFamily {
    pub fn new(budget: f64, horizon: f64, gamma: f64) -> Self {
        DominanceFamily { budget, horizon, gamma, weight: 1.0, latency: 0.0, switch_rate: None }
    }

    pub fn switching_cost(&self) -> f64 {
        self.budget + 1.0
    }

    /// `(Γ_C, Γ_D)`: states `{Active, Sleep}` for both players, controls
    /// `{stay, switch}`, one edge `0 -> 1`, `κ(S→A) = B + 1`, start `(S, S)`.
    /// `Γ_D` is `Γ_C` with the edge retyped to discrete transport.
    pub fn build<S: Scalar>(&self) -> Result<(GameSpec<S>, GameSpec<S>), InterveneError> {
        if self.budget <= 0.0 {
            return Err(InterveneError::Parameter("budget"));
        }
        if self.horizon <= 0.0 {
            return Err(InterveneError::Parameter("horizon"));
        }
        if self.gamma <= 0.0 {
            return Err(InterveneError::Parameter("gamma"));
        }
        let num = |v: f64| -> Result<S, InterveneError> {
            rational_from_decimal_f64(v)
                .map(|r| S::from_rational(&r))
                .map_err(|_| InterveneError::Parameter("finite value"))
        };
        use PlayerState::{Active, Sleep};
        let rate = num(self.switch_rate.unwrap_or(self.gamma / 2.0))?;
        let mut c = GameSpec::empty(
            vec![vec![Active, Sleep], vec![Active, Sleep]],
            ControlGrid::indexed(&[2, 2]),
            num(self.horizon)?,
            JointState(vec![Sleep, Sleep]),
        )?;
        c.rates.lambda_max = rate.clone() + rate.clone();
        for i in 0..2 {
            c.set_rate_from(i, Sleep, Active, 1, rate.clone())?;
            c.set_rate_from(i, Active, Sleep, 1, rate.clone())?;
            c.set_switch_cost(i, Sleep, Active, num(self.switching_cost())?)?;
        }
        let latency = num(self.latency)?;
        c.edges.push(EdgeSpec {
            src: 0,
            dst: 1,
            kind: EdgeKind::ContinuousFlow,
            latency: latency.clone(),
            weight: num(self.weight)?,
            send_coord: None,
        });
        let (d, _) = apply_structural(
            &c,
            &[StructuralEdit::RetypeEdge { index: 0, kind: EdgeKind::DiscreteTransport, latency }],
        )?;
        Ok((c, d))
    }
}

/// Convenience wrapper: validated `(Γ_C, Γ_D)` for budget `B`, horizon `T`.
pub fn dominance_family<S: Scalar>(budget: f64, horizon: f64, gamma: f64) -> Result<(Game<S>, Game<S>), InterveneError> {
    let (c, d) = DominanceFamily::new(budget, horizon, gamma).build()?;
    Ok((validate_game(c)?, validate_game(d)?))
}

/// The status-quo profile of the family: nobody ever switches.
pub fn stay_profile<S: Scalar>(ug: &UniformizedGame<S>) -> PolicyProfile {
    PolicyProfile::constant(&vec![0; ug.players()], ug.stages, ug.states())
}

/// Embeds a profile of `Γ_C` into `Γ_D`: token flags are ignored and every
/// remapped player requests a send exactly while Active.
pub fn embed_profile<S: Scalar>(
    ug_c: &UniformizedGame<S>,
    ug_d: &UniformizedGame<S>,
    profile: &PolicyProfile,
    remaps: &[ControlRemap],
) -> PolicyProfile {
    let states = ug_d.states();
    let map = |i: usize, k: usize, s_d: usize| {
        let s_c = ug_c.lift(ug_d.base_state(s_d));
        let c = profile.control(i, k, s_c);
        match remaps.iter().find(|r| r.player == i) {
            Some(r) => r.new_of_old[c][usize::from(ug_d.player_state(s_d, i) == PlayerState::Active)],
            None => c,
        }
    };
    let players = (0..ug_d.players())
        .map(|i| {
            if profile.player(i).stationary {
                PlayerPolicy::stationary((0..states).map(|s| map(i, 0, s)).collect())
            } else {
                PlayerPolicy::staged(
                    (0..ug_d.stages).flat_map(|k| (0..states).map(move |s| (k, s))).map(|(k, s)| map(i, k, s)).collect(),
                )
            }
        })
        .collect();
    PolicyProfile::new(ug_d.stages, states, players)
}

/// Outcome of a profile from the initial state: the terminal joint state of
/// the most likely path (ties to the lowest state index) and expected total
/// welfare in units of 1e-9.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OutcomeSignature {
    pub terminal: JointState,
    pub welfare_nano: i64,
}

impl OutcomeSignature {
    pub fn welfare(&self) -> f64 {
        self.welfare_nano as f64 * 1e-9
    }
}

pub fn outcome_signature<S: Scalar>(ug: &UniformizedGame<S>, profile: &PolicyProfile) -> Result<OutcomeSignature, InterveneError> {
    let values = joint_value(ug, profile)?;
    let mut s = ug.initial();
    for k in 0..ug.stages {
        let u = profile.joint(ug.controls(), k, s);
        let mut best: Option<(usize, &S)> = None;
        for (t, p) in ug.row(s, u) {
            if best.map_or(true, |(_, b)| p > b) {
                best = Some((*t, p));
            }
        }
        s = best.map(|(t, _)| t).unwrap_or(s);
    }
    let welfare = values.total(0, ug.initial()).to_f64();
    Ok(OutcomeSignature { terminal: ug.joint_state(s), welfare_nano: (welfare * 1e9).round() as i64 })
}

/// Signatures of all stationary MPEs; the terminal state is reported on the
/// unaugmented state space, so sets from `Γ_C` and `Γ_D` are comparable.
pub fn implementable_set<S: Scalar>(ug: &UniformizedGame<S>, tol: S, cap: u128) -> Result<BTreeSet<OutcomeSignature>, InterveneError> {
    let mut out = BTreeSet::new();
    for (profile, _) in enumerate_mpe(ug, tol, cap)? {
        out.insert(outcome_signature(ug, &profile)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solve::{verify_mpe, DEFAULT_ENUMERATION_CAP};

    fn family(gamma: f64) -> (Game<f64>, Game<f64>) {
        dominance_family(10.0, 1.0, gamma).unwrap()
    }

    #[test]
    fn family_switching_cost_is_budget_plus_one() {
        let (c, d) = family(20.0);
        let s = c.space.index(&JointState(vec![PlayerState::Sleep, PlayerState::Sleep])).unwrap();
        let a = c.space.local_index(0, PlayerState::Active).unwrap();
        let sl = c.space.local_index(0, PlayerState::Sleep).unwrap();
        assert_eq!(*c.switch_cost(0, sl, a), 11.0);
        assert_eq!(*c.switch_cost(1, a, sl), 0.0);
        assert_eq!(c.edges[0].kind, EdgeKind::ContinuousFlow);
        assert_eq!(d.edges[0].kind, EdgeKind::DiscreteTransport);
        assert_eq!(d.controls.count(0), 4);
        assert_eq!(d.controls.count(1), 2);
        assert_eq!(*c.benefit(s, 0, 0), 0.0);
    }

    #[test]
    fn zero_transfers_leave_values_unchanged() {
        let (c, _) = family(20.0);
        let ug = uniformize(&c, 20.0).unwrap();
        let induced = apply_transfers(&ug, &TransferTable::zeros_for(&ug)).unwrap();
        let p = stay_profile(&ug);
        assert_eq!(joint_value(&ug, &p).unwrap(), joint_value(&induced, &p).unwrap());
        assert_eq!(ug.transition_table(), induced.transition_table());
    }

    #[test]
    fn constant_transfer_shifts_by_remaining_time() {
        let (c, _) = family(20.0);
        let ug = uniformize(&c, 20.0).unwrap();
        let table = TransferTable::from_fn(&ug, |_, _, _, i| if i == 0 { 0.5 } else { 0.0 });
        let induced = apply_transfers(&ug, &table).unwrap();
        let p = stay_profile(&ug);
        let base = joint_value(&ug, &p).unwrap();
        let moved = joint_value(&induced, &p).unwrap();
        for k in 0..=ug.stages {
            for s in 0..ug.states() {
                let expect = base.get(0, k, s) + 0.5 * (ug.stages - k) as f64 / 20.0;
                assert!((moved.get(0, k, s) - expect).abs() < 1e-12);
                assert_eq!(moved.get(1, k, s), base.get(1, k, s));
            }
        }
        assert_eq!(
            verify_mpe(&ug, &p, 1e-9).unwrap().is_mpe,
            verify_mpe(&induced, &p, 1e-9).unwrap().is_mpe
        );
    }

    #[test]
    fn delete_only_edge_removes_edge_benefit() {
        let (c, _) = family(20.0);
        let (g, _) = apply_structural(c.spec(), &[StructuralEdit::DeleteEdge(0)]).unwrap();
        for s in 0..g.space.count() {
            assert_eq!(g.benefit_rate(s, 0, None).unwrap(), vec![0.0, 0.0]);
        }
        assert!(matches!(
            apply_structural(c.spec(), &[StructuralEdit::DeleteEdge(3)]),
            Err(InterveneError::EdgeIndex { index: 3, .. })
        ));
    }

    #[test]
    fn add_then_delete_is_identity() {
        let (c, _) = family(20.0);
        let extra = EdgeSpec::continuous(1, 0, 2.0);
        let (g, _) = apply_structural(c.spec(), &[StructuralEdit::AddEdge(extra), StructuralEdit::DeleteEdge(1)]).unwrap();
        assert_eq!(&g, c.spec());
    }

    #[test]
    fn edits_compose_sequentially() {
        let (c, _) = family(20.0);
        let e1 = StructuralEdit::AddEdge(EdgeSpec::continuous(1, 0, 2.0));
        let e2 = StructuralEdit::RetypeEdge { index: 0, kind: EdgeKind::DiscreteTransport, latency: 0.0 };
        let (both, _) = apply_structural(c.spec(), &[e1.clone(), e2.clone()]).unwrap();
        let (first, _) = apply_structural(c.spec(), &[e1]).unwrap();
        let (second, _) = apply_structural(&first, &[e2]).unwrap();
        assert_eq!(both, second);
    }

    #[test]
    fn identity_intervention_does_not_break_inertia() {
        let (c, _) = family(20.0);
        let ug = Intervention::default().induce(c.spec(), 20.0).unwrap();
        let sq = stay_profile(&ug);
        assert!(!breaks_inertia(&ug, &sq, 1e-9).unwrap());
        assert!(!implements(&ug, &sq, &sq, 1e-9).unwrap());
    }

    #[test]
    fn embedded_profiles_have_equal_values() {
        let (c, _) = family(10.0);
        let (d, remaps) = apply_structural(
            c.spec(),
            &[StructuralEdit::RetypeEdge { index: 0, kind: EdgeKind::DiscreteTransport, latency: 0.0 }],
        )
        .unwrap();
        let ug_c = uniformize(&c, 10.0).unwrap();
        let ug_d = uniformize(&validate_game(d).unwrap(), 10.0).unwrap();
        for idx in [0u128, 5, 77, 255] {
            let p = crate::solve::stationary_candidate(&ug_c, idx);
            let q = embed_profile(&ug_c, &ug_d, &p, &remaps);
            assert_eq!(joint_value(&ug_c, &p).unwrap(), joint_value(&ug_d, &q).unwrap());
        }
    }

    #[test]
    fn signal_rows_must_be_distributions() {
        let k = SignalKernel::<f64> {
            labels: vec!["go".into(), "wait".into()],
            rows: vec![(None, JointState(vec![PlayerState::Sleep]), vec![0.5, 0.6])],
        };
        assert!(matches!(k.validate(), Err(InterveneError::SignalRow { row: 0, .. })));
    }

    #[test]
    fn empty_mpe_set_gives_empty_implementable_set() {
        // a tolerance below -1 rejects every profile
        let (c, _) = family(4.0);
        let ug = uniformize(&c, 4.0).unwrap();
        assert!(implementable_set(&ug, -1.0, DEFAULT_ENUMERATION_CAP).unwrap().is_empty());
    }
}

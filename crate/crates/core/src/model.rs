//! Domain types for finite living temporal games.
//!
//! A game is stored as dense tables over an enumerated joint state space and
//! an enumerated control-profile space. Edge admissibility is never stored;
//! [`GameSpec::benefit_rate`] gates edge weights from the current state, the
//! control profile and, for discrete-transport edges, the in-flight token.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlayerState {
    Active,
    Sleep,
    DeadIn,
    DeadOut,
    DeadBoth,
}

impl PlayerState {
    pub const ALL: [PlayerState; 5] = [
        PlayerState::Active,
        PlayerState::Sleep,
        PlayerState::DeadIn,
        PlayerState::DeadOut,
        PlayerState::DeadBoth,
    ];

    pub fn short(self) -> &'static str {
        match self {
            PlayerState::Active => "A",
            PlayerState::Sleep => "S",
            PlayerState::DeadIn => "DI",
            PlayerState::DeadOut => "DO",
            PlayerState::DeadBoth => "DB",
        }
    }
}

impl fmt::Display for PlayerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JointState(pub Vec<PlayerState>);

impl JointState {
    pub fn new(states: Vec<PlayerState>) -> Self {
        JointState(states)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for JointState {
    type Output = PlayerState;

    fn index(&self, i: usize) -> &PlayerState {
        &self.0[i]
    }
}

impl fmt::Display for JointState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, q) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", q.short())?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("game must have at least one player")]
    NoPlayers,
    #[error("player {player}: allowed state set is empty")]
    EmptyStateSet { player: usize },
    #[error("player {player}: state {state} listed twice")]
    DuplicateState { player: usize, state: PlayerState },
    #[error("player {player}: control grid is empty")]
    EmptyControls { player: usize },
    #[error("player {player}: control points {a} and {b} coincide")]
    DuplicateControl { player: usize, a: usize, b: usize },
    #[error("player {player}: control point {index} has {found} coordinates, expected {expected}")]
    ControlDimension { player: usize, index: usize, expected: usize, found: usize },
    #[error("ragged table {table}: expected {expected} entries, found {found}")]
    Ragged { table: &'static str, expected: usize, found: usize },
    #[error("negative rate {value} at state {state}, player {player}, target {target}, control {control}")]
    NegativeRate { state: usize, player: usize, target: PlayerState, control: usize, value: f64 },
    #[error("nonzero rate to the current state at state {state}, player {player}, control {control}")]
    DiagonalRate { state: usize, player: usize, control: usize },
    #[error("total exit rate {total} exceeds lambda_max {bound} at state {state}, profile {profile}")]
    RateBoundExceeded { state: usize, profile: usize, total: f64, bound: f64 },
    #[error("negative lambda_max")]
    NegativeRateBound,
    #[error("diagonal switching cost for player {player} at {state} must be 0")]
    DiagonalSwitchCost { player: usize, state: PlayerState },
    #[error("negative switching cost for player {player} from {from} to {to}")]
    NegativeSwitchCost { player: usize, from: PlayerState, to: PlayerState },
    #[error("non-finite value in table {table} at index {index}")]
    NonFinite { table: &'static str, index: usize },
    #[error("negative control cost for player {player}, control {control}")]
    NegativeControlCost { player: usize, control: usize },
    #[error("horizon must be positive")]
    NonPositiveHorizon,
    #[error("edge {index}: {reason}")]
    BadEdge { index: usize, reason: String },
    #[error("unknown state {0} for this game")]
    UnknownState(String),
    #[error("player {player} has no state {state}")]
    StateNotAllowed { player: usize, state: PlayerState },
    #[error("player index {0} out of range")]
    UnknownPlayer(usize),
    #[error("control index {control} out of range for player {player}")]
    UnknownControl { player: usize, control: usize },
    #[error("discrete-transport edges present but no token state supplied")]
    MissingTokens,
    #[error("token vector has {found} entries, game has {expected} discrete-transport edges")]
    TokenCount { expected: usize, found: usize },
}

/// Enumeration of joint states as mixed-radix numbers over each player's
/// allowed states; player 0 is the most significant digit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    allowed: Vec<Vec<PlayerState>>,
    strides: Vec<usize>,
    count: usize,
}

impl StateSpace {
    pub fn new(allowed: Vec<Vec<PlayerState>>) -> Result<Self, ModelError> {
        if allowed.is_empty() {
            return Err(ModelError::NoPlayers);
        }
        for (player, set) in allowed.iter().enumerate() {
            if set.is_empty() {
                return Err(ModelError::EmptyStateSet { player });
            }
            for (a, q) in set.iter().enumerate() {
                if set[..a].contains(q) {
                    return Err(ModelError::DuplicateState { player, state: *q });
                }
            }
        }
        let mut strides = vec![1; allowed.len()];
        for i in (0..allowed.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * allowed[i + 1].len();
        }
        let count = allowed.iter().map(Vec::len).product();
        Ok(StateSpace { allowed, strides, count })
    }

    pub fn players(&self) -> usize {
        self.allowed.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn allowed(&self, player: usize) -> &[PlayerState] {
        &self.allowed[player]
    }

    pub fn local_index(&self, player: usize, q: PlayerState) -> Option<usize> {
        self.allowed[player].iter().position(|&x| x == q)
    }

    pub fn local(&self, s: usize, player: usize) -> usize {
        (s / self.strides[player]) % self.allowed[player].len()
    }

    pub fn player_state(&self, s: usize, player: usize) -> PlayerState {
        self.allowed[player][self.local(s, player)]
    }

    /// Index of the joint state obtained by moving `player` to local state `to`.
    pub fn with_local(&self, s: usize, player: usize, to: usize) -> usize {
        s - self.local(s, player) * self.strides[player] + to * self.strides[player]
    }

    pub fn index(&self, js: &JointState) -> Result<usize, ModelError> {
        if js.len() != self.players() {
            return Err(ModelError::UnknownState(js.to_string()));
        }
        let mut idx = 0;
        for (player, &q) in js.0.iter().enumerate() {
            let l = self
                .local_index(player, q)
                .ok_or(ModelError::StateNotAllowed { player, state: q })?;
            idx += l * self.strides[player];
        }
        Ok(idx)
    }

    pub fn state(&self, s: usize) -> JointState {
        JointState((0..self.players()).map(|i| self.player_state(s, i)).collect())
    }
}

/// Finite control grid per player. Each point is a vector of unitless
/// coordinates; only a discrete-transport edge's send coordinate is
/// interpreted, everything else is identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlGrid {
    points: Vec<Vec<Vec<f64>>>,
    strides: Vec<usize>,
    profiles: usize,
}

impl ControlGrid {
    pub fn new(points: Vec<Vec<Vec<f64>>>) -> Result<Self, ModelError> {
        for (player, pts) in points.iter().enumerate() {
            if pts.is_empty() {
                return Err(ModelError::EmptyControls { player });
            }
            let dim = pts[0].len();
            for (index, p) in pts.iter().enumerate() {
                if p.len() != dim {
                    return Err(ModelError::ControlDimension { player, index, expected: dim, found: p.len() });
                }
                if let Some(a) = pts[..index].iter().position(|q| q == p) {
                    return Err(ModelError::DuplicateControl { player, a, b: index });
                }
            }
        }
        let mut strides = vec![1; points.len()];
        for i in (0..points.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * points[i + 1].len();
        }
        let profiles = points.iter().map(Vec::len).product();
        Ok(ControlGrid { points, strides, profiles })
    }

    /// One-coordinate grid `{0, 1, ..., k-1}` per player.
    pub fn indexed(counts: &[usize]) -> Self {
        let pts = counts
            .iter()
            .map(|&k| (0..k).map(|c| vec![c as f64]).collect())
            .collect();
        ControlGrid::new(pts).expect("indexed grid is always valid")
    }

    pub fn players(&self) -> usize {
        self.points.len()
    }

    pub fn count(&self, player: usize) -> usize {
        self.points[player].len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.points.iter().map(Vec::len).collect()
    }

    pub fn point(&self, player: usize, c: usize) -> &[f64] {
        &self.points[player][c]
    }

    pub fn points(&self, player: usize) -> &[Vec<f64>] {
        &self.points[player]
    }

    pub fn dim(&self, player: usize) -> usize {
        self.points[player][0].len()
    }

    pub fn profiles(&self) -> usize {
        self.profiles
    }

    pub fn control(&self, profile: usize, player: usize) -> usize {
        (profile / self.strides[player]) % self.points[player].len()
    }

    pub fn decode(&self, profile: usize) -> Vec<usize> {
        (0..self.players()).map(|i| self.control(profile, i)).collect()
    }

    pub fn encode(&self, controls: &[usize]) -> usize {
        controls.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn with_control(&self, profile: usize, player: usize, c: usize) -> usize {
        profile - self.control(profile, player) * self.strides[player] + c * self.strides[player]
    }
}

/// Sparse-in-spirit, dense-in-memory table of jump rates
/// `(joint state, player, target local state, own control) -> rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable<S> {
    data: Vec<S>,
    offsets: Vec<usize>,
    block: usize,
    pub lambda_max: S,
}

impl<S: Scalar> RateTable<S> {
    pub fn zeros(space: &StateSpace, controls: &ControlGrid, lambda_max: S) -> Self {
        let mut offsets = Vec::with_capacity(space.players());
        let mut block = 0;
        for i in 0..space.players() {
            offsets.push(block);
            block += space.allowed(i).len() * controls.count(i);
        }
        RateTable { data: vec![S::zero(); block * space.count()], offsets, block, lambda_max }
    }

    fn slot(&self, s: usize, player: usize, target: usize, c: usize, ncontrols: usize) -> usize {
        s * self.block + self.offsets[player] + target * ncontrols + c
    }

    pub fn expected_len(&self, states: usize) -> usize {
        self.block * states
    }

    pub fn raw(&self) -> &[S] {
        &self.data
    }

    pub(crate) fn from_parts(data: Vec<S>, offsets: Vec<usize>, block: usize, lambda_max: S) -> Self {
        RateTable { data, offsets, block, lambda_max }
    }

    pub(crate) fn parts(&self) -> (&[usize], usize) {
        (&self.offsets, self.block)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayoffSpec<S> {
    /// `[state][profile][player]`, per unit time, before edge gating.
    pub benefit: Vec<S>,
    /// `[player][control]`, per unit time.
    pub control_cost: Vec<Vec<S>>,
    /// `[player][from local][to local]`, lump sum per jump.
    pub switch_cost: Vec<Vec<Vec<S>>>,
    /// `[state][player]`.
    pub terminal: Vec<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    ContinuousFlow,
    DiscreteTransport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec<S> {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
    pub latency: S,
    /// Benefit per unit time credited to both endpoints while admissible.
    pub weight: S,
    /// Coordinate of the source's control vector that requests a send
    /// (value > 0.5). `None` means the source always sends while Active.
    pub send_coord: Option<usize>,
}

impl<S: Scalar> EdgeSpec<S> {
    pub fn continuous(src: usize, dst: usize, weight: S) -> Self {
        EdgeSpec { src, dst, kind: EdgeKind::ContinuousFlow, latency: S::zero(), weight, send_coord: None }
    }
}

/// In-flight state of one discrete-transport edge in the augmented state.
/// `length` is the transport time in stages; `length == 0` means same-stage
/// delivery. `remaining == 0` means nothing in flight and `remaining == 1`
/// means the token arrives this stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub remaining: u32,
    pub length: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec<S> {
    pub space: StateSpace,
    pub controls: ControlGrid,
    pub rates: RateTable<S>,
    pub payoffs: PayoffSpec<S>,
    pub edges: Vec<EdgeSpec<S>>,
    pub horizon: S,
    pub initial: JointState,
}

impl<S: Scalar> GameSpec<S> {
    /// Game with all rates, benefits and costs zero.
    pub fn empty(
        allowed: Vec<Vec<PlayerState>>,
        controls: ControlGrid,
        horizon: S,
        initial: JointState,
    ) -> Result<Self, ModelError> {
        let space = StateSpace::new(allowed)?;
        if controls.players() != space.players() {
            return Err(ModelError::Ragged {
                table: "controls",
                expected: space.players(),
                found: controls.players(),
            });
        }
        space.index(&initial)?;
        let n = space.players();
        let rates = RateTable::zeros(&space, &controls, S::zero());
        let payoffs = PayoffSpec {
            benefit: vec![S::zero(); space.count() * controls.profiles() * n],
            control_cost: (0..n).map(|i| vec![S::zero(); controls.count(i)]).collect(),
            switch_cost: (0..n)
                .map(|i| vec![vec![S::zero(); space.allowed(i).len()]; space.allowed(i).len()])
                .collect(),
            terminal: vec![S::zero(); space.count() * n],
        };
        Ok(GameSpec { space, controls, rates, payoffs, edges: Vec::new(), horizon, initial })
    }

    pub fn players(&self) -> usize {
        self.space.players()
    }

    fn local_of(&self, player: usize, q: PlayerState) -> Result<usize, ModelError> {
        if player >= self.players() {
            return Err(ModelError::UnknownPlayer(player));
        }
        self.space.local_index(player, q).ok_or(ModelError::StateNotAllowed { player, state: q })
    }

    fn check_control(&self, player: usize, control: usize) -> Result<(), ModelError> {
        if player >= self.players() {
            return Err(ModelError::UnknownPlayer(player));
        }
        if control >= self.controls.count(player) {
            return Err(ModelError::UnknownControl { player, control });
        }
        Ok(())
    }

    pub fn rate(&self, s: usize, player: usize, target: usize, control: usize) -> &S {
        let k = self.rates.slot(s, player, target, control, self.controls.count(player));
        &self.rates.data[k]
    }

    pub fn set_rate(&mut self, s: usize, player: usize, to: PlayerState, control: usize, rate: S) -> Result<(), ModelError> {
        let target = self.local_of(player, to)?;
        self.check_control(player, control)?;
        let k = self.rates.slot(s, player, target, control, self.controls.count(player));
        self.rates.data[k] = rate;
        Ok(())
    }

    /// Sets the rate for every joint state in which `player` sits in `from`.
    pub fn set_rate_from(
        &mut self,
        player: usize,
        from: PlayerState,
        to: PlayerState,
        control: usize,
        rate: S,
    ) -> Result<(), ModelError> {
        let from_l = self.local_of(player, from)?;
        for s in 0..self.space.count() {
            if self.space.local(s, player) == from_l {
                self.set_rate(s, player, to, control, rate.clone())?;
            }
        }
        Ok(())
    }

    pub fn benefit(&self, s: usize, profile: usize, player: usize) -> &S {
        let n = self.players();
        &self.payoffs.benefit[(s * self.controls.profiles() + profile) * n + player]
    }

    pub fn set_benefit(&mut self, s: usize, profile: usize, player: usize, value: S) {
        let n = self.players();
        let k = (s * self.controls.profiles() + profile) * n + player;
        self.payoffs.benefit[k] = value;
    }

    pub fn set_switch_cost(&mut self, player: usize, from: PlayerState, to: PlayerState, value: S) -> Result<(), ModelError> {
        let a = self.local_of(player, from)?;
        let b = self.local_of(player, to)?;
        self.payoffs.switch_cost[player][a][b] = value;
        Ok(())
    }

    pub fn switch_cost(&self, player: usize, from: usize, to: usize) -> &S {
        &self.payoffs.switch_cost[player][from][to]
    }

    pub fn set_control_cost(&mut self, player: usize, control: usize, value: S) -> Result<(), ModelError> {
        self.check_control(player, control)?;
        self.payoffs.control_cost[player][control] = value;
        Ok(())
    }

    pub fn terminal(&self, s: usize, player: usize) -> &S {
        &self.payoffs.terminal[s * self.players() + player]
    }

    pub fn set_terminal(&mut self, s: usize, player: usize, value: S) {
        let n = self.players();
        self.payoffs.terminal[s * n + player] = value;
    }

    /// Λ(s,u): total exit rate summed over players and genuine targets.
    pub fn exit_rate(&self, s: usize, profile: usize) -> S {
        let mut total = S::zero();
        for i in 0..self.players() {
            let c = self.controls.control(profile, i);
            let here = self.space.local(s, i);
            for t in 0..self.space.allowed(i).len() {
                if t != here {
                    total = total + self.rate(s, i, t, c).clone();
                }
            }
        }
        total
    }

    /// Indices of discrete-transport edges, in edge order.
    pub fn transport_edges(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edges[e].kind == EdgeKind::DiscreteTransport)
            .collect()
    }

    pub fn sends(&self, edge: usize, profile: usize) -> bool {
        let e = &self.edges[edge];
        match e.send_coord {
            None => true,
            Some(k) => {
                let c = self.controls.control(profile, e.src);
                self.controls.point(e.src, c)[k] > 0.5
            }
        }
    }

    /// b_i(s,u) for every player: the stored base benefit plus the weight of
    /// every admissible edge credited to its endpoints.
    ///
    /// Continuous-flow edges are admissible iff both endpoints are Active.
    /// A discrete-transport edge with a positive transport length pays
    /// `weight * length` (its accumulated flow, per unit time of the stage)
    /// iff its token arrives this stage and the destination is Active;
    /// with length 0 it pays `weight` iff the source is Active and sending
    /// and the destination is Active.
    pub fn benefit_rate(&self, s: usize, profile: usize, tokens: Option<&[Token]>) -> Result<Vec<S>, ModelError> {
        let n = self.players();
        let transport = self.transport_edges();
        if let Some(t) = tokens {
            if t.len() != transport.len() {
                return Err(ModelError::TokenCount { expected: transport.len(), found: t.len() });
            }
        } else if !transport.is_empty() {
            return Err(ModelError::MissingTokens);
        }
        let mut out: Vec<S> = (0..n).map(|i| self.benefit(s, profile, i).clone()).collect();
        let active = |i: usize| self.space.player_state(s, i) == PlayerState::Active;
        let mut ordinal = 0;
        for (e, edge) in self.edges.iter().enumerate() {
            let paid = match edge.kind {
                EdgeKind::ContinuousFlow => {
                    if active(edge.src) && active(edge.dst) {
                        Some(edge.weight.clone())
                    } else {
                        None
                    }
                }
                EdgeKind::DiscreteTransport => {
                    let tok = tokens.expect("checked above")[ordinal];
                    ordinal += 1;
                    if tok.length == 0 {
                        (active(edge.src) && self.sends(e, profile) && active(edge.dst)).then(|| edge.weight.clone())
                    } else if tok.remaining == 1 && active(edge.dst) {
                        Some(edge.weight.clone() * S::from_i64(tok.length as i64))
                    } else {
                        None
                    }
                }
            };
            if let Some(w) = paid {
                out[edge.src] = out[edge.src].clone() + w.clone();
                out[edge.dst] = out[edge.dst].clone() + w;
            }
        }
        Ok(out)
    }

    pub fn convert<T: Scalar>(&self) -> GameSpec<T> {
        let c = |v: &S| T::from_rational(&v.to_rational());
        let (offsets, block) = self.rates.parts();
        GameSpec {
            space: self.space.clone(),
            controls: self.controls.clone(),
            rates: RateTable::from_parts(
                self.rates.data.iter().map(c).collect(),
                offsets.to_vec(),
                block,
                c(&self.rates.lambda_max),
            ),
            payoffs: PayoffSpec {
                benefit: self.payoffs.benefit.iter().map(c).collect(),
                control_cost: self.payoffs.control_cost.iter().map(|r| r.iter().map(c).collect()).collect(),
                switch_cost: self
                    .payoffs
                    .switch_cost
                    .iter()
                    .map(|m| m.iter().map(|r| r.iter().map(c).collect()).collect())
                    .collect(),
                terminal: self.payoffs.terminal.iter().map(c).collect(),
            },
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    src: e.src,
                    dst: e.dst,
                    kind: e.kind,
                    latency: c(&e.latency),
                    weight: c(&e.weight),
                    send_coord: e.send_coord,
                })
                .collect(),
            horizon: c(&self.horizon),
            initial: self.initial.clone(),
        }
    }
}

/// A game whose invariants have been checked, with Λ(s,u) cached.
#[derive(Debug, Clone)]
pub struct Game<S> {
    spec: GameSpec<S>,
    exit: Vec<S>,
}

impl<S> std::ops::Deref for Game<S> {
    type Target = GameSpec<S>;

    fn deref(&self) -> &GameSpec<S> {
        &self.spec
    }
}

impl<S: Scalar> Game<S> {
    pub fn spec(&self) -> &GameSpec<S> {
        &self.spec
    }

    pub fn into_spec(self) -> GameSpec<S> {
        self.spec
    }

    pub fn cached_exit_rate(&self, s: usize, profile: usize) -> &S {
        &self.exit[s * self.controls.profiles() + profile]
    }
}

fn finite<S: Scalar>(table: &'static str, values: &[S]) -> Result<(), ModelError> {
    match values.iter().position(|v| !v.is_finite_val()) {
        Some(index) => Err(ModelError::NonFinite { table, index }),
        None => Ok(()),
    }
}

/// Checks every structural invariant and caches the exit rates.
pub fn validate_game<S: Scalar>(spec: GameSpec<S>) -> Result<Game<S>, ModelError> {
    let n = spec.players();
    let states = spec.space.count();
    let profiles = spec.controls.profiles();
    if spec.controls.players() != n {
        return Err(ModelError::Ragged { table: "controls", expected: n, found: spec.controls.players() });
    }
    if spec.horizon <= S::zero() {
        return Err(ModelError::NonPositiveHorizon);
    }
    spec.space.index(&spec.initial)?;
    let expect = |table, expected: usize, found: usize| {
        if expected == found {
            Ok(())
        } else {
            Err(ModelError::Ragged { table, expected, found })
        }
    };
    expect("rates", spec.rates.expected_len(states), spec.rates.data.len())?;
    expect("benefit", states * profiles * n, spec.payoffs.benefit.len())?;
    expect("terminal", states * n, spec.payoffs.terminal.len())?;
    expect("control_cost", n, spec.payoffs.control_cost.len())?;
    expect("switch_cost", n, spec.payoffs.switch_cost.len())?;
    for i in 0..n {
        expect("control_cost", spec.controls.count(i), spec.payoffs.control_cost[i].len())?;
        let q = spec.space.allowed(i).len();
        expect("switch_cost", q, spec.payoffs.switch_cost[i].len())?;
        for row in &spec.payoffs.switch_cost[i] {
            expect("switch_cost", q, row.len())?;
        }
    }
    finite("rates", &spec.rates.data)?;
    finite("benefit", &spec.payoffs.benefit)?;
    finite("terminal", &spec.payoffs.terminal)?;
    if spec.rates.lambda_max < S::zero() {
        return Err(ModelError::NegativeRateBound);
    }
    for i in 0..n {
        finite("control_cost", &spec.payoffs.control_cost[i])?;
        for (control, c) in spec.payoffs.control_cost[i].iter().enumerate() {
            if *c < S::zero() {
                return Err(ModelError::NegativeControlCost { player: i, control });
            }
        }
        let allowed = spec.space.allowed(i);
        for (a, row) in spec.payoffs.switch_cost[i].iter().enumerate() {
            finite("switch_cost", row)?;
            for (b, k) in row.iter().enumerate() {
                if a == b && *k != S::zero() {
                    return Err(ModelError::DiagonalSwitchCost { player: i, state: allowed[a] });
                }
                if *k < S::zero() {
                    return Err(ModelError::NegativeSwitchCost { player: i, from: allowed[a], to: allowed[b] });
                }
            }
        }
    }
    for s in 0..states {
        for i in 0..n {
            let here = spec.space.local(s, i);
            for t in 0..spec.space.allowed(i).len() {
                for c in 0..spec.controls.count(i) {
                    let r = spec.rate(s, i, t, c);
                    if *r < S::zero() {
                        return Err(ModelError::NegativeRate {
                            state: s,
                            player: i,
                            target: spec.space.allowed(i)[t],
                            control: c,
                            value: r.to_f64(),
                        });
                    }
                    if t == here && *r != S::zero() {
                        return Err(ModelError::DiagonalRate { state: s, player: i, control: c });
                    }
                }
            }
        }
    }
    for (index, e) in spec.edges.iter().enumerate() {
        let bad = |reason: &str| Err(ModelError::BadEdge { index, reason: reason.to_string() });
        if e.src >= n || e.dst >= n {
            return bad("endpoint out of range");
        }
        if e.src == e.dst {
            return bad("src equals dst");
        }
        if e.latency < S::zero() {
            return bad("negative latency");
        }
        if !e.weight.is_finite_val() || !e.latency.is_finite_val() {
            return bad("non-finite weight or latency");
        }
        if let Some(k) = e.send_coord {
            if k >= spec.controls.dim(e.src) {
                return bad("send coordinate outside the source's control vector");
            }
        }
    }
    let mut exit = Vec::with_capacity(states * profiles);
    for s in 0..states {
        for u in 0..profiles {
            let total = spec.exit_rate(s, u);
            if total > spec.rates.lambda_max {
                return Err(ModelError::RateBoundExceeded {
                    state: s,
                    profile: u,
                    total: total.to_f64(),
                    bound: spec.rates.lambda_max.to_f64(),
                });
            }
            exit.push(total);
        }
    }
    Ok(Game { spec, exit })
}

/// Piecewise record of one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub state: JointState,
    pub controls: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub player: usize,
    pub from: PlayerState,
    pub to: PlayerState,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
    pub jumps: Vec<Jump>,
    pub payoff: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use PlayerState::{Active as A, Sleep as S};

    fn two_player(weight: f64) -> GameSpec<f64> {
        let mut g = GameSpec::empty(
            vec![vec![A, S], vec![A, S]],
            ControlGrid::indexed(&[2, 2]),
            1.0,
            JointState(vec![S, S]),
        )
        .unwrap();
        g.edges.push(EdgeSpec::continuous(0, 1, weight));
        g
    }

    #[test]
    fn diagonal_switch_cost_rejected() {
        let mut g = two_player(1.0);
        g.set_switch_cost(1, S, S, 0.5).unwrap();
        assert!(matches!(validate_game(g), Err(ModelError::DiagonalSwitchCost { player: 1, state: S })));
    }

    #[test]
    fn zero_rates_valid_with_zero_exit() {
        let game = validate_game(two_player(1.0)).unwrap();
        for s in 0..4 {
            for u in 0..4 {
                assert_eq!(*game.cached_exit_rate(s, u), 0.0);
            }
        }
    }

    #[test]
    fn negative_rate_and_bound_errors() {
        let mut g = two_player(1.0);
        g.set_rate_from(0, S, A, 1, -1.0).unwrap();
        assert!(matches!(validate_game(g), Err(ModelError::NegativeRate { player: 0, .. })));

        let mut g = two_player(1.0);
        g.rates.lambda_max = 1.0;
        g.set_rate_from(0, S, A, 1, 2.0).unwrap();
        assert!(matches!(validate_game(g), Err(ModelError::RateBoundExceeded { .. })));
    }

    #[test]
    fn continuous_flow_gating() {
        let g = two_player(1.0);
        let aa = g.space.index(&JointState(vec![A, A])).unwrap();
        let as_ = g.space.index(&JointState(vec![A, S])).unwrap();
        assert_eq!(g.benefit_rate(aa, 0, None).unwrap(), vec![1.0, 1.0]);
        assert_eq!(g.benefit_rate(as_, 0, None).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn transport_without_token_pays_nothing() {
        let mut g = two_player(1.0);
        g.edges[0].kind = EdgeKind::DiscreteTransport;
        let aa = g.space.index(&JointState(vec![A, A])).unwrap();
        let idle = [Token { remaining: 0, length: 1 }];
        assert_eq!(g.benefit_rate(aa, 0, Some(&idle)).unwrap(), vec![0.0, 0.0]);
        assert_eq!(g.benefit_rate(aa, 0, None), Err(ModelError::MissingTokens));
        let arriving = [Token { remaining: 1, length: 3 }];
        assert_eq!(g.benefit_rate(aa, 0, Some(&arriving)).unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn edge_order_does_not_matter() {
        let mut g = two_player(1.0);
        g.edges.push(EdgeSpec::continuous(1, 0, 0.5));
        let mut h = g.clone();
        h.edges.reverse();
        for s in 0..4 {
            assert_eq!(g.benefit_rate(s, 0, None).unwrap(), h.benefit_rate(s, 0, None).unwrap());
        }
    }

    #[test]
    fn state_space_indexing_round_trips() {
        let sp = StateSpace::new(vec![vec![A, S], vec![S, A, PlayerState::DeadIn]]).unwrap();
        assert_eq!(sp.count(), 6);
        for s in 0..sp.count() {
            assert_eq!(sp.index(&sp.state(s)).unwrap(), s);
        }
        let s = sp.index(&JointState(vec![A, A])).unwrap();
        let moved = sp.with_local(s, 1, 2);
        assert_eq!(sp.state(moved), JointState(vec![A, PlayerState::DeadIn]));
    }
}

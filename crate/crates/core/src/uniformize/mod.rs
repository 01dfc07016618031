//! Reduction of the continuous-time game to a finite-horizon discrete-time
//! game with stage length `1/gamma`, and an exponential-clock simulator of
//! the original jump process used as an independent oracle.

mod simulate;

pub use simulate::{simulate, SimulationResult};

use thiserror::Error;

use crate::intervene::TransferTable;
use crate::model::{ControlGrid, Game, JointState, ModelError, PlayerState, StateSpace, Token};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UniformizeError {
    #[error("gamma must be positive")]
    NonPositiveGamma,
    #[error("gamma {gamma} is below lambda_max {lambda_max}")]
    GammaBelowRateBound { gamma: f64, lambda_max: f64 },
    #[error("transfer table covers {found} stages, game has {expected}")]
    TransferStages { expected: usize, found: usize },
    #[error("transfer table has shape {found:?}, expected {expected:?}")]
    TransferShape { expected: (usize, usize, usize), found: (usize, usize, usize) },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("simulation does not support discrete-transport edges with positive transport length (edge {edge})")]
    TransportInSimulation { edge: usize },
    #[error("simulation start time {t0} outside [0, {horizon})")]
    StartTime { t0: f64, horizon: f64 },
    #[error("policy profile does not match the game: {0}")]
    Policy(String),
}

/// Discrete-time equivalent of a living temporal game. States are the base
/// joint states augmented with one countdown per discrete-transport edge
/// whose transport length is at least one stage.
#[derive(Debug, Clone)]
pub struct UniformizedGame<S> {
    pub gamma: S,
    pub stages: usize,
    pub step: S,
    /// `stages / gamma`; equals the configured horizon unless `gamma * T`
    /// was not integral.
    pub horizon: S,
    pub horizon_rounded: bool,
    space: StateSpace,
    controls: ControlGrid,
    /// Transport length in stages for every discrete-transport edge, in edge order.
    token_lengths: Vec<u32>,
    /// Positions (into `token_lengths`) of edges that carry a countdown digit.
    token_digits: Vec<usize>,
    token_combos: usize,
    players: usize,
    states: usize,
    trans: Vec<Vec<(usize, S)>>,
    reward: Vec<S>,
    jump_cost: Vec<S>,
    terminal: Vec<S>,
    initial: usize,
    transfers: Option<TransferTable<S>>,
}

impl<S: Scalar> UniformizedGame<S> {
    pub fn players(&self) -> usize {
        self.players
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn profiles(&self) -> usize {
        self.controls.profiles()
    }

    pub fn controls(&self) -> &ControlGrid {
        &self.controls
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn token_lengths(&self) -> &[u32] {
        &self.token_lengths
    }

    pub fn is_augmented(&self) -> bool {
        self.token_combos > 1
    }

    pub fn base_state(&self, s: usize) -> usize {
        s / self.token_combos
    }

    /// Index of `(base, no token in flight)`.
    pub fn lift(&self, base: usize) -> usize {
        base * self.token_combos
    }

    pub fn player_state(&self, s: usize, player: usize) -> PlayerState {
        self.space.player_state(self.base_state(s), player)
    }

    pub fn joint_state(&self, s: usize) -> JointState {
        self.space.state(self.base_state(s))
    }

    /// Token vector (one entry per discrete-transport edge) at augmented state `s`.
    pub fn tokens(&self, s: usize) -> Vec<Token> {
        let mut code = s % self.token_combos;
        let mut out: Vec<Token> = self
            .token_lengths
            .iter()
            .map(|&length| Token { remaining: 0, length })
            .collect();
        for &d in self.token_digits.iter().rev() {
            let radix = self.token_lengths[d] as usize + 1;
            out[d].remaining = (code % radix) as u32;
            code /= radix;
        }
        out
    }

    fn encode_tokens(&self, tokens: &[Token]) -> usize {
        let mut code = 0;
        for &d in &self.token_digits {
            code = code * (self.token_lengths[d] as usize + 1) + tokens[d].remaining as usize;
        }
        code
    }

    pub fn state_label(&self, s: usize) -> String {
        let js = self.joint_state(s);
        if self.is_augmented() {
            let t: Vec<String> = self.tokens(s).iter().map(|t| t.remaining.to_string()).collect();
            format!("{js}|{}", t.join(","))
        } else {
            js.to_string()
        }
    }

    pub fn row(&self, s: usize, profile: usize) -> &[(usize, S)] {
        &self.trans[s * self.profiles() + profile]
    }

    /// Stage reward excluding transfers: `(b_i - c_i) / gamma`.
    pub fn base_reward(&self, s: usize, profile: usize, player: usize) -> &S {
        &self.reward[(s * self.profiles() + profile) * self.players + player]
    }

    /// Stage reward at stage `k`, including any transfer `t_i(k,s,u) / gamma`.
    pub fn reward(&self, k: usize, s: usize, profile: usize, player: usize) -> S {
        let base = self.base_reward(s, profile, player).clone();
        match &self.transfers {
            Some(t) => base + t.get(k, s, profile, player).clone() / self.gamma.clone(),
            None => base,
        }
    }

    /// Expected switching cost paid by `player` during one stage.
    pub fn jump_cost(&self, s: usize, profile: usize, player: usize) -> &S {
        &self.jump_cost[(s * self.profiles() + profile) * self.players + player]
    }

    pub fn terminal(&self, s: usize, player: usize) -> &S {
        &self.terminal[s * self.players + player]
    }

    pub fn transfers(&self) -> Option<&TransferTable<S>> {
        self.transfers.as_ref()
    }

    /// Remaining time `(N - k) / gamma` from stage `k`.
    pub fn remaining(&self, k: usize) -> S {
        S::from_i64((self.stages - k) as i64) / self.gamma.clone()
    }

    /// Induced game with transfers added to stage rewards; the transition
    /// kernel is shared unchanged.
    pub fn with_transfers(&self, table: TransferTable<S>) -> Result<Self, UniformizeError> {
        let (k, s, u, n) = table.dims();
        if k != self.stages {
            return Err(UniformizeError::TransferStages { expected: self.stages, found: k });
        }
        if (s, u, n) != (self.states, self.profiles(), self.players) {
            return Err(UniformizeError::TransferShape {
                expected: (self.states, self.profiles(), self.players),
                found: (s, u, n),
            });
        }
        let mut out = self.clone();
        out.transfers = Some(table);
        Ok(out)
    }

    /// Same game with transfers removed.
    pub fn without_transfers(&self) -> Self {
        let mut out = self.clone();
        out.transfers = None;
        out
    }

    /// Game whose only payoff is the transfer stream (no benefits, costs or
    /// terminal reward). Used to measure expected transfer integrals.
    pub fn transfers_only(&self, table: TransferTable<S>) -> Result<Self, UniformizeError> {
        let mut out = self.with_transfers(table)?;
        out.reward.iter_mut().for_each(|r| *r = S::zero());
        out.jump_cost.iter_mut().for_each(|r| *r = S::zero());
        out.terminal.iter_mut().for_each(|r| *r = S::zero());
        Ok(out)
    }

    pub fn transition_table(&self) -> &[Vec<(usize, S)>] {
        &self.trans
    }
}

/// Builds the uniformized game with rate `gamma`.
///
/// Jumps by player `i` to `q'` happen with probability `λ_i/gamma` per stage
/// and the remaining mass `1 - Λ/gamma` stays put; token countdowns advance
/// deterministically alongside.
pub fn uniformize<S: Scalar>(game: &Game<S>, gamma: S) -> Result<UniformizedGame<S>, UniformizeError> {
    if gamma <= S::zero() {
        return Err(UniformizeError::NonPositiveGamma);
    }
    if gamma < game.rates.lambda_max {
        return Err(UniformizeError::GammaBelowRateBound {
            gamma: gamma.to_f64(),
            lambda_max: game.rates.lambda_max.to_f64(),
        });
    }
    let n = game.players();
    let product = gamma.clone() * game.horizon.clone();
    let stages = product.ceil_usize();
    let horizon = S::from_i64(stages as i64) / gamma.clone();
    let horizon_rounded = S::from_i64(stages as i64) != product;
    let step = S::one() / gamma.clone();

    let transport = game.transport_edges();
    let token_lengths: Vec<u32> = transport
        .iter()
        .map(|&e| (game.edges[e].latency.clone() * gamma.clone()).ceil_usize() as u32)
        .collect();
    let token_digits: Vec<usize> = (0..token_lengths.len()).filter(|&d| token_lengths[d] >= 1).collect();
    let token_combos: usize = token_digits.iter().map(|&d| token_lengths[d] as usize + 1).product();

    let base_states = game.space.count();
    let states = base_states * token_combos;
    let profiles = game.controls.profiles();

    let mut ug = UniformizedGame {
        gamma: gamma.clone(),
        stages,
        step,
        horizon,
        horizon_rounded,
        space: game.space.clone(),
        controls: game.controls.clone(),
        token_lengths,
        token_digits,
        token_combos,
        players: n,
        states,
        trans: Vec::with_capacity(states * profiles),
        reward: Vec::with_capacity(states * profiles * n),
        jump_cost: Vec::with_capacity(states * profiles * n),
        terminal: Vec::with_capacity(states * n),
        initial: 0,
        transfers: None,
    };
    ug.initial = ug.lift(game.space.index(&game.initial)?);

    for s in 0..states {
        let base = ug.base_state(s);
        let tokens = ug.tokens(s);
        for u in 0..profiles {
            let next_tokens = advance_tokens(game, &transport, base, u, &tokens);
            let token_code = ug.encode_tokens(&next_tokens);
            let benefit = game.benefit_rate(base, u, Some(&tokens))?;
            let mut row: Vec<(usize, S)> = Vec::new();
            let mut stay = S::one();
            let mut costs = vec![S::zero(); n];
            for i in 0..n {
                let c = game.controls.control(u, i);
                let here = game.space.local(base, i);
                for t in 0..game.space.allowed(i).len() {
                    if t == here {
                        continue;
                    }
                    let rate = game.rate(base, i, t, c);
                    if *rate == S::zero() {
                        continue;
                    }
                    let p = rate.clone() / gamma.clone();
                    stay = stay - p.clone();
                    costs[i] = costs[i].clone() + p.clone() * game.switch_cost(i, here, t).clone();
                    let next_base = game.space.with_local(base, i, t);
                    row.push((next_base * token_combos + token_code, p));
                }
            }
            if stay != S::zero() {
                row.push((base * token_combos + token_code, stay));
            }
            row.sort_by_key(|&(next, _)| next);
            ug.trans.push(row);
            for i in 0..n {
                let c = game.controls.control(u, i);
                let r = (benefit[i].clone() - game.payoffs.control_cost[i][c].clone()) / gamma.clone();
                ug.reward.push(r);
            }
            ug.jump_cost.extend(costs);
        }
        for i in 0..n {
            ug.terminal.push(game.terminal(base, i).clone());
        }
    }
    Ok(ug)
}

fn advance_tokens<S: Scalar>(game: &Game<S>, transport: &[usize], base: usize, profile: usize, tokens: &[Token]) -> Vec<Token> {
    tokens
        .iter()
        .zip(transport)
        .map(|(tok, &e)| {
            if tok.length == 0 {
                return *tok;
            }
            let edge = &game.edges[e];
            let src_active = game.space.player_state(base, edge.src) == PlayerState::Active;
            let remaining = if tok.remaining <= 1 && src_active && game.sends(e, profile) {
                tok.length
            } else {
                tok.remaining.saturating_sub(1)
            };
            Token { remaining, length: tok.length }
        })
        .collect()
}

//! Exact finite-horizon dynamic programming on a [`UniformizedGame`].
//!
//! Values are indexed by `(player, stage, state)` with stage `N` holding the
//! terminal reward. All argmax choices break ties toward the lowest control
//! index.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::ControlGrid;
use crate::scalar::Scalar;
use crate::uniformize::UniformizedGame;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("policy covers {found:?} (stages, states, players), game has {expected:?}")]
    Dimension { expected: (usize, usize, usize), found: (usize, usize, usize) },
    #[error("player {player} uses control {control} outside its grid")]
    ControlRange { player: usize, control: usize },
    #[error("{count} stationary candidate profiles exceed the cap {cap}")]
    CapExceeded { count: u128, cap: u128 },
    #[error("player index {0} out of range")]
    UnknownPlayer(usize),
}

/// One player's Markov policy: a control index per `(stage, state)`, or per
/// state when stationary.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlayerPolicy {
    pub stationary: bool,
    choice: Vec<u32>,
}

impl PlayerPolicy {
    pub fn stationary(choice: Vec<usize>) -> Self {
        PlayerPolicy { stationary: true, choice: choice.into_iter().map(|c| c as u32).collect() }
    }

    /// `choice[k * states + s]`.
    pub fn staged(choice: Vec<usize>) -> Self {
        PlayerPolicy { stationary: false, choice: choice.into_iter().map(|c| c as u32).collect() }
    }

    pub fn control(&self, k: usize, s: usize, states: usize) -> usize {
        if self.stationary {
            self.choice[s] as usize
        } else {
            self.choice[k * states + s] as usize
        }
    }

    fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn raw(&self) -> Vec<usize> {
        self.choice.iter().map(|&c| c as usize).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolicyProfile {
    stages: usize,
    states: usize,
    players: Vec<PlayerPolicy>,
}

impl PolicyProfile {
    pub fn new(stages: usize, states: usize, players: Vec<PlayerPolicy>) -> Self {
        PolicyProfile { stages, states, players }
    }

    /// Every player `i` plays `controls[i]` at every stage and state.
    pub fn constant(controls: &[usize], stages: usize, states: usize) -> Self {
        let players = controls.iter().map(|&c| PlayerPolicy::stationary(vec![c; states])).collect();
        PolicyProfile { stages, states, players }
    }

    /// Stationary profile from a rule `(player, state) -> control`.
    pub fn stationary_from(players: usize, stages: usize, states: usize, rule: impl Fn(usize, usize) -> usize) -> Self {
        let players = (0..players)
            .map(|i| PlayerPolicy::stationary((0..states).map(|s| rule(i, s)).collect()))
            .collect();
        PolicyProfile { stages, states, players }
    }

    pub fn players(&self) -> usize {
        self.players.len()
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn is_stationary(&self) -> bool {
        self.players.iter().all(|p| p.stationary)
    }

    pub fn player(&self, i: usize) -> &PlayerPolicy {
        &self.players[i]
    }

    pub fn control(&self, i: usize, k: usize, s: usize) -> usize {
        self.players[i].control(k, s, self.states)
    }

    pub fn joint(&self, grid: &ControlGrid, k: usize, s: usize) -> usize {
        let mut u = 0;
        for i in 0..self.players.len() {
            u = grid.with_control(u, i, self.control(i, k, s));
        }
        u
    }

    pub fn with_player(&self, i: usize, policy: PlayerPolicy) -> Self {
        let mut out = self.clone();
        out.players[i] = policy;
        out
    }

    pub fn check<S: Scalar>(&self, ug: &UniformizedGame<S>) -> Result<(), SolveError> {
        let found = (self.stages, self.states, self.players());
        let expected = (ug.stages, ug.states(), ug.players());
        if found != expected {
            return Err(SolveError::Dimension { expected, found });
        }
        for (i, p) in self.players.iter().enumerate() {
            let want = if p.stationary { self.states } else { self.stages * self.states };
            if p.len() != want {
                return Err(SolveError::Dimension { expected, found });
            }
            if let Some(&c) = p.choice.iter().find(|&&c| c as usize >= ug.controls().count(i)) {
                return Err(SolveError::ControlRange { player: i, control: c as usize });
            }
        }
        Ok(())
    }
}

/// `V_i(k, s)` for every player, stage `0..=N` and state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable<S> {
    stages: usize,
    states: usize,
    players: usize,
    values: Vec<S>,
}

impl<S: Scalar> ValueTable<S> {
    fn zeros(stages: usize, states: usize, players: usize) -> Self {
        ValueTable { stages, states, players, values: vec![S::zero(); players * (stages + 1) * states] }
    }

    pub fn get(&self, i: usize, k: usize, s: usize) -> &S {
        &self.values[(i * (self.stages + 1) + k) * self.states + s]
    }

    fn set(&mut self, i: usize, k: usize, s: usize, v: S) {
        self.values[(i * (self.stages + 1) + k) * self.states + s] = v;
    }

    pub fn player_row(&self, i: usize) -> &[S] {
        let w = (self.stages + 1) * self.states;
        &self.values[i * w..(i + 1) * w]
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn states(&self) -> usize {
        self.states
    }

    /// Sum over players at `(k, s)`.
    pub fn total(&self, k: usize, s: usize) -> S {
        (0..self.players).fold(S::zero(), |acc, i| acc + self.get(i, k, s).clone())
    }
}

/// One-stage lookahead value for player `i` under joint control `u`.
pub(crate) fn q_value<S: Scalar>(ug: &UniformizedGame<S>, k: usize, s: usize, u: usize, i: usize, next: &[S]) -> S {
    let mut v = ug.reward(k, s, u, i) - ug.jump_cost(s, u, i).clone();
    for (t, p) in ug.row(s, u) {
        v = v + p.clone() * next[*t].clone();
    }
    v
}

fn terminal_row<S: Scalar>(ug: &UniformizedGame<S>, i: usize) -> Vec<S> {
    (0..ug.states()).map(|s| ug.terminal(s, i).clone()).collect()
}

/// Exact evaluation of every player's payoff under `profile`.
pub fn joint_value<S: Scalar>(ug: &UniformizedGame<S>, profile: &PolicyProfile) -> Result<ValueTable<S>, SolveError> {
    profile.check(ug)?;
    let (n, states, stages) = (ug.players(), ug.states(), ug.stages);
    let mut table = ValueTable::zeros(stages, states, n);
    for i in 0..n {
        let mut next = terminal_row(ug, i);
        for (s, v) in next.iter().enumerate() {
            table.set(i, stages, s, v.clone());
        }
        for k in (0..stages).rev() {
            let cur: Vec<S> = (0..states)
                .map(|s| q_value(ug, k, s, profile.joint(ug.controls(), k, s), i, &next))
                .collect();
            for (s, v) in cur.iter().enumerate() {
                table.set(i, k, s, v.clone());
            }
            next = cur;
        }
    }
    Ok(table)
}

/// Optimal Markov deviation of player `i` against the rest of `profile`.
/// Returns the (stage-dependent) policy and its values over `(k, s)` laid
/// out as `values[k * states + s]` for `k` in `0..=N`.
pub fn best_response<S: Scalar>(
    ug: &UniformizedGame<S>,
    profile: &PolicyProfile,
    i: usize,
) -> Result<(PlayerPolicy, Vec<S>), SolveError> {
    if i >= ug.players() {
        return Err(SolveError::UnknownPlayer(i));
    }
    profile.check(ug)?;
    Ok(constrained_best_response(ug, profile, i, |_, _, _| true))
}

/// Best response where control `c` at `(k, s)` is admissible iff
/// `allowed(k, s, c)`. States where nothing is admissible fall back to the
/// profile's own control.
pub(crate) fn constrained_best_response<S: Scalar>(
    ug: &UniformizedGame<S>,
    profile: &PolicyProfile,
    i: usize,
    allowed: impl Fn(usize, usize, usize) -> bool,
) -> (PlayerPolicy, Vec<S>) {
    let (states, stages) = (ug.states(), ug.stages);
    let grid = ug.controls();
    let mut values = vec![S::zero(); (stages + 1) * states];
    let mut choice = vec![0usize; stages * states];
    let term = terminal_row(ug, i);
    values[stages * states..].clone_from_slice(&term);
    for k in (0..stages).rev() {
        let (head, tail) = values.split_at_mut((k + 1) * states);
        let next = &tail[..states];
        for s in 0..states {
            let base = profile.joint(grid, k, s);
            let mut best: Option<(usize, S)> = None;
            for c in 0..grid.count(i) {
                if !allowed(k, s, c) {
                    continue;
                }
                let q = q_value(ug, k, s, grid.with_control(base, i, c), i, next);
                if best.as_ref().map_or(true, |(_, b)| q > *b) {
                    best = Some((c, q));
                }
            }
            let (c, q) = best.unwrap_or_else(|| {
                let c = profile.control(i, k, s);
                (c, q_value(ug, k, s, base, i, next))
            });
            choice[k * states + s] = c;
            head[k * states + s] = q;
        }
    }
    (PlayerPolicy::staged(choice), values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport<S> {
    /// Per player, max over `(k, s)` of best-response value minus profile value.
    pub gains: Vec<S>,
    /// Where each player's maximum gain occurs, as `(stage, state)`.
    pub worst_at: Vec<(usize, usize)>,
    pub is_mpe: bool,
    pub tol: S,
    /// Best-response policy for every player whose gain exceeds `tol`.
    pub witness: Vec<Option<PlayerPolicy>>,
}

impl<S: Scalar> EquilibriumReport<S> {
    pub fn max_gain(&self) -> S {
        self.gains.iter().cloned().fold(S::zero(), S::max_of)
    }
}

/// Subgame-perfect check: the deviation gain is measured at every stage and
/// state, not only at time zero.
pub fn verify_mpe<S: Scalar>(ug: &UniformizedGame<S>, profile: &PolicyProfile, tol: S) -> Result<EquilibriumReport<S>, SolveError> {
    let table = joint_value(ug, profile)?;
    let states = ug.states();
    let mut gains = Vec::new();
    let mut worst_at = Vec::new();
    let mut witness = Vec::new();
    for i in 0..ug.players() {
        let (policy, br) = constrained_best_response(ug, profile, i, |_, _, _| true);
        let mut best: Option<(S, (usize, usize))> = None;
        for k in 0..=ug.stages {
            for s in 0..states {
                let g = br[k * states + s].clone() - table.get(i, k, s).clone();
                if best.as_ref().map_or(true, |(b, _)| g > *b) {
                    best = Some((g, (k, s)));
                }
            }
        }
        let (g, at) = best.expect("at least one stage and state");
        witness.push((g > tol).then_some(policy));
        gains.push(g);
        worst_at.push(at);
    }
    let is_mpe = gains.iter().all(|g| *g <= tol);
    Ok(EquilibriumReport { gains, worst_at, is_mpe, tol, witness })
}

/// Early-exit variant of [`verify_mpe`] used by enumeration.
fn passes_mpe<S: Scalar>(ug: &UniformizedGame<S>, profile: &PolicyProfile, tol: &S) -> bool {
    let (states, stages) = (ug.states(), ug.stages);
    let grid = ug.controls();
    for i in 0..ug.players() {
        let mut v_next = terminal_row(ug, i);
        let mut br_next = v_next.clone();
        for k in (0..stages).rev() {
            let mut v_cur = Vec::with_capacity(states);
            let mut br_cur = Vec::with_capacity(states);
            for s in 0..states {
                let base = profile.joint(grid, k, s);
                let v = q_value(ug, k, s, base, i, &v_next);
                let mut best: Option<S> = None;
                for c in 0..grid.count(i) {
                    let q = q_value(ug, k, s, grid.with_control(base, i, c), i, &br_next);
                    if best.as_ref().map_or(true, |b| q > *b) {
                        best = Some(q);
                    }
                }
                let b = best.expect("nonempty control grid");
                if b.clone() - v.clone() > *tol {
                    return false;
                }
                v_cur.push(v);
                br_cur.push(b);
            }
            v_next = v_cur;
            br_next = br_cur;
        }
    }
    true
}

/// How a player's controls are treated by [`planner`].
#[derive(Debug, Clone)]
pub enum PlannerControl {
    Free,
    Fixed(usize),
    Follow(PlayerPolicy),
}

/// Backward induction maximizing the sum of values of the players flagged in
/// `objective`, choosing controls jointly for `Free` players. Returns the
/// resulting profile and the objective-to-go `W(k, s)` laid out as
/// `[k * states + s]`.
pub fn planner<S: Scalar>(
    ug: &UniformizedGame<S>,
    objective: &[bool],
    constraints: &[PlannerControl],
) -> (PolicyProfile, Vec<S>) {
    let (n, states, stages) = (ug.players(), ug.states(), ug.stages);
    let grid = ug.controls();
    let profiles = ug.profiles();
    // per-player continuation values under the chosen policy; the objective
    // is their weighted sum, which keeps q_value reusable.
    let mut next: Vec<Vec<S>> = (0..n).map(|i| terminal_row(ug, i)).collect();
    let mut welfare = vec![S::zero(); (stages + 1) * states];
    for s in 0..states {
        welfare[stages * states + s] = objective_sum(objective, |i| next[i][s].clone());
    }
    let mut choice: Vec<Vec<usize>> = vec![vec![0; stages * states]; n];
    for k in (0..stages).rev() {
        let mut cur: Vec<Vec<S>> = vec![Vec::with_capacity(states); n];
        for s in 0..states {
            let mut best: Option<(usize, S, Vec<S>)> = None;
            for u in 0..profiles {
                let consistent = constraints.iter().enumerate().all(|(i, c)| match c {
                    PlannerControl::Free => true,
                    PlannerControl::Fixed(x) => grid.control(u, i) == *x,
                    PlannerControl::Follow(p) => grid.control(u, i) == p.control(k, s, states),
                });
                if !consistent {
                    continue;
                }
                let per: Vec<S> = (0..n).map(|i| q_value(ug, k, s, u, i, &next[i])).collect();
                let w = objective_sum(objective, |i| per[i].clone());
                if best.as_ref().map_or(true, |(_, b, _)| w > *b) {
                    best = Some((u, w, per));
                }
            }
            let (u, w, per) = best.expect("constraints admit at least one profile");
            welfare[k * states + s] = w;
            for i in 0..n {
                choice[i][k * states + s] = grid.control(u, i);
                cur[i].push(per[i].clone());
            }
        }
        next = cur;
    }
    let players = choice.into_iter().map(PlayerPolicy::staged).collect();
    (PolicyProfile::new(stages, states, players), welfare)
}

fn objective_sum<S: Scalar>(objective: &[bool], value: impl Fn(usize) -> S) -> S {
    objective
        .iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .fold(S::zero(), |acc, (i, _)| acc + value(i))
}

/// Planner solution over all players and all control profiles.
pub fn social_optimum<S: Scalar>(ug: &UniformizedGame<S>) -> (PolicyProfile, Vec<S>) {
    let n = ug.players();
    planner(ug, &vec![true; n], &vec![PlannerControl::Free; n])
}

/// Number of stationary pure profiles: `prod_i |U_i|^{|S|}`.
pub fn stationary_count<S: Scalar>(ug: &UniformizedGame<S>) -> u128 {
    let mut total: u128 = 1;
    for i in 0..ug.players() {
        for _ in 0..ug.states() {
            total = total.saturating_mul(ug.controls().count(i) as u128);
        }
    }
    total
}

/// Decodes candidate `index` into a stationary profile; player 0's state 0
/// is the most significant digit.
pub fn stationary_candidate<S: Scalar>(ug: &UniformizedGame<S>, mut index: u128) -> PolicyProfile {
    let (n, states) = (ug.players(), ug.states());
    let mut choice = vec![vec![0usize; states]; n];
    for i in (0..n).rev() {
        let radix = ug.controls().count(i) as u128;
        for s in (0..states).rev() {
            choice[i][s] = (index % radix) as usize;
            index /= radix;
        }
    }
    PolicyProfile::new(ug.stages, states, choice.into_iter().map(PlayerPolicy::stationary).collect())
}

/// Every stationary pure profile that is an MPE at tolerance `tol`, in
/// candidate order. Deviations range over all Markov policies.
pub fn enumerate_mpe<S: Scalar>(
    ug: &UniformizedGame<S>,
    tol: S,
    cap: u128,
) -> Result<Vec<(PolicyProfile, EquilibriumReport<S>)>, SolveError> {
    let count = stationary_count(ug);
    if count > cap {
        return Err(SolveError::CapExceeded { count, cap });
    }
    let passing: Vec<u128> = (0..count)
        .into_par_iter()
        .filter(|&idx| passes_mpe(ug, &stationary_candidate(ug, idx), &tol))
        .collect();
    passing
        .into_iter()
        .map(|idx| {
            let p = stationary_candidate(ug, idx);
            let report = verify_mpe(ug, &p, tol.clone())?;
            Ok((p, report))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_game, GameSpec, JointState, PlayerState};
    use crate::uniformize::uniformize;
    use PlayerState::{Active as A, Sleep as Sl};

    /// One player, two states, two controls: control 1 switches at rate 1.
    fn toggle() -> UniformizedGame<f64> {
        let mut g = GameSpec::empty(vec![vec![A, Sl]], ControlGrid::indexed(&[2]), 1.0, JointState(vec![Sl])).unwrap();
        g.rates.lambda_max = 1.0;
        g.set_rate_from(0, Sl, A, 1, 1.0).unwrap();
        g.set_rate_from(0, A, Sl, 1, 1.0).unwrap();
        let a = g.space.index(&JointState(vec![A])).unwrap();
        for u in 0..2 {
            g.set_benefit(a, u, 0, 1.0);
        }
        g.set_terminal(a, 0, 1.0);
        g.set_switch_cost(0, Sl, A, 0.1).unwrap();
        uniformize(&validate_game(g).unwrap(), 4.0).unwrap()
    }

    #[test]
    fn identity_kernel_accumulates() {
        let mut g = GameSpec::empty(vec![vec![A]], ControlGrid::indexed(&[1]), 1.0, JointState(vec![A])).unwrap();
        g.set_benefit(0, 0, 0, 2.0);
        g.set_terminal(0, 0, 3.0);
        let ug = uniformize(&validate_game(g).unwrap(), 5.0).unwrap();
        let p = PolicyProfile::constant(&[0], ug.stages, ug.states());
        let v = joint_value(&ug, &p).unwrap();
        // N stages of reward 2/5 each, plus terminal
        assert!((v.get(0, 0, 0) - (5.0 * 0.4 + 3.0)).abs() < 1e-12);
        assert_eq!(*v.get(0, 5, 0), 3.0);
    }

    #[test]
    fn best_response_dominates_profile_everywhere() {
        let ug = toggle();
        for c in 0..2 {
            let p = PolicyProfile::constant(&[c], ug.stages, ug.states());
            let v = joint_value(&ug, &p).unwrap();
            let (_, br) = best_response(&ug, &p, 0).unwrap();
            for k in 0..=ug.stages {
                for s in 0..ug.states() {
                    assert!(br[k * ug.states() + s] >= *v.get(0, k, s));
                }
            }
        }
    }

    #[test]
    fn argmax_policy_is_fixed_point() {
        let ug = toggle();
        let (opt, _) = social_optimum(&ug);
        let report = verify_mpe(&ug, &opt, 1e-12).unwrap();
        assert!(report.is_mpe);
        assert!(report.gains[0].abs() < 1e-12);
        let (br, _) = best_response(&ug, &opt, 0).unwrap();
        assert_eq!(br, opt.player(0).clone());
    }

    #[test]
    fn enumeration_single_player() {
        let ug = toggle();
        assert_eq!(stationary_count(&ug), 4);
        let found = enumerate_mpe(&ug, 1e-9, DEFAULT_ENUMERATION_CAP).unwrap();
        // switching on when asleep is worth it, staying on when active is free
        let a = ug.lift(ug.space().index(&JointState(vec![A])).unwrap());
        let sl = ug.lift(ug.space().index(&JointState(vec![Sl])).unwrap());
        assert_eq!(found.len(), 1);
        let p = &found[0].0;
        assert_eq!(p.control(0, 0, a), 0);
        assert_eq!(p.control(0, 0, sl), 1);
    }

    #[test]
    fn cap_enforced() {
        let ug = toggle();
        assert_eq!(enumerate_mpe(&ug, 1e-9, 3), Err(SolveError::CapExceeded { count: 4, cap: 3 }));
    }

    #[test]
    fn dimension_mismatch_reported() {
        let ug = toggle();
        let p = PolicyProfile::constant(&[0], ug.stages + 1, ug.states());
        assert!(matches!(joint_value(&ug, &p), Err(SolveError::Dimension { .. })));
    }

    #[test]
    fn zero_reward_welfare_is_terminal_sum() {
        let mut g = GameSpec::empty(
            vec![vec![A, Sl], vec![A]],
            ControlGrid::indexed(&[2, 1]),
            1.0,
            JointState(vec![Sl, A]),
        )
        .unwrap();
        g.rates.lambda_max = 1.0;
        g.set_rate_from(0, Sl, A, 1, 1.0).unwrap();
        for s in 0..2 {
            g.set_terminal(s, 0, 1.0);
            g.set_terminal(s, 1, 2.0);
        }
        let ug = uniformize(&validate_game(g).unwrap(), 2.0).unwrap();
        let (_, w) = social_optimum(&ug);
        assert!(w.iter().all(|x| (*x - 3.0).abs() < 1e-12));
    }
}

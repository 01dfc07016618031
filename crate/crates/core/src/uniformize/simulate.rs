use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::UniformizeError;
use crate::model::{Game, JointState, Jump, Segment, Token, Trajectory};
use crate::scalar::Scalar;
use crate::solve::PolicyProfile;

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub paths: usize,
    pub sample: Trajectory,
}

/// Monte Carlo estimate of J_i^σ(t0, s0) using exact exponential clocks.
///
/// The policy is stage-indexed: on `[k/gamma, (k+1)/gamma)` the profile's
/// stage-`k` controls apply, so rates are piecewise constant and each piece
/// is sampled exactly. Path `p` draws from ChaCha stream `p` of `seed`, so
/// results do not depend on thread scheduling.
pub fn simulate(
    game: &Game<f64>,
    gamma: f64,
    profile: &PolicyProfile,
    t0: f64,
    s0: &JointState,
    seed: u64,
    paths: usize,
) -> Result<SimulationResult, UniformizeError> {
    if gamma <= 0.0 {
        return Err(UniformizeError::NonPositiveGamma);
    }
    let transport = game.transport_edges();
    let mut tokens = Vec::with_capacity(transport.len());
    for &e in &transport {
        let length = (game.edges[e].latency * gamma).ceil_usize();
        if length > 0 {
            return Err(UniformizeError::TransportInSimulation { edge: e });
        }
        tokens.push(Token { remaining: 0, length: 0 });
    }
    let stages = (gamma * game.horizon).ceil_usize();
    let horizon = stages as f64 / gamma;
    if !(0.0..horizon).contains(&t0) {
        return Err(UniformizeError::StartTime { t0, horizon });
    }
    if profile.states() != game.space.count() || profile.players() != game.players() {
        return Err(UniformizeError::Policy(format!(
            "profile covers {} states for {} players, game has {} states for {} players",
            profile.states(),
            profile.players(),
            game.space.count(),
            game.players()
        )));
    }
    let start = game.space.index(s0)?;
    let paths = paths.max(1);
    // Exponential clocks are memoryless, so a path only needs to stop at a
    // jump or where its state's controls change; `run_end[k * states + s]`
    // is the first stage after `k` whose controls at `s` differ.
    let states = game.space.count();
    let joint: Vec<usize> = (0..stages)
        .flat_map(|k| (0..states).map(move |s| (k, s)))
        .map(|(k, s)| profile.joint(&game.controls, k, s))
        .collect();
    let mut run_end = vec![stages; stages * states];
    for k in (0..stages.saturating_sub(1)).rev() {
        for s in 0..states {
            let next = (k + 1) * states + s;
            run_end[k * states + s] = if joint[next] == joint[k * states + s] { run_end[next] } else { k + 1 };
        }
    }
    let ctx = PathCtx { game, gamma, stages, horizon, profile, tokens: &tokens, joint, run_end };

    let payoffs: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            ctx.run(&mut rng, t0, start, None)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut sample = Trajectory::default();
    ctx.run(&mut rng, t0, start, Some(&mut sample));

    let n = game.players();
    let count = paths as f64;
    let mut mean = vec![0.0; n];
    for v in &payoffs {
        for i in 0..n {
            mean[i] += v[i];
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut std_err = vec![0.0; n];
    if paths > 1 {
        for i in 0..n {
            let ss: f64 = payoffs.iter().map(|v| (v[i] - mean[i]).powi(2)).sum();
            std_err[i] = (ss / (count - 1.0)).sqrt() / count.sqrt();
        }
    }
    Ok(SimulationResult { mean, std_err, paths, sample })
}

struct PathCtx<'a> {
    game: &'a Game<f64>,
    gamma: f64,
    stages: usize,
    horizon: f64,
    profile: &'a PolicyProfile,
    tokens: &'a [Token],
    joint: Vec<usize>,
    run_end: Vec<usize>,
}

impl PathCtx<'_> {
    fn run(&self, rng: &mut ChaCha8Rng, t0: f64, start: usize, mut record: Option<&mut Trajectory>) -> Vec<f64> {
        let game = self.game;
        let n = game.players();
        let mut payoff = vec![0.0; n];
        let mut t = t0;
        let mut s = start;
        let mut k = ((t0 * self.gamma).floor() as usize).min(self.stages - 1);
        let states = game.space.count();
        while k < self.stages {
            let end = self.run_end[k * states + s];
            let boundary = (end as f64 / self.gamma).min(self.horizon);
            let u = self.joint[k * states + s];
            if let Some(tr) = record.as_deref_mut() {
                let controls = (0..n).map(|i| self.profile.control(i, k, s)).collect();
                tr.segments.push(Segment { start: t, state: game.space.state(s), controls });
            }
            let benefit = game.benefit_rate(s, u, Some(self.tokens)).expect("tokens sized in simulate");
            let net: Vec<f64> = (0..n)
                .map(|i| benefit[i] - game.payoffs.control_cost[i][game.controls.control(u, i)])
                .collect();
            let exit = *game.cached_exit_rate(s, u);
            let wait = if exit > 0.0 {
                let x: f64 = rng.gen();
                -(1.0 - x).ln() / exit
            } else {
                f64::INFINITY
            };
            if t + wait < boundary {
                for i in 0..n {
                    payoff[i] += net[i] * wait;
                }
                t += wait;
                // the jump lands inside stage floor(t * gamma) of this run
                k = ((t * self.gamma).floor() as usize).clamp(k, end - 1);
                let (player, from, to) = self.pick_jump(rng, s, u, exit);
                payoff[player] -= game.switch_cost(player, from, to);
                let next = game.space.with_local(s, player, to);
                if let Some(tr) = record.as_deref_mut() {
                    tr.jumps.push(Jump {
                        time: t,
                        player,
                        from: game.space.allowed(player)[from],
                        to: game.space.allowed(player)[to],
                    });
                }
                s = next;
            } else {
                for i in 0..n {
                    payoff[i] += net[i] * (boundary - t);
                }
                t = boundary;
                k = end;
            }
        }
        for i in 0..n {
            payoff[i] += game.terminal(s, i);
        }
        if let Some(tr) = record {
            tr.payoff = payoff.clone();
        }
        payoff
    }

    fn pick_jump(&self, rng: &mut ChaCha8Rng, s: usize, u: usize, exit: f64) -> (usize, usize, usize) {
        let game = self.game;
        let mut target = rng.gen::<f64>() * exit;
        let mut last = None;
        for i in 0..game.players() {
            let c = game.controls.control(u, i);
            let here = game.space.local(s, i);
            for t in 0..game.space.allowed(i).len() {
                if t == here {
                    continue;
                }
                let r = *game.rate(s, i, t, c);
                if r <= 0.0 {
                    continue;
                }
                last = Some((i, here, t));
                if target < r {
                    return (i, here, t);
                }
                target -= r;
            }
        }
        last.expect("positive exit rate implies at least one target")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_game, ControlGrid, GameSpec, PlayerState};
    use PlayerState::Active as A;

    fn constant_game(terminal: f64) -> Game<f64> {
        let mut g = GameSpec::empty(vec![vec![A]], ControlGrid::indexed(&[1]), 1.0, JointState(vec![A])).unwrap();
        g.set_benefit(0, 0, 0, 1.0);
        g.set_terminal(0, 0, terminal);
        validate_game(g).unwrap()
    }

    #[test]
    fn deterministic_integral() {
        let game = constant_game(0.0);
        let p = PolicyProfile::constant(&[0], 4, 1);
        let r = simulate(&game, 4.0, &p, 0.0, &JointState(vec![A]), 7, 50).unwrap();
        assert!((r.mean[0] - 1.0).abs() < 1e-12);
        assert_eq!(r.std_err[0], 0.0);
        let r = simulate(&constant_game(5.0), 4.0, &p, 0.0, &JointState(vec![A]), 7, 50).unwrap();
        assert!((r.mean[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn start_time_checked() {
        let game = constant_game(0.0);
        let p = PolicyProfile::constant(&[0], 4, 1);
        assert!(simulate(&game, 4.0, &p, 1.0, &JointState(vec![A]), 1, 1).is_err());
    }
}

#![allow(dead_code)]

use ltg::config::max_exit_rate;
use ltg::model::{validate_game, ControlGrid, EdgeSpec, Game, GameSpec, JointState, PlayerState};
use ltg::scalar::Scalar;
use ltg::solve::{stationary_candidate, stationary_count, PolicyProfile};
use ltg::uniformize::{uniformize, UniformizedGame};

use PlayerState::{Active as A, DeadIn, DeadOut, Sleep as S};

/// Per-player state sets for the random game shapes.
pub fn shape(kind: usize) -> Vec<Vec<PlayerState>> {
    match kind % 5 {
        0 => vec![vec![A, S]],
        1 => vec![vec![A, S, DeadOut]],
        2 => vec![vec![A, S], vec![A]],
        3 => vec![vec![A, S], vec![A, DeadIn]],
        _ => vec![vec![A, S], vec![A, S]],
    }
}

pub fn joint_states(kind: usize) -> usize {
    shape(kind).iter().map(Vec::len).product()
}

/// A game of the given shape with two controls per player and every
/// number drawn from `xs` (uniform on `[0, 1)`, recycled as needed).
pub fn random_game(kind: usize, xs: &[f64], horizon: f64) -> GameSpec<f64> {
    let allowed = shape(kind);
    let n = allowed.len();
    let mut next = {
        let mut k = 0;
        move || {
            let v = xs[k % xs.len()];
            k += 1;
            v
        }
    };
    let grid = ControlGrid::indexed(&vec![2; n]);
    let initial = JointState(allowed.iter().map(|a| if a.contains(&S) { S } else { A }).collect());
    let mut g = GameSpec::empty(allowed.clone(), grid, horizon, initial).unwrap();
    for s in 0..g.space.count() {
        for i in 0..n {
            let here = g.space.player_state(s, i);
            for &to in &allowed[i] {
                if to == here {
                    continue;
                }
                for c in 0..2 {
                    // sparse: about half the rates are zero
                    let r = next();
                    let rate = if r < 0.5 { 0.0 } else { 6.0 * (r - 0.5) };
                    g.set_rate(s, i, to, c, rate).unwrap();
                }
            }
        }
        for u in 0..g.controls.profiles() {
            for i in 0..n {
                g.set_benefit(s, u, i, 3.0 * next() - 1.0);
            }
        }
        for i in 0..n {
            g.set_terminal(s, i, 2.0 * next() - 1.0);
        }
    }
    for i in 0..n {
        for &from in &allowed[i] {
            for &to in &allowed[i] {
                if from != to {
                    g.set_switch_cost(i, from, to, next()).unwrap();
                }
            }
        }
        g.set_control_cost(i, 1, 0.5 * next()).unwrap();
    }
    if n == 2 {
        g.edges.push(EdgeSpec::continuous(0, 1, 2.0 * next()));
    }
    g.rates.lambda_max = max_exit_rate(&g);
    g
}

pub fn validated(g: GameSpec<f64>) -> Game<f64> {
    validate_game(g).unwrap()
}

/// Uniformization rate `lambda_max + extra`, at least 1.
pub fn uniformized(g: &Game<f64>, extra: f64) -> UniformizedGame<f64> {
    let gamma = (g.rates.lambda_max + extra).max(1.0).ceil();
    uniformize(g, gamma).unwrap()
}

/// Values of `profile` by plain backward induction over the public stage
/// data, independent of the solver.
pub fn values<S: Scalar>(ug: &UniformizedGame<S>, profile: &PolicyProfile) -> Vec<Vec<Vec<S>>> {
    let (n, states, stages) = (ug.players(), ug.states(), ug.stages);
    let mut v = vec![vec![vec![S::zero(); states]; stages + 1]; n];
    for i in 0..n {
        for s in 0..states {
            v[i][stages][s] = ug.terminal(s, i).clone();
        }
        for k in (0..stages).rev() {
            for s in 0..states {
                let u = profile.joint(ug.controls(), k, s);
                v[i][k][s] = q(ug, k, s, u, i, &v[i][k + 1]);
            }
        }
    }
    v
}

pub fn q<S: Scalar>(ug: &UniformizedGame<S>, k: usize, s: usize, u: usize, i: usize, next: &[S]) -> S {
    let mut x = ug.reward(k, s, u, i) - ug.jump_cost(s, u, i).clone();
    for (t, p) in ug.row(s, u) {
        x = x + p.clone() * next[*t].clone();
    }
    x
}

/// Brute force: every stationary candidate against every one-shot
/// deviation `(stage, state, player, control)`.
pub fn brute_force_mpes(ug: &UniformizedGame<f64>, tol: f64) -> Vec<u128> {
    let grid = ug.controls();
    let mut out = Vec::new();
    for index in 0..stationary_count(ug) {
        let profile = stationary_candidate(ug, index);
        let v = values(ug, &profile);
        let mut ok = true;
        for k in 0..ug.stages {
            for s in 0..ug.states() {
                let u = profile.joint(grid, k, s);
                for i in 0..ug.players() {
                    for c in 0..grid.count(i) {
                        let dev = q(ug, k, s, grid.with_control(u, i, c), i, &v[i][k + 1]);
                        ok &= dev <= v[i][k][s] + tol;
                    }
                }
            }
        }
        if ok {
            out.push(index);
        }
    }
    out
}

/// Index of a stationary profile in `stationary_candidate` order.
pub fn candidate_index<S: Scalar>(ug: &UniformizedGame<S>, profile: &PolicyProfile) -> u128 {
    let mut index: u128 = 0;
    for i in 0..ug.players() {
        let radix = ug.controls().count(i) as u128;
        for s in 0..ug.states() {
            index = index * radix + profile.control(i, 0, s) as u128;
        }
    }
    index
}

pub fn corpus(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(rel)
}

mod common;

use ltg::config::GameFile;
use ltg::model::{validate_game, Game};
use ltg::solve::{joint_value, social_optimum, stationary_candidate, stationary_count};
use ltg::uniformize::{simulate, uniformize};

use common::{random_game, validated};

const PATHS: usize = 20_000;

/// DP values against exact-clock simulation, as a z-score per player.
fn worst_z(game: &Game<f64>, gamma: f64, seed: u64) -> f64 {
    let ug = uniformize(game, gamma).unwrap();
    let s0 = ug.initial();
    let mut profiles = vec![social_optimum(&ug).0];
    profiles.extend((0..stationary_count(&ug).min(3)).map(|k| stationary_candidate(&ug, k)));
    let mut worst: f64 = 0.0;
    for (p, profile) in profiles.iter().enumerate() {
        let dp = joint_value(&ug, profile).unwrap();
        let mc = simulate(game, gamma, profile, 0.0, &ug.joint_state(s0), seed + p as u64, PATHS).unwrap();
        for i in 0..ug.players() {
            let diff = (dp.get(i, 0, s0) - mc.mean[i]).abs();
            // deterministic paths leave only rounding in the std error
            worst = worst.max(if diff <= 1e-9 { 0.0 } else { diff / mc.std_err[i] });
        }
    }
    worst
}

#[test]
fn corpus_games_agree_with_simulation() {
    for name in ["toggle.toml", "decay.toml", "pair_flow.toml", "relay.toml", "dial.toml"] {
        let text = std::fs::read_to_string(common::corpus(&format!("games/{name}"))).unwrap();
        let game = validate_game(GameFile::parse(&text).unwrap().build::<f64>().unwrap()).unwrap();
        let z = worst_z(&game, 400.0, 5);
        assert!(z < 4.0, "{name}: z = {z}");
    }
}

#[test]
fn random_games_agree_with_simulation() {
    let xs: Vec<f64> = (0..97).map(|k| ((k * 37 + 11) % 97) as f64 / 97.0).collect();
    for kind in 0..5 {
        let game = validated(random_game(kind, &xs[kind..], 1.0));
        let z = worst_z(&game, 400.0, 100 + kind as u64);
        assert!(z < 4.0, "shape {kind}: z = {z}");
    }
}

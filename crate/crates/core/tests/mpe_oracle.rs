mod common;

use proptest::prelude::*;

use ltg::config::GameFile;
use ltg::model::validate_game;
use ltg::solve::{enumerate_mpe, joint_value, stationary_candidate, verify_mpe};
use ltg::uniformize::uniformize;

use common::{brute_force_mpes, candidate_index, random_game, uniformized, validated, values};

const TOL: f64 = 1e-9;

fn enumerated(ug: &ltg::uniformize::UniformizedGame<f64>) -> Vec<u128> {
    let mut v: Vec<u128> = enumerate_mpe(ug, TOL, 1 << 20).unwrap().iter().map(|(p, _)| candidate_index(ug, p)).collect();
    v.sort();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn enumeration_matches_brute_force(kind in 0usize..3, xs in prop::collection::vec(0.0f64..1.0, 64), extra in 0.0f64..4.0) {
        let game = validated(random_game(kind, &xs, 1.0));
        let ug = uniformized(&game, extra);
        prop_assert_eq!(enumerated(&ug), brute_force_mpes(&ug, TOL));
    }

    #[test]
    fn solver_values_match_plain_recursion(kind in 0usize..5, xs in prop::collection::vec(0.0f64..1.0, 96), index in 0u128..256) {
        let game = validated(random_game(kind, &xs, 1.0));
        let ug = uniformized(&game, 1.0);
        let profile = stationary_candidate(&ug, index % ltg::solve::stationary_count(&ug));
        let table = joint_value(&ug, &profile).unwrap();
        let plain = values(&ug, &profile);
        for i in 0..ug.players() {
            for k in 0..=ug.stages {
                for s in 0..ug.states() {
                    prop_assert!((table.get(i, k, s) - plain[i][k][s]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn small_corpus_games_match_brute_force() {
    let mut checked = 0;
    for name in ["toggle.toml", "decay.toml", "dial.toml", "relay.toml", "pair_flow.toml", "trade.toml"] {
        let text = std::fs::read_to_string(common::corpus(&format!("games/{name}"))).unwrap();
        let game = validate_game(GameFile::parse(&text).unwrap().build::<f64>().unwrap()).unwrap();
        if game.space.count() > 3 || (0..game.players()).any(|i| game.controls.count(i) > 2) {
            continue;
        }
        for gamma in [8.0, 20.0] {
            let ug = uniformize(&game, gamma).unwrap();
            let found = enumerated(&ug);
            assert_eq!(found, brute_force_mpes(&ug, TOL), "{name} at gamma {gamma}");
            for &index in &found {
                assert!(verify_mpe(&ug, &stationary_candidate(&ug, index), TOL).unwrap().is_mpe);
            }
        }
        checked += 1;
    }
    assert!(checked >= 2);
}

mod common;

use proptest::prelude::*;

use ltg::intervene::{apply_structural, apply_transfers, StructuralEdit, TransferTable};
use ltg::model::{EdgeKind, EdgeSpec};
use ltg::solve::{best_response, joint_value, stationary_candidate, stationary_count};

use common::{random_game, uniformized, validated};

fn xs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transition_rows_are_distributions(kind in 0usize..5, xs in xs(96), extra in 0.0f64..5.0) {
        let ug = uniformized(&validated(random_game(kind, &xs, 1.0)), extra);
        for s in 0..ug.states() {
            for u in 0..ug.profiles() {
                let row = ug.row(s, u);
                prop_assert!(row.iter().all(|(_, p)| *p >= 0.0));
                let total: f64 = row.iter().map(|(_, p)| p).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn best_response_weakly_improves(kind in 0usize..5, xs in xs(96), index in any::<u64>()) {
        let ug = uniformized(&validated(random_game(kind, &xs, 1.0)), 1.0);
        let profile = stationary_candidate(&ug, index as u128 % stationary_count(&ug));
        let own = joint_value(&ug, &profile).unwrap();
        for i in 0..ug.players() {
            let (_, br) = best_response(&ug, &profile, i).unwrap();
            for k in 0..=ug.stages {
                for s in 0..ug.states() {
                    prop_assert!(br[k * ug.states() + s] >= own.get(i, k, s) - 1e-12);
                }
            }
        }
    }

    #[test]
    fn benefit_ignores_edge_order(xs in xs(96), w in 0.0f64..3.0) {
        let mut g = random_game(4, &xs, 1.0);
        g.edges.push(EdgeSpec::continuous(1, 0, w));
        let mut h = g.clone();
        h.edges.reverse();
        for s in 0..g.space.count() {
            for u in 0..g.controls.profiles() {
                let a = g.benefit_rate(s, u, None).unwrap();
                let b = h.benefit_rate(s, u, None).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn edits_compose(xs in xs(96), w in 0.0f64..3.0, split in 0usize..4) {
        let g = random_game(4, &xs, 1.0);
        let edits = vec![
            StructuralEdit::AddEdge(EdgeSpec::continuous(1, 0, w)),
            StructuralEdit::RetypeEdge { index: 0, kind: EdgeKind::DiscreteTransport, latency: 0.25 },
            StructuralEdit::AddEdge(EdgeSpec::continuous(0, 1, 1.0)),
            StructuralEdit::DeleteEdge(2),
        ];
        let (batched, remaps) = apply_structural(&g, &edits).unwrap();
        let (first, mut r1) = apply_structural(&g, &edits[..split]).unwrap();
        let (second, r2) = apply_structural(&first, &edits[split..]).unwrap();
        r1.extend(r2);
        prop_assert_eq!(batched, second);
        prop_assert_eq!(remaps, r1);
    }

    #[test]
    fn transfers_leave_dynamics_alone(kind in 0usize..5, xs in xs(96), ys in xs(4096)) {
        let ug = uniformized(&validated(random_game(kind, &xs, 1.0)), 1.0);
        let mut n = 0;
        let table = TransferTable::from_fn(&ug, |_, _, _, _| {
            n += 1;
            4.0 * ys[n % ys.len()] - 2.0
        });
        let induced = apply_transfers(&ug, &table).unwrap();
        prop_assert_eq!(induced.transition_table(), ug.transition_table());
        for k in 0..ug.stages {
            for s in 0..ug.states() {
                for u in 0..ug.profiles() {
                    prop_assert_eq!(induced.jump_cost(s, u, 0), ug.jump_cost(s, u, 0));
                    let gap = induced.reward(k, s, u, 0) - ug.reward(k, s, u, 0);
                    prop_assert!((gap - table.get(k, s, u, 0) / ug.gamma).abs() < 1e-12);
                }
            }
        }
    }
}

use rainbow_trees::coloring::{permuted_round_robin, round_robin};
use rainbow_trees::constructor::{build_forest, SelectionPolicy};
use rainbow_trees::oracle::{enumerate_rainbow_spanning_trees, max_disjoint_rainbow_trees, DEFAULT_PACKING_CAP};
use rainbow_trees::verifier::verify_rainbow_spanning_tree;

#[test]
fn k4_packing_is_one_for_every_relabelling() {
    for seed in 0..8 {
        let col = permuted_round_robin(2, seed);
        assert_eq!(enumerate_rainbow_spanning_trees(&col, 10).unwrap().len(), 4);
        assert_eq!(max_disjoint_rainbow_trees(&col, DEFAULT_PACKING_CAP).unwrap(), 1);
    }
}

#[test]
fn k6_packs_at_least_two_and_beats_construction() {
    for seed in 0..3 {
        let col = permuted_round_robin(3, seed);
        let best = max_disjoint_rainbow_trees(&col, DEFAULT_PACKING_CAP).unwrap();
        let (forest, _) = build_forest(&col, SelectionPolicy::MinIndex, false).unwrap();
        assert!(best >= 2, "seed {seed}: packing {best}");
        assert!(best >= forest.trees.len());
    }
}

#[test]
fn enumerated_trees_pass_the_verifier() {
    let col = round_robin(3);
    let trees = enumerate_rainbow_spanning_trees(&col, 10).unwrap();
    assert!(!trees.is_empty());
    for t in trees {
        let record =
            rainbow_trees::forest::TreeRecord { root: t[0].u().0, edges: t.iter().map(|e| e.to_triple()).collect() };
        assert!(verify_rainbow_spanning_tree(&col, &record).pass);
    }
}

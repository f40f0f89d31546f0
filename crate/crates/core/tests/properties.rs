mod common;

use std::collections::HashMap;

use clusterprior::prioritizer::generate_raw;
use clusterprior::{
    apfd, cohens_d, deduplicate, random_sequence, select_report, update_status, wilcoxon_signed_rank, ClusterNode,
    ReportId,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn clusters() -> impl Strategy<Value = Vec<Vec<ReportId>>> {
    prop::collection::vec(prop::collection::vec(1u64..40, 0..8), 1..10)
}

/// Every leaf is taken exactly once, so a category's visit count equals
/// the number of leaves below it.
fn visits_match_leaf_counts(node: &ClusterNode) -> bool {
    if node.is_leaf() {
        return node.visits == 1 && !node.active;
    }
    node.visits as usize == node.leaf_count() && !node.active && node.children.iter().all(visits_match_leaf_counts)
}

proptest! {
    #[test]
    fn round_robin_stays_balanced(clusters in clusters()) {
        let mut tree = flat_tree(&clusters);
        update_status(&mut tree.root);
        while tree.root.active {
            prop_assert!(select_report(&mut tree.root).is_some());
            update_status(&mut tree.root);
            let live: Vec<u32> = tree.root.children.iter().filter(|c| c.active).map(|c| c.visits).collect();
            if let (Some(lo), Some(hi)) = (live.iter().min(), live.iter().max()) {
                prop_assert!(hi - lo <= 1, "visits {:?}", live);
            }
        }
    }

    #[test]
    fn raw_sequence_takes_every_leaf_once(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut tree, n) = random_tree(&mut rng, 5, 25, 3);
        let leaves = tree.root.leaf_count();
        let raw = generate_raw(&mut tree).unwrap();
        prop_assert_eq!(raw.len(), leaves);
        prop_assert!(visits_match_leaf_counts(&tree.root));
        let mut order = deduplicate(&raw);
        order.sort_unstable();
        prop_assert_eq!(order, (1..=n).collect::<Vec<_>>());
    }

    #[test]
    fn deduplicate_keeps_first_occurrences(raw in prop::collection::vec(0u64..12, 0..40)) {
        let out = deduplicate(&raw);
        prop_assert_eq!(deduplicate(&out), out.clone());
        let mut firsts = Vec::new();
        for id in &raw {
            if !firsts.contains(id) {
                firsts.push(*id);
            }
        }
        prop_assert_eq!(out, firsts);
    }

    #[test]
    fn earlier_first_hit_never_lowers_apfd(
        bugs in prop::collection::vec(0u8..4, 2..10),
        seed in any::<u64>(),
        pick in any::<prop::sample::Index>(),
        shift in any::<prop::sample::Index>(),
    ) {
        let labels: Vec<(ReportId, String)> =
            bugs.iter().enumerate().map(|(i, b)| (i as u64 + 1, format!("b{b}"))).collect();
        let (corpus, truth) = truth_of(&labels);
        let order = random_sequence(&corpus, seed).order;
        let map: HashMap<ReportId, String> = labels.into_iter().collect();
        // A first-revealing report, moved to an earlier slot.
        let firsts: Vec<usize> = (0..order.len())
            .filter(|&i| !order[..i].iter().any(|o| map[o] == map[&order[i]]))
            .collect();
        let from = firsts[pick.index(firsts.len())];
        prop_assume!(from > 0);
        let to = shift.index(from);
        let mut moved = order.clone();
        let id = moved.remove(from);
        moved.insert(to, id);
        let before = apfd(&order, &truth).unwrap().value;
        let after = apfd(&moved, &truth).unwrap().value;
        prop_assert!(after >= before - 1e-12, "{order:?} -> {moved:?}: {before} > {after}");
    }

    #[test]
    fn random_baseline_is_a_seeded_permutation(n in 1u64..60, seed in any::<u64>()) {
        let corpus = corpus_of(1..=n);
        let a = random_sequence(&corpus, seed);
        prop_assert_eq!(&a, &random_sequence(&corpus, seed));
        prop_assert_eq!(a.seed, Some(seed));
        let mut sorted = a.order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (1..=n).collect::<Vec<_>>());
    }

    #[test]
    fn wilcoxon_is_symmetric_in_sides(pairs in prop::collection::vec((0u8..8, 0u8..8), 5..30)) {
        let pairs: Vec<(f64, f64)> = pairs.into_iter().map(|(a, b)| (f64::from(a), f64::from(b))).collect();
        let swapped: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (b, a)).collect();
        match (wilcoxon_signed_rank(&pairs), wilcoxon_signed_rank(&swapped)) {
            (Ok(x), Ok(y)) => {
                prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
                let n = x.n as f64;
                prop_assert!((x.statistic + y.statistic - n * (n + 1.0) / 2.0).abs() < 1e-9);
                prop_assert!(x.p_value > 0.0 && x.p_value <= 1.0);
            }
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{x:?} vs {y:?}"),
        }
    }

    #[test]
    fn cohens_d_is_antisymmetric(
        a in prop::collection::vec(0.0f64..1.0, 2..20),
        b in prop::collection::vec(0.0f64..1.0, 2..20),
    ) {
        if let Ok(d) = cohens_d(&a, &b) {
            prop_assert!((d + cohens_d(&b, &a).unwrap()).abs() < 1e-12);
        }
    }
}

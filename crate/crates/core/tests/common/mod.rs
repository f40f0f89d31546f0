#![allow(dead_code)]

use std::collections::HashMap;
use std::collections::VecDeque;
use std::path::PathBuf;

use clusterprior::{ClusterNode, ClusterTree, Corpus, GroundTruth, Report, ReportId};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn corpus_of(ids: impl IntoIterator<Item = ReportId>) -> Corpus {
    let reports = ids.into_iter().map(|i| Report::new(i, format!("report {i}"))).collect();
    Corpus::new("synthetic", reports).unwrap()
}

pub fn truth_of(labels: &[(ReportId, String)]) -> (Corpus, GroundTruth) {
    let corpus = corpus_of(labels.iter().map(|(id, _)| *id));
    let truth = GroundTruth::new(&corpus, labels.iter().cloned()).unwrap();
    (corpus, truth)
}

/// Up to `max_clusters` clusters over reports `1..=n`; a report may sit in
/// several clusters and clusters may be empty.
pub fn random_flat_clusters(rng: &mut impl Rng, max_clusters: usize, max_reports: u64) -> Vec<Vec<ReportId>> {
    let k = rng.gen_range(1..=max_clusters);
    let n = rng.gen_range(1..=max_reports);
    let mut clusters = vec![Vec::new(); k];
    for id in 1..=n {
        clusters[rng.gen_range(0..k)].push(id);
    }
    for _ in 0..rng.gen_range(0..=n / 4) {
        let id = rng.gen_range(1..=n);
        clusters[rng.gen_range(0..k)].push(id);
    }
    for c in &mut clusters {
        c.shuffle(rng);
    }
    clusters
}

pub fn flat_tree(clusters: &[Vec<ReportId>]) -> ClusterTree {
    ClusterTree::new(
        clusters
            .iter()
            .enumerate()
            .map(|(i, ids)| ClusterNode::cluster(format!("C{}", i + 1), ids.iter().copied()))
            .collect(),
    )
}

/// Independent model of fair interleaving over a flat tree: a queue of
/// clusters, each turn takes the front cluster's next report and requeues
/// the cluster if it still has reports; repeats are then dropped.
pub fn round_robin_oracle(clusters: &[Vec<ReportId>]) -> Vec<ReportId> {
    let mut queue: VecDeque<VecDeque<ReportId>> = clusters
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| c.iter().copied().collect())
        .collect();
    let mut out = Vec::new();
    while let Some(mut c) = queue.pop_front() {
        out.push(c.pop_front().unwrap());
        if !c.is_empty() {
            queue.push_back(c);
        }
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|id| seen.insert(*id));
    out
}

const WORDS: &[&str] = &[
    "Crash",
    "Login",
    "Display",
    "Empty list",
    "Font",
    "登录失败",
    "Network timeout",
    "Layout",
    "Search",
    "Share",
    "Night mode",
    "Upload (photo)",
    "Payment 2",
    "Écran",
    "Sync",
];

enum Slot {
    Leaf(ReportId),
    Cat(usize),
}

struct Skeleton {
    label: String,
    slots: Vec<Slot>,
}

fn grow(rng: &mut impl Rng, arena: &mut Vec<Skeleton>, depth: usize, max_depth: usize) -> usize {
    let idx = arena.len();
    let label = format!("{} {}", WORDS[rng.gen_range(0..WORDS.len())], idx);
    arena.push(Skeleton {
        label,
        slots: Vec::new(),
    });
    if depth < max_depth {
        for _ in 0..rng.gen_range(0..=3) {
            let child = grow(rng, arena, depth + 1, max_depth);
            arena[idx].slots.push(Slot::Cat(child));
        }
    }
    idx
}

fn build(arena: &[Skeleton], idx: usize) -> ClusterNode {
    let children = arena[idx]
        .slots
        .iter()
        .map(|s| match s {
            Slot::Leaf(id) => ClusterNode::leaf(*id),
            Slot::Cat(c) => build(arena, *c),
        })
        .collect();
    ClusterNode::category(arena[idx].label.clone(), children)
}

/// Random tree of depth `1..=max_depth` covering reports `1..=n`, each
/// report placed in 1 to `max_membership` distinct categories at random
/// positions among their children.
pub fn random_tree(
    rng: &mut impl Rng,
    max_depth: usize,
    max_reports: u64,
    max_membership: usize,
) -> (ClusterTree, u64) {
    let n = rng.gen_range(1..=max_reports);
    let depth = rng.gen_range(1..=max_depth);
    let mut arena = Vec::new();
    let tops: Vec<usize> = (0..rng.gen_range(1..=5))
        .map(|_| grow(rng, &mut arena, 1, depth))
        .collect();
    let cats: Vec<usize> = (0..arena.len()).collect();
    for id in 1..=n {
        let k = rng.gen_range(1..=max_membership.min(cats.len()));
        for &c in cats.choose_multiple(rng, k) {
            let pos = rng.gen_range(0..=arena[c].slots.len());
            arena[c].slots.insert(pos, Slot::Leaf(id));
        }
    }
    (ClusterTree::new(tops.iter().map(|&t| build(&arena, t)).collect()), n)
}

/// Reorders every category's children to leaves-then-subcategories,
/// keeping relative order within each group.
pub fn leaves_first(node: &ClusterNode) -> ClusterNode {
    if node.is_leaf() {
        return node.clone();
    }
    let mut children: Vec<ClusterNode> = node.children.iter().filter(|c| c.is_leaf()).cloned().collect();
    children.extend(node.children.iter().filter(|c| !c.is_leaf()).map(leaves_first));
    ClusterNode::category(node.label.clone(), children)
}

/// APFD recounted from scratch: for every bug, the 1-based position of its
/// earliest report.
pub fn brute_apfd(order: &[ReportId], labels: &HashMap<ReportId, String>) -> f64 {
    let mut first: HashMap<&str, usize> = HashMap::new();
    for (pos, id) in order.iter().enumerate() {
        let bug = labels[id].as_str();
        let e = first.entry(bug).or_insert(pos + 1);
        *e = (*e).min(pos + 1);
    }
    let n = order.len() as f64;
    let m = first.len() as f64;
    let sum: usize = first.values().sum();
    1.0 - sum as f64 / (n * m) + 1.0 / (2.0 * n)
}

pub fn permutations(items: &[ReportId]) -> Vec<Vec<ReportId>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Two-sided signed-rank p-value by enumerating all 2^n sign patterns.
pub fn enumerated_signed_rank_p(pairs: &[(f64, f64)]) -> (f64, f64) {
    let d: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|x| *x != 0.0).collect();
    let n = d.len();
    let ranks: Vec<f64> = d
        .iter()
        .map(|x| {
            let below = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let equal = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let w: f64 = ranks.iter().zip(&d).filter(|(_, x)| **x > 0.0).map(|(r, _)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if s <= w + 1e-9 {
            le += 1;
        }
        if s >= w - 1e-9 {
            ge += 1;
        }
    }
    let p = (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0);
    (p, w)
}

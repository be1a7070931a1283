//! Attribute-cut decision search trees over historical logs.
//!
//! A tree is built top-down from a worklist. Each internal node picks the
//! attribute that best differentiates its logs (diversity index or standard
//! deviation), cuts the node into children along that attribute and
//! recurses until a node holds few enough logs to become a leaf. Traversal
//! descends by attribute value with a nearest-edge fallback for values
//! that never appeared in the training logs, so lookups are total.
//!
//! Two trees built with different selection metrics form a [`TreeBand`];
//! the union of their matched groups is what query answering works on,
//! which damps the effect of noisy individual groupings.

mod io;

pub use io::{
    deserialize_band, deserialize_tree, serialize_band, serialize_tree, to_dot, SCHEMA_VERSION,
};

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logstore::{Attribute, AttributeKey, LogTable, TransferLogEntry};
use crate::ranking::{score_column, Metric};

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("cannot build a tree from an empty table")]
    EmptyTable,
    #[error("all logs share one value on `{0}`; cut needs a different attribute")]
    DegenerateCut(Attribute),
    #[error("malformed model: {0}")]
    MalformedModel(String),
    #[error("model schema version {found} unsupported (reader expects {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
}

/// Tree construction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    /// A node with at most this many logs becomes a leaf.
    pub leaf_threshold: usize,
    /// Number of children a cut produces (exact-value edges are used
    /// instead when the node has at most this many distinct values).
    pub cut_number: usize,
    pub metric: Metric,
    /// Skip attributes already cut on the path from the root.
    pub no_reuse_attributes: bool,
    /// Per-depth attribute overrides; entry `d` forces the cut attribute
    /// for every node at depth `d` (root is depth 0). Degenerate or
    /// already-used forced attributes fall back to the ranked choice.
    pub forced_attributes: Vec<Attribute>,
    /// Compute SD scores on max-normalized columns.
    pub sd_on_normalized: bool,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            leaf_threshold: 2,
            cut_number: 4,
            metric: Metric::Di,
            no_reuse_attributes: true,
            forced_attributes: Vec::new(),
            sd_on_normalized: true,
        }
    }
}

/// Condition on an edge from an internal node to a child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Edge {
    /// The child holds logs whose attribute equals this value exactly.
    Value(f64),
    /// The child holds logs in an interval; `(lo, hi]`, or `[lo, hi]` for
    /// the first interval of a cut.
    Interval { lo: f64, hi: f64, closed_lo: bool },
}

impl Edge {
    pub fn contains(&self, v: f64) -> bool {
        match *self {
            Edge::Value(x) => v == x,
            Edge::Interval { lo, hi, closed_lo } => {
                (if closed_lo { v >= lo } else { v > lo }) && v <= hi
            }
        }
    }

    /// Representative point used for nearest-edge distance: the value
    /// itself, or the interval midpoint.
    pub fn anchor(&self) -> f64 {
        match *self {
            Edge::Value(x) => x,
            Edge::Interval { lo, hi, .. } => 0.5 * (lo + hi),
        }
    }

    pub fn label(&self, attr: Attribute) -> String {
        match *self {
            Edge::Value(x) => format!("{attr} = {x}"),
            Edge::Interval { lo, hi, closed_lo } => {
                let open = if closed_lo { '[' } else { '(' };
                format!("{attr} in {open}{lo}, {hi}]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    /// `entry_no` ids of the logs grouped under this node.
    pub log_ids: Vec<u64>,
    #[serde(rename = "attribute")]
    pub cut_attribute: Option<Attribute>,
    /// Parallel to `children`.
    pub edges: Vec<Edge>,
    /// Indices into the tree's node arena.
    pub children: Vec<usize>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// A built search tree plus the table it was trained on.
#[derive(Debug, Clone)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    config: BuildConfig,
    table: Arc<LogTable>,
}

/// Cuts a set of logs along one attribute.
///
/// When the logs carry at most `cut_number` distinct values on the
/// attribute, each distinct value becomes an exact-value child. Otherwise
/// the `[min, max]` span is partitioned into `cut_number` equal-width
/// intervals (right-closed, the first also left-closed) and empty
/// intervals are dropped.
pub fn cut_node(
    entries: &[&TransferLogEntry],
    attribute: Attribute,
    cut_number: usize,
) -> Result<Vec<(Edge, Vec<u64>)>, TreeError> {
    let mut distinct: Vec<f64> = entries.iter().map(|e| e.attribute(attribute)).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();

    if distinct.len() < 2 {
        return Err(TreeError::DegenerateCut(attribute));
    }

    let edges: Vec<Edge> = if distinct.len() <= cut_number {
        distinct.into_iter().map(Edge::Value).collect()
    } else {
        let lo = distinct[0];
        let hi = distinct[distinct.len() - 1];
        let width = (hi - lo) / cut_number as f64;
        (0..cut_number)
            .map(|k| Edge::Interval {
                lo: lo + k as f64 * width,
                // pin the last bound so the maximum always falls inside
                hi: if k + 1 == cut_number {
                    hi
                } else {
                    lo + (k + 1) as f64 * width
                },
                closed_lo: k == 0,
            })
            .collect()
    };

    let mut children: Vec<(Edge, Vec<u64>)> = edges.into_iter().map(|e| (e, Vec::new())).collect();
    for entry in entries {
        let v = entry.attribute(attribute);
        let slot = children
            .iter_mut()
            .find(|(edge, _)| edge.contains(v))
            .expect("cut intervals cover [min, max]");
        slot.1.push(entry.entry_no);
    }
    children.retain(|(_, ids)| !ids.is_empty());
    Ok(children)
}

const ALL_ATTRS_MASK: u8 = 0b11111;

fn attr_bit(attr: Attribute) -> u8 {
    1 << attr.index()
}

fn distinct_count(entries: &[&TransferLogEntry], attr: Attribute) -> usize {
    let mut vals: Vec<f64> = entries.iter().map(|e| e.attribute(attr)).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup();
    vals.len()
}

fn choose_attribute(
    entries: &[&TransferLogEntry],
    used_mask: u8,
    depth: usize,
    config: &BuildConfig,
) -> Option<Attribute> {
    let blocked = |attr: Attribute| config.no_reuse_attributes && used_mask & attr_bit(attr) != 0;

    if let Some(&forced) = config.forced_attributes.get(depth) {
        if !blocked(forced) && distinct_count(entries, forced) > 1 {
            return Some(forced);
        }
    }

    let mut best: Option<(Attribute, f64)> = None;
    for attr in Attribute::ALL {
        if blocked(attr) {
            continue;
        }
        let column: Vec<f64> = entries.iter().map(|e| e.attribute(attr)).collect();
        let score = score_column(&column, config.metric, config.sd_on_normalized).ok()?;
        // strict improvement keeps the canonical order on ties
        if score > 0.0 && best.is_none_or(|(_, s)| score > s) {
            best = Some((attr, score));
        }
    }
    best.map(|(a, _)| a)
}

/// Builds a tree from a table. See [`DecisionTree::build`].
pub fn build_tree(table: &LogTable, config: BuildConfig) -> Result<DecisionTree, TreeError> {
    DecisionTree::build_shared(Arc::new(table.clone()), config)
}

impl DecisionTree {
    pub fn build(table: &LogTable, config: BuildConfig) -> Result<Self, TreeError> {
        build_tree(table, config)
    }

    fn build_shared(table: Arc<LogTable>, config: BuildConfig) -> Result<Self, TreeError> {
        if table.is_empty() {
            return Err(TreeError::EmptyTable);
        }
        let by_id: HashMap<u64, &TransferLogEntry> =
            table.entries().iter().map(|e| (e.entry_no, e)).collect();

        let mut nodes = vec![TreeNode {
            id: 0,
            log_ids: table.entries().iter().map(|e| e.entry_no).collect(),
            cut_attribute: None,
            edges: Vec::new(),
            children: Vec::new(),
        }];

        // worklist of (node index, attributes used on the path, depth)
        let mut worklist: VecDeque<(usize, u8, usize)> = VecDeque::new();
        worklist.push_back((0, 0, 0));

        while let Some((idx, used_mask, depth)) = worklist.pop_front() {
            if nodes[idx].log_ids.len() <= config.leaf_threshold {
                continue;
            }
            if config.no_reuse_attributes && used_mask == ALL_ATTRS_MASK {
                continue;
            }
            let entries: Vec<&TransferLogEntry> =
                nodes[idx].log_ids.iter().map(|id| by_id[id]).collect();
            // no choosable attribute means the logs agree on every
            // remaining attribute: the node stays a leaf
            let Some(attr) = choose_attribute(&entries, used_mask, depth, &config) else {
                continue;
            };
            let cuts = cut_node(&entries, attr, config.cut_number)?;

            nodes[idx].cut_attribute = Some(attr);
            for (edge, log_ids) in cuts {
                let child_idx = nodes.len();
                nodes.push(TreeNode {
                    id: child_idx,
                    log_ids,
                    cut_attribute: None,
                    edges: Vec::new(),
                    children: Vec::new(),
                });
                nodes[idx].edges.push(edge);
                nodes[idx].children.push(child_idx);
                worklist.push_back((child_idx, used_mask | attr_bit(attr), depth + 1));
            }
        }

        Ok(Self {
            nodes,
            config,
            table,
        })
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn config(&self) -> &BuildConfig {
        &self.config
    }

    pub fn table(&self) -> &LogTable {
        &self.table
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Number of levels, counting the root as 1.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], idx: usize) -> usize {
            1 + nodes[idx]
                .children
                .iter()
                .map(|&c| walk(nodes, c))
                .max()
                .unwrap_or(0)
        }
        walk(&self.nodes, 0)
    }

    /// Descends from the root to a leaf, following at each node the child
    /// whose edge contains the key's value on the cut attribute, or —
    /// for unseen values — the child whose edge is nearest in absolute
    /// difference.
    pub fn traverse(&self, key: &AttributeKey) -> &TreeNode {
        let mut current = &self.nodes[0];
        while let Some(attr) = current.cut_attribute {
            let v = key.get(attr);
            let pick = current
                .edges
                .iter()
                .position(|e| e.contains(v))
                .unwrap_or_else(|| {
                    let mut best = 0;
                    let mut best_d = f64::INFINITY;
                    for (i, e) in current.edges.iter().enumerate() {
                        let d = (e.anchor() - v).abs();
                        if d < best_d {
                            best_d = d;
                            best = i;
                        }
                    }
                    best
                });
            current = &self.nodes[current.children[pick]];
        }
        current
    }
}

/// Two trees over the same table, one per selection metric.
#[derive(Debug, Clone)]
pub struct TreeBand {
    di: DecisionTree,
    sd: DecisionTree,
}

impl TreeBand {
    pub fn new(di: DecisionTree, sd: DecisionTree) -> Self {
        Self { di, sd }
    }

    pub fn di_tree(&self) -> &DecisionTree {
        &self.di
    }

    pub fn sd_tree(&self) -> &DecisionTree {
        &self.sd
    }

    pub fn table(&self) -> &LogTable {
        self.di.table()
    }

    /// Matches the key in both trees and returns the deduplicated union of
    /// the two groups, ordered by `entry_no`.
    pub fn match_band(&self, key: &AttributeKey) -> LogTable {
        let mut ids: BTreeSet<u64> = self.di.traverse(key).log_ids.iter().copied().collect();
        ids.extend(self.sd.traverse(key).log_ids.iter().copied());
        let table = self.di.table();
        let entries = ids
            .into_iter()
            .filter_map(|id| table.by_entry_no(id).cloned())
            .collect();
        LogTable::new(entries, "band-match").expect("ids from one table are unique")
    }
}

/// Builds the two-tree band: one tree per metric, same table and
/// remaining configuration.
pub fn build_band(table: &LogTable, base: BuildConfig) -> Result<TreeBand, TreeError> {
    let shared = Arc::new(table.clone());
    let di = DecisionTree::build_shared(
        Arc::clone(&shared),
        BuildConfig {
            metric: Metric::Di,
            ..base.clone()
        },
    )?;
    let sd = DecisionTree::build_shared(
        shared,
        BuildConfig {
            metric: Metric::Sd,
            ..base
        },
    )?;
    Ok(TreeBand::new(di, sd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logstore::parse_logs;
    use proptest::prelude::*;

    const TABLE1: &str = include_str!("../../testdata/table1.csv");

    fn table1() -> LogTable {
        parse_logs(TABLE1).unwrap()
    }

    fn sorted(mut v: Vec<u64>) -> Vec<u64> {
        v.sort_unstable();
        v
    }

    fn leaf_sets(tree: &DecisionTree) -> Vec<Vec<u64>> {
        let mut sets: Vec<Vec<u64>> = tree.leaves().map(|n| sorted(n.log_ids.clone())).collect();
        sets.sort();
        sets
    }

    #[test]
    fn bandwidth_first_tree_has_five_leaves_at_depth_two() {
        let config = BuildConfig {
            cut_number: 5,
            forced_attributes: vec![Attribute::Bandwidth],
            ..BuildConfig::default()
        };
        let tree = build_tree(&table1(), config).unwrap();
        assert_eq!(tree.depth(), 2);
        assert_eq!(
            leaf_sets(&tree),
            vec![vec![1, 6], vec![2, 7], vec![3, 8], vec![4, 9], vec![5, 10]]
        );
    }

    #[test]
    fn file_size_then_num_files_tree_cuts_one_node_at_level_two() {
        let config = BuildConfig {
            cut_number: 5,
            forced_attributes: vec![Attribute::FileSize, Attribute::NumFiles],
            ..BuildConfig::default()
        };
        let tree = build_tree(&table1(), config).unwrap();
        assert_eq!(tree.depth(), 3);
        // only the file_size = 100 node (logs 1,2,6,7) is cut again
        let internal_below_root: Vec<&TreeNode> = tree
            .root()
            .children
            .iter()
            .map(|&c| &tree.nodes()[c])
            .filter(|n| !n.is_leaf())
            .collect();
        assert_eq!(internal_below_root.len(), 1);
        assert_eq!(
            sorted(internal_below_root[0].log_ids.clone()),
            vec![1, 2, 6, 7]
        );
        assert_eq!(
            internal_below_root[0].cut_attribute,
            Some(Attribute::NumFiles)
        );
        assert_eq!(
            leaf_sets(&tree),
            vec![vec![1, 6], vec![2, 7], vec![3, 8], vec![4, 9], vec![5, 10]]
        );
    }

    #[test]
    fn tiny_table_root_is_leaf() {
        let table = table1();
        let two = LogTable::new(table.entries()[..2].to_vec(), "slice").unwrap();
        let tree = build_tree(&two, BuildConfig::default()).unwrap();
        assert_eq!(tree.depth(), 1);
        assert!(tree.root().is_leaf());
    }

    #[test]
    fn empty_table_is_rejected() {
        let empty = LogTable::new(Vec::new(), "empty").unwrap();
        assert!(matches!(
            build_tree(&empty, BuildConfig::default()),
            Err(TreeError::EmptyTable)
        ));
    }

    #[test]
    fn interval_cut_splits_bandwidth_into_four_bins() {
        let table = table1();
        let entries: Vec<&TransferLogEntry> = table.entries().iter().collect();
        let cuts = cut_node(&entries, Attribute::Bandwidth, 4).unwrap();
        // 5 distinct values over [5, 20], width 3.75:
        // [5, 8.75] (8.75, 12.5] (12.5, 16.25] (16.25, 20]
        let sets: Vec<Vec<u64>> = cuts.iter().map(|(_, ids)| sorted(ids.clone())).collect();
        assert_eq!(
            sets,
            vec![vec![4, 5, 9, 10], vec![1, 6], vec![2, 7], vec![3, 8]]
        );
        match &cuts[0].0 {
            Edge::Interval { lo, hi, closed_lo } => {
                assert_eq!(*lo, 5.0);
                assert_eq!(*hi, 8.75);
                assert!(closed_lo);
            }
            other => panic!("expected interval, got {other:?}"),
        }
        match &cuts[3].0 {
            Edge::Interval { lo, hi, .. } => {
                assert_eq!(*lo, 16.25);
                assert_eq!(*hi, 20.0);
            }
            other => panic!("expected interval, got {other:?}"),
        }
    }

    #[test]
    fn exact_value_cut_with_room_for_all_values() {
        let table = table1();
        let entries: Vec<&TransferLogEntry> = table.entries().iter().collect();
        let cuts = cut_node(&entries, Attribute::Bandwidth, 5).unwrap();
        let expected: Vec<(f64, Vec<u64>)> = vec![
            (5.0, vec![4, 9]),
            (8.0, vec![5, 10]),
            (10.0, vec![1, 6]),
            (15.0, vec![2, 7]),
            (20.0, vec![3, 8]),
        ];
        assert_eq!(cuts.len(), 5);
        for ((edge, ids), (value, want)) in cuts.iter().zip(&expected) {
            assert_eq!(edge, &Edge::Value(*value));
            assert_eq!(sorted(ids.clone()), *want);
        }
    }

    #[test]
    fn degenerate_cut_is_reported() {
        let table = table1();
        // logs 1 and 6 share every attribute
        let entries: Vec<&TransferLogEntry> = table
            .entries()
            .iter()
            .filter(|e| e.entry_no == 1 || e.entry_no == 6)
            .collect();
        assert!(matches!(
            cut_node(&entries, Attribute::Rtt, 4),
            Err(TreeError::DegenerateCut(Attribute::Rtt))
        ));
    }

    fn file_size_first_tree() -> DecisionTree {
        build_tree(
            &table1(),
            BuildConfig {
                cut_number: 5,
                forced_attributes: vec![Attribute::FileSize, Attribute::NumFiles],
                ..BuildConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn unseen_num_files_resolves_to_nearest_child() {
        let tree = file_size_first_tree();
        let key = AttributeKey::new(100.0, 255.0, 10.0, 200.0, 10.0);
        let node = tree.traverse(&key);
        assert_eq!(sorted(node.log_ids.clone()), vec![1, 6]);
    }

    #[test]
    fn training_keys_reach_their_own_leaf() {
        let tree = file_size_first_tree();
        let key = AttributeKey::new(50.0, 150.0, 15.0, 250.0, 20.0);
        let node = tree.traverse(&key);
        assert!(node.log_ids.contains(&3));
    }

    #[test]
    fn out_of_range_bandwidth_falls_to_largest_edge() {
        let tree = build_tree(
            &table1(),
            BuildConfig {
                cut_number: 5,
                forced_attributes: vec![Attribute::Bandwidth],
                ..BuildConfig::default()
            },
        )
        .unwrap();
        let key = AttributeKey::new(100.0, 250.0, 10.0, 200.0, 1000.0);
        let node = tree.traverse(&key);
        assert_eq!(sorted(node.log_ids.clone()), vec![3, 8]);
    }

    #[test]
    fn band_union_of_distinct_groups() {
        // force the two trees apart so the matched groups differ
        let table = table1();
        let shared_config = BuildConfig {
            cut_number: 5,
            ..BuildConfig::default()
        };
        let bw_tree = build_tree(
            &table,
            BuildConfig {
                forced_attributes: vec![Attribute::Bandwidth],
                ..shared_config.clone()
            },
        )
        .unwrap();
        let fs_tree = build_tree(
            &table,
            BuildConfig {
                forced_attributes: vec![Attribute::FileSize, Attribute::NumFiles],
                ..shared_config
            },
        )
        .unwrap();
        let band = TreeBand::new(bw_tree, fs_tree);

        // both trees resolve this key to {1, 6}
        let key = AttributeKey::new(100.0, 250.0, 10.0, 200.0, 10.0);
        let combined = band.match_band(&key);
        let ids: Vec<u64> = combined.entries().iter().map(|e| e.entry_no).collect();
        assert_eq!(ids, vec![1, 6]);

        // bandwidth 15 resolves tree-1 to {2,7}; file size 100 with 250
        // files resolves tree-2 to {1,6}
        let key = AttributeKey::new(100.0, 250.0, 10.0, 200.0, 15.0);
        let combined = band.match_band(&key);
        let ids: Vec<u64> = combined.entries().iter().map(|e| e.entry_no).collect();
        assert_eq!(ids, vec![1, 2, 6, 7]);
    }

    #[test]
    fn identical_trees_band_matches_traverse() {
        let table = table1();
        let band = build_band(
            &table,
            BuildConfig {
                metric: Metric::Di,
                ..BuildConfig::default()
            },
        )
        .unwrap();
        for entry in table.entries() {
            let key = crate::logstore::attribute_key(entry);
            let combined = band.match_band(&key);
            let union: BTreeSet<u64> = combined.entries().iter().map(|e| e.entry_no).collect();
            let mut expect: BTreeSet<u64> = band
                .di_tree()
                .traverse(&key)
                .log_ids
                .iter()
                .copied()
                .collect();
            expect.extend(band.sd_tree().traverse(&key).log_ids.iter().copied());
            assert_eq!(union, expect);
            assert!(union.contains(&entry.entry_no));
        }
    }

    #[test]
    fn build_is_deterministic() {
        let table = table1();
        let a = build_tree(&table, BuildConfig::default()).unwrap();
        let b = build_tree(&table, BuildConfig::default()).unwrap();
        assert_eq!(a.nodes(), b.nodes());
    }

    prop_compose! {
        fn arb_entry(entry_no: u64)(
            fs_i in 0usize..4,
            nf_i in 0usize..4,
            rtt_i in 0usize..3,
            buf_i in 0usize..3,
            bw_i in 0usize..4,
            th in 1.0f64..500.0,
            en in 1.0f64..100.0,
            cc in 1u32..8,
            p in 1u32..4,
        ) -> TransferLogEntry {
            let fs = [40.0, 50.0, 100.0, 150.0][fs_i];
            let nf = [150.0, 200.0, 225.0, 250.0][nf_i];
            let rtt = [8.0, 10.0, 15.0][rtt_i];
            let buf = [150.0, 200.0, 250.0][buf_i];
            let bw = [5.0, 8.0, 10.0, 20.0][bw_i];
            TransferLogEntry {
                entry_no,
                file_size_kb: fs,
                num_files: nf,
                rtt_ms: rtt,
                buf_size_mb: buf,
                bandwidth_mbps: bw,
                throughput_mbps: th,
                energy_j: en,
                params: crate::logstore::TunableParams::new(cc, p, 1, 1, 1.2),
            }
        }
    }

    fn arb_table(max_len: usize) -> impl Strategy<Value = LogTable> {
        (1..=max_len).prop_flat_map(|n| {
            (0..n as u64)
                .map(|i| arb_entry(i + 1))
                .collect::<Vec<_>>()
                .prop_map(|entries| LogTable::new(entries, "prop").unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn children_partition_parent_logs(table in arb_table(50), metric_sd in any::<bool>()) {
            let config = BuildConfig {
                metric: if metric_sd { Metric::Sd } else { Metric::Di },
                ..BuildConfig::default()
            };
            let tree = build_tree(&table, config).unwrap();
            for node in tree.nodes() {
                if node.is_leaf() { continue; }
                let parent: BTreeSet<u64> = node.log_ids.iter().copied().collect();
                let mut seen = BTreeSet::new();
                for &c in &node.children {
                    for id in &tree.nodes()[c].log_ids {
                        prop_assert!(seen.insert(*id), "child log sets overlap");
                    }
                }
                prop_assert_eq!(parent, seen);
            }
        }

        #[test]
        fn leaf_invariant_and_depth_bound(table in arb_table(50)) {
            let config = BuildConfig::default();
            let threshold = config.leaf_threshold;
            let tree = build_tree(&table, config).unwrap();
            prop_assert!(tree.depth() <= 6);

            // recompute each leaf's path attributes
            fn visit(
                tree: &DecisionTree,
                idx: usize,
                used: Vec<Attribute>,
                threshold: usize,
            ) -> Result<(), TestCaseError> {
                let node = &tree.nodes()[idx];
                if node.is_leaf() {
                    let remaining: Vec<Attribute> = Attribute::ALL
                        .iter()
                        .copied()
                        .filter(|a| !used.contains(a))
                        .collect();
                    let entries: Vec<&TransferLogEntry> = node
                        .log_ids
                        .iter()
                        .map(|id| tree.table().by_entry_no(*id).unwrap())
                        .collect();
                    let identical = remaining.iter().all(|&a| {
                        entries.windows(2).all(|w| w[0].attribute(a) == w[1].attribute(a))
                    });
                    prop_assert!(
                        node.log_ids.len() <= threshold || identical || remaining.is_empty(),
                        "leaf with {} logs violates the leaf condition",
                        node.log_ids.len()
                    );
                } else {
                    let attr = node.cut_attribute.unwrap();
                    for &c in &node.children {
                        let mut next = used.clone();
                        next.push(attr);
                        visit(tree, c, next, threshold)?;
                    }
                }
                Ok(())
            }
            visit(&tree, 0, Vec::new(), threshold)?;
        }

        #[test]
        fn every_training_entry_is_retrievable(table in arb_table(40)) {
            let tree = build_tree(&table, BuildConfig::default()).unwrap();
            for entry in table.entries() {
                let node = tree.traverse(&crate::logstore::attribute_key(entry));
                prop_assert!(node.log_ids.contains(&entry.entry_no));
            }
        }

        #[test]
        fn band_group_contains_both_matched_nodes(table in arb_table(40)) {
            let band = build_band(&table, BuildConfig::default()).unwrap();
            for entry in table.entries() {
                let key = crate::logstore::attribute_key(entry);
                let group: BTreeSet<u64> = band
                    .match_band(&key)
                    .entries()
                    .iter()
                    .map(|e| e.entry_no)
                    .collect();
                for id in &band.di_tree().traverse(&key).log_ids {
                    prop_assert!(group.contains(id));
                }
                for id in &band.sd_tree().traverse(&key).log_ids {
                    prop_assert!(group.contains(id));
                }
            }
        }
    }
}

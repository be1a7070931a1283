//! Versioned JSON model documents and DOT export.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BuildConfig, DecisionTree, TreeBand, TreeError, TreeNode};
use crate::logstore::LogTable;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TreeBody {
    config: BuildConfig,
    nodes: Vec<TreeNode>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    schema_version: u32,
    kind: ModelKind,
    table: LogTable,
    trees: Vec<TreeBody>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum ModelKind {
    Tree,
    Band,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

fn tree_body(tree: &DecisionTree) -> TreeBody {
    TreeBody {
        config: tree.config().clone(),
        nodes: tree.nodes().to_vec(),
    }
}

fn check_nodes(nodes: &[TreeNode]) -> Result<(), TreeError> {
    if nodes.is_empty() {
        return Err(TreeError::MalformedModel("model has no nodes".into()));
    }
    for node in nodes {
        if node.edges.len() != node.children.len() {
            return Err(TreeError::MalformedModel(format!(
                "node {} has {} edges but {} children",
                node.id,
                node.edges.len(),
                node.children.len()
            )));
        }
        if let Some(&child) = node.children.iter().find(|&&c| c >= nodes.len()) {
            return Err(TreeError::MalformedModel(format!(
                "node {} references missing child {child}",
                node.id
            )));
        }
    }
    Ok(())
}

fn parse_doc(text: &str) -> Result<ModelDoc, TreeError> {
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| TreeError::MalformedModel(e.to_string()))?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(TreeError::SchemaVersionMismatch {
            found: probe.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let doc: ModelDoc =
        serde_json::from_str(text).map_err(|e| TreeError::MalformedModel(e.to_string()))?;
    for tree in &doc.trees {
        check_nodes(&tree.nodes)?;
    }
    Ok(doc)
}

fn rebuild(body: TreeBody, table: Arc<LogTable>) -> DecisionTree {
    DecisionTree {
        nodes: body.nodes,
        config: body.config,
        table,
    }
}

/// Serializes one tree (with its training table) to a JSON document.
pub fn serialize_tree(tree: &DecisionTree) -> String {
    let doc = ModelDoc {
        schema_version: SCHEMA_VERSION,
        kind: ModelKind::Tree,
        table: tree.table().clone(),
        trees: vec![tree_body(tree)],
    };
    serde_json::to_string_pretty(&doc).expect("model document serializes")
}

pub fn deserialize_tree(text: &str) -> Result<DecisionTree, TreeError> {
    let doc = parse_doc(text)?;
    if doc.kind != ModelKind::Tree || doc.trees.len() != 1 {
        return Err(TreeError::MalformedModel(format!(
            "expected a single-tree document, found {:?} with {} trees",
            doc.kind,
            doc.trees.len()
        )));
    }
    let table = Arc::new(doc.table);
    let mut trees = doc.trees;
    Ok(rebuild(trees.remove(0), table))
}

/// Serializes a band (two trees sharing one training table).
pub fn serialize_band(band: &TreeBand) -> String {
    let doc = ModelDoc {
        schema_version: SCHEMA_VERSION,
        kind: ModelKind::Band,
        table: band.table().clone(),
        trees: vec![tree_body(band.di_tree()), tree_body(band.sd_tree())],
    };
    serde_json::to_string_pretty(&doc).expect("model document serializes")
}

pub fn deserialize_band(text: &str) -> Result<TreeBand, TreeError> {
    let doc = parse_doc(text)?;
    if doc.kind != ModelKind::Band || doc.trees.len() != 2 {
        return Err(TreeError::MalformedModel(format!(
            "expected a band document, found {:?} with {} trees",
            doc.kind,
            doc.trees.len()
        )));
    }
    let table = Arc::new(doc.table);
    let mut trees = doc.trees;
    let sd = trees.pop().unwrap();
    let di = trees.pop().unwrap();
    Ok(TreeBand::new(
        rebuild(di, Arc::clone(&table)),
        rebuild(sd, table),
    ))
}

/// Renders a tree as a Graphviz digraph, one line per edge labeled with
/// the cut condition.
pub fn to_dot(tree: &DecisionTree) -> String {
    let mut out = String::from("digraph search_tree {\n");
    for node in tree.nodes() {
        let label = if node.is_leaf() {
            let ids: Vec<String> = node.log_ids.iter().map(u64::to_string).collect();
            format!("logs {{{}}}", ids.join(","))
        } else {
            format!("cut {}", node.cut_attribute.unwrap())
        };
        let _ = writeln!(out, "  n{} [label=\"{}\"];", node.id, label);
    }
    for node in tree.nodes() {
        let Some(attr) = node.cut_attribute else {
            continue;
        };
        for (edge, &child) in node.edges.iter().zip(&node.children) {
            let _ = writeln!(
                out,
                "  n{} -> n{} [label=\"{}\"];",
                node.id,
                child,
                edge.label(attr)
            );
        }
    }
    out.push_str("}\n");
    out
}

//! The context network returned for a query, and its output formats.
//!
//! [`ContextNetwork::to_json`] is the single serializer behind both the HTTP
//! `/relate` response and `ctx query --format json`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::entity::{EntityId, EntityKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextNetwork {
    pub query: QueryEcho,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub meta: NetworkMeta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryEcho {
    pub raw: String,
    pub resolved: Vec<EntityId>,
    pub unresolved: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// `kind:key`
    pub id: String,
    pub kind: EntityKind,
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub similarity: f64,
    pub specificity: f64,
    pub is_query: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub dims: usize,
    pub k: usize,
    pub candidates: usize,
    pub elapsed_ms: f64,
}

/// Fill colors used by the DOT output.
pub fn kind_color(kind: EntityKind) -> &'static str {
    match kind {
        EntityKind::Term => "#9ecae1",
        EntityKind::Author => "#ffd92f",
        EntityKind::Journal => "#66c2a5",
        EntityKind::Dewey => "#bc80bd",
    }
}

pub const QUERY_COLOR: &str = "#e41a1c";

impl ContextNetwork {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn query_node_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_query).count()
    }

    /// Undirected Graphviz graph with kind-colored nodes.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph context {\n  node [style=filled, shape=ellipse];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let color = if n.is_query { QUERY_COLOR } else { kind_color(n.kind) };
            let _ = writeln!(
                out,
                "  n{i} [label=\"{}\", kind=\"{}\", fillcolor=\"{color}\", pos=\"{:.4},{:.4}\"];",
                dot_escape(&n.label),
                n.kind,
                n.x,
                n.y
            );
        }
        for e in &self.edges {
            let _ = writeln!(out, "  n{} -- n{} [weight=\"{:.6}\"];", e.source, e.target, e.weight);
        }
        out.push_str("}\n");
        out
    }

    /// Ranked entity table with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("rank\tkind\tkey\tsimilarity\tspecificity\tis_query\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{}",
                i + 1,
                n.kind,
                tsv_clean(&n.label),
                n.similarity,
                n.specificity,
                n.is_query
            );
        }
        out
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn tsv_clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

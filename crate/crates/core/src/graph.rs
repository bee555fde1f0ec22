//! Semantic graphs over SRL argument spans.
//!
//! Every kept argument of every tuple becomes a node. Nodes of one tuple form a
//! clique; nodes of different tuples are joined when their word sequences are
//! equal, one contains the other, or they share more than half of the shorter
//! one's words.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{words, EvidenceSet, Sentence, SrlRole, SrlTuple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Verb,
    Argument,
    Location,
    Temporal,
}

impl NodeRole {
    fn from_srl(role: SrlRole) -> Option<NodeRole> {
        match role {
            SrlRole::Verb => Some(NodeRole::Verb),
            SrlRole::Argument => Some(NodeRole::Argument),
            SrlRole::Location => Some(NodeRole::Location),
            SrlRole::Temporal => Some(NodeRole::Temporal),
            SrlRole::Other => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub node_id: usize,
    pub sentence_id: String,
    pub tuple_id: usize,
    pub role: NodeRole,
    pub text: String,
    #[serde(rename = "span")]
    pub token_span: (usize, usize),
    /// Stand-in node covering a whole sentence, used when a graph would
    /// otherwise be empty.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub synthetic: bool,
}

impl Node {
    pub fn words(&self) -> Vec<String> {
        words(&self.text).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    IntraTuple,
    CrossTuple,
}

/// Undirected edge, stored with `source < target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn new(a: usize, b: usize, kind: EdgeKind) -> Edge {
        assert_ne!(a, b, "self-loops are not graph edges");
        Edge {
            source: a.min(b),
            target: a.max(b),
            kind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Claim,
    Evidence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub origin: Origin,
    pub nodes: Vec<Node>,
    /// Sorted by `(source, target)`; no duplicates.
    pub edges: Vec<Edge>,
}

impl Graph {
    pub fn empty(origin: Origin) -> Graph {
        Graph {
            origin,
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.edges
            .binary_search_by(|e| (e.source, e.target).cmp(&key))
            .is_ok()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.source].push(e.target);
            adj[e.target].push(e.source);
        }
        adj
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    /// If the graph has no nodes, add one synthetic node per non-empty
    /// sentence spanning all of its tokens, so downstream attention always has
    /// something to attend to. Sentences without tokens contribute nothing.
    pub fn with_fallback(mut self, sentences: &[&Sentence]) -> Graph {
        if !self.nodes.is_empty() {
            return self;
        }
        for s in sentences.iter().filter(|s| !s.tokens.is_empty()) {
            let node_id = self.nodes.len();
            self.nodes.push(Node {
                node_id,
                sentence_id: s.sentence_id.clone(),
                tuple_id: usize::MAX,
                role: NodeRole::Argument,
                text: s.text(),
                token_span: (0, s.tokens.len()),
                synthetic: true,
            });
        }
        self
    }
}

/// One node per verb/argument/location/temporal argument, in argument order.
/// Node ids start at zero; [`build_graph`] renumbers.
pub fn extract_nodes(tuple: &SrlTuple) -> Vec<Node> {
    tuple
        .arguments
        .iter()
        .filter_map(|arg| {
            NodeRole::from_srl(arg.role).map(|role| (role, arg))
        })
        .enumerate()
        .map(|(i, (role, arg))| Node {
            node_id: i,
            sentence_id: tuple.sentence_id.clone(),
            tuple_id: tuple.tuple_id,
            role,
            text: arg.text.clone(),
            token_span: arg.token_span,
            synthetic: false,
        })
        .collect()
}

/// All pairs within one tuple.
pub fn intra_tuple_edges(nodes: &[Node]) -> Vec<Edge> {
    let mut edges = Vec::with_capacity(nodes.len() * nodes.len().saturating_sub(1) / 2);
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            edges.push(Edge::new(a.node_id, b.node_id, EdgeKind::IntraTuple));
        }
    }
    edges
}

/// Whether two nodes from different tuples should be linked.
pub fn cross_tuple_link(a: &Node, b: &Node) -> bool {
    words_link(&a.words(), &b.words())
}

/// The lexical linking rule on normalized word sequences. Empty sequences
/// never link.
pub fn words_link(a: &[String], b: &[String]) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    if a == b || contains_run(a, b) || contains_run(b, a) {
        return true;
    }
    2 * multiset_overlap(a, b) > a.len().min(b.len())
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    needle.len() <= haystack.len() && haystack.windows(needle.len()).any(|w| w == needle)
}

pub(crate) fn multiset_overlap(a: &[String], b: &[String]) -> usize {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for w in a {
        *counts.entry(w.as_str()).or_default() += 1;
    }
    let mut overlap = 0;
    for w in b {
        if let Some(c) = counts.get_mut(w.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    overlap
}

/// Build the claim graph or the evidence graph of `input`. Node ids follow
/// (sentence, tuple, argument) order.
pub fn build_graph(input: &EvidenceSet, origin: Origin) -> Graph {
    let sentences: Vec<&Sentence> = match origin {
        Origin::Claim => vec![&input.claim],
        Origin::Evidence => input.evidence.iter().collect(),
    };
    build_graph_from(sentences.into_iter(), origin)
}

pub fn build_graph_from<'a>(sentences: impl Iterator<Item = &'a Sentence>, origin: Origin) -> Graph {
    let mut nodes: Vec<Node> = Vec::new();
    let mut edges = Vec::new();
    // Index of the tuple each node came from, for the cross-tuple test.
    let mut tuple_of: Vec<usize> = Vec::new();
    let mut tuple_index = 0;
    for sentence in sentences {
        for tuple in &sentence.tuples {
            let base = nodes.len();
            let mut local = extract_nodes(tuple);
            for n in &mut local {
                n.node_id += base;
            }
            edges.extend(intra_tuple_edges(&local));
            tuple_of.extend(std::iter::repeat(tuple_index).take(local.len()));
            nodes.extend(local);
            tuple_index += 1;
        }
    }
    let node_words: Vec<Vec<String>> = nodes.iter().map(Node::words).collect();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if tuple_of[i] != tuple_of[j] && words_link(&node_words[i], &node_words[j]) {
                edges.push(Edge::new(i, j, EdgeKind::CrossTuple));
            }
        }
    }
    edges.sort();
    edges.dedup_by_key(|e| (e.source, e.target));
    Graph {
        origin,
        nodes,
        edges,
    }
}

//! Graph-based evidence ordering.
//!
//! The evidence graph is oriented in document order, cycles are broken, and a
//! depth-first topological sort yields a node order. Evidence sentences are
//! then laid out by the first appearance of their nodes, which puts sentences
//! that share linked nodes next to each other. The encoder's relative
//! positions are taken over this reordered sequence; no N×N word-distance
//! matrix is ever built.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::data::EvidenceSet;
use crate::error::{Error, Result};
use crate::graph::{build_graph, Graph, Origin};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirectedGraph {
    /// Node ids in input order. Traversals start from roots in this order.
    pub nodes: Vec<usize>,
    /// `(parent, child)` pairs, sorted and unique.
    pub relations: Vec<(usize, usize)>,
}

impl DirectedGraph {
    pub fn new(nodes: Vec<usize>, relations: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let known: BTreeSet<usize> = nodes.iter().copied().collect();
        if known.len() != nodes.len() {
            return Err(Error::validation("nodes", "duplicate node id"));
        }
        let relations: BTreeSet<(usize, usize)> = relations.into_iter().collect();
        for &(u, v) in &relations {
            if !known.contains(&u) || !known.contains(&v) {
                return Err(Error::validation(
                    "relations",
                    format!("relation {u}->{v} references an unknown node"),
                ));
            }
        }
        Ok(DirectedGraph {
            nodes,
            relations: relations.into_iter().collect(),
        })
    }

    fn positions(&self) -> HashMap<usize, usize> {
        self.nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect()
    }

    /// Child and parent lists by node position, each ordered by position.
    fn adjacency(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let pos = self.positions();
        let mut children = vec![Vec::new(); self.nodes.len()];
        let mut parents = vec![Vec::new(); self.nodes.len()];
        for &(u, v) in &self.relations {
            children[pos[&u]].push(pos[&v]);
            parents[pos[&v]].push(pos[&u]);
        }
        for list in children.iter_mut().chain(parents.iter_mut()) {
            list.sort_unstable();
        }
        (children, parents)
    }
}

/// Direct every undirected edge from the earlier node to the later one in
/// (sentence, tuple, argument) order, which is node-id order.
pub fn orient_graph(g: &Graph) -> DirectedGraph {
    DirectedGraph {
        nodes: g.nodes.iter().map(|n| n.node_id).collect(),
        relations: g
            .edges
            .iter()
            .map(|e| (e.source.min(e.target), e.source.max(e.target)))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    }
}

/// Back-edges of a depth-first traversal that starts from every unvisited node
/// in input order and visits children in input order. Self-relations are
/// always back-edges.
pub fn back_edges(dg: &DirectedGraph) -> Vec<(usize, usize)> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let (children, _) = dg.adjacency();
    let mut mark = vec![Mark::New; dg.nodes.len()];
    let mut removed = Vec::new();
    for start in 0..dg.nodes.len() {
        if mark[start] != Mark::New {
            continue;
        }
        mark[start] = Mark::Active;
        let mut stack = vec![(start, 0usize)];
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&child) = children[node].get(*next) {
                *next += 1;
                match mark[child] {
                    Mark::New => {
                        mark[child] = Mark::Active;
                        stack.push((child, 0));
                    }
                    Mark::Active => removed.push((dg.nodes[node], dg.nodes[child])),
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    removed.sort_unstable();
    removed
}

/// Remove the back-edges found by [`back_edges`]; the result is acyclic.
pub fn make_acyclic(dg: &DirectedGraph) -> DirectedGraph {
    let removed: BTreeSet<(usize, usize)> = back_edges(dg).into_iter().collect();
    DirectedGraph {
        nodes: dg.nodes.clone(),
        relations: dg
            .relations
            .iter()
            .copied()
            .filter(|r| !removed.contains(r))
            .collect(),
    }
}

/// Depth-first topological sort.
///
/// Roots (nodes without incoming relations) are taken in input order. From
/// each root the traversal descends into children depth-first. A child whose
/// other parents have not been placed yet pulls those ancestors in first, so a
/// node never precedes any of its parents. This is what brings a sentence
/// that shares a node with an early sentence right next to it.
pub fn topology_sort(dg: &DirectedGraph) -> Result<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Place {
        Pending,
        Placing,
        Placed,
    }
    struct Walk<'a> {
        children: &'a [Vec<usize>],
        parents: &'a [Vec<usize>],
        place: Vec<Place>,
        expanded: Vec<bool>,
        order: Vec<usize>,
    }
    impl Walk<'_> {
        // Place `v` after all of its ancestors.
        fn place(&mut self, v: usize) -> std::result::Result<(), usize> {
            match self.place[v] {
                Place::Placed => return Ok(()),
                Place::Placing => return Err(v),
                Place::Pending => {}
            }
            self.place[v] = Place::Placing;
            for i in 0..self.parents[v].len() {
                let p = self.parents[v][i];
                self.place(p)?;
            }
            self.place[v] = Place::Placed;
            self.order.push(v);
            Ok(())
        }

        fn visit(&mut self, v: usize) -> std::result::Result<(), usize> {
            if self.expanded[v] {
                return Ok(());
            }
            self.place(v)?;
            self.expanded[v] = true;
            for i in 0..self.children[v].len() {
                let c = self.children[v][i];
                self.visit(c)?;
            }
            Ok(())
        }
    }

    let (children, parents) = dg.adjacency();
    let n = dg.nodes.len();
    let mut walk = Walk {
        children: &children,
        parents: &parents,
        place: vec![Place::Pending; n],
        expanded: vec![false; n],
        order: Vec::with_capacity(n),
    };
    let roots = (0..n).filter(|&v| parents[v].is_empty());
    // The trailing pass only matters for cyclic input, where some nodes have
    // no root ancestor; it turns those into a reported cycle.
    for v in roots.chain(0..n) {
        walk.visit(v).map_err(|pos| Error::Cycle(dg.nodes[pos]))?;
    }
    Ok(walk.order.into_iter().map(|p| dg.nodes[p]).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SortedOrder {
    /// Topologically sorted node ids.
    pub nodes: Vec<usize>,
    /// Sentence of each entry of `nodes`.
    pub node_sentences: Vec<String>,
}

impl SortedOrder {
    pub fn new(graph: &Graph, nodes: Vec<usize>) -> SortedOrder {
        let node_sentences = nodes
            .iter()
            .map(|&id| graph.nodes[id].sentence_id.clone())
            .collect();
        SortedOrder {
            nodes,
            node_sentences,
        }
    }
}

/// Evidence sentence ids ordered by the first appearance of any of their nodes
/// in `so`; sentences without nodes follow in original order.
pub fn reorder_sentences(es: &EvidenceSet, so: &SortedOrder) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(es.evidence.len());
    let mut seen = BTreeSet::new();
    for sid in &so.node_sentences {
        if es.evidence_sentence(sid).is_some() && seen.insert(sid.as_str()) {
            out.push(sid.clone());
        }
    }
    for s in &es.evidence {
        if !seen.contains(s.sentence_id.as_str()) {
            out.push(s.sentence_id.clone());
        }
    }
    out
}

/// Result of the whole ordering pipeline for one instance.
#[derive(Debug, Clone, Serialize)]
pub struct EvidenceOrder {
    pub node_order: Vec<usize>,
    pub sentence_order: Vec<String>,
    pub removed_relations: Vec<(usize, usize)>,
}

/// Build the evidence graph, orient it, break cycles, sort, and reorder.
pub fn order_evidence(es: &EvidenceSet) -> EvidenceOrder {
    let graph = build_graph(es, Origin::Evidence);
    order_evidence_graph(es, &graph)
}

pub fn order_evidence_graph(es: &EvidenceSet, graph: &Graph) -> EvidenceOrder {
    let directed = orient_graph(graph);
    let removed_relations = back_edges(&directed);
    let acyclic = make_acyclic(&directed);
    let node_order = topology_sort(&acyclic).expect("make_acyclic output has no cycles");
    let so = SortedOrder::new(graph, node_order);
    EvidenceOrder {
        sentence_order: reorder_sentences(es, &so),
        node_order: so.nodes,
        removed_relations,
    }
}

/// Evidence sentence ids in document order.
pub fn document_order(es: &EvidenceSet) -> Vec<String> {
    es.evidence.iter().map(|s| s.sentence_id.clone()).collect()
}

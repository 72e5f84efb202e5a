//! Weighted graphs and the Dijkstra oracle used to check the gadget
//! reductions.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edge- and optionally node-weighted graph.
///
/// Serialized as `{"n":…, "directed":…, "edges":[[a,b,w],…], "node_weights":[…]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedGraph {
    pub n: usize,
    pub directed: bool,
    pub edges: Vec<(usize, usize, i64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_weights: Option<Vec<i64>>,
}

impl WeightedGraph {
    pub fn new(n: usize, directed: bool) -> Self {
        WeightedGraph { n, directed, edges: Vec::new(), node_weights: None }
    }

    pub fn add_edge(&mut self, a: usize, b: usize, w: i64) {
        debug_assert!(a != b, "no self-loops");
        self.edges.push((a, b, w));
    }

    fn adjacency(&self) -> Vec<Vec<(usize, i64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b, w) in &self.edges {
            adj[a].push((b, w));
            if !self.directed {
                adj[b].push((a, w));
            }
        }
        adj
    }

    /// Single-source shortest path distances (edge weights only), `None` for
    /// unreachable vertices. Requires nonnegative weights.
    pub fn dijkstra(&self, source: usize) -> Result<Vec<Option<i64>>> {
        if self.edges.iter().any(|&(_, _, w)| w < 0) {
            return Err(Error::domain("Dijkstra requires nonnegative edge weights"));
        }
        let adj = self.adjacency();
        let mut dist: Vec<Option<i64>> = vec![None; self.n];
        let mut heap = BinaryHeap::new();
        dist[source] = Some(0);
        heap.push(Reverse((0i64, source)));
        while let Some(Reverse((d, v))) = heap.pop() {
            if dist[v] != Some(d) {
                continue;
            }
            for &(to, w) in &adj[v] {
                let nd = d + w;
                if dist[to].map_or(true, |cur| nd < cur) {
                    dist[to] = Some(nd);
                    heap.push(Reverse((nd, to)));
                }
            }
        }
        Ok(dist)
    }

    /// Node-weighted shortest path distances from `source`: the weight of a
    /// path is the sum of the weights of *all* nodes on it (endpoints
    /// included). Node weights are folded into edges by charging each edge
    /// its head's weight, with the source's weight added once.
    pub fn dijkstra_node_weighted(&self, source: usize) -> Result<Vec<Option<i64>>> {
        let Some(weights) = &self.node_weights else {
            return Err(Error::domain("graph has no node weights"));
        };
        if weights.len() != self.n {
            return Err(Error::shape("node weight table has wrong length"));
        }
        if weights.iter().any(|&w| w < 0) {
            return Err(Error::domain("node-weighted Dijkstra requires nonnegative weights"));
        }
        let mut folded = WeightedGraph::new(self.n, true);
        for &(a, b, w) in &self.edges {
            folded.add_edge(a, b, w + weights[b]);
            if !self.directed {
                folded.add_edge(b, a, w + weights[a]);
            }
        }
        let dist = folded.dijkstra(source)?;
        Ok(dist
            .into_iter()
            .map(|d| d.map(|d| d + weights[source]))
            .collect())
    }
}

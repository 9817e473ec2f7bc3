//! Network topologies: the growing 4×4 grid family and user-supplied graphs.
//!
//! Nodes carry integer grid coordinates. The growing family places nodes in a
//! fixed order and links each new node to already-placed horizontal, vertical
//! and anti-diagonal neighbours. Main-diagonal pairs are never linked, so the
//! three-node network is a triangle and the fourth node adds exactly two edges.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid pitch of the growing topology.
pub const DEFAULT_PITCH_KM: f64 = 300.0;

pub const MIN_GROWING_NODES: usize = 3;
pub const MAX_GROWING_NODES: usize = 16;

/// Placement order (col, row) for nodes N1..N16.
pub const GROWING_COORDS: [(i32, i32); MAX_GROWING_NODES] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (1, 1),
    (2, 0),
    (2, 1),
    (0, 2),
    (1, 2),
    (2, 2),
    (3, 0),
    (3, 1),
    (3, 2),
    (0, 3),
    (1, 3),
    (2, 3),
    (3, 3),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub col: i32,
    pub row: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length_km: f64,
}

impl Edge {
    pub fn connects(&self, u: usize, v: usize) -> bool {
        (self.a == u && self.b == v) || (self.a == v && self.b == u)
    }
}

/// Undirected, connected network graph. Node ids are consecutive from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub pitch_km: f64,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl Topology {
    /// Validates and builds a topology.
    pub fn new(pitch_km: f64, nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self> {
        let mut topo = Topology {
            pitch_km,
            nodes,
            edges,
            adjacency: Vec::new(),
        };
        topo.validate()?;
        topo.rebuild_adjacency();
        Ok(topo)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Neighbours of node `id` with edge lengths, sorted by neighbour id.
    pub fn neighbors(&self, id: usize) -> &[(usize, f64)] {
        &self.adjacency[id - 1]
    }

    pub fn edge_length(&self, u: usize, v: usize) -> Option<f64> {
        if u == 0 || u > self.nodes.len() {
            return None;
        }
        self.neighbors(u)
            .iter()
            .find(|(w, _)| *w == v)
            .map(|(_, len)| *len)
    }

    /// Sum of edge lengths along a node sequence, or `None` if two
    /// consecutive nodes are not adjacent.
    pub fn path_length(&self, nodes: &[usize]) -> Option<f64> {
        nodes
            .windows(2)
            .map(|w| self.edge_length(w[0], w[1]))
            .sum()
    }

    fn rebuild_adjacency(&mut self) {
        let mut adjacency = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adjacency[e.a - 1].push((e.b, e.length_km));
            adjacency[e.b - 1].push((e.a, e.length_km));
        }
        for list in &mut adjacency {
            list.sort_by_key(|(id, _)| *id);
        }
        self.adjacency = adjacency;
    }

    fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidTopology(msg));
        if self.nodes.is_empty() {
            return invalid("no nodes".into());
        }
        let mut coords = HashSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i + 1 {
                return invalid(format!("node ids must be consecutive from 1, found {} at position {}", n.id, i));
            }
            if !coords.insert((n.col, n.row)) {
                return invalid(format!("duplicate coordinate ({}, {})", n.col, n.row));
            }
        }
        let n = self.nodes.len();
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            if e.a == 0 || e.a > n || e.b == 0 || e.b > n {
                return invalid(format!("edge {}-{} references a missing node", e.a, e.b));
            }
            if e.a == e.b {
                return invalid(format!("self-loop at node {}", e.a));
            }
            if !(e.length_km > 0.0 && e.length_km.is_finite()) {
                return invalid(format!("edge {}-{} has non-positive length {}", e.a, e.b, e.length_km));
            }
            if !seen.insert((e.a.min(e.b), e.a.max(e.b))) {
                return invalid(format!("duplicate edge {}-{}", e.a, e.b));
            }
        }
        // connectivity
        let mut adjacency = vec![Vec::new(); n];
        for e in &self.edges {
            adjacency[e.a - 1].push(e.b - 1);
            adjacency[e.b - 1].push(e.a - 1);
        }
        let mut visited = vec![false; n];
        let mut stack = vec![0];
        visited[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adjacency[u] {
                if !visited[v] {
                    visited[v] = true;
                    stack.push(v);
                }
            }
        }
        if let Some(missing) = visited.iter().position(|v| !v) {
            return invalid(format!("graph is disconnected (node {} unreachable)", missing + 1));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Topology = serde_json::from_str(text)?;
        Topology::new(raw.pitch_km, raw.nodes, raw.edges)
    }
}

/// Builds the growing grid network with `n_nodes` nodes at 300 km pitch.
pub fn build_growing_topology(n_nodes: usize) -> Result<Topology> {
    build_growing_topology_with_pitch(n_nodes, DEFAULT_PITCH_KM)
}

pub fn build_growing_topology_with_pitch(n_nodes: usize, pitch_km: f64) -> Result<Topology> {
    if !(MIN_GROWING_NODES..=MAX_GROWING_NODES).contains(&n_nodes) {
        return Err(Error::InvalidArgument(format!(
            "growing topology supports {MIN_GROWING_NODES}..={MAX_GROWING_NODES} nodes, got {n_nodes}"
        )));
    }
    let nodes: Vec<Node> = GROWING_COORDS[..n_nodes]
        .iter()
        .enumerate()
        .map(|(i, &(col, row))| Node { id: i + 1, col, row })
        .collect();
    let diagonal = pitch_km * std::f64::consts::SQRT_2;
    let mut edges = Vec::new();
    for new in &nodes {
        for old in nodes.iter().take(new.id - 1) {
            let dx = new.col - old.col;
            let dy = new.row - old.row;
            let length_km = match (dx, dy) {
                (0, 1) | (0, -1) | (1, 0) | (-1, 0) => pitch_km,
                // anti-diagonal: (x+1, y) -- (x, y+1)
                (1, -1) | (-1, 1) => diagonal,
                _ => continue,
            };
            edges.push(Edge {
                a: old.id,
                b: new.id,
                length_km,
            });
        }
    }
    Topology::new(pitch_km, nodes, edges)
}

pub fn load_topology(path: impl AsRef<Path>) -> Result<Topology> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Topology::from_json(&text)
}

pub fn save_topology(topology: &Topology, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, topology.to_json()?).map_err(|e| Error::io(path, e))
}

//! Candidate routing: loop-free transmission paths per demand, their
//! segmentations into circuit paths within optical reach, and the catalog
//! that indexes circuit paths `C` and patterns `T`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Topology;
use crate::traffic::{Demand, DemandSet};

/// Maximal optical reach of a single circuit.
pub const DEFAULT_REACH_KM: f64 = 1000.0;
pub const DEFAULT_K_PATHS: usize = 2;
pub const DEFAULT_MAX_PATTERNS: usize = 4;

const MAX_SEGMENTED_EDGES: usize = 24;

/// Total order on path lengths that treats round-off differences as ties.
pub(crate) fn cmp_length(a: f64, b: f64) -> Ordering {
    let tol = 1e-9 * a.abs().max(b.abs()).max(1.0);
    if (a - b).abs() <= tol {
        Ordering::Equal
    } else {
        a.partial_cmp(&b).unwrap_or(Ordering::Equal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionPath {
    pub nodes: Vec<usize>,
    pub length_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitPath {
    pub nodes: Vec<usize>,
    pub length_km: f64,
}

impl CircuitPath {
    pub fn source(&self) -> usize {
        self.nodes[0]
    }

    pub fn target(&self) -> usize {
        *self.nodes.last().expect("circuit path has at least two nodes")
    }

    pub fn is_direct(&self) -> bool {
        self.nodes.len() == 2
    }
}

/// A segmentation of a transmission path into consecutive circuit paths,
/// each given by its node sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitPathPattern {
    pub segments: Vec<Vec<usize>>,
}

impl CircuitPathPattern {
    /// Node sequence obtained by concatenating the segments.
    pub fn concatenated(&self) -> Vec<usize> {
        let mut nodes = self.segments[0].clone();
        for seg in &self.segments[1..] {
            nodes.extend_from_slice(&seg[1..]);
        }
        nodes
    }

    fn edge_counts(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.len() - 1).collect()
    }
}

fn lexicographic_path_order(a: (&[usize], f64), b: (&[usize], f64)) -> Ordering {
    cmp_length(a.1, b.1).then_with(|| a.0.cmp(b.0))
}

#[derive(Debug, PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographically smallest among the shortest paths from `from` to `to`
/// avoiding `blocked_nodes` and `blocked_edges` (undirected, stored with the
/// smaller id first).
fn lex_shortest_path(
    topology: &Topology,
    from: usize,
    to: usize,
    blocked_nodes: &HashSet<usize>,
    blocked_edges: &HashSet<(usize, usize)>,
) -> Option<Vec<usize>> {
    let n = topology.node_count();
    let edge_ok = |u: usize, v: usize| !blocked_edges.contains(&(u.min(v), u.max(v)));
    // distances to `to`
    let mut dist = vec![f64::INFINITY; n + 1];
    let mut heap = BinaryHeap::new();
    dist[to] = 0.0;
    heap.push(HeapEntry(0.0, to));
    while let Some(HeapEntry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in topology.neighbors(u) {
            if blocked_nodes.contains(&v) || !edge_ok(u, v) {
                continue;
            }
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapEntry(nd, v));
            }
        }
    }
    if !dist[from].is_finite() {
        return None;
    }
    let mut path = vec![from];
    let mut u = from;
    while u != to {
        let next = topology.neighbors(u).iter().find(|&&(v, w)| {
            !blocked_nodes.contains(&v)
                && edge_ok(u, v)
                && dist[v].is_finite()
                && cmp_length(dist[u], w + dist[v]) == Ordering::Equal
        })?;
        u = next.0;
        path.push(u);
    }
    Some(path)
}

/// Up to `k` loop-free paths for the demand in ascending length, ties broken
/// by node sequence (Yen's algorithm).
pub fn k_shortest_transmission_paths(
    topology: &Topology,
    demand: &Demand,
    k: usize,
) -> Result<Vec<TransmissionPath>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let (s, t) = (demand.source, demand.target);
    let n = topology.node_count();
    if s == t {
        return Err(Error::InvalidArgument(format!("demand {s}->{t} has equal endpoints")));
    }
    if s == 0 || s > n || t == 0 || t > n {
        return Err(Error::InvalidArgument(format!("demand {s}->{t} references a missing node")));
    }
    let first = lex_shortest_path(topology, s, t, &HashSet::new(), &HashSet::new())
        .ok_or(Error::NoPath { source_node: s, target: t })?;
    let mut accepted: Vec<Vec<usize>> = vec![first];
    let mut candidates: Vec<(Vec<usize>, f64)> = Vec::new();

    while accepted.len() < k {
        let previous = accepted.last().unwrap().clone();
        for i in 0..previous.len() - 1 {
            let spur = previous[i];
            let root = &previous[..=i];
            let mut blocked_edges = HashSet::new();
            for p in &accepted {
                if p.len() > i + 1 && &p[..=i] == root {
                    blocked_edges.insert((p[i].min(p[i + 1]), p[i].max(p[i + 1])));
                }
            }
            let blocked_nodes: HashSet<usize> = root[..i].iter().copied().collect();
            let Some(spur_path) = lex_shortest_path(topology, spur, t, &blocked_nodes, &blocked_edges) else {
                continue;
            };
            let mut total = root[..i].to_vec();
            total.extend(spur_path);
            if accepted.contains(&total) || candidates.iter().any(|(c, _)| c == &total) {
                continue;
            }
            let len = topology.path_length(&total).expect("spur path follows edges");
            candidates.push((total, len));
        }
        let Some(best) = candidates
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| lexicographic_path_order((&a.0, a.1), (&b.0, b.1)))
            .map(|(i, _)| i)
        else {
            break;
        };
        accepted.push(candidates.swap_remove(best).0);
    }

    Ok(accepted
        .into_iter()
        .map(|nodes| {
            let length_km = topology.path_length(&nodes).expect("path follows edges");
            TransmissionPath { nodes, length_km }
        })
        .collect())
}

/// All segmentations of `path` into circuit paths no longer than `reach_km`.
///
/// The all-single-edge pattern comes first; the rest follow by ascending
/// number of circuits, ties by descending segment edge counts compared
/// lexicographically (longest first segment first). At most `max_patterns`
/// are returned.
pub fn enumerate_patterns(
    topology: &Topology,
    path: &TransmissionPath,
    reach_km: f64,
    max_patterns: usize,
) -> Result<Vec<CircuitPathPattern>> {
    if reach_km.is_nan() || reach_km <= 0.0 {
        return Err(Error::InvalidArgument(format!("reach must be positive, got {reach_km}")));
    }
    if max_patterns == 0 {
        return Err(Error::InvalidArgument("pattern cap must be at least 1".into()));
    }
    let nodes = &path.nodes;
    if nodes.len() < 2 {
        return Err(Error::InvalidArgument("transmission path needs at least two nodes".into()));
    }
    let edges = nodes.len() - 1;
    if edges > MAX_SEGMENTED_EDGES {
        return Err(Error::InvalidArgument(format!("path with {edges} edges is too long to segment")));
    }
    let within_reach = |seg: &[usize]| -> Result<bool> {
        let len = topology
            .path_length(seg)
            .ok_or_else(|| Error::InvalidArgument(format!("path {seg:?} does not follow topology edges")))?;
        Ok(cmp_length(len, reach_km) != Ordering::Greater)
    };
    for w in nodes.windows(2) {
        if !within_reach(w)? {
            return Err(Error::ReachExceeded {
                a: w[0],
                b: w[1],
                length_km: topology.edge_length(w[0], w[1]).unwrap_or(f64::NAN),
                reach_km,
            });
        }
    }

    let mut patterns = Vec::new();
    // bit i of `cuts` set: a circuit boundary after edge i
    for cuts in 0u32..(1u32 << (edges - 1)) {
        let mut segments = Vec::new();
        let mut start = 0;
        for i in 0..edges {
            let boundary = i == edges - 1 || cuts & (1 << i) != 0;
            if boundary {
                segments.push(nodes[start..=i + 1].to_vec());
                start = i + 1;
            }
        }
        let mut ok = true;
        for seg in &segments {
            if !within_reach(seg)? {
                ok = false;
                break;
            }
        }
        if ok {
            patterns.push(CircuitPathPattern { segments });
        }
    }
    patterns.sort_by(|a, b| {
        let a_single = a.segments.len() == edges;
        let b_single = b.segments.len() == edges;
        b_single
            .cmp(&a_single)
            .then_with(|| a.segments.len().cmp(&b.segments.len()))
            .then_with(|| b.edge_counts().cmp(&a.edge_counts()))
    });
    patterns.truncate(max_patterns);
    Ok(patterns)
}

/// Element of `T`: one segmentation of one transmission path of one demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    pub demand: usize,
    /// Index into the demand's transmission path list.
    pub path: usize,
    /// Indices into the catalog's circuit paths, in traversal order.
    pub circuits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCatalog {
    pub reach_km: f64,
    pub k: usize,
    pub max_patterns: usize,
    pub n_nodes: usize,
    pub circuit_paths: Vec<CircuitPath>,
    pub transmission_paths: Vec<Vec<TransmissionPath>>,
    pub patterns: Vec<PatternEntry>,
}

impl PathCatalog {
    pub fn n_demands(&self) -> usize {
        self.transmission_paths.len()
    }

    pub fn n_patterns(&self) -> usize {
        self.patterns.len()
    }

    pub fn n_circuits(&self) -> usize {
        self.circuit_paths.len()
    }

    /// Column range of `T_d` inside `T`.
    pub fn demand_patterns(&self, demand: usize) -> Range<usize> {
        let start = self.patterns.partition_point(|p| p.demand < demand);
        let end = self.patterns.partition_point(|p| p.demand <= demand);
        start..end
    }

    /// Pattern indices forming `R_{d,l}`.
    pub fn path_patterns(&self, demand: usize, path: usize) -> Vec<usize> {
        self.demand_patterns(demand)
            .filter(|&t| self.patterns[t].path == path)
            .collect()
    }

    /// Nonzero coordinates `(c, t)` of the usage matrix ρ.
    pub fn rho(&self) -> Vec<(usize, usize)> {
        let mut coords: Vec<(usize, usize)> = self
            .patterns
            .iter()
            .enumerate()
            .flat_map(|(t, p)| p.circuits.iter().map(move |&c| (c, t)))
            .collect();
        coords.sort_unstable();
        coords
    }

    /// Nonzero coordinates `(v, c)` of the endpoint matrix φ, with `v` a
    /// 0-based node row.
    pub fn phi(&self) -> Vec<(usize, usize)> {
        let mut coords: Vec<(usize, usize)> = self
            .circuit_paths
            .iter()
            .enumerate()
            .flat_map(|(c, cp)| [(cp.source() - 1, c), (cp.target() - 1, c)])
            .collect();
        coords.sort_unstable();
        coords
    }

    pub fn pattern_nodes(&self, t: usize) -> Vec<usize> {
        let p = &self.patterns[t];
        let segments = p
            .circuits
            .iter()
            .map(|&c| self.circuit_paths[c].nodes.clone())
            .collect();
        CircuitPathPattern { segments }.concatenated()
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("inconsistent catalog: {m}")));
        let mut used = vec![false; self.circuit_paths.len()];
        let mut last_demand = 0;
        for (t, p) in self.patterns.iter().enumerate() {
            if p.demand >= self.n_demands() || p.demand < last_demand {
                return bad(format!("pattern {t} out of demand order"));
            }
            last_demand = p.demand;
            let Some(path) = self.transmission_paths[p.demand].get(p.path) else {
                return bad(format!("pattern {t} references missing path"));
            };
            if p.circuits.is_empty() || p.circuits.iter().any(|&c| c >= used.len()) {
                return bad(format!("pattern {t} references missing circuit"));
            }
            for &c in &p.circuits {
                used[c] = true;
            }
            if self.pattern_nodes(t) != path.nodes {
                return bad(format!("pattern {t} does not cover its transmission path"));
            }
        }
        if let Some(c) = used.iter().position(|u| !u) {
            return bad(format!("circuit path {c} is unused"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Dump<'a> {
            #[serde(flatten)]
            catalog: &'a PathCatalog,
            rho: Vec<(usize, usize)>,
            phi: Vec<(usize, usize)>,
        }
        Ok(serde_json::to_string_pretty(&Dump {
            catalog: self,
            rho: self.rho(),
            phi: self.phi(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // rho/phi in the dump are derived data and ignored on load
        let catalog: PathCatalog = serde_json::from_str(text)?;
        catalog.check()?;
        Ok(catalog)
    }
}

/// Builds `C`, `L_d`, `R_{d,l}` and `T` for every demand in order.
///
/// Circuit paths are indexed in order of first use, so `C` only ever holds
/// circuit paths that some pattern references.
pub fn build_catalog(
    topology: &Topology,
    demands: &DemandSet,
    k: usize,
    max_patterns: usize,
    reach_km: f64,
) -> Result<PathCatalog> {
    demands.validate(topology)?;
    let mut circuit_index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut circuit_paths = Vec::new();
    let mut transmission_paths = Vec::with_capacity(demands.len());
    let mut patterns = Vec::new();

    for (d, demand) in demands.demands.iter().enumerate() {
        let paths = k_shortest_transmission_paths(topology, demand, k)?;
        for (l, path) in paths.iter().enumerate() {
            for pattern in enumerate_patterns(topology, path, reach_km, max_patterns)? {
                let circuits = pattern
                    .segments
                    .into_iter()
                    .map(|seg| {
                        *circuit_index.entry(seg.clone()).or_insert_with(|| {
                            let length_km = topology.path_length(&seg).expect("segment follows edges");
                            circuit_paths.push(CircuitPath { nodes: seg, length_km });
                            circuit_paths.len() - 1
                        })
                    })
                    .collect();
                patterns.push(PatternEntry {
                    demand: d,
                    path: l,
                    circuits,
                });
            }
        }
        transmission_paths.push(paths);
    }

    Ok(PathCatalog {
        reach_km,
        k,
        max_patterns,
        n_nodes: topology.node_count(),
        circuit_paths,
        transmission_paths,
        patterns,
    })
}

pub fn save_catalog(catalog: &PathCatalog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, catalog.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<PathCatalog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    PathCatalog::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::build_growing_topology;
    use crate::traffic::sample_demands;

    fn demand(source: usize, target: usize) -> Demand {
        Demand {
            source,
            target,
            volume_gbps: 50.0,
        }
    }

    #[test]
    fn triangle_two_paths() {
        let t = build_growing_topology(3).unwrap();
        let paths = k_shortest_transmission_paths(&t, &demand(1, 3), 2).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].nodes, vec![1, 3]);
        assert_eq!(paths[0].length_km, 300.0);
        assert_eq!(paths[1].nodes, vec![1, 2, 3]);
        assert!((paths[1].length_km - 724.264_068_711_928_5).abs() < 1e-9);

        let one = k_shortest_transmission_paths(&t, &demand(1, 3), 1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].nodes, vec![1, 3]);

        // only two loop-free paths exist on a triangle
        assert_eq!(k_shortest_transmission_paths(&t, &demand(1, 3), 5).unwrap().len(), 2);
    }

    #[test]
    fn equal_endpoints_rejected() {
        let t = build_growing_topology(3).unwrap();
        assert!(k_shortest_transmission_paths(&t, &demand(1, 1), 2).is_err());
        assert!(k_shortest_transmission_paths(&t, &demand(1, 2), 0).is_err());
    }

    #[test]
    fn bypass_pattern_follows_single_edge_pattern() {
        let t = build_growing_topology(3).unwrap();
        let path = TransmissionPath {
            nodes: vec![1, 2, 3],
            length_km: t.path_length(&[1, 2, 3]).unwrap(),
        };
        let patterns = enumerate_patterns(&t, &path, DEFAULT_REACH_KM, 4).unwrap();
        assert_eq!(patterns.len(), 2);
        assert_eq!(patterns[0].segments, vec![vec![1, 2], vec![2, 3]]);
        assert_eq!(patterns[1].segments, vec![vec![1, 2, 3]]);
    }

    #[test]
    fn single_edge_has_one_pattern() {
        let t = build_growing_topology(3).unwrap();
        let path = TransmissionPath {
            nodes: vec![1, 2],
            length_km: 300.0,
        };
        let patterns = enumerate_patterns(&t, &path, DEFAULT_REACH_KM, 4).unwrap();
        assert_eq!(patterns, vec![CircuitPathPattern { segments: vec![vec![1, 2]] }]);
    }

    #[test]
    fn four_straight_edges_respect_reach() {
        // N1-N2-N5-N10 runs along row 0 and is extended down to N11: 4 edges of 300 km
        let t = build_growing_topology(11).unwrap();
        let nodes = vec![1, 2, 5, 10, 11];
        let path = TransmissionPath {
            length_km: t.path_length(&nodes).unwrap(),
            nodes,
        };
        assert_eq!(path.length_km, 1200.0);
        let patterns = enumerate_patterns(&t, &path, 1000.0, 100).unwrap();
        let counts: Vec<Vec<usize>> = patterns.iter().map(|p| p.edge_counts()).collect();
        assert_eq!(
            counts,
            vec![
                vec![1, 1, 1, 1],
                vec![3, 1],
                vec![2, 2],
                vec![1, 3],
                vec![2, 1, 1],
                vec![1, 2, 1],
                vec![1, 1, 2],
            ]
        );
        assert_eq!(enumerate_patterns(&t, &path, 1000.0, 4).unwrap().len(), 4);
    }

    #[test]
    fn reach_shorter_than_an_edge_fails() {
        let t = build_growing_topology(3).unwrap();
        let path = TransmissionPath {
            nodes: vec![2, 3],
            length_km: t.path_length(&[2, 3]).unwrap(),
        };
        assert!(matches!(
            enumerate_patterns(&t, &path, 400.0, 4),
            Err(Error::ReachExceeded { .. })
        ));
    }

    #[test]
    fn three_node_catalog_sizes() {
        let t = build_growing_topology(3).unwrap();
        let d = sample_demands(&t, 75.0, 10.0, 42).unwrap();
        let cat = build_catalog(&t, &d, 2, 4, DEFAULT_REACH_KM).unwrap();
        assert_eq!(cat.n_demands(), 6);
        assert_eq!(cat.n_patterns(), 18);
        assert_eq!(cat.n_circuits(), 12);
        assert_eq!(cat.circuit_paths.iter().filter(|c| c.is_direct()).count(), 6);
        for d in 0..6 {
            assert_eq!(cat.demand_patterns(d).len(), 3);
            assert_eq!(cat.path_patterns(d, 0).len(), 1);
            assert_eq!(cat.path_patterns(d, 1).len(), 2);
        }
        let direct = build_catalog(&t, &d, 1, 4, DEFAULT_REACH_KM).unwrap();
        assert_eq!(direct.n_patterns(), 6);
        assert!(direct.circuit_paths.iter().all(|c| c.is_direct()));
    }

    #[test]
    fn catalog_json_round_trip() {
        let t = build_growing_topology(4).unwrap();
        let d = sample_demands(&t, 75.0, 20.0, 3).unwrap();
        let cat = build_catalog(&t, &d, 2, 4, DEFAULT_REACH_KM).unwrap();
        let text = cat.to_json().unwrap();
        assert!(text.contains("\"rho\""));
        assert_eq!(PathCatalog::from_json(&text).unwrap(), cat);
    }
}

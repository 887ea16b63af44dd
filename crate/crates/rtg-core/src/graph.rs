//! The transition graph itself: one node per region, one edge per pair of
//! activation patterns at Hamming distance exactly 1.
//!
//! Built this way, the graph embeds in the `n`-dimensional hypercube, so it
//! is always simple and bipartite (by popcount parity). Sampled graphs can
//! be disconnected; consumers pick a component explicitly.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::regions::RegionTable;

/// Undirected graph over region ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rtg {
    pub node_count: usize,
    /// Pattern length of the underlying regions.
    pub n_bits: usize,
    /// Edges as `(i, j)` with `i < j`, sorted lexicographically.
    pub edges: Vec<(u32, u32)>,
    /// Sorted neighbor list per node.
    adjacency: Vec<Vec<u32>>,
}

impl Rtg {
    /// Assembles a graph from an explicit edge list, deduplicating and
    /// rejecting self-loops and out-of-range endpoints.
    pub fn from_edges(node_count: usize, n_bits: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut normalized: Vec<(u32, u32)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Malformed(format!("self-loop at node {a}")));
            }
            if a as usize >= node_count || b as usize >= node_count {
                return Err(Error::Malformed(format!(
                    "edge ({a}, {b}) exceeds node count {node_count}"
                )));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        normalized.dedup();
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in &normalized {
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self {
            node_count,
            n_bits,
            edges: normalized,
            adjacency,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, node: u32) -> &[u32] {
        &self.adjacency[node as usize]
    }

    pub fn degree(&self, node: u32) -> usize {
        self.adjacency[node as usize].len()
    }

    /// Relabels a subset of nodes as `0..subset.len()` (in the given order)
    /// and keeps only edges internal to the subset.
    pub fn induced_subgraph(&self, subset: &[u32]) -> Result<Self> {
        let mut new_id = vec![u32::MAX; self.node_count];
        for (new, &old) in subset.iter().enumerate() {
            if old as usize >= self.node_count {
                return Err(Error::Malformed(format!("node {old} out of range")));
            }
            if new_id[old as usize] != u32::MAX {
                return Err(Error::Malformed(format!("node {old} listed twice")));
            }
            new_id[old as usize] = new as u32;
        }
        let edges = self.edges.iter().filter_map(|&(a, b)| {
            let (na, nb) = (new_id[a as usize], new_id[b as usize]);
            (na != u32::MAX && nb != u32::MAX).then_some((na, nb))
        });
        Self::from_edges(subset.len(), self.n_bits, edges)
    }
}

/// Connects every pair of regions whose patterns differ in exactly one bit.
///
/// Each of a region's `n` single-bit flips is looked up in the table index
/// (O(N·n) expected time); a hit at a higher id adds the edge once.
pub fn build_rtg(table: &RegionTable) -> Result<Rtg> {
    if table.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut edges = Vec::new();
    for region in &table.regions {
        let mut probe = region.pattern.clone();
        for bit in 0..table.n_bits {
            probe.flip_in_place(bit);
            if let Some(other) = table.lookup(&probe)? {
                if other > region.id {
                    edges.push((region.id, other));
                }
            }
            probe.flip_in_place(bit);
        }
    }
    Rtg::from_edges(table.len(), table.n_bits, edges)
}

/// Per-node degrees with summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub degrees: Vec<usize>,
    pub mean_degree: f64,
    /// Count of nodes at each occurring degree.
    pub histogram: BTreeMap<usize, usize>,
    /// Pattern length; the maximum possible degree.
    pub n_bits: usize,
    /// Estimated per-bit transition probability `mean_degree / n_bits`.
    pub p_hat: f64,
}

impl DegreeStats {
    /// Pools the degree sequences of several graphs over the same pattern
    /// length; used to aggregate across seeds.
    pub fn from_degrees(degrees: Vec<usize>, n_bits: usize) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mean_degree = degrees.iter().sum::<usize>() as f64 / degrees.len() as f64;
        let mut histogram = BTreeMap::new();
        for &d in &degrees {
            *histogram.entry(d).or_insert(0) += 1;
        }
        Ok(Self {
            degrees,
            mean_degree,
            histogram,
            n_bits,
            p_hat: mean_degree / n_bits as f64,
        })
    }
}

pub fn degree_stats(g: &Rtg) -> Result<DegreeStats> {
    if g.node_count == 0 {
        return Err(Error::EmptyInput);
    }
    let degrees = (0..g.node_count as u32).map(|v| g.degree(v)).collect();
    DegreeStats::from_degrees(degrees, g.n_bits)
}

/// Partition of the nodes into connected components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentInfo {
    /// Component label per node; labels count up from 0 in order of each
    /// component's smallest node id.
    pub component_id: Vec<u32>,
    /// Component sizes, largest first.
    pub sizes: Vec<usize>,
    /// Node ids of one largest component (ties broken by smallest label).
    pub largest: Vec<u32>,
}

impl ComponentInfo {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }
}

/// Breadth-first component labeling, deterministic for a given graph.
pub fn connected_components(g: &Rtg) -> ComponentInfo {
    let mut component_id = vec![u32::MAX; g.node_count];
    let mut members: Vec<Vec<u32>> = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for start in 0..g.node_count as u32 {
        if component_id[start as usize] != u32::MAX {
            continue;
        }
        let label = members.len() as u32;
        let mut nodes = vec![start];
        component_id[start as usize] = label;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for &w in g.neighbors(v) {
                if component_id[w as usize] == u32::MAX {
                    component_id[w as usize] = label;
                    nodes.push(w);
                    queue.push_back(w);
                }
            }
        }
        nodes.sort_unstable();
        members.push(nodes);
    }
    let mut largest_label = 0usize;
    for l in 1..members.len() {
        if members[l].len() > members[largest_label].len() {
            largest_label = l;
        }
    }
    let mut with_sizes: Vec<usize> = members.iter().map(|m| m.len()).collect();
    let largest = members.get(largest_label).cloned().unwrap_or_default();
    with_sizes.sort_unstable_by(|a, b| b.cmp(a));
    ComponentInfo {
        component_id,
        sizes: with_sizes,
        largest,
    }
}

/// Exhaustive O(N²·n) oracle: true iff the graph's edges are exactly the
/// pattern pairs at Hamming distance 1. Intended for tests on small tables.
pub fn verify_rtg_bruteforce(table: &RegionTable, g: &Rtg) -> Result<bool> {
    if table.len() != g.node_count {
        return Ok(false);
    }
    let mut expected = Vec::new();
    for i in 0..table.regions.len() {
        for j in (i + 1)..table.regions.len() {
            if table.regions[i].pattern.hamming(&table.regions[j].pattern)? == 1 {
                expected.push((table.regions[i].id, table.regions[j].id));
            }
        }
    }
    expected.sort_unstable();
    Ok(expected == g.edges)
}

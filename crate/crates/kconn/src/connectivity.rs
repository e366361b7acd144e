//! Exact k-connectivity decisions.
//!
//! The flow route: vertex connectivity uses unit-capacity max flow on the
//! split digraph (`v_in -> v_out`, capacity 1) with the classic schedule —
//! a minimum-degree source against every non-neighbor, plus every
//! non-adjacent pair inside that source's neighborhood. If some cut of size
//! below `k` exists, either the source avoids it (first family catches it)
//! or sits inside it, in which case the cut's minimality puts neighbors of
//! the source in two different components (second family catches it).
//! Edge connectivity runs flows from a fixed root to every other vertex.
//!
//! Convention: a graph is k-vertex-connected iff `n >= k+1` and no removal
//! of at most `k-1` vertices disconnects it; a remainder with 0 or 1
//! vertices counts as connected. Edge connectivity requires `n >= 2` and a
//! connected graph. Failures carry a witness (separating set or edge cut).
//!
//! Brute-force twins of both decisions remove every subset of size exactly
//! `k-1` behind enumeration guards; they exist to cross-check the flow
//! route, not to be fast.

use std::collections::VecDeque;

use serde_json::{json, Value};

use crate::flow::FlowNet;
use crate::graph::UnionGraph;
use crate::{Error, Result};

/// Vertex-connectivity decision with an optional separating set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexConnectivity {
    pub is_k_connected: bool,
    /// On failure: at most `k-1` vertices whose removal disconnects the
    /// graph (empty when the graph is already disconnected). Absent when
    /// the failure is just `n < k+1`.
    pub cut: Option<Vec<u32>>,
}

/// Edge-connectivity decision with an optional disconnecting edge set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeConnectivity {
    pub is_k_connected: bool,
    pub cut: Option<Vec<(u32, u32)>>,
}

/// Witness for the separation event: removing `removed` (at most `k-1`
/// vertices) leaves a component of size `r` with `2 <= r <= (n-|removed|)/2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BkWitness {
    pub removed: Vec<u32>,
    pub component: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutMode {
    Vertex,
    Edge,
}

/// Connected components after deleting `removed`, each sorted, ordered by
/// smallest member.
pub fn components(graph: &UnionGraph, removed: &[u32]) -> Vec<Vec<u32>> {
    let n = graph.n();
    let mut gone = vec![false; n];
    for &v in removed {
        gone[v as usize] = true;
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if gone[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start as u32);
        let mut comp = Vec::new();
        while let Some(u) = queue.pop_front() {
            comp.push(u);
            for &w in graph.neighbors(u) {
                if !gone[w as usize] && !seen[w as usize] {
                    seen[w as usize] = true;
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn is_connected_without(graph: &UnionGraph, gone: &[bool]) -> bool {
    let n = graph.n();
    let alive = gone.iter().filter(|&&g| !g).count();
    if alive <= 1 {
        return true;
    }
    let start = (0..n).find(|&v| !gone[v]).unwrap();
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut queue = VecDeque::from([start as u32]);
    let mut visited = 1;
    while let Some(u) = queue.pop_front() {
        for &w in graph.neighbors(u) {
            if !gone[w as usize] && !seen[w as usize] {
                seen[w as usize] = true;
                visited += 1;
                queue.push_back(w);
            }
        }
    }
    visited == alive
}

fn min_degree_vertex(graph: &UnionGraph) -> (u32, u32) {
    let mut best = (0u32, u32::MAX);
    for v in 0..graph.n() as u32 {
        let d = graph.degree(v);
        if d < best.1 {
            best = (v, d);
        }
    }
    best
}

/// Split digraph for vertex flows: node `2v` is `v_in`, `2v+1` is `v_out`.
fn vertex_split_net(graph: &UnionGraph) -> FlowNet {
    let n = graph.n();
    let mut net = FlowNet::new(2 * n);
    for v in 0..n {
        net.add_arc(2 * v, 2 * v + 1, 1, 0);
    }
    for &(u, v) in graph.edges() {
        net.add_arc(2 * u as usize + 1, 2 * v as usize, 1, 0);
        net.add_arc(2 * v as usize + 1, 2 * u as usize, 1, 0);
    }
    net
}

fn vertex_cut_from_residual(net: &FlowNet, s_out: usize, n: usize) -> Vec<u32> {
    let seen = net.residual_reachable(s_out);
    (0..n as u32)
        .filter(|&v| seen[2 * v as usize] && !seen[2 * v as usize + 1])
        .collect()
}

/// Decide `n >= k+1` and that no removal of at most `k-1` vertices
/// disconnects the graph. Exact (flow based), with early exit on the first
/// violated pair.
pub fn is_k_vertex_connected(graph: &UnionGraph, k: u32) -> VertexConnectivity {
    let n = graph.n();
    let yes = VertexConnectivity {
        is_k_connected: true,
        cut: None,
    };
    if k == 0 {
        return yes;
    }
    if (n as u64) < k as u64 + 1 {
        return VertexConnectivity {
            is_k_connected: false,
            cut: None,
        };
    }
    let (v1, dmin) = min_degree_vertex(graph);
    if dmin < k {
        // Removing the neighborhood isolates v1 from the rest.
        return VertexConnectivity {
            is_k_connected: false,
            cut: Some(graph.neighbors(v1).to_vec()),
        };
    }
    if k == 1 {
        return if is_connected_without(graph, &vec![false; n]) {
            yes
        } else {
            VertexConnectivity {
                is_k_connected: false,
                cut: Some(Vec::new()),
            }
        };
    }
    let mut net = vertex_split_net(graph);
    let probe = |net: &mut FlowNet, a: u32, b: u32| -> Option<Vec<u32>> {
        net.reset();
        let flow = net.max_flow(2 * a as usize + 1, 2 * b as usize, k);
        if flow < k {
            Some(vertex_cut_from_residual(net, 2 * a as usize + 1, n))
        } else {
            None
        }
    };
    for u in 0..n as u32 {
        if u != v1 && !graph.has_edge(v1.min(u), v1.max(u)) {
            if let Some(cut) = probe(&mut net, v1, u) {
                return VertexConnectivity {
                    is_k_connected: false,
                    cut: Some(cut),
                };
            }
        }
    }
    let nbrs = graph.neighbors(v1);
    for (i, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[i + 1..] {
            if !graph.has_edge(a.min(b), a.max(b)) {
                if let Some(cut) = probe(&mut net, a, b) {
                    return VertexConnectivity {
                        is_k_connected: false,
                        cut: Some(cut),
                    };
                }
            }
        }
    }
    yes
}

/// Decide `n >= 2`, connectedness, and a global minimum edge cut of at
/// least `k`, via flows from a fixed root to every other vertex.
pub fn is_k_edge_connected(graph: &UnionGraph, k: u32) -> EdgeConnectivity {
    let n = graph.n();
    if n < 2 {
        return EdgeConnectivity {
            is_k_connected: false,
            cut: None,
        };
    }
    if !is_connected_without(graph, &vec![false; n]) {
        return EdgeConnectivity {
            is_k_connected: false,
            cut: Some(Vec::new()),
        };
    }
    if k <= 1 {
        return EdgeConnectivity {
            is_k_connected: true,
            cut: None,
        };
    }
    let (vmin, dmin) = min_degree_vertex(graph);
    if dmin < k {
        // Cutting every edge at a minimum-degree vertex isolates it.
        let cut = graph
            .neighbors(vmin)
            .iter()
            .map(|&w| (vmin.min(w), vmin.max(w)))
            .collect();
        return EdgeConnectivity {
            is_k_connected: false,
            cut: Some(cut),
        };
    }
    let mut net = FlowNet::new(n);
    for &(u, v) in graph.edges() {
        net.add_arc(u as usize, v as usize, 1, 1);
    }
    for t in 1..n {
        net.reset();
        let flow = net.max_flow(0, t, k);
        if flow < k {
            let seen = net.residual_reachable(0);
            let cut = graph
                .edges()
                .iter()
                .copied()
                .filter(|&(u, v)| seen[u as usize] != seen[v as usize])
                .collect();
            return EdgeConnectivity {
                is_k_connected: false,
                cut: Some(cut),
            };
        }
    }
    EdgeConnectivity {
        is_k_connected: true,
        cut: None,
    }
}

const BRUTE_FORCE_GUARD: u128 = 1_000_000;
const BK_GUARD: u128 = 10_000_000;

fn binom_capped(n: u64, k: u64, cap: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out.saturating_mul((n - i) as u128) / (i + 1) as u128;
        if out > cap {
            return cap + 1;
        }
    }
    out
}

/// Visit all `size`-subsets of `0..n` in lexicographic order until the
/// callback returns `Some`.
fn first_combination<T>(
    n: usize,
    size: usize,
    mut f: impl FnMut(&[u32]) -> Option<T>,
) -> Option<T> {
    if size > n {
        return None;
    }
    let mut idx: Vec<u32> = (0..size as u32).collect();
    loop {
        if let Some(hit) = f(&idx) {
            return Some(hit);
        }
        // Advance the odometer.
        let mut i = size;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if idx[i] < (n - size + i) as u32 {
                idx[i] += 1;
                for j in i + 1..size {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Exhaustive twin of the flow decisions: remove every subset of exactly
/// `k-1` vertices (or edges) and test connectedness. Guarded at 10^6
/// subsets.
pub fn brute_force_k_connected(graph: &UnionGraph, k: u32, mode: CutMode) -> Result<bool> {
    if k == 0 {
        return Ok(match mode {
            CutMode::Vertex => true,
            CutMode::Edge => graph.n() >= 2 && is_connected_without(graph, &vec![false; graph.n()]),
        });
    }
    let picks = k as u64 - 1;
    match mode {
        CutMode::Vertex => {
            let n = graph.n();
            if (n as u64) < k as u64 + 1 {
                return Ok(false);
            }
            if binom_capped(n as u64, picks, BRUTE_FORCE_GUARD) > BRUTE_FORCE_GUARD {
                return Err(Error::GuardExceeded(format!(
                    "C({n}, {picks}) vertex subsets exceed {BRUTE_FORCE_GUARD}"
                )));
            }
            let mut gone = vec![false; n];
            let disconnect = first_combination(n, picks as usize, |subset| {
                gone.iter_mut().for_each(|g| *g = false);
                for &v in subset {
                    gone[v as usize] = true;
                }
                (!is_connected_without(graph, &gone)).then_some(())
            });
            Ok(disconnect.is_none())
        }
        CutMode::Edge => {
            if graph.n() < 2 || !is_connected_without(graph, &vec![false; graph.n()]) {
                return Ok(false);
            }
            let e = graph.num_edges();
            if (e as u64) < picks {
                // Removing every edge disconnects, so fewer than k edges suffice.
                return Ok(false);
            }
            if binom_capped(e as u64, picks, BRUTE_FORCE_GUARD) > BRUTE_FORCE_GUARD {
                return Err(Error::GuardExceeded(format!(
                    "C({e}, {picks}) edge subsets exceed {BRUTE_FORCE_GUARD}"
                )));
            }
            let disconnect = first_combination(e, picks as usize, |subset| {
                (!connected_without_edges(graph, subset)).then_some(())
            });
            Ok(disconnect.is_none())
        }
    }
}

fn connected_without_edges(graph: &UnionGraph, removed_edge_ids: &[u32]) -> bool {
    let n = graph.n();
    if n <= 1 {
        return true;
    }
    let removed: Vec<(u32, u32)> = removed_edge_ids
        .iter()
        .map(|&i| graph.edges()[i as usize])
        .collect();
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0u32]);
    let mut visited = 1;
    while let Some(u) = queue.pop_front() {
        for &w in graph.neighbors(u) {
            let key = (u.min(w), u.max(w));
            if removed.contains(&key) || seen[w as usize] {
                continue;
            }
            seen[w as usize] = true;
            visited += 1;
            queue.push_back(w);
        }
    }
    visited == n
}

/// Search for the separation event: a set `S` of `1..=k-1` vertices whose
/// removal leaves a component of size `r` with `2 <= r <= (n-|S|)/2`.
/// Subsets are scanned in lexicographic order, so the first witness is
/// deterministic. Guarded at `C(n, k-1) * (k-1) <= 10^7`.
pub fn detect_bk(graph: &UnionGraph, k: u32) -> Result<Option<BkWitness>> {
    if k <= 1 {
        return Ok(None);
    }
    let n = graph.n();
    let picks = (k - 1) as u64;
    let cost = binom_capped(n as u64, picks, BK_GUARD).saturating_mul(picks as u128);
    if cost > BK_GUARD {
        return Err(Error::GuardExceeded(format!(
            "C({n}, {picks}) * {picks} exceeds {BK_GUARD}"
        )));
    }
    for size in 1..k as usize {
        if size >= n {
            break;
        }
        let hit = first_combination(n, size, |subset| {
            let comps = components(graph, subset);
            comps
                .into_iter()
                .find(|c| c.len() >= 2 && 2 * c.len() <= n - size)
                .map(|component| BkWitness {
                    removed: subset.to_vec(),
                    component,
                })
        });
        if hit.is_some() {
            return Ok(hit);
        }
    }
    Ok(None)
}

/// Full connectivity report for one graph and one target order `k`.
#[derive(Clone, Debug)]
pub struct ConnectivityReport {
    pub n: usize,
    pub k: u32,
    pub min_degree: u32,
    pub vertex_connected_k: bool,
    pub edge_connected_k: bool,
    pub vertex_cut: Option<Vec<u32>>,
    pub edge_cut: Option<Vec<(u32, u32)>>,
    /// Separation witness, looked up only when the vertex decision fails
    /// and the enumeration guard allows it.
    pub bk_witness: Option<BkWitness>,
}

impl ConnectivityReport {
    /// JSON with 1-based vertex ids, matching edge-list files.
    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "k": self.k,
            "min_degree": self.min_degree,
            "vertex_connected_k": self.vertex_connected_k,
            "edge_connected_k": self.edge_connected_k,
            "vertex_cut": self.vertex_cut.as_ref().map(|c| {
                c.iter().map(|&v| v + 1).collect::<Vec<_>>()
            }),
            "edge_cut": self.edge_cut.as_ref().map(|c| {
                c.iter().map(|&(u, v)| vec![u + 1, v + 1]).collect::<Vec<_>>()
            }),
            "bk_witness": self.bk_witness.as_ref().map(|w| json!({
                "removed": w.removed.iter().map(|&v| v + 1).collect::<Vec<_>>(),
                "component": w.component.iter().map(|&v| v + 1).collect::<Vec<_>>(),
                "r": w.component.len(),
            })),
        })
    }
}

/// Run both decisions (plus the witness search on vertex failure).
pub fn analyze(graph: &UnionGraph, k: u32) -> ConnectivityReport {
    let min_degree = (0..graph.n() as u32)
        .map(|v| graph.degree(v))
        .min()
        .unwrap_or(0);
    let vertex = is_k_vertex_connected(graph, k);
    let edge = is_k_edge_connected(graph, k);
    let bk_witness = if vertex.is_k_connected {
        None
    } else {
        detect_bk(graph, k).unwrap_or(None)
    };
    ConnectivityReport {
        n: graph.n(),
        k,
        min_degree,
        vertex_connected_k: vertex.is_k_connected,
        edge_connected_k: edge.is_k_connected,
        vertex_cut: vertex.cut,
        edge_cut: edge.cut,
        bk_witness,
    }
}

//! Layer sampling and union assembly.
//!
//! A layer draws `(x, q)` from the model, picks a uniform vertex subset of
//! size `min(x, n)`, and joins each pair of members independently with
//! probability `q`. The union graph merges the edge sets of `m` independent
//! layers and remembers, per vertex, its degree inside each layer (only
//! nonzero degrees are stored).
//!
//! Vertices are 0-based in memory and 1-based in edge-list files. Layer `i`
//! (1-based) draws from RNG substream `(seed, i)`, so a graph is a pure
//! function of `(dist, n, m, seed)` and extending `m` keeps every earlier
//! layer identical.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::dist::{DistSampler, JointDistribution};
use crate::rng::substream;
use crate::{Error, Result};

/// One sampled layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// 1-based position in the union.
    pub index: u64,
    /// Drawn size budget (before truncation to `n`).
    pub x: u64,
    pub q: f64,
    /// Sorted members, `min(x, n)` of them, 0-based.
    pub vertices: Vec<u32>,
    /// Within-layer edges, `u < v`, lexicographically sorted.
    pub edges: Vec<(u32, u32)>,
}

/// Union of layers: deduplicated edges plus per-layer degree records.
#[derive(Clone, Debug)]
pub struct UnionGraph {
    n: usize,
    m: u64,
    edges: Vec<(u32, u32)>,
    offsets: Vec<u32>,
    neighbors: Vec<u32>,
    layer_degrees: Option<Vec<Vec<(u64, u32)>>>,
}

impl UnionGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of layers merged (informative only for imported graphs).
    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.neighbors[self.offsets[v as usize] as usize..self.offsets[v as usize + 1] as usize]
    }

    pub fn degree(&self, v: u32) -> u32 {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Per-vertex `(layer index, degree)` records; absent on imports.
    pub fn layer_degrees(&self) -> Option<&[Vec<(u64, u32)>]> {
        self.layer_degrees.as_deref()
    }

    /// Build directly from an edge list (no layer data).
    pub fn from_edges(n: usize, m: u64, mut edges: Vec<(u32, u32)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("graph needs at least one vertex".into()));
        }
        for &mut (ref mut u, ref mut v) in &mut edges {
            if u == v {
                return Err(Error::Domain(format!("self loop at vertex {u}")));
            }
            if *u > *v {
                std::mem::swap(u, v);
            }
            if *v as usize >= n {
                return Err(Error::Domain(format!(
                    "edge endpoint {v} outside 0..{n}"
                )));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::assemble(n, m, edges, None))
    }

    fn assemble(
        n: usize,
        m: u64,
        edges: Vec<(u32, u32)>,
        layer_degrees: Option<Vec<Vec<(u64, u32)>>>,
    ) -> Self {
        let mut counts = vec![0u32; n + 1];
        for &(u, v) in &edges {
            counts[u as usize + 1] += 1;
            counts[v as usize + 1] += 1;
        }
        let mut offsets = counts;
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0u32; edges.len() * 2];
        // Edges are lex-sorted, so each adjacency slice fills in ascending
        // order and binary search stays valid.
        for &(u, v) in &edges {
            neighbors[cursor[u as usize] as usize] = v;
            cursor[u as usize] += 1;
            neighbors[cursor[v as usize] as usize] = u;
            cursor[v as usize] += 1;
        }
        UnionGraph {
            n,
            m,
            edges,
            offsets,
            neighbors,
            layer_degrees,
        }
    }
}

/// Uniform random subset of `0..n` with `size` elements, sorted.
fn sample_subset(rng: &mut impl rand::Rng, n: usize, size: usize) -> Vec<u32> {
    debug_assert!(size <= n);
    // Partial Fisher-Yates with a sparse swap table.
    let mut swaps: HashMap<usize, u32> = HashMap::new();
    let mut out = Vec::with_capacity(size);
    for i in 0..size {
        let j = rng.gen_range(i..n);
        let vj = *swaps.get(&j).unwrap_or(&(j as u32));
        let vi = *swaps.get(&i).unwrap_or(&(i as u32));
        swaps.insert(j, vi);
        out.push(vj);
    }
    out.sort_unstable();
    out
}

/// Pair-index walker: maps ascending lexicographic pair indices over a
/// sorted member list to edges.
struct PairUnrank<'a> {
    members: &'a [u32],
    row: usize,
    row_start: u64,
    row_end: u64,
}

impl<'a> PairUnrank<'a> {
    fn new(members: &'a [u32]) -> Self {
        PairUnrank {
            members,
            row: 0,
            row_start: 0,
            row_end: members.len().saturating_sub(1) as u64,
        }
    }

    fn edge_at(&mut self, t: u64) -> (u32, u32) {
        while t >= self.row_end {
            self.row += 1;
            self.row_start = self.row_end;
            self.row_end += (self.members.len() - 1 - self.row) as u64;
        }
        let b = self.row + 1 + (t - self.row_start) as usize;
        (self.members[self.row], self.members[b])
    }
}

fn sample_edges(rng: &mut impl rand::Rng, members: &[u32], q: f64) -> Vec<(u32, u32)> {
    let z = members.len();
    if z < 2 || q == 0.0 {
        return Vec::new();
    }
    let pairs = (z as u64) * (z as u64 - 1) / 2;
    let mut edges = Vec::new();
    if q >= 1.0 {
        for a in 0..z {
            for b in a + 1..z {
                edges.push((members[a], members[b]));
            }
        }
        return edges;
    }
    if q * pairs as f64 >= (pairs as f64).sqrt() {
        // Dense: one Bernoulli draw per pair.
        for a in 0..z {
            for b in a + 1..z {
                if rng.gen::<f64>() < q {
                    edges.push((members[a], members[b]));
                }
            }
        }
    } else {
        // Sparse: geometric jumps over the pair index.
        let log1mq = (-q).ln_1p();
        let mut unrank = PairUnrank::new(members);
        let mut t: u64 = 0;
        loop {
            let u: f64 = rng.gen();
            let skip = ((1.0 - u).ln() / log1mq).floor();
            if skip >= (pairs - t) as f64 {
                break;
            }
            t += skip as u64;
            edges.push(unrank.edge_at(t));
            t += 1;
            if t >= pairs {
                break;
            }
        }
    }
    edges
}

/// Sample layer number `index` (1-based): draw `(x, q)`, pick `min(x, n)`
/// members uniformly, join member pairs independently with probability `q`.
pub fn sample_layer(
    sampler: &DistSampler,
    n: usize,
    index: u64,
    rng: &mut impl rand::Rng,
) -> Layer {
    let (x, q) = sampler.draw(rng);
    let size = x.min(n as u64) as usize;
    let vertices = sample_subset(rng, n, size);
    let edges = sample_edges(rng, &vertices, q);
    Layer {
        index,
        x,
        q,
        vertices,
        edges,
    }
}

/// Merge layers into a union graph. Layer order does not affect the
/// adjacency structure (edges are sorted and deduplicated).
pub fn build_union(n: usize, layers: &[Layer]) -> Result<UnionGraph> {
    if n == 0 {
        return Err(Error::Domain("graph needs at least one vertex".into()));
    }
    let mut edges = Vec::new();
    let mut layer_degrees = vec![Vec::new(); n];
    for layer in layers {
        let members = &layer.vertices;
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(format!(
                "layer {}: members not strictly increasing",
                layer.index
            )));
        }
        if let Some(&last) = members.last() {
            if last as usize >= n {
                return Err(Error::Domain(format!(
                    "layer {}: member {last} outside 0..{n}",
                    layer.index
                )));
            }
        }
        let mut counts = vec![0u32; members.len()];
        for &(u, v) in &layer.edges {
            if u >= v {
                return Err(Error::Domain(format!(
                    "layer {}: edge ({u}, {v}) not normalized",
                    layer.index
                )));
            }
            let (iu, iv) = match (members.binary_search(&u), members.binary_search(&v)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    return Err(Error::Domain(format!(
                        "layer {}: edge ({u}, {v}) joins non-members",
                        layer.index
                    )))
                }
            };
            counts[iu] += 1;
            counts[iv] += 1;
            edges.push((u, v));
        }
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 {
                layer_degrees[members[i] as usize].push((layer.index, c));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(UnionGraph::assemble(
        n,
        layers.len() as u64,
        edges,
        Some(layer_degrees),
    ))
}

/// Sample `m` layers and merge them; layer `i` uses substream `(seed, i)`.
pub fn generate(
    dist: &JointDistribution,
    n: usize,
    m: u64,
    seed: u64,
    tol: f64,
) -> Result<UnionGraph> {
    let layers = generate_layers(dist, n, m, seed, tol)?;
    build_union(n, &layers)
}

/// The layers behind [`generate`], exposed for coupling experiments.
pub fn generate_layers(
    dist: &JointDistribution,
    n: usize,
    m: u64,
    seed: u64,
    tol: f64,
) -> Result<Vec<Layer>> {
    if n == 0 {
        return Err(Error::Domain("graph needs at least one vertex".into()));
    }
    let sampler = dist.sampler(tol)?;
    Ok((1..=m)
        .into_par_iter()
        .map(|i| sample_layer(&sampler, n, i, &mut substream(seed, i)))
        .collect())
}

/// Write `# n=<n> m=<m>` then one `u v` line per edge, 1-based, ascending.
pub fn export_edge_list(graph: &UnionGraph, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "# n={} m={}", graph.n(), graph.m())?;
    for &(u, v) in graph.edges() {
        writeln!(out, "{} {}", u + 1, v + 1)?;
    }
    Ok(())
}

/// Read the format written by [`export_edge_list`].
pub fn import_edge_list(input: &mut impl BufRead) -> Result<UnionGraph> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let header = header.trim_end();
    let rest = header
        .strip_prefix("# n=")
        .ok_or_else(|| Error::Parse(format!("bad header {header:?}, want '# n=<n> m=<m>'")))?;
    let (n_text, m_text) = rest
        .split_once(" m=")
        .ok_or_else(|| Error::Parse(format!("bad header {header:?}, want '# n=<n> m=<m>'")))?;
    let n: usize = n_text
        .parse()
        .map_err(|_| Error::Parse(format!("bad vertex count {n_text:?}")))?;
    let m: u64 = m_text
        .parse()
        .map_err(|_| Error::Parse(format!("bad layer count {m_text:?}")))?;
    if n == 0 {
        return Err(Error::Parse("header has n=0".into()));
    }
    let mut edges = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (u_text, v_text) = line
            .split_once(' ')
            .ok_or_else(|| Error::Parse(format!("line {}: want 'u v'", lineno + 2)))?;
        let u: u64 = u_text
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad vertex {u_text:?}", lineno + 2)))?;
        let v: u64 = v_text
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad vertex {v_text:?}", lineno + 2)))?;
        if u == 0 || v == 0 || u as usize > n || v as usize > n {
            return Err(Error::Parse(format!(
                "line {}: vertex outside 1..={n}",
                lineno + 2
            )));
        }
        if u >= v {
            return Err(Error::Parse(format!(
                "line {}: edges must satisfy u < v",
                lineno + 2
            )));
        }
        edges.push(((u - 1) as u32, (v - 1) as u32));
    }
    let deduped = {
        let mut sorted = edges.clone();
        sorted.sort_unstable();
        sorted.dedup();
        sorted
    };
    if deduped.len() != edges.len() {
        return Err(Error::Parse("duplicate edges in input".into()));
    }
    UnionGraph::from_edges(n, m, deduped)
}

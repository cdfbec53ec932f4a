//! Materialized G(n,p) graphs and component analysis.
//!
//! Vertices are `u32` indices `0..n` in memory. Edge-list files use the
//! 1-based labels `1..=n`.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

pub type Vertex = u32;

/// Simple undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitGraph {
    adj: Vec<Vec<Vertex>>,
}

impl ExplicitGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from unordered pairs. Duplicates collapse; self-loops
    /// and out-of-range endpoints are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vertex, Vertex)>,
    {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidParams(format!("self-loop at vertex {u}")));
            }
            if u as usize >= n || v as usize >= n {
                return Err(Error::InvalidParams(format!(
                    "edge ({u}, {v}) out of range for n = {n}"
                )));
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adj })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adj[v as usize]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adj[v as usize].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.adj[u as usize].binary_search(&v).is_ok()
    }

    /// Edges (u, v) with u < v in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, list)| {
            let u = u as Vertex;
            list.iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Writes one "u v" line per edge, 1-based, u < v, sorted.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for (u, v) in self.edges() {
            writeln!(out, "{} {}", u + 1, v + 1)?;
        }
        Ok(())
    }

    /// Reads the format produced by [`write_edge_list`](Self::write_edge_list).
    /// Blank lines and `#` comments are skipped.
    pub fn read_edge_list<R: BufRead>(n: usize, input: R) -> Result<Self> {
        let mut edges = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::EdgeList {
                line: idx + 1,
                msg: msg.to_string(),
            };
            let mut fields = line.split_whitespace();
            let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(bad("expected exactly two vertex labels"));
            };
            let u: u64 = a
                .parse()
                .map_err(|_| bad("vertex label is not an integer"))?;
            let v: u64 = b
                .parse()
                .map_err(|_| bad("vertex label is not an integer"))?;
            if u == 0 || v == 0 || u > n as u64 || v > n as u64 {
                return Err(bad("vertex label outside 1..=n"));
            }
            edges.push(((u - 1) as Vertex, (v - 1) as Vertex));
        }
        Self::from_edges(n, edges)
    }
}

/// Samples G(n, p) with a stream derived from `seed`.
pub fn sample_gnp(n: usize, p: f64, seed: u64) -> ExplicitGraph {
    sample_gnp_with(n, p, &mut seeded_rng(seed))
}

/// Samples G(n, p) by geometric skipping over the lexicographic order of
/// the C(n,2) pairs: expected work is proportional to the edge count.
///
/// Panics if `p` is outside [0, 1].
pub fn sample_gnp_with<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> ExplicitGraph {
    assert!(
        (0.0..=1.0).contains(&p),
        "edge probability {p} outside [0, 1]"
    );
    let mut adj: Vec<Vec<Vertex>> = vec![Vec::new(); n];
    if n < 2 || p == 0.0 {
        return ExplicitGraph { adj };
    }
    let total = (n as u64) * (n as u64 - 1) / 2;
    let geom = Geometric::new(p).expect("p checked above");

    // Row u holds pairs (u, u+1..n); `row_end` is one past its last index.
    let mut u: u64 = 0;
    let mut row_start: u64 = 0;
    let mut row_end: u64 = n as u64 - 1;
    let mut idx: u64 = 0;
    let mut first = true;
    loop {
        let skip = geom.sample(rng);
        let step = if first { skip } else { skip.saturating_add(1) };
        first = false;
        idx = match idx.checked_add(step) {
            Some(i) if i < total => i,
            _ => break,
        };
        while idx >= row_end {
            u += 1;
            row_start = row_end;
            row_end += n as u64 - 1 - u;
        }
        let v = u + 1 + (idx - row_start);
        // Pairs arrive in lexicographic order, so both lists stay sorted.
        adj[u as usize].push(v as Vertex);
        adj[v as usize].push(u as Vertex);
    }
    ExplicitGraph { adj }
}

/// Disjoint-set forest with union by size and path halving.
#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        true
    }

    pub fn set_size(&mut self, x: u32) -> u32 {
        let root = self.find(x);
        self.size[root as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentSummary {
    pub component_count: usize,
    pub largest_size: usize,
    /// Sorted members of the largest component, when requested.
    pub largest_members: Option<Vec<Vertex>>,
}

/// Components of the subgraph induced by `subset` (all vertices if `None`).
///
/// Ties between equally large components go to the one holding the smallest
/// vertex.
pub fn largest_component(
    g: &ExplicitGraph,
    subset: Option<&[Vertex]>,
    with_members: bool,
) -> ComponentSummary {
    let n = g.n();
    let members: Vec<Vertex> = match subset {
        Some(s) => {
            let mut v = s.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        }
        None => (0..n as Vertex).collect(),
    };
    let mut inside = vec![false; n];
    for &v in &members {
        inside[v as usize] = true;
    }
    let mut dsu = DisjointSets::new(n);
    for &u in &members {
        for &w in g.neighbors(u) {
            if w > u && inside[w as usize] {
                dsu.union(u, w);
            }
        }
    }
    let mut count = 0;
    let mut best: Option<(u32, usize)> = None;
    for &v in &members {
        let root = dsu.find(v);
        if root == v {
            count += 1;
        }
        let size = dsu.set_size(root) as usize;
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((root, size));
        }
    }
    let largest_size = best.map_or(0, |(_, s)| s);
    let largest_members = with_members.then(|| match best {
        Some((root, _)) => members
            .iter()
            .copied()
            .filter(|&v| dsu.find(v) == root)
            .collect(),
        None => Vec::new(),
    });
    ComponentSummary {
        component_count: count,
        largest_size,
        largest_members,
    }
}

/// For every vertex, the number of its neighbours inside `target`.
pub fn count_neighbors_in(g: &ExplicitGraph, target: &[Vertex]) -> Vec<u32> {
    let mut seen = vec![false; g.n()];
    let mut counts = vec![0u32; g.n()];
    for &t in target {
        if std::mem::replace(&mut seen[t as usize], true) {
            continue;
        }
        for &w in g.neighbors(t) {
            counts[w as usize] += 1;
        }
    }
    counts
}

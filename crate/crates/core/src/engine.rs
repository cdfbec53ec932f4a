//! The bootstrap percolation process.
//!
//! Two forms are provided. [`run_direct`] iterates synchronous generations
//! on an explicit graph and serves as the oracle. [`Process`] examines one
//! infected vertex per step (always the smallest unexamined one) and reveals
//! its edges to the not-yet-examined vertices. With an implicit edge source
//! those edges are drawn lazily, so G(n,p) is never materialized.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{ExplicitGraph, Vertex};
use crate::thresholds::ProcessParams;

const NEVER: u32 = u32::MAX;

/// Initially infected set A(0) = {0, …, a−1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSpec {
    a: usize,
}

impl SeedSpec {
    pub fn new(a: usize, n: usize) -> Result<Self> {
        if a > n {
            return Err(Error::InvalidParams(format!(
                "seed size a must satisfy 0 <= a <= n = {n} (got {a})"
            )));
        }
        Ok(Self { a })
    }

    pub fn a(&self) -> usize {
        self.a
    }
}

/// Where the process gets its edges from.
#[derive(Debug, Clone, Copy)]
pub enum EdgeSource<'g> {
    /// Each unordered pair is revealed at most once, as a Bernoulli(p) draw,
    /// the first time one of its endpoints is examined.
    Implicit {
        n: usize,
        p: f64,
    },
    Explicit(&'g ExplicitGraph),
}

impl EdgeSource<'_> {
    pub fn implicit(params: &ProcessParams) -> Self {
        EdgeSource::Implicit {
            n: params.n() as usize,
            p: params.p(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            EdgeSource::Implicit { n, .. } => *n,
            EdgeSource::Explicit(g) => g.n(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Stopped,
    AlmostPercolated,
}

#[derive(Debug, Clone)]
pub struct TraceOptions {
    /// Steps at which per-vertex counters are copied into the trace.
    pub checkpoints: Vec<u64>,
    /// `final_size >= threshold * n` classifies a run as almost percolated.
    pub percolation_threshold: f64,
    /// Stop after this many steps even if the process is still running.
    pub max_steps: Option<u64>,
    /// Record every revealed pair and panic on a repeat (small n only).
    pub audit_revelations: bool,
    /// Keep neighbour counters exact for infected-but-unexamined vertices
    /// too. Implied by checkpoints and auditing.
    pub exact_counters: bool,
}

impl TraceOptions {
    pub(crate) fn wants_exact_counters(&self) -> bool {
        self.exact_counters || self.audit_revelations || !self.checkpoints.is_empty()
    }
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            checkpoints: Vec::new(),
            percolation_threshold: 0.9,
            max_steps: None,
            audit_revelations: false,
            exact_counters: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercolationTrace {
    pub n: usize,
    pub a: usize,
    /// |A(t)| for t = 0..=stop.
    pub infected_sizes: Vec<u32>,
    /// T, the first step with A(t) = Z(t), when `completed`; otherwise the
    /// number of steps performed before `max_steps` cut the run.
    pub stop: u64,
    pub completed: bool,
    pub final_size: u64,
    pub counters_at: BTreeMap<u64, Vec<u32>>,
    pub classification: Classification,
    /// Σ over examined vertices of the partners whose pair was still
    /// unrevealed when the vertex was examined.
    pub pairs_considered: u64,
    pub edges_revealed: u64,
}

impl PercolationTrace {
    pub fn size_at(&self, t: u64) -> u64 {
        let idx = (t as usize).min(self.infected_sizes.len() - 1);
        u64::from(self.infected_sizes[idx])
    }
}

/// Step-by-step state of the examine-one-vertex process.
pub struct Process<'g> {
    source: EdgeSource<'g>,
    n: usize,
    r: u32,
    a: usize,
    step: u64,
    examined: Vec<bool>,
    examined_order: Vec<Vertex>,
    /// Step at which each vertex joined A; 0 for A(0), NEVER if uninfected.
    infected_at: Vec<u32>,
    counters: Vec<u32>,
    infected_count: u64,
    frontier: BinaryHeap<Reverse<Vertex>>,
    /// Implicit mode: the vertices u(t) may still draw edges to, with their
    /// positions. With exact counters these are all unexamined vertices;
    /// otherwise only the uninfected ones, since an edge to an infected
    /// vertex cannot change the course of the process.
    pool: Vec<Vertex>,
    pool_pos: Vec<u32>,
    sizes: Vec<u32>,
    pairs_considered: u64,
    edges_revealed: u64,
    exact_counters: bool,
    scratch: Vec<Vertex>,
    audit: Option<HashSet<(Vertex, Vertex)>>,
}

impl<'g> Process<'g> {
    /// Starts the process with A(0) = {0..a−1}.
    pub fn new(source: EdgeSource<'g>, seed: SeedSpec, r: u32, opts: &TraceOptions) -> Self {
        let seeds: Vec<Vertex> = (0..seed.a() as Vertex).collect();
        Self::with_seed_set(source, &seeds, r, opts)
    }

    /// Starts the process from an arbitrary initially infected set.
    pub fn with_seed_set(
        source: EdgeSource<'g>,
        seeds: &[Vertex],
        r: u32,
        opts: &TraceOptions,
    ) -> Self {
        let exact_counters = opts.wants_exact_counters();
        let n = source.n();
        assert!(n < u32::MAX as usize, "vertex count must fit in u32");
        let mut infected_at = vec![NEVER; n];
        let mut frontier = BinaryHeap::new();
        let mut count = 0u64;
        for &v in seeds {
            if infected_at[v as usize] == NEVER {
                infected_at[v as usize] = 0;
                frontier.push(Reverse(v));
                count += 1;
            }
        }
        let (mut pool, mut pool_pos) = (Vec::new(), Vec::new());
        if let EdgeSource::Implicit { .. } = source {
            pool_pos = vec![NEVER; n];
            for v in 0..n as Vertex {
                if exact_counters || infected_at[v as usize] == NEVER {
                    pool_pos[v as usize] = pool.len() as u32;
                    pool.push(v);
                }
            }
        }
        Self {
            source,
            n,
            r,
            a: count as usize,
            step: 0,
            examined: vec![false; n],
            examined_order: Vec::new(),
            infected_at,
            counters: vec![0; n],
            infected_count: count,
            frontier,
            pool,
            pool_pos,
            sizes: vec![count as u32],
            pairs_considered: 0,
            edges_revealed: 0,
            exact_counters,
            scratch: Vec::new(),
            audit: opts.audit_revelations.then(HashSet::new),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn source(&self) -> EdgeSource<'g> {
        self.source
    }

    /// Current step t.
    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// |A(t)|.
    pub fn infected_count(&self) -> u64 {
        self.infected_count
    }

    /// A(t) = Z(t): nothing left to examine.
    pub fn is_stopped(&self) -> bool {
        self.frontier.is_empty()
    }

    /// Z(t) in examination order.
    pub fn examined_order(&self) -> &[Vertex] {
        &self.examined_order
    }

    pub fn is_examined(&self, v: Vertex) -> bool {
        self.examined[v as usize]
    }

    pub fn is_infected(&self, v: Vertex) -> bool {
        self.infected_at[v as usize] != NEVER
    }

    /// Number of neighbours each vertex has in Z(t).
    pub fn counters(&self) -> &[u32] {
        &self.counters
    }

    /// A(t) \ Z(t) in increasing vertex order.
    pub fn unexamined_infected(&self) -> Vec<Vertex> {
        let mut v: Vec<Vertex> = self.frontier.iter().map(|Reverse(v)| *v).collect();
        v.sort_unstable();
        v
    }

    pub fn infected_sizes(&self) -> &[u32] {
        &self.sizes
    }

    /// Pairs revealed so far, when auditing.
    pub fn revealed_pairs(&self) -> Option<&HashSet<(Vertex, Vertex)>> {
        self.audit.as_ref()
    }

    fn remove_from_pool(&mut self, v: Vertex) {
        let pos = self.pool_pos[v as usize] as usize;
        let last = *self.pool.last().expect("removed vertex is in the pool");
        self.pool.swap_remove(pos);
        if last != v {
            self.pool_pos[last as usize] = pos as u32;
        }
        self.pool_pos[v as usize] = NEVER;
    }

    /// Counts the edge u(t)–w. Returns true if w just became infected.
    fn reveal(&mut self, w: Vertex) -> bool {
        self.edges_revealed += 1;
        let c = &mut self.counters[w as usize];
        *c += 1;
        if *c >= self.r && self.infected_at[w as usize] == NEVER {
            self.infected_at[w as usize] = self.step.min(u64::from(NEVER - 1)) as u32;
            self.infected_count += 1;
            self.frontier.push(Reverse(w));
            true
        } else {
            false
        }
    }

    fn audit_pair(&mut self, u: Vertex, w: Vertex) {
        if let Some(seen) = self.audit.as_mut() {
            let key = (u.min(w), u.max(w));
            assert!(seen.insert(key), "pair {key:?} revealed twice");
        }
    }

    /// Performs one step. Returns false, doing nothing, once stopped.
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let Some(Reverse(u)) = self.frontier.pop() else {
            return false;
        };
        self.step += 1;
        self.examined[u as usize] = true;
        self.examined_order.push(u);
        match self.source {
            EdgeSource::Implicit { p, .. } => {
                if self.exact_counters {
                    self.remove_from_pool(u);
                }
                let eligible = self.pool.len();
                self.pairs_considered += eligible as u64;
                if self.audit.is_some() {
                    for i in 0..eligible {
                        let w = self.pool[i];
                        self.audit_pair(u, w);
                    }
                }
                let k = if eligible == 0 || p <= 0.0 {
                    0
                } else if p >= 1.0 {
                    eligible
                } else {
                    Binomial::new(eligible as u64, p)
                        .expect("p in (0,1)")
                        .sample(rng) as usize
                };
                // Partial Fisher-Yates: the first k pool slots become a
                // uniform k-subset of the pool.
                let mut chosen = std::mem::take(&mut self.scratch);
                chosen.clear();
                for i in 0..k {
                    let j = rng.random_range(i..eligible);
                    self.pool.swap(i, j);
                    self.pool_pos[self.pool[i] as usize] = i as u32;
                    self.pool_pos[self.pool[j] as usize] = j as u32;
                    chosen.push(self.pool[i]);
                }
                for &w in &chosen {
                    if self.reveal(w) && !self.exact_counters {
                        self.remove_from_pool(w);
                    }
                }
                self.scratch = chosen;
            }
            EdgeSource::Explicit(g) => {
                self.pairs_considered += (self.n as u64) - self.step;
                for &w in g.neighbors(u) {
                    if !self.examined[w as usize] {
                        self.audit_pair(u, w);
                        self.reveal(w);
                    }
                }
            }
        }
        self.sizes.push(self.infected_count as u32);
        true
    }

    /// Finishes a run in which every vertex is already infected: each
    /// remaining step examines one vertex and changes nothing else.
    fn fast_forward_full(&mut self) {
        let remaining = self.n as u64 - self.step;
        self.sizes
            .extend(std::iter::repeat_n(self.n as u32, remaining as usize));
        self.step = self.n as u64;
        while let Some(Reverse(u)) = self.frontier.pop() {
            self.examined[u as usize] = true;
            self.examined_order.push(u);
        }
        self.pool.clear();
    }

    /// Stops maintaining counters of infected vertices. From here on the
    /// implicit pool only holds uninfected vertices, which is much cheaper
    /// once the infection takes off. No effect on the infection dynamics.
    pub fn relax_counters(&mut self) {
        if !self.exact_counters || self.audit.is_some() {
            return;
        }
        self.exact_counters = false;
        if let EdgeSource::Implicit { .. } = self.source {
            let infected: Vec<Vertex> = self
                .pool
                .iter()
                .copied()
                .filter(|&v| self.infected_at[v as usize] != NEVER)
                .collect();
            for v in infected {
                self.remove_from_pool(v);
            }
        }
    }

    /// Runs until stopped or until step `limit`.
    pub fn run_until<R: Rng + ?Sized>(&mut self, limit: u64, rng: &mut R) {
        while self.step < limit && self.advance(rng) {}
    }

    fn into_trace(self, counters_at: BTreeMap<u64, Vec<u32>>, threshold: f64) -> PercolationTrace {
        let completed = self.is_stopped();
        let final_size = self.infected_count;
        let classification = if final_size as f64 >= threshold * self.n as f64 {
            Classification::AlmostPercolated
        } else {
            Classification::Stopped
        };
        PercolationTrace {
            n: self.n,
            a: self.a,
            infected_sizes: self.sizes,
            stop: self.step,
            completed,
            final_size,
            counters_at,
            classification,
            pairs_considered: self.pairs_considered,
            edges_revealed: self.edges_revealed,
        }
    }

    /// Advances until step `limit` or until stopped, copying the counters
    /// whenever the current step is one of `checkpoints`.
    pub fn drive<R: Rng + ?Sized>(
        &mut self,
        limit: u64,
        checkpoints: &[u64],
        counters_at: &mut BTreeMap<u64, Vec<u32>>,
        rng: &mut R,
    ) {
        loop {
            if checkpoints.contains(&self.step) && !counters_at.contains_key(&self.step) {
                counters_at.insert(self.step, self.counters.clone());
            }
            if self.is_stopped() || self.step >= limit {
                return;
            }
            let pending = checkpoints.iter().any(|&cp| cp > self.step);
            if self.infected_count == self.n as u64
                && !pending
                && limit == u64::MAX
                && self.audit.is_none()
            {
                self.fast_forward_full();
                return;
            }
            self.advance(rng);
        }
    }

    /// Runs to completion (or `opts.max_steps`) and returns the trace.
    pub fn finish<R: Rng + ?Sized>(self, opts: &TraceOptions, rng: &mut R) -> PercolationTrace {
        self.finish_with(opts, BTreeMap::new(), rng)
    }

    /// Like [`finish`](Self::finish), keeping counters already collected.
    pub fn finish_with<R: Rng + ?Sized>(
        mut self,
        opts: &TraceOptions,
        mut counters_at: BTreeMap<u64, Vec<u32>>,
        rng: &mut R,
    ) -> PercolationTrace {
        let limit = opts.max_steps.unwrap_or(u64::MAX);
        self.drive(limit, &opts.checkpoints, &mut counters_at, rng);
        self.into_trace(counters_at, opts.percolation_threshold)
    }
}

/// Runs the step process from A(0) = {0..a−1}.
pub fn run_process<R: Rng + ?Sized>(
    source: EdgeSource<'_>,
    seed: SeedSpec,
    r: u32,
    opts: &TraceOptions,
    rng: &mut R,
) -> PercolationTrace {
    Process::new(source, seed, r, opts).finish(opts, rng)
}

/// Final set and generation count of the synchronous process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectOutcome {
    /// Sorted final infected set.
    pub infected: Vec<Vertex>,
    /// Number of generations in which at least one vertex was infected.
    pub generations: u32,
}

/// Synchronous bootstrap percolation: in each generation every uninfected
/// vertex with at least `r` infected neighbours becomes infected.
pub fn run_direct(g: &ExplicitGraph, seeds: &[Vertex], r: u32) -> DirectOutcome {
    let n = g.n();
    let mut infected = vec![false; n];
    let mut count = vec![0u32; n];
    let mut newly: Vec<Vertex> = Vec::new();
    for &s in seeds {
        if !std::mem::replace(&mut infected[s as usize], true) {
            newly.push(s);
        }
    }
    let mut generations = 0;
    loop {
        let mut candidates = Vec::new();
        for &v in &newly {
            for &w in g.neighbors(v) {
                count[w as usize] += 1;
                if !infected[w as usize] && count[w as usize] >= r {
                    candidates.push(w);
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        if candidates.is_empty() {
            break;
        }
        for &c in &candidates {
            infected[c as usize] = true;
        }
        generations += 1;
        newly = candidates;
    }
    DirectOutcome {
        infected: (0..n as Vertex).filter(|&v| infected[v as usize]).collect(),
        generations,
    }
}

/// The step process on an explicit graph from an arbitrary seed set; returns
/// the sorted final infected set.
pub fn process_final_set(g: &ExplicitGraph, seeds: &[Vertex], r: u32) -> Vec<Vertex> {
    let mut proc =
        Process::with_seed_set(EdgeSource::Explicit(g), seeds, r, &TraceOptions::default());
    let mut rng = crate::rng::seeded_rng(0);
    while proc.advance(&mut rng) {}
    (0..g.n() as Vertex)
        .filter(|&v| proc.is_infected(v))
        .collect()
}

/// M(t) for t = 0..=stop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleSeries {
    pub values: Vec<f64>,
}

/// Inverts |A(t)| = a + M(t)(1 − π(t)) + (n − a)π(t), where π(t) = π̂(min(t, T)).
pub fn martingale_series(
    trace: &PercolationTrace,
    params: &ProcessParams,
) -> Result<MartingaleSeries> {
    let n = params.n() as f64;
    let a = trace.a as f64;
    let mut values = Vec::with_capacity(trace.infected_sizes.len());
    for (t, &size) in trace.infected_sizes.iter().enumerate() {
        let pi = params.pi_hat(t as u64);
        if pi >= 1.0 {
            return Err(Error::DegenerateRegime { t: t as u64 });
        }
        values.push(martingale_value(f64::from(size), a, n, pi));
    }
    Ok(MartingaleSeries { values })
}

/// M from |A|, a, n and π.
pub fn martingale_value(size: f64, a: f64, n: f64, pi: f64) -> f64 {
    (size - a - (n - a) * pi) / (1.0 - pi)
}

/// |A| from M, a, n and π.
pub fn infected_from_martingale(m: f64, a: f64, n: f64, pi: f64) -> f64 {
    a + m * (1.0 - pi) + (n - a) * pi
}

/// Writes `t,infected_size,martingale_value` rows.
pub fn write_trace_csv<W: Write>(
    trace: &PercolationTrace,
    series: &MartingaleSeries,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "infected_size", "martingale_value"])?;
    for (t, (&size, &m)) in trace.infected_sizes.iter().zip(&series.values).enumerate() {
        w.write_record([t.to_string(), size.to_string(), format!("{m}")])?;
    }
    w.flush()?;
    Ok(())
}

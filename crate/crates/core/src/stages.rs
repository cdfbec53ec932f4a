//! Measurements of the supercritical cascade, stage by stage.
//!
//! At step t₁ = ⌈t₀ + α/4⌉ the run is frozen. The snapshot yields:
//!
//! * a designated set A of infected but unexamined vertices,
//! * B̂, the vertices outside Z(t₁) ∪ A with at least r−1 neighbours in Z(t₁),
//! * B, the largest component of the graph induced on B̂,
//! * whether some A–B edge exists (which would infect all of B),
//! * C, vertices with at least r neighbours in a fixed-size subset of B,
//! * D, vertices with at least r neighbours in C.
//!
//! Every stage only looks at pairs no earlier stage (and not the engine up to
//! t₁) has looked at. With an explicit graph the sets are read off the graph.
//! With the implicit source the pairs are drawn fresh from the stage's own
//! random stream, which is exact in distribution given the snapshot.

use std::collections::HashSet;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Bernoulli, Binomial, Distribution};
use serde::Serialize;

use crate::engine::{EdgeSource, PercolationTrace, Process, TraceOptions};
use crate::error::{Error, Result};
use crate::fmt::sig12;
use crate::graph::{count_neighbors_in, largest_component, sample_gnp_with, Vertex};
use crate::thresholds::{binom_tail_geq, CriticalValues, ProcessParams};

/// Measured versus predicted stage sizes for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct StageReport {
    pub alpha: f64,
    pub t1: u64,
    pub early_ok: bool,
    /// |A(t₁)| − t₁, or |A(T)| − t₁ when the run stopped first.
    pub surplus: i64,
    pub size_A: u64,
    pub size_Bhat: u64,
    pub pred_Bhat: f64,
    pub size_B: u64,
    pub pred_B: f64,
    pub bridge_AB: bool,
    pub size_C: u64,
    pub pred_C: f64,
    pub size_D: u64,
    /// Guaranteed share of D: (n − |Z(t₁)| − |A| − |B-subset| − pred_C − 1/p) / n.
    #[serde(serialize_with = "sig12")]
    pub pred_D_fraction: f64,
    #[serde(serialize_with = "sig12")]
    pub frac_D: f64,
    /// B was smaller than the subset size used to seed C.
    pub truncated: bool,
}

/// Predicted sizes, kept real valued.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StagePredictions {
    pub t1: u64,
    pub early_surplus: f64,
    pub a_size: f64,
    pub bhat: f64,
    pub b: f64,
    pub b_subset: f64,
    pub c: f64,
}

impl StagePredictions {
    pub fn new(params: &ProcessParams, critical: &CriticalValues, alpha: f64) -> Self {
        let p = params.p();
        let np = params.np();
        let rm1 = f64::from(params.r() - 1);
        let t0 = critical.t0;
        let d = critical.delta;
        let pi_t0 = params.pi_hat(critical.t0_int);
        let early_surplus = (1.0 - 2.0 * pi_t0) * alpha / 4.0;
        Self {
            t1: (t0 + alpha / 4.0).ceil().max(0.0) as u64,
            early_surplus,
            a_size: early_surplus,
            bhat: (1.0 + 0.75 * d + rm1 * alpha / (4.0 * t0)) / p,
            b: (d / 4.0 + rm1 * alpha / (2.0 * t0 + rm1 * alpha)) / p,
            b_subset: np.powf(-1.0 / (4.0 * rm1)) / (4.0 * p),
            c: np.powf(1.0 / (4.0 * rm1)) / p,
        }
    }
}

/// Outcome of the early-growth event: T > t₁ and
/// |A(t₁)| ≥ t₁ + (1 − 2π̂(t₀))α/4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyGrowth {
    pub ok: bool,
    pub surplus: i64,
}

pub fn early_growth_check(
    trace: &PercolationTrace,
    params: &ProcessParams,
    critical: &CriticalValues,
    alpha: f64,
) -> Result<EarlyGrowth> {
    let pred = StagePredictions::new(params, critical, alpha);
    let t1 = pred.t1;
    if !trace.completed && trace.stop < t1 {
        return Err(Error::TraceTooShort {
            stop: trace.stop,
            needed: t1,
        });
    }
    let at_t1 = trace.size_at(t1);
    let surplus = at_t1 as i64 - t1 as i64;
    let ran_long_enough = !trace.completed || trace.stop > t1;
    Ok(EarlyGrowth {
        ok: ran_long_enough && surplus as f64 >= pred.early_surplus,
        surplus,
    })
}

/// Frozen state of a run at some step.
#[derive(Debug, Clone)]
pub struct StageSnapshot {
    pub n: usize,
    pub r: u32,
    pub step: u64,
    pub examined: Vec<bool>,
    /// Neighbours in Z(step) for every vertex.
    pub counters: Vec<u32>,
    /// A(step) \ Z(step), increasing.
    pub unexamined_infected: Vec<Vertex>,
    /// Pairs the engine revealed, when it ran with auditing.
    pub engine_pairs: Option<HashSet<(Vertex, Vertex)>>,
}

impl StageSnapshot {
    pub fn capture(process: &Process<'_>) -> Self {
        let n = process.n();
        Self {
            n,
            r: process.r(),
            step: process.step_index(),
            examined: (0..n as Vertex).map(|v| process.is_examined(v)).collect(),
            counters: process.counters().to_vec(),
            unexamined_infected: process.unexamined_infected(),
            engine_pairs: process.revealed_pairs().cloned(),
        }
    }

    pub fn examined_count(&self) -> usize {
        self.examined.iter().filter(|&&e| e).count()
    }
}

/// The smallest `size` members of A(t₁) \ Z(t₁) (fewer if not available).
pub fn designated_a(snapshot: &StageSnapshot, size: usize) -> Vec<Vertex> {
    snapshot
        .unexamined_infected
        .iter()
        .copied()
        .take(size)
        .collect()
}

/// B̂: vertices outside Z(t₁) ∪ A with at least r−1 neighbours in Z(t₁).
pub fn qualified_set(snapshot: &StageSnapshot, a_set: &[Vertex]) -> Vec<Vertex> {
    let mut excluded = snapshot.examined.clone();
    for &v in a_set {
        excluded[v as usize] = true;
    }
    let need = snapshot.r - 1;
    (0..snapshot.n as Vertex)
        .filter(|&v| !excluded[v as usize] && snapshot.counters[v as usize] >= need)
        .collect()
}

/// Largest component of the graph induced on `bhat`, as sorted vertex ids.
pub fn giant_in_qualified<R: Rng + ?Sized>(
    source: EdgeSource<'_>,
    bhat: &[Vertex],
    rng: &mut R,
) -> Vec<Vertex> {
    if bhat.len() <= 1 {
        return bhat.to_vec();
    }
    match source {
        EdgeSource::Explicit(g) => largest_component(g, Some(bhat), true)
            .largest_members
            .unwrap_or_default(),
        EdgeSource::Implicit { p, .. } => {
            // Pairs inside B̂ are all unrevealed at t₁, so they form a fresh G(|B̂|, p).
            let local = sample_gnp_with(bhat.len(), p, rng);
            let members = largest_component(&local, None, true)
                .largest_members
                .unwrap_or_default();
            let mut out: Vec<Vertex> = members.iter().map(|&i| bhat[i as usize]).collect();
            out.sort_unstable();
            out
        }
    }
}

/// Result of the last three stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub bridge_ab: bool,
    pub b_subset: Vec<Vertex>,
    /// |C| before truncation.
    pub c_count: u64,
    /// The designated C used to seed D.
    pub c_set: Vec<Vertex>,
    pub d_count: u64,
    pub truncated: bool,
}

/// Sets fixed before the bridge and expansion stages.
#[derive(Debug, Clone, Copy)]
pub struct ExpansionInput<'s> {
    /// Z(t₁) membership, indexed by vertex.
    pub examined: &'s [bool],
    pub a_set: &'s [Vertex],
    pub bhat: &'s [Vertex],
    /// Sorted members of B.
    pub b_set: &'s [Vertex],
    pub b_subset_target: f64,
    pub c_target: f64,
    pub r: u32,
}

impl ExpansionInput<'_> {
    fn mark(&self, sets: &[&[Vertex]]) -> Vec<bool> {
        let mut marked = self.examined.to_vec();
        for set in sets {
            for &v in *set {
                marked[v as usize] = true;
            }
        }
        marked
    }
}

/// Bridge test between A and B, then C from a subset of B and D from C.
///
/// C is drawn from outside Z(t₁) ∪ A ∪ B̂. D is drawn from outside
/// Z(t₁) ∪ A ∪ B-subset ∪ C, with C truncated to ⌈pred_C⌉ smallest ids.
pub fn bridge_and_expand<R: Rng + ?Sized>(
    source: EdgeSource<'_>,
    input: &ExpansionInput<'_>,
    rng: &mut R,
) -> Expansion {
    let r = input.r;
    let subset_len = input.b_subset_target.ceil().max(0.0) as usize;
    let truncated = input.b_set.len() < subset_len;
    let b_subset: Vec<Vertex> = input.b_set.iter().copied().take(subset_len).collect();
    let c_cap = input.c_target.ceil().max(0.0) as usize;

    let prior_c = input.mark(&[input.a_set, input.bhat]);
    let rest1: Vec<Vertex> = (0..prior_c.len() as Vertex)
        .filter(|&v| !prior_c[v as usize])
        .collect();

    let (bridge_ab, c_count, c_set) = match source {
        EdgeSource::Explicit(g) => {
            let in_b: HashSet<Vertex> = input.b_set.iter().copied().collect();
            let bridge_ab = input
                .a_set
                .iter()
                .any(|&u| g.neighbors(u).iter().any(|w| in_b.contains(w)));
            let to_b = count_neighbors_in(g, &b_subset);
            let c_full: Vec<Vertex> = rest1
                .iter()
                .copied()
                .filter(|&v| to_b[v as usize] >= r)
                .collect();
            let c_set: Vec<Vertex> = c_full.iter().copied().take(c_cap).collect();
            (bridge_ab, c_full.len() as u64, c_set)
        }
        EdgeSource::Implicit { p, .. } => {
            let pairs = input.a_set.len() as f64 * input.b_set.len() as f64;
            let p_bridge = -(pairs * (-p).ln_1p()).exp_m1();
            let bridge_ab = Bernoulli::new(p_bridge.clamp(0.0, 1.0))
                .expect("probability in [0,1]")
                .sample(rng);
            // Each vertex of rest1 sees |B-subset| fresh pairs. The indicators
            // are independent and exchangeable, so the count is binomial and
            // the members form a uniform subset of rest1.
            let q_c = binom_tail_geq(b_subset.len() as u64, p, r);
            let c_count = binomial(rest1.len() as u64, q_c, rng);
            let c_len = (c_count as usize).min(c_cap);
            let mut c_set: Vec<Vertex> = sample_indices(rng, rest1.len(), c_len)
                .into_iter()
                .map(|i| rest1[i])
                .collect();
            c_set.sort_unstable();
            (bridge_ab, c_count, c_set)
        }
    };

    let prior_d = input.mark(&[input.a_set, &b_subset, &c_set]);
    let d_count = match source {
        EdgeSource::Explicit(g) => {
            let to_c = count_neighbors_in(g, &c_set);
            (0..prior_d.len())
                .filter(|&v| !prior_d[v] && to_c[v] >= r)
                .count() as u64
        }
        EdgeSource::Implicit { p, .. } => {
            let rest2 = prior_d.iter().filter(|&&e| !e).count() as u64;
            binomial(rest2, binom_tail_geq(c_set.len() as u64, p, r), rng)
        }
    };
    Expansion {
        bridge_ab,
        b_subset,
        c_count,
        c_set,
        d_count,
        truncated,
    }
}

fn binomial<R: Rng + ?Sized>(trials: u64, p: f64, rng: &mut R) -> u64 {
    if trials == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        trials
    } else {
        Binomial::new(trials, p).expect("p in (0,1)").sample(rng)
    }
}

/// Enumerates every pair the stages look at and checks that no pair is
/// looked at twice, either across stages or against the engine's pairs.
/// Returns the number of stage pairs. Intended for small n.
pub fn audit_stage_pairs(
    snapshot: &StageSnapshot,
    input: &ExpansionInput<'_>,
    expansion: &Expansion,
) -> std::result::Result<usize, (Vertex, Vertex)> {
    let mut seen: HashSet<(Vertex, Vertex)> = HashSet::new();
    let engine = snapshot.engine_pairs.as_ref();
    let mut visit = |u: Vertex, w: Vertex| {
        let key = (u.min(w), u.max(w));
        if u == w || engine.is_some_and(|e| e.contains(&key)) || !seen.insert(key) {
            return Err(key);
        }
        Ok(())
    };
    for (i, &u) in input.bhat.iter().enumerate() {
        for &w in &input.bhat[i + 1..] {
            visit(u, w)?;
        }
    }
    for &u in input.a_set {
        for &w in input.b_set {
            visit(u, w)?;
        }
    }
    let prior_c = input.mark(&[input.a_set, input.bhat]);
    for &u in &expansion.b_subset {
        for w in 0..prior_c.len() as Vertex {
            if !prior_c[w as usize] {
                visit(u, w)?;
            }
        }
    }
    let prior_d = input.mark(&[input.a_set, &expansion.b_subset, &expansion.c_set]);
    for &u in &expansion.c_set {
        for w in 0..prior_d.len() as Vertex {
            if !prior_d[w as usize] {
                visit(u, w)?;
            }
        }
    }
    Ok(seen.len())
}

/// All intermediate sets of one stage analysis.
#[derive(Debug, Clone)]
pub struct StageSets {
    pub a_set: Vec<Vertex>,
    pub bhat: Vec<Vertex>,
    pub b_set: Vec<Vertex>,
    pub expansion: Expansion,
}

/// Runs every stage on a snapshot taken at t₁ (or at T if the process
/// stopped first).
pub fn analyze_snapshot<R: Rng + ?Sized>(
    source: EdgeSource<'_>,
    snapshot: &StageSnapshot,
    pred: &StagePredictions,
    rng: &mut R,
) -> StageSets {
    let a_len = pred.a_size.floor().max(0.0) as usize;
    let a_set = designated_a(snapshot, a_len);
    let bhat = qualified_set(snapshot, &a_set);
    let b_set = giant_in_qualified(source, &bhat, rng);
    let input = ExpansionInput {
        examined: &snapshot.examined,
        a_set: &a_set,
        bhat: &bhat,
        b_set: &b_set,
        b_subset_target: pred.b_subset,
        c_target: pred.c,
        r: snapshot.r,
    };
    let expansion = bridge_and_expand(source, &input, rng);
    StageSets {
        a_set,
        bhat,
        b_set,
        expansion,
    }
}

impl StageSets {
    pub fn input<'s>(
        &'s self,
        snapshot: &'s StageSnapshot,
        pred: &StagePredictions,
    ) -> ExpansionInput<'s> {
        ExpansionInput {
            examined: &snapshot.examined,
            a_set: &self.a_set,
            bhat: &self.bhat,
            b_set: &self.b_set,
            b_subset_target: pred.b_subset,
            c_target: pred.c,
            r: snapshot.r,
        }
    }
}

/// Builds the report from the stage sets and the completed trace.
pub fn stage_report(
    params: &ProcessParams,
    critical: &CriticalValues,
    alpha: f64,
    trace: &PercolationTrace,
    snapshot: &StageSnapshot,
    sets: &StageSets,
) -> Result<StageReport> {
    let pred = StagePredictions::new(params, critical, alpha);
    let early = early_growth_check(trace, params, critical, alpha)?;
    let n = params.n() as f64;
    let guaranteed_d = n
        - snapshot.examined_count() as f64
        - sets.a_set.len() as f64
        - sets.expansion.b_subset.len() as f64
        - pred.c
        - 1.0 / params.p();
    Ok(StageReport {
        alpha,
        t1: pred.t1,
        early_ok: early.ok,
        surplus: early.surplus,
        size_A: sets.a_set.len() as u64,
        size_Bhat: sets.bhat.len() as u64,
        pred_Bhat: pred.bhat,
        size_B: sets.b_set.len() as u64,
        pred_B: pred.b,
        bridge_AB: sets.expansion.bridge_ab,
        size_C: sets.expansion.c_count,
        pred_C: pred.c,
        size_D: sets.expansion.d_count,
        pred_D_fraction: (guaranteed_d / n).clamp(0.0, 1.0),
        frac_D: sets.expansion.d_count as f64 / n,
        truncated: sets.expansion.truncated,
    })
}

/// A full run with the stage analysis performed at t₁.
#[derive(Debug, Clone)]
pub struct StagedRun {
    pub trace: PercolationTrace,
    pub report: StageReport,
    pub snapshot: StageSnapshot,
    pub sets: StageSets,
}

/// Runs the process to t₁, analyzes the stages, then finishes the run.
///
/// Stage draws in implicit mode come from a stream split off `rng` at t₁,
/// so the engine's continuation and the stage measurements are two
/// independent continuations of the same history.
pub fn run_with_stages<R: Rng + ?Sized>(
    source: EdgeSource<'_>,
    params: &ProcessParams,
    critical: &CriticalValues,
    seed: crate::engine::SeedSpec,
    alpha: f64,
    opts: &TraceOptions,
    rng: &mut R,
) -> Result<StagedRun> {
    let pred = StagePredictions::new(params, critical, alpha);
    let stage_opts = TraceOptions {
        exact_counters: true,
        ..opts.clone()
    };
    let mut process = Process::new(source, seed, params.r(), &stage_opts);
    let mut counters_at = std::collections::BTreeMap::new();
    process.drive(pred.t1, &opts.checkpoints, &mut counters_at, rng);
    let snapshot = StageSnapshot::capture(&process);
    let mut stage_rng = crate::rng::seeded_rng(rng.random());
    let sets = analyze_snapshot(source, &snapshot, &pred, &mut stage_rng);
    if !opts.wants_exact_counters() {
        process.relax_counters();
    }
    let trace = process.finish_with(opts, counters_at, rng);
    let report = stage_report(params, critical, alpha, &trace, &snapshot, &sets)?;
    Ok(StagedRun {
        trace,
        report,
        snapshot,
        sets,
    })
}

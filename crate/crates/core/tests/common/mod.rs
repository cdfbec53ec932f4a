#![allow(dead_code)]

use bootperc::engine::PercolationTrace;
use bootperc::graph::{ExplicitGraph, Vertex};

pub fn check_trace_invariants(tr: &PercolationTrace) {
    assert_eq!(tr.infected_sizes[0] as usize, tr.a);
    assert!(tr.infected_sizes.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(tr.infected_sizes.len() as u64, tr.stop + 1);
    if tr.completed {
        assert_eq!(u64::from(tr.infected_sizes[tr.stop as usize]), tr.stop);
        assert_eq!(tr.final_size, tr.stop);
    }
    for (t, &s) in tr.infected_sizes.iter().enumerate().take(tr.stop as usize) {
        assert!(
            u64::from(s) > t as u64,
            "|A({t})| = {s} before T = {}",
            tr.stop
        );
    }
    assert!(tr.final_size as usize <= tr.n);
}

/// Component sizes by breadth-first search, restricted to `keep`.
pub fn bfs_largest(g: &ExplicitGraph, keep: &[bool]) -> usize {
    let mut seen = vec![false; g.n()];
    let mut best = 0;
    for s in 0..g.n() {
        if seen[s] || !keep[s] {
            continue;
        }
        seen[s] = true;
        let mut queue = std::collections::VecDeque::from([s as Vertex]);
        let mut size = 0;
        while let Some(u) = queue.pop_front() {
            size += 1;
            for &w in g.neighbors(u) {
                if keep[w as usize] && !seen[w as usize] {
                    seen[w as usize] = true;
                    queue.push_back(w);
                }
            }
        }
        best = best.max(size);
    }
    best
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

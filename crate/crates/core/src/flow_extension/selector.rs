//! Deterministic choice of a limit point of a finite sequence of paths.

use crate::metric_graph::MetricGraph;
use crate::path_space::{path_distance, Path, DEFAULT_N_MAX};
use crate::skeleton::TimedUnionFind;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectorConfig {
    /// Length of the run of equal terms that counts as stabilized.
    pub window: usize,
    pub n_max: u32,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig { window: 5, n_max: DEFAULT_N_MAX }
    }
}

/// Returns the position in `seq` of the selected limit point.
///
/// A sequence whose last `window` terms agree selects that value.
/// Otherwise terms are grouped by single linkage at `radius` and the
/// smallest position of the largest group (ties to the earliest group)
/// is returned. `same(i, j)` reports exact equality of terms `i` and `j`
/// and `dist(i, j)` their distance; both are only called for `i < j`.
pub fn select_by<S, D>(len: usize, window: usize, radius: f64, same: S, dist: D) -> usize
where
    S: Fn(usize, usize) -> bool,
    D: Fn(usize, usize) -> f64,
{
    assert!(len > 0, "cannot select from an empty sequence");
    let w = window.max(1);
    if len >= w {
        let first = len - w;
        if (first + 1..len).all(|j| same(first, j)) {
            // earliest position carrying the stabilized value
            return (0..=first).find(|&i| i == first || same(i, first)).unwrap();
        }
    }
    let mut uf = TimedUnionFind::new(len);
    for i in 0..len {
        for j in i + 1..len {
            if uf.find(i) != uf.find(j) && (same(i, j) || dist(i, j) <= radius) {
                uf.union(i, j, 0);
            }
        }
    }
    let mut size = vec![0usize; len];
    for i in 0..len {
        size[uf.find(i)] += 1;
    }
    let best = (0..len).map(|i| size[uf.find(i)]).max().unwrap();
    (0..len).find(|&i| size[uf.find(i)] == best).unwrap()
}

/// [`select_by`] on explicit paths, with the path metric.
pub fn select_limit_point(g: &MetricGraph, seq: &[Path], radius: f64, cfg: &SelectorConfig) -> usize {
    select_by(
        seq.len(),
        cfg.window,
        radius,
        |i, j| seq[i] == seq[j],
        |i, j| {
            path_distance(g, &seq[i], &seq[j], cfg.n_max)
                .map(|d| d.value)
                .unwrap_or(f64::INFINITY)
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts(g: &MetricGraph, xs: &[f64]) -> Vec<Path> {
        xs.iter().map(|&x| Path::constant(0, 10, 0.1, g.from_signed(x))).collect()
    }

    #[test]
    fn constant_sequence() {
        let g = MetricGraph::line();
        let seq = consts(&g, &[0.3; 8]);
        assert_eq!(select_limit_point(&g, &seq, 0.01, &SelectorConfig::default()), 0);
    }

    #[test]
    fn eventually_constant_sequence_selects_its_limit() {
        let g = MetricGraph::line();
        let seq = consts(&g, &[0.9, 0.5, 0.25, 0.2, 0.2, 0.2, 0.2, 0.2]);
        let i = select_limit_point(&g, &seq, 0.01, &SelectorConfig::default());
        assert_eq!(seq[i], seq[7]);
        assert_eq!(i, 3);
    }

    #[test]
    fn alternating_sequence_selects_a_recurring_value() {
        let g = MetricGraph::line();
        let xs: Vec<f64> = (0..12).map(|k| if k % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let seq = consts(&g, &xs);
        let i = select_limit_point(&g, &seq, 0.1, &SelectorConfig::default());
        assert_eq!(seq[i], seq[0]);
        // the value recurs throughout the tail
        assert!(seq[6..].iter().filter(|p| **p == seq[i]).count() >= 3);
    }

    #[test]
    fn largest_cluster_wins() {
        let g = MetricGraph::line();
        let seq = consts(&g, &[5.0, 0.0, 0.001, 5.0, 0.002, 0.0005]);
        let i = select_limit_point(&g, &seq, 0.01, &SelectorConfig::default());
        assert_eq!(i, 1);
    }
}

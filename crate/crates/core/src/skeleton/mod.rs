//! Skeletons: ordered families of coalescing trajectories started from a
//! dense set of space-time points.

mod axioms;
mod bifurcation;
mod io;
mod union_find;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric_graph::{EdgeId, GraphPoint, MetricGraph};
use crate::path_space::{same_dt, Path};

pub use axioms::{
    check_axioms, count_distinct, icp_check, AxiomReport, IcpReport, Sk1Witness, Sk2Witness,
};
pub use bifurcation::{detect_bifurcations, BifurcationConfig, BifurcationReport, BifurcationSample};
pub use io::{read_skeleton, write_skeleton, SkeletonHeader};
pub use union_find::TimedUnionFind;

/// A closed interval `[lo, hi]` of coordinates on one edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub edge: EdgeId,
    pub lo: f64,
    pub hi: f64,
}

/// A compact region of the graph, given as a union of edge segments.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub segments: Vec<Segment>,
}

impl Region {
    pub fn new(segments: Vec<Segment>) -> Self {
        Region { segments }
    }

    /// `[a, b]` on the line graph.
    pub fn line_interval(a: f64, b: f64) -> Self {
        let mut segments = Vec::new();
        if b > 0.0 {
            segments.push(Segment { edge: 0, lo: a.max(0.0), hi: b });
        }
        if a < 0.0 {
            segments.push(Segment { edge: 1, lo: (-b).max(0.0), hi: -a });
        }
        if segments.is_empty() {
            // the single point 0
            segments.push(Segment { edge: 0, lo: 0.0, hi: 0.0 });
        }
        Region { segments }
    }

    /// Closed ball of radius `radius` around the centre of a star graph.
    pub fn star_ball(g: &MetricGraph, radius: f64) -> Self {
        Region {
            segments: (0..g.edge_count())
                .map(|edge| Segment { edge, lo: 0.0, hi: radius.min(g.edge(edge).length) })
                .collect(),
        }
    }

    pub fn contains(&self, g: &MetricGraph, p: &GraphPoint) -> bool {
        self.segments.iter().any(|s| {
            g.coord_on(p, s.edge)
                .is_some_and(|r| r >= s.lo && r <= s.hi)
        })
    }

    /// Total length of the region (overlaps are counted once per segment).
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.hi - s.lo).sum()
    }

    /// Point at arclength fraction `u` in `[0, 1]` of the segments taken in order.
    pub fn point_at(&self, g: &MetricGraph, u: f64) -> GraphPoint {
        let mut left = u.clamp(0.0, 1.0) * self.length();
        for s in &self.segments {
            let len = s.hi - s.lo;
            if left <= len {
                return g.canonical(s.edge, s.lo + left);
            }
            left -= len;
        }
        let last = self.segments.last().expect("nonempty region");
        g.canonical(last.edge, last.hi)
    }

    /// Points of the region spaced at most `step` apart along each segment.
    pub fn probes(&self, g: &MetricGraph, step: f64) -> Vec<GraphPoint> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for s in &self.segments {
            let n = ((s.hi - s.lo) / step).ceil().max(0.0) as usize;
            for i in 0..=n {
                let r = if n == 0 {
                    s.lo
                } else {
                    s.lo + (s.hi - s.lo) * i as f64 / n as f64
                };
                let p = g.canonical(s.edge, r);
                if seen.insert(p.key()) {
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Space-time window over which density is certified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonWindow {
    pub t_min: f64,
    pub t_max: f64,
    pub region: Region,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub start: i64,
    pub x: GraphPoint,
    pub path: Path,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeEvent {
    /// Smallest entry of the lower class.
    pub m: usize,
    /// Smallest entry of the other class.
    pub n: usize,
    /// Grid index of the merge.
    pub t: i64,
}

/// A frozen skeleton with its coalescence structure.
///
/// Entries are sorted by start time, ties keeping input order, so the
/// entries started by time `s` form a prefix.
#[derive(Clone, Debug)]
pub struct Skeleton {
    graph: Arc<MetricGraph>,
    dt: f64,
    entries: Vec<Entry>,
    first: i64,
    horizon: i64,
    classes: TimedUnionFind,
    merges: Vec<MergeEvent>,
    /// Time at which each entry joins a class containing a smaller entry.
    joined: Vec<i64>,
    /// For every grid time, the distinct positions of started entries,
    /// each with the smallest entry sitting there, sorted by that entry.
    snapshots: Vec<Vec<(GraphPoint, u32)>>,
    sk1_violation: Option<Sk1Witness>,
    window: Option<SkeletonWindow>,
}

impl Skeleton {
    /// Builds a skeleton from `(start index, path)` pairs. Each path must
    /// begin at its start index.
    pub fn new(graph: Arc<MetricGraph>, dt: f64, paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Parameter("a skeleton needs at least one entry".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
        }
        if let Some(p) = paths.iter().find(|p| !same_dt(p.dt, dt)) {
            return Err(Error::Alignment(format!("entry step {} differs from {dt}", p.dt)));
        }
        let mut order: Vec<usize> = (0..paths.len()).collect();
        order.sort_by_key(|&i| paths[i].start);
        let mut slots: Vec<Option<Path>> = paths.into_iter().map(Some).collect();
        let entries: Vec<Entry> = order
            .into_iter()
            .map(|i| {
                let path = slots[i].take().unwrap();
                Entry { start: path.start, x: path.samples[0], path }
            })
            .collect();

        let first = entries[0].start;
        let horizon = entries.iter().map(|e| e.path.end()).max().unwrap();
        let mut classes = TimedUnionFind::new(entries.len());
        let mut merges = Vec::new();
        let mut joined = vec![i64::MAX; entries.len()];
        let mut snapshots = Vec::with_capacity((horizon - first + 1) as usize);
        let mut sk1_violation = None;
        let mut started = 0usize;
        let mut groups: HashMap<(u64, u64), u32> = HashMap::new();
        for k in first..=horizon {
            while started < entries.len() && entries[started].start <= k {
                started += 1;
            }
            groups.clear();
            let mut snap = Vec::new();
            for (n, e) in entries[..started].iter().enumerate() {
                let p = e.path.at(k);
                match groups.get(&p.key()) {
                    None => {
                        groups.insert(p.key(), n as u32);
                        snap.push((p, n as u32));
                    }
                    Some(&m) => {
                        let m = m as usize;
                        if let Some((lo, hi)) = classes.union(m, n, k) {
                            merges.push(MergeEvent { m: lo, n: hi, t: k });
                            joined[hi] = joined[hi].min(k);
                        }
                        joined[n] = joined[n].min(k);
                        if sk1_violation.is_none()
                            && k < horizon
                            && entries[m].path.at(k + 1) != e.path.at(k + 1)
                        {
                            sk1_violation = Some(Sk1Witness {
                                m,
                                n,
                                s: k as f64 * dt,
                            });
                        }
                    }
                }
            }
            snapshots.push(snap);
        }
        Ok(Skeleton {
            graph,
            dt,
            entries,
            first,
            horizon,
            classes,
            merges,
            joined,
            snapshots,
            sk1_violation,
            window: None,
        })
    }

    pub fn with_window(mut self, window: SkeletonWindow) -> Self {
        self.window = Some(window);
        self
    }

    pub fn window(&self) -> Option<&SkeletonWindow> {
        self.window.as_ref()
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<MetricGraph> {
        &self.graph
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn entry(&self, n: usize) -> &Entry {
        &self.entries[n]
    }

    /// First grid index covered (earliest start).
    pub fn first_index(&self) -> i64 {
        self.first
    }

    /// Last grid index covered.
    pub fn horizon(&self) -> i64 {
        self.horizon
    }

    pub fn time(&self, k: i64) -> f64 {
        k as f64 * self.dt
    }

    /// Number of entries started at or before grid index `s`; the set
    /// `I^s` is `0..started_by(s)`.
    pub fn started_by(&self, s: i64) -> usize {
        self.entries.partition_point(|e| e.start <= s)
    }

    /// Position of entry `n` at grid index `t`.
    #[inline]
    pub fn position(&self, n: usize, t: i64) -> GraphPoint {
        self.entries[n].path.at(t)
    }

    /// Distinct positions at grid index `s` of the entries started by `s`,
    /// each paired with the smallest entry there.
    pub fn snapshot(&self, s: i64) -> &[(GraphPoint, u32)] {
        if s < self.first {
            return &[];
        }
        let k = (s.min(self.horizon) - self.first) as usize;
        &self.snapshots[k]
    }

    /// Smallest entry sitting at `x` at time `s`, if any.
    pub fn entry_at(&self, s: i64, x: &GraphPoint) -> Option<usize> {
        self.snapshot(s)
            .iter()
            .find(|(p, _)| p == x)
            .map(|&(_, n)| n as usize)
    }

    pub fn classes(&self) -> &TimedUnionFind {
        &self.classes
    }

    pub fn merges(&self) -> &[MergeEvent] {
        &self.merges
    }

    /// Time at which entry `n` joins a class with a smaller entry.
    pub fn joined(&self, n: usize) -> Option<i64> {
        (self.joined[n] != i64::MAX).then_some(self.joined[n])
    }

    pub fn sk1_violation(&self) -> Option<&Sk1Witness> {
        self.sk1_violation.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn line_skeleton(dt: f64, paths: &[(i64, Vec<f64>)]) -> Skeleton {
        let g = Arc::new(MetricGraph::line());
        let paths = paths
            .iter()
            .map(|(s, xs)| Path::new(*s, dt, xs.iter().map(|&x| g.from_signed(x)).collect()))
            .collect();
        Skeleton::new(g, dt, paths).unwrap()
    }

    #[test]
    fn entries_sorted_by_start_and_prefix_query() {
        let sk = line_skeleton(0.1, &[(2, vec![5.0, 5.0]), (0, vec![1.0, 1.0, 1.0, 1.0]), (2, vec![7.0, 7.0])]);
        assert_eq!(sk.entry(0).start, 0);
        assert_eq!(sk.entry(1).x, sk.graph().from_signed(5.0));
        assert_eq!(sk.entry(2).x, sk.graph().from_signed(7.0));
        assert_eq!(sk.started_by(-1), 0);
        assert_eq!(sk.started_by(1), 1);
        assert_eq!(sk.started_by(2), 3);
        assert_eq!(sk.horizon(), 3);
    }

    #[test]
    fn merges_are_logged_once() {
        let sk = line_skeleton(
            0.1,
            &[
                (0, vec![0.0, 0.5, 1.0, 1.0]),
                (0, vec![2.0, 1.5, 1.0, 1.0]),
                (1, vec![3.0, 1.0, 1.0]),
            ],
        );
        assert_eq!(sk.merges(), &[MergeEvent { m: 0, n: 1, t: 2 }, MergeEvent { m: 0, n: 2, t: 2 }]);
        assert_eq!(sk.snapshot(2).len(), 1);
        assert_eq!(sk.snapshot(1).len(), 3);
        assert!(sk.classes().same_class_at(1, 2, 2));
        assert!(!sk.classes().same_class_at(1, 2, 1));
        assert_eq!(sk.joined(2), Some(2));
        assert_eq!(sk.joined(0), None);
        assert!(sk.sk1_violation().is_none());
    }

    #[test]
    fn separation_after_meeting_is_a_violation() {
        let sk = line_skeleton(0.1, &[(0, vec![0.0, 1.0, 2.0]), (0, vec![2.0, 1.0, 0.0])]);
        let w = sk.sk1_violation().unwrap();
        assert_eq!((w.m, w.n), (0, 1));
        assert!((w.s - 0.1).abs() < 1e-12);
    }

    #[test]
    fn region_membership_on_line() {
        let g = MetricGraph::line();
        let k = Region::line_interval(-0.5, 1.0);
        for (x, inside) in [(-0.6, false), (-0.5, true), (0.0, true), (1.0, true), (1.01, false)] {
            assert_eq!(k.contains(&g, &g.from_signed(x)), inside, "x = {x}");
        }
        let pos = Region::line_interval(0.2, 1.0);
        assert!(!pos.contains(&g, &g.from_signed(0.0)));
        assert!((k.length() - 1.5).abs() < 1e-12);
        let probes = k.probes(&g, 0.25);
        assert_eq!(probes.len(), 7);
    }
}

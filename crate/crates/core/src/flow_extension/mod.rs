//! Extension of a skeleton to a flow defined at every space-time point,
//! repair at bifurcation points, and checks of the composition law.

mod repair;
mod schedule;
mod selector;
mod verify;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::metric_graph::{GraphPoint, MetricGraph};
use crate::path_space::{path_distance, Path};
use crate::skeleton::Skeleton;

pub use repair::{ClosedShell, RepairTrace, RepairedFlow, DEFAULT_K_CAP};
pub use schedule::EpsilonSchedule;
pub use selector::{select_by, select_limit_point, SelectorConfig};
pub use verify::{
    sample_flow_triples, stopping_time_consistency, verify_strong_flow, FlowSample, StoppingOutcome, StoppingRule,
    StrongFlowReport, Violation,
};

/// Anything that maps `(s, x)` to a position at a later grid time.
pub trait FlowEval: Sync {
    fn graph(&self) -> &MetricGraph;

    /// Position at grid index `t >= s` of the trajectory started at `x` at `s`.
    fn eval(&self, s: i64, x: GraphPoint, t: i64) -> Result<GraphPoint>;
}

/// How a query was resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Selection {
    /// Entry whose path the trajectory follows after `s`.
    pub entry: usize,
    /// The approximating sequence was eventually constant.
    pub stabilized: bool,
}

/// Start index and `GraphPoint::key` of a query.
type MemoKey = (i64, (u64, u64));

/// The extended flow `theta` built on a frozen skeleton.
pub struct FlowMap {
    skeleton: Arc<Skeleton>,
    schedule: EpsilonSchedule,
    selector: SelectorConfig,
    memo: RwLock<HashMap<MemoKey, Selection>>,
}

impl FlowMap {
    pub fn new(skeleton: Arc<Skeleton>, schedule: EpsilonSchedule, selector: SelectorConfig) -> Self {
        FlowMap {
            skeleton,
            schedule,
            selector,
            memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn skeleton_arc(&self) -> &Arc<Skeleton> {
        &self.skeleton
    }

    pub fn schedule(&self) -> &EpsilonSchedule {
        &self.schedule
    }

    /// Chooses the skeleton entry followed from `(s, x)`.
    pub fn select(&self, s: i64, x: GraphPoint) -> Result<Selection> {
        let key = (s, x.key());
        if let Some(sel) = self.memo.read().unwrap().get(&key) {
            return Ok(*sel);
        }
        let sel = self.select_uncached(s, x)?;
        // Duplicate concurrent inserts carry identical values.
        self.memo.write().unwrap().insert(key, sel);
        Ok(sel)
    }

    fn select_uncached(&self, s: i64, x: GraphPoint) -> Result<Selection> {
        let sk = &*self.skeleton;
        let g = sk.graph();
        let snap = sk.snapshot(s);
        // (distance, smallest entry), ordered by entry so a running
        // minimum over distance thresholds is a prefix scan.
        let cands: Vec<(f64, u32)> = snap.iter().map(|(p, n)| (g.dist(p, &x), *n)).collect();
        let nearest = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let eps1 = self.schedule.eps(1);
        if !(nearest < eps1) {
            return Err(Error::DensityViolation { radius: eps1, gap: nearest });
        }
        let first_within = |eps: f64| {
            cands
                .iter()
                .filter(|c| c.0 < eps)
                .map(|c| c.1)
                .min()
                .map(|n| n as usize)
        };
        // Eventually constant: something sits within the floor radius.
        if let Some(n) = first_within(self.schedule.floor()) {
            return Ok(Selection { entry: n, stabilized: true });
        }
        let mut seq = Vec::new();
        let mut last_eps = eps1;
        for k in 1..=self.schedule.floor_index() {
            let eps = self.schedule.eps(k);
            match first_within(eps) {
                Some(n) => {
                    seq.push(n);
                    last_eps = eps;
                }
                None => break,
            }
        }
        let restricted: HashMap<usize, Path> = seq
            .iter()
            .map(|&n| (n, sk.entry(n).path.restrict(s)))
            .collect();
        let pos = select_by(
            seq.len(),
            self.selector.window,
            last_eps,
            |i, j| seq[i] == seq[j],
            |i, j| {
                path_distance(g, &restricted[&seq[i]], &restricted[&seq[j]], self.selector.n_max)
                    .map(|d| d.value)
                    .unwrap_or(f64::INFINITY)
            },
        );
        let w = self.selector.window;
        let stabilized = seq.len() >= w && seq[seq.len() - w..].iter().all(|&n| n == seq[pos]);
        Ok(Selection { entry: seq[pos], stabilized })
    }

    /// `theta_{s,t}(x)`.
    pub fn theta_at(&self, s: i64, x: GraphPoint, t: i64) -> Result<GraphPoint> {
        if t < s {
            return Err(Error::Parameter(format!("t index {t} precedes s index {s}")));
        }
        if t == s {
            return Ok(x);
        }
        let sel = self.select(s, x)?;
        Ok(self.skeleton.position(sel.entry, t))
    }

    /// The whole trajectory `theta_{s,.}(x)` up to the skeleton horizon.
    pub fn theta(&self, s: i64, x: GraphPoint) -> Result<Path> {
        let sel = self.select(s, x)?;
        let mut path = self.skeleton.entry(sel.entry).path.restrict(s);
        path.samples[0] = x;
        Ok(path)
    }

    pub fn cache_len(&self) -> usize {
        self.memo.read().unwrap().len()
    }
}

impl FlowEval for FlowMap {
    fn graph(&self) -> &MetricGraph {
        self.skeleton.graph()
    }

    fn eval(&self, s: i64, x: GraphPoint, t: i64) -> Result<GraphPoint> {
        self.theta_at(s, x, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn line_flow(dt: f64, paths: &[(i64, Vec<f64>)], floor: f64) -> FlowMap {
        let g = Arc::new(MetricGraph::line());
        let paths = paths
            .iter()
            .map(|(s, xs)| Path::new(*s, dt, xs.iter().map(|&x| g.from_signed(x)).collect()))
            .collect();
        let sk = Skeleton::new(g, dt, paths).unwrap();
        FlowMap::new(Arc::new(sk), EpsilonSchedule::new(floor), SelectorConfig::default())
    }

    #[test]
    fn anchor_and_skeleton_preservation() {
        let flow = line_flow(
            0.1,
            &[(0, vec![0.0, 0.1, 0.2, 0.2]), (0, vec![0.4, 0.3, 0.2, 0.2]), (1, vec![-0.5, -0.6, -0.7])],
            1e-9,
        );
        let g = flow.graph().clone();
        let x = g.from_signed(0.123);
        assert_eq!(flow.theta_at(1, x, 1).unwrap(), x);
        let path = flow.theta(1, x).unwrap();
        assert_eq!(path.samples[0], x);
        for n in 0..3 {
            let e = flow.skeleton().entry(n).clone();
            for s in e.start..=3 {
                for t in s..=3 {
                    assert_eq!(flow.theta_at(s, e.path.at(s), t).unwrap(), e.path.at(t));
                }
            }
        }
    }

    #[test]
    fn constant_net_follows_the_nearest_value() {
        let xs: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
        let paths: Vec<(i64, Vec<f64>)> = xs.iter().map(|&x| (0, vec![x; 5])).collect();
        let flow = line_flow(0.1, &paths, 1e-9);
        let g = flow.graph().clone();
        // x = 0.31: the nearest net value 0.3 is the only one within 2^-k for k = 4..
        let p = flow.theta(2, g.from_signed(0.31)).unwrap();
        assert_eq!(p.samples[0], g.from_signed(0.31));
        assert!(p.samples[1..].iter().all(|y| (g.signed(y) - 0.3).abs() < 1e-12));
    }

    #[test]
    fn far_point_is_a_density_violation() {
        let flow = line_flow(0.1, &[(0, vec![0.0, 0.0])], 1e-9);
        let g = flow.graph().clone();
        match flow.theta(0, g.from_signed(3.0)) {
            Err(Error::DensityViolation { gap, .. }) => assert_eq!(gap, 3.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(flow.theta(-1, g.from_signed(0.0)).is_err());
    }

    #[test]
    fn memo_does_not_change_results() {
        let flow = line_flow(0.1, &[(0, vec![0.0, 0.5, 1.0]), (0, vec![0.05, -0.5, -1.0])], 1e-9);
        let g = flow.graph().clone();
        let x = g.from_signed(0.02);
        let a = flow.theta(0, x).unwrap();
        assert_eq!(flow.cache_len(), 1);
        let b = flow.theta(0, x).unwrap();
        assert_eq!(a, b);
        let fresh = line_flow(0.1, &[(0, vec![0.0, 0.5, 1.0]), (0, vec![0.05, -0.5, -1.0])], 1e-9);
        assert_eq!(fresh.theta(0, x).unwrap(), a);
    }
}

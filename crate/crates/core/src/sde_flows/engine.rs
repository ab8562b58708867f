//! Generic coalescing particle system: particles grouped into classes, one
//! state per class, merges resolved once per grid step.

use crate::error::{Error, Result};
use crate::metric_graph::{GraphPoint, MetricGraph};

use super::Start;

/// One-particle dynamics together with the rule deciding when two
/// particles meet during a step.
pub trait Motion {
    type State: Clone;

    fn graph(&self) -> &MetricGraph;

    /// State of particle `n` entering at grid index `s` at `x`.
    fn start(&mut self, n: usize, s: i64, x: GraphPoint) -> Result<Self::State>;

    fn point(&self, st: &Self::State) -> GraphPoint;

    /// Moves a class led by particle `rep` from grid index `k` to `k + 1`.
    fn advance(&mut self, rep: usize, k: i64, st: &mut Self::State);

    /// Whether particles moving `a.0 -> a.1` and `b.0 -> b.1` met during the step.
    fn meets(&self, a: (&GraphPoint, &GraphPoint), b: (&GraphPoint, &GraphPoint)) -> bool;
}

/// `d1` is within `tol` of zero or has the opposite sign of `d0`.
#[inline]
pub fn crossed(d0: f64, d1: f64, tol: f64) -> bool {
    d1.abs() <= tol || d0 * d1 < 0.0
}

#[derive(Clone, Debug)]
pub struct Class<S> {
    /// Smallest particle of the class; its streams drive the class.
    pub rep: usize,
    pub members: Vec<usize>,
    pub state: S,
    pub point: GraphPoint,
}

pub struct ParticleSystem<M: Motion> {
    motion: M,
    k: i64,
    starts: Vec<Start>,
    next: usize,
    classes: Vec<Class<M::State>>,
    old: Vec<GraphPoint>,
    parent: Vec<usize>,
    merge_steps: usize,
}

impl<M: Motion> ParticleSystem<M> {
    /// `starts` must be sorted by start index; particle `n` is `starts[n]`.
    pub fn new(motion: M, starts: Vec<Start>) -> Result<Self> {
        if starts.is_empty() {
            return Err(Error::Parameter("no start points".into()));
        }
        if starts.windows(2).any(|w| w[0].s > w[1].s) {
            return Err(Error::Parameter("start points must be sorted by time".into()));
        }
        let k = starts[0].s;
        let mut sys = ParticleSystem {
            motion,
            k,
            starts,
            next: 0,
            classes: Vec::new(),
            old: Vec::new(),
            parent: Vec::new(),
            merge_steps: 0,
        };
        sys.activate()?;
        Ok(sys)
    }

    fn activate(&mut self) -> Result<()> {
        while self.next < self.starts.len() && self.starts[self.next].s <= self.k {
            let n = self.next;
            let st = self.starts[n];
            if st.s < self.k {
                return Err(Error::Parameter(format!("start index {} already passed", st.s)));
            }
            let state = self.motion.start(n, st.s, st.x)?;
            let point = self.motion.point(&state);
            match self.classes.iter_mut().find(|c| c.point == point) {
                Some(c) => c.members.push(n),
                None => self.classes.push(Class {
                    rep: n,
                    members: vec![n],
                    state,
                    point,
                }),
            }
            self.next += 1;
        }
        Ok(())
    }

    pub fn time(&self) -> i64 {
        self.k
    }

    pub fn classes(&self) -> &[Class<M::State>] {
        &self.classes
    }

    pub fn motion(&self) -> &M {
        &self.motion
    }

    /// Particles started so far.
    pub fn started(&self) -> usize {
        self.next
    }

    /// Steps in which at least one merge happened.
    pub fn merge_steps(&self) -> usize {
        self.merge_steps
    }

    pub fn step(&mut self) -> Result<()> {
        let k = self.k;
        self.old.clear();
        for c in &mut self.classes {
            self.old.push(c.point);
            self.motion.advance(c.rep, k, &mut c.state);
            c.point = self.motion.point(&c.state);
        }
        self.resolve_merges();
        self.k += 1;
        self.activate()
    }

    fn resolve_merges(&mut self) {
        let n = self.classes.len();
        self.parent.clear();
        self.parent.extend(0..n);
        let mut any = false;
        for i in 0..n {
            for j in i + 1..n {
                let a = (&self.old[i], &self.classes[i].point);
                let b = (&self.old[j], &self.classes[j].point);
                if self.motion.meets(a, b) {
                    let (ri, rj) = (root(&self.parent, i), root(&self.parent, j));
                    if ri != rj {
                        // classes are sorted by rep, so the smaller index leads
                        self.parent[ri.max(rj)] = ri.min(rj);
                        any = true;
                    }
                }
            }
        }
        if !any {
            return;
        }
        self.merge_steps += 1;
        let mut merged: Vec<Class<M::State>> = Vec::with_capacity(n);
        let mut slot = vec![usize::MAX; n];
        for (i, c) in std::mem::take(&mut self.classes).into_iter().enumerate() {
            let r = root(&self.parent, i);
            if r == i {
                slot[i] = merged.len();
                merged.push(c);
            } else {
                merged[slot[r]].members.extend(c.members);
            }
        }
        self.classes = merged;
    }
}

fn root(parent: &[usize], mut i: usize) -> usize {
    while parent[i] != i {
        i = parent[i];
    }
    i
}

/// Runs the system to `horizon` and returns every particle's samples,
/// indexed like the starts.
pub fn run_paths<M: Motion>(motion: M, starts: Vec<Start>, horizon: i64) -> Result<Vec<Vec<GraphPoint>>> {
    if let Some(st) = starts.iter().find(|st| st.s > horizon) {
        return Err(Error::Parameter(format!("start index {} after horizon {horizon}", st.s)));
    }
    let counts: Vec<usize> = starts.iter().map(|st| (horizon - st.s + 1) as usize).collect();
    let mut out: Vec<Vec<GraphPoint>> = counts.iter().map(|&c| Vec::with_capacity(c)).collect();
    let mut sys = ParticleSystem::new(motion, starts)?;
    loop {
        for c in sys.classes() {
            for &m in &c.members {
                out[m].push(c.point);
            }
        }
        if sys.time() >= horizon {
            break;
        }
        sys.step()?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Deterministic drift: particle n moves by `speeds[n]` per step on the line.
    struct Drift {
        g: MetricGraph,
        speeds: Vec<f64>,
    }

    impl Motion for Drift {
        type State = f64;
        fn graph(&self) -> &MetricGraph {
            &self.g
        }
        fn start(&mut self, _n: usize, _s: i64, x: GraphPoint) -> Result<f64> {
            Ok(self.g.signed(&x))
        }
        fn point(&self, st: &f64) -> GraphPoint {
            self.g.from_signed(*st)
        }
        fn advance(&mut self, rep: usize, _k: i64, st: &mut f64) {
            *st += self.speeds[rep];
        }
        fn meets(&self, a: (&GraphPoint, &GraphPoint), b: (&GraphPoint, &GraphPoint)) -> bool {
            let g = &self.g;
            crossed(g.signed(a.0) - g.signed(b.0), g.signed(a.1) - g.signed(b.1), 0.0)
        }
    }

    fn start(g: &MetricGraph, s: i64, x: f64) -> Start {
        Start { s, x: g.from_signed(x) }
    }

    #[test]
    fn crossing_merges_into_the_smaller_particle() {
        let g = MetricGraph::line();
        let m = Drift { g: g.clone(), speeds: vec![1.0, -1.0, 0.0] };
        let starts = vec![start(&g, 0, 0.0), start(&g, 0, 3.0), start(&g, 0, 10.0)];
        let out = run_paths(m, starts, 4).unwrap();
        let sig = |n: usize| out[n].iter().map(|p| g.signed(p)).collect::<Vec<_>>();
        assert_eq!(sig(0), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        // 3 -> 2 -> 1 crosses 0 -> 1 -> 2 during the second step
        assert_eq!(sig(1), vec![3.0, 2.0, 2.0, 3.0, 4.0]);
        assert_eq!(sig(2), vec![10.0; 5]);
    }

    #[test]
    fn late_start_on_an_occupied_point_joins_that_class() {
        let g = MetricGraph::line();
        let m = Drift { g: g.clone(), speeds: vec![1.0, -5.0] };
        let starts = vec![start(&g, 0, 0.0), start(&g, 2, 2.0)];
        let out = run_paths(m, starts, 4).unwrap();
        assert_eq!(out[1].len(), 3);
        assert_eq!(&out[1][..], &out[0][2..]);
    }

    #[test]
    fn rejects_unsorted_or_late_starts() {
        let g = MetricGraph::line();
        let m = || Drift { g: g.clone(), speeds: vec![0.0, 0.0] };
        assert!(run_paths(m(), vec![start(&g, 2, 0.0), start(&g, 0, 1.0)], 4).is_err());
        assert!(run_paths(m(), vec![start(&g, 0, 0.0), start(&g, 5, 1.0)], 4).is_err());
    }
}

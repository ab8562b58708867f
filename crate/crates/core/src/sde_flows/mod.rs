//! Skeleton generators: grid simulators of coalescing flows on the line
//! and on star graphs. Every generator guarantees exact coalescence.

mod coalescing_bm;
pub mod engine;
pub mod noise;
mod skew;
mod tanaka;
mod tanaka_star;
mod walsh;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric_graph::{GraphPoint, MetricGraph};
use crate::path_space::{grid_index, Path};
use crate::skeleton::{Region, Skeleton, SkeletonWindow};

pub use coalescing_bm::CoalescingBm;
pub use engine::{crossed, run_paths, Class, Motion, ParticleSystem};
pub use noise::{Noise, Stream};
pub use skew::{lattice_site, SkewLattice};
pub use tanaka::{Tanaka, TanakaState};
pub use tanaka_star::{lift, SignSplit};
pub use walsh::{walsh_meets, Walsh, WalshState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FlowKind {
    /// Independent Brownian motions on the line, coalescing on meeting.
    CoalescingBm,
    /// Walsh Brownian motions on a star, weights from the graph.
    Walsh,
    /// Tanaka equation on the line.
    Tanaka,
    /// Lattice skew Brownian flow on the line.
    Skew { beta: f64 },
    /// Tanaka equation on a star; edges below `split` are positive.
    TanakaStar { split: usize },
}

impl FlowKind {
    pub fn name(&self) -> &'static str {
        match self {
            FlowKind::CoalescingBm => "coalescing-bm",
            FlowKind::Walsh => "walsh",
            FlowKind::Tanaka => "tanaka",
            FlowKind::Skew { .. } => "skew",
            FlowKind::TanakaStar { .. } => "tanaka-star",
        }
    }

    /// Starts must lie on the lattice of step `sqrt(dt)`.
    pub fn is_lattice(&self) -> bool {
        matches!(self, FlowKind::Skew { .. } | FlowKind::TanakaStar { .. })
    }

    pub fn on_star(&self) -> bool {
        matches!(self, FlowKind::Walsh | FlowKind::TanakaStar { .. })
    }

    /// Checks the parameters against the graph.
    pub fn validate(&self, g: &MetricGraph) -> Result<()> {
        if g.star_center().is_none() {
            return Err(Error::Unsupported(format!("{} needs a star graph", self.name())));
        }
        match *self {
            FlowKind::CoalescingBm | FlowKind::Tanaka | FlowKind::Skew { .. } if g.edge_count() != 2 => {
                Err(Error::Unsupported(format!("{} lives on the line (a two-edge star)", self.name())))
            }
            FlowKind::Skew { beta } if !(-1.0..=1.0).contains(&beta) => {
                Err(Error::Parameter(format!("skew parameter {beta} outside [-1, 1]")))
            }
            FlowKind::TanakaStar { split } => SignSplit::new(g, split).map(|_| ()),
            _ => Ok(()),
        }
    }
}

/// A particle entering at grid index `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Start {
    pub s: i64,
    pub x: GraphPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub kind: FlowKind,
    pub dt: f64,
    /// Last grid index simulated.
    pub horizon: i64,
    /// Merge distance for continuous flows.
    pub snap_tol: f64,
    pub seed: u64,
}

pub const DEFAULT_SNAP_TOL: f64 = 1e-9;

/// Simulator output: the skeleton plus the shared driving path when there is one.
pub struct Simulation {
    pub skeleton: Skeleton,
    /// Shared noise at grid indices `first..=horizon`, starting at 0.
    pub driving: Option<Vec<f64>>,
    /// Lattice spacing for lattice flows.
    pub lattice_step: Option<f64>,
}

impl Simulation {
    /// Shared noise at grid index `k`.
    pub fn driving_at(&self, k: i64) -> Option<f64> {
        let w = self.driving.as_ref()?;
        w.get((k - self.skeleton.first_index()) as usize).copied()
    }

    /// First grid index at which entry `n` sits at a vertex.
    pub fn zero_time(&self, n: usize) -> Option<i64> {
        let e = self.skeleton.entry(n);
        e.path
            .samples
            .iter()
            .position(GraphPoint::is_vertex)
            .map(|i| e.start + i as i64)
    }

    /// Lattice local time of entry `n` on `[s_n, t]`: spacing times the
    /// number of grid times spent at the vertex.
    pub fn local_time(&self, n: usize, t: i64) -> Option<f64> {
        let h = self.lattice_step?;
        let e = self.skeleton.entry(n);
        let upto = ((t - e.start + 1).max(0) as usize).min(e.path.samples.len());
        Some(h * e.path.samples[..upto].iter().filter(|p| p.is_vertex()).count() as f64)
    }
}

/// Runs the configured flow from `starts` and freezes the result as a skeleton.
pub fn simulate(cfg: &SimConfig, graph: Arc<MetricGraph>, starts: &[Start]) -> Result<Simulation> {
    if !(cfg.dt > 0.0) {
        return Err(Error::Parameter(format!("time step must be positive, got {}", cfg.dt)));
    }
    if !(cfg.snap_tol >= 0.0) {
        return Err(Error::Parameter("snap tolerance must be nonnegative".into()));
    }
    cfg.kind.validate(&graph)?;
    let mut starts = starts.to_vec();
    starts.sort_by_key(|st| st.s);
    if starts.is_empty() {
        return Err(Error::Parameter("no start points".into()));
    }
    for st in &starts {
        if !graph.contains_point(&st.x) {
            return Err(Error::InvalidPoint(format!("start {} is not a point of the graph", st.x)));
        }
    }
    let base = starts[0].s;
    let noise = Noise::new(cfg.seed);
    let g = (*graph).clone();
    let mut driving = None;
    let mut lattice_step = None;
    let samples = match cfg.kind {
        FlowKind::CoalescingBm => run_paths(CoalescingBm::new(g, noise, cfg.dt, cfg.snap_tol), starts.clone(), cfg.horizon)?,
        FlowKind::Walsh => run_paths(Walsh::new(g, noise, cfg.dt, cfg.snap_tol)?, starts.clone(), cfg.horizon)?,
        FlowKind::Tanaka => {
            let m = Tanaka::new(g, noise, cfg.dt, base, cfg.horizon);
            driving = Some(m.driving().to_vec());
            run_paths(m, starts.clone(), cfg.horizon)?
        }
        FlowKind::Skew { beta } => {
            let m = SkewLattice::new(g, beta, noise, cfg.dt, base, cfg.horizon)?;
            driving = Some(m.driving());
            lattice_step = Some(m.h());
            run_paths(m, starts.clone(), cfg.horizon)?
        }
        FlowKind::TanakaStar { split } => {
            let split = SignSplit::new(&g, split)?;
            let line = MetricGraph::line();
            let y_starts: Vec<Start> = starts
                .iter()
                .map(|st| Start { s: st.s, x: line.from_signed(split.conjugate(&g, &st.x)) })
                .collect();
            let m = SkewLattice::new(line.clone(), split.beta(), noise, cfg.dt, base, cfg.horizon)?;
            let h = m.h();
            driving = Some(m.driving());
            lattice_step = Some(h);
            let y: Vec<Vec<f64>> = run_paths(m, y_starts, cfg.horizon)?
                .iter()
                .map(|p| p.iter().map(|q| line.signed(q)).collect())
                .collect();
            let st: Vec<(i64, GraphPoint)> = starts.iter().map(|st| (st.s, st.x)).collect();
            lift(&g, &split, &noise, h, &st, &y)?
        }
    };
    let paths = starts
        .iter()
        .zip(samples)
        .map(|(st, xs)| Path::new(st.s, cfg.dt, xs))
        .collect();
    let skeleton = Skeleton::new(graph, cfg.dt, paths)?;
    Ok(Simulation { skeleton, driving, lattice_step })
}

/// Regular net of start points: times `t_min, t_min + time_spacing, ...`
/// up to `t_max`, and on each, the centre plus points every `spacing`
/// along each edge up to `radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartNet {
    pub t_min: f64,
    pub t_max: f64,
    pub time_spacing: f64,
    pub spacing: f64,
    pub radius: f64,
}

impl StartNet {
    /// Start points for a flow on `g`. Lattice flows snap the space spacing
    /// down to a multiple of the lattice step.
    pub fn starts(&self, g: &MetricGraph, dt: f64, lattice: bool) -> Result<Vec<Start>> {
        if !(self.spacing > 0.0) || !(self.time_spacing > 0.0) || !(self.radius >= 0.0) || !(self.t_max >= self.t_min)
        {
            return Err(Error::Parameter("start net needs positive spacings, radius >= 0, t_max >= t_min".into()));
        }
        let c = g
            .star_center()
            .ok_or_else(|| Error::Unsupported("start nets are built on star graphs".into()))?;
        let dk = grid_index(self.time_spacing, dt).max(1);
        let k0 = grid_index(self.t_min, dt);
        let k1 = grid_index(self.t_max, dt);
        let dr = if lattice {
            let h = dt.sqrt();
            (self.spacing / h + 1e-9).floor().max(1.0) * h
        } else {
            self.spacing
        };
        // cover the whole ball: the outermost row sits at or beyond the radius
        let rows = (self.radius / dr - 1e-9).ceil().max(0.0) as u32;
        let mut points = vec![GraphPoint::Vertex(c)];
        for j in 0..g.edge_count() {
            for i in 1..=rows {
                points.push(g.star_point(j, i as f64 * dr));
            }
        }
        let mut out = Vec::new();
        let mut k = k0;
        while k <= k1 {
            out.extend(points.iter().map(|&x| Start { s: k, x }));
            k += dk;
        }
        Ok(out)
    }

    /// The window covered by the net: its start times and the ball of
    /// radius `radius` around the centre.
    pub fn window(&self, g: &MetricGraph) -> SkeletonWindow {
        SkeletonWindow {
            t_min: self.t_min,
            t_max: self.t_max,
            region: Region::star_ball(g, self.radius),
        }
    }
}

/// Tracks whether the radius cutoff was ever applied.
pub(crate) struct RadiusGuard {
    r_max: f64,
    warned: bool,
}

impl RadiusGuard {
    pub(crate) fn new(r_max: f64) -> Self {
        RadiusGuard { r_max, warned: false }
    }
}

pub(crate) fn clamp_radius(r: f64, guard: &mut RadiusGuard) -> f64 {
    if r > guard.r_max {
        if !guard.warned {
            log::warn!("trajectory reached the radius cutoff {}; clamping", guard.r_max);
            guard.warned = true;
        }
        guard.r_max
    } else {
        r
    }
}

//! Two-point meeting probabilities and the certified constants built on them.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::systems::{steps_for, with_system, Visit};
use super::{EstimateReport, McConfig};
use crate::error::{Error, Result};
use crate::metric_graph::{GraphPoint, MetricGraph};
use crate::sde_flows::noise::normal;
use crate::sde_flows::{FlowKind, Motion, Noise, ParticleSystem, Stream};
use crate::skeleton::Region;

#[derive(Clone, Debug)]
pub struct MeetingQuery {
    pub x: GraphPoint,
    pub y: GraphPoint,
    /// Horizon is `horizon_factor * dist(x, y)^2`.
    pub horizon_factor: f64,
    /// When set, leaving this region also ends the trial as a success.
    pub exit: Option<Region>,
    /// Grid steps per horizon for continuous flows; overrides `cfg.dt`.
    pub steps: Option<usize>,
}

impl MeetingQuery {
    pub fn new(x: GraphPoint, y: GraphPoint, horizon_factor: f64) -> Self {
        MeetingQuery { x, y, horizon_factor, exit: None, steps: None }
    }
}

/// Estimates `P[meet (or exit) before horizon_factor * dist(x, y)^2]`.
pub fn meeting_probability(cfg: &McConfig, q: &MeetingQuery) -> Result<EstimateReport> {
    cfg.validate()?;
    if !(q.horizon_factor > 0.0) {
        return Err(Error::Parameter(format!("horizon factor must be positive, got {}", q.horizon_factor)));
    }
    let g = &*cfg.graph;
    for p in [&q.x, &q.y] {
        if !g.contains_point(p) {
            return Err(Error::InvalidPoint(p.to_string()));
        }
    }
    let name = format!("meeting {} {} -> {} c={}", cfg.kind.name(), q.x, q.y, q.horizon_factor);
    let rho = g.dist(&q.x, &q.y);
    if rho == 0.0 {
        return Ok(EstimateReport::proportion(name, cfg.samples, cfg.samples).with_note("coincident start"));
    }
    let horizon = q.horizon_factor * rho * rho;
    let (dt, steps) = match q.steps {
        Some(_) if cfg.kind.is_lattice() => {
            return Err(Error::Parameter("lattice flows take their grid from dt, not a step count".into()))
        }
        Some(n) if n > 0 => (horizon / n as f64, n as i64),
        Some(_) => return Err(Error::Parameter("step count must be positive".into())),
        None => (cfg.dt, steps_for(horizon, cfg.dt)),
    };
    let run = McConfig { dt, ..cfg.clone() };
    let root = Noise::new(cfg.seed);
    let hits: Vec<Result<bool>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let noise = root.trial(i);
            if cfg.kind == FlowKind::CoalescingBm {
                Ok(bm_pair_meets(g, noise, q, dt, steps))
            } else {
                with_system(&run, noise, steps, &[q.x, q.y], PairVisit { steps, exit: q.exit.as_ref() })
            }
        })
        .collect();
    let mut count = 0;
    for h in hits {
        count += h? as usize;
    }
    let mut rep = EstimateReport::proportion(name, count, cfg.samples)
        .with_note(format!("horizon {horizon} in {steps} steps"));
    if cfg.kind == FlowKind::CoalescingBm {
        rep = rep.with_note("meeting detected with a Brownian bridge correction");
    }
    Ok(rep)
}

struct PairVisit<'a> {
    steps: i64,
    exit: Option<&'a Region>,
}

impl Visit for PairVisit<'_> {
    type Out = bool;

    fn run<M: Motion>(self, mut sys: ParticleSystem<M>) -> Result<bool> {
        let left = |sys: &ParticleSystem<M>| {
            self.exit
                .is_some_and(|k| sys.classes().iter().any(|c| !k.contains(sys.motion().graph(), &c.point)))
        };
        if sys.classes().len() == 1 || left(&sys) {
            return Ok(true);
        }
        for _ in 0..self.steps {
            sys.step()?;
            if sys.classes().len() == 1 || left(&sys) {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Two independent line Brownian motions. Between grid points the
/// difference is a Brownian bridge of variance `2 dt`, which touches zero
/// with probability `exp(-d0 d1 / dt)` when it does not change sign.
fn bm_pair_meets(g: &MetricGraph, noise: Noise, q: &MeetingQuery, dt: f64, steps: i64) -> bool {
    let mut ra = noise.rng(Stream::Particle(0));
    let mut rb = noise.rng(Stream::Particle(1));
    let mut aux = noise.rng(Stream::Aux(0));
    let sd = dt.sqrt();
    let (mut a, mut b) = (g.signed(&q.x), g.signed(&q.y));
    let outside = |v: f64| q.exit.as_ref().is_some_and(|k| !k.contains(g, &g.from_signed(v)));
    if outside(a) || outside(b) {
        return true;
    }
    for _ in 0..steps {
        let d0 = a - b;
        a += sd * normal(&mut ra);
        b += sd * normal(&mut rb);
        let d1 = a - b;
        let u: f64 = aux.random();
        if d0 * d1 <= 0.0 || u < (-d0 * d1 / dt).exp() || outside(a) || outside(b) {
            return true;
        }
    }
    false
}

/// Constants of the coalescence argument certified on a grid of a compact.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub alpha: f64,
    pub kappa: f64,
    pub beta: f64,
    /// `n` points of the compact always contain a pair within `c / n^kappa`.
    pub c: f64,
    /// Half the lowest lower confidence edge over the grid.
    pub p: f64,
    pub c1: f64,
    pub c2: f64,
    pub grid_points: usize,
    pub worst: EstimateReport,
}

/// Runs the meeting-or-exit estimate with horizon `beta * dist^2` over all
/// pairs of `grid` and derives `p`, `C1 = beta C^alpha / p` and
/// `C2 = C1 / (kappa alpha - 1)` with `alpha = 2`, `kappa = 1`.
pub fn certify_constants(
    cfg: &McConfig,
    region: &Region,
    grid: &[GraphPoint],
    beta: f64,
    c: f64,
    steps: Option<usize>,
) -> Result<Certificate> {
    let (alpha, kappa) = (2.0, 1.0);
    if grid.len() < 2 {
        return Err(Error::Parameter("certification grid needs at least two points".into()));
    }
    if let Some(p) = grid.iter().find(|p| !region.contains(&cfg.graph, p)) {
        return Err(Error::Parameter(format!("grid point {p} outside the compact")));
    }
    let mut worst: Option<EstimateReport> = None;
    for (i, x) in grid.iter().enumerate() {
        for y in &grid[i + 1..] {
            let q = MeetingQuery { x: *x, y: *y, horizon_factor: beta, exit: Some(region.clone()), steps };
            let rep = meeting_probability(cfg, &q)?;
            if worst.as_ref().is_none_or(|w| rep.ci_lo < w.ci_lo) {
                worst = Some(rep);
            }
        }
    }
    let worst = worst.expect("at least one pair");
    let p = worst.ci_lo / 2.0;
    if !(p > 0.0) {
        return Err(Error::Parameter(format!("worst-case meeting probability not bounded away from 0 ({})", worst.name)));
    }
    let c1 = beta * c.powf(alpha) / p;
    Ok(Certificate {
        alpha,
        kappa,
        beta,
        c,
        p,
        c1,
        c2: c1 / (kappa * alpha - 1.0),
        grid_points: grid.len(),
        worst,
    })
}

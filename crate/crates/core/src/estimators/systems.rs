//! Builds the particle system of a flow kind for one trial.

use crate::error::{Error, Result};
use crate::metric_graph::GraphPoint;
use crate::sde_flows::{CoalescingBm, FlowKind, Motion, Noise, ParticleSystem, SkewLattice, Start, Tanaka, Walsh};

use super::McConfig;

/// Consumer of a freshly started particle system, generic over the motion.
pub(crate) trait Visit {
    type Out;
    fn run<M: Motion>(self, sys: ParticleSystem<M>) -> Result<Self::Out>;
}

/// Starts `points` at grid index 0 under `noise` and hands the system to
/// `v`. `steps` bounds the shared noise drawn up front.
pub(crate) fn with_system<V: Visit>(
    cfg: &McConfig,
    noise: Noise,
    steps: i64,
    points: &[GraphPoint],
    v: V,
) -> Result<V::Out> {
    let g = (*cfg.graph).clone();
    let starts: Vec<Start> = points.iter().map(|&x| Start { s: 0, x }).collect();
    match cfg.kind {
        FlowKind::CoalescingBm => v.run(ParticleSystem::new(CoalescingBm::new(g, noise, cfg.dt, cfg.snap_tol), starts)?),
        FlowKind::Walsh => v.run(ParticleSystem::new(Walsh::new(g, noise, cfg.dt, cfg.snap_tol)?, starts)?),
        FlowKind::Tanaka => v.run(ParticleSystem::new(Tanaka::new(g, noise, cfg.dt, 0, steps), starts)?),
        FlowKind::Skew { beta } => v.run(ParticleSystem::new(
            SkewLattice::new(g, beta, noise, cfg.dt, 0, steps)?,
            starts,
        )?),
        FlowKind::TanakaStar { .. } => Err(Error::Unsupported(
            "estimators run the n-point motion directly; tanaka-star is only available as a skeleton".into(),
        )),
    }
}

/// Number of grid steps covering `time`.
pub(crate) fn steps_for(time: f64, dt: f64) -> i64 {
    (time / dt - 1e-9).ceil().max(0.0) as i64
}

//! Composition-law and restart checks for any flow evaluator.

use rayon::prelude::*;
use serde::Serialize;

use rand::Rng;

use super::{ClosedShell, FlowEval, FlowMap};
use crate::error::{Error, Result};
use crate::metric_graph::GraphPoint;
use crate::path_space::grid_index;
use crate::sde_flows::{Noise, Stream};
use crate::skeleton::{Skeleton, SkeletonWindow};

/// One composition check: start `x` at `s`, compare at `u` the direct
/// value with the value obtained by restarting at `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowSample {
    pub s: i64,
    pub t: i64,
    pub u: i64,
    pub x: GraphPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub s: f64,
    pub t: f64,
    pub u: f64,
    pub x: String,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongFlowReport {
    pub evaluated: usize,
    pub max_residual: f64,
    pub violations: Vec<Violation>,
    /// Samples that could not be evaluated, with the reason.
    pub errors: Vec<String>,
}

impl StrongFlowReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.errors.is_empty()
    }
}

/// Residuals `rho(F_{t,u}(F_{s,t}(x)), F_{s,u}(x))` over all samples,
/// evaluated in parallel; output order follows the input.
pub fn verify_strong_flow<F: FlowEval + ?Sized>(flow: &F, dt: f64, samples: &[FlowSample]) -> StrongFlowReport {
    let g = flow.graph();
    let results: Vec<Result<f64>> = samples
        .par_iter()
        .map(|q| {
            let mid = flow.eval(q.s, q.x, q.t)?;
            let two_step = flow.eval(q.t, mid, q.u)?;
            let direct = flow.eval(q.s, q.x, q.u)?;
            Ok(g.dist(&two_step, &direct))
        })
        .collect();
    let mut report = StrongFlowReport {
        evaluated: 0,
        max_residual: 0.0,
        violations: Vec::new(),
        errors: Vec::new(),
    };
    for (q, r) in samples.iter().zip(results) {
        match r {
            Ok(res) => {
                report.evaluated += 1;
                report.max_residual = report.max_residual.max(res);
                if res != 0.0 {
                    report.violations.push(Violation {
                        s: q.s as f64 * dt,
                        t: q.t as f64 * dt,
                        u: q.u as f64 * dt,
                        x: q.x.to_string(),
                        residual: res,
                    });
                }
            }
            Err(e) => report.errors.push(format!("s={} x={}: {e}", q.s, q.x)),
        }
    }
    report
}

/// `count` composition samples: `s` uniform on the grid of the window,
/// `x` uniform on its region, then `s <= t <= u <= horizon` uniform.
pub fn sample_flow_triples(sk: &Skeleton, window: &SkeletonWindow, count: usize, seed: u64) -> Result<Vec<FlowSample>> {
    let s_lo = grid_index(window.t_min, sk.dt()).max(sk.first_index());
    let s_hi = grid_index(window.t_max, sk.dt()).min(sk.horizon());
    if s_lo > s_hi || window.region.segments.is_empty() {
        return Err(Error::Parameter("sampling window misses the skeleton".into()));
    }
    let h = sk.horizon();
    let mut rng = Noise::new(seed).rng(Stream::Aux(1));
    Ok((0..count)
        .map(|_| {
            let s = rng.random_range(s_lo..=s_hi);
            let x = window.region.point_at(sk.graph(), rng.random());
            let t = rng.random_range(s..=h);
            let u = rng.random_range(t..=h);
            FlowSample { s, t, u, x }
        })
        .collect())
}

/// Grid-time functional of a trajectory.
#[derive(Clone, Debug)]
pub enum StoppingRule {
    /// `sigma = s`.
    Immediate,
    /// First grid time at which the trajectory lies in the shell.
    FirstHit(ClosedShell),
    /// Line graph only: first grid time at which the signed coordinate
    /// reaches or crosses `level`.
    FirstCrossing(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum StoppingOutcome {
    Residual { sigma: f64, residual: f64 },
    NotStopped,
}

/// Restarts `theta` at the stopping time and returns the sup distance
/// between the restarted trajectory and the original tail.
pub fn stopping_time_consistency(
    flow: &FlowMap,
    s: i64,
    x: GraphPoint,
    rule: &StoppingRule,
) -> Result<StoppingOutcome> {
    let sk = flow.skeleton();
    let g = sk.graph();
    let path = flow.theta(s, x)?;
    let horizon = path.end();
    let sigma = match rule {
        StoppingRule::Immediate => Some(s),
        StoppingRule::FirstHit(shell) => {
            (s..=horizon).find(|&k| shell.contains(g, sk.time(k), &path.at(k)))
        }
        StoppingRule::FirstCrossing(level) => {
            let side = (g.signed(&path.at(s)) - level).signum();
            (s..=horizon).find(|&k| {
                let d = g.signed(&path.at(k)) - level;
                d == 0.0 || d.signum() != side
            })
        }
    };
    let Some(sigma) = sigma else {
        return Ok(StoppingOutcome::NotStopped);
    };
    let z = path.at(sigma);
    let mut residual = 0.0f64;
    for t in sigma..=horizon {
        let restarted = flow.theta_at(sigma, z, t)?;
        residual = residual.max(g.dist(&restarted, &path.at(t)));
    }
    Ok(StoppingOutcome::Residual {
        sigma: sk.time(sigma),
        residual,
    })
}

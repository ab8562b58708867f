//! Brownian scaling of Walsh motion checked with a two-sample KS test.

use std::sync::Arc;

use rayon::prelude::*;

use super::systems::{with_system, Visit};
use super::{EstimateReport, McConfig, Target};
use crate::error::{Error, Result};
use crate::metric_graph::{GraphPoint, MetricGraph};
use crate::sde_flows::{FlowKind, Motion, Noise, ParticleSystem};

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic rejection threshold `c(alpha) sqrt((n+m)/(n m))` with
/// `c(alpha) = sqrt(-ln(alpha/2) / 2)`.
pub fn ks_threshold(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// Compares `|X(lambda^2 t)| / lambda` for a Walsh motion from `x` with
/// `|X(t)|` from the point at radius `|x| / lambda` on the same edge. Both
/// sides use `steps` grid steps; the two samples use disjoint trials.
pub fn scaling_check_walsh(
    graph: Arc<MetricGraph>,
    lambda: f64,
    x: GraphPoint,
    t: f64,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<EstimateReport> {
    if !(lambda > 0.0) || !(t > 0.0) || steps == 0 {
        return Err(Error::Parameter("scaling check needs lambda > 0, t > 0 and steps > 0".into()));
    }
    let g = &*graph;
    let scaled = match g.edge_of(&x) {
        Some(j) => g.star_point(j, g.radius(&x) / lambda),
        None => x,
    };
    let side = |dt: f64, from: GraphPoint, offset: u64| -> Result<Vec<f64>> {
        let cfg = McConfig::new(FlowKind::Walsh, graph.clone(), dt, samples, seed);
        cfg.validate()?;
        let root = Noise::new(seed);
        (0..samples as u64)
            .into_par_iter()
            .map(|i| with_system(&cfg, root.trial(offset + i), steps as i64, &[from], RadiusVisit(steps as i64)))
            .collect()
    };
    let a: Vec<f64> = side(lambda * lambda * t / steps as f64, x, 0)?.into_iter().map(|r| r / lambda).collect();
    let b = side(t / steps as f64, scaled, samples as u64)?;
    let d = ks_statistic(&a, &b);
    let thr = ks_threshold(samples, samples, 0.01);
    Ok(EstimateReport::exact(format!("walsh scaling lambda={lambda} from {x}"), d, samples)
        .with_target(Target::AtMost { bound: thr })
        .with_note(format!("KS threshold {thr} at level 0.01")))
}

struct RadiusVisit(i64);

impl Visit for RadiusVisit {
    type Out = f64;

    fn run<M: Motion>(self, mut sys: ParticleSystem<M>) -> Result<f64> {
        for _ in 0..self.0 {
            sys.step()?;
        }
        Ok(sys.motion().graph().radius(&sys.classes()[0].point))
    }
}

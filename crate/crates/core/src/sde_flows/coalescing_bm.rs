//! Coalescing Brownian motions on the line: independent until they meet.

use rand_chacha::ChaCha8Rng;

use super::engine::{crossed, Motion};
use super::noise::{normal, Noise, Stream};
use super::{clamp_radius, RadiusGuard};
use crate::error::Result;
use crate::metric_graph::{GraphPoint, MetricGraph};

pub struct CoalescingBm {
    g: MetricGraph,
    noise: Noise,
    sd: f64,
    snap_tol: f64,
    rngs: Vec<Option<ChaCha8Rng>>,
    guard: RadiusGuard,
}

impl CoalescingBm {
    pub fn new(g: MetricGraph, noise: Noise, dt: f64, snap_tol: f64) -> Self {
        let guard = RadiusGuard::new(g.r_max());
        CoalescingBm {
            g,
            noise,
            sd: dt.sqrt(),
            snap_tol,
            rngs: Vec::new(),
            guard,
        }
    }
}

impl Motion for CoalescingBm {
    type State = f64;

    fn graph(&self) -> &MetricGraph {
        &self.g
    }

    fn start(&mut self, n: usize, _s: i64, x: GraphPoint) -> Result<f64> {
        if self.rngs.len() <= n {
            self.rngs.resize(n + 1, None);
        }
        self.rngs[n] = Some(self.noise.rng(Stream::Particle(n as u32)));
        Ok(self.g.signed(&x))
    }

    fn point(&self, st: &f64) -> GraphPoint {
        self.g.from_signed(*st)
    }

    fn advance(&mut self, rep: usize, _k: i64, st: &mut f64) {
        let rng = self.rngs[rep].as_mut().expect("started particle");
        let y = *st + self.sd * normal(rng);
        *st = y.signum() * clamp_radius(y.abs(), &mut self.guard);
    }

    fn meets(&self, a: (&GraphPoint, &GraphPoint), b: (&GraphPoint, &GraphPoint)) -> bool {
        let g = &self.g;
        crossed(g.signed(a.0) - g.signed(b.0), g.signed(a.1) - g.signed(b.1), self.snap_tol)
    }
}

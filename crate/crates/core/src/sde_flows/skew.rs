//! Lattice skew Brownian flow: one shared uniform per step moves every
//! particle. Away from zero the step is `+h` iff the uniform is below 1/2;
//! at zero it is `+h` iff the uniform is below `(1 + beta) / 2`.

use super::engine::{crossed, Motion};
use super::noise::{Noise, Stream};
use crate::error::{Error, Result};
use crate::metric_graph::{GraphPoint, MetricGraph};

pub struct SkewLattice {
    g: MetricGraph,
    beta: f64,
    h: f64,
    /// Shared uniforms, `u[i]` drives the step out of grid index `base + i`.
    u: Vec<f64>,
    base: i64,
}

impl SkewLattice {
    pub fn new(g: MetricGraph, beta: f64, noise: Noise, dt: f64, base: i64, horizon: i64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::Parameter(format!("skew parameter {beta} outside [-1, 1]")));
        }
        let u = noise.uniforms(Stream::Lattice, (horizon - base).max(0) as usize);
        Ok(SkewLattice { g, beta, h: dt.sqrt(), u, base })
    }

    /// Lattice spacing.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Lattice site of `x`, if `x` is on the lattice.
    pub fn site(&self, x: f64) -> Option<i64> {
        lattice_site(x, self.h)
    }

    /// Step taken out of site `i` at grid index `k`.
    pub fn step_from(&self, i: i64, k: i64) -> i64 {
        let u = self.u[(k - self.base) as usize];
        let up = if i == 0 { u < 0.5 * (1.0 + self.beta) } else { u < 0.5 };
        if up {
            1
        } else {
            -1
        }
    }

    /// Shared walk `W` on grid indices `base..=horizon`, starting at 0.
    pub fn driving(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.u.len() + 1);
        let mut i = 0i64;
        w.push(0.0);
        for &u in &self.u {
            i += if u < 0.5 { 1 } else { -1 };
            w.push(i as f64 * self.h);
        }
        w
    }
}

pub fn lattice_site(x: f64, h: f64) -> Option<i64> {
    let i = (x / h).round();
    ((x - i * h).abs() <= 1e-9 * h.max(x.abs())).then_some(i as i64)
}

impl Motion for SkewLattice {
    type State = i64;

    fn graph(&self) -> &MetricGraph {
        &self.g
    }

    fn start(&mut self, _n: usize, s: i64, x: GraphPoint) -> Result<i64> {
        if s < self.base || s - self.base > self.u.len() as i64 {
            return Err(Error::Parameter(format!("start index {s} outside the noise grid")));
        }
        let y = self.g.signed(&x);
        self.site(y)
            .ok_or_else(|| Error::Alignment(format!("start {y} is not on the lattice of step {}", self.h)))
    }

    fn point(&self, st: &i64) -> GraphPoint {
        self.g.from_signed(*st as f64 * self.h)
    }

    fn advance(&mut self, _rep: usize, k: i64, st: &mut i64) {
        *st += self.step_from(*st, k);
    }

    fn meets(&self, a: (&GraphPoint, &GraphPoint), b: (&GraphPoint, &GraphPoint)) -> bool {
        let g = &self.g;
        crossed(g.signed(a.0) - g.signed(b.0), g.signed(a.1) - g.signed(b.1), 0.0)
    }
}

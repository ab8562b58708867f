//! Coalescing Tanaka flow on the line, driven by one shared Brownian path.
//! Before its first zero a particle moves rigidly with the noise; from then
//! on its modulus is the noise minus its running minimum and each
//! excursion gets a sign keyed by the excursion's start time.

use super::engine::{crossed, Motion};
use super::noise::{Noise, Stream};
use crate::error::{Error, Result};
use crate::metric_graph::{GraphPoint, MetricGraph};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TanakaState {
    /// Not yet at zero: `x0 + sign * (W - w0)`.
    Before { sign: f64, x0: f64, w0: f64, value: f64 },
    /// After the first zero; `sign` is 0 while at zero.
    After { sign: f64, min: f64, value: f64 },
}

impl TanakaState {
    pub fn value(&self) -> f64 {
        match *self {
            TanakaState::Before { value, .. } | TanakaState::After { value, .. } => value,
        }
    }
}

pub struct Tanaka {
    g: MetricGraph,
    noise: Noise,
    /// Shared path, `w[i]` at grid index `base + i`.
    w: Vec<f64>,
    base: i64,
}

impl Tanaka {
    /// Draws the shared path on grid indices `base..=horizon`.
    pub fn new(g: MetricGraph, noise: Noise, dt: f64, base: i64, horizon: i64) -> Self {
        let w = noise.brownian(Stream::Shared, dt, (horizon - base).max(0) as usize);
        Tanaka { g, noise, w, base }
    }

    pub fn driving(&self) -> &[f64] {
        &self.w
    }

    fn w_at(&self, k: i64) -> f64 {
        self.w[(k - self.base) as usize]
    }

    fn excursion_sign(&self, k: i64) -> f64 {
        if self.noise.uniform_at(Stream::Excursion, k as u64) < 0.5 {
            1.0
        } else {
            -1.0
        }
    }
}

impl Motion for Tanaka {
    type State = TanakaState;

    fn graph(&self) -> &MetricGraph {
        &self.g
    }

    fn start(&mut self, _n: usize, s: i64, x: GraphPoint) -> Result<TanakaState> {
        if s < self.base || s - self.base >= self.w.len() as i64 {
            return Err(Error::Parameter(format!("start index {s} outside the noise grid")));
        }
        let x0 = self.g.signed(&x);
        let w0 = self.w_at(s);
        Ok(if x0 == 0.0 {
            TanakaState::After { sign: 0.0, min: w0, value: 0.0 }
        } else {
            TanakaState::Before { sign: x0.signum(), x0, w0, value: x0 }
        })
    }

    fn point(&self, st: &TanakaState) -> GraphPoint {
        self.g.from_signed(st.value())
    }

    fn advance(&mut self, _rep: usize, k: i64, st: &mut TanakaState) {
        let w = self.w_at(k + 1);
        *st = match *st {
            TanakaState::Before { sign, x0, w0, .. } => {
                let v = x0 + sign * (w - w0);
                if sign * v <= 0.0 {
                    TanakaState::After { sign: 0.0, min: w, value: 0.0 }
                } else {
                    TanakaState::Before { sign, x0, w0, value: v }
                }
            }
            TanakaState::After { sign, min, .. } => {
                let min = min.min(w);
                let m = w - min;
                if m == 0.0 {
                    TanakaState::After { sign: 0.0, min, value: 0.0 }
                } else {
                    let sign = if sign == 0.0 { self.excursion_sign(k + 1) } else { sign };
                    TanakaState::After { sign, min, value: sign * m }
                }
            }
        };
    }

    fn meets(&self, a: (&GraphPoint, &GraphPoint), b: (&GraphPoint, &GraphPoint)) -> bool {
        let g = &self.g;
        crossed(g.signed(a.0) - g.signed(b.0), g.signed(a.1) - g.signed(b.1), 0.0)
    }
}

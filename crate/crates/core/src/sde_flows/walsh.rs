//! Walsh Brownian motions on a star graph, independent until they meet.
//! The radius follows a reflected random walk; each departure from the
//! centre picks an edge from the transmission weights.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::engine::{crossed, Motion};
use super::noise::{normal, pick, Noise, Stream};
use super::{clamp_radius, RadiusGuard};
use crate::error::{Error, Result};
use crate::metric_graph::{EdgeId, GraphPoint, MetricGraph};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalshState {
    pub edge: Option<EdgeId>,
    pub r: f64,
}

pub struct Walsh {
    g: MetricGraph,
    noise: Noise,
    sd: f64,
    snap_tol: f64,
    edges: Vec<EdgeId>,
    weights: Vec<f64>,
    rngs: Vec<Option<(ChaCha8Rng, ChaCha8Rng)>>,
    guard: RadiusGuard,
}

impl Walsh {
    pub fn new(g: MetricGraph, noise: Noise, dt: f64, snap_tol: f64) -> Result<Self> {
        let c = g
            .star_center()
            .ok_or_else(|| Error::Unsupported("Walsh flows are simulated on star graphs only".into()))?;
        let (edges, weights) = g.transmission(c).iter().copied().unzip();
        let guard = RadiusGuard::new(g.r_max());
        Ok(Walsh {
            g,
            noise,
            sd: dt.sqrt(),
            snap_tol,
            edges,
            weights,
            rngs: Vec::new(),
            guard,
        })
    }
}

impl Motion for Walsh {
    type State = WalshState;

    fn graph(&self) -> &MetricGraph {
        &self.g
    }

    fn start(&mut self, n: usize, _s: i64, x: GraphPoint) -> Result<WalshState> {
        if self.rngs.len() <= n {
            self.rngs.resize(n + 1, None);
        }
        let tag = n as u32;
        self.rngs[n] = Some((self.noise.rng(Stream::Particle(tag)), self.noise.rng(Stream::Decision(tag))));
        Ok(WalshState {
            edge: self.g.edge_of(&x),
            r: self.g.radius(&x),
        })
    }

    fn point(&self, st: &WalshState) -> GraphPoint {
        match st.edge {
            Some(j) if st.r > 0.0 => self.g.star_point(j, st.r),
            _ => self.g.star_point(self.edges[0], 0.0),
        }
    }

    fn advance(&mut self, rep: usize, _k: i64, st: &mut WalshState) {
        let (walk, decide) = self.rngs[rep].as_mut().expect("started particle");
        let r = (st.r + self.sd * normal(walk)).max(0.0);
        let r = clamp_radius(r, &mut self.guard);
        if r == 0.0 {
            st.edge = None;
        } else if st.r == 0.0 {
            st.edge = Some(self.edges[pick(&self.weights, decide.random::<f64>())]);
        }
        st.r = r;
    }

    fn meets(&self, a: (&GraphPoint, &GraphPoint), b: (&GraphPoint, &GraphPoint)) -> bool {
        walsh_meets(&self.g, a, b, self.snap_tol)
    }
}

/// Meeting rule on a star: both at the centre, or an order change along
/// one edge with the centre counted as coordinate 0 of every edge.
pub fn walsh_meets(
    g: &MetricGraph,
    a: (&GraphPoint, &GraphPoint),
    b: (&GraphPoint, &GraphPoint),
    tol: f64,
) -> bool {
    if a.1.is_vertex() && b.1.is_vertex() {
        return true;
    }
    for j in [g.edge_of(a.1), g.edge_of(b.1)].into_iter().flatten() {
        let c = |p: &GraphPoint| g.coord_on(p, j);
        if let (Some(a0), Some(a1), Some(b0), Some(b1)) = (c(a.0), c(a.1), c(b.0), c(b.1)) {
            if crossed(a0 - b0, a1 - b1, tol) {
                return true;
            }
        }
    }
    false
}

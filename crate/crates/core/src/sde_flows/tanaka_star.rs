//! Tanaka flow on a star graph, obtained by lifting a lattice skew flow.
//! Edges with index below the split carry positive signs, the rest
//! negative ones; the radius is the modulus of the skew flow and each
//! excursion of that flow picks an edge within its sign class.

use super::noise::{pick, Noise, Stream};
use super::skew::lattice_site;
use crate::error::{Error, Result};
use crate::metric_graph::{EdgeId, GraphPoint, MetricGraph};

/// Sign split of a star: edges `0..split` are positive.
#[derive(Clone, Debug)]
pub struct SignSplit {
    pub split: usize,
    positive: Vec<(EdgeId, f64)>,
    negative: Vec<(EdgeId, f64)>,
}

impl SignSplit {
    pub fn new(g: &MetricGraph, split: usize) -> Result<Self> {
        let c = g
            .star_center()
            .ok_or_else(|| Error::Unsupported("star-graph Tanaka flows need a star graph".into()))?;
        let d = g.edge_count();
        if split < 1 || split >= d {
            return Err(Error::Parameter(format!("sign split {split} outside 1..={}", d - 1)));
        }
        let (positive, negative) = g.transmission(c).iter().partition(|&&(j, _)| j < split);
        let split = SignSplit { split, positive, negative };
        if split.weight(true) <= 0.0 || split.weight(false) <= 0.0 {
            return Err(Error::Parameter("each sign class needs positive transmission weight".into()));
        }
        Ok(split)
    }

    fn weight(&self, positive: bool) -> f64 {
        self.class(positive).iter().map(|e| e.1).sum()
    }

    fn class(&self, positive: bool) -> &[(EdgeId, f64)] {
        if positive {
            &self.positive
        } else {
            &self.negative
        }
    }

    /// Skew parameter of the radial sign process.
    pub fn beta(&self) -> f64 {
        2.0 * self.weight(true) - 1.0
    }

    pub fn sign(&self, j: EdgeId) -> f64 {
        if j < self.split {
            1.0
        } else {
            -1.0
        }
    }

    /// Signed radius `sign(edge) * |x|`.
    pub fn conjugate(&self, g: &MetricGraph, x: &GraphPoint) -> f64 {
        match g.edge_of(x) {
            None => 0.0,
            Some(j) => self.sign(j) * g.radius(x),
        }
    }

    /// Edge taken by an excursion of the given sign starting at grid index `k`.
    pub fn draw(&self, noise: &Noise, k: i64, positive: bool) -> EdgeId {
        let class = self.class(positive);
        let weights: Vec<f64> = class.iter().map(|e| e.1).collect();
        let idx = (k as u64).wrapping_mul(2).wrapping_add(positive as u64);
        class[pick(&weights, noise.uniform_at(Stream::Excursion, idx))].0
    }
}

/// Lifts lattice paths `y` (signed positions on the line, spacing `h`) of
/// particles started at `starts` to the star.
pub fn lift(
    g: &MetricGraph,
    split: &SignSplit,
    noise: &Noise,
    h: f64,
    starts: &[(i64, GraphPoint)],
    y: &[Vec<f64>],
) -> Result<Vec<Vec<GraphPoint>>> {
    let centre = g.star_point(0, 0.0);
    starts
        .iter()
        .zip(y)
        .map(|(&(s, x), ys)| {
            let mut edge = g.edge_of(&x);
            let mut out = Vec::with_capacity(ys.len());
            let mut prev = 0i64;
            for (i, &v) in ys.iter().enumerate() {
                let site = lattice_site(v, h)
                    .ok_or_else(|| Error::Alignment(format!("{v} is not on the lattice")))?;
                if i > 0 && site != 0 && (prev == 0 || (prev > 0) != (site > 0)) {
                    edge = Some(split.draw(noise, s + i as i64, site > 0));
                }
                out.push(match (site, edge) {
                    (0, _) | (_, None) => centre,
                    (_, Some(j)) => g.star_point(j, site.unsigned_abs() as f64 * h),
                });
                prev = site;
            }
            Ok(out)
        })
        .collect()
}

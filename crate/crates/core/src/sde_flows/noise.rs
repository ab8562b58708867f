//! Counter-based random streams. Every draw is a function of the seed, the
//! trial number, a stream label and a position in that stream, so results
//! never depend on the order in which particles or trials are processed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream labels. Each label selects an independent ChaCha stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Brownian increments of one particle.
    Particle(u32),
    /// Edge choices of one particle when it leaves a vertex.
    Decision(u32),
    /// Brownian increments shared by all particles.
    Shared,
    /// Uniforms driving lattice walks.
    Lattice,
    /// Per-excursion signs and edges, keyed by excursion start time.
    Excursion,
    /// Auxiliary draws of estimators.
    Aux(u32),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Particle(n) => n as u64,
            Stream::Decision(n) => 1 << 32 | n as u64,
            Stream::Shared => 2 << 32,
            Stream::Lattice => 3 << 32,
            Stream::Excursion => 4 << 32,
            Stream::Aux(n) => 5 << 32 | n as u64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Noise {
    seed: u64,
    trial: u64,
}

impl Noise {
    pub fn new(seed: u64) -> Self {
        Noise { seed, trial: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent noise for Monte Carlo trial `i`.
    pub fn trial(&self, i: u64) -> Self {
        Noise {
            seed: self.seed,
            trial: i.wrapping_add(1),
        }
    }

    /// Generator positioned at the start of `stream`.
    pub fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.trial.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream.id());
        rng
    }

    /// Uniform on `[0, 1)` at position `index` of `stream`.
    pub fn uniform_at(&self, stream: Stream, index: u64) -> f64 {
        let mut rng = self.rng(stream);
        // one f64 consumes two 32-bit words
        rng.set_word_pos(index as u128 * 2);
        rng.random::<f64>()
    }

    /// Brownian path on `steps` grid steps of size `dt`, starting at 0.
    pub fn brownian(&self, stream: Stream, dt: f64, steps: usize) -> Vec<f64> {
        let sd = dt.sqrt();
        let mut rng = self.rng(stream);
        let mut w = Vec::with_capacity(steps + 1);
        let mut acc = 0.0;
        w.push(acc);
        for _ in 0..steps {
            acc += sd * normal(&mut rng);
            w.push(acc);
        }
        w
    }

    /// `count` uniforms from the start of `stream`.
    pub fn uniforms(&self, stream: Stream, count: usize) -> Vec<f64> {
        let mut rng = self.rng(stream);
        (0..count).map(|_| rng.random::<f64>()).collect()
    }
}

#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Index into cumulative `weights` selected by the uniform `u`.
pub fn pick(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w / total;
        if u < acc && *w > 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyed_uniforms_ignore_query_order() {
        let n = Noise::new(11);
        let fwd: Vec<f64> = (0..50).map(|i| n.uniform_at(Stream::Excursion, i)).collect();
        let back: Vec<f64> = (0..50).rev().map(|i| n.uniform_at(Stream::Excursion, i)).collect();
        assert!(fwd.iter().eq(back.iter().rev()));
        assert_eq!(n.uniforms(Stream::Excursion, 50), fwd);
    }

    #[test]
    fn streams_and_trials_differ() {
        let n = Noise::new(3);
        let a = n.uniforms(Stream::Particle(0), 4);
        assert_ne!(a, n.uniforms(Stream::Particle(1), 4));
        assert_ne!(a, n.uniforms(Stream::Decision(0), 4));
        assert_ne!(a, n.trial(0).uniforms(Stream::Particle(0), 4));
        assert_ne!(n.trial(0).uniforms(Stream::Shared, 4), n.trial(1).uniforms(Stream::Shared, 4));
        assert_eq!(a, Noise::new(3).uniforms(Stream::Particle(0), 4));
    }

    #[test]
    fn brownian_increments_have_the_right_variance() {
        let w = Noise::new(5).brownian(Stream::Shared, 0.01, 20_000);
        assert_eq!(w[0], 0.0);
        let qv: f64 = w.windows(2).map(|p| (p[1] - p[0]).powi(2)).sum();
        // quadratic variation over [0, 200]
        assert!((qv / 200.0 - 1.0).abs() < 0.05, "{qv}");
    }

    #[test]
    fn pick_respects_weights() {
        assert_eq!(pick(&[0.2, 0.3, 0.5], 0.0), 0);
        assert_eq!(pick(&[0.2, 0.3, 0.5], 0.25), 1);
        assert_eq!(pick(&[0.2, 0.3, 0.5], 0.999), 2);
        assert_eq!(pick(&[0.0, 1.0], 0.0), 1);
        assert_eq!(pick(&[0.5, 0.5, 0.0], 0.99999999999), 1);
    }
}

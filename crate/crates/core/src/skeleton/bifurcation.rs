//! Detection of space-time points from which nearby skeleton paths fan out
//! into several distinct bundles immediately.

use serde::Serialize;

use super::{Skeleton, TimedUnionFind};
use crate::error::{Error, Result};
use crate::metric_graph::GraphPoint;

#[derive(Clone, Debug)]
pub struct BifurcationConfig {
    /// Capture radii, tried from the smallest up.
    pub eps_ladder: Vec<f64>,
    /// Single-linkage radius for the uniform distance on `[s, t]`.
    pub cluster_tol: f64,
    /// Offsets `t - s`, in grid steps, at which the cluster count is reported.
    pub nu_offsets: Vec<i64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BifurcationSample {
    pub s: f64,
    pub x: GraphPoint,
    /// Capture radius actually used.
    pub eps: f64,
    /// The radius had to grow past the ladder.
    pub widened: bool,
    pub captured: usize,
    /// `(t, cluster count)` at the configured offsets.
    pub nu: Vec<(f64, usize)>,
    /// First time with at least two clusters.
    pub tau: Option<f64>,
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BifurcationReport {
    pub cluster_tol: f64,
    pub samples: Vec<BifurcationSample>,
}

impl BifurcationReport {
    pub fn flagged(&self) -> impl Iterator<Item = &BifurcationSample> {
        self.samples.iter().filter(|s| s.flagged)
    }
}

/// For each sampled `(s, x)` (grid index, point), clusters the paths of
/// entries started near `x` at time `s`.
pub fn detect_bifurcations(
    sk: &Skeleton,
    samples: &[(i64, GraphPoint)],
    cfg: &BifurcationConfig,
) -> Result<BifurcationReport> {
    if cfg.eps_ladder.is_empty() || cfg.eps_ladder.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Parameter("eps ladder must be nonempty and positive".into()));
    }
    if !(cfg.cluster_tol > 0.0) {
        return Err(Error::Parameter("cluster_tol must be positive".into()));
    }
    let mut ladder = cfg.eps_ladder.clone();
    ladder.sort_by(f64::total_cmp);
    let out = samples
        .iter()
        .map(|&(s, x)| sample(sk, s, x, &ladder, cfg))
        .collect();
    Ok(BifurcationReport {
        cluster_tol: cfg.cluster_tol,
        samples: out,
    })
}

fn sample(
    sk: &Skeleton,
    s: i64,
    x: GraphPoint,
    ladder: &[f64],
    cfg: &BifurcationConfig,
) -> BifurcationSample {
    let g = sk.graph();
    let started = sk.started_by(s);
    let dists: Vec<f64> = (0..started).map(|n| g.dist(&sk.position(n, s), &x)).collect();
    let captured_at = |eps: f64| dists.iter().filter(|&&d| d < eps).count();

    let mut widened = false;
    let mut eps = ladder[0];
    let mut idx = 0;
    while captured_at(eps) < 2.min(started) {
        idx += 1;
        if idx < ladder.len() {
            eps = ladder[idx];
        } else {
            if !widened {
                log::info!("widening capture radius at s = {}, x = {x}", sk.time(s));
            }
            widened = true;
            eps *= 2.0;
        }
    }

    // One representative per distinct position at time s; coalescence
    // makes the rest identical from s on.
    let mut reps: Vec<usize> = Vec::new();
    for (n, &d) in dists.iter().enumerate() {
        if d < eps && !reps.iter().any(|&m| sk.position(m, s) == sk.position(n, s)) {
            reps.push(n);
        }
    }
    let captured = dists.iter().filter(|&&d| d < eps).count();

    // Break time of each pair: first t >= s with separation above the tolerance.
    let horizon = sk.horizon();
    let mut pairs: Vec<(i64, usize, usize)> = Vec::new();
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            let (a, b) = (reps[i], reps[j]);
            let brk = (s..=horizon)
                .find(|&k| g.dist(&sk.position(a, k), &sk.position(b, k)) > cfg.cluster_tol)
                .unwrap_or(i64::MAX);
            pairs.push((brk, i, j));
        }
    }
    // The count reaches two once the maximum spanning forest loses an edge.
    pairs.sort_by_key(|p| std::cmp::Reverse(p.0));
    let mut uf = TimedUnionFind::new(reps.len());
    let mut tree = Vec::new();
    for &(brk, i, j) in &pairs {
        if uf.union(i, j, 0).is_some() {
            tree.push(brk);
        }
    }
    let tau_idx = if reps.len() <= 1 {
        None
    } else if tree.len() + 1 < reps.len() {
        Some(s)
    } else {
        tree.iter().copied().filter(|&b| b != i64::MAX).min()
    };

    let nu = cfg
        .nu_offsets
        .iter()
        .map(|&off| {
            let t = s + off;
            let mut uf = TimedUnionFind::new(reps.len());
            let mut count = reps.len();
            for &(brk, i, j) in &pairs {
                if brk > t && uf.union(i, j, 0).is_some() {
                    count -= 1;
                }
            }
            (sk.time(t), count)
        })
        .collect();

    BifurcationSample {
        s: sk.time(s),
        x,
        eps,
        widened,
        captured,
        nu,
        tau: tau_idx.map(|k| sk.time(k)),
        flagged: tau_idx.is_some_and(|k| k <= s + 1),
    }
}

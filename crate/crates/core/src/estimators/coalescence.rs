//! Coalescence times of n-point motions and the distinct-points curve.

use rayon::prelude::*;

use super::meeting::Certificate;
use super::systems::{steps_for, with_system, Visit};
use super::{mean_ci, EstimateReport, McConfig, Target};
use crate::error::{Error, Result};
use crate::metric_graph::GraphPoint;
use crate::sde_flows::{Motion, Noise, ParticleSystem};
use crate::skeleton::Region;

/// Per-trial values of `min(exit time of K, first time with <= m points)`.
#[derive(Clone, Debug)]
pub struct CoalescenceSample {
    pub n: usize,
    pub m: usize,
    pub times: Vec<f64>,
    /// Trials that reached `max_time` first; their time is `max_time`.
    pub censored: Vec<bool>,
    pub max_time: f64,
}

impl CoalescenceSample {
    pub fn censored_fraction(&self) -> f64 {
        self.censored.iter().filter(|&&c| c).count() as f64 / self.censored.len().max(1) as f64
    }
}

/// Runs the motion from `points` until some particle leaves `region` or at
/// most `m` distinct points remain.
pub fn coalescence_times(
    cfg: &McConfig,
    points: &[GraphPoint],
    m: usize,
    region: &Region,
    max_time: f64,
) -> Result<CoalescenceSample> {
    cfg.validate()?;
    let n = points.len();
    if m == 0 || m > n {
        return Err(Error::Parameter(format!("need 1 <= m <= n, got m={m}, n={n}")));
    }
    if !(max_time > 0.0) {
        return Err(Error::Parameter("time limit must be positive".into()));
    }
    if let Some(p) = points.iter().find(|p| !region.contains(&cfg.graph, p)) {
        return Err(Error::Parameter(format!("start {p} outside the compact")));
    }
    let steps = steps_for(max_time, cfg.dt);
    let root = Noise::new(cfg.seed);
    let out: Vec<Result<Option<i64>>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| with_system(cfg, root.trial(i), steps, points, UntilVisit { steps, m, region }))
        .collect();
    let mut times = Vec::with_capacity(out.len());
    let mut censored = Vec::with_capacity(out.len());
    for r in out {
        match r? {
            Some(k) => {
                times.push(k as f64 * cfg.dt);
                censored.push(false);
            }
            None => {
                times.push(max_time);
                censored.push(true);
            }
        }
    }
    Ok(CoalescenceSample { n, m, times, censored, max_time })
}

struct UntilVisit<'a> {
    steps: i64,
    m: usize,
    region: &'a Region,
}

impl Visit for UntilVisit<'_> {
    type Out = Option<i64>;

    fn run<M: Motion>(self, mut sys: ParticleSystem<M>) -> Result<Option<i64>> {
        let done = |sys: &ParticleSystem<M>| {
            let g = sys.motion().graph();
            sys.classes().len() <= self.m || sys.classes().iter().any(|c| !self.region.contains(g, &c.point))
        };
        for k in 0..=self.steps {
            if done(&sys) {
                return Ok(Some(k));
            }
            if k < self.steps {
                sys.step()?;
            }
        }
        Ok(None)
    }
}

/// Mean stopping time against `C2 / m^(kappa alpha - 1)`.
pub fn coalescence_report(sample: &CoalescenceSample, cert: &Certificate) -> EstimateReport {
    let bound = cert.c2 / (sample.m as f64).powf(cert.kappa * cert.alpha - 1.0);
    EstimateReport::mean(format!("coalescence time n={} m={}", sample.n, sample.m), &sample.times)
        .with_target(Target::AtMost { bound })
        .with_note(format!("censored fraction {}", sample.censored_fraction()))
}

/// `P[T > j beta eps^alpha] <= (1-p)^j` for `j = 1..=jmax`, where `T` is the
/// time to the first merge or exit of `k = sample.n` points and
/// `eps = C / k^kappa`. Censored trials count as exceeding.
pub fn geometric_tail(sample: &CoalescenceSample, cert: &Certificate, jmax: u32) -> Result<Vec<EstimateReport>> {
    if sample.m + 1 != sample.n {
        return Err(Error::Parameter("the tail bound concerns the first merge (m = n - 1)".into()));
    }
    let eps = cert.c / (sample.n as f64).powf(cert.kappa);
    let unit = cert.beta * eps.powf(cert.alpha);
    Ok((1..=jmax)
        .map(|j| {
            let thr = j as f64 * unit;
            if thr > sample.max_time {
                log::warn!("tail threshold {thr} beyond the simulated time {}", sample.max_time);
            }
            let hits = sample
                .times
                .iter()
                .zip(&sample.censored)
                .filter(|(&t, &c)| c || t > thr)
                .count();
            EstimateReport::proportion(format!("tail n={} j={j}", sample.n), hits, sample.times.len())
                .with_target(Target::AtMost { bound: (1.0 - cert.p).powi(j as i32) })
        })
        .collect())
}

/// Mean number of distinct positions at each of `times` (grid-rounded),
/// counting only particles that stayed in `region` when one is given,
/// followed by a summary report on strict decrease of the mean.
pub fn distinct_points_curve(
    cfg: &McConfig,
    points: &[GraphPoint],
    region: Option<&Region>,
    times: &[f64],
) -> Result<Vec<EstimateReport>> {
    cfg.validate()?;
    if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("times must be positive and strictly increasing".into()));
    }
    if points.is_empty() {
        return Err(Error::Parameter("no start points".into()));
    }
    let idx: Vec<i64> = times.iter().map(|&t| (t / cfg.dt).round() as i64).collect();
    let steps = *idx.last().expect("nonempty");
    let root = Noise::new(cfg.seed);
    let out: Vec<Result<Vec<usize>>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| with_system(cfg, root.trial(i), steps, points, CountVisit { idx: &idx, region }))
        .collect();
    let counts = out.into_iter().collect::<Result<Vec<_>>>()?;
    let n = points.len() as f64;
    let mut reports: Vec<EstimateReport> = times
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let col: Vec<f64> = counts.iter().map(|c| c[j] as f64).collect();
            let max = col.iter().cloned().fold(0.0, f64::max);
            EstimateReport::mean(format!("distinct points t={t}"), &col)
                .with_target(Target::AtMost { bound: n })
                .with_note(format!("max {max}"))
        })
        .collect();
    // largest upper edge among paired consecutive differences
    let mut worst = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for j in 1..times.len() {
        let diff: Vec<f64> = counts.iter().map(|c| c[j] as f64 - c[j - 1] as f64).collect();
        let (m, lo, hi) = mean_ci(&diff);
        if hi > worst.2 {
            worst = (m, lo, hi);
        }
    }
    if times.len() > 1 {
        let summary = EstimateReport {
            ci_lo: worst.1,
            ci_hi: worst.2,
            ..EstimateReport::exact("distinct points decreasing", worst.0, counts.len())
        };
        reports.push(summary.with_target(Target::Below { bound: 0.0 }));
    }
    Ok(reports)
}

struct CountVisit<'a> {
    idx: &'a [i64],
    region: Option<&'a Region>,
}

impl Visit for CountVisit<'_> {
    type Out = Vec<usize>;

    fn run<M: Motion>(self, mut sys: ParticleSystem<M>) -> Result<Vec<usize>> {
        let n = sys.started();
        let mut stayed = vec![true; n];
        let mut out = Vec::with_capacity(self.idx.len());
        let mut next = 0;
        let mut k = 0i64;
        loop {
            let g = sys.motion().graph();
            if let Some(region) = self.region {
                for c in sys.classes() {
                    if !region.contains(g, &c.point) {
                        for &m in &c.members {
                            stayed[m] = false;
                        }
                    }
                }
            }
            while next < self.idx.len() && self.idx[next] == k {
                let distinct = sys
                    .classes()
                    .iter()
                    .filter(|c| c.members.iter().any(|&m| stayed[m]))
                    .count();
                out.push(distinct);
                next += 1;
            }
            if next == self.idx.len() {
                return Ok(out);
            }
            sys.step()?;
            k += 1;
        }
    }
}

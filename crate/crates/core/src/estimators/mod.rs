//! Monte Carlo estimates with confidence intervals and bound verdicts.
//!
//! Every estimator runs independent trials on counter-based noise
//! (`Noise::trial(i)`), collects per-trial outcomes in trial order and folds
//! them sequentially, so results do not depend on the worker count.

mod coalescence;
mod exit;
mod meeting;
mod scaling;
mod systems;

use std::fs;
use std::path::Path as FsPath;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::metric_graph::MetricGraph;
use crate::sde_flows::{FlowKind, DEFAULT_SNAP_TOL};

pub use coalescence::{
    coalescence_report, coalescence_times, distinct_points_curve, geometric_tail, CoalescenceSample,
};
pub use exit::small_time_exit_curve;
pub use meeting::{certify_constants, meeting_probability, Certificate, MeetingQuery};
pub use scaling::{ks_statistic, ks_threshold, scaling_check_walsh};

/// Below this many samples no verdict is trusted.
pub const MIN_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Target {
    /// Estimate must not exceed the bound.
    AtMost { bound: f64 },
    /// Estimate must be strictly below the bound.
    Below { bound: f64 },
    AtLeast { bound: f64 },
    /// Estimate must lie within `tol` of `value`.
    Within { value: f64, tol: f64 },
}

impl Target {
    /// Conservative verdict: pass only if the whole interval satisfies the
    /// claim, fail only if none of it does.
    pub fn judge(&self, lo: f64, hi: f64) -> Verdict {
        if lo.is_nan() || hi.is_nan() {
            return Verdict::Inconclusive;
        }
        let (pass, fail) = match *self {
            Target::AtMost { bound } => (hi <= bound, lo > bound),
            Target::Below { bound } => (hi < bound, lo >= bound),
            Target::AtLeast { bound } => (lo >= bound, hi < bound),
            Target::Within { value, tol } => (
                lo >= value - tol && hi <= value + tol,
                hi < value - tol || lo > value + tol,
            ),
        };
        if pass {
            Verdict::Pass
        } else if fail {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    /// The number a CSV reader plots against the estimate.
    pub fn reference(&self) -> f64 {
        match *self {
            Target::AtMost { bound } | Target::Below { bound } | Target::AtLeast { bound } => bound,
            Target::Within { value, .. } => value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub estimate: f64,
    pub samples: usize,
    /// 95% interval; Wilson for probabilities, normal for means.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub target: Option<Target>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl EstimateReport {
    fn raw(name: impl Into<String>, estimate: f64, samples: usize, ci: (f64, f64)) -> Self {
        EstimateReport {
            name: name.into(),
            estimate,
            samples,
            ci_lo: ci.0,
            ci_hi: ci.1,
            target: None,
            verdict: Verdict::Pass,
            notes: Vec::new(),
        }
    }

    /// Proportion `hits / n` with its Wilson interval.
    pub fn proportion(name: impl Into<String>, hits: usize, n: usize) -> Self {
        let p = if n == 0 { f64::NAN } else { hits as f64 / n as f64 };
        let mut r = Self::raw(name, p, n, wilson(hits, n));
        if n == 0 {
            r.verdict = Verdict::Inconclusive;
        }
        r
    }

    /// Sample mean with a normal interval.
    pub fn mean(name: impl Into<String>, values: &[f64]) -> Self {
        let (m, lo, hi) = mean_ci(values);
        let mut r = Self::raw(name, m, values.len(), (lo, hi));
        if values.len() < 2 {
            r.verdict = Verdict::Inconclusive;
        }
        r
    }

    /// A statistic without sampling interval (both edges at the value).
    pub fn exact(name: impl Into<String>, value: f64, samples: usize) -> Self {
        Self::raw(name, value, samples, (value, value))
    }

    /// Attaches a claim and decides it.
    pub fn with_target(mut self, target: Target) -> Self {
        self.target = Some(target);
        self.verdict = target.judge(self.ci_lo, self.ci_hi);
        self
    }

    /// Downgrades the verdict to inconclusive when fewer than `min`
    /// samples went in.
    pub fn require_samples(mut self, min: usize) -> Self {
        if self.samples < min && self.verdict != Verdict::Inconclusive {
            self.verdict = Verdict::Inconclusive;
            self.notes.push(format!("fewer than {min} samples"));
        }
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_hi - self.ci_lo) / 2.0
    }
}

/// Two-sided 95% normal quantile.
pub fn z95() -> f64 {
    Normal::standard().inverse_cdf(0.975)
}

/// Wilson score interval at 95%, clipped to `[0, 1]`.
pub fn wilson(hits: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = z95();
    let n = n as f64;
    let p = hits as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// `(mean, lo, hi)` with a normal 95% interval from the sample variance.
pub fn mean_ci(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    // Welford, in input order
    let (mut m, mut s2) = (0.0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        let d = v - m;
        m += d / (i + 1) as f64;
        s2 += d * (v - m);
    }
    if n < 2 {
        return (m, f64::NEG_INFINITY, f64::INFINITY);
    }
    let half = z95() * (s2 / (n - 1) as f64 / n as f64).sqrt();
    (m, m - half, m + half)
}

/// Shared Monte Carlo settings.
#[derive(Clone, Debug)]
pub struct McConfig {
    pub kind: FlowKind,
    pub graph: Arc<MetricGraph>,
    pub dt: f64,
    pub snap_tol: f64,
    pub samples: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(kind: FlowKind, graph: Arc<MetricGraph>, dt: f64, samples: usize, seed: u64) -> Self {
        McConfig { kind, graph, dt, snap_tol: DEFAULT_SNAP_TOL, samples, seed }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Parameter(format!("time step must be positive, got {}", self.dt)));
        }
        if self.samples == 0 {
            return Err(Error::Parameter("need at least one sample".into()));
        }
        self.kind.validate(&self.graph)
    }
}

/// Exit code convention of the command line: 0 all pass, 1 some fail,
/// 3 none fail but some are inconclusive.
pub fn summarize(reports: &[EstimateReport]) -> Verdict {
    if reports.iter().any(|r| r.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if reports.iter().any(|r| r.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    }
}

pub fn write_reports_json(reports: &[EstimateReport], path: &FsPath) -> Result<()> {
    let mut s = serde_json::to_string_pretty(reports)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

#[derive(Serialize)]
struct CsvRow<'a> {
    name: &'a str,
    estimate: f64,
    ci_lo: f64,
    ci_hi: f64,
    target: Option<f64>,
    verdict: Verdict,
}

pub fn write_reports_csv<W: std::io::Write>(reports: &[EstimateReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(CsvRow {
            name: &r.name,
            estimate: r.estimate,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
            target: r.target.map(|t| t.reference()),
            verdict: r.verdict,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_json(path: &FsPath) -> Result<Vec<EstimateReport>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests;

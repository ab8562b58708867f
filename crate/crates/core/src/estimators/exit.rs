//! Small-time exit probabilities `sup_x P[sup_{[0,t]} dist(X, x) > r] / t`.

use rayon::prelude::*;

use super::systems::{steps_for, with_system, Visit};
use super::{EstimateReport, McConfig, Target};
use crate::error::{Error, Result};
use crate::metric_graph::GraphPoint;
use crate::sde_flows::{Motion, Noise, ParticleSystem};

/// One report per ladder time (estimate is the worst start's rate), then a
/// summary with the ratio between the last and first rungs, which must not
/// exceed `fraction`. Every trial runs once to the first rung and is read
/// off at all rungs.
pub fn small_time_exit_curve(
    cfg: &McConfig,
    starts: &[GraphPoint],
    r: f64,
    ladder: &[f64],
    fraction: f64,
) -> Result<Vec<EstimateReport>> {
    cfg.validate()?;
    if !(r > 0.0) {
        return Err(Error::Parameter(format!("exit radius must be positive, got {r}")));
    }
    if ladder.is_empty() || ladder.iter().any(|&t| !(t > 0.0)) || ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter("time ladder must be positive and strictly decreasing".into()));
    }
    if starts.is_empty() {
        return Err(Error::Parameter("no start points".into()));
    }
    let rungs: Vec<i64> = ladder.iter().map(|&t| steps_for(t, cfg.dt)).collect();
    if rungs.contains(&0) {
        return Err(Error::Parameter("ladder time below one grid step".into()));
    }
    let steps = rungs[0];
    let n = cfg.samples;
    // exit step per (start, trial); trials are numbered across starts
    let mut exits: Vec<Vec<Option<i64>>> = Vec::with_capacity(starts.len());
    let root = Noise::new(cfg.seed);
    for (a, x) in starts.iter().enumerate() {
        let col: Vec<Result<Option<i64>>> = (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let noise = root.trial((a * n) as u64 + i);
                with_system(cfg, noise, steps, &[*x], ExitVisit { steps, x: *x, r })
            })
            .collect();
        exits.push(col.into_iter().collect::<Result<_>>()?);
    }
    let mut reports = Vec::with_capacity(ladder.len() + 1);
    for (&t, &k) in ladder.iter().zip(&rungs) {
        // the start with the largest exit count carries the sup
        let (arg, hits) = exits
            .iter()
            .enumerate()
            .map(|(a, col)| (a, col.iter().filter(|e| e.is_some_and(|s| s <= k)).count()))
            .fold((0, 0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let p = EstimateReport::proportion("", hits, n);
        let mut rep = EstimateReport {
            name: format!("exit rate t={t}"),
            estimate: p.estimate / t,
            ci_lo: p.ci_lo / t,
            ci_hi: p.ci_hi / t,
            ..p
        }
        .with_note(format!("worst start {}", starts[arg]));
        if hits == 0 {
            rep = rep.with_note("no exits observed; one-sided bound");
        }
        reports.push(rep);
    }
    let (first, last) = (&reports[0], &reports[reports.len() - 1]);
    let ratio = if first.estimate > 0.0 { last.estimate / first.estimate } else { f64::NAN };
    let lo = if first.ci_hi > 0.0 { last.ci_lo / first.ci_hi } else { f64::NAN };
    let hi = if first.ci_lo > 0.0 { last.ci_hi / first.ci_lo } else { f64::INFINITY };
    let summary = EstimateReport {
        ci_lo: lo,
        ci_hi: hi,
        ..EstimateReport::exact(format!("exit rate ratio t={} vs t={}", ladder[ladder.len() - 1], ladder[0]), ratio, n)
    };
    reports.push(summary.with_target(Target::AtMost { bound: fraction }));
    Ok(reports)
}

struct ExitVisit {
    steps: i64,
    x: GraphPoint,
    r: f64,
}

impl Visit for ExitVisit {
    type Out = Option<i64>;

    fn run<M: Motion>(self, mut sys: ParticleSystem<M>) -> Result<Option<i64>> {
        for k in 1..=self.steps {
            sys.step()?;
            let p = sys.classes()[0].point;
            if sys.motion().graph().dist(&p, &self.x) > self.r {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }
}

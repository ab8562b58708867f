use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Result};
use coalesce_flow::flow_extension::{
    sample_flow_triples, stopping_time_consistency, verify_strong_flow, ClosedShell, FlowEval, RepairedFlow,
    StoppingOutcome, StoppingRule, StrongFlowReport, Violation,
};
use coalesce_flow::sde_flows::DEFAULT_SNAP_TOL;
use coalesce_flow::skeleton::{
    check_axioms, detect_bifurcations, AxiomReport, BifurcationConfig, BifurcationSample, Region, SkeletonWindow,
};
use rayon::prelude::*;
use serde::Serialize;

use super::{default_k_cap, flow_map, load_skeleton};
use crate::args::{parse_list, parse_range};
use crate::output::{json_bytes, metadata, write_file_atomic};
use crate::Outcome;

/// Violations listed in full; the rest are only counted.
const SHOWN: usize = 20;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    pub skeleton: PathBuf,
    /// `none`, `zero-level` or `custom:<file>`; anything but `none`
    /// verifies the repaired flow.
    #[arg(long, default_value = "none")]
    pub shell: String,
    #[arg(long, default_value_t = DEFAULT_SNAP_TOL)]
    pub shell_tol: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    /// Comma-separated Sk3 radii.
    #[arg(long, default_value = "0.5,0.25,0.125")]
    pub eps: String,
    /// Composition samples `(s, t, u, x)`.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Restart-at-first-zero samples.
    #[arg(long, default_value_t = 100)]
    pub stop_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sampled points scanned for bifurcations (informational only).
    #[arg(long, default_value_t = 0)]
    pub bifurcation_samples: usize,
    /// Clustering radius of the bifurcation scan.
    #[arg(long, default_value_t = 0.05)]
    pub cluster_tol: f64,
    /// Repair restart cap; defaults to the grid length.
    #[arg(long)]
    pub k_cap: Option<usize>,
    /// Finest selection radius; defaults to the value recorded at simulation.
    #[arg(long)]
    pub eps_floor: Option<f64>,
    /// Override the certified time window `a:b`.
    #[arg(long)]
    pub window: Option<String>,
    /// Override the window region with the ball of this radius.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Config<'a> {
    skeleton: &'a PathBuf,
    shell: &'a str,
    shell_tol: f64,
    eta: f64,
    eps: Vec<f64>,
    samples: usize,
    stop_samples: usize,
    seed: u64,
    bifurcation_samples: usize,
    cluster_tol: f64,
    k_cap: Option<usize>,
    eps_floor: f64,
    window: SkeletonWindow,
}

#[derive(Serialize)]
struct StrongFlowSummary {
    flow: &'static str,
    evaluated: usize,
    max_residual: f64,
    violation_count: usize,
    violations: Vec<Violation>,
    errors: Vec<String>,
}

impl StrongFlowSummary {
    fn new(flow: &'static str, r: StrongFlowReport) -> Self {
        StrongFlowSummary {
            flow,
            evaluated: r.evaluated,
            max_residual: r.max_residual,
            violation_count: r.violations.len(),
            violations: r.violations.into_iter().take(SHOWN).collect(),
            errors: r.errors,
        }
    }

    fn passed(&self) -> bool {
        self.violation_count == 0 && self.errors.is_empty()
    }
}

#[derive(Serialize)]
struct StoppingSummary {
    samples: usize,
    stopped: usize,
    max_residual: f64,
    errors: Vec<String>,
}

#[derive(Serialize)]
struct RepairSummary {
    samples: usize,
    max_restarts: usize,
    at_most_two: usize,
    errors: Vec<String>,
}

#[derive(Serialize)]
struct BifurcationSummary {
    samples: usize,
    flagged: usize,
    points: Vec<BifurcationSample>,
}

#[derive(Serialize)]
struct Verdicts {
    axioms: bool,
    strong_flow: bool,
    stopping: bool,
}

#[derive(Serialize)]
struct Report<'a> {
    axioms: AxiomReport,
    strong_flow: StrongFlowSummary,
    stopping: StoppingSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    repair: Option<RepairSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bifurcations: Option<BifurcationSummary>,
    verdicts: Verdicts,
    pass: bool,
    #[serde(flatten)]
    meta: crate::output::Metadata<'a, Config<'a>>,
}

pub fn run(a: Args) -> Result<Outcome> {
    let (sk, floor) = load_skeleton(&a.skeleton, a.eps_floor)?;
    let g = sk.graph();
    let eps = parse_list(&a.eps)?;
    let shell = ClosedShell::from_spec(&a.shell, g, a.shell_tol)?;
    let mut window = match sk.window() {
        Some(w) => w.clone(),
        None if a.window.is_some() && a.radius.is_some() => SkeletonWindow {
            t_min: 0.0,
            t_max: 0.0,
            region: Region::default(),
        },
        None => bail!("skeleton has no recorded window; pass --window and --radius"),
    };
    if let Some(w) = &a.window {
        (window.t_min, window.t_max) = parse_range(w)?;
    }
    if let Some(r) = a.radius {
        window.region = Region::star_ball(g, r);
    }
    if a.samples == 0 {
        bail!("--samples must be positive");
    }
    let axioms = check_axioms(&sk, &window, a.eta, &eps)?;
    let theta = flow_map(Arc::clone(&sk), floor);
    let triples = sample_flow_triples(&sk, &window, a.samples, a.seed)?;

    let repaired = match shell {
        ClosedShell::Empty => None,
        _ => {
            let cap = a.k_cap.unwrap_or_else(|| default_k_cap(&sk));
            Some(RepairedFlow::new(Arc::clone(&theta), shell, cap)?)
        }
    };
    let (strong, repair) = match &repaired {
        None => (StrongFlowSummary::new("theta", verify_strong_flow(&*theta, sk.dt(), &triples)), None),
        Some(psi) => {
            let rep = StrongFlowSummary::new("psi", verify_strong_flow(psi as &dyn FlowEval, sk.dt(), &triples));
            let traces: Vec<_> = triples.par_iter().map(|q| psi.trace_of(q.s, q.x)).collect();
            let mut summary = RepairSummary { samples: traces.len(), max_restarts: 0, at_most_two: 0, errors: Vec::new() };
            for t in traces {
                match t {
                    Ok(t) => {
                        summary.max_restarts = summary.max_restarts.max(t.k);
                        summary.at_most_two += (t.k <= 2) as usize;
                    }
                    Err(e) => summary.errors.push(e.to_string()),
                }
            }
            (rep, Some(summary))
        }
    };

    // first arrival at the vertex; continuous line paths cross it between grid times
    let rule = if g.edge_count() == 2 && g.star_center().is_some() {
        StoppingRule::FirstCrossing(0.0)
    } else {
        StoppingRule::FirstHit(ClosedShell::zero_level(g, a.shell_tol))
    };
    let stops: Vec<_> = triples
        .iter()
        .take(a.stop_samples)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|q| stopping_time_consistency(&theta, q.s, q.x, &rule))
        .collect();
    let mut stopping = StoppingSummary { samples: stops.len(), stopped: 0, max_residual: 0.0, errors: Vec::new() };
    for s in stops {
        match s {
            Ok(StoppingOutcome::Residual { residual, .. }) => {
                stopping.stopped += 1;
                stopping.max_residual = stopping.max_residual.max(residual);
            }
            Ok(StoppingOutcome::NotStopped) => {}
            Err(e) => stopping.errors.push(e.to_string()),
        }
    }

    let bifurcations = if a.bifurcation_samples > 0 {
        let pts: Vec<_> = triples.iter().take(a.bifurcation_samples).map(|q| (q.s, q.x)).collect();
        let cfg = BifurcationConfig { eps_ladder: eps.clone(), cluster_tol: a.cluster_tol, nu_offsets: vec![1, 10, 100] };
        let rep = detect_bifurcations(&sk, &pts, &cfg)?;
        let flagged: Vec<_> = rep.flagged().cloned().collect();
        Some(BifurcationSummary {
            samples: pts.len(),
            flagged: flagged.len(),
            points: flagged.into_iter().take(SHOWN).collect(),
        })
    } else {
        None
    };

    let verdicts = Verdicts {
        axioms: axioms.all_pass(),
        strong_flow: strong.passed(),
        stopping: stopping.max_residual == 0.0 && stopping.errors.is_empty(),
    };
    let pass = verdicts.axioms && verdicts.strong_flow && verdicts.stopping;
    let config = Config {
        skeleton: &a.skeleton,
        shell: &a.shell,
        shell_tol: a.shell_tol,
        eta: a.eta,
        eps,
        samples: a.samples,
        stop_samples: a.stop_samples,
        seed: a.seed,
        bifurcation_samples: a.bifurcation_samples,
        cluster_tol: a.cluster_tol,
        k_cap: a.k_cap,
        eps_floor: floor,
        window,
    };
    eprintln!(
        "axioms {} | {} residual max {} over {} samples ({} violations, {} errors) | stopping residual max {}",
        if verdicts.axioms { "pass" } else { "fail" },
        strong.flow,
        strong.max_residual,
        strong.evaluated,
        strong.violation_count,
        strong.errors.len(),
        stopping.max_residual
    );
    let report = Report {
        axioms,
        strong_flow: strong,
        stopping,
        repair,
        bifurcations,
        verdicts,
        pass,
        meta: metadata("verify", &config),
    };
    let bytes = json_bytes(&report)?;
    match &a.out {
        Some(p) => write_file_atomic(p, &bytes)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
        }
    }
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

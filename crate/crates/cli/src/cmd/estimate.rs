use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use coalesce_flow::estimators::{
    certify_constants, coalescence_report, coalescence_times, distinct_points_curve, geometric_tail,
    meeting_probability, scaling_check_walsh, small_time_exit_curve, summarize, write_reports_csv,
    write_reports_json, Certificate, McConfig, MeetingQuery, Target, Verdict, MIN_SAMPLES,
};
use coalesce_flow::sde_flows::{FlowKind, DEFAULT_SNAP_TOL};
use coalesce_flow::skeleton::Region;
use coalesce_flow::{GraphPoint, MetricGraph};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::simulate::METADATA_FILE;
use crate::args::{parse_list, parse_points, parse_region, FlowArgs, FlowSetup};
use crate::output::{json_bytes, metadata, StagedDir};
use crate::Outcome;

pub const REPORTS_JSON: &str = "reports.json";
pub const REPORTS_CSV: &str = "reports.csv";
pub const CERTIFICATE_FILE: &str = "certificate.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum What {
    /// Two-point meeting probabilities over all pairs of `--x` and `--y`.
    Meeting,
    /// Certified constants, mean coalescence times and the geometric tail.
    Coalescence,
    /// Mean number of distinct points over time.
    Distinct,
    /// Small-time exit rates over a time ladder.
    Exit,
    /// Brownian scaling of Walsh motion (two-sample KS).
    Scaling,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long, value_enum)]
    pub what: What,
    #[command(flatten)]
    pub flow: FlowArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_SNAP_TOL)]
    pub snap_tol: f64,
    /// `;`-separated first points (meeting), start points (exit, distinct)
    /// or the single scaling start.
    #[arg(long)]
    pub x: Option<String>,
    /// `;`-separated second points (meeting).
    #[arg(long)]
    pub y: Option<String>,
    /// Meeting horizon as a multiple of the squared distance.
    #[arg(long, default_value_t = 1.0)]
    pub horizon_factor: f64,
    /// Grid steps per meeting horizon (continuous flows); overrides --dt.
    #[arg(long)]
    pub steps: Option<usize>,
    /// `none`, `at-most:B`, `at-least:B`, `within:V:TOL`, or `oracle:TOL`
    /// (closed form for coalescing Brownian motion).
    #[arg(long, default_value = "none")]
    pub target: String,
    /// Compact region: `a:b` on the line or `ball:R`.
    #[arg(long)]
    pub region: Option<String>,
    /// Number of evenly spaced points in the region.
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    /// Comma-separated targets for the number of remaining points.
    #[arg(long, default_value = "4,8")]
    pub m: String,
    /// Meeting horizon factor of the certificate.
    #[arg(long, default_value_t = 1.0)]
    pub cert_factor: f64,
    /// Packing constant; defaults to twice the region length.
    #[arg(long)]
    pub packing: Option<f64>,
    /// Certificate grid spacing.
    #[arg(long, default_value_t = 0.25)]
    pub cert_spacing: f64,
    /// Time limit per coalescence trial.
    #[arg(long, default_value_t = 1.0)]
    pub max_time: f64,
    /// Largest tail multiple.
    #[arg(long, default_value_t = 5)]
    pub tail_j: u32,
    /// Comma-separated observation times (distinct, scaling uses the first).
    #[arg(long, default_value = "0.01,0.1,1")]
    pub times: String,
    /// Exit radius.
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    /// Comma-separated, strictly decreasing exit times.
    #[arg(long, default_value = "0.125,0.0625,0.03125,0.015625,0.0078125")]
    pub ladder: String,
    /// Largest allowed ratio between the last and first exit rates.
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    /// Comma-separated scaling factors.
    #[arg(long, default_value = "0.5,2")]
    pub lambda: String,
    #[arg(long, default_value = "estimate")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Config {
    what: What,
    flow: FlowSetup,
    dt: f64,
    samples: usize,
    seed: u64,
    snap_tol: f64,
    #[serde(flatten)]
    params: serde_json::Value,
}

/// Parsed `--target`.
fn parse_target(spec: &str, kind: &FlowKind, c: f64) -> Result<Option<Target>> {
    let num = |v: &str| v.parse::<f64>().with_context(|| format!("bad number in target {spec}"));
    let parts: Vec<&str> = spec.split(':').collect();
    Ok(match parts.as_slice() {
        ["none"] => None,
        ["at-most", b] => Some(Target::AtMost { bound: num(b)? }),
        ["at-least", b] => Some(Target::AtLeast { bound: num(b)? }),
        ["within", v, tol] => Some(Target::Within { value: num(v)?, tol: num(tol)? }),
        ["oracle", tol] => {
            if *kind != FlowKind::CoalescingBm {
                bail!("the oracle target is only known for coalescing-bm");
            }
            Some(Target::Within { value: meeting_oracle(c), tol: num(tol)? })
        }
        _ => bail!("unknown target {spec}"),
    })
}

/// Probability that two independent Brownian motions at distance `rho` meet
/// before `c rho^2`.
pub fn meeting_oracle(c: f64) -> f64 {
    2.0 * Normal::standard().sf(1.0 / (2.0 * c).sqrt())
}

fn even_points(g: &MetricGraph, region: &Region, n: usize) -> Vec<GraphPoint> {
    if n == 1 {
        return vec![region.point_at(g, 0.5)];
    }
    (0..n).map(|i| region.point_at(g, i as f64 / (n - 1) as f64)).collect()
}

fn need<'a>(v: &'a Option<String>, flag: &str, what: What) -> Result<&'a str> {
    v.as_deref().with_context(|| format!("--what {} needs {flag}", what.to_possible_value().unwrap().get_name()))
}

pub fn run(a: Args) -> Result<Outcome> {
    let (kind, g, setup) = a.flow.resolve()?;
    let g = Arc::new(g);
    let cfg = McConfig { snap_tol: a.snap_tol, ..McConfig::new(kind.clone(), g.clone(), a.dt, a.samples, a.seed) };
    let region = a.region.as_deref().map(|r| parse_region(&g, r)).transpose()?;
    let mut cert: Option<Certificate> = None;
    let (mut reports, params) = match a.what {
        What::Meeting => {
            let xs = parse_points(&g, need(&a.x, "--x", a.what)?)?;
            let ys = parse_points(&g, need(&a.y, "--y", a.what)?)?;
            let target = parse_target(&a.target, &kind, a.horizon_factor)?;
            let mut out = Vec::with_capacity(xs.len() * ys.len());
            for x in &xs {
                for y in &ys {
                    let q = MeetingQuery { exit: region.clone(), steps: a.steps, ..MeetingQuery::new(*x, *y, a.horizon_factor) };
                    let r = meeting_probability(&cfg, &q)?;
                    out.push(match target {
                        Some(t) => r.with_target(t),
                        None => r,
                    });
                }
            }
            let params = serde_json::json!({
                "x": xs.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                "y": ys.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                "horizon_factor": a.horizon_factor,
                "steps": a.steps,
                "target": a.target,
                "exit_region": region,
            });
            (out, params)
        }
        What::Coalescence => {
            let k = region.clone().context("--what coalescence needs --region")?;
            let ms: Vec<usize> = parse_list(&a.m)?
                .into_iter()
                .map(|m| if m >= 1.0 && m.fract() == 0.0 { Ok(m as usize) } else { bail!("bad --m entry {m}") })
                .collect::<Result<_>>()?;
            if a.n < 2 {
                bail!("--n must be at least 2");
            }
            if !(a.cert_spacing > 0.0) {
                bail!("--cert-spacing must be positive");
            }
            let c = a.packing.unwrap_or(2.0 * k.length());
            let grid = k.probes(&g, a.cert_spacing);
            let c_cfg = McConfig { seed: a.seed.wrapping_add(1), ..cfg.clone() };
            let certificate = certify_constants(&c_cfg, &k, &grid, a.cert_factor, c, a.steps)?;
            let points = even_points(&g, &k, a.n);
            let mut out = Vec::new();
            for &m in &ms {
                let s = coalescence_times(&cfg, &points, m, &k, a.max_time)?;
                out.push(coalescence_report(&s, &certificate));
            }
            if a.tail_j > 0 {
                let s = coalescence_times(&cfg, &points, a.n - 1, &k, a.max_time)?;
                out.extend(geometric_tail(&s, &certificate, a.tail_j)?);
            }
            let params = serde_json::json!({
                "region": k,
                "n": a.n,
                "m": ms,
                "cert_factor": a.cert_factor,
                "packing": c,
                "cert_spacing": a.cert_spacing,
                "cert_seed": c_cfg.seed,
                "steps": a.steps,
                "max_time": a.max_time,
                "tail_j": a.tail_j,
            });
            cert = Some(certificate);
            (out, params)
        }
        What::Distinct => {
            let times = parse_list(&a.times)?;
            let points = match (&a.x, &region) {
                (Some(x), _) => parse_points(&g, x)?,
                (None, Some(k)) => even_points(&g, k, a.n),
                (None, None) => bail!("--what distinct needs --x or --region"),
            };
            let out = distinct_points_curve(&cfg, &points, region.as_ref(), &times)?;
            let params = serde_json::json!({
                "points": points.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                "region": region,
                "times": times,
            });
            (out, params)
        }
        What::Exit => {
            let starts = parse_points(&g, need(&a.x, "--x", a.what)?)?;
            let ladder = parse_list(&a.ladder)?;
            let out = small_time_exit_curve(&cfg, &starts, a.r, &ladder, a.fraction)?;
            let params = serde_json::json!({
                "starts": starts.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                "r": a.r,
                "ladder": ladder,
                "fraction": a.fraction,
            });
            (out, params)
        }
        What::Scaling => {
            if kind != FlowKind::Walsh {
                bail!("--what scaling is defined for --flow walsh");
            }
            let xs = parse_points(&g, need(&a.x, "--x", a.what)?)?;
            let t = parse_list(&a.times)?[0];
            let steps = a.steps.unwrap_or(200);
            let lambdas = parse_list(&a.lambda)?;
            let mut out = Vec::new();
            for (i, &lam) in lambdas.iter().enumerate() {
                for (j, &x) in xs.iter().enumerate() {
                    let seed = a.seed.wrapping_add((i * xs.len() + j) as u64);
                    out.push(scaling_check_walsh(g.clone(), lam, x, t, steps, a.samples, seed)?);
                }
            }
            let params = serde_json::json!({
                "x": xs.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                "t": t,
                "steps": steps,
                "lambda": lambdas,
            });
            (out, params)
        }
    };
    if a.what != What::Distinct {
        reports = reports.into_iter().map(|r| r.require_samples(MIN_SAMPLES)).collect();
    }

    let staged = StagedDir::new(&a.out)?;
    write_reports_json(&reports, &staged.path().join(REPORTS_JSON))?;
    write_reports_csv(&reports, std::fs::File::create(staged.path().join(REPORTS_CSV))?)?;
    if let Some(c) = &cert {
        std::fs::write(staged.path().join(CERTIFICATE_FILE), json_bytes(c)?)?;
    }
    let config = Config {
        what: a.what,
        flow: setup,
        dt: a.dt,
        samples: a.samples,
        seed: a.seed,
        snap_tol: a.snap_tol,
        params,
    };
    std::fs::write(staged.path().join(METADATA_FILE), json_bytes(&metadata("estimate", &config))?)?;
    let dest = staged.commit()?;
    for r in &reports {
        eprintln!("{:<12} {} = {} [{}, {}]", format!("{:?}", r.verdict).to_lowercase(), r.name, r.estimate, r.ci_lo, r.ci_hi);
    }
    eprintln!("reports -> {}", dest.display());
    Ok(match summarize(&reports) {
        Verdict::Pass => Outcome::Pass,
        Verdict::Fail => Outcome::Fail,
        Verdict::Inconclusive => Outcome::Inconclusive,
    })
}

//! Argument types shared by several subcommands.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use coalesce_flow::sde_flows::{FlowKind, StartNet};
use coalesce_flow::skeleton::Region;
use coalesce_flow::{GraphPoint, MetricGraph};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowName {
    CoalescingBm,
    Walsh,
    Tanaka,
    Skew,
    TanakaStar,
}

#[derive(clap::Args, Debug, Clone)]
pub struct FlowArgs {
    #[arg(long, value_enum)]
    pub flow: FlowName,
    /// Skew parameter in [-1, 1] (skew only).
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Number of positive edges (tanaka-star only).
    #[arg(long)]
    pub split: Option<usize>,
    /// Graph description (JSON). Line flows default to the real line.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Radius cutoff for trajectories.
    #[arg(long)]
    pub r_max: Option<f64>,
}

/// The resolved flow, as echoed into metadata.
#[derive(Clone, Debug, Serialize)]
pub struct FlowSetup {
    pub kind: FlowKind,
    pub graph_file: Option<PathBuf>,
    pub r_max: f64,
}

impl FlowArgs {
    pub fn kind(&self) -> Result<FlowKind> {
        if self.beta.is_some() && self.flow != FlowName::Skew {
            bail!("--beta only applies to --flow skew");
        }
        if self.split.is_some() && self.flow != FlowName::TanakaStar {
            bail!("--split only applies to --flow tanaka-star");
        }
        Ok(match self.flow {
            FlowName::CoalescingBm => FlowKind::CoalescingBm,
            FlowName::Walsh => FlowKind::Walsh,
            FlowName::Tanaka => FlowKind::Tanaka,
            FlowName::Skew => FlowKind::Skew {
                beta: self.beta.context("--flow skew needs --beta")?,
            },
            FlowName::TanakaStar => FlowKind::TanakaStar { split: self.split.unwrap_or(1) },
        })
    }

    pub fn resolve(&self) -> Result<(FlowKind, MetricGraph, FlowSetup)> {
        let kind = self.kind()?;
        let mut g = match &self.graph {
            Some(p) => MetricGraph::from_json_file(p).with_context(|| format!("reading graph {}", p.display()))?,
            None if kind.on_star() => bail!("--flow {} needs --graph", kind.name()),
            None => MetricGraph::line(),
        };
        if let Some(r) = self.r_max {
            if !(r > 0.0) {
                bail!("--r-max must be positive");
            }
            g = g.with_r_max(r);
        }
        kind.validate(&g)?;
        let setup = FlowSetup { kind: kind.clone(), graph_file: self.graph.clone(), r_max: g.r_max() };
        Ok((kind, g, setup))
    }
}

/// `a:b` with `a <= b`.
pub fn parse_range(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(':').with_context(|| format!("expected a:b, got {s}"))?;
    let a: f64 = a.trim().parse().with_context(|| format!("bad number in {s}"))?;
    let b: f64 = b.trim().parse().with_context(|| format!("bad number in {s}"))?;
    if !(a <= b) {
        bail!("empty range {s}");
    }
    Ok((a, b))
}

/// Comma-separated numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number {v} in {s}")))
        .collect()
}

/// A graph point: `vertex`, `edge:coord`, or on the line a signed number.
pub fn parse_point(g: &MetricGraph, s: &str) -> Result<GraphPoint> {
    if g.edge_count() == 2 && g.star_center().is_some() {
        if let Ok(x) = s.trim().parse::<f64>() {
            return Ok(g.from_signed(x));
        }
    }
    Ok(g.parse_point(s.trim())?)
}

/// Points separated by `;`.
pub fn parse_points(g: &MetricGraph, s: &str) -> Result<Vec<GraphPoint>> {
    s.split(';').map(|p| parse_point(g, p)).collect()
}

/// `ball:R` around the star centre, or `a:b` on the line.
pub fn parse_region(g: &MetricGraph, s: &str) -> Result<Region> {
    if let Some(r) = s.strip_prefix("ball:") {
        let r: f64 = r.parse().with_context(|| format!("bad radius in {s}"))?;
        if !(r >= 0.0) {
            bail!("negative radius in {s}");
        }
        return Ok(Region::star_ball(g, r));
    }
    if g.edge_count() != 2 || g.star_center().is_none() {
        bail!("interval regions need the line graph; use ball:R");
    }
    let (a, b) = parse_range(s)?;
    Ok(Region::line_interval(a, b))
}

/// `net:SPACING[:RADIUS[:TIME_SPACING]]` over the time window.
pub fn parse_starts(s: &str, window: (f64, f64)) -> Result<StartNet> {
    let rest = s.strip_prefix("net:").with_context(|| format!("unknown start spec {s}; expected net:SPACING"))?;
    let v = rest
        .split(':')
        .map(|p| p.parse::<f64>().with_context(|| format!("bad number in {s}")))
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() || v.len() > 3 {
        bail!("expected net:SPACING[:RADIUS[:TIME_SPACING]], got {s}");
    }
    let spacing = v[0];
    Ok(StartNet {
        t_min: window.0,
        t_max: window.1,
        spacing,
        radius: v.get(1).copied().unwrap_or(1.0),
        time_spacing: v.get(2).copied().unwrap_or(spacing),
    })
}

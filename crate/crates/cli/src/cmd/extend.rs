use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Result};
use coalesce_flow::flow_extension::{ClosedShell, RepairedFlow};
use coalesce_flow::path_space::{grid_index, write_csv, Path};
use coalesce_flow::sde_flows::DEFAULT_SNAP_TOL;
use coalesce_flow::skeleton::Region;
use coalesce_flow::GraphPoint;
use rayon::prelude::*;
use serde::Serialize;

use super::simulate::METADATA_FILE;
use super::{default_k_cap, flow_map, load_skeleton};
use crate::args::{parse_list, parse_points};
use crate::output::{json_bytes, metadata, StagedDir};
use crate::Outcome;

pub const PATHS_FILE: &str = "paths.csv";
pub const QUERIES_FILE: &str = "queries.csv";

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    pub skeleton: PathBuf,
    /// `none` evaluates the extension itself; `zero-level` or
    /// `custom:<file>` evaluates the repaired flow.
    #[arg(long, default_value = "none")]
    pub shell: String,
    #[arg(long, default_value_t = DEFAULT_SNAP_TOL)]
    pub shell_tol: f64,
    /// Comma-separated start times; defaults to the window start.
    #[arg(long)]
    pub times: Option<String>,
    /// `;`-separated start points; defaults to a grid over the window region.
    #[arg(long)]
    pub points: Option<String>,
    /// Spacing of the default point grid.
    #[arg(long, default_value_t = 0.1)]
    pub spacing: f64,
    #[arg(long)]
    pub k_cap: Option<usize>,
    #[arg(long)]
    pub eps_floor: Option<f64>,
    #[arg(long, default_value = "extended")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Config<'a> {
    skeleton: &'a PathBuf,
    shell: &'a str,
    shell_tol: f64,
    times: Vec<f64>,
    points: Vec<String>,
    k_cap: Option<usize>,
    eps_floor: f64,
}

#[derive(Serialize)]
struct QueryRow {
    path_id: usize,
    s: f64,
    x: String,
    /// Restarts used by the repair; empty for the plain extension.
    k: Option<usize>,
    capped: Option<bool>,
}

pub fn run(a: Args) -> Result<Outcome> {
    let (sk, floor) = load_skeleton(&a.skeleton, a.eps_floor)?;
    let g = sk.graph();
    let shell = ClosedShell::from_spec(&a.shell, g, a.shell_tol)?;
    let times = match &a.times {
        Some(t) => parse_list(t)?,
        None => vec![sk.window().map_or(sk.time(sk.first_index()), |w| w.t_min)],
    };
    let points: Vec<GraphPoint> = match &a.points {
        Some(p) => parse_points(g, p)?,
        None => {
            if !(a.spacing > 0.0) {
                bail!("--spacing must be positive");
            }
            let region = sk.window().map_or_else(|| Region::star_ball(g, 1.0), |w| w.region.clone());
            region.probes(g, a.spacing)
        }
    };
    let mut queries = Vec::with_capacity(times.len() * points.len());
    for &t in &times {
        let s = grid_index(t, sk.dt());
        if s < sk.first_index() || s > sk.horizon() {
            bail!("start time {t} outside the skeleton range");
        }
        queries.extend(points.iter().map(|&x| (s, x)));
    }
    let staged = StagedDir::new(&a.out)?;
    let theta = flow_map(Arc::clone(&sk), floor);
    let repaired = match shell {
        ClosedShell::Empty => None,
        shell => Some(RepairedFlow::new(
            Arc::clone(&theta),
            shell,
            a.k_cap.unwrap_or_else(|| default_k_cap(&sk)),
        )?),
    };
    let results: Vec<(Path, Option<(usize, bool)>)> = queries
        .par_iter()
        .map(|&(s, x)| match &repaired {
            None => Ok((theta.theta(s, x)?, None)),
            Some(psi) => {
                let (p, tr) = psi.repair(s, x)?;
                Ok((p, Some((tr.k, tr.capped))))
            }
        })
        .collect::<coalesce_flow::Result<_>>()?;

    let paths: Vec<&Path> = results.iter().map(|r| &r.0).collect();
    write_csv(g, &paths, std::fs::File::create(staged.path().join(PATHS_FILE))?)?;
    let mut w = csv::Writer::from_path(staged.path().join(QUERIES_FILE))?;
    for (id, (&(s, x), (_, tr))) in queries.iter().zip(&results).enumerate() {
        w.serialize(QueryRow {
            path_id: id,
            s: sk.time(s),
            x: x.to_string(),
            k: tr.map(|t| t.0),
            capped: tr.map(|t| t.1),
        })?;
    }
    w.flush()?;
    let config = Config {
        skeleton: &a.skeleton,
        shell: &a.shell,
        shell_tol: a.shell_tol,
        times,
        points: points.iter().map(|p| p.to_string()).collect(),
        k_cap: a.k_cap,
        eps_floor: floor,
    };
    std::fs::write(staged.path().join(METADATA_FILE), json_bytes(&metadata("extend", &config))?)?;
    let dest = staged.commit()?;
    eprintln!("{} trajectories -> {}", queries.len(), dest.display());
    Ok(Outcome::Pass)
}

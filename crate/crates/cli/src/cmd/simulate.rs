use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Result};
use coalesce_flow::path_space::grid_index;
use coalesce_flow::sde_flows::{simulate, SimConfig, StartNet, DEFAULT_SNAP_TOL};
use coalesce_flow::skeleton::write_skeleton;
use serde::Serialize;

use crate::args::{parse_range, parse_starts, FlowArgs, FlowSetup};
use crate::output::{json_bytes, metadata, StagedDir};
use crate::Outcome;

pub const METADATA_FILE: &str = "metadata.json";
pub const DRIVING_FILE: &str = "driving.csv";

#[derive(clap::Args, Debug)]
pub struct Args {
    #[command(flatten)]
    pub flow: FlowArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Start-time window `a:b`.
    #[arg(long, default_value = "0:0.5")]
    pub window: String,
    /// Last simulated time; defaults to the window end plus 0.5.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// `net:SPACING[:RADIUS[:TIME_SPACING]]`.
    #[arg(long, default_value = "net:0.05")]
    pub starts: String,
    /// Merge distance for continuous flows.
    #[arg(long, default_value_t = DEFAULT_SNAP_TOL)]
    pub snap_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "skeleton")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Config {
    flow: FlowSetup,
    dt: f64,
    window: (f64, f64),
    horizon: f64,
    starts: StartNet,
    snap_tol: f64,
    seed: u64,
    entries: usize,
    merges: usize,
    lattice_step: Option<f64>,
    /// Finest selection radius for later extension.
    eps_floor: f64,
}

pub fn run(a: Args) -> Result<Outcome> {
    let (kind, g, setup) = a.flow.resolve()?;
    if !(a.dt > 0.0) {
        bail!("--dt must be positive");
    }
    let window = parse_range(&a.window)?;
    let net = parse_starts(&a.starts, window)?;
    let horizon = a.horizon.unwrap_or(window.1 + 0.5);
    if horizon < window.1 {
        bail!("--horizon {horizon} ends before the start window");
    }
    let starts = net.starts(&g, a.dt, kind.is_lattice())?;
    let staged = StagedDir::new(&a.out)?;
    let cfg = SimConfig {
        kind: kind.clone(),
        dt: a.dt,
        horizon: grid_index(horizon, a.dt),
        snap_tol: a.snap_tol,
        seed: a.seed,
    };
    let g = Arc::new(g);
    let sim = simulate(&cfg, g.clone(), &starts)?;
    let sk = sim.skeleton.with_window(net.window(&g));
    write_skeleton(&sk, staged.path())?;
    if let Some(w) = &sim.driving {
        let mut out = csv::Writer::from_path(staged.path().join(DRIVING_FILE))?;
        out.write_record(["t", "w"])?;
        for (i, v) in w.iter().enumerate() {
            out.write_record([sk.time(sk.first_index() + i as i64).to_string(), v.to_string()])?;
        }
        out.flush()?;
    }
    let config = Config {
        flow: setup,
        dt: a.dt,
        window,
        horizon,
        starts: net,
        snap_tol: a.snap_tol,
        seed: a.seed,
        entries: sk.len(),
        merges: sk.merges().len(),
        lattice_step: sim.lattice_step,
        eps_floor: sim.lattice_step.unwrap_or(a.snap_tol.max(DEFAULT_SNAP_TOL)),
    };
    std::fs::write(staged.path().join(METADATA_FILE), json_bytes(&metadata("simulate", &config))?)?;
    let dest = staged.commit()?;
    eprintln!(
        "{}: {} entries, {} merges -> {}",
        kind.name(),
        config.entries,
        config.merges,
        dest.display()
    );
    Ok(Outcome::Pass)
}

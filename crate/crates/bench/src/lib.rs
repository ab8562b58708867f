//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use coalesce_flow::flow_extension::{sample_flow_triples, EpsilonSchedule, FlowMap, FlowSample, SelectorConfig};
use coalesce_flow::sde_flows::{simulate, FlowKind, SimConfig, Simulation, StartNet, DEFAULT_SNAP_TOL};
use coalesce_flow::skeleton::SkeletonWindow;
use coalesce_flow::MetricGraph;

pub const DT: f64 = 1e-3;
pub const HORIZON: i64 = 1000;
pub const NET: StartNet = StartNet { t_min: 0.0, t_max: 0.5, time_spacing: 0.02, spacing: 0.08, radius: 0.6 };

pub fn graph_for(kind: &FlowKind) -> Arc<MetricGraph> {
    match kind {
        FlowKind::Walsh => Arc::new(MetricGraph::star(&[1.0 / 3.0; 3]).unwrap()),
        _ => Arc::new(MetricGraph::line()),
    }
}

pub fn run_simulation(kind: &FlowKind, seed: u64) -> (Simulation, SkeletonWindow) {
    let g = graph_for(kind);
    let starts = NET.starts(&g, DT, kind.is_lattice()).unwrap();
    let cfg = SimConfig { kind: kind.clone(), dt: DT, horizon: HORIZON, snap_tol: DEFAULT_SNAP_TOL, seed };
    (simulate(&cfg, g.clone(), &starts).unwrap(), NET.window(&g))
}

/// A fresh flow map (empty selection cache) over a simulated skeleton.
pub fn fresh_flow(sim: &Simulation) -> Arc<FlowMap> {
    let floor = sim.lattice_step.unwrap_or(DEFAULT_SNAP_TOL);
    Arc::new(FlowMap::new(Arc::new(sim.skeleton.clone()), EpsilonSchedule::new(floor), SelectorConfig::default()))
}

pub fn queries(sim: &Simulation, window: &SkeletonWindow, n: usize) -> Vec<FlowSample> {
    sample_flow_triples(&sim.skeleton, window, n, 11).unwrap()
}

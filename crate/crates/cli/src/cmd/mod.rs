pub mod estimate;
pub mod export;
pub mod extend;
pub mod simulate;
pub mod verify;

use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use coalesce_flow::flow_extension::{EpsilonSchedule, FlowMap, SelectorConfig};
use coalesce_flow::sde_flows::DEFAULT_SNAP_TOL;
use coalesce_flow::skeleton::{read_skeleton, Skeleton};

use simulate::METADATA_FILE;

/// Loads a skeleton directory and the selection floor recorded at
/// simulation time (`override_floor` wins).
pub fn load_skeleton(dir: &Path, override_floor: Option<f64>) -> Result<(Arc<Skeleton>, f64)> {
    let sk = read_skeleton(dir).with_context(|| format!("reading skeleton {}", dir.display()))?;
    let recorded = std::fs::read_to_string(dir.join(METADATA_FILE))
        .ok()
        .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
        .and_then(|v| v["config"]["eps_floor"].as_f64());
    let floor = override_floor.or(recorded).unwrap_or(DEFAULT_SNAP_TOL);
    if !(floor > 0.0) {
        anyhow::bail!("selection floor must be positive");
    }
    Ok((Arc::new(sk), floor))
}

pub fn flow_map(sk: Arc<Skeleton>, floor: f64) -> Arc<FlowMap> {
    Arc::new(FlowMap::new(sk, EpsilonSchedule::new(floor), SelectorConfig::default()))
}

/// Restart cap that never binds: restarts strictly increase on the grid.
pub fn default_k_cap(sk: &Skeleton) -> usize {
    (sk.horizon() - sk.first_index() + 2).max(3) as usize
}

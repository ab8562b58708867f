//! Restarting the extended flow each time it enters a closed shell.

use std::path::Path as FsPath;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::{FlowEval, FlowMap};
use crate::error::{Error, Result};
use crate::metric_graph::{GraphPoint, MetricGraph};
use crate::path_space::Path;

pub const DEFAULT_K_CAP: usize = 64;

/// Space-time set at which trajectories are restarted: points within `tol`
/// of one of `points`, optionally only for times in `[t_min, t_max]`.
#[derive(Clone, Debug, PartialEq)]
pub enum ClosedShell {
    Empty,
    Levels {
        points: Vec<GraphPoint>,
        tol: f64,
        t_min: Option<f64>,
        t_max: Option<f64>,
    },
}

#[derive(Debug, Deserialize)]
struct ShellFile {
    points: Vec<String>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    t_min: Option<f64>,
    #[serde(default)]
    t_max: Option<f64>,
}

impl ClosedShell {
    /// All vertices of the graph, thickened by `tol`. On the line and on
    /// star graphs this is the level set at 0.
    pub fn zero_level(g: &MetricGraph, tol: f64) -> Self {
        ClosedShell::Levels {
            points: (0..g.vertex_count()).map(GraphPoint::Vertex).collect(),
            tol,
            t_min: None,
            t_max: None,
        }
    }

    /// Parses `none`, `zero-level` or `custom:<file>`. The custom file is
    /// JSON `{"points": ["0", "1:0.5"], "tol": 1e-9, "t_min": 0, "t_max": 1}`.
    pub fn from_spec(spec: &str, g: &MetricGraph, default_tol: f64) -> Result<Self> {
        match spec {
            "none" => Ok(ClosedShell::Empty),
            "zero-level" => Ok(ClosedShell::zero_level(g, default_tol)),
            _ => {
                let file = spec.strip_prefix("custom:").ok_or_else(|| {
                    Error::Parameter(format!("unknown shell spec {spec}"))
                })?;
                let text = std::fs::read_to_string(FsPath::new(file))?;
                let sf: ShellFile = serde_json::from_str(&text)?;
                let points = sf
                    .points
                    .iter()
                    .map(|p| g.parse_point(p))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ClosedShell::Levels {
                    points,
                    tol: sf.tol.unwrap_or(default_tol),
                    t_min: sf.t_min,
                    t_max: sf.t_max,
                })
            }
        }
    }

    pub fn contains(&self, g: &MetricGraph, t: f64, y: &GraphPoint) -> bool {
        match self {
            ClosedShell::Empty => false,
            ClosedShell::Levels { points, tol, t_min, t_max } => {
                t_min.is_none_or(|a| t >= a)
                    && t_max.is_none_or(|b| t <= b)
                    && points.iter().any(|p| g.dist(p, y) <= *tol)
            }
        }
    }
}

/// Restart record of one query. `None` in `sigma` stands for "never".
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepairTrace {
    pub s: f64,
    pub x: String,
    pub sigma: Vec<Option<f64>>,
    pub z: Vec<String>,
    pub k: usize,
    pub capped: bool,
}

/// Internal form of a resolved query.
#[derive(Clone, Debug)]
struct Restarts {
    /// Restart times; the last one may be `None`.
    sigma: Vec<Option<i64>>,
    z: Vec<GraphPoint>,
    /// Entry followed after each restart.
    entries: Vec<usize>,
    k: usize,
}

/// The extended flow restarted at shell hits.
pub struct RepairedFlow {
    flow: Arc<FlowMap>,
    shell: ClosedShell,
    k_cap: usize,
    hits: Vec<OnceLock<Vec<i64>>>,
}

impl RepairedFlow {
    pub fn new(flow: Arc<FlowMap>, shell: ClosedShell, k_cap: usize) -> Result<Self> {
        if k_cap < 3 {
            return Err(Error::Parameter(format!("k_cap must be at least 3, got {k_cap}")));
        }
        let n = flow.skeleton().len();
        Ok(RepairedFlow {
            flow,
            shell,
            k_cap,
            hits: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn flow(&self) -> &FlowMap {
        &self.flow
    }

    pub fn shell(&self) -> &ClosedShell {
        &self.shell
    }

    /// Grid times at which entry `n` lies in the shell.
    fn hits(&self, n: usize) -> &[i64] {
        self.hits[n].get_or_init(|| {
            let sk = self.flow.skeleton();
            let e = sk.entry(n);
            (e.start..=sk.horizon())
                .filter(|&k| self.shell.contains(sk.graph(), sk.time(k), &e.path.at(k)))
                .collect()
        })
    }

    fn first_hit_after(&self, n: usize, t: i64) -> Option<i64> {
        let h = self.hits(n);
        let i = h.partition_point(|&k| k <= t);
        h.get(i).copied()
    }

    fn restarts(&self, s: i64, x: GraphPoint) -> std::result::Result<Restarts, (Error, Restarts)> {
        let sk = self.flow.skeleton();
        let first = self.flow.select(s, x).map_err(|e| (e, self.empty(s, x)))?;
        let mut r = Restarts {
            sigma: vec![Some(s)],
            z: vec![x],
            entries: vec![first.entry],
            k: 0,
        };
        loop {
            let k = r.sigma.len() - 1;
            let sk_k = r.sigma[k].unwrap();
            let n = r.entries[k];
            match self.first_hit_after(n, sk_k) {
                None => {
                    r.sigma.push(None);
                    r.z.push(x);
                    r.k = k + 1;
                    return Ok(r);
                }
                // An immediate re-hit is the same restart.
                Some(h) if h <= sk_k + 1 => {
                    r.sigma.push(Some(sk_k));
                    r.z.push(r.z[k]);
                    r.k = k;
                    return Ok(r);
                }
                Some(h) => {
                    if k + 1 >= self.k_cap {
                        r.k = self.k_cap;
                        return Err((
                            Error::CapReached { cap: self.k_cap, trace: Box::new(self.trace(s, x, &r, true)) },
                            r,
                        ));
                    }
                    let z = sk.position(n, h);
                    let sel = self.flow.select(h, z).map_err(|e| (e, r.clone()))?;
                    r.sigma.push(Some(h));
                    r.z.push(z);
                    r.entries.push(sel.entry);
                }
            }
        }
    }

    fn empty(&self, s: i64, x: GraphPoint) -> Restarts {
        Restarts { sigma: vec![Some(s)], z: vec![x], entries: Vec::new(), k: 0 }
    }

    fn trace(&self, s: i64, x: GraphPoint, r: &Restarts, capped: bool) -> RepairTrace {
        let sk = self.flow.skeleton();
        RepairTrace {
            s: sk.time(s),
            x: x.to_string(),
            sigma: r.sigma.iter().map(|t| t.map(|k| sk.time(k))).collect(),
            z: r.z.iter().map(|p| p.to_string()).collect(),
            k: r.k,
            capped,
        }
    }

    /// Runs the restart iteration from `(s, x)` and returns the repaired
    /// trajectory up to the horizon together with its restart record.
    pub fn repair(&self, s: i64, x: GraphPoint) -> Result<(Path, RepairTrace)> {
        let r = self.restarts(s, x).map_err(|(e, _)| e)?;
        let sk = self.flow.skeleton();
        let mut samples = Vec::with_capacity((sk.horizon() - s + 1).max(1) as usize);
        for t in s..=sk.horizon().max(s) {
            samples.push(self.eval_resolved(&r, t));
        }
        let trace = self.trace(s, x, &r, false);
        Ok((Path::new(s, sk.dt(), samples), trace))
    }

    /// Trace only, with the cap reported in the record instead of an error.
    pub fn trace_of(&self, s: i64, x: GraphPoint) -> Result<RepairTrace> {
        match self.restarts(s, x) {
            Ok(r) => Ok(self.trace(s, x, &r, false)),
            Err((Error::CapReached { trace, .. }, _)) => Ok(*trace),
            Err((e, _)) => Err(e),
        }
    }

    fn eval_resolved(&self, r: &Restarts, t: i64) -> GraphPoint {
        // segment j covers [sigma_j, sigma_{j+1})
        let mut j = 0;
        while j + 1 < r.entries.len() && r.sigma[j + 1].is_some_and(|a| a <= t) {
            j += 1;
        }
        let start = r.sigma[j].unwrap();
        if t == start {
            r.z[j]
        } else {
            self.flow.skeleton().position(r.entries[j], t)
        }
    }

    /// `psi_{s,t}(x)`.
    pub fn psi_at(&self, s: i64, x: GraphPoint, t: i64) -> Result<GraphPoint> {
        if t < s {
            return Err(Error::Parameter(format!("t index {t} precedes s index {s}")));
        }
        let r = self.restarts(s, x).map_err(|(e, _)| e)?;
        Ok(self.eval_resolved(&r, t))
    }
}

impl FlowEval for RepairedFlow {
    fn graph(&self) -> &MetricGraph {
        self.flow.skeleton().graph()
    }

    fn eval(&self, s: i64, x: GraphPoint, t: i64) -> Result<GraphPoint> {
        self.psi_at(s, x, t)
    }
}

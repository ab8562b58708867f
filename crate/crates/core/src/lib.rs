//! Coalescing stochastic flows on metric graphs.
//!
//! Skeletons of coalescing trajectories are simulated on a time grid,
//! extended to flow maps defined at every space-time point, repaired at
//! bifurcation points and checked against the flow composition law.

// `!(x > 0.0)` is how parameter checks reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod flow_extension;
pub mod metric_graph;
pub mod path_space;
pub mod sde_flows;
pub mod skeleton;

pub use error::{Error, Result};
pub use metric_graph::{Edge, EdgeId, GraphPoint, MetricGraph, SimpleNeighborhood, VertexId};
pub use path_space::{Path, PathFamily};

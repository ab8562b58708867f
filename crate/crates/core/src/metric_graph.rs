//! Metric graphs: vertices glued by intervals, the shortest-path metric,
//! simple neighbourhoods and vertex transmission weights.
//!
//! Edge `j` is parametrised by a coordinate `r` in `[0, L_j]` with `r = 0`
//! at its `from` vertex. Edges of infinite length have no `to` vertex and
//! are cut off at `r_max` by the simulators.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path as FsPath;

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = usize;
pub type EdgeId = usize;

/// Default cutoff coordinate on infinite edges.
pub const DEFAULT_R_MAX: f64 = 1e3;

const TRANSMISSION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub name: String,
    pub from: VertexId,
    /// `None` for an infinite edge.
    pub to: Option<VertexId>,
    /// Length; `f64::INFINITY` when `to` is `None`.
    pub length: f64,
}

impl Edge {
    pub fn is_infinite(&self) -> bool {
        self.to.is_none()
    }
}

/// A point of the graph in canonical form: edge endpoints are always
/// stored as [`GraphPoint::Vertex`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GraphPoint {
    Vertex(VertexId),
    Edge { edge: EdgeId, r: f64 },
}

impl GraphPoint {
    /// Hashable key; equal keys iff equal canonical points.
    pub fn key(&self) -> (u64, u64) {
        match *self {
            GraphPoint::Vertex(v) => (v as u64, u64::MAX),
            GraphPoint::Edge { edge, r } => (edge as u64, (r + 0.0).to_bits()),
        }
    }

    pub fn is_vertex(&self) -> bool {
        matches!(self, GraphPoint::Vertex(_))
    }
}

impl fmt::Display for GraphPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphPoint::Vertex(v) => write!(f, "v{v}"),
            GraphPoint::Edge { edge, r } => write!(f, "e{edge}({r})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MetricGraph {
    vertex_names: Vec<String>,
    edges: Vec<Edge>,
    incident: Vec<Vec<EdgeId>>,
    transmission: Vec<Vec<(EdgeId, f64)>>,
    vertex_dist: Vec<Vec<f64>>,
    r_max: f64,
}

impl MetricGraph {
    /// Builds and validates a graph. `transmission[v]` lists `(edge, weight)`
    /// pairs for vertex `v`; an empty list means uniform weights.
    pub fn new(
        vertex_names: Vec<String>,
        edges: Vec<Edge>,
        transmission: Vec<Vec<(EdgeId, f64)>>,
    ) -> Result<Self> {
        let nv = vertex_names.len();
        if nv == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        if transmission.len() != nv {
            return Err(Error::InvalidGraph(
                "transmission table does not match vertex count".into(),
            ));
        }
        let mut incident = vec![Vec::new(); nv];
        for (j, e) in edges.iter().enumerate() {
            if e.from >= nv || e.to.is_some_and(|t| t >= nv) {
                return Err(Error::InvalidGraph(format!("edge {} has an unknown endpoint", e.name)));
            }
            if !(e.length > 0.0) {
                return Err(Error::InvalidGraph(format!("edge {} has non-positive length", e.name)));
            }
            match e.to {
                Some(t) => {
                    if !e.length.is_finite() {
                        return Err(Error::InvalidGraph(format!(
                            "edge {} has a second endpoint but infinite length",
                            e.name
                        )));
                    }
                    if t == e.from {
                        return Err(Error::InvalidGraph(format!("edge {} is a loop", e.name)));
                    }
                    incident[e.from].push(j);
                    incident[t].push(j);
                }
                None => {
                    if e.length.is_finite() {
                        return Err(Error::InvalidGraph(format!(
                            "edge {} has finite length but no second endpoint",
                            e.name
                        )));
                    }
                    incident[e.from].push(j);
                }
            }
        }
        let mut weights = Vec::with_capacity(nv);
        for (v, given) in transmission.into_iter().enumerate() {
            if incident[v].is_empty() {
                return Err(Error::InvalidGraph(format!(
                    "vertex {} has no incident edge",
                    vertex_names[v]
                )));
            }
            let w = if given.is_empty() {
                let p = 1.0 / incident[v].len() as f64;
                incident[v].iter().map(|&j| (j, p)).collect::<Vec<_>>()
            } else {
                for &(j, p) in &given {
                    if !incident[v].contains(&j) {
                        return Err(Error::InvalidGraph(format!(
                            "transmission of vertex {} names non-incident edge {}",
                            vertex_names[v], edges[j].name
                        )));
                    }
                    if !(p >= 0.0) {
                        return Err(Error::InvalidGraph(format!(
                            "negative transmission weight at vertex {}",
                            vertex_names[v]
                        )));
                    }
                }
                let total: f64 = given.iter().map(|&(_, p)| p).sum();
                if (total - 1.0).abs() > TRANSMISSION_TOL {
                    return Err(Error::InvalidGraph(format!(
                        "transmission weights at vertex {} sum to {total}",
                        vertex_names[v]
                    )));
                }
                given
            };
            weights.push(w);
        }

        let mut g = UnGraph::<(), f64>::with_capacity(nv, edges.len());
        let nodes: Vec<NodeIndex> = (0..nv).map(|_| g.add_node(())).collect();
        for e in &edges {
            if let Some(t) = e.to {
                g.add_edge(nodes[e.from], nodes[t], e.length);
            }
        }
        let vertex_dist = nodes
            .iter()
            .map(|&src| {
                let reached = dijkstra(&g, src, None, |e| *e.weight());
                let mut row = vec![f64::INFINITY; nv];
                for (node, d) in reached {
                    row[node.index()] = d;
                }
                row
            })
            .collect();

        Ok(MetricGraph {
            vertex_names,
            edges,
            incident,
            transmission: weights,
            vertex_dist,
            r_max: DEFAULT_R_MAX,
        })
    }

    /// Star graph with one centre vertex and `weights.len()` infinite edges.
    pub fn star(weights: &[f64]) -> Result<Self> {
        let edges = (0..weights.len())
            .map(|j| Edge {
                name: (j + 1).to_string(),
                from: 0,
                to: None,
                length: f64::INFINITY,
            })
            .collect();
        let trans = vec![weights.iter().copied().enumerate().collect()];
        MetricGraph::new(vec!["0".into()], edges, trans)
    }

    /// The real line as a two-edge star: edge 0 carries `x > 0`, edge 1 carries `x < 0`.
    pub fn line() -> Self {
        MetricGraph::star(&[0.5, 0.5]).expect("line graph is valid")
    }

    pub fn with_r_max(mut self, r_max: f64) -> Self {
        self.r_max = r_max;
        self
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, j: EdgeId) -> &Edge {
        &self.edges[j]
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertex_names[v]
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<VertexId> {
        self.vertex_names.iter().position(|n| n == name)
    }

    pub fn edge_by_name(&self, name: &str) -> Option<EdgeId> {
        self.edges.iter().position(|e| e.name == name)
    }

    /// Edges incident to `v`.
    pub fn incident(&self, v: VertexId) -> &[EdgeId] {
        &self.incident[v]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.incident[v].len()
    }

    pub fn transmission(&self, v: VertexId) -> &[(EdgeId, f64)] {
        &self.transmission[v]
    }

    /// Centre vertex if this is a star graph (one vertex, all edges infinite).
    pub fn star_center(&self) -> Option<VertexId> {
        (self.vertex_count() == 1 && self.edges.iter().all(Edge::is_infinite)).then_some(0)
    }

    /// Canonical point at coordinate `r` on edge `j`.
    pub fn point(&self, j: EdgeId, r: f64) -> Result<GraphPoint> {
        let e = self
            .edges
            .get(j)
            .ok_or_else(|| Error::InvalidPoint(format!("unknown edge index {j}")))?;
        if !r.is_finite() || r < 0.0 || r > e.length {
            return Err(Error::InvalidPoint(format!(
                "coordinate {r} outside [0, {}] on edge {}",
                e.length, e.name
            )));
        }
        Ok(self.canonical(j, r))
    }

    pub(crate) fn canonical(&self, j: EdgeId, r: f64) -> GraphPoint {
        let e = &self.edges[j];
        if r <= 0.0 {
            GraphPoint::Vertex(e.from)
        } else if r >= e.length {
            GraphPoint::Vertex(e.to.expect("finite edge"))
        } else {
            GraphPoint::Edge { edge: j, r }
        }
    }

    pub fn canonicalize(&self, p: GraphPoint) -> GraphPoint {
        match p {
            GraphPoint::Vertex(_) => p,
            GraphPoint::Edge { edge, r } => self.canonical(edge, r),
        }
    }

    pub fn contains_point(&self, p: &GraphPoint) -> bool {
        match *p {
            GraphPoint::Vertex(v) => v < self.vertex_count(),
            GraphPoint::Edge { edge, r } => {
                edge < self.edges.len() && r > 0.0 && r < self.edges[edge].length
            }
        }
    }

    /// Coordinate of `p` along edge `j`, if `p` lies on the closed edge.
    pub fn coord_on(&self, p: &GraphPoint, j: EdgeId) -> Option<f64> {
        let e = &self.edges[j];
        match *p {
            GraphPoint::Edge { edge, r } => (edge == j).then_some(r),
            GraphPoint::Vertex(v) => {
                if e.from == v {
                    Some(0.0)
                } else if e.to == Some(v) {
                    Some(e.length)
                } else {
                    None
                }
            }
        }
    }

    /// Vertices reachable directly from `p`, with the distance along its edge.
    fn anchors(&self, p: &GraphPoint) -> [(VertexId, f64); 2] {
        const NONE: (VertexId, f64) = (usize::MAX, f64::INFINITY);
        match *p {
            GraphPoint::Vertex(v) => [(v, 0.0), NONE],
            GraphPoint::Edge { edge, r } => {
                let e = &self.edges[edge];
                match e.to {
                    Some(t) => [(e.from, r), (t, e.length - r)],
                    None => [(e.from, r), NONE],
                }
            }
        }
    }

    /// Shortest-path distance, `f64::INFINITY` for unreachable pairs.
    pub fn dist(&self, x: &GraphPoint, y: &GraphPoint) -> f64 {
        if let (GraphPoint::Edge { edge: a, r }, GraphPoint::Edge { edge: b, r: s }) = (x, y) {
            if a == b && self.edges[*a].is_infinite() {
                return (r - s).abs();
            }
        }
        let mut best = match (x, y) {
            (GraphPoint::Edge { edge: a, r }, GraphPoint::Edge { edge: b, r: s }) if a == b => {
                (r - s).abs()
            }
            (GraphPoint::Vertex(u), GraphPoint::Vertex(v)) if u == v => 0.0,
            _ => f64::INFINITY,
        };
        for (u, du) in self.anchors(x) {
            if u == usize::MAX {
                continue;
            }
            for (v, dv) in self.anchors(y) {
                if v == usize::MAX {
                    continue;
                }
                let d = du + self.vertex_dist[u][v] + dv;
                if d < best {
                    best = d;
                }
            }
        }
        best
    }

    /// Shortest-path distance between two points.
    pub fn distance(&self, x: &GraphPoint, y: &GraphPoint) -> Result<f64> {
        let d = self.dist(x, y);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::Unreachable {
                from: x.to_string(),
                to: y.to_string(),
            })
        }
    }

    /// Distance from `x` to the nearest vertex other than `x` itself.
    pub fn distance_to_other_vertex(&self, x: &GraphPoint) -> f64 {
        (0..self.vertex_count())
            .filter(|&v| *x != GraphPoint::Vertex(v))
            .map(|v| self.dist(x, &GraphPoint::Vertex(v)))
            .fold(f64::INFINITY, f64::min)
    }

    /// The ball `B(x, radius)` as a simple neighbourhood.
    pub fn simple_neighborhood(&self, x: GraphPoint, radius: f64) -> Result<SimpleNeighborhood> {
        if !(radius > 0.0) {
            return Err(Error::Parameter(format!("radius must be positive, got {radius}")));
        }
        let x = self.canonicalize(x);
        let limit = self.distance_to_other_vertex(&x);
        if radius >= limit {
            return Err(Error::NotSimple {
                center: x.to_string(),
                radius,
                limit,
            });
        }
        let cuts = match x {
            GraphPoint::Vertex(v) => self.incident[v]
                .iter()
                .map(|&j| {
                    let e = &self.edges[j];
                    let r = if e.from == v { radius } else { e.length - radius };
                    (j, r)
                })
                .collect(),
            GraphPoint::Edge { edge, r } => vec![(edge, r - radius), (edge, r + radius)],
        };
        Ok(SimpleNeighborhood {
            center: x,
            radius,
            cuts,
        })
    }

    /// Point at fraction `lambda` along the geodesic from `a` to `b`, for
    /// points on a common edge or on edges sharing a vertex. Other pairs
    /// jump at the midpoint.
    pub fn interpolate(&self, a: &GraphPoint, b: &GraphPoint, lambda: f64) -> GraphPoint {
        if a == b || lambda <= 0.0 {
            return *a;
        }
        if lambda >= 1.0 {
            return *b;
        }
        let edge_hint = match (a, b) {
            (GraphPoint::Edge { edge, .. }, _) | (_, GraphPoint::Edge { edge, .. }) => Some(*edge),
            _ => None,
        };
        let common = match (a, b) {
            (GraphPoint::Edge { edge: i, .. }, GraphPoint::Edge { edge: j, .. }) if i != j => None,
            (GraphPoint::Vertex(u), GraphPoint::Vertex(v)) => self.incident[*u]
                .iter()
                .copied()
                .filter(|&j| self.coord_on(&GraphPoint::Vertex(*v), j).is_some())
                .min_by(|&i, &j| self.edges[i].length.total_cmp(&self.edges[j].length)),
            _ => edge_hint.filter(|&j| self.coord_on(a, j).is_some() && self.coord_on(b, j).is_some()),
        };
        if let Some(j) = common {
            let ra = self.coord_on(a, j).unwrap();
            let rb = self.coord_on(b, j).unwrap();
            return self.canonical(j, ra + lambda * (rb - ra));
        }
        // Different edges: travel through the best shared vertex.
        let mut best: Option<(f64, VertexId, f64, f64)> = None;
        for (u, du) in self.anchors(a) {
            for (v, dv) in self.anchors(b) {
                if u != usize::MAX && u == v && best.is_none_or(|b| du + dv < b.0) {
                    best = Some((du + dv, u, du, dv));
                }
            }
        }
        match best {
            Some((total, v, da, _)) if total > 0.0 => {
                let travelled = lambda * total;
                let vertex = GraphPoint::Vertex(v);
                if travelled <= da {
                    self.toward(a, v, travelled)
                } else {
                    let rest = travelled - da;
                    self.toward(&vertex, v, 0.0);
                    self.away_from(v, b, rest)
                }
            }
            _ => {
                if lambda < 0.5 {
                    *a
                } else {
                    *b
                }
            }
        }
    }

    fn toward(&self, p: &GraphPoint, v: VertexId, step: f64) -> GraphPoint {
        match *p {
            GraphPoint::Vertex(_) => *p,
            GraphPoint::Edge { edge, r } => {
                let e = &self.edges[edge];
                if e.from == v {
                    self.canonical(edge, (r - step).max(0.0))
                } else {
                    self.canonical(edge, (r + step).min(e.length))
                }
            }
        }
    }

    fn away_from(&self, v: VertexId, target: &GraphPoint, step: f64) -> GraphPoint {
        match *target {
            GraphPoint::Vertex(_) => *target,
            GraphPoint::Edge { edge, .. } => {
                let e = &self.edges[edge];
                if e.from == v {
                    self.canonical(edge, step)
                } else {
                    self.canonical(edge, e.length - step)
                }
            }
        }
    }

    // Star-graph helpers.

    /// Distance to the centre of a star graph.
    pub fn radius(&self, p: &GraphPoint) -> f64 {
        match *p {
            GraphPoint::Vertex(_) => 0.0,
            GraphPoint::Edge { r, .. } => r,
        }
    }

    pub fn edge_of(&self, p: &GraphPoint) -> Option<EdgeId> {
        match *p {
            GraphPoint::Vertex(_) => None,
            GraphPoint::Edge { edge, .. } => Some(edge),
        }
    }

    /// Point at distance `r` from the centre along star edge `j`.
    pub fn star_point(&self, j: EdgeId, r: f64) -> GraphPoint {
        if r <= 0.0 {
            GraphPoint::Vertex(self.edges[j].from)
        } else {
            GraphPoint::Edge { edge: j, r }
        }
    }

    /// Point of the line graph with signed coordinate `x`.
    pub fn from_signed(&self, x: f64) -> GraphPoint {
        if x > 0.0 {
            GraphPoint::Edge { edge: 0, r: x }
        } else if x < 0.0 {
            GraphPoint::Edge { edge: 1, r: -x }
        } else {
            GraphPoint::Vertex(0)
        }
    }

    /// Signed coordinate of a point of the line graph.
    pub fn signed(&self, p: &GraphPoint) -> f64 {
        match *p {
            GraphPoint::Vertex(_) => 0.0,
            GraphPoint::Edge { edge: 0, r } => r,
            GraphPoint::Edge { r, .. } => -r,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(s)?;
        file.into_graph()
    }

    pub fn from_json_file(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GraphFile::from_graph(self))?)
    }

    /// Parses a point written as `vertex-name` or `edge-name:coord`.
    pub fn parse_point(&self, s: &str) -> Result<GraphPoint> {
        if let Some((edge, coord)) = s.split_once(':') {
            let j = self
                .edge_by_name(edge)
                .ok_or_else(|| Error::InvalidPoint(format!("unknown edge {edge}")))?;
            let r: f64 = coord
                .parse()
                .map_err(|_| Error::InvalidPoint(format!("bad coordinate in {s}")))?;
            self.point(j, r)
        } else {
            self.vertex_by_name(s)
                .map(GraphPoint::Vertex)
                .ok_or_else(|| Error::InvalidPoint(format!("unknown vertex {s}")))
        }
    }
}

/// Ball around `center` whose boundary cut points lie at `radius` along each
/// adjacent edge.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleNeighborhood {
    pub center: GraphPoint,
    pub radius: f64,
    pub cuts: Vec<(EdgeId, f64)>,
}

impl SimpleNeighborhood {
    pub fn contains(&self, g: &MetricGraph, p: &GraphPoint) -> bool {
        let p = g.canonicalize(*p);
        if p == self.center {
            return true;
        }
        match self.center {
            GraphPoint::Vertex(v) => match p {
                GraphPoint::Vertex(_) => false,
                GraphPoint::Edge { edge, r } => {
                    let e = g.edge(edge);
                    if e.from == v {
                        r < self.radius
                    } else if e.to == Some(v) {
                        e.length - r < self.radius
                    } else {
                        false
                    }
                }
            },
            GraphPoint::Edge { edge: j, r: r0 } => match p {
                GraphPoint::Edge { edge, r } => edge == j && (r - r0).abs() < self.radius,
                GraphPoint::Vertex(_) => false,
            },
        }
    }
}

/// On-disk graph description.
#[derive(Debug, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: Vec<Ident>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub transmission: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub id: Ident,
    pub from: Ident,
    #[serde(default)]
    pub to: Option<Ident>,
    pub length: Option<f64>,
}

/// Vertex or edge identifier; accepts JSON strings or integers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ident {
    Num(i64),
    Str(String),
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ident::Num(n) => write!(f, "{n}"),
            Ident::Str(s) => f.write_str(s),
        }
    }
}

impl GraphFile {
    pub fn into_graph(self) -> Result<MetricGraph> {
        let names: Vec<String> = self.vertices.iter().map(|v| v.to_string()).collect();
        let lookup = |id: &Ident| -> Result<VertexId> {
            let s = id.to_string();
            names
                .iter()
                .position(|n| *n == s)
                .ok_or_else(|| Error::InvalidGraph(format!("unknown vertex {s}")))
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let from = lookup(&e.from)?;
            let to = e.to.as_ref().map(lookup).transpose()?;
            let length = e.length.unwrap_or(f64::INFINITY);
            edges.push(Edge {
                name: e.id.to_string(),
                from,
                to,
                length,
            });
        }
        let mut trans = vec![Vec::new(); names.len()];
        for (v, weights) in &self.transmission {
            let vi = names
                .iter()
                .position(|n| n == v)
                .ok_or_else(|| Error::InvalidGraph(format!("transmission for unknown vertex {v}")))?;
            let mut list = Vec::with_capacity(weights.len());
            for (j, &p) in weights {
                let ji = edges
                    .iter()
                    .position(|e| e.name == *j)
                    .ok_or_else(|| Error::InvalidGraph(format!("transmission for unknown edge {j}")))?;
                list.push((ji, p));
            }
            list.sort_by_key(|&(j, _)| j);
            trans[vi] = list;
        }
        MetricGraph::new(names, edges, trans)
    }

    pub fn from_graph(g: &MetricGraph) -> Self {
        GraphFile {
            vertices: g.vertex_names.iter().cloned().map(Ident::Str).collect(),
            edges: g
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    id: Ident::Str(e.name.clone()),
                    from: Ident::Str(g.vertex_names[e.from].clone()),
                    to: e.to.map(|t| Ident::Str(g.vertex_names[t].clone())),
                    length: e.length.is_finite().then_some(e.length),
                })
                .collect(),
            transmission: g
                .transmission
                .iter()
                .enumerate()
                .map(|(v, w)| {
                    (
                        g.vertex_names[v].clone(),
                        w.iter().map(|&(j, p)| (g.edges[j].name.clone(), p)).collect(),
                    )
                })
                .collect(),
        }
    }
}

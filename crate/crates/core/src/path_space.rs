//! Grid-sampled continuous paths with a start time, the path metric and
//! the equicontinuity diagnostic.
//!
//! Times are integer indices on a global grid of step `dt`. A path started
//! at index `start` holds `samples[k] = f((start + k) dt)`. Evaluation
//! before the start returns the first sample (the constant extension to
//! the left); evaluation after the last sample returns the last sample,
//! since simulated paths stop at a finite horizon.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric_graph::{GraphPoint, MetricGraph};

/// Default number of terms kept in the path metric series.
pub const DEFAULT_N_MAX: u32 = 20;

const DT_REL_TOL: f64 = 1e-12;

/// Grid index of time `t`, rounding to the nearest grid point.
pub fn grid_index(t: f64, dt: f64) -> i64 {
    (t / dt).round() as i64
}

pub fn same_dt(a: f64, b: f64) -> bool {
    (a - b).abs() <= DT_REL_TOL * a.abs().max(b.abs())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub start: i64,
    pub dt: f64,
    pub samples: Vec<GraphPoint>,
}

impl Path {
    pub fn new(start: i64, dt: f64, samples: Vec<GraphPoint>) -> Self {
        assert!(!samples.is_empty(), "a path needs at least one sample");
        Path { start, dt, samples }
    }

    pub fn constant(start: i64, end: i64, dt: f64, x: GraphPoint) -> Self {
        Path::new(start, dt, vec![x; (end - start + 1).max(1) as usize])
    }

    pub fn start_time(&self) -> f64 {
        self.start as f64 * self.dt
    }

    /// Index of the last sample.
    pub fn end(&self) -> i64 {
        self.start + self.samples.len() as i64 - 1
    }

    pub fn end_time(&self) -> f64 {
        self.end() as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn initial(&self) -> GraphPoint {
        self.samples[0]
    }

    /// Extended path at grid index `k`.
    #[inline]
    pub fn at(&self, k: i64) -> GraphPoint {
        let i = (k - self.start).clamp(0, self.samples.len() as i64 - 1);
        self.samples[i as usize]
    }

    /// Extended path at real time `t`, interpolating between grid samples.
    pub fn eval(&self, g: &MetricGraph, t: f64) -> GraphPoint {
        let u = t / self.dt;
        let k = u.floor() as i64;
        let frac = u - k as f64;
        if frac <= 0.0 || k < self.start || k >= self.end() {
            return self.at(if frac > 0.5 && k >= self.end() { k + 1 } else { k });
        }
        g.interpolate(&self.at(k), &self.at(k + 1), frac)
    }

    /// Restriction of the extended path to `[k, inf)`.
    pub fn restrict(&self, k: i64) -> Path {
        let end = self.end().max(k);
        Path {
            start: k,
            dt: self.dt,
            samples: (k..=end).map(|j| self.at(j)).collect(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct PathFamily {
    pub paths: Vec<Path>,
}

impl PathFamily {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if let Some(first) = paths.first() {
            if let Some(bad) = paths.iter().find(|p| !same_dt(p.dt, first.dt)) {
                return Err(Error::Alignment(format!(
                    "time steps {} and {} differ",
                    first.dt, bad.dt
                )));
            }
        }
        Ok(PathFamily { paths })
    }

    pub fn dt(&self) -> Option<f64> {
        self.paths.first().map(|p| p.dt)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathDistance {
    pub value: f64,
    /// Upper bound on the discarded tail of the series.
    pub truncation: f64,
}

/// Distance between the extensions of `f` and `g`: the start-time gap plus
/// `sum_{n=1}^{n_max} 2^-n (1 ^ sup_{[-n,n]} rho)`, with the sup over grid points.
pub fn path_distance(g: &MetricGraph, f: &Path, h: &Path, n_max: u32) -> Result<PathDistance> {
    if n_max == 0 {
        return Err(Error::Parameter("n_max must be at least 1".into()));
    }
    if !same_dt(f.dt, h.dt) {
        return Err(Error::Alignment(format!("time steps {} and {} differ", f.dt, h.dt)));
    }
    let dt = f.dt;
    let lo = f.start.min(h.start);
    let hi = f.end().max(h.end());
    // Outside [lo, hi] both extensions are constant.
    let gap = |k: i64| g.dist(&f.at(k), &h.at(k));

    let mut value = ((f.start - h.start) as f64 * dt).abs();
    let mut weight = 1.0;
    let mut sup = 0.0f64;
    // Covered index range [a, b] of the running sup.
    let mut covered: Option<(i64, i64)> = None;
    for n in 1..=n_max {
        weight *= 0.5;
        if sup < 1.0 {
            let reach = (n as f64 / dt).floor() as i64;
            let a = (-reach).clamp(lo, hi);
            let b = reach.clamp(lo, hi);
            match covered {
                None => {
                    for k in a..=b {
                        sup = sup.max(gap(k));
                        if sup >= 1.0 {
                            break;
                        }
                    }
                }
                Some((ca, cb)) => {
                    for k in (a..ca).chain(cb + 1..=b) {
                        sup = sup.max(gap(k));
                        if sup >= 1.0 {
                            break;
                        }
                    }
                }
            }
            covered = Some((a, b));
        }
        value += weight * sup.min(1.0);
    }
    Ok(PathDistance {
        value,
        truncation: weight,
    })
}

/// Offending pair found by [`equicontinuity_check`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusWitness {
    pub path: usize,
    pub t1: f64,
    pub t2: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquicontinuityReport {
    pub ok: bool,
    /// Largest window length `alpha` such that points less than `alpha`
    /// apart in time are less than `eps` apart in space.
    pub alpha: f64,
    /// Largest displacement at the first lag that breaks the bound (or at
    /// the full span when none does).
    pub worst_modulus: f64,
    pub witness: Option<ModulusWitness>,
}

/// Uniform modulus check over `[i(f), c]` for every path of the family.
pub fn equicontinuity_check(
    g: &MetricGraph,
    fam: &PathFamily,
    c: f64,
    eps: f64,
) -> Result<EquicontinuityReport> {
    let limits: Vec<i64> = fam.paths.iter().map(|p| p.end()).collect();
    equicontinuity_check_limited(g, fam, &limits, c, eps)
}

/// Same as [`equicontinuity_check`], but pairs whose first time index lies
/// after `first_limits[i]` are skipped for path `i`. Skeleton checks use
/// this to avoid rescanning stretches shared with an earlier path.
pub fn equicontinuity_check_limited(
    g: &MetricGraph,
    fam: &PathFamily,
    first_limits: &[i64],
    c: f64,
    eps: f64,
) -> Result<EquicontinuityReport> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    let Some(dt) = fam.dt() else {
        return Ok(EquicontinuityReport {
            ok: true,
            alpha: f64::INFINITY,
            worst_modulus: 0.0,
            witness: None,
        });
    };
    let cap = (c / dt + 1e-9).floor() as i64;
    if let Some(p) = fam.paths.iter().find(|p| p.start > cap) {
        return Err(Error::Parameter(format!(
            "path starts at {} after the check horizon {c}",
            p.start_time()
        )));
    }
    let min_start = fam.paths.iter().map(|p| p.start).min().unwrap();
    let span = cap - min_start;

    let mut worst = 0.0f64;
    let mut witness = None;
    let mut passed = 0i64;
    'lags: for m in 1..=span {
        let mut lag_worst = 0.0f64;
        let mut lag_witness = None;
        for (i, p) in fam.paths.iter().enumerate() {
            let last_first = (cap - m).min(first_limits[i]);
            for k in p.start..=last_first {
                let d = g.dist(&p.at(k), &p.at(k + m));
                if d > lag_worst {
                    lag_worst = d;
                    if d >= eps {
                        lag_witness = Some(ModulusWitness {
                            path: i,
                            t1: k as f64 * dt,
                            t2: (k + m) as f64 * dt,
                            distance: d,
                        });
                    }
                }
            }
        }
        worst = lag_worst;
        if lag_worst >= eps {
            witness = lag_witness;
            break 'lags;
        }
        passed = m;
    }
    let alpha = if passed == span {
        span as f64 * dt
    } else {
        (passed + 1) as f64 * dt
    };
    Ok(EquicontinuityReport {
        ok: passed >= 1 || span == 0,
        alpha,
        worst_modulus: worst,
        witness,
    })
}

/// Edge name and coordinate used when writing `p`; vertices are written on
/// their lowest-numbered incident edge.
pub fn point_record(g: &MetricGraph, p: &GraphPoint) -> (usize, f64) {
    match *p {
        GraphPoint::Edge { edge, r } => (edge, r),
        GraphPoint::Vertex(v) => {
            let j = *g.incident(v).iter().min().expect("vertex has an edge");
            (j, g.coord_on(p, j).unwrap())
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    path_id: usize,
    t: f64,
    edge_id: String,
    coord: f64,
}

/// Writes paths as CSV rows `path_id,t,edge_id,coord`.
pub fn write_csv<W: Write>(g: &MetricGraph, paths: &[&Path], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (id, p) in paths.iter().enumerate() {
        for (k, x) in p.samples.iter().enumerate() {
            let (edge, coord) = point_record(g, x);
            w.serialize(SampleRecord {
                path_id: id,
                t: (p.start + k as i64) as f64 * p.dt,
                edge_id: g.edge(edge).name.clone(),
                coord,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes paths as JSON lines, one record per sample.
pub fn write_jsonl<W: Write>(g: &MetricGraph, paths: &[&Path], mut out: W) -> Result<()> {
    for (id, p) in paths.iter().enumerate() {
        for (k, x) in p.samples.iter().enumerate() {
            let (edge, coord) = point_record(g, x);
            let rec = SampleRecord {
                path_id: id,
                t: (p.start + k as i64) as f64 * p.dt,
                edge_id: g.edge(edge).name.clone(),
                coord,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Reads paths written by [`write_csv`]. Rows of a path must be contiguous
/// and consecutive in time.
pub fn read_csv<R: Read>(g: &MetricGraph, dt: f64, input: R) -> Result<Vec<Path>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut paths: Vec<Path> = Vec::new();
    let mut current: Option<usize> = None;
    for row in rdr.deserialize() {
        let rec: SampleRecord = row?;
        let edge = g
            .edge_by_name(&rec.edge_id)
            .ok_or_else(|| Error::Format(format!("unknown edge {}", rec.edge_id)))?;
        let x = g.point(edge, rec.coord)?;
        let k = grid_index(rec.t, dt);
        if current != Some(rec.path_id) {
            if rec.path_id != paths.len() {
                return Err(Error::Format(format!(
                    "path ids must be consecutive, found {} after {}",
                    rec.path_id,
                    paths.len()
                )));
            }
            paths.push(Path::new(k, dt, vec![x]));
            current = Some(rec.path_id);
        } else {
            let p = paths.last_mut().unwrap();
            if k != p.end() + 1 {
                return Err(Error::Format(format!(
                    "path {} has a gap before t = {}",
                    rec.path_id, rec.t
                )));
            }
            p.samples.push(x);
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line() -> MetricGraph {
        MetricGraph::line()
    }

    fn line_path(g: &MetricGraph, start: i64, dt: f64, xs: &[f64]) -> Path {
        Path::new(start, dt, xs.iter().map(|&x| g.from_signed(x)).collect())
    }

    #[test]
    fn distance_to_self_is_zero() {
        let g = line();
        let f = line_path(&g, 3, 0.1, &[0.0, 0.2, -0.4, 1.0]);
        let d = path_distance(&g, &f, &f, DEFAULT_N_MAX).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn constant_gap_of_one_sums_the_series() {
        let g = line();
        let f = Path::constant(0, 10, 0.1, g.from_signed(0.0));
        let h = Path::constant(0, 10, 0.1, g.from_signed(1.0));
        let d = path_distance(&g, &f, &h, 20).unwrap();
        assert!((d.value - 1.0).abs() <= d.truncation + 1e-15);
        assert_eq!(d.truncation, 2f64.powi(-20));
    }

    #[test]
    fn start_time_gap_only() {
        let g = line();
        let f = Path::constant(0, 20, 0.1, g.from_signed(0.0));
        let h = Path::constant(5, 20, 0.1, g.from_signed(0.0));
        let d = path_distance(&g, &f, &h, 20).unwrap();
        assert!((d.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mismatched_steps_are_rejected() {
        let g = line();
        let f = Path::constant(0, 2, 0.1, g.from_signed(0.0));
        let h = Path::constant(0, 2, 0.2, g.from_signed(0.0));
        assert!(matches!(
            path_distance(&g, &f, &h, 5),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn window_sup_against_brute_force() {
        // Paths far out on the time axis only enter the later windows.
        let g = line();
        let f = line_path(&g, 25, 0.1, &[0.0, 0.3, 0.7, 0.2]);
        let h = line_path(&g, 27, 0.1, &[0.1, 0.1, 0.1]);
        let d = path_distance(&g, &f, &h, 8).unwrap();
        let mut want = 0.2;
        for n in 1..=8 {
            let reach = (n as f64 / 0.1).floor() as i64;
            let sup = (-reach..=reach)
                .map(|k| g.dist(&f.at(k), &h.at(k)))
                .fold(0.0, f64::max);
            want += 0.5f64.powi(n) * sup.min(1.0);
        }
        assert!((d.value - want).abs() < 1e-12, "{} vs {want}", d.value);
    }

    #[test]
    fn restrict_identities() {
        let g = line();
        let f = line_path(&g, 4, 0.5, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(f.restrict(4), f);
        assert_eq!(f.restrict(5).restrict(6), f.restrict(6));
        let early = f.restrict(1);
        assert_eq!(early.start, 1);
        assert!(early.samples[..4].iter().all(|x| *x == g.from_signed(1.0)));
        assert_eq!(early.end(), f.end());
        let late = f.restrict(12);
        assert_eq!(late.samples, vec![g.from_signed(4.0)]);
    }

    #[test]
    fn evaluation_interpolates_on_edges() {
        let g = line();
        let f = line_path(&g, 0, 1.0, &[1.0, -1.0]);
        assert_eq!(f.eval(&g, 0.5), g.from_signed(0.0));
        assert_eq!(f.eval(&g, 0.25), g.from_signed(0.5));
        assert_eq!(f.eval(&g, -3.0), g.from_signed(1.0));
        assert_eq!(f.eval(&g, 9.0), g.from_signed(-1.0));
    }

    #[test]
    fn constant_family_is_equicontinuous_over_the_span() {
        let g = line();
        let fam = PathFamily::new(vec![
            Path::constant(0, 50, 0.01, g.from_signed(0.3)),
            Path::constant(10, 50, 0.01, g.from_signed(-0.3)),
        ])
        .unwrap();
        let rep = equicontinuity_check(&g, &fam, 0.5, 0.01).unwrap();
        assert!(rep.ok);
        assert!((rep.alpha - 0.5).abs() < 1e-12);
        assert!(rep.witness.is_none());
    }

    #[test]
    fn lipschitz_path_modulus() {
        let g = line();
        let dt = 1e-3;
        let xs: Vec<f64> = (0..=1000).map(|k| k as f64 * dt).collect();
        let fam = PathFamily::new(vec![line_path(&g, 0, dt, &xs)]).unwrap();
        let rep = equicontinuity_check(&g, &fam, 1.0, 0.1).unwrap();
        assert!(rep.ok);
        // Lags below 0.1 pass, lag 0.1 itself fails in floating point or exactly.
        assert!((rep.alpha - 0.1).abs() <= dt + 1e-12, "alpha = {}", rep.alpha);
        let w = rep.witness.unwrap();
        assert!(w.distance >= 0.1);
    }

    #[test]
    fn steep_segment_needs_a_fine_grid() {
        let g = line();
        let family = |dt: f64| {
            let n = (0.2 / dt).round() as i64;
            let xs: Vec<f64> = (0..=n)
                .map(|k| {
                    let t = k as f64 * dt;
                    // slope 100 on [0.1, 0.11], flat elsewhere
                    100.0 * (t - 0.1).clamp(0.0, 0.01)
                })
                .collect();
            PathFamily::new(vec![line_path(&g, 0, dt, &xs)]).unwrap()
        };
        let coarse = equicontinuity_check(&g, &family(2e-3), 0.2, 0.1).unwrap();
        assert!(!coarse.ok);
        assert!(coarse.witness.is_some());
        let fine = equicontinuity_check(&g, &family(5e-4), 0.2, 0.1).unwrap();
        assert!(fine.ok);
        assert!((fine.alpha - 1e-3).abs() < 1e-9, "alpha = {}", fine.alpha);
    }

    #[test]
    fn empty_family_is_ok() {
        let g = line();
        let rep = equicontinuity_check(&g, &PathFamily::default(), 1.0, 0.1).unwrap();
        assert!(rep.ok);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = MetricGraph::star(&[0.5, 0.25, 0.25]).unwrap();
        let a = Path::new(
            -2,
            0.001,
            vec![g.star_point(0, 0.1), GraphPoint::Vertex(0), g.star_point(2, 1.0 / 3.0)],
        );
        let b = Path::new(7, 0.001, vec![g.star_point(1, 2.5)]);
        let mut buf = Vec::new();
        write_csv(&g, &[&a, &b], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("path_id,t,edge_id,coord\n"));
        let back = read_csv(&g, 0.001, &buf[..]).unwrap();
        assert_eq!(back, vec![a.clone(), b.clone()]);

        let mut lines = Vec::new();
        write_jsonl(&g, &[&a], &mut lines).unwrap();
        let first: serde_json::Value =
            serde_json::from_str(std::str::from_utf8(&lines).unwrap().lines().next().unwrap())
                .unwrap();
        assert_eq!(first["edge_id"], "1");
    }

    fn arb_path() -> impl Strategy<Value = (i64, Vec<f64>)> {
        (-30i64..30, proptest::collection::vec(-2.0f64..2.0, 1..40))
    }

    proptest! {
        #[test]
        fn path_distance_is_a_pseudometric(a in arb_path(), b in arb_path(), c in arb_path()) {
            let g = line();
            let dt = 0.05;
            let f = line_path(&g, a.0, dt, &a.1);
            let h = line_path(&g, b.0, dt, &b.1);
            let k = line_path(&g, c.0, dt, &c.1);
            let n = 12;
            let fh = path_distance(&g, &f, &h, n).unwrap();
            let hf = path_distance(&g, &h, &f, n).unwrap();
            prop_assert_eq!(fh.value, hf.value);
            let fk = path_distance(&g, &f, &k, n).unwrap().value;
            let kh = path_distance(&g, &k, &h, n).unwrap().value;
            prop_assert!(fh.value <= fk + kh + 2.0 * fh.truncation + 1e-12);
        }

        #[test]
        fn restriction_composes(a in arb_path(), t in -40i64..80, du in 0i64..40) {
            let g = line();
            let f = line_path(&g, a.0, 0.1, &a.1);
            prop_assert_eq!(f.restrict(t).restrict(t + du), f.restrict(t + du));
        }
    }
}

//! Checks of the three skeleton axioms and of local finiteness.

use std::collections::HashSet;

use serde::Serialize;

use super::{Region, Skeleton, SkeletonWindow};
use crate::error::{Error, Result};
use crate::metric_graph::GraphPoint;
use crate::path_space::{equicontinuity_check_limited, grid_index, EquicontinuityReport, PathFamily};

/// Entries `m < n` sitting together at time `s` that later separate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sk1Witness {
    pub m: usize,
    pub n: usize,
    pub s: f64,
}

/// A probe point with no start point within `eta`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sk2Witness {
    pub t: f64,
    pub x: GraphPoint,
    /// Distance to the nearest start, in the max of time and space gaps.
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sk3Result {
    pub eps: f64,
    pub report: EquicontinuityReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub sk1: bool,
    pub sk1_witness: Option<Sk1Witness>,
    pub sk2: bool,
    pub sk2_witness: Option<Sk2Witness>,
    pub sk2_probes: usize,
    pub sk3: bool,
    pub sk3_results: Vec<Sk3Result>,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.sk1 && self.sk2 && self.sk3
    }
}

/// Checks the axioms: exact coalescence, an `eta`-net of start points over
/// `window`, and the uniform modulus of every entry path for each `eps`.
pub fn check_axioms(
    sk: &Skeleton,
    window: &SkeletonWindow,
    eta: f64,
    eps_ladder: &[f64],
) -> Result<AxiomReport> {
    if !(eta > 0.0) {
        return Err(Error::Parameter(format!("eta must be positive, got {eta}")));
    }
    let sk1_witness = sk.sk1_violation().cloned();
    let (sk2_witness, sk2_probes) = sk2_check(sk, window, eta);

    // Sk3 family: each entry from its first visit to the window region
    // during the window, checked up to the window end.
    let g = sk.graph();
    let k_lo = grid_index(window.t_min, sk.dt());
    let k_hi = grid_index(window.t_max, sk.dt()).min(sk.horizon());
    let mut paths = Vec::new();
    let mut limits = Vec::new();
    let mut ids = Vec::new();
    // family start per entry, for entries in the family
    let mut from_of: Vec<Option<i64>> = vec![None; sk.len()];
    for (n, e) in sk.entries().iter().enumerate() {
        let Some(k) = (e.start.max(k_lo)..=k_hi).find(|&k| window.region.contains(g, &e.path.at(k))) else {
            continue;
        };
        from_of[n] = Some(k);
        paths.push(e.path.restrict(k));
        ids.push(n);
        // After joining the class of a smaller family member that is checked
        // from before the join, the path repeats that member's samples, so
        // only pairs starting before the join are new.
        let limit = sk
            .joined(n)
            .filter(|&j| {
                (0..n).any(|m| from_of[m].is_some_and(|f| f <= j) && sk.classes().same_class_at(m, n, j))
            })
            .map_or(sk.horizon(), |j| j - 1);
        limits.push(limit);
    }
    let fam = PathFamily { paths };
    let c = sk.time(k_hi.max(sk.first_index()));
    let mut sk3_results = Vec::with_capacity(eps_ladder.len());
    for &eps in eps_ladder {
        let mut report = equicontinuity_check_limited(g, &fam, &limits, c, eps)?;
        if let Some(w) = report.witness.as_mut() {
            w.path = ids[w.path];
        }
        sk3_results.push(Sk3Result { eps, report });
    }
    Ok(AxiomReport {
        sk1: sk1_witness.is_none(),
        sk1_witness,
        sk2: sk2_witness.is_none(),
        sk2_witness,
        sk2_probes,
        sk3: sk3_results.iter().all(|r| r.report.ok),
        sk3_results,
    })
}

fn sk2_check(sk: &Skeleton, window: &SkeletonWindow, eta: f64) -> (Option<Sk2Witness>, usize) {
    let g = sk.graph();
    let step = eta / 4.0;
    let space = window.region.probes(g, step);
    let nt = ((window.t_max - window.t_min) / step).ceil().max(0.0) as usize;
    let mut probes = 0;
    let mut worst: Option<Sk2Witness> = None;
    for i in 0..=nt {
        let t = if nt == 0 {
            window.t_min
        } else {
            window.t_min + (window.t_max - window.t_min) * i as f64 / nt as f64
        };
        // entries with |s_n - t| < eta
        let lo = sk.entries().partition_point(|e| sk.time(e.start) <= t - eta);
        let hi = sk.entries().partition_point(|e| sk.time(e.start) < t + eta);
        for y in &space {
            probes += 1;
            let mut gap = f64::INFINITY;
            for e in &sk.entries()[lo..hi] {
                let d = (sk.time(e.start) - t).abs().max(g.dist(&e.x, y));
                gap = gap.min(d);
                if gap < eta {
                    break;
                }
            }
            if gap >= eta && worst.as_ref().is_none_or(|w| gap > w.gap) {
                worst = Some(Sk2Witness { t, x: *y, gap });
            }
        }
    }
    (worst, probes)
}

/// Number of distinct points `phi_n(t)` over entries started by `s` whose
/// path stays in `region` on `[s, t]`.
pub fn count_distinct(sk: &Skeleton, s: i64, t: i64, region: &Region) -> usize {
    count_in_region(sk, s, t, region).0
}

/// `(distinct positions, contributing entries)`.
fn count_in_region(sk: &Skeleton, s: i64, t: i64, region: &Region) -> (usize, usize) {
    let g = sk.graph();
    let mut seen = HashSet::new();
    let mut entries = 0;
    for n in 0..sk.started_by(s) {
        if (s..=t).all(|k| region.contains(g, &sk.position(n, k))) {
            entries += 1;
            seen.insert(sk.position(n, t).key());
        }
    }
    (seen.len(), entries)
}

#[derive(Clone, Debug, Serialize)]
pub struct IcpRegion {
    pub count: usize,
    pub entries: usize,
    pub cap: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IcpReport {
    pub ok: bool,
    pub regions: Vec<IcpRegion>,
}

/// Grid-scale local finiteness: on each region some coalescence has taken
/// place (fewer distinct points than contributing entries) and the count
/// per unit length stays below `cap_per_length`.
pub fn icp_check(
    sk: &Skeleton,
    s: i64,
    t: i64,
    compacts: &[Region],
    cap_per_length: f64,
) -> IcpReport {
    if t <= s {
        return IcpReport { ok: true, regions: Vec::new() };
    }
    let regions: Vec<IcpRegion> = compacts
        .iter()
        .map(|k| {
            let (count, entries) = count_in_region(sk, s, t, k);
            let cap = cap_per_length * k.length().max(f64::MIN_POSITIVE);
            let ok = entries == 0 || (count < entries && count as f64 <= cap);
            IcpRegion { count, entries, cap, ok }
        })
        .collect();
    IcpReport {
        ok: regions.iter().all(|r| r.ok),
        regions,
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::line_skeleton;
    use super::*;

    /// Constant paths started on a space-time net of spacing `h`.
    fn constant_net(h: f64, dt: f64, t_max: f64, a: f64, b: f64, horizon: i64) -> Skeleton {
        let mut paths = Vec::new();
        let nt = (t_max / h).round() as i64;
        let nx = ((b - a) / h).round() as i64;
        for i in 0..=nt {
            let s = ((i as f64 * h) / dt).round() as i64;
            for j in 0..=nx {
                // shift each row slightly so no two paths share a value
                let x = a + j as f64 * h + i as f64 * 1e-6;
                paths.push((s, vec![x; (horizon - s + 1) as usize]));
            }
        }
        line_skeleton(dt, &paths)
    }

    fn window(a: f64, b: f64, t_max: f64) -> SkeletonWindow {
        SkeletonWindow { t_min: 0.0, t_max, region: Region::line_interval(a, b) }
    }

    #[test]
    fn constant_net_passes_all_axioms() {
        let sk = constant_net(0.05, 0.01, 0.5, -0.5, 0.5, 100);
        let rep = check_axioms(&sk, &window(-0.5, 0.5, 0.5), 0.05, &[0.5, 0.25]).unwrap();
        assert!(rep.sk1 && rep.sk2 && rep.sk3, "{rep:?}");
    }

    #[test]
    fn sparse_net_has_a_hole() {
        let sk = constant_net(0.2, 0.01, 0.4, -0.4, 0.4, 50);
        let rep = check_axioms(&sk, &window(-0.4, 0.4, 0.4), 0.05, &[0.5]).unwrap();
        assert!(!rep.sk2);
        assert!(rep.sk2_witness.unwrap().gap >= 0.05);
    }

    #[test]
    fn crossing_paths_violate_sk1() {
        let sk = line_skeleton(0.1, &[(0, vec![-1.0, 0.0, 1.0]), (0, vec![1.0, 0.0, -1.0])]);
        let win = window(-1.0, 1.0, 0.0);
        let rep = check_axioms(&sk, &win, 2.0, &[3.0]).unwrap();
        assert!(!rep.sk1);
        let w = rep.sk1_witness.unwrap();
        assert_eq!((w.m, w.n), (0, 1));
        assert!((w.s - 0.1).abs() < 1e-12);
    }

    #[test]
    fn modulus_is_checked_inside_the_window_only() {
        // entry 1 jumps at index 3, entry 2 never enters the region
        let paths = [
            (0, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            (0, vec![0.5, 0.5, 0.5, 0.9, 0.9, 0.9]),
            (0, vec![5.0, 6.0, 5.0, 6.0, 5.0, 6.0]),
        ];
        let sk = line_skeleton(0.1, &paths);
        let inside = SkeletonWindow { t_min: 0.0, t_max: 0.5, region: Region::line_interval(-1.0, 1.0) };
        let rep = check_axioms(&sk, &inside, 10.0, &[0.25]).unwrap();
        assert!(!rep.sk3);
        let w = rep.sk3_results[0].report.witness.clone().unwrap();
        assert_eq!(w.path, 1);
        assert!((w.t2 - 0.3).abs() < 1e-12);
        let before = SkeletonWindow { t_max: 0.2, ..inside };
        assert!(check_axioms(&sk, &before, 10.0, &[0.25]).unwrap().sk3);
    }

    #[test]
    fn count_without_motion_equals_started_entries_in_region() {
        let sk = constant_net(0.1, 0.01, 0.2, 0.0, 1.0, 40);
        let k = Region::line_interval(0.0, 0.55);
        // started by s = 10: rows at 0 and 0.1, each with 6 values in [0, 0.55]
        assert_eq!(count_distinct(&sk, 10, 11, &k), 12);
        assert!(!icp_check(&sk, 10, 11, std::slice::from_ref(&k), 1e6).ok);
        assert!(icp_check(&sk, 10, 10, &[k], 1e6).ok);
    }

    #[test]
    fn merging_reduces_the_count() {
        let sk = line_skeleton(
            0.1,
            &[(0, vec![0.0, 0.5, 1.0, 1.0]), (0, vec![2.0, 1.5, 1.0, 1.0]), (0, vec![3.0, 3.0, 3.0, 3.0])],
        );
        let k = Region::line_interval(-5.0, 5.0);
        assert_eq!(count_distinct(&sk, 0, 1, &k), 3);
        assert_eq!(count_distinct(&sk, 0, 3, &k), 2);
        assert!(icp_check(&sk, 0, 3, &[k], 10.0).ok);
        // leaving the region removes an entry
        let small = Region::line_interval(-0.1, 2.5);
        assert_eq!(count_distinct(&sk, 0, 3, &small), 1);
    }
}

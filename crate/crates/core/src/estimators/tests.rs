use std::sync::Arc;

use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use super::*;
use crate::metric_graph::{GraphPoint, MetricGraph};
use crate::sde_flows::FlowKind;
use crate::skeleton::Region;

fn line() -> Arc<MetricGraph> {
    Arc::new(MetricGraph::line())
}

fn star3() -> Arc<MetricGraph> {
    Arc::new(MetricGraph::star(&[1.0 / 3.0; 3]).unwrap())
}

/// Probability that a variance-2 Brownian motion from 1 hits 0 by time 1,
/// by the reflection principle.
fn meeting_oracle() -> f64 {
    erfc(0.5)
}

#[test]
fn wilson_matches_frozen_values() {
    let (lo, hi) = wilson(0, 10);
    assert_eq!(lo, 0.0);
    assert!((hi - 0.277_532).abs() < 1e-6, "{hi}");
    let (lo, hi) = wilson(5, 10);
    assert!((lo - 0.236_593).abs() < 1e-6, "{lo}");
    assert!((hi - 0.763_407).abs() < 1e-6, "{hi}");
    assert_eq!(wilson(10, 10).1, 1.0);
}

#[test]
fn mean_interval_on_a_constant_sample_is_a_point() {
    assert_eq!(mean_ci(&[2.0; 5]), (2.0, 2.0, 2.0));
    let (m, lo, hi) = mean_ci(&[1.0, 3.0]);
    assert_eq!(m, 2.0);
    // sd = sqrt(2), se = 1
    let z = Normal::standard().inverse_cdf(0.975);
    assert!((hi - 2.0 - z).abs() < 1e-12 && (2.0 - lo - z).abs() < 1e-12);
}

#[test]
fn verdicts_use_the_conservative_edge() {
    let t = Target::AtMost { bound: 0.5 };
    assert_eq!(t.judge(0.1, 0.4), Verdict::Pass);
    assert_eq!(t.judge(0.4, 0.6), Verdict::Inconclusive);
    assert_eq!(t.judge(0.6, 0.7), Verdict::Fail);
    let t = Target::Within { value: 0.48, tol: 0.02 };
    assert_eq!(t.judge(0.47, 0.49), Verdict::Pass);
    assert_eq!(t.judge(0.45, 0.49), Verdict::Inconclusive);
    assert_eq!(t.judge(0.40, 0.45), Verdict::Fail);
    assert_eq!(Target::Below { bound: 0.0 }.judge(-1.0, 0.0), Verdict::Inconclusive);
    assert_eq!(Target::AtLeast { bound: 0.02 }.judge(0.03, 0.2), Verdict::Pass);
}

#[test]
fn tiny_runs_are_inconclusive() {
    let r = EstimateReport::proportion("x", 0, 10)
        .with_target(Target::AtMost { bound: 0.5 })
        .require_samples(MIN_SAMPLES);
    assert_eq!(r.verdict, Verdict::Inconclusive);
    assert_eq!(summarize(std::slice::from_ref(&r)), Verdict::Inconclusive);
    let f = EstimateReport::proportion("y", 10, 10).with_target(Target::AtMost { bound: 0.1 });
    assert_eq!(summarize(&[r, f]), Verdict::Fail);
}

#[test]
fn coincident_points_meet_immediately() {
    let cfg = McConfig::new(FlowKind::CoalescingBm, line(), 1e-3, 1000, 1);
    let x = GraphPoint::Edge { edge: 0, r: 0.3 };
    let r = meeting_probability(&cfg, &MeetingQuery::new(x, x, 1.0)).unwrap();
    assert_eq!(r.estimate, 1.0);
}

#[test]
fn brownian_meeting_matches_reflection_principle() {
    let g = line();
    let cfg = McConfig::new(FlowKind::CoalescingBm, g.clone(), 1e-3, 20_000, 3);
    let q = MeetingQuery::new(g.from_signed(0.0), g.from_signed(1.0), 1.0);
    let r = meeting_probability(&cfg, &q).unwrap();
    let p = meeting_oracle();
    assert!((p - 0.4795).abs() < 1e-4);
    // oracle inside a slightly widened interval
    assert!(r.ci_lo - 0.003 <= p && p <= r.ci_hi + 0.003, "{r:?}");
}

#[test]
fn bridge_correction_makes_the_grid_irrelevant() {
    let g = line();
    let cfg = McConfig::new(FlowKind::CoalescingBm, g.clone(), 1e-3, 20_000, 4);
    let mut q = MeetingQuery::new(g.from_signed(0.0), g.from_signed(1.0), 1.0);
    q.steps = Some(20);
    let r = meeting_probability(&cfg, &q).unwrap();
    assert!(r.ci_lo - 0.003 <= meeting_oracle() && meeting_oracle() <= r.ci_hi + 0.003, "{r:?}");
}

#[test]
fn doubling_samples_tightens_the_interval() {
    let g = line();
    let q = MeetingQuery { steps: Some(50), ..MeetingQuery::new(g.from_signed(0.0), g.from_signed(1.0), 1.0) };
    let a = meeting_probability(&McConfig::new(FlowKind::CoalescingBm, g.clone(), 1e-3, 4000, 9), &q).unwrap();
    let b = meeting_probability(&McConfig::new(FlowKind::CoalescingBm, g.clone(), 1e-3, 8000, 9), &q).unwrap();
    let ratio = b.half_width() / a.half_width();
    assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.05, "{ratio}");
}

#[test]
fn walsh_pairs_meet_with_positive_probability() {
    let g = star3();
    let cfg = McConfig::new(FlowKind::Walsh, g.clone(), 1e-3, 2000, 5);
    let q = MeetingQuery {
        steps: Some(200),
        ..MeetingQuery::new(g.star_point(0, 1.0), g.star_point(1, 1.0), 2.0)
    };
    let r = meeting_probability(&cfg, &q).unwrap();
    assert!(r.ci_lo > 0.05, "{r:?}");
}

#[test]
fn lattice_flows_reject_step_overrides() {
    let g = line();
    let cfg = McConfig::new(FlowKind::Skew { beta: 0.5 }, g.clone(), 1e-2, 1000, 5);
    let mut q = MeetingQuery::new(g.from_signed(0.0), g.from_signed(0.5), 1.0);
    assert!(meeting_probability(&cfg, &q).is_ok());
    q.steps = Some(10);
    assert!(meeting_probability(&cfg, &q).is_err());
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let g = star3();
    let cfg = McConfig::new(FlowKind::Walsh, g.clone(), 1e-3, 1500, 12);
    let q = MeetingQuery { steps: Some(100), ..MeetingQuery::new(g.star_point(0, 0.5), g.star_point(2, 0.2), 2.0) };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| meeting_probability(&cfg, &q).unwrap())
    };
    assert_eq!(run(1), run(3));
}

fn unit_grid(g: &MetricGraph, n: usize) -> Vec<GraphPoint> {
    (0..n).map(|i| g.from_signed((i as f64 + 0.5) / n as f64)).collect()
}

#[test]
fn certified_constants_bound_the_coalescence_time() {
    let g = line();
    let k = Region::line_interval(0.0, 1.0);
    let cert_cfg = McConfig::new(FlowKind::CoalescingBm, g.clone(), 1e-3, 2000, 21);
    let grid: Vec<GraphPoint> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&x| g.from_signed(x)).collect();
    let cert = certify_constants(&cert_cfg, &k, &grid, 1.0, 2.0, Some(100)).unwrap();
    // meeting alone happens with probability ~0.48 at this horizon
    assert!(cert.p > 0.2 && cert.p < 0.5, "{cert:?}");
    assert_eq!(cert.c2, cert.c1);
    assert!((cert.c1 - 4.0 / cert.p).abs() < 1e-12);

    let cfg = McConfig::new(FlowKind::CoalescingBm, g.clone(), 1e-5, 1000, 22);
    let pts = unit_grid(&g, 32);
    let s = coalescence_times(&cfg, &pts, 4, &k, 1.0).unwrap();
    let rep = coalescence_report(&s, &cert);
    assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");
    let first = coalescence_times(&cfg, &pts, 31, &k, 1.0).unwrap();
    for r in geometric_tail(&first, &cert, 5).unwrap() {
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
    }
    assert!(geometric_tail(&s, &cert, 2).is_err());
}

#[test]
fn already_at_m_points_means_zero_time() {
    let g = line();
    let cfg = McConfig::new(FlowKind::CoalescingBm, g.clone(), 1e-3, 50, 1);
    let pts = unit_grid(&g, 4);
    let s = coalescence_times(&cfg, &pts, 4, &Region::line_interval(0.0, 1.0), 1.0).unwrap();
    assert!(s.times.iter().all(|&t| t == 0.0));
    assert!(coalescence_times(&cfg, &pts, 5, &Region::line_interval(0.0, 1.0), 1.0).is_err());
}

#[test]
fn distinct_points_decrease() {
    let g = line();
    let pts: Vec<GraphPoint> = (0..100).map(|i| g.from_signed(i as f64 / 99.0)).collect();
    for kind in [FlowKind::CoalescingBm, FlowKind::Tanaka] {
        let cfg = McConfig::new(kind, g.clone(), 1e-3, 20, 7);
        let reps = distinct_points_curve(&cfg, &pts, None, &[0.01, 0.1, 1.0]).unwrap();
        assert_eq!(reps.len(), 4);
        assert!(reps[0].estimate <= 100.0);
        assert_eq!(reps[3].verdict, Verdict::Pass, "{reps:?}");
    }
    // right after the start the count is the number of starts
    let cfg = McConfig::new(FlowKind::CoalescingBm, g.clone(), 1e-6, 5, 7);
    let reps = distinct_points_curve(&cfg, &pts, None, &[1e-6]).unwrap();
    assert_eq!(reps[0].estimate, 100.0);
}

#[test]
fn far_exit_is_never_seen_in_small_time() {
    // P[sup |W| > 1 on [0, 0.01]] <= 4 (1 - Phi(10)), about 3e-23
    let bound = 4.0 * (1.0 - Normal::standard().cdf(10.0));
    assert!(bound < 1e-20);
    let g = line();
    let cfg = McConfig::new(FlowKind::CoalescingBm, g.clone(), 1e-4, 2000, 2);
    let reps = small_time_exit_curve(&cfg, &[g.from_signed(0.0)], 1.0, &[0.01], 0.1).unwrap();
    assert_eq!(reps[0].estimate, 0.0);
    assert!(small_time_exit_curve(&cfg, &[g.from_signed(0.0)], 0.0, &[0.01], 0.1).is_err());
    assert!(small_time_exit_curve(&cfg, &[g.from_signed(0.0)], 1.0, &[0.01, 0.02], 0.1).is_err());
}

#[test]
fn walsh_exit_rate_decreases_along_the_ladder() {
    let g = star3();
    let cfg = McConfig::new(FlowKind::Walsh, g.clone(), 1e-4, 2000, 8);
    let starts = [g.star_point(0, 0.0), g.star_point(1, 0.3)];
    let reps = small_time_exit_curve(&cfg, &starts, 0.5, &[0.1, 0.05, 0.025, 0.0125], 0.5).unwrap();
    for w in reps[..4].windows(2) {
        assert!(w[1].estimate < w[0].estimate, "{reps:?}");
    }
    assert_eq!(reps[4].verdict, Verdict::Pass);
}

#[test]
fn ks_statistic_known_cases() {
    assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), 0.0);
    assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
    assert_eq!(ks_statistic(&[1.0, 3.0], &[2.0, 4.0]), 0.5);
    assert!((ks_threshold(100, 100, 0.01) - 1.627_61 * 0.02f64.sqrt()).abs() < 1e-5);
}

#[test]
fn walsh_scaling_from_the_vertex_is_reflected_bm() {
    let g = star3();
    let n = 4000;
    let rep = scaling_check_walsh(g.clone(), 2.0, g.star_point(0, 0.0), 1.0, 200, n, 31).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");
    // one-sample check of the direct side against |N(0, 1)|
    let cfg = McConfig::new(FlowKind::Walsh, g.clone(), 1.0 / 200.0, n, 32);
    let radii: Vec<f64> = (0..n as u64)
        .map(|i| {
            let noise = crate::sde_flows::Noise::new(32).trial(i);
            super::systems::with_system(&cfg, noise, 200, &[g.star_point(0, 0.0)], Final).unwrap()
        })
        .collect();
    let mut sorted = radii.clone();
    sorted.sort_by(f64::total_cmp);
    let phi = Normal::standard();
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let f = 2.0 * phi.cdf(r) - 1.0;
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // discrete reflection lags the continuous one by O(sqrt(dt))
    assert!(d < 0.05, "{d}");
}

struct Final;

impl super::systems::Visit for Final {
    type Out = f64;
    fn run<M: crate::sde_flows::Motion>(self, mut sys: crate::sde_flows::ParticleSystem<M>) -> crate::Result<f64> {
        for _ in 0..200 {
            sys.step()?;
        }
        Ok(sys.motion().graph().radius(&sys.classes()[0].point))
    }
}

#[test]
fn unit_scaling_gives_a_small_statistic() {
    let g = star3();
    let rep = scaling_check_walsh(g.clone(), 1.0, g.star_point(1, 1.0), 1.0, 100, 2000, 4).unwrap();
    assert!(rep.estimate < rep.target.unwrap().reference());
}

#[test]
fn reports_round_trip_through_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let reps = vec![
        EstimateReport::proportion("a", 3, 10).with_target(Target::AtLeast { bound: 0.1 }),
        EstimateReport::mean("b", &[1.0, 2.0, 4.0]).with_note("n"),
    ];
    write_reports_json(&reps, &dir.path().join("r.json")).unwrap();
    assert_eq!(read_reports_json(&dir.path().join("r.json")).unwrap(), reps);
    write_reports_csv(&reps, std::fs::File::create(dir.path().join("r.csv")).unwrap()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("name,estimate,ci_lo,ci_hi,target,verdict\n"));
    assert_eq!(csv.lines().count(), 3);
}

proptest! {
    #[test]
    fn wilson_interval_is_a_subinterval_of_unit(n in 1usize..5000, frac in 0.0f64..=1.0) {
        let hits = ((n as f64) * frac).floor() as usize;
        let (lo, hi) = wilson(hits, n);
        let p = hits as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn ks_is_symmetric_and_bounded(a in prop::collection::vec(-5.0f64..5.0, 1..40),
                                   b in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        let d = ks_statistic(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_statistic(&b, &a));
    }
}

use super::*;
use crate::dp::NoiseSource;
use crate::grid::Point;
use crate::ingest::RawTrajectory;
use proptest::prelude::*;

fn dom() -> SpatioTemporalDomain {
    SpatioTemporalDomain::new(0.0, 2.0, 0.0, 2.0, 0.0, 14_400.0).unwrap()
}

fn traj(id: &str, pts: &[(f64, f64, f64)]) -> RawTrajectory {
    RawTrajectory {
        id: id.into(),
        points: pts.iter().map(|&(x, y, t)| Point::new(x, y, t)).collect(),
    }
}

fn ds(trs: Vec<RawTrajectory>) -> RawDataset {
    RawDataset {
        trajectories: trs,
        source: "test".into(),
    }
}

fn random_ds(rng: &mut NoiseSource, n: usize) -> RawDataset {
    ds((0..n)
        .map(|i| {
            let len = 1 + (rng.uniform() * 10.0) as usize;
            let pts: Vec<(f64, f64, f64)> = (0..len)
                .map(|k| (rng.uniform() * 2.0, rng.uniform() * 2.0, k as f64 * 600.0))
                .collect();
            traj(&format!("r{i}"), &pts)
        })
        .collect())
}

#[test]
fn jsd_frozen_values() {
    // mpmath, 25 digits
    let v = jsd(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
    assert!((v - 0.311_278_124_459_132_8).abs() < 1e-12);
    assert_eq!(jsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
    assert_eq!(jsd(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
}

#[test]
fn jsd_rejects_bad_input() {
    assert!(matches!(
        jsd(&[1.0], &[0.5, 0.5]),
        Err(MetricsError::DimensionMismatch { .. })
    ));
    assert!(matches!(
        jsd(&[0.5, 0.4], &[0.5, 0.5]),
        Err(MetricsError::NotADistribution(_))
    ));
    assert!(matches!(
        jsd(&[1.5, -0.5], &[0.5, 0.5]),
        Err(MetricsError::NotADistribution(_))
    ));
}

#[test]
fn avre_hand_example() {
    assert_eq!(avre_from_popularity(&[10, 0], &[5, 5], 2.0).unwrap(), 1.5);
    assert_eq!(avre_from_popularity(&[0, 0], &[0, 0], 0.0).unwrap(), 0.0);
}

#[test]
fn eval_grid_cells() {
    let g = EvalGrid::new(2, 2).unwrap();
    assert_eq!(g.cell(0.1, 0.1, &dom()), Some(0));
    assert_eq!(g.cell(1.5, 0.1, &dom()), Some(1));
    assert_eq!(g.cell(0.1, 1.5, &dom()), Some(2));
    assert_eq!(g.cell(2.0, 2.0, &dom()), Some(3));
    assert_eq!(g.cell(2.1, 0.0, &dom()), None);
    assert!(EvalGrid::new(0, 3).is_err());
}

#[test]
fn sixteen_quarter_hour_bins() {
    let d = ds(vec![traj(
        "a",
        &[
            (0.5, 0.5, 0.0),
            (0.5, 0.5, 899.0),
            (0.5, 0.5, 14_400.0),
            (0.5, 0.5, 20_000.0),
        ],
    )]);
    let h = temporal_visit_distribution(&d, &dom(), 900.0).unwrap();
    assert_eq!(h.len(), 16);
    assert!((h[0] - 2.0 / 3.0).abs() < 1e-15);
    assert!((h[15] - 1.0 / 3.0).abs() < 1e-15);
    let empty = ds(vec![traj("a", &[(0.5, 0.5, 99_999.0)])]);
    assert_eq!(
        temporal_visit_distribution(&empty, &dom(), 900.0),
        Err(MetricsError::EmptyDataset)
    );
}

#[test]
fn length_error_frozen_fixture() {
    let real = ds((2..22)
        .map(|l| traj(&format!("d{l}"), &vec![(0.5, 0.5, 0.0); l]))
        .collect());
    let syn = ds((0..5)
        .map(|i| traj(&format!("s{i}"), &[(0.5, 0.5, 0.0); 2]))
        .collect());
    let v = length_error(&real, &syn, 20).unwrap();
    // mpmath, 25 digits
    assert!((v - 0.854_997_400_484_832).abs() < 1e-12);
}

#[test]
fn length_error_degenerate_range() {
    let real = ds((0..4)
        .map(|i| traj(&format!("d{i}"), &[(0.5, 0.5, 0.0); 3]))
        .collect());
    assert_eq!(length_error(&real, &real, 20).unwrap(), 0.0);
    let syn = ds(vec![traj("s", &[(0.5, 0.5, 0.0); 5])]);
    assert_eq!(length_error(&real, &syn, 20).unwrap(), 1.0);
}

#[test]
fn trip_error_disjoint_is_one() {
    let a = ds(vec![traj("a", &[(0.1, 0.1, 0.0), (1.9, 1.9, 1.0)])]);
    let b = ds(vec![traj("b", &[(1.9, 1.9, 0.0), (0.1, 0.1, 1.0)])]);
    assert_eq!(
        trip_error(&a, &b, &dom(), &EvalGrid::new(2, 2).unwrap()).unwrap(),
        1.0
    );
}

#[test]
fn self_comparison_is_perfect() {
    let mut rng = NoiseSource::new(3, 0);
    let d = random_ds(&mut rng, 60);
    let r = evaluate_all(&d, &d, &dom(), &EvalParams::default()).unwrap();
    assert_eq!(r.temporal_jsd, 0.0);
    assert_eq!(r.location_avre, 0.0);
    assert_eq!(r.location_kt, 1.0);
    assert_eq!(r.fp_kt, 1.0);
    assert_eq!(r.trip_error, 0.0);
    assert_eq!(r.length_error, 0.0);
}

#[test]
fn plot_csv_layout() {
    let s = temporal_plot_csv(&[0.25, 0.75], 100.0, 900.0);
    assert_eq!(s, "bin_start_seconds,probability\n100,0.25\n1000,0.75\n");
}

#[test]
fn report_mean() {
    let mut rng = NoiseSource::new(4, 0);
    let d = random_ds(&mut rng, 30);
    let s = random_ds(&mut rng, 30);
    let r = evaluate_all(&d, &s, &dom(), &EvalParams::default()).unwrap();
    let m = MetricsReport::mean(&[r.clone(), r.clone()]).unwrap();
    assert_eq!(m, r);
    assert!(MetricsReport::mean(&[]).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_bounded_and_symmetric(seed in any::<u64>()) {
        let mut rng = NoiseSource::new(seed, 0);
        let a = random_ds(&mut rng, 25);
        let b = random_ds(&mut rng, 25);
        let g = EvalGrid::new(4, 4).unwrap();
        let d = dom();
        let t1 = trip_error(&a, &b, &d, &g).unwrap();
        let t2 = trip_error(&b, &a, &d, &g).unwrap();
        prop_assert!((0.0..=1.0).contains(&t1));
        prop_assert!((t1 - t2).abs() < 1e-12);
        let l = length_error(&a, &b, 20).unwrap();
        prop_assert!((0.0..=1.0).contains(&l));
        let k = location_kt(&a, &b, &d, &g).unwrap();
        prop_assert!((-1.0..=1.0).contains(&k));
        let ha = temporal_visit_distribution(&a, &d, 900.0).unwrap();
        let hb = temporal_visit_distribution(&b, &d, 900.0).unwrap();
        prop_assert!((jsd(&ha, &hb).unwrap() - jsd(&hb, &ha).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn avre_nonincreasing_in_sanity_bound(seed in any::<u64>(), lo in 0.0f64..5.0, extra in 0.0f64..5.0) {
        let mut rng = NoiseSource::new(seed, 1);
        let a = random_ds(&mut rng, 20);
        let b = random_ds(&mut rng, 20);
        let g = EvalGrid::new(3, 3).unwrap();
        let x = location_avre(&a, &b, &dom(), &g, lo).unwrap();
        let y = location_avre(&a, &b, &dom(), &g, lo + extra).unwrap();
        prop_assert!(y <= x + 1e-12);
    }
}

#[test]
fn report_roundtrips_through_json() {
    let mut rng = NoiseSource::new(8, 0);
    let d = random_ds(&mut rng, 30);
    let s = random_ds(&mut rng, 30);
    let r = evaluate_all(&d, &s, &dom(), &EvalParams::default()).unwrap();
    let text = serde_json::to_string(&r).unwrap();
    assert_eq!(serde_json::from_str::<MetricsReport>(&text).unwrap(), r);
}

use dptraj::data::{
    arc_length_reparametrize, bin_raw, make_multimodal, marginalize, mode_curve, nearest_mode, simulate_sde, Drift,
    InitialLaw, RawRecord, SdeSpec, TrajectoryPath, TrajectorySet, MODE_COUNT,
};
use dptraj::grid::TimeGrid;
use dptraj::points::PointCloud;
use dptraj::rng::RngKey;
use dptraj::Error;
use proptest::prelude::*;

fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (mean, v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn brownian_variance_grows_linearly() {
    let spec = SdeSpec {
        drift: Drift::Zero,
        tau: 0.7,
        initial: InitialLaw::PointMass { x: vec![0.0] },
        dim: 1,
    };
    let grid = TimeGrid::new(vec![0.25, 0.5, 1.0]).unwrap();
    let set = simulate_sde::<f64>(&spec, 100_000, &grid, 1, &RngKey::root(1)).unwrap();
    let snaps = set.marginals_at(grid.times()).unwrap();
    for (snap, &t) in snaps.iter().zip(grid.times()) {
        let (mean, var) = moments(snap.as_flat());
        assert!(mean.abs() < 4.0 * (0.7 * t / 1e5).sqrt());
        assert!((var - 0.7 * t).abs() <= 0.03 * 0.7 * t, "t={t}: {var}");
    }
}

#[test]
fn quadratic_well_mean_decays_exponentially() {
    let spec = SdeSpec {
        drift: Drift::QuadraticWell {
            a: 1.0,
            center_start: vec![0.0],
            center_end: vec![0.0],
        },
        tau: 0.1,
        initial: InitialLaw::PointMass { x: vec![1.0] },
        dim: 1,
    };
    let grid = TimeGrid::new(vec![0.5, 1.0]).unwrap();
    let set = simulate_sde::<f64>(&spec, 10_000, &grid, 100, &RngKey::root(2)).unwrap();
    let (mean, _) = moments(set.marginals_at(&[1.0]).unwrap()[0].as_flat());
    assert!((mean - (-2.0f64).exp()).abs() < 1e-2, "{mean}");
}

#[test]
fn simulation_is_reproducible() {
    let spec = SdeSpec {
        drift: Drift::Zero,
        tau: 1.0,
        initial: InitialLaw::Gaussian {
            mean: vec![0.0, 0.0],
            std: 0.1,
        },
        dim: 2,
    };
    let grid = TimeGrid::uniform(4, 0.0, 1.0).unwrap();
    let a = simulate_sde::<f64>(&spec, 50, &grid, 3, &RngKey::root(7)).unwrap();
    let b = simulate_sde::<f64>(&spec, 50, &grid, 3, &RngKey::root(7)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn one_point_marginalization_spreads_evenly() {
    let grid = TimeGrid::uniform(5, 0.0, 1.0).unwrap();
    let paths = (0..100_000u64)
        .map(|id| TrajectoryPath::new(id, vec![0.0, 1.0], PointCloud::from_rows(&[[0.0], [1.0]]).unwrap()).unwrap())
        .collect();
    let set = TrajectorySet::new(1, paths).unwrap();
    let ds = marginalize(&set, &grid, true, &RngKey::root(3)).unwrap();
    assert_eq!(ds.total_count(), 100_000);
    for (i, &c) in ds.counts().iter().enumerate() {
        assert!((c as f64 - 20_000.0).abs() <= 1_000.0, "index {i}: {c}");
        // Linear interpolation of the identity path.
        assert!(ds.snapshot(i).iter().all(|p| p[0] == grid.time(i)));
    }
    let full = marginalize(&set, &grid, false, &RngKey::root(3)).unwrap();
    assert_eq!(full.counts(), vec![100_000; 5]);
}

#[test]
fn multimodal_noise_and_modes() {
    let grid = TimeGrid::uniform(5, 0.0, 1.0).unwrap();
    let noise_var = 0.01;
    let mm = make_multimodal::<f64>(1000, &grid, noise_var, &RngKey::root(4)).unwrap();
    assert_eq!(mm.dataset.counts(), vec![3000; 5]);
    for m in 0..MODE_COUNT {
        assert_eq!(mm.modes.iter().filter(|&&x| x == m).count(), 1000);
    }
    let mut residuals = Vec::new();
    for (i, &t) in grid.times().iter().enumerate() {
        for (n, p) in mm.dataset.snapshot(i).iter().enumerate() {
            let truth = mm.truth.paths[n].value_at(t).unwrap();
            assert_eq!(truth, mode_curve(mm.modes[n], t).to_vec());
            residuals.extend([p[0] - truth[0], p[1] - truth[1]]);
        }
    }
    let (mean, var) = moments(&residuals);
    assert!(mean.abs() <= 0.002, "{mean}");
    assert!((var - noise_var).abs() <= 0.03 * noise_var, "{var}");
}

#[test]
fn modes_share_endpoints_and_separate_inside() {
    for m in 0..MODE_COUNT {
        let a = mode_curve(m, 0.0);
        let b = mode_curve(m, 1.0);
        assert!((a[0] + 1.0).abs() < 1e-12 && a[1].abs() < 1e-12);
        assert!((b[0] - 1.0).abs() < 1e-12 && b[1].abs() < 1e-12);
        assert_eq!(nearest_mode(&mode_curve(m, 0.5), 0.5), m);
    }
}

fn rec(id: u64, s: f64, x: f64) -> RawRecord {
    RawRecord { id, s, x: vec![x] }
}

#[test]
fn binning_rounds_to_nearest_with_ties_down() {
    let grid = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
    let raw = vec![rec(1, 0.25, 1.0), rec(2, 0.26, 2.0), rec(3, 0.9, 3.0), rec(4, 0.75, 4.0)];
    let ds = bin_raw::<f64>(&raw, &grid, &RngKey::root(0)).unwrap();
    assert_eq!(ds.snapshot(0).as_flat(), &[1.0]);
    assert_eq!(ds.snapshot(1).as_flat(), &[2.0, 4.0]);
    assert_eq!(ds.snapshot(2).as_flat(), &[3.0]);
}

#[test]
fn binning_rejects_bad_input() {
    let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
    let empty_slot = bin_raw::<f64>(&[rec(1, 0.1, 0.0)], &grid, &RngKey::root(0));
    assert!(matches!(empty_slot, Err(Error::Binning(_))));
    let unordered = bin_raw::<f64>(&[rec(1, 0.5, 0.0), rec(1, 0.5, 1.0)], &grid, &RngKey::root(0));
    assert!(matches!(unordered, Err(Error::Ingestion(_))));
    let outside = bin_raw::<f64>(&[rec(1, 1.5, 0.0)], &grid, &RngKey::root(0));
    assert!(matches!(outside, Err(Error::Ingestion(_))));
}

#[test]
fn arc_length_stamps() {
    let raw = vec![
        RawRecord { id: 0, s: 0.0, x: vec![0.0, 0.0] },
        RawRecord { id: 0, s: 0.1, x: vec![3.0, 4.0] },
        RawRecord { id: 0, s: 0.2, x: vec![3.0, 9.0] },
    ];
    let out = arc_length_reparametrize(&raw).unwrap();
    let s: Vec<f64> = out.iter().map(|r| r.s).collect();
    assert_eq!(s, vec![0.0, 0.5, 1.0]);
}

proptest! {
    #[test]
    fn binned_points_come_from_the_input(
        raw in prop::collection::vec((0u64..20, 0.0f64..=1.0, -5.0f64..5.0), 30..80),
        seed in any::<u64>(),
    ) {
        // Keep strictly increasing stamps per id.
        let mut raw: Vec<RawRecord> = raw.into_iter().map(|(id, s, x)| rec(id, s, x)).collect();
        raw.sort_by(|a, b| (a.id, a.s).partial_cmp(&(b.id, b.s)).unwrap());
        raw.dedup_by(|a, b| a.id == b.id && a.s == b.s);
        let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        match bin_raw::<f64>(&raw, &grid, &RngKey::root(seed)) {
            Ok(ds) => {
                let ids: std::collections::BTreeSet<u64> = raw.iter().map(|r| r.id).collect();
                prop_assert_eq!(ds.total_count(), ids.len());
                for snap in ds.snapshots() {
                    for p in snap.iter() {
                        prop_assert!(raw.iter().any(|r| r.x[0] == p[0]));
                    }
                }
            }
            Err(e) => prop_assert!(matches!(e, Error::Binning(_))),
        }
    }
}

use dptraj::dataset::TemporalDataset;
use dptraj::grid::TimeGrid;
use dptraj::init::{MarginalStart, WarmStart};
use dptraj::points::PointCloud;
use dptraj::rng::RngKey;
use dptraj::subsample::{max_gap_statistics, restrict_dataset, subsample_grid, GapStatistics, PrivateEndpoints};
use dptraj::Error;
use proptest::prelude::*;

#[test]
fn interior_indices_are_uniform() {
    let (t, z, trials) = (100, 8, 20_000);
    let mut hits = vec![0usize; t];
    for n in 0..trials {
        let s = subsample_grid(t, z, false, &RngKey::root(n as u64)).unwrap();
        assert_eq!(s.len(), z);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        for i in s {
            hits[i] += 1;
        }
    }
    assert_eq!(hits[0] + hits[t - 1], 0);
    let p = z as f64 / (t - 2) as f64;
    let sd = (p * (1.0 - p) / trials as f64).sqrt();
    for &h in &hits[1..t - 1] {
        assert!((h as f64 / trials as f64 - p).abs() <= 4.5 * sd);
    }
}

#[test]
fn endpoints_are_kept_on_request() {
    for n in 0..200 {
        let s = subsample_grid(30, 5, true, &RngKey::root(n)).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!((s[0], s[4]), (0, 29));
    }
    assert!(subsample_grid(10, 9, false, &RngKey::root(0)).is_err());
    assert!(subsample_grid(10, 8, false, &RngKey::root(0)).is_ok());
    assert!(subsample_grid(10, 11, true, &RngKey::root(0)).is_err());
}

#[test]
fn max_gap_below_envelope() {
    let (t, z) = (100, 10);
    let stats = max_gap_statistics(t, z, 4000, &RngKey::root(1)).unwrap();
    for g in 1..=t {
        let p = stats.tail(g);
        let sd = (p * (1.0 - p) / 4000.0).sqrt();
        assert!(p <= GapStatistics::envelope(t, z, g) + 3.0 * sd, "g={g}: {p}");
    }
    let ratio = stats.mean_max_gap / ((t as f64 / z as f64) * (z as f64).ln());
    assert!(ratio > 0.3 && ratio < 3.0, "{ratio}");
    // Every trial splits 0..T into z + 1 pieces.
    assert!(stats.max_gaps.iter().all(|&g| g >= t.div_ceil(z + 1) && g <= t - z));
}

fn ds(t: usize) -> TemporalDataset<f64> {
    let grid = TimeGrid::uniform(t, 0.0, 1.0).unwrap();
    let snaps = (0..t).map(|i| PointCloud::repeat(&[i as f64], 2 + i)).collect();
    TemporalDataset::new(grid, snaps).unwrap()
}

#[test]
fn restriction_keeps_times_and_snapshots() {
    let full = ds(6);
    let all: Vec<usize> = (0..6).collect();
    assert_eq!(restrict_dataset(&full, &all, None, false).unwrap(), full);
    let r = restrict_dataset(&full, &[1, 3, 4], None, true).unwrap();
    assert_eq!(r.grid().times(), &[0.2, 0.6, 0.8]);
    assert_eq!(r.snapshot(1), full.snapshot(3));
    assert!(matches!(restrict_dataset(&full, &[0, 3], None, true), Err(Error::Composition(_))));
}

#[test]
fn private_endpoints_replace_boundary_snapshots() {
    let full = ds(4);
    let ws = WarmStart {
        times: full.grid().times().to_vec(),
        marginals: vec![
            MarginalStart {
                centers: vec![vec![-7.0]],
                weights: vec![1.0],
            };
            4
        ],
        ledger: Vec::new(),
    };
    let src = PrivateEndpoints {
        warm_start: &ws,
        m: 5,
        jitter_std: 0.0,
        key: RngKey::root(0),
    };
    let r = restrict_dataset(&full, &[0, 2, 3], Some(&src), true).unwrap();
    assert_eq!(r.snapshot(0), &PointCloud::repeat(&[-7.0], 5));
    assert_eq!(r.snapshot(1), full.snapshot(2));
    assert_eq!(r.snapshot(2), &PointCloud::repeat(&[-7.0], 5));
}

proptest! {
    #[test]
    fn restriction_telescopes(mask in prop::collection::vec(any::<bool>(), 10), inner in prop::collection::vec(any::<bool>(), 10)) {
        let full = ds(10);
        let s1: Vec<usize> = (0..10).filter(|&i| mask[i]).collect();
        prop_assume!(s1.len() >= 2);
        let s2: Vec<usize> = (0..s1.len()).filter(|&j| inner[j]).collect();
        prop_assume!(s2.len() >= 2);
        let composed: Vec<usize> = s2.iter().map(|&j| s1[j]).collect();
        let a = restrict_dataset(&restrict_dataset(&full, &s1, None, false).unwrap(), &s2, None, false).unwrap();
        let b = restrict_dataset(&full, &composed, None, false).unwrap();
        prop_assert_eq!(a, b);
    }
}

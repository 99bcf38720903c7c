use dptraj::config::RunConfig;
use dptraj::data::{simulate_sde, Drift, InitialLaw, SdeSpec};
use dptraj::dataset::ParticleSystem;
use dptraj::grid::TimeGrid;
use dptraj::io::{
    read_dataset, read_grid, read_json, read_metrics, read_particles, read_trajectories, write_dataset, write_grid,
    write_json, write_metrics, write_particles, write_trajectories, MetricRow, PlansFile,
};
use dptraj::mfld::solve_plans;
use dptraj::points::PointCloud;
use dptraj::rng::RngKey;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn system(seed: u64) -> ParticleSystem<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = TimeGrid::new(vec![0.0, 0.1, 0.35, 1.0]).unwrap();
    let clouds = (0..4)
        .map(|_| PointCloud::from_flat(2, (0..10).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap())
        .collect();
    ParticleSystem::new(grid, clouds).unwrap()
}

#[test]
fn particles_round_trip_byte_for_byte() {
    let ps = system(1);
    let mut a = Vec::new();
    write_particles(&mut a, &ps).unwrap();
    let back = read_particles::<_, f64>(a.as_slice(), ps.grid()).unwrap();
    assert_eq!(back, ps);
    let mut b = Vec::new();
    write_particles(&mut b, &back).unwrap();
    assert_eq!(a, b);

    let mut g = Vec::new();
    write_grid(&mut g, ps.grid()).unwrap();
    assert_eq!(&read_grid::<_, f64>(g.as_slice()).unwrap(), ps.grid());
}

#[test]
fn datasets_and_trajectories_round_trip() {
    let ds = system(2).as_dataset();
    let mut a = Vec::new();
    write_dataset(&mut a, &ds).unwrap();
    assert_eq!(read_dataset::<_, f64>(a.as_slice(), ds.grid()).unwrap(), ds);

    let spec = SdeSpec {
        drift: Drift::Zero,
        tau: 1.0,
        initial: InitialLaw::PointMass { x: vec![0.0, 0.0] },
        dim: 2,
    };
    let set = simulate_sde::<f64>(&spec, 5, &TimeGrid::uniform(3, 0.0, 1.0).unwrap(), 2, &RngKey::root(0)).unwrap();
    let mut t = Vec::new();
    write_trajectories(&mut t, &set).unwrap();
    let back = read_trajectories::<_, f64>(t.as_slice()).unwrap();
    assert_eq!(back, set);
    let mut t2 = Vec::new();
    write_trajectories(&mut t2, &back).unwrap();
    assert_eq!(t, t2);
}

#[test]
fn plans_file_round_trips() {
    let ps = system(3);
    let plans = solve_plans(&ps, 0.2, 1e-10, 10_000, None).unwrap();
    let file = PlansFile {
        times: ps.grid().times().to_vec(),
        bridge_tau: 0.2,
        plans,
    };
    let mut a = Vec::new();
    write_json(&mut a, &file).unwrap();
    let back: PlansFile = read_json(a.as_slice()).unwrap();
    assert_eq!(back, file);
}

#[test]
fn metrics_round_trip() {
    let rows = vec![
        MetricRow {
            time_index: Some(0),
            metric: "w2".into(),
            value: 0.125,
        },
        MetricRow {
            time_index: None,
            metric: "w2".into(),
            value: 1.0 / 3.0,
        },
    ];
    let mut a = Vec::new();
    write_metrics(&mut a, &rows).unwrap();
    assert!(String::from_utf8(a.clone()).unwrap().starts_with("time_index,metric,value\n0,w2,0.125\nmean,w2,"));
    assert_eq!(read_metrics(a.as_slice()).unwrap(), rows);
}

#[test]
fn config_parsing_is_strict() {
    let cfg = RunConfig::from_toml("seed = 3\nclip = inf\ninject_noise = false\n").unwrap();
    assert_eq!(cfg.seed, 3);
    assert!(cfg.clip.is_infinite());
    assert!(RunConfig::from_toml("sede = 3\n").is_err());
    assert!(RunConfig::from_toml("clip = inf\n").is_err());
    assert!(RunConfig::from_toml("subsample_rate = 0.0\n").is_err());
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
}

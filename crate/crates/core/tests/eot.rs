use dptraj::eot::{
    barycentric_project, compose_plans, exact_ot, exact_ot_with_duals, sinkhorn, uniform_weights, CostMatrix,
    Direction, SinkhornOptions,
};
use dptraj::points::PointCloud;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointCloud<f64> {
    let flat = (0..n * d).map(|_| rng.random::<f64>()).collect();
    PointCloud::from_flat(d, flat).unwrap()
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn tight() -> SinkhornOptions<f64> {
    SinkhornOptions::new(1e-12, 1_000_000)
}

#[test]
fn exact_lp_satisfies_dual_certificate() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..30 {
        let n = 2 + trial % 7;
        let m = 1 + (trial * 3) % 9;
        let x = random_cloud(&mut rng, n, 2);
        let y = random_cloud(&mut rng, m, 2);
        let c = CostMatrix::half_sq_euclidean(&x, &y);
        let a = random_weights(&mut rng, n);
        let b = random_weights(&mut rng, m);
        let sol = exact_ot_with_duals(&a, &b, &c).unwrap();
        assert!(sol.plan.residual < 1e-12, "residual {}", sol.plan.residual);
        for j in 0..n {
            for k in 0..m {
                assert!(sol.u[j] + sol.v[k] <= c.get(j, k) + 1e-12);
            }
        }
        let dual: f64 = a.iter().zip(&sol.u).map(|(w, u)| w * u).sum::<f64>()
            + b.iter().zip(&sol.v).map(|(w, v)| w * v).sum::<f64>();
        assert!((dual - sol.plan.transport_cost).abs() < 1e-12, "gap {}", dual - sol.plan.transport_cost);
    }
}

#[test]
fn sinkhorn_duals_reconstruct_plan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let x = random_cloud(&mut rng, 6, 2);
        let y = random_cloud(&mut rng, 7, 2);
        let c = CostMatrix::half_sq_euclidean(&x, &y);
        let a = random_weights(&mut rng, 6);
        let b = random_weights(&mut rng, 7);
        let p = sinkhorn(&a, &b, &c, 0.05, &tight()).unwrap();
        assert!(p.converged);
        assert!(p.residual <= 1e-12 + 1e-15);
        let g = p.reconstruct_from_duals(&c).unwrap();
        for (r, q) in g.iter().zip(&p.gamma) {
            assert!((r - q).abs() <= 1e-6 * q.abs());
            assert!(*q > 0.0);
        }
        let d = p.duals.as_ref().unwrap();
        assert!(d.phi.iter().sum::<f64>().abs() < 1e-12);
    }
}

#[test]
fn duals_satisfy_fixed_point_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_cloud(&mut rng, 5, 3);
    let y = random_cloud(&mut rng, 5, 3);
    let c = CostMatrix::half_sq_euclidean(&x, &y);
    let w = uniform_weights::<f64>(5);
    let eps = 0.1;
    let p = sinkhorn(&w, &w, &c, eps, &tight()).unwrap();
    let d = p.duals.unwrap();
    for j in 0..5 {
        let s: f64 = (0..5).map(|k| w[k] * ((d.psi[k] - c.get(j, k)) / eps).exp()).sum();
        assert!((d.phi[j] + eps * s.ln()).abs() < 1e-9);
    }
    for k in 0..5 {
        let s: f64 = (0..5).map(|j| w[j] * ((d.phi[j] - c.get(j, k)) / eps).exp()).sum();
        assert!((d.psi[k] + eps * s.ln()).abs() < 1e-9);
    }
}

#[test]
fn cost_translation_leaves_plan_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_cloud(&mut rng, 6, 2);
    let y = random_cloud(&mut rng, 6, 2);
    let c = CostMatrix::half_sq_euclidean(&x, &y);
    let w = uniform_weights::<f64>(6);
    let p0 = sinkhorn(&w, &w, &c, 0.1, &tight()).unwrap();
    let p1 = sinkhorn(&w, &w, &c.shifted(3.7), 0.1, &tight()).unwrap();
    for (g0, g1) in p0.gamma.iter().zip(&p1.gamma) {
        assert!((g0 - g1).abs() < 1e-10);
    }
    let d0 = p0.duals.unwrap();
    let d1 = p1.duals.unwrap();
    // phi is pinned by mean(phi) = 0, so the whole constant moves into psi.
    for (a, b) in d0.phi.iter().zip(&d1.phi) {
        assert!((a - b).abs() < 1e-9);
    }
    for (a, b) in d0.psi.iter().zip(&d1.psi) {
        assert!((b - a - 3.7).abs() < 1e-9);
    }
}

#[test]
fn entropic_cost_sandwiches_exact_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let x = random_cloud(&mut rng, 10, 2);
        let y = random_cloud(&mut rng, 10, 2);
        let c = CostMatrix::half_sq_euclidean(&x, &y);
        let w = uniform_weights::<f64>(10);
        let exact = exact_ot(&w, &w, &c).unwrap().transport_cost;
        let mut prev = f64::INFINITY;
        for eps in [1.0, 0.3, 0.1, 0.03, 0.01, 1e-3] {
            let p = sinkhorn(&w, &w, &c, eps, &tight()).unwrap();
            assert!(exact <= p.transport_cost + 1e-12);
            assert!(p.transport_cost <= prev + 1e-9, "not decreasing at eps={eps}");
            prev = p.transport_cost;
        }
        let p = sinkhorn(&w, &w, &c, 1e-4, &SinkhornOptions::new(1e-9, 1_000_000)).unwrap();
        assert!(p.transport_cost >= exact - 1e-9);
        assert!(p.transport_cost - exact <= 1e-2);
    }
}

#[test]
fn barycentric_projection_cases() {
    let x = PointCloud::<f64>::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
    let w = uniform_weights::<f64>(2);
    let c = CostMatrix::half_sq_euclidean(&x, &x);
    let product = sinkhorn(&w, &w, &c, 1e6, &tight()).unwrap();
    for p in barycentric_project(&product, &x, Direction::Forward).unwrap().iter() {
        assert!((p[0] - 0.5).abs() < 1e-6);
    }
    let identity = exact_ot(&w, &w, &c).unwrap();
    let f = barycentric_project(&identity, &x, Direction::Forward).unwrap();
    assert_eq!(f.as_flat(), &[0.0, 1.0]);
    let b = barycentric_project(&identity, &x, Direction::Backward).unwrap();
    assert_eq!(b.as_flat(), &[0.0, 1.0]);
}

#[test]
fn barycentric_projection_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random_cloud(&mut rng, 5, 2);
    let y = random_cloud(&mut rng, 5, 2);
    let c = CostMatrix::half_sq_euclidean(&x, &y);
    let w = uniform_weights::<f64>(5);
    let p = sinkhorn(&w, &w, &c, 0.1, &tight()).unwrap();
    let f = barycentric_project(&p, &y, Direction::Forward).unwrap();
    let b = barycentric_project(&p, &x, Direction::Backward).unwrap();
    for j in 0..5 {
        for d in 0..2 {
            let direct: f64 = (0..5).map(|k| p.gamma[j * 5 + k] * y.point(k)[d]).sum::<f64>() / w[j];
            assert!((f.point(j)[d] - direct).abs() < 1e-10);
            let direct_b: f64 = (0..5).map(|i| p.gamma[i * 5 + j] * x.point(i)[d]).sum::<f64>() / w[j];
            assert!((b.point(j)[d] - direct_b).abs() < 1e-10);
        }
    }
}

#[test]
fn composed_identity_chain_stays_on_matched_triples() {
    let x = PointCloud::<f64>::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
    let w = uniform_weights::<f64>(3);
    let c = CostMatrix::half_sq_euclidean(&x, &x);
    let id = exact_ot(&w, &w, &c).unwrap();
    let chain = compose_plans(&[id.clone(), id], 1e-12).unwrap();
    for i in 0..2 {
        for j in 0..3 {
            let row = chain.kernel_row(i, j);
            for (k, &v) in row.iter().enumerate() {
                assert_eq!(v, if j == k { 1.0 } else { 0.0 });
            }
        }
    }
}

#[test]
fn composed_product_chain_has_exact_marginals() {
    let a = vec![0.25, 0.75];
    let b = vec![0.4, 0.6];
    let cc = vec![0.1, 0.2, 0.7];
    let c1 = CostMatrix::from_fn(2, 2, |_, _| 0.0f64);
    let c2 = CostMatrix::from_fn(2, 3, |_, _| 0.0f64);
    let p1 = sinkhorn(&a, &b, &c1, 1.0, &tight()).unwrap();
    let p2 = sinkhorn(&b, &cc, &c2, 1.0, &tight()).unwrap();
    let chain = compose_plans(&[p1, p2], 1e-12).unwrap();
    let margs = chain.marginals();
    for (got, want) in margs.iter().zip([&a, &b, &cc]) {
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-14);
        }
    }
    // Independence: every kernel row equals the next marginal.
    for j in 0..2 {
        for (k, &v) in chain.kernel_row(1, j).iter().enumerate() {
            assert!((v - cc[k]).abs() < 1e-14);
        }
    }
}

#[test]
fn composed_random_chain_propagates_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let clouds: Vec<_> = (0..3).map(|_| random_cloud(&mut rng, 4, 2)).collect();
    let w = uniform_weights::<f64>(4);
    let plans: Vec<_> = clouds
        .windows(2)
        .map(|p| sinkhorn(&w, &w, &CostMatrix::half_sq_euclidean(&p[0], &p[1]), 0.05, &tight()).unwrap())
        .collect();
    let chain = compose_plans(&plans, 1e-9).unwrap();
    // Oracle: multiply the initial weights through the explicitly built kernels.
    let mut v = chain.initial.clone();
    for p in &plans {
        let rs = p.row_sums();
        let mut next = vec![0.0; 4];
        for j in 0..4 {
            for k in 0..4 {
                next[k] += v[j] * p.gamma[j * 4 + k] / rs[j];
            }
        }
        v = next;
    }
    for x in &v {
        assert!((x - 0.25).abs() < 1e-8);
    }
    let m = chain.marginals();
    for (a, b) in m[2].iter().zip(&v) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn chain_rejects_mismatched_plans() {
    let c = CostMatrix::from_fn(2, 2, |_, _| 0.0f64);
    let p1 = sinkhorn(&[0.5, 0.5], &[0.5, 0.5], &c, 1.0, &tight()).unwrap();
    let p2 = sinkhorn(&[0.9, 0.1], &[0.5, 0.5], &c, 1.0, &tight()).unwrap();
    assert!(compose_plans(&[p1, p2], 1e-6).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn sinkhorn_marginals_within_tol(seed in 0u64..10_000, n in 1usize..8, m in 1usize..8, eps in 0.01f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_cloud(&mut rng, n, 2);
        let y = random_cloud(&mut rng, m, 2);
        let a = random_weights(&mut rng, n);
        let b = random_weights(&mut rng, m);
        let c = CostMatrix::half_sq_euclidean(&x, &y);
        let tol = 1e-8;
        let p = sinkhorn(&a, &b, &c, eps, &SinkhornOptions::new(tol, 1_000_000)).unwrap();
        prop_assert!(p.converged);
        prop_assert!(p.residual <= tol);
    }
}

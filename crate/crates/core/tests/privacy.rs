use dptraj::privacy::{
    eps_for_delta, gdp_of_dpsgd, gdp_to_eps_delta, ledger_compose, normal_cdf, CompositionRule, GdpParam,
    LedgerEntry, PrivacyLedger,
};
use proptest::prelude::*;

// Independent normal CDF via the Maclaurin series of erf; accurate to ~1e-14 for |x| <= 2.
fn phi_series(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let mut term = z;
    let mut sum = z;
    let mut n = 0.0;
    while term.abs() > 1e-18 {
        n += 1.0;
        term *= -z * z / n;
        sum += term / (2.0 * n + 1.0);
    }
    0.5 + sum / std::f64::consts::PI.sqrt()
}

fn delta_oracle(mu: f64, eps: f64) -> f64 {
    phi_series(-eps / mu + mu / 2.0) - eps.exp() * phi_series(-eps / mu - mu / 2.0)
}

#[test]
fn normal_cdf_matches_series() {
    for i in -20..=20 {
        let x = i as f64 / 10.0;
        assert!((normal_cdf(x) - phi_series(x)).abs() < 1e-13, "x={x}");
    }
    // Tail values frozen from a 30-digit evaluation.
    for (x, want) in [(-2.8, 0.00255513033042793420759801642915), (-4.0, 3.16712418331199212537707567222e-5)] {
        assert!((normal_cdf(x) - want).abs() < 1e-15, "x={x}");
    }
}

#[test]
fn conversion_matches_frozen_values() {
    let cases = [
        (1.0, 1.0, 0.126936737506643945800829624758),
        (0.5, 1.0, 0.00682959498311457538423501287993),
        (2.0, 3.0, 0.183813076544472155970107270201),
        (1.0, 0.5, 0.238421708134876628318156163154),
    ];
    for (mu, eps, want) in cases {
        let got = gdp_to_eps_delta(GdpParam::new(mu).unwrap(), eps).unwrap();
        assert!((got - want).abs() < 1e-12, "mu={mu} eps={eps}: {got}");
        assert!((got - delta_oracle(mu, eps)).abs() < 1e-12);
    }
    let at_zero = gdp_to_eps_delta(GdpParam::new(1.0).unwrap(), 0.0).unwrap();
    assert!((at_zero - 0.38292492254803).abs() < 1e-12);
}

#[test]
fn dpsgd_matches_direct_arithmetic() {
    let direct = 0.01 * (100.0 * (1f64.exp() - 1.0)).sqrt();
    let mu = gdp_of_dpsgd(0.01, 100, 1.0).unwrap().mu;
    assert!((mu - direct).abs() < 1e-15);
    assert!((mu - 0.131086).abs() < 1e-5);
}

#[test]
fn delta_decreases_in_eps_and_increases_in_mu() {
    let one = GdpParam::new(1.0).unwrap();
    let mut prev = f64::INFINITY;
    for i in 0..=20 {
        let d = gdp_to_eps_delta(one, i as f64 * 0.5).unwrap();
        assert!(d < prev);
        prev = d;
    }
    assert!(prev < 1e-6);
    for eps in [0.0, 0.5, 1.0, 3.0] {
        let mut prev = 0.0;
        for i in 1..=20 {
            let d = gdp_to_eps_delta(GdpParam::new(i as f64 * 0.25).unwrap(), eps).unwrap();
            assert!(d > prev);
            prev = d;
        }
    }
}

#[test]
fn dpsgd_monotone_in_each_argument() {
    let base = gdp_of_dpsgd(0.1, 100, 1.0).unwrap().mu;
    for (rho, k, tau) in [(0.2, 100, 1.0), (0.1, 200, 1.0)] {
        assert!(gdp_of_dpsgd(rho, k, tau).unwrap().mu > base);
    }
    let mut prev = f64::INFINITY;
    for i in 1..=20 {
        let mu = gdp_of_dpsgd(0.1, 100, 0.5 + i as f64 * 0.1).unwrap().mu;
        assert!(mu < prev);
        prev = mu;
    }
}

#[test]
fn inverse_of_golden_delta() {
    let one = GdpParam::new(1.0).unwrap();
    let eps = eps_for_delta(one, 0.12693).unwrap();
    assert!((gdp_to_eps_delta(one, eps).unwrap() - 0.12693).abs() < 1e-5);
    assert!((eps - 1.0).abs() < 1e-3);
}

#[test]
fn vanishing_mu_gives_vanishing_eps() {
    let mut prev = f64::INFINITY;
    for mu in [1.0, 0.1, 0.01, 1e-3, 1e-4] {
        let eps = eps_for_delta(GdpParam::new(mu).unwrap(), 1e-5).unwrap();
        assert!(eps < prev);
        prev = eps;
    }
    assert!(prev < 1e-3);
}

#[test]
fn warm_start_entries_compose_to_stated_total() {
    let parts: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
    let mut l = PrivacyLedger::new();
    l.push(LedgerEntry::approx("init", parts.clone(), 1.0, 5e-4));
    l.push(LedgerEntry::approx("optimization", parts, 1.0, 5e-4));
    let r = ledger_compose(&l, &[1e-4]).unwrap();
    assert_eq!(r.approx_total.eps, 2.0);
    assert_eq!(r.approx_total.delta, 1e-3);
}

proptest! {
    #[test]
    fn eps_for_delta_round_trips(mu in 0.05f64..5.0, log_delta in -10.0f64..-0.5) {
        let mu = GdpParam::new(mu).unwrap();
        let delta = 10f64.powf(log_delta);
        let eps = eps_for_delta(mu, delta).unwrap();
        if eps > 0.0 {
            prop_assert!((gdp_to_eps_delta(mu, eps).unwrap() - delta).abs() < 1e-5);
        } else {
            prop_assert!(gdp_to_eps_delta(mu, 0.0).unwrap() <= delta);
        }
    }

    #[test]
    fn ledger_totals_permutation_invariant(
        mus in proptest::collection::vec(0.0f64..3.0, 1..8),
        eds in proptest::collection::vec((0.0f64..2.0, 0.0f64..1e-3), 0..8),
        shuffle_seed in any::<u64>(),
    ) {
        let mut entries: Vec<LedgerEntry> = mus.iter().map(|&m| LedgerEntry::gdp("g", vec![], m)).collect();
        entries.extend(eds.iter().map(|&(e, d)| LedgerEntry::approx("a", vec![], e, d)));
        for (i, &m) in mus.iter().enumerate() {
            entries.push(
                LedgerEntry::gdp("p", vec![format!("t{i}")], m)
                    .with_rule(CompositionRule::Parallel { group: "par".into() }),
            );
        }
        let forward = ledger_compose(&PrivacyLedger { entries: entries.clone() }, &[1e-5]).unwrap();
        // Fisher-Yates with a splitmix-style generator.
        let mut s = shuffle_seed;
        for i in (1..entries.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (s >> 33) as usize % (i + 1);
            entries.swap(i, j);
        }
        let shuffled = ledger_compose(&PrivacyLedger { entries }, &[1e-5]).unwrap();
        prop_assert_eq!(forward.mu_gdp, shuffled.mu_gdp);
        prop_assert_eq!(forward.approx_total, shuffled.approx_total);
        prop_assert_eq!(forward.pairs, shuffled.pairs);
    }
}

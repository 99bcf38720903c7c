use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};

/// Iteration count below which the asymptotic DP-SGD formula is flagged.
pub const ASYMPTOTIC_MIN_ITERATIONS: usize = 50;

/// A μ-GDP guarantee. `mu == 0` is perfect privacy, `mu == ∞` no privacy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdpParam {
    pub mu: f64,
}

impl GdpParam {
    pub fn new(mu: f64) -> Result<Self> {
        if mu.is_nan() || mu < 0.0 {
            return Err(Error::Parameter(format!("GDP parameter must be >= 0, got {mu}")));
        }
        Ok(Self { mu })
    }

    pub fn is_private(&self) -> bool {
        self.mu.is_finite()
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Asymptotic GDP parameter of Poisson-subsampled noisy gradient descent:
/// `mu = rho * sqrt(K (exp(1/tau^2) - 1))`.
///
/// `K = 0` gives `mu = 0`; `tau = 0` gives `mu = ∞`.
pub fn gdp_of_dpsgd(rho: f64, iterations: usize, tau: f64) -> Result<GdpParam> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Parameter(format!("subsample rate must lie in (0, 1], got {rho}")));
    }
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Parameter(format!("noise multiplier must be >= 0, got {tau}")));
    }
    if iterations == 0 {
        return Ok(GdpParam { mu: 0.0 });
    }
    if tau == 0.0 {
        return Ok(GdpParam { mu: f64::INFINITY });
    }
    let growth = (1.0 / (tau * tau)).exp_m1();
    Ok(GdpParam {
        mu: rho * (iterations as f64 * growth).sqrt(),
    })
}

/// Smallest δ such that μ-GDP implies (ε, δ)-DP:
/// `Φ(−ε/μ + μ/2) − e^ε Φ(−ε/μ − μ/2)`.
pub fn gdp_to_eps_delta(mu: GdpParam, eps: f64) -> Result<f64> {
    if !(mu.mu > 0.0) {
        return Err(Error::Parameter(format!("conversion needs mu > 0, got {}", mu.mu)));
    }
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::Parameter(format!("eps must be >= 0, got {eps}")));
    }
    if !mu.is_private() {
        return Ok(1.0);
    }
    if eps.is_infinite() {
        return Ok(0.0);
    }
    let m = mu.mu;
    let lhs = normal_cdf(-eps / m + m / 2.0);
    // e^eps * Phi(z) can overflow in the product; combine in log space.
    let z = -eps / m - m / 2.0;
    let tail = normal_cdf(z);
    let rhs = if tail > 0.0 { (eps + tail.ln()).exp() } else { 0.0 };
    Ok((lhs - rhs).max(0.0))
}

/// Smallest ε ≥ 0 with `gdp_to_eps_delta(mu, ε) <= delta`, by bisection.
pub fn eps_for_delta(mu: GdpParam, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if mu.mu == 0.0 {
        return Ok(0.0);
    }
    if !mu.is_private() {
        return Ok(f64::INFINITY);
    }
    if gdp_to_eps_delta(mu, 0.0)? <= delta {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while gdp_to_eps_delta(mu, hi)? > delta {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numeric(format!("no eps found for mu={} at delta={delta}", mu.mu)));
        }
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if gdp_to_eps_delta(mu, mid)? > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Largest μ whose (ε, δ) curve passes through the given point.
pub fn mu_for_eps_delta(eps: f64, delta: f64) -> Result<GdpParam> {
    if !(eps > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("need eps > 0 and delta in (0, 1), got ({eps}, {delta})")));
    }
    let f = |m: f64| gdp_to_eps_delta(GdpParam { mu: m }, eps);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi)? < delta {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numeric("mu search diverged".into()));
        }
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(GdpParam { mu: lo })
}

/// Subsample rate that makes `iterations` steps at noise multiplier `tau`
/// exactly `(eps, delta)`-DP under the asymptotic formula. Capped at 1.
pub fn calibrate_rho(iterations: usize, tau: f64, eps: f64, delta: f64) -> Result<f64> {
    if iterations == 0 || !(tau > 0.0) {
        return Err(Error::Parameter("calibration needs K >= 1 and tau > 0".into()));
    }
    let target = mu_for_eps_delta(eps, delta)?;
    let unit = gdp_of_dpsgd(1.0, iterations, tau)?.mu;
    Ok((target.mu / unit).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_dpsgd() {
        let mu = gdp_of_dpsgd(0.01, 100, 1.0).unwrap().mu;
        assert!((mu - 0.13108324944).abs() < 1e-10);
        assert_eq!(gdp_of_dpsgd(0.3, 0, 1.0).unwrap().mu, 0.0);
        assert!(gdp_of_dpsgd(0.3, 10, 0.0).unwrap().mu.is_infinite());
    }

    #[test]
    fn doubling_iterations_scales_by_sqrt2() {
        let a = gdp_of_dpsgd(0.05, 40, 1.3).unwrap().mu;
        let b = gdp_of_dpsgd(0.05, 80, 1.3).unwrap().mu;
        assert!((b / a - std::f64::consts::SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn conversion_edges() {
        let one = GdpParam::new(1.0).unwrap();
        let d0 = gdp_to_eps_delta(one, 0.0).unwrap();
        assert!((d0 - (2.0 * normal_cdf(0.5) - 1.0)).abs() < 1e-15);
        assert!(gdp_to_eps_delta(GdpParam { mu: 0.0 }, 1.0).is_err());
        assert!(gdp_to_eps_delta(one, -1.0).is_err());
        assert_eq!(eps_for_delta(GdpParam { mu: 0.0 }, 1e-5).unwrap(), 0.0);
        assert_eq!(eps_for_delta(one, 0.9).unwrap(), 0.0);
    }

    #[test]
    fn large_eps_does_not_overflow() {
        let d = gdp_to_eps_delta(GdpParam { mu: 0.5 }, 800.0).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn calibrated_rho_hits_target() {
        let rho = calibrate_rho(200, 1.0, 1.0 / 3.0, 1e-2 / 3.0).unwrap();
        let mu = gdp_of_dpsgd(rho, 200, 1.0).unwrap();
        let eps = eps_for_delta(mu, 1e-2 / 3.0).unwrap();
        assert!((eps - 1.0 / 3.0).abs() < 1e-9);
    }
}

use crate::error::{Error, Result};

/// Noise scale of the Gaussian mechanism: `sigma = Δ₂ sqrt(2 ln(1.25/δ)) / ε`.
///
/// The guarantee is only proven for `ε < 1`; larger values are accepted with
/// a logged warning.
pub fn gaussian_mechanism_sigma(sensitivity: f64, eps: f64, delta: f64) -> Result<f64> {
    if !(sensitivity > 0.0) || !sensitivity.is_finite() {
        return Err(Error::Parameter(format!("sensitivity must be positive, got {sensitivity}")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if eps >= 1.0 {
        log::warn!("Gaussian mechanism calibrated with eps = {eps} >= 1; the classical bound assumes eps < 1");
    }
    Ok(sensitivity * (2.0 * (1.25 / delta).ln()).sqrt() / eps)
}

/// Per-coordinate noise std of the private mean of `n` points in a ball of
/// radius `radius`: `sqrt(8 R² ln(1/δ)) / (ε n)`.
pub fn warm_start_noise_std(radius: f64, eps: f64, delta: f64, n: usize) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Parameter(format!("radius must be positive, got {radius}")));
    }
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if n == 0 {
        return Err(Error::Schema("private mean of an empty snapshot".into()));
    }
    if eps.is_infinite() {
        return Ok(0.0);
    }
    Ok((8.0 * radius * radius * (1.0 / delta).ln()).sqrt() / (eps * n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_examples() {
        let delta = 1.25 * (-2.0f64).exp();
        assert!((gaussian_mechanism_sigma(1.0, 1.0, delta).unwrap() - 2.0).abs() < 1e-14);
        let s1 = gaussian_mechanism_sigma(1.0, 0.5, 1e-5).unwrap();
        let s2 = gaussian_mechanism_sigma(2.0, 0.5, 1e-5).unwrap();
        assert_eq!(s2, 2.0 * s1);
        assert!(gaussian_mechanism_sigma(0.0, 0.5, 1e-5).is_err());
        assert!(gaussian_mechanism_sigma(1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn warm_start_std() {
        let s = warm_start_noise_std(1.0, 1.0, 5e-4, 674).unwrap();
        assert!((s - 0.0115695822167).abs() < 1e-12);
        assert_eq!(warm_start_noise_std(1.0, f64::INFINITY, 5e-4, 10).unwrap(), 0.0);
    }
}

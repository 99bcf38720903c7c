use crate::dataset::ParticleSystem;
use crate::eot::{barycentric_project, Direction, TransportPlan};
use crate::error::{Error, Result};
use crate::points::PointCloud;
use crate::scalar::{logsumexp_by, norm, sq_dist, Real};

/// Smallest admissible convolution value `(g_σ ∗ μ)(y)`.
pub const MIN_LOG_CONVOLUTION: f64 = -690.7755278982137; // ln(1e-300)

/// Per-marginal fit weights `Δt_i / λ`, with `Δt_T := Δt_{T−1}`.
///
/// Without `λ` every weight is 1.
pub fn fit_weights<T: Real>(gaps: &[T], lambda: Option<f64>) -> Vec<T> {
    let t = gaps.len() + 1;
    match lambda {
        None => vec![T::one(); t],
        Some(l) => {
            let l = T::lit(l);
            (0..t)
                .map(|i| {
                    let dt = if gaps.is_empty() {
                        T::one()
                    } else {
                        gaps[i.min(gaps.len() - 1)]
                    };
                    dt / l
                })
                .collect()
        }
    }
}

/// `ln (1/m) Σ_j exp(−‖x_j − y‖² / 2σ²)`.
///
/// Fails with a degenerate-fit error when the value is below `ln 1e-300`.
pub fn log_convolution<T: Real>(particles: &PointCloud<T>, y: &[T], sigma: T, datum: usize) -> Result<T> {
    let inv = T::one() / (T::lit(2.0) * sigma * sigma);
    let m = particles.len();
    let v = logsumexp_by(m, |j| -sq_dist(particles.point(j), y) * inv) - T::lit(m as f64).ln();
    if !(v.as_f64() >= MIN_LOG_CONVOLUTION) {
        return Err(Error::DegenerateFit {
            datum,
            log_value: v.as_f64(),
        });
    }
    Ok(v)
}

/// Fit gradient at `x` for one datum `y` given its precomputed log convolution:
/// `w · g(x−y)(x−y) / (σ² (g ∗ μ)(y))`.
pub fn fit_gradient_from_log_conv<T: Real>(x: &[T], y: &[T], log_conv: T, sigma: T, weight: T) -> Vec<T> {
    let s2 = sigma * sigma;
    let ratio = (-sq_dist(x, y) / (T::lit(2.0) * s2) - log_conv).exp();
    let c = weight * ratio / s2;
    x.iter().zip(y).map(|(&a, &b)| c * (a - b)).collect()
}

/// Spatial gradient at `x` of the fit first variation contributed by datum `y`,
/// where `particles` is the current marginal and `weight = Δt_i / λ`.
pub fn fit_gradient_per_datum<T: Real>(
    x: &[T],
    y: &[T],
    particles: &PointCloud<T>,
    sigma: T,
    weight: T,
) -> Result<Vec<T>> {
    let lc = log_convolution(particles, y, sigma, 0)?;
    Ok(fit_gradient_from_log_conv(x, y, lc, sigma, weight))
}

/// Rescales `g` in place so that `‖g‖ ≤ c`; returns the resulting norm.
pub fn clip_in_place<T: Real>(g: &mut [T], c: T) -> T {
    let mut n = norm(g);
    if n > c {
        let s = c / n;
        g.iter_mut().for_each(|v| *v *= s);
        n = norm(g);
        // Rounding can leave the norm a few ulps above c.
        let shrink = T::one() - T::epsilon();
        while n > c {
            g.iter_mut().for_each(|v| *v *= shrink);
            n = norm(g);
        }
    }
    n
}

/// Forward and backward barycentric projections for every marginal.
///
/// Entry `i` holds the projection of marginal `i` through plan `i`
/// (forward, absent for the last marginal) and through plan `i−1`
/// (backward, absent for the first).
#[allow(clippy::type_complexity)]
pub fn projections<T: Real>(
    state: &ParticleSystem<T>,
    plans: &[TransportPlan<T>],
) -> Result<Vec<(Option<PointCloud<T>>, Option<PointCloud<T>>)>> {
    let t = state.len();
    if plans.len() + 1 != t {
        return Err(Error::Schema(format!("{} plans for {t} marginals", plans.len())));
    }
    (0..t)
        .map(|i| {
            let fwd = if i + 1 < t {
                Some(barycentric_project(&plans[i], state.marginal(i + 1), Direction::Forward)?)
            } else {
                None
            };
            let bwd = if i > 0 {
                Some(barycentric_project(&plans[i - 1], state.marginal(i - 1), Direction::Backward)?)
            } else {
                None
            };
            Ok((fwd, bwd))
        })
        .collect()
}

/// Gradient of the transport potentials at particle `k` of marginal `i`:
/// `(x − fwd)/Δt_i + (x − bwd)/Δt_{i−1}`, dropping absent terms.
pub fn potential_gradient_from<T: Real>(
    x: &[T],
    fwd: Option<(&[T], T)>,
    bwd: Option<(&[T], T)>,
) -> Vec<T> {
    let mut g = vec![T::zero(); x.len()];
    for (proj, dt) in [fwd, bwd].into_iter().flatten() {
        for ((gi, &xi), &pi) in g.iter_mut().zip(x).zip(proj) {
            *gi += (xi - pi) / dt;
        }
    }
    g
}

/// Potential gradient for particle `(i, k)` given plans solved at `state`.
pub fn potential_gradient<T: Real>(
    state: &ParticleSystem<T>,
    plans: &[TransportPlan<T>],
    i: usize,
    k: usize,
) -> Result<Vec<T>> {
    let t = state.len();
    if plans.len() + 1 != t {
        return Err(Error::Schema(format!("{} plans for {t} marginals", plans.len())));
    }
    let grid = state.grid();
    let x = state.marginal(i).point(k);
    let fwd = if i + 1 < t {
        Some(barycentric_project(&plans[i], state.marginal(i + 1), Direction::Forward)?)
    } else {
        None
    };
    let bwd = if i > 0 {
        Some(barycentric_project(&plans[i - 1], state.marginal(i - 1), Direction::Backward)?)
    } else {
        None
    };
    Ok(potential_gradient_from(
        x,
        fwd.as_ref().map(|p| (p.point(k), grid.gap(i))),
        bwd.as_ref().map(|p| (p.point(k), grid.gap(i - 1))),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coincident_particle_and_datum_give_zero() {
        let p = PointCloud::from_rows(&[vec![0.3, 0.4]]).unwrap();
        let g = fit_gradient_per_datum(&[0.3, 0.4], &[0.3, 0.4], &p, 0.1, 1.0).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn single_particle_at_distance_sigma() {
        let sigma: f64 = 0.2;
        let p = PointCloud::from_rows(&[vec![1.0]]).unwrap();
        let g = fit_gradient_per_datum(&[1.0], &[1.0 - sigma], &p, sigma, 1.0).unwrap();
        assert!((g[0] - 1.0 / sigma).abs() < 1e-12);
    }

    #[test]
    fn far_cloud_is_degenerate() {
        let p = PointCloud::from_rows(&[vec![100.0]]).unwrap();
        assert!(matches!(
            fit_gradient_per_datum(&[100.0], &[0.0], &p, 0.05, 1.0),
            Err(Error::DegenerateFit { .. })
        ));
    }

    #[test]
    fn clipping_is_exact() {
        let mut g: Vec<f64> = vec![3.0, 4.0];
        assert_eq!(clip_in_place(&mut g, 1.0), 1.0);
        assert!((g[0] - 0.6).abs() < 1e-15);
        let mut rng = 0.1f64;
        for _ in 0..1000 {
            rng = (rng * 3.7 + 0.13).fract();
            let mut g = vec![rng * 7.0 + 1.0, (1.0 - rng) * 3.0, rng * 0.3];
            let c = 0.3 + rng;
            assert!(clip_in_place(&mut g, c) <= c);
            assert!(norm(&g) <= c);
        }
    }

    #[test]
    fn weights_follow_gaps() {
        let w = fit_weights(&[0.5, 0.25], Some(0.5));
        assert_eq!(w, vec![1.0, 0.5, 0.5]);
        assert_eq!(fit_weights::<f64>(&[0.5], None), vec![1.0, 1.0]);
    }
}

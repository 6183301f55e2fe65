//! Per-source particle clouds: uniform initialization, the multiplicative
//! bearing update, effective sample size and systematic resampling.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it whenever std is linked
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fim::WeightVector;
use crate::geometry::{log_likelihood, Angle, NoiseModel, Point2};
use crate::placement::DomainBox;

/// Weighted particle approximation of one source's posterior.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParticleCloud {
    positions: Vec<Point2>,
    weights: WeightVector,
}

impl ParticleCloud {
    pub fn new(positions: Vec<Point2>, weights: WeightVector) -> Result<Self> {
        Error::check_len("particle weights", positions.len(), weights.len())?;
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("particles", "positions must be finite"));
        }
        Ok(ParticleCloud { positions, weights })
    }

    #[inline]
    pub fn positions(&self) -> &[Point2] {
        &self.positions
    }

    #[inline]
    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Same particles, different weights.
    pub fn with_weights(&self, weights: WeightVector) -> Result<Self> {
        ParticleCloud::new(self.positions.clone(), weights)
    }

    pub fn set_weights(&mut self, weights: WeightVector) -> Result<()> {
        Error::check_len("particle weights", self.positions.len(), weights.len())?;
        self.weights = weights;
        Ok(())
    }
}

/// Bearings to one source, index-aligned with the sensor array.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub bearings: Vec<Angle>,
}

/// `n` i.i.d. uniform particles over `domain` with weights `1/n`.
pub fn init_cloud<R: Rng + ?Sized>(rng: &mut R, n: usize, domain: &DomainBox) -> Result<ParticleCloud> {
    if n == 0 {
        return Err(Error::invalid("particles", "count must be >= 1"));
    }
    let positions = (0..n).map(|_| domain.sample_uniform(rng)).collect();
    ParticleCloud::new(positions, WeightVector::uniform(n)?)
}

/// Posterior weights after one batch of bearings, computed in log space:
/// `w̃_i ∝ w⁻_i · exp(Σ_r ℓ(x_i; β_r, s_r, σ))`.
///
/// The cloud's current weights are the prior; with no sensors the prior is
/// returned unchanged.
pub fn update_weights(
    cloud: &ParticleCloud,
    measurements: &MeasurementSet,
    sensors: &[Point2],
    noise: NoiseModel,
) -> Result<WeightVector> {
    Error::check_len("measurements", sensors.len(), measurements.bearings.len())?;
    if sensors.is_empty() {
        return Ok(cloud.weights.clone());
    }
    let mut logw: Vec<f64> = cloud
        .positions
        .iter()
        .zip(cloud.weights.as_slice())
        .map(|(&x, &w)| {
            if w > 0.0 {
                let ll: f64 = sensors
                    .iter()
                    .zip(&measurements.bearings)
                    .map(|(&s, &b)| log_likelihood(x, b, s, noise))
                    .sum();
                w.ln() + ll
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(max.is_finite());
    let mut total = 0.0;
    for lw in logw.iter_mut() {
        *lw = (*lw - max).exp();
        total += *lw;
    }
    logw.iter_mut().for_each(|w| *w /= total);
    Ok(WeightVector::from_raw(logw))
}

/// `1 / Σ w_i²`, in `[1, N]` for simplex weights.
pub fn effective_sample_size(weights: &WeightVector) -> f64 {
    1.0 / weights.as_slice().iter().map(|w| w * w).sum::<f64>()
}

/// Running sum with Neumaier compensation.
fn compensated_cumsum(w: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(w.len());
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &x in w {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        out.push(sum + comp);
    }
    out
}

/// Systematic resampling: one offset `u ~ U[0, 1/N)`, pointers `u + k/N`.
/// Each particle is copied `⌊N w_i⌋` or `⌈N w_i⌉` times; the result has
/// uniform weights.
pub fn systematic_resample<R: Rng + ?Sized>(rng: &mut R, cloud: &ParticleCloud) -> ParticleCloud {
    let offspring = systematic_indices(rng, cloud.weights.as_slice());
    let positions = offspring.iter().map(|&i| cloud.positions[i]).collect();
    ParticleCloud {
        positions,
        weights: WeightVector::from_raw(alloc::vec![1.0 / cloud.len() as f64; cloud.len()]),
    }
}

/// Parent index for each of the `N` offspring of a systematic resample.
pub fn systematic_indices<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Vec<usize> {
    let n = weights.len();
    let cum = compensated_cumsum(weights);
    let u: f64 = rng.random::<f64>();
    let nf = n as f64;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let pointer = (k as f64 + u) / nf;
        while j + 1 < n && pointer >= cum[j] {
            j += 1;
        }
        out.push(j);
    }
    out
}

/// `Σ w_i x_i`.
pub fn weighted_mean(cloud: &ParticleCloud) -> Point2 {
    cloud
        .positions
        .iter()
        .zip(cloud.weights.as_slice())
        .fold(Point2::ORIGIN, |acc, (&p, &w)| acc + p * w)
}

/// Trace of the weighted covariance about the weighted mean.
pub fn covariance_trace(cloud: &ParticleCloud) -> f64 {
    let mean = weighted_mean(cloud);
    cloud
        .positions
        .iter()
        .zip(cloud.weights.as_slice())
        .map(|(&p, &w)| w * (p - mean).norm_sq())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::bearing;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn domain() -> DomainBox {
        DomainBox::new(0.0, 20.0, 0.0, 20.0).unwrap()
    }

    #[test]
    fn init_is_uniform_and_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let cloud = init_cloud(&mut rng, n, &domain()).unwrap();
        assert!(cloud.weights().as_slice().iter().all(|&w| w == 1.0 / n as f64));
        assert!(cloud.positions().iter().all(|&p| domain().contains(p)));
        let m = weighted_mean(&cloud);
        // std of a U[0,20] coordinate is 20/√12
        let se = 20.0 / 12f64.sqrt() / (n as f64).sqrt();
        assert!((m.x - 10.0).abs() < 3.0 * se && (m.y - 10.0).abs() < 3.0 * se);
        assert!(init_cloud(&mut rng, 0, &domain()).is_err());
    }

    #[test]
    fn update_one_sigma_example() {
        let sigma = 0.1;
        let noise = NoiseModel::new(sigma).unwrap();
        let s = Point2::ORIGIN;
        let p1 = Point2::new(5.0, 0.0);
        // particle 2 sits exactly one sigma off the measured bearing
        let p2 = Point2::new(5.0 * sigma.cos(), 5.0 * sigma.sin());
        let cloud = ParticleCloud::new(vec![p1, p2], WeightVector::uniform(2).unwrap()).unwrap();
        let meas = MeasurementSet {
            bearings: vec![bearing(s, p1)],
        };
        let w = update_weights(&cloud, &meas, &[s], noise).unwrap();
        let e = (-0.5f64).exp();
        assert_abs_diff_eq!(w[0], 1.0 / (1.0 + e), epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], e / (1.0 + e), epsilon = 1e-12);
        assert_abs_diff_eq!(w[0], 0.6225, epsilon = 1e-4);
    }

    #[test]
    fn update_without_sensors_is_identity() {
        let cloud = ParticleCloud::new(
            vec![Point2::new(1.0, 2.0), Point2::new(3.0, 4.0)],
            WeightVector::new(vec![0.3, 0.7]).unwrap(),
        )
        .unwrap();
        let w = update_weights(&cloud, &MeasurementSet { bearings: vec![] }, &[], NoiseModel::new(0.1).unwrap())
            .unwrap();
        assert_eq!(&w, cloud.weights());
    }

    #[test]
    fn update_rejects_misaligned_measurements() {
        let cloud = ParticleCloud::new(vec![Point2::ORIGIN], WeightVector::uniform(1).unwrap()).unwrap();
        let err = update_weights(
            &cloud,
            &MeasurementSet { bearings: vec![] },
            &[Point2::new(1.0, 1.0)],
            NoiseModel::new(0.1).unwrap(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn identical_particles_keep_prior() {
        let p = Point2::new(4.0, 4.0);
        let cloud = ParticleCloud::new(vec![p; 3], WeightVector::new(vec![0.2, 0.3, 0.5]).unwrap()).unwrap();
        let meas = MeasurementSet {
            bearings: vec![Angle::new(2.0)],
        };
        let w = update_weights(&cloud, &meas, &[Point2::ORIGIN], NoiseModel::new(0.01).unwrap()).unwrap();
        for (a, b) in w.as_slice().iter().zip(cloud.weights().as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn ess_examples() {
        assert_abs_diff_eq!(effective_sample_size(&WeightVector::uniform(1000).unwrap()), 1000.0, epsilon = 1e-9);
        let mut one_hot = vec![0.0; 10];
        one_hot[3] = 1.0;
        assert_eq!(effective_sample_size(&WeightVector::new(one_hot).unwrap()), 1.0);
        let mut two = vec![0.0; 10];
        two[0] = 0.5;
        two[1] = 0.5;
        assert_eq!(effective_sample_size(&WeightVector::new(two).unwrap()), 2.0);
    }

    #[test]
    fn resample_uniform_keeps_every_particle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [1usize, 2, 7, 100, 1000] {
            let idx = systematic_indices(&mut rng, &vec![1.0 / n as f64; n]);
            assert_eq!(idx, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn resample_one_hot() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = vec![0.0; 50];
        w[17] = 1.0;
        assert!(systematic_indices(&mut rng, &w).iter().all(|&i| i == 17));
        let mut w = vec![0.0; 50];
        w[49] = 1.0;
        assert!(systematic_indices(&mut rng, &w).iter().all(|&i| i == 49));
        let mut w = vec![0.0; 50];
        w[0] = 1.0;
        assert!(systematic_indices(&mut rng, &w).iter().all(|&i| i == 0));
    }

    #[test]
    fn resample_resets_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cloud = ParticleCloud::new(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)],
            WeightVector::new(vec![0.1, 0.6, 0.3]).unwrap(),
        )
        .unwrap();
        let out = systematic_resample(&mut rng, &cloud);
        assert_eq!(out.len(), 3);
        assert!(out.weights().as_slice().iter().all(|&w| w == 1.0 / 3.0));
    }

    #[test]
    fn cumsum_ends_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = WeightVector::normalized((0..10_000).map(|_| rng.random::<f64>()).collect()).unwrap();
        let c = compensated_cumsum(w.as_slice());
        assert!((c.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_trace_of_pair() {
        let cloud = ParticleCloud::new(
            vec![Point2::new(0.0, 0.0), Point2::new(2.0, 2.0)],
            WeightVector::uniform(2).unwrap(),
        )
        .unwrap();
        assert_eq!(weighted_mean(&cloud), Point2::new(1.0, 1.0));
        assert_abs_diff_eq!(covariance_trace(&cloud), 2.0);
    }
}

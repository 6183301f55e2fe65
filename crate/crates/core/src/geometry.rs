//! Planar bearing geometry: points, wrapped angles, the Gaussian bearing
//! likelihood and noisy bearing simulation.

use core::f64::consts::{PI, TAU};
use core::ops::{Add, Mul, Neg, Sub};

#[allow(unused_imports)] // inherent float methods shadow it whenever std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Sensor-to-target distances below this are clamped before dividing.
pub const RHO_MIN: f64 = 1e-3;

/// `RHO_MIN` squared; most hot loops work with squared ranges.
pub const RHO_MIN_SQ: f64 = RHO_MIN * RHO_MIN;

/// A position (or displacement) in the plane, in domain length units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    #[inline]
    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotate by `angle` radians about `center`.
    pub fn rotate_about(self, center: Point2, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        let d = self - center;
        center + Point2::new(c * d.x - s * d.y, s * d.x + c * d.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    #[inline]
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// An angle in radians, always wrapped into `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Angle(f64);

impl Angle {
    /// Wraps `radians` on construction.
    #[inline]
    pub fn new(radians: f64) -> Self {
        wrap_angle(radians)
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }
}

/// Reduce `theta` modulo 2π into `(-π, π]`.
///
/// `+π` maps to itself and `-π` maps to `+π`.
#[inline]
pub fn wrap_angle(theta: f64) -> Angle {
    let mut r = theta % TAU;
    if r > PI {
        r -= TAU;
    } else if r <= -PI {
        r += TAU;
    }
    Angle(r)
}

/// Bearing noise: zero-mean Gaussian with standard deviation `sigma` radians.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid("sigma", "must be finite and > 0"));
        }
        Ok(NoiseModel { sigma })
    }

    pub fn from_degrees(sigma_deg: f64) -> Result<Self> {
        NoiseModel::new(sigma_deg.to_radians())
    }

    #[inline]
    pub fn sigma(self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn variance(self) -> f64 {
        self.sigma * self.sigma
    }
}

/// True when the two points are closer than [`RHO_MIN`], i.e. the bearing
/// geometry between them is clamped.
#[inline]
pub fn is_degenerate(a: Point2, b: Point2) -> bool {
    (b - a).norm_sq() < RHO_MIN_SQ
}

/// Azimuth from `sensor` to `target`.
#[inline]
pub fn bearing(sensor: Point2, target: Point2) -> Angle {
    let d = target - sensor;
    wrap_angle(d.y.atan2(d.x))
}

/// Gaussian bearing log-likelihood without its normalizing constant:
/// `-Δθ² / (2σ²)` with `Δθ` the wrapped innovation.
#[inline]
pub fn log_likelihood(particle: Point2, measurement: Angle, sensor: Point2, noise: NoiseModel) -> f64 {
    let predicted = bearing(sensor, particle);
    let dtheta = wrap_angle(measurement.radians() - predicted.radians()).radians();
    -dtheta * dtheta / (2.0 * noise.variance())
}

/// Noisy bearing from `sensor` to `true_source`.
///
/// Exactly one standard-normal draw is consumed per call, so callers sharing a
/// stream see the same noise sequence regardless of geometry.
pub fn simulate_measurement<R: Rng + ?Sized>(
    rng: &mut R,
    true_source: Point2,
    sensor: Point2,
    noise: NoiseModel,
) -> Angle {
    let z: f64 = StandardNormal.sample(rng);
    wrap_angle(bearing(sensor, true_source).radians() + noise.sigma() * z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bearing_axes() {
        assert_abs_diff_eq!(bearing(Point2::ORIGIN, Point2::new(1.0, 0.0)).radians(), 0.0);
        assert_abs_diff_eq!(
            bearing(Point2::ORIGIN, Point2::new(0.0, 1.0)).radians(),
            PI / 2.0
        );
        assert_abs_diff_eq!(
            bearing(Point2::new(1.0, 1.0), Point2::ORIGIN).radians(),
            -3.0 * PI / 4.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn wrap_examples() {
        assert_abs_diff_eq!(wrap_angle(0.3).radians(), 0.3);
        assert_abs_diff_eq!(wrap_angle(1.5 * PI).radians(), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(-1.5 * PI).radians(), PI / 2.0, epsilon = 1e-15);
        assert_eq!(wrap_angle(PI).radians(), PI);
        assert_eq!(wrap_angle(-PI).radians(), PI);
    }

    #[test]
    fn log_likelihood_examples() {
        let noise = NoiseModel::new(0.2).unwrap();
        let s = Point2::new(1.0, -2.0);
        let p = Point2::new(4.0, 3.0);
        let b = bearing(s, p);
        assert_eq!(log_likelihood(p, b, s, noise), 0.0);
        let off = Angle::new(b.radians() + 0.2);
        assert_abs_diff_eq!(log_likelihood(p, off, s, noise), -0.5, epsilon = 1e-12);

        let noise = NoiseModel::new(PI / 4.0).unwrap();
        let ll = log_likelihood(Point2::new(1.0, 0.0), Angle::new(PI / 2.0), Point2::ORIGIN, noise);
        assert_abs_diff_eq!(ll, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn log_likelihood_wraps_across_pi() {
        let noise = NoiseModel::new(0.1).unwrap();
        // predicted bearing just below +π, measurement just above -π
        let p = Point2::new(-1.0, 0.01);
        let m = Angle::new(-PI + 0.01);
        let dtheta = 0.01 + 0.01_f64.atan(); // hand-unwrapped innovation
        let ll = log_likelihood(p, m, Point2::ORIGIN, noise);
        assert_abs_diff_eq!(ll, -dtheta * dtheta / 0.02, epsilon = 1e-12);
    }

    #[test]
    fn noise_model_rejects_nonpositive() {
        assert!(NoiseModel::new(0.0).is_err());
        assert!(NoiseModel::new(-1.0).is_err());
        assert!(NoiseModel::new(f64::NAN).is_err());
        assert_abs_diff_eq!(
            NoiseModel::from_degrees(180.0).unwrap().sigma(),
            PI,
            epsilon = 1e-15
        );
    }

    #[test]
    fn simulate_tiny_noise_is_exact_bearing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = NoiseModel::new(1e-15).unwrap();
        let s = Point2::new(2.0, 2.0);
        let t = Point2::new(5.0, 9.0);
        let b = simulate_measurement(&mut rng, t, s, noise);
        assert_abs_diff_eq!(b.radians(), bearing(s, t).radians(), epsilon = 1e-13);
    }

    #[test]
    fn simulate_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sigma = 0.1;
        let noise = NoiseModel::new(sigma).unwrap();
        let s = Point2::new(0.0, 0.0);
        // bearing close to the wrap point to exercise the circular statistics
        let t = Point2::new(-5.0, 0.05);
        let truth = bearing(s, t).radians();
        let n = 100_000;
        let (mut sx, mut sy, mut ss) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let b = simulate_measurement(&mut rng, t, s, noise).radians();
            sx += b.cos();
            sy += b.sin();
            let d = wrap_angle(b - truth).radians();
            ss += d * d;
        }
        let circ_mean = sy.atan2(sx);
        let err = wrap_angle(circ_mean - truth).radians().abs();
        assert!(err < 5.0 * sigma / (n as f64).sqrt(), "circular mean off by {err}");
        let sd = (ss / n as f64).sqrt();
        assert!((sd / sigma - 1.0).abs() < 0.03, "sample std {sd}");
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent_and_equivalent(theta in -1e4f64..1e4) {
            let w = wrap_angle(theta).radians();
            prop_assert!(w > -PI && w <= PI);
            prop_assert_eq!(wrap_angle(w).radians(), w);
            let turns = (theta - w) / TAU;
            prop_assert!((turns - turns.round()).abs() < 1e-9);
        }

        #[test]
        fn bearing_antisymmetry(ax in -50.0f64..50.0, ay in -50.0f64..50.0,
                                bx in -50.0f64..50.0, by in -50.0f64..50.0) {
            let a = Point2::new(ax, ay);
            let b = Point2::new(bx, by);
            prop_assume!(a.distance(b) > RHO_MIN);
            let lhs = bearing(a, b).radians();
            let rhs = wrap_angle(bearing(b, a).radians() + PI).radians();
            prop_assert!(wrap_angle(lhs - rhs).radians().abs() < 1e-12);
        }

        #[test]
        fn bearing_translation_invariant(ax in -50.0f64..50.0, ay in -50.0f64..50.0,
                                         bx in -50.0f64..50.0, by in -50.0f64..50.0,
                                         tx in -50.0f64..50.0, ty in -50.0f64..50.0) {
            let a = Point2::new(ax, ay);
            let b = Point2::new(bx, by);
            prop_assume!(a.distance(b) > 1e-2);
            let t = Point2::new(tx, ty);
            let d = wrap_angle(bearing(a, b).radians() - bearing(a + t, b + t).radians());
            prop_assert!(d.radians().abs() < 1e-9);
        }

        #[test]
        fn log_likelihood_decreases_in_innovation(d1 in 0.0f64..PI, d2 in 0.0f64..PI) {
            let noise = NoiseModel::new(0.3).unwrap();
            let s = Point2::ORIGIN;
            let p = Point2::new(1.0, 0.0);
            let l1 = log_likelihood(p, Angle::new(d1), s, noise);
            let l2 = log_likelihood(p, Angle::new(-d2), s, noise);
            prop_assert!(l1 <= 0.0 && l2 <= 0.0);
            if d1 < d2 {
                prop_assert!(l1 > l2);
            } else if d1 > d2 {
                prop_assert!(l1 < l2);
            }
        }
    }
}

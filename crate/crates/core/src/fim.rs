//! Weighted bearing Fisher information, the D-optimal objective and its
//! analytic gradient with respect to sensor positions.
//!
//! For a particle at `x` with weight `w` and a sensor at `s`, write
//! `δ = x - s`, `q = |δ|²`. The contribution to the source FIM is
//!
//! ```text
//!   w / (σ² q²) · [[ δy², -δx δy ], [ -δx δy, δx² ]]
//! ```
//!
//! The joint FIM over sources is block diagonal, so it is never assembled;
//! each source contributes `log det(F_m + JITTER·I)` to the objective.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul};

#[allow(unused_imports)] // inherent float methods shadow it whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{NoiseModel, Point2, RHO_MIN_SQ};
use crate::particle_filter::ParticleCloud;

/// Added to every source FIM diagonal before taking determinants or inverses.
pub const JITTER: f64 = 1e-9;

/// Tolerance used when validating that externally supplied weights sum to 1.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Matrix2 {
    pub const ZERO: Matrix2 = Matrix2::new(0.0, 0.0, 0.0, 0.0);
    pub const IDENTITY: Matrix2 = Matrix2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Matrix2 { a11, a12, a21, a22 }
    }

    pub const fn symmetric(a11: f64, a12: f64, a22: f64) -> Self {
        Matrix2::new(a11, a12, a12, a22)
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn inverse(&self) -> Option<Matrix2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some(Matrix2::new(
            self.a22 * inv,
            -self.a12 * inv,
            -self.a21 * inv,
            self.a11 * inv,
        ))
    }

    /// `self + jitter·I`.
    #[inline]
    pub fn regularized(&self, jitter: f64) -> Matrix2 {
        Matrix2::new(self.a11 + jitter, self.a12, self.a21, self.a22 + jitter)
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> (f64, f64) {
        let off = 0.5 * (self.a12 + self.a21);
        let mean = 0.5 * (self.a11 + self.a22);
        let half_diff = 0.5 * (self.a11 - self.a22);
        let radius = half_diff.hypot(off);
        (mean - radius, mean + radius)
    }

    /// Nuclear (trace) norm of the symmetric part.
    pub fn nuclear_norm(&self) -> f64 {
        let (lo, hi) = self.symmetric_eigenvalues();
        lo.abs() + hi.abs()
    }

    pub fn max_abs_diff(&self, other: &Matrix2) -> f64 {
        (self.a11 - other.a11)
            .abs()
            .max((self.a12 - other.a12).abs())
            .max((self.a21 - other.a21).abs())
            .max((self.a22 - other.a22).abs())
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;
    fn add(self, rhs: Matrix2) -> Matrix2 {
        Matrix2::new(
            self.a11 + rhs.a11,
            self.a12 + rhs.a12,
            self.a21 + rhs.a21,
            self.a22 + rhs.a22,
        )
    }
}

impl Mul<f64> for Matrix2 {
    type Output = Matrix2;
    fn mul(self, rhs: f64) -> Matrix2 {
        Matrix2::new(self.a11 * rhs, self.a12 * rhs, self.a21 * rhs, self.a22 * rhs)
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("weights", "must be nonempty"));
        }
        Ok(WeightVector(vec![1.0 / n as f64; n]))
    }

    /// Validates that `w` already lies on the simplex.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::invalid("weights", "must be nonempty"));
        }
        if w.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::invalid("weights", "entries must be finite and >= 0"));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid("weights", "entries must sum to 1"));
        }
        Ok(WeightVector(w))
    }

    /// Normalizes nonnegative mass onto the simplex.
    pub fn normalized(mut w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::invalid("weights", "must be nonempty"));
        }
        if w.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::invalid("weights", "entries must be finite and >= 0"));
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("weights", "total mass must be > 0"));
        }
        w.iter_mut().for_each(|x| *x /= total);
        Ok(WeightVector(w))
    }

    /// Wraps `w` without validation. Callers guarantee the simplex invariant.
    pub(crate) fn from_raw(w: Vec<f64>) -> Self {
        WeightVector(w)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_distance(&self, other: &WeightVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// `KL(self ‖ reference)`; infinite if `self` puts mass where `reference`
    /// has none.
    pub fn kl_divergence(&self, reference: &WeightVector) -> f64 {
        let mut kl = 0.0;
        for (&w, &r) in self.0.iter().zip(&reference.0) {
            if w > 0.0 {
                if r <= 0.0 {
                    return f64::INFINITY;
                }
                kl += w * (w / r).ln();
            }
        }
        kl.max(0.0)
    }
}

impl core::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[inline]
fn clamped_sq(q: f64) -> f64 {
    q.max(RHO_MIN_SQ)
}

/// FIM of one sensor's bearings for one source's weighted particles.
pub fn per_sensor_fim(
    particles: &[Point2],
    weights: &WeightVector,
    sensor: Point2,
    noise: NoiseModel,
) -> Matrix2 {
    let inv_var = 1.0 / noise.variance();
    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    for (p, &w) in particles.iter().zip(weights.as_slice()) {
        let dx = p.x - sensor.x;
        let dy = p.y - sensor.y;
        let q = clamped_sq(dx * dx + dy * dy);
        let k = w * inv_var / (q * q);
        a11 += k * dy * dy;
        a12 -= k * dx * dy;
        a22 += k * dx * dx;
    }
    Matrix2::symmetric(a11, a12, a22)
}

/// Sum of [`per_sensor_fim`] over all sensors.
pub fn total_source_fim(
    particles: &[Point2],
    weights: &WeightVector,
    sensors: &[Point2],
    noise: NoiseModel,
) -> Matrix2 {
    sensors
        .iter()
        .fold(Matrix2::ZERO, |acc, &s| acc + per_sensor_fim(particles, weights, s, noise))
}

/// `Σ_m log det(F_m + JITTER·I)`.
pub fn dopt_objective(sensors: &[Point2], clouds: &[ParticleCloud], noise: NoiseModel) -> f64 {
    DoptProblem::new(clouds, noise).objective(sensors)
}

/// Gradient of [`dopt_objective`] with respect to each sensor position.
pub fn dopt_gradient(sensors: &[Point2], clouds: &[ParticleCloud], noise: NoiseModel) -> Vec<[f64; 2]> {
    let problem = DoptProblem::new(clouds, noise);
    let mut grad = vec![0.0; 2 * sensors.len()];
    problem.objective_and_gradient(sensors, &mut grad);
    grad.chunks_exact(2).map(|g| [g[0], g[1]]).collect()
}

#[derive(Debug, Clone, Copy)]
struct WeightedPoint {
    x: f64,
    y: f64,
    /// `w / σ²`
    c: f64,
}

/// Particle clouds packed for repeated objective/gradient evaluation.
///
/// Zero-weight particles are dropped; they contribute nothing to any FIM.
#[derive(Debug, Clone)]
pub struct DoptProblem {
    sources: Vec<Vec<WeightedPoint>>,
}

impl DoptProblem {
    pub fn new(clouds: &[ParticleCloud], noise: NoiseModel) -> Self {
        let inv_var = 1.0 / noise.variance();
        let sources = clouds
            .iter()
            .map(|cloud| {
                cloud
                    .positions()
                    .iter()
                    .zip(cloud.weights().as_slice())
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(p, &w)| WeightedPoint {
                        x: p.x,
                        y: p.y,
                        c: w * inv_var,
                    })
                    .collect()
            })
            .collect();
        DoptProblem { sources }
    }

    pub fn source_count(&self) -> usize {
        self.sources.len()
    }

    fn source_fim(points: &[WeightedPoint], sensors: &[Point2]) -> Matrix2 {
        let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
        for s in sensors {
            for p in points {
                let dx = p.x - s.x;
                let dy = p.y - s.y;
                let q = clamped_sq(dx * dx + dy * dy);
                let k = p.c / (q * q);
                a11 += k * dy * dy;
                a12 -= k * dx * dy;
                a22 += k * dx * dx;
            }
        }
        Matrix2::symmetric(a11, a12, a22)
    }

    /// Per-source FIMs (without jitter).
    pub fn source_fims(&self, sensors: &[Point2]) -> Vec<Matrix2> {
        self.sources
            .iter()
            .map(|pts| Self::source_fim(pts, sensors))
            .collect()
    }

    pub fn objective(&self, sensors: &[Point2]) -> f64 {
        self.sources
            .iter()
            .map(|pts| Self::source_fim(pts, sensors).regularized(JITTER).det().ln())
            .sum()
    }

    /// Returns the objective and writes `∂Φ/∂s_r` into `grad[2r..2r+2]`.
    pub fn objective_and_gradient(&self, sensors: &[Point2], grad: &mut [f64]) -> f64 {
        assert_eq!(grad.len(), 2 * sensors.len());
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for pts in &self.sources {
            let f = Self::source_fim(pts, sensors).regularized(JITTER);
            let det = f.det();
            total += det.ln();
            let Some(g) = f.inverse() else {
                continue;
            };
            let (g11, g12, g22) = (g.a11, g.a12, g.a22);
            for (r, s) in sensors.iter().enumerate() {
                // d/dδ of tr(G · c (δ⊥ δ⊥ᵀ) / q²) with δ⊥ = (δy, -δx);
                // the sensor gradient is its negation.
                let (mut gx, mut gy) = (0.0, 0.0);
                for p in pts {
                    let dx = p.x - s.x;
                    let dy = p.y - s.y;
                    let q = dx * dx + dy * dy;
                    let u = g11 * dy * dy - 2.0 * g12 * dx * dy + g22 * dx * dx;
                    let dux = 2.0 * (g22 * dx - g12 * dy);
                    let duy = 2.0 * (g11 * dy - g12 * dx);
                    if q >= RHO_MIN_SQ {
                        let inv_q2 = p.c / (q * q);
                        let radial = 4.0 * u / q;
                        gx += inv_q2 * (dux - radial * dx);
                        gy += inv_q2 * (duy - radial * dy);
                    } else {
                        let inv_q2 = p.c / (RHO_MIN_SQ * RHO_MIN_SQ);
                        gx += inv_q2 * dux;
                        gy += inv_q2 * duy;
                    }
                }
                grad[2 * r] -= gx;
                grad[2 * r + 1] -= gy;
            }
        }
        total
    }
}

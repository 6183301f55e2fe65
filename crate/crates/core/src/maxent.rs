//! Minimum-KL particle reweighting under a sliced-Wasserstein accuracy budget.
//!
//! Against a Dirac target at `x̂`, the squared sliced Wasserstein distance of
//! a weighted particle measure is linear in the weights,
//! `SW₂² = Σ_i w_i g_i` with `g_i = (1/L) Σ_ℓ ⟨x_i − x̂, d_ℓ⟩²`. Minimizing
//! `KL(w ‖ w⁻)` subject to `Σ w_i g_i ≤ ε²` is then solved by the
//! exponential tilt `w_i(λ) ∝ w⁻_i exp(−λ g_i)` with the multiplier fixed by
//! bisection on the non-increasing map `h(λ) = Σ w_i(λ) g_i`.

use alloc::vec::Vec;
use core::f64::consts::TAU;

#[allow(unused_imports)] // inherent float methods shadow it whenever std is linked
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fim::WeightVector;
use crate::geometry::Point2;
use crate::particle_filter::{weighted_mean, ParticleCloud};

/// Cap on the multiplier when the budget cannot be met.
pub const LAMBDA_MAX: f64 = 1e6;
/// Bisection stops once `|h(λ) − ε²| ≤ BISECTION_RTOL · ε²`.
pub const BISECTION_RTOL: f64 = 1e-10;
pub const MAX_BISECTIONS: usize = 200;

/// Unit projection directions in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    directions: Vec<Point2>,
}

impl ProjectionSet {
    pub fn new(directions: Vec<Point2>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::invalid("projections", "need at least one direction"));
        }
        if directions.iter().any(|d| (d.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::invalid("projections", "directions must be unit vectors"));
        }
        Ok(ProjectionSet { directions })
    }

    pub fn directions(&self) -> &[Point2] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Per-particle transport cost to the Dirac target, in length².
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector(Vec<f64>);

impl CostVector {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if g.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
            return Err(Error::invalid("costs", "entries must be finite and >= 0"));
        }
        Ok(CostVector(g))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Σ w_i g_i`.
    pub fn expectation(&self, w: &WeightVector) -> f64 {
        self.0.iter().zip(w.as_slice()).map(|(g, w)| g * w).sum()
    }
}

/// Accuracy budget `ε` in length units; constraints use `ε²`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AccuracyBudget(f64);

impl AccuracyBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || epsilon.is_nan() {
            return Err(Error::invalid("epsilon", "must be > 0"));
        }
        Ok(AccuracyBudget(epsilon))
    }

    pub fn epsilon(self) -> f64 {
        self.0
    }

    pub fn squared(self) -> f64 {
        self.0 * self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltSolution {
    pub weights: WeightVector,
    pub lambda: f64,
    /// Whether the accuracy constraint binds (`λ > 0`).
    pub active: bool,
    /// `KL(weights ‖ prior)`.
    pub kl_divergence: f64,
    /// `Σ w_i g_i` at the returned weights.
    pub achieved_cost: f64,
    /// Set when no tilt reaches the budget and `λ` was capped at [`LAMBDA_MAX`].
    pub unreachable: bool,
    pub bisection_steps: usize,
}

/// `count` directions `(cos θ, sin θ)` with `θ ~ U[0, 2π)`.
pub fn sample_directions<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Result<ProjectionSet> {
    if count == 0 {
        return Err(Error::invalid("projections", "need at least one direction"));
    }
    let directions = (0..count)
        .map(|_| {
            let theta = TAU * rng.random::<f64>();
            let (s, c) = theta.sin_cos();
            Point2::new(c, s)
        })
        .collect();
    Ok(ProjectionSet { directions })
}

/// The Dirac target location: the prior-weighted particle mean.
pub fn target_mean(cloud: &ParticleCloud) -> Point2 {
    weighted_mean(cloud)
}

/// `g_i = (1/L) Σ_ℓ ⟨x_i − mean, d_ℓ⟩²`.
pub fn projection_costs(cloud: &ParticleCloud, mean: Point2, dirs: &ProjectionSet) -> CostVector {
    let inv_l = 1.0 / dirs.len() as f64;
    let g = cloud
        .positions()
        .iter()
        .map(|&x| {
            let delta = x - mean;
            dirs.directions
                .iter()
                .map(|&d| {
                    let proj = delta.dot(d);
                    proj * proj
                })
                .sum::<f64>()
                * inv_l
        })
        .collect();
    CostVector(g)
}

/// Smallest cost over the prior's support.
fn support_min(prior: &WeightVector, g: &CostVector) -> f64 {
    prior
        .as_slice()
        .iter()
        .zip(&g.0)
        .filter(|(&w, _)| w > 0.0)
        .map(|(_, &gi)| gi)
        .fold(f64::INFINITY, f64::min)
}

/// `w_i ∝ w⁻_i exp(−λ g_i)`.
///
/// Exponents are shifted by the smallest cost on the prior's support so at
/// least one term is exactly `w⁻_i`, which keeps large `λ g_i` from
/// underflowing every weight. Zero prior entries stay zero.
pub fn exponential_tilt(prior: &WeightVector, g: &CostVector, lambda: f64) -> WeightVector {
    if lambda == 0.0 {
        return prior.clone();
    }
    let gmin = support_min(prior, g);
    let mut w: Vec<f64> = prior
        .as_slice()
        .iter()
        .zip(&g.0)
        .map(|(&p, &gi)| if p > 0.0 { p * (-lambda * (gi - gmin)).exp() } else { 0.0 })
        .collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    WeightVector::from_raw(w)
}

fn solution(prior: &WeightVector, g: &CostVector, lambda: f64, unreachable: bool, steps: usize) -> TiltSolution {
    let weights = exponential_tilt(prior, g, lambda);
    TiltSolution {
        kl_divergence: weights.kl_divergence(prior),
        achieved_cost: g.expectation(&weights),
        weights,
        lambda,
        active: lambda > 0.0,
        unreachable,
        bisection_steps: steps,
    }
}

/// Solves `min KL(w ‖ prior)` s.t. `Σ w_i g_i ≤ ε²`.
///
/// A feasible prior is returned untouched with `λ = 0`. Otherwise `λ` is
/// bracketed by doubling from 1 and refined by bisection until
/// `|h(λ) − ε²| ≤ 1e-10·ε²` or 200 halvings. If the budget lies at or below
/// the smallest supported cost the solver returns the `λ = LAMBDA_MAX` tilt
/// with `unreachable` set.
pub fn solve_lambda(prior: &WeightVector, g: &CostVector, budget: AccuracyBudget) -> TiltSolution {
    let eps2 = budget.squared();
    let h0 = g.expectation(prior);
    if h0 <= eps2 {
        return TiltSolution {
            weights: prior.clone(),
            lambda: 0.0,
            active: false,
            kl_divergence: 0.0,
            achieved_cost: h0,
            unreachable: false,
            bisection_steps: 0,
        };
    }
    if support_min(prior, g) >= eps2 {
        return solution(prior, g, LAMBDA_MAX, true, 0);
    }

    let h = |lambda: f64| g.expectation(&exponential_tilt(prior, g, lambda));
    let tol = BISECTION_RTOL * eps2;

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut h_hi = h(hi);
    while h_hi > eps2 && hi < LAMBDA_MAX {
        lo = hi;
        hi = (2.0 * hi).min(LAMBDA_MAX);
        h_hi = h(hi);
    }
    if h_hi > eps2 {
        return solution(prior, g, LAMBDA_MAX, true, 0);
    }
    if (h_hi - eps2).abs() <= tol {
        return solution(prior, g, hi, false, 0);
    }

    // invariant: h(lo) > ε² ≥ h(hi)
    let mut steps = 0;
    let mut lambda = hi;
    while steps < MAX_BISECTIONS {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let hm = h(mid);
        if (hm - eps2).abs() <= tol {
            lambda = mid;
            break;
        }
        if hm > eps2 {
            lo = mid;
        } else {
            hi = mid;
        }
        lambda = hi;
    }
    solution(prior, g, lambda, false, steps)
}

/// Layer-1 reweighting of one source's cloud: Dirac target at the prior mean,
/// `projections` fresh directions from `rng`, then [`solve_lambda`].
pub fn maxent_reweight<R: Rng + ?Sized>(
    cloud: &ParticleCloud,
    budget: AccuracyBudget,
    projections: usize,
    rng: &mut R,
) -> Result<TiltSolution> {
    let mean = target_mean(cloud);
    let dirs = sample_directions(rng, projections)?;
    let g = projection_costs(cloud, mean, &dirs);
    Ok(solve_lambda(cloud.weights(), &g, budget))
}

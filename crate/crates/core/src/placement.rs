//! Sensor placement: multi-start, bound-constrained ascent of the D-optimal
//! objective.
//!
//! Each restart runs a projected limited-memory BFGS iteration on `-Φ`:
//! coordinates pinned at a bound with the gradient pushing outward are frozen,
//! the quasi-Newton direction is computed on the free coordinates, and a
//! backtracking Armijo search runs along the projected path. Steps are only
//! accepted when they do not lower the objective, so the objective trace of a
//! restart is nondecreasing.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

#[allow(unused_imports)] // inherent float methods shadow it whenever std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fim::{total_source_fim, DoptProblem, WeightVector};
use crate::geometry::{NoiseModel, Point2, RHO_MIN_SQ};
use crate::particle_filter::ParticleCloud;

/// Stop when the projected-gradient infinity norm falls below this.
pub const PG_TOLERANCE: f64 = 1e-6;
/// Iteration ceiling per restart.
pub const MAX_ITERATIONS: usize = 500;

const HISTORY: usize = 8;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
const STALL_LIMIT: usize = 5;

/// Axis-aligned rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl DomainBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let all_finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !all_finite || x_min >= x_max || y_min >= y_max {
            return Err(Error::invalid("domain", "needs finite bounds with min < max"));
        }
        Ok(DomainBox {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    /// `[0, side]²`.
    pub fn square(side: f64) -> Result<Self> {
        DomainBox::new(0.0, side, 0.0, side)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn clamp(&self, p: Point2) -> Point2 {
        Point2::new(p.x.clamp(self.x_min, self.x_max), p.y.clamp(self.y_min, self.y_max))
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        Point2::new(self.x_min + u * self.width(), self.y_min + v * self.height())
    }
}

/// Sensor positions, all inside the domain box they were validated against.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensorArray(Vec<Point2>);

impl SensorArray {
    pub fn new(positions: Vec<Point2>, domain: &DomainBox) -> Result<Self> {
        if positions.iter().any(|&p| !domain.contains(p)) {
            return Err(Error::invalid("sensors", "every position must lie in the domain"));
        }
        Ok(SensorArray(positions))
    }

    pub fn uniform<R: Rng + ?Sized>(rng: &mut R, count: usize, domain: &DomainBox) -> Self {
        SensorArray((0..count).map(|_| domain.sample_uniform(rng)).collect())
    }

    pub fn positions(&self) -> &[Point2] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Point2> {
        self.0
    }
}

impl Deref for SensorArray {
    type Target = [Point2];
    fn deref(&self) -> &[Point2] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlacementResult {
    pub sensors: SensorArray,
    pub objective: f64,
    pub restart_index: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn to_points(x: &[f64], out: &mut Vec<Point2>) {
    out.clear();
    out.extend(x.chunks_exact(2).map(|c| Point2::new(c[0], c[1])));
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    fn new(domain: &DomainBox, sensors: usize) -> Self {
        let lo = (0..sensors).flat_map(|_| [domain.x_min, domain.y_min]).collect();
        let hi = (0..sensors).flat_map(|_| [domain.x_max, domain.y_max]).collect();
        Bounds { lo, hi }
    }

    fn project(&self, x: &mut [f64]) {
        for ((v, &lo), &hi) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(lo, hi);
        }
    }

    /// Projected gradient of the minimization problem with gradient `g`.
    fn projected_gradient(&self, x: &[f64], g: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            let blocked = (x[i] <= self.lo[i] && g[i] > 0.0) || (x[i] >= self.hi[i] && g[i] < 0.0);
            out[i] = if blocked { 0.0 } else { g[i] };
        }
    }
}

struct Ascent {
    x: Vec<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

/// Projected L-BFGS on `f = -Φ`.
fn ascend(
    problem: &DoptProblem,
    init: &[Point2],
    domain: &DomainBox,
    mut trace: Option<&mut Vec<f64>>,
) -> Ascent {
    let n = 2 * init.len();
    let bounds = Bounds::new(domain, init.len());
    let mut x: Vec<f64> = init.iter().flat_map(|p| [p.x, p.y]).collect();
    bounds.project(&mut x);

    let mut pts = Vec::with_capacity(init.len());
    to_points(&x, &mut pts);
    let mut grad = vec![0.0; n];
    let mut phi = problem.objective_and_gradient(&pts, &mut grad);
    if !phi.is_finite() {
        return Ascent {
            x,
            objective: phi,
            iterations: 0,
            converged: false,
        };
    }
    if let Some(t) = trace.as_deref_mut() {
        t.push(phi);
    }
    // minimization gradient
    let mut g: Vec<f64> = grad.iter().map(|v| -v).collect();
    let mut pg = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut xt = vec![0.0; n];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
    let mut alpha_buf = [0.0; HISTORY];
    let extent = domain.width().min(domain.height());
    let max_move = 0.5 * extent;

    let mut iterations = 0;
    let mut converged = false;
    let mut stalled = 0;
    while iterations < MAX_ITERATIONS {
        bounds.projected_gradient(&x, &g, &mut pg);
        let pg_inf = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_inf < PG_TOLERANCE {
            converged = true;
            break;
        }

        // two-loop recursion on the free coordinates
        d.copy_from_slice(&pg);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            alpha_buf[k] = a;
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|di| *di *= gamma);
        }
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &d);
            let a = alpha_buf[k];
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        for i in 0..n {
            d[i] = if pg[i] == 0.0 { 0.0 } else { -d[i] };
        }
        if history.is_empty() || !(dot(&d, &g) < 0.0) {
            history.clear();
            d.iter_mut().zip(&pg).for_each(|(di, p)| *di = -p);
        }

        let steepest = history.is_empty();
        let d_inf = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut alpha = if steepest { (0.1 * extent / d_inf).min(1.0) } else { 1.0 };
        if alpha * d_inf > max_move {
            alpha = max_move / d_inf;
        }

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                xt[i] = x[i] + alpha * d[i];
            }
            bounds.project(&mut xt);
            let decrease: f64 = (0..n).map(|i| g[i] * (xt[i] - x[i])).sum();
            to_points(&xt, &mut pts);
            let phi_t = problem.objective(&pts);
            if phi_t.is_finite() && phi_t >= phi && -phi_t <= -phi + ARMIJO * decrease.min(0.0) {
                accepted = Some(phi_t);
                break;
            }
            alpha *= 0.5;
        }

        let Some(phi_t) = accepted else {
            if steepest {
                // no representable ascent step left along the projected gradient
                break;
            }
            history.clear();
            continue;
        };

        to_points(&xt, &mut pts);
        let phi_new = problem.objective_and_gradient(&pts, &mut grad);
        debug_assert!((phi_new - phi_t).abs() <= 1e-9 * phi_t.abs().max(1.0));
        let s: Vec<f64> = (0..n).map(|i| xt[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| -grad[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == HISTORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x.copy_from_slice(&xt);
        // steps that no longer change the objective mean we sit on a kink
        // (typically the clamp ring around a particle)
        stalled = if phi_t > phi { 0 } else { stalled + 1 };
        phi = phi_t;
        g.iter_mut().zip(&grad).for_each(|(gi, v)| *gi = -v);
        iterations += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(phi);
        }
        if stalled >= STALL_LIMIT {
            break;
        }
    }
    if !converged {
        bounds.projected_gradient(&x, &g, &mut pg);
        converged = pg.iter().all(|v| v.abs() < PG_TOLERANCE);
    }
    Ascent {
        x,
        objective: phi,
        iterations,
        converged,
    }
}

fn finish(ascent: Ascent, restart_index: usize) -> PlacementResult {
    let mut pts = Vec::new();
    to_points(&ascent.x, &mut pts);
    PlacementResult {
        sensors: SensorArray(pts),
        objective: ascent.objective,
        restart_index,
        iterations: ascent.iterations,
        converged: ascent.converged,
    }
}

/// One bound-constrained ascent from `init`. Positions outside the domain are
/// clamped first.
pub fn local_ascent(
    init: &[Point2],
    clouds: &[ParticleCloud],
    noise: NoiseModel,
    domain: &DomainBox,
) -> PlacementResult {
    let problem = DoptProblem::new(clouds, noise);
    finish(ascend(&problem, init, domain, None), 0)
}

/// [`local_ascent`] that also returns the objective after every accepted step
/// (the first entry is the objective at `init`).
pub fn local_ascent_traced(
    init: &[Point2],
    clouds: &[ParticleCloud],
    noise: NoiseModel,
    domain: &DomainBox,
) -> (PlacementResult, Vec<f64>) {
    let problem = DoptProblem::new(clouds, noise);
    let mut trace = Vec::new();
    let res = finish(ascend(&problem, init, domain, Some(&mut trace)), 0);
    (res, trace)
}

/// Best of `restarts` ascents, each started from `sensors` positions drawn
/// uniformly in the domain.
///
/// Every restart owns a ChaCha substream seeded from one `u64` drawn from
/// `rng`, so `rng` advances by exactly `restarts` words. Ties go to the lowest
/// restart index.
pub fn optimize_placement<R: Rng + ?Sized>(
    clouds: &[ParticleCloud],
    noise: NoiseModel,
    domain: &DomainBox,
    sensors: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<PlacementResult> {
    if restarts == 0 {
        return Err(Error::invalid("restarts", "must be >= 1"));
    }
    if sensors == 0 {
        return Err(Error::invalid("sensors", "count must be >= 1"));
    }
    let problem = DoptProblem::new(clouds, noise);
    let seeds: Vec<u64> = (0..restarts).map(|_| rng.next_u64()).collect();
    let mut best: Option<PlacementResult> = None;
    for (k, seed) in seeds.into_iter().enumerate() {
        let mut sub = ChaCha8Rng::seed_from_u64(seed);
        let init = SensorArray::uniform(&mut sub, sensors, domain);
        let res = finish(ascend(&problem, &init, domain, None), k);
        let better = match &best {
            None => true,
            Some(b) => res.objective > b.objective || (!b.objective.is_finite() && res.objective.is_finite()),
        };
        if better {
            best = Some(res);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Quantities in the weight-sensitivity bound for one source:
/// `|Φ(w_a) − Φ(w_b)| ≤ R·K_m / (λ_min σ²) · ‖w_a − w_b‖₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSensitivity {
    /// `|log det F(w_a) − log det F(w_b)|`
    pub objective_change: f64,
    /// Right-hand side of the bound.
    pub bound: f64,
    /// Smaller of the two FIMs' minimum eigenvalues.
    pub lambda_min: f64,
    /// `max_{i,r} 1/ρ²` over particles and sensors.
    pub k_max: f64,
}

impl WeightSensitivity {
    pub fn holds(&self) -> bool {
        self.objective_change <= self.bound
    }
}

pub fn weight_sensitivity(
    particles: &[Point2],
    w_a: &WeightVector,
    w_b: &WeightVector,
    sensors: &[Point2],
    noise: NoiseModel,
) -> WeightSensitivity {
    let fa = total_source_fim(particles, w_a, sensors, noise);
    let fb = total_source_fim(particles, w_b, sensors, noise);
    let lambda_min = fa.symmetric_eigenvalues().0.min(fb.symmetric_eigenvalues().0);
    let k_max = particles
        .iter()
        .flat_map(|&p| sensors.iter().map(move |&s| 1.0 / (p - s).norm_sq().max(RHO_MIN_SQ)))
        .fold(0.0f64, f64::max);
    let bound = sensors.len() as f64 * k_max / (lambda_min * noise.variance()) * w_a.l1_distance(w_b);
    WeightSensitivity {
        objective_change: (fa.det().ln() - fb.det().ln()).abs(),
        bound,
        lambda_min,
        k_max,
    }
}

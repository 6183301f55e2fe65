//! One seeded run of the sequential two-layer placement loop.
//!
//! Randomness is split into named ChaCha streams derived from the scenario
//! seed. Each stream is only ever advanced by its own consumer, so the
//! baseline and the reweighted method see identical particles, initial
//! sensors and bearing noise for the same seed, and a reweighting that
//! returns the prior reproduces the baseline bit for bit.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, TAU};
use core::fmt;

#[allow(unused_imports)] // inherent float methods shadow it whenever std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{is_degenerate, simulate_measurement, NoiseModel, Point2};
use crate::maxent::{maxent_reweight, AccuracyBudget};
use crate::particle_filter::{
    covariance_trace, effective_sample_size, init_cloud, systematic_resample, update_weights,
    weighted_mean, MeasurementSet, ParticleCloud,
};
use crate::placement::{optimize_placement, DomainBox};

/// Side length of the corner patch the initial sensors are scattered in.
pub const SENSOR_INIT_PATCH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    /// D-optimal placement on the filter's current weights.
    #[cfg_attr(feature = "serde", serde(rename = "dopt"))]
    DoptBaseline,
    /// D-optimal placement on minimum-KL reweighted particles.
    MaxEnt,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::DoptBaseline, Method::MaxEnt];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::DoptBaseline => "dopt",
            Method::MaxEnt => "maxent",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "dopt" | "dopt_baseline" => Some(Method::DoptBaseline),
            "maxent" => Some(Method::MaxEnt),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named random streams carved out of one scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    ParticleInit = 0,
    MeasurementNoise = 1,
    Directions = 2,
    Restarts = 3,
    Resampling = 4,
}

impl Stream {
    pub fn rng(self, seed: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self as u64);
        rng
    }
}

/// Full configuration of one trial.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub sources: usize,
    pub sensors: usize,
    /// Bearing noise standard deviation, radians.
    pub sigma: f64,
    pub iterations: usize,
    pub particles: usize,
    pub epsilon: f64,
    pub projections: usize,
    pub restarts: usize,
    pub domain: DomainBox,
    pub seed: u64,
    pub method: Method,
}

impl Scenario {
    /// Defaults: `T = 10`, `N = 1000`, `ε = 0.5`, `L = 50`, `K = 3`,
    /// domain `[0, 20]²`.
    pub fn new(sources: usize, sensors: usize, sigma: f64, seed: u64, method: Method) -> Self {
        Scenario {
            sources,
            sensors,
            sigma,
            iterations: 10,
            particles: 1000,
            epsilon: 0.5,
            projections: 50,
            restarts: 3,
            domain: DomainBox {
                x_min: 0.0,
                x_max: 20.0,
                y_min: 0.0,
                y_max: 20.0,
            },
            seed,
            method,
        }
    }

    pub fn with_method(&self, method: Method) -> Self {
        Scenario { method, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sources", self.sources),
            ("sensors", self.sensors),
            ("iterations", self.iterations),
            ("particles", self.particles),
            ("projections", self.projections),
            ("restarts", self.restarts),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::invalid(field, "must be >= 1"));
            }
        }
        NoiseModel::new(self.sigma)?;
        AccuracyBudget::new(self.epsilon)?;
        DomainBox::new(self.domain.x_min, self.domain.x_max, self.domain.y_min, self.domain.y_max)?;
        Ok(())
    }
}

/// Per-iteration summary for filmstrip rendering.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Snapshot {
    pub iteration: usize,
    pub estimates: Vec<Point2>,
    pub covariance_traces: Vec<f64>,
    pub sensors: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialRecord {
    pub seed: u64,
    pub method: Method,
    pub truths: Vec<Point2>,
    /// `T + 1` values; index 0 is the prior.
    pub rmse_per_iteration: Vec<f64>,
    pub final_estimates: Vec<Point2>,
    /// `T + 1` arrays; index 0 is the initial deployment.
    pub sensor_history: Vec<Vec<Point2>>,
    /// `T × M`, after the weight update and before any resample.
    pub ess_history: Vec<Vec<f64>>,
    /// `T × M`; always false for the baseline.
    pub layer1_active_history: Vec<Vec<bool>>,
    /// Layer-1 solves that hit the multiplier cap.
    pub layer1_unreachable: usize,
    pub resample_count: usize,
    /// Sensor/source pairs closer than the range clamp at measurement time.
    pub clamped_measurements: usize,
    pub snapshots: Vec<Snapshot>,
}

impl TrialRecord {
    pub fn final_rmse(&self) -> f64 {
        *self.rmse_per_iteration.last().expect("at least the prior RMSE")
    }
}

/// `M` sources on a ring of radius `0.35·min(width, height)` about the
/// domain center, the first at the top.
pub fn source_layout(count: usize, domain: &DomainBox) -> Vec<Point2> {
    let center = domain.center();
    let radius = 0.35 * domain.width().min(domain.height());
    (0..count)
        .map(|k| {
            let a = TAU * k as f64 / count as f64 + FRAC_PI_2;
            center + Point2::new(radius * a.cos(), radius * a.sin())
        })
        .collect()
}

/// `sqrt(mean ‖estimate − truth‖²)`.
pub fn rmse(estimates: &[Point2], truths: &[Point2]) -> Result<f64> {
    Error::check_len("estimates", truths.len(), estimates.len())?;
    if truths.is_empty() {
        return Err(Error::invalid("estimates", "need at least one source"));
    }
    let sum: f64 = estimates.iter().zip(truths).map(|(&e, &t)| (e - t).norm_sq()).sum();
    Ok((sum / truths.len() as f64).sqrt())
}

fn snapshot(iteration: usize, clouds: &[ParticleCloud], sensors: &[Point2]) -> Snapshot {
    Snapshot {
        iteration,
        estimates: clouds.iter().map(weighted_mean).collect(),
        covariance_traces: clouds.iter().map(covariance_trace).collect(),
        sensors: sensors.to_vec(),
    }
}

/// Runs the sequential loop for one scenario.
pub fn run_trial(scenario: &Scenario) -> Result<TrialRecord> {
    scenario.validate()?;
    let domain = scenario.domain;
    let noise = NoiseModel::new(scenario.sigma)?;
    let budget = AccuracyBudget::new(scenario.epsilon)?;
    let m_count = scenario.sources;
    let n = scenario.particles;

    let mut init_rng = Stream::ParticleInit.rng(scenario.seed);
    let mut noise_rng = Stream::MeasurementNoise.rng(scenario.seed);
    let mut dir_rng = Stream::Directions.rng(scenario.seed);
    let mut restart_rng = Stream::Restarts.rng(scenario.seed);
    let mut resample_rng = Stream::Resampling.rng(scenario.seed);

    let truths = source_layout(m_count, &domain);
    let mut clouds = (0..m_count)
        .map(|_| init_cloud(&mut init_rng, n, &domain))
        .collect::<Result<Vec<_>>>()?;
    let corner = Point2::new(domain.x_min, domain.y_min);
    let mut sensors: Vec<Point2> = (0..scenario.sensors)
        .map(|_| {
            let u: f64 = init_rng.random();
            let v: f64 = init_rng.random();
            domain.clamp(corner + Point2::new(u, v) * SENSOR_INIT_PATCH)
        })
        .collect();

    let estimates: Vec<Point2> = clouds.iter().map(weighted_mean).collect();
    let mut rmse_per_iteration = Vec::with_capacity(scenario.iterations + 1);
    rmse_per_iteration.push(rmse(&estimates, &truths)?);
    let mut sensor_history = Vec::with_capacity(scenario.iterations + 1);
    sensor_history.push(sensors.clone());
    let mut snapshots = Vec::with_capacity(scenario.iterations + 1);
    snapshots.push(snapshot(0, &clouds, &sensors));
    let mut ess_history = Vec::with_capacity(scenario.iterations);
    let mut layer1_active_history = Vec::with_capacity(scenario.iterations);
    let mut layer1_unreachable = 0;
    let mut resample_count = 0;
    let mut clamped_measurements = 0;

    for t in 1..=scenario.iterations {
        // Layer 1
        let mut active = Vec::with_capacity(m_count);
        let placement_clouds: Vec<ParticleCloud> = match scenario.method {
            Method::DoptBaseline => {
                active.resize(m_count, false);
                clouds.clone()
            }
            Method::MaxEnt => clouds
                .iter()
                .map(|cloud| {
                    let sol = maxent_reweight(cloud, budget, scenario.projections, &mut dir_rng)?;
                    active.push(sol.active);
                    layer1_unreachable += usize::from(sol.unreachable);
                    cloud.with_weights(sol.weights)
                })
                .collect::<Result<_>>()?,
        };
        layer1_active_history.push(active);

        // Layer 2
        let placed = optimize_placement(
            &placement_clouds,
            noise,
            &domain,
            scenario.sensors,
            scenario.restarts,
            &mut restart_rng,
        )?;
        let new_sensors = placed.sensors.into_inner();

        // measurements and filter update, source-major then sensor order
        let mut ess_row = Vec::with_capacity(m_count);
        for (cloud, &truth) in clouds.iter_mut().zip(&truths) {
            let bearings = new_sensors
                .iter()
                .map(|&s| {
                    clamped_measurements += usize::from(is_degenerate(s, truth));
                    simulate_measurement(&mut noise_rng, truth, s, noise)
                })
                .collect();
            let weights = update_weights(cloud, &MeasurementSet { bearings }, &new_sensors, noise)?;
            let ess = effective_sample_size(&weights);
            cloud.set_weights(weights)?;
            ess_row.push(ess);
            if ess < 0.5 * n as f64 {
                *cloud = systematic_resample(&mut resample_rng, cloud);
                resample_count += 1;
            }
        }
        ess_history.push(ess_row);

        sensors = new_sensors;
        let estimates: Vec<Point2> = clouds.iter().map(weighted_mean).collect();
        rmse_per_iteration.push(rmse(&estimates, &truths)?);
        sensor_history.push(sensors.clone());
        snapshots.push(snapshot(t, &clouds, &sensors));
    }

    Ok(TrialRecord {
        seed: scenario.seed,
        method: scenario.method,
        final_estimates: clouds.iter().map(weighted_mean).collect(),
        truths,
        rmse_per_iteration,
        sensor_history,
        ess_history,
        layer1_active_history,
        layer1_unreachable,
        resample_count,
        clamped_measurements,
        snapshots,
    })
}

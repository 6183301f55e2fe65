use std::collections::BTreeMap;

use bearing_core::trial::run_trial;
use bearing_core::{Method, Scenario, TrialRecord};
use rayon::prelude::*;

use crate::error::RunError;

/// The cartesian product swept by [`run_sweep`]; both methods run on every
/// point. `template` supplies the fields that do not vary.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub sources: Vec<usize>,
    pub sensors: Vec<usize>,
    pub sigma_deg: Vec<f64>,
    pub seeds: Vec<u64>,
    pub template: Scenario,
}

impl GridSpec {
    /// Full grid: `M, R ∈ 3..=10`, `σ ∈ {8°, 15°}`, seeds `1..=20`.
    pub fn full(template: Scenario) -> Self {
        GridSpec {
            sources: (3..=10).collect(),
            sensors: (3..=10).collect(),
            sigma_deg: vec![8.0, 15.0],
            seeds: (1..=20).collect(),
            template,
        }
    }

    /// `M ∈ {3, 5}`, `R ∈ {3, 10}`, both noise levels, 5 seeds.
    pub fn quick(template: Scenario) -> Self {
        GridSpec {
            sources: vec![3, 5],
            sensors: vec![3, 10],
            sigma_deg: vec![8.0, 15.0],
            seeds: (1..=5).collect(),
            template,
        }
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &m in &self.sources {
            for &r in &self.sensors {
                for &s in &self.sigma_deg {
                    for &seed in &self.seeds {
                        out.push(GridPoint {
                            sources: m,
                            sensors: r,
                            sigma_deg: s,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }

    /// Grid points; each runs both methods on the same seed.
    pub fn trial_count(&self) -> usize {
        self.sources.len() * self.sensors.len() * self.sigma_deg.len() * self.seeds.len()
    }

    pub fn scenario(&self, p: &GridPoint, method: Method) -> Scenario {
        Scenario {
            sources: p.sources,
            sensors: p.sensors,
            sigma: p.sigma_deg.to_radians(),
            seed: p.seed,
            method,
            ..self.template.clone()
        }
    }

    fn validate(&self) -> Result<(), RunError> {
        for (field, empty) in [
            ("sources", self.sources.is_empty()),
            ("sensors", self.sensors.is_empty()),
            ("sigma-deg", self.sigma_deg.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ] {
            if empty {
                return Err(RunError::config(field, "needs at least one value"));
            }
        }
        for p in self.points() {
            self.scenario(&p, Method::DoptBaseline).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub sources: usize,
    pub sensors: usize,
    pub sigma_deg: f64,
    pub seed: u64,
}

/// One row of the per-trial table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub sources: usize,
    pub sensors: usize,
    pub sigma_deg: f64,
    pub method: Method,
    pub seed: u64,
    /// `T + 1` values.
    pub rmse: Vec<f64>,
}

impl TrialRow {
    pub fn from_record(p: &GridPoint, record: &TrialRecord) -> Self {
        TrialRow {
            sources: p.sources,
            sensors: p.sensors,
            sigma_deg: p.sigma_deg,
            method: record.method,
            seed: record.seed,
            rmse: record.rmse_per_iteration.clone(),
        }
    }

    pub fn final_rmse(&self) -> f64 {
        self.rmse.last().copied().unwrap_or(f64::NAN)
    }

    fn key(&self) -> CellKey {
        CellKey::new(self.sources, self.sensors, self.sigma_deg)
    }
}

/// Mean and sample standard deviation (`n − 1`; zero for a single value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Stats {
                mean: f64::NAN,
                std: f64::NAN,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stats { mean, std, count: n }
    }
}

/// Aggregated final RMSE for one `(M, R, σ)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub sources: usize,
    pub sensors: usize,
    pub sigma_deg: f64,
    pub dopt: Stats,
    pub maxent: Stats,
    /// `100·(dopt − maxent)/dopt` on the means.
    pub improvement: f64,
}

/// Per-iteration RMSE band for one cell and method.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub sources: usize,
    pub sensors: usize,
    pub sigma_deg: f64,
    pub method: Method,
    pub iteration: usize,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavingRow {
    pub sources: usize,
    pub sigma_deg: f64,
    pub saving: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Ordered by grid point, dopt before maxent.
    pub trials: Vec<TrialRow>,
    /// Ordered by `(M, R, σ)`.
    pub cells: Vec<CellSummary>,
}

// σ is only ever compared for identity, so its bit pattern is a fine key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct CellKey {
    sources: usize,
    sensors: usize,
    sigma: OrdF64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl CellKey {
    fn new(sources: usize, sensors: usize, sigma_deg: f64) -> Self {
        CellKey {
            sources,
            sensors,
            sigma: OrdF64(sigma_deg),
        }
    }
}

pub fn improvement(dopt: f64, maxent: f64) -> f64 {
    100.0 * (dopt - maxent) / dopt
}

impl SweepResult {
    /// Aggregates trial rows; rows may arrive in any order.
    pub fn from_trials(trials: Vec<TrialRow>) -> Self {
        let mut groups: BTreeMap<CellKey, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for t in &trials {
            let e = groups.entry(t.key()).or_default();
            match t.method {
                Method::DoptBaseline => e.0.push(t.final_rmse()),
                Method::MaxEnt => e.1.push(t.final_rmse()),
            }
        }
        let cells = groups
            .into_iter()
            .map(|(k, (d, m))| {
                let dopt = Stats::of(&d);
                let maxent = Stats::of(&m);
                CellSummary {
                    sources: k.sources,
                    sensors: k.sensors,
                    sigma_deg: k.sigma.0,
                    dopt,
                    maxent,
                    improvement: improvement(dopt.mean, maxent.mean),
                }
            })
            .collect();
        SweepResult { trials, cells }
    }

    pub fn cell(&self, sources: usize, sensors: usize, sigma_deg: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.sources == sources && c.sensors == sensors && c.sigma_deg == sigma_deg)
    }

    pub fn convergence(&self) -> Vec<ConvergenceRow> {
        let mut groups: BTreeMap<(CellKey, Method), Vec<&[f64]>> = BTreeMap::new();
        for t in &self.trials {
            groups.entry((t.key(), t.method)).or_default().push(&t.rmse);
        }
        let mut out = Vec::new();
        for ((k, method), series) in groups {
            let len = series.iter().map(|s| s.len()).min().unwrap_or(0);
            for iteration in 0..len {
                let column: Vec<f64> = series.iter().map(|s| s[iteration]).collect();
                out.push(ConvergenceRow {
                    sources: k.sources,
                    sensors: k.sensors,
                    sigma_deg: k.sigma.0,
                    method,
                    iteration,
                    stats: Stats::of(&column),
                });
            }
        }
        out
    }

    /// One row per swept `(M, σ)`.
    pub fn savings(&self) -> Vec<SavingRow> {
        let mut keys: Vec<(usize, OrdF64)> = self.cells.iter().map(|c| (c.sources, OrdF64(c.sigma_deg))).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|(m, s)| SavingRow {
                sources: m,
                sigma_deg: s.0,
                saving: sensor_saving(self, m, s.0),
            })
            .collect()
    }
}

/// Largest `R_f − R_m` such that maxent with `R_m` sensors is no worse than
/// dopt with `R_f`, over the swept `R` values for this `(M, σ)`; zero when no
/// pair qualifies.
pub fn sensor_saving(sweep: &SweepResult, sources: usize, sigma_deg: f64) -> usize {
    let cells: Vec<&CellSummary> = sweep
        .cells
        .iter()
        .filter(|c| c.sources == sources && c.sigma_deg == sigma_deg)
        .collect();
    let mut best = 0;
    for f in &cells {
        for m in &cells {
            if f.sensors > m.sensors && m.maxent.mean <= f.dopt.mean {
                best = best.max(f.sensors - m.sensors);
            }
        }
    }
    best
}

/// Runs both methods on every grid point with `workers` threads. The
/// result does not depend on `workers`.
pub fn run_sweep(grid: &GridSpec, workers: usize) -> Result<SweepResult, RunError> {
    grid.validate()?;
    if workers == 0 {
        return Err(RunError::config("workers", "must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::config("workers", e.to_string()))?;
    let jobs: Vec<(GridPoint, Method)> = grid
        .points()
        .into_iter()
        .flat_map(|p| Method::ALL.into_iter().map(move |m| (p, m)))
        .collect();
    let trials = pool.install(|| {
        jobs.par_iter()
            .map(|(p, method)| {
                let record = run_trial(&grid.scenario(p, *method))?;
                Ok(TrialRow::from_record(p, &record))
            })
            .collect::<Result<Vec<_>, bearing_core::Error>>()
    })?;
    Ok(SweepResult::from_trials(trials))
}

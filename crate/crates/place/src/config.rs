use std::fs;
use std::path::{Path, PathBuf};

use bearing_core::{DomainBox, Method, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::RunError;
use crate::sweep::GridSpec;

pub const CONFIG_FILE: &str = "effective_config.toml";

/// Everything a `trial` or `sweep` invocation needs. A single trial is a
/// grid with one value per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub sources: Vec<usize>,
    pub sensors: Vec<usize>,
    pub sigma_deg: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `None` runs both methods.
    pub method: Option<Method>,
    pub iterations: usize,
    pub particles: usize,
    pub epsilon: f64,
    pub projections: usize,
    pub restarts: usize,
    pub domain: DomainBox,
    pub workers: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = Scenario::new(3, 10, 8f64.to_radians(), 1, Method::DoptBaseline);
        RunConfig {
            sources: vec![base.sources],
            sensors: vec![base.sensors],
            sigma_deg: vec![8.0],
            seeds: vec![base.seed],
            method: None,
            iterations: base.iterations,
            particles: base.particles,
            epsilon: base.epsilon,
            projections: base.projections,
            restarts: base.restarts,
            domain: base.domain,
            workers: default_workers(),
            out: PathBuf::from("results"),
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl RunConfig {
    /// Checks every field and names the first offending one.
    pub fn validate(&self) -> Result<(), RunError> {
        let lists: [(&str, bool); 4] = [
            ("sources", self.sources.is_empty()),
            ("sensors", self.sensors.is_empty()),
            ("sigma-deg", self.sigma_deg.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        for (field, empty) in lists {
            if empty {
                return Err(RunError::config(field, "needs at least one value"));
            }
        }
        if self.sources.contains(&0) {
            return Err(RunError::config("sources", "must be >= 1"));
        }
        if self.sensors.contains(&0) {
            return Err(RunError::config("sensors", "must be >= 1"));
        }
        if let Some(s) = self.sigma_deg.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(RunError::config("sigma-deg", format!("must be positive and finite, got {s}")));
        }
        // TOML integers are signed
        if self.seeds.iter().any(|&s| s > i64::MAX as u64) {
            return Err(RunError::config("seeds", "must fit in a signed 64-bit integer"));
        }
        let counts = [
            ("iterations", self.iterations),
            ("particles", self.particles),
            ("projections", self.projections),
            ("restarts", self.restarts),
            ("workers", self.workers),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(RunError::config(field, "must be >= 1"));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(RunError::config("epsilon", "must be positive and finite"));
        }
        let d = self.domain;
        DomainBox::new(d.x_min, d.x_max, d.y_min, d.y_max)?;
        if self.out.as_os_str().is_empty() {
            return Err(RunError::config("out", "must not be empty"));
        }
        Ok(())
    }

    /// Scenario template for one grid cell.
    pub fn scenario(&self, sources: usize, sensors: usize, sigma_deg: f64, seed: u64, method: Method) -> Scenario {
        Scenario {
            sources,
            sensors,
            sigma: sigma_deg.to_radians(),
            iterations: self.iterations,
            particles: self.particles,
            epsilon: self.epsilon,
            projections: self.projections,
            restarts: self.restarts,
            domain: self.domain,
            seed,
            method,
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            sources: self.sources.clone(),
            sensors: self.sensors.clone(),
            sigma_deg: self.sigma_deg.clone(),
            seeds: self.seeds.clone(),
            template: self.scenario(1, 1, 1.0, 0, Method::DoptBaseline),
        }
    }

    pub fn methods(&self) -> Vec<Method> {
        match self.method {
            Some(m) => vec![m],
            None => Method::ALL.to_vec(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable")
    }

    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::config("config", e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, RunError> {
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, self.to_toml()).map_err(|e| RunError::io(&path, e))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = RunConfig::default();
        assert_eq!(c.iterations, 10);
        assert_eq!(c.particles, 1000);
        assert_eq!(c.epsilon, 0.5);
        assert_eq!(c.projections, 50);
        assert_eq!(c.restarts, 3);
        assert_eq!(c.domain, DomainBox::square(20.0).unwrap());
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_is_exact() {
        let c = RunConfig {
            sources: vec![3, 4, 5],
            sigma_deg: vec![8.0, 15.0, 0.1 + 0.2],
            seeds: vec![1, 7, i64::MAX as u64],
            method: Some(Method::MaxEnt),
            epsilon: 1.0 / 3.0,
            out: PathBuf::from("some/dir"),
            ..RunConfig::default()
        };
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        let both = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&both.to_toml()).unwrap(), both);
    }

    #[test]
    fn validation_names_the_field() {
        let field_of = |c: RunConfig| match c.validate() {
            Err(RunError::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field_of(RunConfig { sources: vec![], ..Default::default() }), "sources");
        assert_eq!(field_of(RunConfig { sensors: vec![3, 0], ..Default::default() }), "sensors");
        assert_eq!(field_of(RunConfig { sigma_deg: vec![-1.0], ..Default::default() }), "sigma-deg");
        assert_eq!(field_of(RunConfig { epsilon: 0.0, ..Default::default() }), "epsilon");
        assert_eq!(field_of(RunConfig { particles: 0, ..Default::default() }), "particles");
        assert_eq!(field_of(RunConfig { workers: 0, ..Default::default() }), "workers");
        assert_eq!(field_of(RunConfig { seeds: vec![u64::MAX], ..Default::default() }), "seeds");
    }
}

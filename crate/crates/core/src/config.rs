//! Run configuration and world construction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Result};
use crate::params::{PolicyKind, SimParams};
use crate::series::{ExogenousSeries, SeriesDefaults};
use crate::sim::Simulation;
use crate::synthpop::{instantiate_city, CitySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub params: SimParams,
    /// Explicit monthly series; built from `series_defaults` when absent.
    pub series: Option<ExogenousSeries>,
    pub series_defaults: SeriesDefaults,
    pub scenario: PolicyKind,
    pub seed: u64,
    pub horizon_months: u32,
    pub city: CitySpec,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            params: SimParams::default(),
            series: None,
            series_defaults: SeriesDefaults::default(),
            scenario: PolicyKind::Baseline,
            seed: 42,
            horizon_months: 120,
            city: CitySpec::default(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let c: Config = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        self.city.validate()?;
        let d = &self.series_defaults;
        if self.series.is_none() {
            if !(d.baseline_rate > 0.0) {
                return Err(ConfigError::NonPositiveRate {
                    month: 0,
                    value: d.baseline_rate,
                });
            }
            if !(d.mortgage_rate > 0.0) {
                return Err(ConfigError::NonPositiveMortgageRate {
                    month: 0,
                    value: d.mortgage_rate,
                });
            }
        }
        if let Some(s) = &self.series {
            s.validate(self.horizon_months as usize, s.population_target.len())?;
        }
        Ok(())
    }

    /// Builds the initial world for `seed` and the series that drives it.
    pub fn build(&self, seed: u64) -> Result<Simulation> {
        self.build_with(&self.params, self.scenario, seed)
    }

    pub fn build_with(
        &self,
        params: &SimParams,
        scenario: PolicyKind,
        seed: u64,
    ) -> Result<Simulation> {
        params.validate()?;
        let (specs, tables) = self.city.inputs()?;
        let r0 = match &self.series {
            Some(s) => s
                .baseline_rate
                .first()
                .copied()
                .unwrap_or(self.series_defaults.baseline_rate),
            None => self.series_defaults.baseline_rate,
        };
        let mut world = instantiate_city(&specs, &tables, params, &self.city, seed, r0)?;
        world.policy = scenario;
        let horizon = self.horizon_months as usize;
        let series = match &self.series {
            Some(s) => s.clone(),
            None => ExogenousSeries::from_defaults(
                &self.series_defaults,
                horizon,
                &world.municipal_population(),
            ),
        };
        series.validate(horizon, world.municipalities.len())?;
        Ok(Simulation::new(world, params.clone(), series))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_rejected() {
        let err = Config::from_json(r#"{"series_defaults": {"baseline_rate": 0.0}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::NonPositiveRate { .. }));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_json(r#"{"paramz": {}}"#).is_err());
        assert!(Config::from_json(r#"{"params": {"alpha": 0.5}, "horizon_months": 12}"#).is_ok());
    }
}

//! Exogenous monthly inputs.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, SimError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSeries {
    /// Baseline monthly interest rate paid on deposits.
    pub baseline_rate: Vec<f64>,
    /// Monthly mortgage rate for loans originated in that month.
    pub mortgage_rate: Vec<f64>,
    /// Number of new firms entering each month.
    pub firm_entry: Vec<u32>,
    /// Target headcount per municipality (outer) and month (inner).
    pub population_target: Vec<Vec<u64>>,
}

/// Settings used to build a series when the config does not supply one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesDefaults {
    pub baseline_rate: f64,
    pub mortgage_rate: f64,
    /// A new firm enters every this many months (0 disables entry).
    pub firm_entry_every: u32,
    /// Annual population growth used for migration targets.
    pub annual_growth: f64,
}

impl Default for SeriesDefaults {
    fn default() -> Self {
        SeriesDefaults {
            baseline_rate: 0.0004,
            mortgage_rate: 0.0015,
            firm_entry_every: 6,
            annual_growth: 0.01,
        }
    }
}

impl ExogenousSeries {
    pub fn from_defaults(d: &SeriesDefaults, horizon: usize, initial_pop: &[u64]) -> Self {
        let growth = (1.0 + d.annual_growth).max(0.0);
        ExogenousSeries {
            baseline_rate: vec![d.baseline_rate; horizon],
            mortgage_rate: vec![d.mortgage_rate; horizon],
            firm_entry: (0..horizon)
                .map(|t| {
                    u32::from(d.firm_entry_every > 0 && (t as u32 + 1).is_multiple_of(d.firm_entry_every))
                })
                .collect(),
            population_target: initial_pop
                .iter()
                .map(|&p| {
                    (0..horizon)
                        .map(|t| (p as f64 * growth.powf((t + 1) as f64 / 12.0)).round() as u64)
                        .collect()
                })
                .collect(),
        }
    }

    pub fn validate(&self, horizon: usize, municipalities: usize) -> Result<(), ConfigError> {
        for (name, len) in [
            ("baseline_rate", self.baseline_rate.len()),
            ("mortgage_rate", self.mortgage_rate.len()),
            ("firm_entry", self.firm_entry.len()),
        ] {
            if len < horizon {
                return Err(ConfigError::SeriesTooShort {
                    series: name,
                    len,
                    horizon,
                });
            }
        }
        if self.population_target.len() != municipalities {
            return Err(ConfigError::SeriesShape {
                got: self.population_target.len(),
                expected: municipalities,
            });
        }
        for row in &self.population_target {
            if row.len() < horizon {
                return Err(ConfigError::SeriesTooShort {
                    series: "population_target",
                    len: row.len(),
                    horizon,
                });
            }
        }
        for (month, &r) in self.baseline_rate.iter().enumerate() {
            if !(r > 0.0 && r.is_finite()) {
                return Err(ConfigError::NonPositiveRate { month, value: r });
            }
        }
        for (month, &r) in self.mortgage_rate.iter().enumerate() {
            if !(r > 0.0 && r.is_finite()) {
                return Err(ConfigError::NonPositiveMortgageRate { month, value: r });
            }
        }
        Ok(())
    }

    /// Number of months every series covers.
    pub fn len(&self) -> usize {
        let mut n = self
            .baseline_rate
            .len()
            .min(self.mortgage_rate.len())
            .min(self.firm_entry.len());
        for row in &self.population_target {
            n = n.min(row.len());
        }
        n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn month(&self, t: u32) -> Result<MonthInputs<'_>, SimError> {
        let i = t as usize;
        if i >= self.len() {
            return Err(SimError::HorizonExhausted {
                month: t,
                len: self.len(),
            });
        }
        Ok(MonthInputs {
            baseline_rate: self.baseline_rate[i],
            mortgage_rate: self.mortgage_rate[i],
            firm_entry: self.firm_entry[i],
            series: self,
            index: i,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MonthInputs<'a> {
    pub baseline_rate: f64,
    pub mortgage_rate: f64,
    pub firm_entry: u32,
    series: &'a ExogenousSeries,
    index: usize,
}

impl MonthInputs<'_> {
    pub fn population_target(&self, municipality: usize) -> u64 {
        self.series
            .population_target
            .get(municipality)
            .map_or(0, |row| row[self.index])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_horizon() {
        let s = ExogenousSeries::from_defaults(&SeriesDefaults::default(), 24, &[100, 200]);
        s.validate(24, 2).unwrap();
        assert_eq!(s.firm_entry.iter().sum::<u32>(), 4);
        assert_eq!(s.population_target[1][11], 202);
        assert!(matches!(
            s.month(24),
            Err(SimError::HorizonExhausted { month: 24, len: 24 })
        ));
    }

    #[test]
    fn rejects_zero_rate_and_short_series() {
        let mut s = ExogenousSeries::from_defaults(&SeriesDefaults::default(), 12, &[10]);
        s.baseline_rate[3] = 0.0;
        assert!(matches!(
            s.validate(12, 1),
            Err(ConfigError::NonPositiveRate { month: 3, .. })
        ));
        let s = ExogenousSeries::from_defaults(&SeriesDefaults::default(), 12, &[10]);
        assert!(matches!(
            s.validate(13, 1),
            Err(ConfigError::SeriesTooShort { .. })
        ));
        assert!(matches!(
            s.validate(12, 2),
            Err(ConfigError::SeriesShape { .. })
        ));
    }
}

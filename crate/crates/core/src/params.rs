//! Model parameters and scenario selection.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ConfigError;

/// Which poverty-alleviation policy municipalities run.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    #[default]
    Baseline,
    Acquisition,
    Voucher,
    Aid,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Baseline,
        PolicyKind::Acquisition,
        PolicyKind::Voucher,
        PolicyKind::Aid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Baseline => "baseline",
            PolicyKind::Acquisition => "acquisition",
            PolicyKind::Voucher => "voucher",
            PolicyKind::Aid => "aid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

/// Base for the firm-level tax.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FirmTaxBase {
    /// Rate applied to the month's positive profit.
    #[default]
    Profit,
    /// Rate applied to gross monthly revenue.
    Revenue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Fraction of the real population instantiated.
    pub pop: f64,
    /// Productivity exponent.
    pub alpha: f64,
    /// Productivity divisor.
    pub beta: f64,
    /// Probability that a firm enters the labor market in a month.
    pub iota: f64,
    /// Fraction of vacancies ranking candidates by distance only.
    pub eta: f64,
    /// Monthly fraction of households entering the sales market.
    pub phi: f64,
    /// Sample size for hiring, rental and sales searches.
    pub sigma: u32,
    /// Goods-market sample size.
    pub varsigma: u32,
    pub rho_plus: f64,
    pub rho_minus: f64,
    /// Weight of neighborhood income in asking prices.
    pub tau: f64,
    /// Lower bound of the time-on-market discount.
    pub gamma: f64,
    /// Time-on-market decay rate (non-positive).
    pub kappa: f64,
    pub markup_pi: f64,
    /// Municipal efficiency in turning taxes into quality of life.
    pub psi: f64,
    /// Maximum loans-to-deposits ratio of the bank.
    pub nu: f64,
    /// Maximum loan payment as a share of permanent income.
    pub chi: f64,
    /// Construction cash-flow horizon in months.
    pub n_months: u32,
    /// Lot cost premium.
    pub upsilon: f64,
    /// Probability that a firm keeps its price this month.
    pub zeta: f64,
    /// Share of municipal taxes diverted to the policy.
    pub delta: f64,
    /// Income quantile below which households are registered.
    pub theta: f64,
    pub ltv: f64,
    /// Share of vacant listings routed to the rental market.
    pub rental_share: f64,
    /// Initial share of vacant dwellings.
    pub vacancy_share: f64,
    /// Monthly rent as a fraction of the dwelling value.
    pub rental_price_fraction: f64,
    pub tax_consumption: f64,
    pub tax_labor: f64,
    pub tax_firm: f64,
    pub tax_transaction: f64,
    /// Monthly rate on the value of owned dwellings.
    pub tax_property: f64,
    /// Months of permanent income kept as reserve money.
    pub reserve_multiple: f64,

    /// Global unemployment discounts wages (switchable structural rule).
    pub wage_unemployment_discount: bool,
    /// Firms selling less than they produce cut prices by the markup.
    pub symmetric_price_down: bool,
    pub firm_tax_base: FirmTaxBase,
    /// Pool all municipal taxes and share them equally among municipalities.
    pub tax_pooling: bool,
    /// Commuting cost per km for car owners.
    pub transport_cost_car: f64,
    /// Commuting cost per km on public transport.
    pub transport_cost_public: f64,
    /// Monthly probability that an unmarried adult enters the marriage pool.
    pub marriage_rate: f64,
    /// Monthly probability that a married adult leaves the household.
    pub divorce_rate: f64,
    /// Largest rent a household accepts, as a share of permanent income.
    pub max_rent_share: f64,
    /// Cash endowment of newly entering firms (currency units).
    pub new_firm_endowment: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            pop: 0.01,
            alpha: 0.6,
            beta: 10.0,
            iota: 0.75,
            eta: 0.3,
            phi: 0.0045,
            sigma: 20,
            varsigma: 5,
            rho_plus: 1.3,
            rho_minus: 0.7,
            tau: 3.0,
            gamma: 0.6,
            kappa: -0.01,
            markup_pi: 0.15,
            psi: 0.00007,
            nu: 0.7,
            chi: 0.5,
            n_months: 24,
            upsilon: 0.15,
            zeta: 0.7,
            delta: 0.2,
            theta: 0.2,
            ltv: 0.8,
            rental_share: 0.3,
            vacancy_share: 0.1,
            rental_price_fraction: 0.0004,
            tax_consumption: 0.05,
            tax_labor: 0.05,
            tax_firm: 0.1,
            tax_transaction: 0.005,
            tax_property: 0.00002,
            reserve_multiple: 6.0,
            wage_unemployment_discount: true,
            symmetric_price_down: false,
            firm_tax_base: FirmTaxBase::Profit,
            tax_pooling: false,
            transport_cost_car: 1.0,
            transport_cost_public: 0.3,
            marriage_rate: 0.002,
            divorce_rate: 0.0,
            max_rent_share: 0.5,
            new_firm_endowment: 0.0,
        }
    }
}

fn unit_interval(name: &'static str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            name,
            value: v,
            reason: "must lie in [0, 1]",
        })
    }
}

fn tax_rate(name: &'static str, v: f64) -> Result<(), ConfigError> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            name,
            value: v,
            reason: "must lie in [0, 1)",
        })
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("iota", self.iota),
            ("eta", self.eta),
            ("phi", self.phi),
            ("gamma", self.gamma),
            ("markup_pi", self.markup_pi),
            ("psi", self.psi),
            ("nu", self.nu),
            ("chi", self.chi),
            ("upsilon", self.upsilon),
            ("zeta", self.zeta),
            ("delta", self.delta),
            ("theta", self.theta),
            ("rental_share", self.rental_share),
            ("rental_price_fraction", self.rental_price_fraction),
            ("marriage_rate", self.marriage_rate),
            ("divorce_rate", self.divorce_rate),
            ("max_rent_share", self.max_rent_share),
        ] {
            unit_interval(name, v)?;
        }
        for (name, v) in [
            ("tax_consumption", self.tax_consumption),
            ("tax_labor", self.tax_labor),
            ("tax_firm", self.tax_firm),
            ("tax_transaction", self.tax_transaction),
            ("tax_property", self.tax_property),
        ] {
            tax_rate(name, v)?;
        }
        if !(self.pop > 0.0 && self.pop <= 0.05) {
            return Err(ConfigError::OutOfRange {
                name: "pop",
                value: self.pop,
                reason: "must lie in (0, 0.05]",
            });
        }
        if !(self.vacancy_share >= 0.0 && self.vacancy_share < 0.5) {
            return Err(ConfigError::OutOfRange {
                name: "vacancy_share",
                value: self.vacancy_share,
                reason: "must lie in [0, 0.5)",
            });
        }
        if !(self.beta > 0.0) {
            return Err(ConfigError::OutOfRange {
                name: "beta",
                value: self.beta,
                reason: "must be positive",
            });
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(ConfigError::OutOfRange {
                name: "alpha",
                value: self.alpha,
                reason: "must be non-negative",
            });
        }
        if !(self.kappa <= 0.0) {
            return Err(ConfigError::OutOfRange {
                name: "kappa",
                value: self.kappa,
                reason: "must be non-positive",
            });
        }
        if !(self.rho_plus >= 1.0) {
            return Err(ConfigError::OutOfRange {
                name: "rho_plus",
                value: self.rho_plus,
                reason: "must be >= 1",
            });
        }
        if !(0.0..=1.0).contains(&self.rho_minus) {
            return Err(ConfigError::OutOfRange {
                name: "rho_minus",
                value: self.rho_minus,
                reason: "must lie in [0, 1]",
            });
        }
        if !(self.ltv > 0.0 && self.ltv <= 1.0) {
            return Err(ConfigError::OutOfRange {
                name: "ltv",
                value: self.ltv,
                reason: "must lie in (0, 1]",
            });
        }
        if !(self.tau >= 0.0) {
            return Err(ConfigError::OutOfRange {
                name: "tau",
                value: self.tau,
                reason: "must be non-negative",
            });
        }
        if self.sigma == 0 {
            return Err(ConfigError::OutOfRange {
                name: "sigma",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        if self.varsigma == 0 {
            return Err(ConfigError::OutOfRange {
                name: "varsigma",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        if self.n_months == 0 {
            return Err(ConfigError::OutOfRange {
                name: "n_months",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        if !(self.reserve_multiple >= 0.0) {
            return Err(ConfigError::OutOfRange {
                name: "reserve_multiple",
                value: self.reserve_multiple,
                reason: "must be non-negative",
            });
        }
        if !(self.transport_cost_car >= 0.0 && self.transport_cost_public >= 0.0) {
            return Err(ConfigError::OutOfRange {
                name: "transport_cost",
                value: self.transport_cost_car.min(self.transport_cost_public),
                reason: "must be non-negative",
            });
        }
        if !(self.new_firm_endowment >= 0.0) {
            return Err(ConfigError::OutOfRange {
                name: "new_firm_endowment",
                value: self.new_firm_endowment,
                reason: "must be non-negative",
            });
        }
        Ok(())
    }

    /// Upper-case names accepted by [`SimParams::set_by_name`].
    pub fn parameter_names() -> Vec<String> {
        match serde_json::to_value(SimParams::default()) {
            Ok(Value::Object(map)) => map
                .into_iter()
                .filter(|(_, v)| v.is_number() || v.is_boolean())
                .map(|(k, _)| k.to_uppercase())
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Sets a numeric or boolean parameter by its (case-insensitive) name.
    /// Integer parameters are rounded; booleans take `value != 0`.
    pub fn set_by_name(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        let key = name.to_lowercase();
        let unknown = || ConfigError::UnknownParameter {
            name: name.to_string(),
            valid: SimParams::parameter_names().join(", "),
        };
        let Value::Object(mut map) = serde_json::to_value(&*self)? else {
            return Err(unknown());
        };
        let slot = map.get_mut(&key).ok_or_else(unknown)?;
        *slot = match slot {
            Value::Bool(_) => Value::Bool(value != 0.0),
            Value::Number(n) if n.is_u64() => {
                if value < 0.0 || !value.is_finite() {
                    return Err(ConfigError::OutOfRange {
                        name: "integer parameter",
                        value,
                        reason: "must be a non-negative integer",
                    });
                }
                Value::from(value.round() as u64)
            }
            Value::Number(_) => serde_json::Number::from_f64(value)
                .map(Value::Number)
                .ok_or_else(unknown)?,
            _ => return Err(unknown()),
        };
        *self = serde_json::from_value(Value::Object(map))?;
        Ok(())
    }

    /// Share of taxes diverted to policy under `kind`.
    pub fn policy_share(&self, kind: PolicyKind) -> f64 {
        match kind {
            PolicyKind::Baseline => 0.0,
            _ => self.delta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_standard_run_table() {
        let p = SimParams::default();
        assert_eq!(p.pop, 0.01);
        assert_eq!(p.alpha, 0.6);
        assert_eq!(p.beta, 10.0);
        assert_eq!(p.iota, 0.75);
        assert_eq!(p.eta, 0.3);
        assert_eq!(p.phi, 0.0045);
        assert_eq!(p.sigma, 20);
        assert_eq!(p.varsigma, 5);
        assert_eq!(p.rho_plus, 1.3);
        assert_eq!(p.rho_minus, 0.7);
        assert_eq!(p.tau, 3.0);
        assert_eq!(p.gamma, 0.6);
        assert_eq!(p.kappa, -0.01);
        assert_eq!(p.markup_pi, 0.15);
        assert_eq!(p.psi, 0.00007);
        assert_eq!(p.nu, 0.7);
        assert_eq!(p.chi, 0.5);
        assert_eq!(p.n_months, 24);
        assert_eq!(p.upsilon, 0.15);
        assert_eq!(p.zeta, 0.7);
        assert_eq!(p.delta, 0.2);
        assert_eq!(p.theta, 0.2);
        assert_eq!(p.reserve_multiple, 6.0);
        p.validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range() {
        let bad = [
            SimParams {
                beta: 0.0,
                ..Default::default()
            },
            SimParams {
                kappa: 0.01,
                ..Default::default()
            },
            SimParams {
                rho_plus: 0.9,
                ..Default::default()
            },
            SimParams {
                ltv: 0.0,
                ..Default::default()
            },
            SimParams {
                eta: 1.5,
                ..Default::default()
            },
            SimParams {
                tax_labor: 1.0,
                ..Default::default()
            },
            SimParams {
                pop: 0.2,
                ..Default::default()
            },
            SimParams {
                vacancy_share: 0.5,
                ..Default::default()
            },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn set_by_name_handles_types() {
        let mut p = SimParams::default();
        p.set_by_name("ALPHA", 0.25).unwrap();
        assert_eq!(p.alpha, 0.25);
        p.set_by_name("sigma", 7.4).unwrap();
        assert_eq!(p.sigma, 7);
        p.set_by_name("WAGE_UNEMPLOYMENT_DISCOUNT", 0.0).unwrap();
        assert!(!p.wage_unemployment_discount);
        let err = p.set_by_name("NOPE", 1.0).unwrap_err();
        assert!(err.to_string().contains("ALPHA"));
    }

    #[test]
    fn partial_json_fills_defaults() {
        let p: SimParams = serde_json::from_str(r#"{"alpha": 0.5}"#).unwrap();
        assert_eq!(p.alpha, 0.5);
        assert_eq!(p.beta, 10.0);
        assert!(serde_json::from_str::<SimParams>(r#"{"alhpa": 0.5}"#).is_err());
    }
}

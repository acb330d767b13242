//! Money ledger snapshots and conservation checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::ids::*;
use crate::state::World;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Account {
    Person(PersonId),
    /// Savings plus reserve money.
    Household(HouseholdId),
    Firm(FirmId),
    Bank,
    /// Treasury, pending tax receipts and voucher escrow.
    Municipality(MunicipalityId),
    External,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub balances: BTreeMap<Account, i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConservationReport {
    pub drift: i128,
    pub total: i128,
    pub violated: bool,
}

/// Relative drift above which a step is rejected.
pub const TOLERANCE: f64 = 1e-9;

impl LedgerSnapshot {
    pub fn total(&self) -> i128 {
        self.balances.values().map(|&v| v as i128).sum()
    }

    pub fn set(&mut self, account: Account, minor: i64) {
        self.balances.insert(account, minor);
    }

    /// Adds zero-balance entries for accounts that were legitimately opened
    /// (`opened`) after, or closed (`closed`) before, the other snapshot.
    pub fn pad(&mut self, accounts: &[Account]) {
        for a in accounts {
            self.balances.entry(*a).or_insert(0);
        }
    }
}

pub fn check_conservation(
    before: &LedgerSnapshot,
    after: &LedgerSnapshot,
) -> Result<ConservationReport, SimError> {
    if before.balances.len() != after.balances.len()
        || before
            .balances
            .keys()
            .zip(after.balances.keys())
            .any(|(a, b)| a != b)
    {
        let missing: Vec<String> = before
            .balances
            .keys()
            .filter(|k| !after.balances.contains_key(k))
            .chain(
                after
                    .balances
                    .keys()
                    .filter(|k| !before.balances.contains_key(k)),
            )
            .take(5)
            .map(|k| format!("{k:?}"))
            .collect();
        return Err(SimError::Structural(format!(
            "account sets differ: {}",
            missing.join(", ")
        )));
    }
    let (tb, ta) = (before.total(), after.total());
    let drift = ta - tb;
    let scale = (tb.unsigned_abs() as f64).max(1.0);
    Ok(ConservationReport {
        drift,
        total: ta,
        violated: (drift.unsigned_abs() as f64) / scale > TOLERANCE,
    })
}

impl World {
    pub fn ledger_snapshot(&self) -> LedgerSnapshot {
        let mut s = LedgerSnapshot::default();
        for p in self.persons.values() {
            s.set(Account::Person(p.id), p.cash.minor());
        }
        let mut muni: Vec<i64> = self
            .municipalities
            .iter()
            .map(|m| (m.treasury + m.receipts.total()).minor())
            .collect();
        for h in self.households.values() {
            s.set(Account::Household(h.id), (h.savings + h.reserve).minor());
            if let Some(v) = &h.voucher {
                muni[v.municipality.index()] += v.escrow.minor();
            }
        }
        for f in self.firms.values() {
            s.set(Account::Firm(f.id), f.cash.minor());
        }
        for (i, v) in muni.into_iter().enumerate() {
            s.set(Account::Municipality(MunicipalityId(i as u32)), v);
        }
        s.set(Account::Bank, self.bank.equity.minor());
        s.set(Account::External, self.external.minor());
        s
    }

    /// Fast total used for per-phase checks.
    pub fn money_total(&self) -> i128 {
        let mut t: i128 = self.bank.equity.minor() as i128 + self.external.minor() as i128;
        t += self
            .persons
            .values()
            .map(|p| p.cash.minor() as i128)
            .sum::<i128>();
        for h in self.households.values() {
            t += (h.savings + h.reserve).minor() as i128;
            if let Some(v) = &h.voucher {
                t += v.escrow.minor() as i128;
            }
        }
        t += self
            .firms
            .values()
            .map(|f| f.cash.minor() as i128)
            .sum::<i128>();
        t += self
            .municipalities
            .iter()
            .map(|m| (m.treasury + m.receipts.total()).minor() as i128)
            .sum::<i128>();
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(entries: &[(Account, i64)]) -> LedgerSnapshot {
        LedgerSnapshot {
            balances: entries.iter().copied().collect(),
        }
    }

    #[test]
    fn identical_snapshots_have_zero_drift() {
        let a = snap(&[(Account::Bank, 100), (Account::External, -100)]);
        let r = check_conservation(&a, &a).unwrap();
        assert_eq!(r.drift, 0);
        assert!(!r.violated);
    }

    #[test]
    fn internal_transfer_has_zero_drift() {
        let a = snap(&[
            (Account::Firm(FirmId(0)), 50),
            (Account::Person(PersonId(0)), 0),
        ]);
        let b = snap(&[
            (Account::Firm(FirmId(0)), 40),
            (Account::Person(PersonId(0)), 10),
        ]);
        assert_eq!(check_conservation(&a, &b).unwrap().drift, 0);
    }

    #[test]
    fn migrant_endowment_booked_to_external() {
        let mut before = snap(&[(Account::External, 0)]);
        let after = snap(&[
            (Account::External, -50),
            (Account::Household(HouseholdId(3)), 50),
        ]);
        before.pad(&[Account::Household(HouseholdId(3))]);
        let r = check_conservation(&before, &after).unwrap();
        assert_eq!(r.drift, 0);
    }

    #[test]
    fn mismatched_accounts_are_structural() {
        let a = snap(&[(Account::Bank, 1)]);
        let b = snap(&[(Account::Bank, 1), (Account::External, 0)]);
        assert!(matches!(
            check_conservation(&a, &b),
            Err(SimError::Structural(_))
        ));
    }

    #[test]
    fn unbooked_money_is_flagged() {
        let a = snap(&[(Account::Bank, 1_000_000_000)]);
        let b = snap(&[(Account::Bank, 1_000_000_002)]);
        let r = check_conservation(&a, &b).unwrap();
        assert_eq!(r.drift, 2);
        assert!(r.violated);
    }
}

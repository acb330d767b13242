//! Rents, municipal taxes, quality-of-life investment and housing policies.

use crate::goods::draw_household;
use crate::housing::occupy;
use crate::ids::{DwellingId, HouseholdId, MunicipalityId};
use crate::money::{apportion, Money};
use crate::params::{PolicyKind, SimParams};
use crate::state::{Owner, TaxKind, TaxReceipts, Voucher, World};

pub const VOUCHER_MONTHS: u32 = 24;

/// Collects rents, from the tenant's vouchers first and then from the
/// tenant's own funds. Shortfalls are lost to the landlord and flag the
/// tenant as defaulting.
pub fn collect_rent(w: &mut World) {
    let tenants: Vec<HouseholdId> = w
        .households
        .values()
        .filter(|h| h.rental.is_some())
        .map(|h| h.id)
        .collect();
    for hid in tenants {
        let rental = w.households[&hid]
            .rental
            .clone()
            .expect("tenant has a contract");
        let landlord = w.dwellings[&rental.dwelling].owner;
        if landlord == Owner::Household(hid) {
            w.households.get_mut(&hid).expect("tenant").rental = None;
            continue;
        }
        let mut paid = Money::ZERO;
        let h = w.households.get_mut(&hid).expect("tenant");
        if let Some(v) = h.voucher.as_mut() {
            let covered = rental.rent.min(v.escrow);
            v.escrow -= covered;
            v.months_left = v.months_left.saturating_sub(1);
            paid += covered;
            if v.months_left == 0 || v.escrow.is_zero() {
                let left = v.escrow;
                let m = v.municipality;
                h.voucher = None;
                w.municipalities[m.index()].treasury += left;
            }
        }
        paid += draw_household(w, hid, rental.rent - paid);
        w.households.get_mut(&hid).expect("tenant").defaulted_rent = paid < rental.rent;
        match landlord {
            Owner::Household(l) => match w.households.get_mut(&l) {
                Some(owner) => {
                    owner.savings += paid;
                    owner.income_month += paid;
                }
                None => w.external += paid,
            },
            Owner::Firm(f) => w.firms.get_mut(&f).expect("landlord firm").cash += paid,
        }
    }
}

/// Monthly property tax on the value of household-owned dwellings, paid as
/// far as the owner's funds allow.
pub fn collect_property_tax(w: &mut World, p: &SimParams) {
    if p.tax_property <= 0.0 {
        return;
    }
    let owners: Vec<(HouseholdId, Vec<DwellingId>)> = w
        .households
        .values()
        .filter(|h| !h.owned.is_empty())
        .map(|h| (h.id, h.owned.iter().copied().collect()))
        .collect();
    for (hid, owned) in owners {
        for d in owned {
            let dw = &w.dwellings[&d];
            let muni = w.region_municipality(dw.region);
            let due = Money::from_units(dw.value * p.tax_property);
            let paid = draw_household(w, hid, due);
            w.credit_tax(muni, TaxKind::Property, paid);
        }
    }
}

/// Quality-of-life increment: `taxes * psi * pop_prev / pop_now`.
pub fn qli_increment(taxes: f64, psi: f64, pop_prev: u64, pop_now: u64) -> f64 {
    if pop_now == 0 {
        return 0.0;
    }
    taxes * psi * pop_prev as f64 / pop_now as f64
}

/// Households below the metropolitan `theta`-quantile of prior-year
/// permanent income, split by municipality of residence, poorest first.
pub fn build_registers(w: &World, theta: f64) -> Vec<Vec<HouseholdId>> {
    let mut ranked: Vec<(f64, HouseholdId)> = w
        .households
        .values()
        .map(|h| (h.prior_year_pi(), h.id))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let k = ((theta.clamp(0.0, 1.0) * ranked.len() as f64) + 1e-9).floor() as usize;
    let mut registers = vec![Vec::new(); w.municipalities.len()];
    for &(_, hid) in &ranked[..k.min(ranked.len())] {
        if let Some(m) = w.household_municipality(hid) {
            registers[m.index()].push(hid);
        }
    }
    registers
}

/// Buys the cheapest finished, unsold dwellings in the municipality from
/// builders and gives them to registered households without property.
pub fn acquire(w: &mut World, m: MunicipalityId, register: &[HouseholdId], budget: Money) -> Money {
    let mut supply: Vec<(Money, DwellingId)> = w
        .dwellings
        .values()
        .filter(|d| matches!(d.owner, Owner::Firm(_)) && d.occupant.is_none())
        .filter(|d| w.region_municipality(d.region) == m)
        .map(|d| {
            (
                Money::from_units(if d.ask > 0.0 { d.ask } else { d.value }),
                d.id,
            )
        })
        .collect();
    supply.sort();
    let mut supply = supply.into_iter();
    let mut spent = Money::ZERO;
    for &hid in register {
        if !w.households[&hid].owned.is_empty() {
            continue;
        }
        let Some((price, d)) = supply.next() else {
            break;
        };
        if spent + price > budget {
            break;
        }
        spent += price;
        let Owner::Firm(f) = w.dwellings[&d].owner else {
            unreachable!("supply holds firm-owned dwellings")
        };
        let firm = w.firms.get_mut(&f).expect("builder exists");
        firm.cash += price;
        firm.revenue += price;
        w.dwellings.get_mut(&d).expect("dwelling").owner = Owner::Household(hid);
        w.households
            .get_mut(&hid)
            .expect("recipient")
            .owned
            .insert(d);
        occupy(w, hid, d, None);
        w.activity.acquisitions += 1;
    }
    spent
}

/// Issues vouchers covering the current rent to registered renters without
/// property. The full value is set aside when the voucher is issued.
pub fn issue_vouchers(
    w: &mut World,
    m: MunicipalityId,
    register: &[HouseholdId],
    budget: Money,
) -> Money {
    let mut spent = Money::ZERO;
    for &hid in register {
        let h = &w.households[&hid];
        if !h.owned.is_empty() || h.voucher.is_some() {
            continue;
        }
        let Some(rental) = &h.rental else { continue };
        let escrow = Money::from_minor(rental.rent.minor() * VOUCHER_MONTHS as i64);
        if spent + escrow > budget {
            break;
        }
        spent += escrow;
        let monthly = rental.rent;
        w.households.get_mut(&hid).expect("recipient").voucher = Some(Voucher {
            municipality: m,
            monthly,
            months_left: VOUCHER_MONTHS,
            escrow,
        });
        w.activity.vouchers += 1;
    }
    spent
}

/// Splits the budget equally among registered households as cash.
pub fn pay_aid(w: &mut World, register: &[HouseholdId], budget: Money) -> Money {
    if register.is_empty() || !budget.is_positive() {
        return Money::ZERO;
    }
    let shares = apportion(budget, &vec![1.0; register.len()]);
    for (hid, share) in register.iter().zip(shares) {
        let h = w.households.get_mut(hid).expect("registered household");
        h.reserve += share;
        h.income_month += share;
    }
    w.activity.aid_paid += budget;
    budget
}

/// How one municipality used its receipts this month.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MunicipalReport {
    pub taxes: Money,
    pub qli_investment: Money,
    pub policy_outlay: Money,
    /// Policy money left in the treasury at the end of the month.
    pub carryover: Money,
}

/// Property tax, tax pooling, quality-of-life investment and the policy.
pub fn run_municipal(w: &mut World, p: &SimParams) -> Vec<MunicipalReport> {
    collect_property_tax(w, p);
    let n = w.municipalities.len();
    if n == 0 {
        return Vec::new();
    }
    let mut taxes: Vec<Money> = w
        .municipalities
        .iter_mut()
        .map(|m| std::mem::take(&mut m.receipts).total())
        .collect();
    if p.tax_pooling {
        let pooled: Money = taxes.iter().copied().sum();
        taxes = apportion(pooled, &vec![1.0; n]);
    }
    debug_assert!(w
        .municipalities
        .iter()
        .all(|m| m.receipts == TaxReceipts::default()));
    let pop = w.municipal_population();
    let share = p.policy_share(w.policy);
    let mut reports = Vec::with_capacity(n);
    for (i, &t) in taxes.iter().enumerate() {
        let policy_part = t.scale(share);
        let qli_part = t - policy_part;
        let muni = &mut w.municipalities[i];
        let dq = qli_increment(qli_part.to_units(), p.psi, muni.population_prev, pop[i]);
        muni.population_prev = pop[i];
        muni.treasury += policy_part;
        let regions = muni.regions.clone();
        for r in regions {
            w.regions[r.index()].qli += dq;
        }
        w.external += qli_part;
        w.activity.taxes += t;
        w.activity.qli_investment += qli_part;
        reports.push(MunicipalReport {
            taxes: t,
            qli_investment: qli_part,
            ..Default::default()
        });
    }

    let registers = build_registers(w, p.theta);
    for (i, register) in registers.into_iter().enumerate() {
        let m = MunicipalityId(i as u32);
        let budget = w.municipalities[i].treasury;
        let outlay = match w.policy {
            PolicyKind::Baseline => Money::ZERO,
            PolicyKind::Acquisition => acquire(w, m, &register, budget),
            PolicyKind::Voucher => issue_vouchers(w, m, &register, budget),
            PolicyKind::Aid => pay_aid(w, &register, budget),
        };
        let muni = &mut w.municipalities[i];
        muni.treasury -= outlay;
        muni.policy_spent += outlay;
        muni.register = register;
        reports[i].policy_outlay = outlay;
        reports[i].carryover = muni.treasury;
    }
    reports
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qli_examples() {
        assert_eq!(qli_increment(0.0, 0.00007, 10, 10), 0.0);
        assert!((qli_increment(10_000.0, 0.00007, 10, 10) - 0.7).abs() < 1e-9);
        assert!((qli_increment(10_000.0, 0.00007, 10, 20) - 0.35).abs() < 1e-9);
    }
}

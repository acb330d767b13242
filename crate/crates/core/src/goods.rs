//! Household consumption at the goods and services market.

use rand::seq::{IndexedRandom, SliceRandom};

use crate::ids::{FirmId, HouseholdId};
use crate::money::{draw_in_order, Money};
use crate::params::SimParams;
use crate::rng::chance;
use crate::state::{FirmKind, TaxKind, World};

/// Permanent income written as `i*Y + i*Y/r + w*r` with `i = r/(1+r)`.
/// Algebraically this is `Y + w*r`.
pub fn permanent_income(avg_income: f64, wealth: f64, r: f64) -> f64 {
    let i = r / (1.0 + r);
    i * avg_income + i * (avg_income / r) + wealth * r
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Offer {
    pub firm: FirmId,
    pub distance: f64,
    pub price: f64,
}

/// Picks the nearest offer when `nearest` is set, the cheapest otherwise.
/// Ties go to the earlier offer.
pub fn choose_firm(sample: &[Offer], nearest: bool) -> Option<FirmId> {
    let key = |o: &Offer| if nearest { o.distance } else { o.price };
    sample
        .iter()
        .fold(None::<&Offer>, |best, o| match best {
            Some(b) if key(b) <= key(o) => Some(b),
            _ => Some(o),
        })
        .map(|o| o.firm)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sale {
    pub quantity: f64,
    /// Amount paid by the household, tax included.
    pub spent: Money,
    pub tax: Money,
    /// Budget handed back to the household.
    pub returned: Money,
}

/// Buys as much as `budget` allows, limited by `inventory`.
pub fn settle_sale(budget: Money, price: f64, inventory: f64, tax_rate: f64) -> Sale {
    if !budget.is_positive() || price <= 0.0 || inventory <= 0.0 {
        return Sale {
            quantity: 0.0,
            spent: Money::ZERO,
            tax: Money::ZERO,
            returned: budget,
        };
    }
    let wanted = budget.to_units() / price;
    let (quantity, spent) = if wanted <= inventory {
        (wanted, budget)
    } else {
        (inventory, Money::from_units(inventory * price).min(budget))
    };
    let tax = spent.scale(tax_rate);
    Sale {
        quantity,
        spent,
        tax,
        returned: budget - spent,
    }
}

/// Runs the month's consumption for every household.
pub fn consume_all(w: &mut World, p: &SimParams, r: f64) {
    let mut order: Vec<HouseholdId> = w.households.keys().copied().collect();
    order.shuffle(&mut w.rng.goods);
    let sellers: Vec<FirmId> = w
        .firms
        .values()
        .filter(|f| f.kind == FirmKind::Consumer && f.inventory > 0.0)
        .map(|f| f.id)
        .collect();
    for hid in order {
        let wealth = w.household_wealth(&w.households[&hid]);
        let h = &w.households[&hid];
        let pi = permanent_income(h.income_mean, wealth, r);
        let members = h.members.clone();
        let target = Money::from_units(pi).max_zero();

        let mut funds = Money::ZERO;
        for m in &members {
            funds += w.persons[m].cash;
        }
        let h = w.households.get_mut(&hid).expect("household exists");
        h.pi = pi;
        funds += h.reserve + h.savings;
        h.null_consumption = funds.is_zero();
        if funds.is_zero() || target.is_zero() {
            continue;
        }

        let mut budget = Money::ZERO;
        for m in &members {
            let person = w.persons.get_mut(m).expect("member exists");
            budget += draw_in_order(&mut [&mut person.cash], target - budget);
        }
        let h = w.households.get_mut(&hid).expect("household exists");
        budget += draw_in_order(&mut [&mut h.reserve, &mut h.savings], target - budget);

        let home = w.household_region(hid);
        let live: Vec<FirmId> = sellers
            .iter()
            .copied()
            .filter(|f| w.firms[f].inventory > 0.0)
            .collect();
        let picked: Vec<FirmId> = live
            .choose_multiple(&mut w.rng.goods, p.varsigma as usize)
            .copied()
            .collect();
        let nearest = chance(&mut w.rng.goods, 0.5);
        let offers: Vec<Offer> = picked
            .iter()
            .map(|&f| {
                let firm = &w.firms[&f];
                let distance = home.map_or(0.0, |r| w.distance(r, firm.region));
                Offer {
                    firm: f,
                    distance,
                    price: firm.price,
                }
            })
            .collect();
        let sale = match choose_firm(&offers, nearest) {
            Some(fid) => {
                let firm = &w.firms[&fid];
                let sale = settle_sale(budget, firm.price, firm.inventory, p.tax_consumption);
                let muni = w.region_municipality(firm.region);
                let firm = w.firms.get_mut(&fid).expect("firm exists");
                firm.inventory = (firm.inventory - sale.quantity).max(0.0);
                firm.sold += sale.quantity;
                firm.cash += sale.spent - sale.tax;
                firm.revenue += sale.spent - sale.tax;
                w.credit_tax(muni, TaxKind::Consumption, sale.tax);
                w.activity.goods_sold += sale.quantity;
                w.activity.goods_value += sale.spent.to_units();
                sale
            }
            None => Sale {
                quantity: 0.0,
                spent: Money::ZERO,
                tax: Money::ZERO,
                returned: budget,
            },
        };
        w.households
            .get_mut(&hid)
            .expect("household exists")
            .reserve += sale.returned;
    }
}

/// Draws a household's obligation from member cash, then reserve, then savings.
pub fn draw_household(w: &mut World, hid: HouseholdId, want: Money) -> Money {
    let members = w.households[&hid].members.clone();
    let mut got = Money::ZERO;
    for m in &members {
        let person = w.persons.get_mut(m).expect("member exists");
        got += draw_in_order(&mut [&mut person.cash], want - got);
    }
    let h = w.households.get_mut(&hid).expect("household exists");
    got += draw_in_order(&mut [&mut h.reserve, &mut h.savings], want - got);
    got
}

/// Total money a household can reach: member cash, reserve and savings.
pub fn household_funds(w: &World, hid: HouseholdId) -> Money {
    let h = &w.households[&hid];
    h.members.iter().map(|m| w.persons[m].cash).sum::<Money>() + h.reserve + h.savings
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permanent_income_examples() {
        assert_eq!(permanent_income(0.0, 0.0, 0.01), 0.0);
        for r in [0.001, 0.01, 0.3, 2.0] {
            assert!((permanent_income(100.0, 0.0, r) - 100.0).abs() < 1e-9);
        }
        assert!((permanent_income(100.0, 1000.0, 0.01) - 110.0).abs() < 1e-9);
    }

    #[test]
    fn firm_choice() {
        let one = [Offer {
            firm: FirmId(3),
            distance: 4.0,
            price: 2.0,
        }];
        assert_eq!(choose_firm(&one, true), Some(FirmId(3)));
        assert_eq!(choose_firm(&one, false), Some(FirmId(3)));
        let two = [
            Offer {
                firm: FirmId(0),
                distance: 1.0,
                price: 10.0,
            },
            Offer {
                firm: FirmId(1),
                distance: 5.0,
                price: 1.0,
            },
        ];
        assert_eq!(choose_firm(&two, true), Some(FirmId(0)));
        assert_eq!(choose_firm(&two, false), Some(FirmId(1)));
        assert_eq!(choose_firm(&[], true), None);
    }

    #[test]
    fn sale_examples() {
        let s = settle_sale(Money::from_units(10.0), 2.0, 100.0, 0.0);
        assert_eq!(s.quantity, 5.0);
        assert_eq!(s.spent, Money::from_units(10.0));
        assert_eq!(s.returned, Money::ZERO);

        let s = settle_sale(Money::from_units(10.0), 2.0, 2.0, 0.0);
        assert_eq!(s.quantity, 2.0);
        assert_eq!(s.spent, Money::from_units(4.0));
        assert_eq!(s.returned, Money::from_units(6.0));

        let s = settle_sale(Money::ZERO, 2.0, 2.0, 0.1);
        assert_eq!(s.quantity, 0.0);

        let s = settle_sale(Money::from_units(10.0), 1.0, 100.0, 0.05);
        assert_eq!(s.tax, Money::from_units(0.5));
    }
}

//! Production, pricing, wages and firm accounts.

use rand::Rng;

use crate::ids::{FirmId, PersonId};
use crate::money::{apportion, Money};
use crate::params::{FirmTaxBase, SimParams};
use crate::rng::chance;
use crate::state::{Dwelling, FirmKind, Listing, Owner, TaxKind, World};

/// Monthly output of a workforce: the sum of `q^alpha / beta`.
pub fn production(quals: impl IntoIterator<Item = u8>, alpha: f64, beta: f64) -> f64 {
    quals
        .into_iter()
        .map(|q| (q as f64).powf(alpha) / beta)
        .sum()
}

/// Price after the monthly review. `u` is the uniform draw deciding whether
/// the firm reviews at all (it skips when `u < zeta`).
pub fn next_price(price: f64, sold: f64, produced: f64, p: &SimParams, u: f64) -> f64 {
    if u < p.zeta {
        return price;
    }
    if sold >= produced && sold > 0.0 {
        price * (1.0 + p.markup_pi)
    } else if p.symmetric_price_down && sold < produced {
        price / (1.0 + p.markup_pi)
    } else {
        price
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WagePayment {
    pub gross: Money,
    pub tax: Money,
    pub net: Money,
}

/// Wage rule: each worker gets `TR * (1 - U)` in proportion to `q^alpha`,
/// less labor tax. Gross parts sum exactly to the rounded bill.
pub fn wage_bill(
    revenue: Money,
    unemployment: f64,
    quals: &[u8],
    alpha: f64,
    tax_labor: f64,
) -> Vec<WagePayment> {
    let bill = revenue.max_zero().scale(1.0 - unemployment.clamp(0.0, 1.0));
    let weights: Vec<f64> = quals.iter().map(|&q| (q as f64).powf(alpha)).collect();
    apportion(bill, &weights)
        .into_iter()
        .map(|gross| {
            let tax = gross.scale(tax_labor);
            WagePayment {
                gross,
                tax,
                net: gross - tax,
            }
        })
        .collect()
}

/// Shrinks payments proportionally so the gross total fits within `cash`.
pub fn fit_to_cash(payments: &mut [WagePayment], cash: Money, tax_labor: f64) {
    let bill: Money = payments.iter().map(|w| w.gross).sum();
    if bill <= cash {
        return;
    }
    let weights: Vec<f64> = payments.iter().map(|w| w.gross.minor() as f64).collect();
    for (w, gross) in payments
        .iter_mut()
        .zip(apportion(cash.max_zero(), &weights))
    {
        let tax = gross.scale(tax_labor);
        *w = WagePayment {
            gross,
            tax,
            net: gross - tax,
        };
    }
}

pub fn firm_tax(revenue: Money, wages: Money, p: &SimParams) -> Money {
    match p.firm_tax_base {
        FirmTaxBase::Profit => (revenue - wages).max_zero().scale(p.tax_firm),
        FirmTaxBase::Revenue => revenue.max_zero().scale(p.tax_firm),
    }
}

/// Workers produce. Consumer firms stock goods; construction firms work down
/// their projects and list completed dwellings for sale.
pub fn produce_all(w: &mut World, p: &SimParams) {
    let firm_ids: Vec<FirmId> = w.firms.keys().copied().collect();
    for fid in firm_ids {
        let q = {
            let firm = &w.firms[&fid];
            production(
                firm.employees.iter().map(|e| w.persons[e].qual),
                p.alpha,
                p.beta,
            )
        };
        let firm = w.firms.get_mut(&fid).expect("firm exists");
        firm.produced = q;
        firm.sold = 0.0;
        match firm.kind {
            FirmKind::Consumer => firm.inventory += q,
            FirmKind::Construction => {
                let mut work = Money::from_units(q * firm.price);
                let mut finished = Vec::new();
                for (i, proj) in firm.projects.iter_mut().enumerate() {
                    if work.is_zero() {
                        break;
                    }
                    let used = work.min(proj.cost_remaining);
                    proj.cost_remaining -= used;
                    work -= used;
                    if proj.cost_remaining.is_zero() {
                        finished.push(i);
                    }
                }
                let mut done = Vec::with_capacity(finished.len());
                for &i in finished.iter().rev() {
                    done.push(firm.projects.remove(i));
                }
                for proj in done.into_iter().rev() {
                    let id = w.ids.dwelling();
                    w.dwellings.insert(
                        id,
                        Dwelling {
                            id,
                            region: proj.region,
                            size: proj.size,
                            quality: proj.quality,
                            owner: Owner::Firm(fid),
                            occupant: None,
                            listing: Listing::Sale,
                            months_listed: 0,
                            value: 0.0,
                            ask: 0.0,
                            for_sale: true,
                        },
                    );
                    w.activity.houses_built += 1;
                }
            }
        }
    }
}

/// Closes the month's books: pays wages on last month's revenue, settles the
/// firm tax, records profit and reviews prices.
pub fn pay_firms(w: &mut World, p: &SimParams) {
    let unemployment = if p.wage_unemployment_discount {
        w.unemployment
    } else {
        0.0
    };
    let firm_ids: Vec<FirmId> = w.firms.keys().copied().collect();
    for fid in firm_ids {
        let (staff, quals): (Vec<PersonId>, Vec<u8>) = {
            let firm = &w.firms[&fid];
            firm.employees
                .iter()
                .map(|e| (*e, w.persons[e].qual))
                .unzip()
        };
        let muni = w.region_municipality(w.firms[&fid].region);
        let (base, cash) = (w.firms[&fid].last_revenue, w.firms[&fid].cash);
        let mut pay = wage_bill(base, unemployment, &quals, p.alpha, p.tax_labor);
        fit_to_cash(&mut pay, cash, p.tax_labor);
        let gross: Money = pay.iter().map(|x| x.gross).sum();
        let labor_tax: Money = pay.iter().map(|x| x.tax).sum();
        for (pid, wp) in staff.iter().zip(&pay) {
            let person = w.persons.get_mut(pid).expect("employee exists");
            person.cash += wp.net;
            person.wage = wp.net;
            let hid = person.household;
            w.households
                .get_mut(&hid)
                .expect("household exists")
                .income_month += wp.net;
        }
        w.credit_tax(muni, TaxKind::Labor, labor_tax);

        let firm = w.firms.get_mut(&fid).expect("firm exists");
        firm.cash -= gross;
        let revenue = firm.revenue;
        let tax = firm_tax(revenue, gross, p).min(firm.cash.max_zero());
        firm.cash -= tax;
        firm.profit = revenue - gross - tax;
        firm.wage_pool = gross;
        firm.last_revenue = revenue;
        firm.revenue = Money::ZERO;
        if firm.kind == FirmKind::Consumer {
            let u: f64 = w.rng.firms.random();
            firm.price = next_price(firm.price, firm.sold, firm.produced, p, u);
        }
        w.credit_tax(muni, TaxKind::Firm, tax);
    }
}

/// Adds exogenously entering firms, funded by the external sector.
pub fn enter_firms(w: &mut World, p: &SimParams, count: u32) {
    if w.regions.is_empty() {
        return;
    }
    let consumer_prices: Vec<f64> = w
        .firms
        .values()
        .filter(|f| f.kind == FirmKind::Consumer)
        .map(|f| f.price)
        .collect();
    let price = if consumer_prices.is_empty() {
        crate::synthpop::INITIAL_GOODS_PRICE
    } else {
        consumer_prices.iter().sum::<f64>() / consumer_prices.len() as f64
    };
    for _ in 0..count {
        let region = crate::ids::RegionId(w.rng.firms.random_range(0..w.regions.len() as u32));
        let id = w.ids.firm();
        let mut firm = crate::state::Firm::new(id, region, FirmKind::Consumer, price);
        let endowment = Money::from_units(p.new_firm_endowment);
        firm.cash = endowment;
        w.external -= endowment;
        w.firms.insert(id, firm);
        w.activity.opened.push(crate::ledger::Account::Firm(id));
    }
}

/// Uniformly random employee to let go, if any.
pub fn pick_layoff<R: Rng + ?Sized>(employees: &[PersonId], rng: &mut R) -> Option<PersonId> {
    if employees.is_empty() {
        None
    } else {
        Some(employees[rng.random_range(0..employees.len())])
    }
}

/// True with probability `iota`.
pub fn enters_labor_market<R: Rng + ?Sized>(rng: &mut R, iota: f64) -> bool {
    chance(rng, iota)
}

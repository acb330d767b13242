//! Dwelling prices, rental and sales markets, construction and moving.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::finance::{evaluate_mortgage, Decision};
use crate::ids::{DwellingId, FirmId, HouseholdId, RegionId};
use crate::money::Money;
use crate::params::SimParams;
use crate::rng::chance;
use crate::state::{FirmKind, Listing, Owner, Project, Rental, TaxKind, World};

/// Asking price: `H_s*H_q * QLI * (1 + tau*N_q) * ((1 - gamma)*e^(kappa*T) + gamma)`.
pub fn ask_price(hsq: f64, qli: f64, income_index: f64, months_listed: u32, p: &SimParams) -> f64 {
    let time = (1.0 - p.gamma) * (p.kappa * months_listed as f64).exp() + p.gamma;
    hsq * qli * (1.0 + p.tau * income_index) * time
}

pub fn rent_for(value: f64, fraction: f64) -> f64 {
    value * fraction
}

/// Number of newly vacant dwellings routed to the rental market (rounded down).
pub fn rental_count(vacant: usize, rental_share: f64) -> usize {
    (vacant as f64 * rental_share).floor() as usize
}

/// Profitability of building in a region.
pub fn construction_profit(
    mean_ask: f64,
    hsq: f64,
    f: f64,
    license_price: f64,
    upsilon: f64,
) -> f64 {
    mean_ask - hsq * f * license_price * (1.0 + upsilon)
}

/// Draw of the productivity factor f(pi) ~ U(1, 1 + pi).
pub fn productivity_factor<R: Rng + ?Sized>(rng: &mut R, markup: f64) -> f64 {
    1.0 + markup * rng.random::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Deal {
    /// Savings cover the ask.
    Cash { price: f64 },
    /// Financed with a loan of `loan`.
    Mortgage { price: f64, loan: f64 },
    /// Seller accepted the buyer's savings as a reduced offer.
    Reduced { price: f64 },
    /// Try the next dwelling.
    Next,
    /// Loan declined and no reduced offer: the buyer leaves the market.
    Leave,
}

/// Buyer-seller negotiation over one dwelling.
///
/// `approve` asks the bank for a loan of the given size and returns the
/// approved amount; `accept` draws the seller's answer to a reduced offer.
pub fn negotiate(
    ask: f64,
    savings: f64,
    p: &SimParams,
    approve: impl FnOnce(f64) -> Option<f64>,
    accept: impl FnOnce() -> bool,
) -> Deal {
    let capped = |offer: f64| {
        let price = (ask + offer) / 2.0;
        if offer > 0.0 && ask / offer > p.rho_plus {
            offer * p.rho_plus / 2.0
        } else {
            price
        }
    };
    if savings >= ask {
        return Deal::Cash {
            price: capped(savings),
        };
    }
    let reduced_ok = ask > 0.0 && savings / ask > p.rho_minus;
    match approve(ask - savings) {
        Some(loan) if loan > 0.0 => {
            let price = capped(savings + loan);
            let needed = (price - savings).max(0.0);
            if needed <= 1e-12 {
                return Deal::Cash { price };
            }
            if needed <= loan + 1e-9 && needed / price <= p.ltv {
                return Deal::Mortgage {
                    price,
                    loan: needed,
                };
            }
        }
        _ => {
            if reduced_ok && accept() {
                return Deal::Reduced { price: savings };
            }
            return Deal::Leave;
        }
    }
    if reduced_ok && accept() {
        Deal::Reduced { price: savings }
    } else {
        Deal::Next
    }
}

/// Rank value of a dwelling for moving decisions.
pub fn dwelling_rank(w: &World, d: DwellingId) -> f64 {
    let dw = &w.dwellings[&d];
    dw.hsq() * w.regions[dw.region.index()].qli
}

/// Refreshes the neighborhood income index and every dwelling's value and ask.
pub fn update_prices(w: &mut World, p: &SimParams) {
    let n = w.regions.len();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for h in w.households.values() {
        if let Some(r) = w.household_region(h.id) {
            sum[r.index()] += h.income_mean;
            count[r.index()] += 1;
        }
    }
    let means: Vec<Option<f64>> = (0..n)
        .map(|i| {
            if count[i] > 0 {
                Some(sum[i] / count[i] as f64)
            } else {
                None
            }
        })
        .collect();
    let present: Vec<f64> = means.iter().flatten().copied().collect();
    let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (r, m) in w.regions.iter_mut().zip(&means) {
        r.income_index = match m {
            Some(v) if hi > lo => (v - lo) / (hi - lo),
            _ => 0.5,
        };
    }
    let regions = &w.regions;
    for d in w.dwellings.values_mut() {
        let r = &regions[d.region.index()];
        d.value = ask_price(d.hsq(), r.qli, r.income_index, 0, p);
        d.ask = ask_price(d.hsq(), r.qli, r.income_index, d.months_listed, p);
    }
}

/// Moves a household out of its dwelling, ending any rental contract and
/// handing unused voucher money back to the municipality.
pub fn vacate(w: &mut World, hid: HouseholdId) {
    let h = w.households.get_mut(&hid).expect("household exists");
    if let Some(d) = h.dwelling.take() {
        if let Some(dw) = w.dwellings.get_mut(&d) {
            if dw.occupant == Some(hid) {
                dw.occupant = None;
            }
        }
    }
    h.rental = None;
    if let Some(v) = h.voucher.take() {
        w.municipalities[v.municipality.index()].treasury += v.escrow;
    }
}

pub fn occupy(w: &mut World, hid: HouseholdId, d: DwellingId, rent: Option<Money>) {
    vacate(w, hid);
    let dw = w.dwellings.get_mut(&d).expect("dwelling exists");
    debug_assert!(dw.occupant.is_none());
    dw.occupant = Some(hid);
    dw.listing = Listing::None;
    dw.months_listed = 0;
    dw.for_sale = false;
    let h = w.households.get_mut(&hid).expect("household exists");
    h.dwelling = Some(d);
    h.rental = rent.map(|rent| Rental { dwelling: d, rent });
}

/// Lists every unoccupied dwelling. Firm-owned dwellings and those flagged
/// for sale go to the sales market; of the rest, a `rental_share` fraction
/// (rounded down) goes to rental. Listed dwellings age by one month.
pub fn list_vacant(w: &mut World, p: &SimParams) {
    let mut fresh = Vec::new();
    for d in w.dwellings.values_mut() {
        if d.occupant.is_some() {
            d.listing = Listing::None;
            d.months_listed = 0;
            continue;
        }
        match d.listing {
            Listing::None => {
                if d.for_sale || matches!(d.owner, Owner::Firm(_)) {
                    d.listing = Listing::Sale;
                } else {
                    fresh.push(d.id);
                }
            }
            Listing::Rental if d.for_sale => {
                d.listing = Listing::Sale;
                d.months_listed = 0;
            }
            _ => d.months_listed += 1,
        }
    }
    fresh.shuffle(&mut w.rng.housing);
    let n_rental = rental_count(fresh.len(), p.rental_share);
    for (i, d) in fresh.into_iter().enumerate() {
        w.dwellings.get_mut(&d).expect("listed dwelling").listing = if i < n_rental {
            Listing::Rental
        } else {
            Listing::Sale
        };
    }
}

fn listed(w: &World, kind: Listing) -> Vec<DwellingId> {
    w.dwellings
        .values()
        .filter(|d| d.listing == kind && d.occupant.is_none())
        .map(|d| d.id)
        .collect()
}

/// Share of supply used as the seller's acceptance probability.
fn supply_share(w: &World) -> f64 {
    let listed = w
        .dwellings
        .values()
        .filter(|d| d.listing != Listing::None)
        .count();
    if w.households.is_empty() {
        0.0
    } else {
        (listed as f64 / w.households.len() as f64).clamp(0.0, 1.0)
    }
}

/// Rent a household is willing to pay.
pub fn rent_budget(pi: f64, p: &SimParams) -> f64 {
    (pi * p.max_rent_share).max(0.0)
}

/// Searches the rental listings for one household. Returns the dwelling and
/// agreed rent, or `None` when nothing suitable is found or accepted.
pub fn search_rental(
    w: &mut World,
    p: &SimParams,
    pi: f64,
    current_rank: Option<f64>,
    pool: &[DwellingId],
    within: Option<crate::ids::MunicipalityId>,
) -> Option<(DwellingId, Money)> {
    let open: Vec<DwellingId> = pool
        .iter()
        .copied()
        .filter(|d| {
            let dw = &w.dwellings[d];
            dw.occupant.is_none()
                && dw.listing == Listing::Rental
                && within.is_none_or(|m| w.regions[dw.region.index()].municipality == m)
        })
        .collect();
    let sample: Vec<DwellingId> = open
        .choose_multiple(&mut w.rng.housing, p.sigma as usize)
        .copied()
        .collect();
    if sample.is_empty() {
        return None;
    }
    let budget = rent_budget(pi, p);
    let rent_of = |d: &DwellingId| rent_for(w.dwellings[d].value, p.rental_price_fraction);
    let affordable = sample
        .iter()
        .filter(|d| rent_of(d) <= budget)
        .max_by(|a, b| {
            dwelling_rank(w, **a)
                .total_cmp(&dwelling_rank(w, **b))
                .then(b.cmp(a))
        });
    let (choice, rent) = match affordable {
        Some(d) => (*d, rent_of(d)),
        None => {
            let cheapest = *sample
                .iter()
                .min_by(|a, b| rent_of(a).total_cmp(&rent_of(b)).then(a.cmp(b)))
                .expect("sample is not empty");
            let share = supply_share(w);
            if budget <= 0.0 || !chance(&mut w.rng.housing, share) {
                return None;
            }
            (cheapest, budget)
        }
    };
    if current_rank.is_some_and(|cur| dwelling_rank(w, choice) <= cur) {
        return None;
    }
    Some((choice, Money::from_units(rent).max(Money::from_minor(1))))
}

/// Runs the rental market for `participants`, richest first.
pub fn run_rental_market(w: &mut World, p: &SimParams, participants: &[HouseholdId]) {
    let mut order: Vec<HouseholdId> = participants.to_vec();
    order.sort_by(|a, b| {
        w.households[b]
            .pi
            .total_cmp(&w.households[a].pi)
            .then(a.cmp(b))
    });
    let pool = listed(w, Listing::Rental);
    for hid in order {
        let h = &w.households[&hid];
        let current = h.dwelling.map(|d| dwelling_rank(w, d));
        if let Some((d, rent)) = search_rental(w, p, h.pi, current, &pool, None) {
            occupy(w, hid, d, Some(rent));
            w.activity.rentals += 1;
        }
    }
}

/// Transfers title from the current owner to `buyer` and settles payment.
/// `loan` of the price is financed by the bank; the rest comes from savings.
fn settle_sale(
    w: &mut World,
    p: &SimParams,
    d: DwellingId,
    buyer: HouseholdId,
    price: Money,
    loan: Money,
    rate: f64,
) {
    let owner = w.dwellings[&d].owner;
    let muni = w.region_municipality(w.dwellings[&d].region);
    let tax = price.scale(p.tax_transaction);
    let own_part = price - loan;
    let h = w.households.get_mut(&buyer).expect("buyer exists");
    h.savings -= own_part;
    if loan.is_positive() {
        w.originate(buyer, loan, rate);
        w.credit.mortgage_sales.push(crate::state::MortgageSale {
            month: w.month,
            price,
            loan,
        });
    }
    let proceeds = price - tax;
    match owner {
        Owner::Household(seller) => {
            let s = w.households.get_mut(&seller).expect("seller exists");
            s.savings += proceeds;
            s.owned.remove(&d);
        }
        Owner::Firm(f) => {
            let firm = w.firms.get_mut(&f).expect("seller firm exists");
            firm.cash += proceeds;
            firm.revenue += proceeds;
        }
    }
    w.credit_tax(muni, TaxKind::Transaction, tax);
    let dw = w.dwellings.get_mut(&d).expect("dwelling exists");
    dw.owner = Owner::Household(buyer);
    dw.listing = Listing::None;
    dw.months_listed = 0;
    dw.for_sale = false;
    w.households
        .get_mut(&buyer)
        .expect("buyer exists")
        .owned
        .insert(d);
    w.activity.sales += 1;
    w.activity.sale_value += price.to_units();
}

/// Runs the sales market. Buyers are served by purchasing power and try the
/// dwellings in their sample from the most to the least expensive.
pub fn run_sales_market(
    w: &mut World,
    p: &SimParams,
    buyers: &[HouseholdId],
    mortgage_rate: f64,
) -> Vec<HouseholdId> {
    let mut ranked: Vec<(HouseholdId, f64)> = buyers
        .iter()
        .map(|&b| {
            (
                b,
                w.households[&b].savings.to_units() + w.credit_estimate(b, p).to_units(),
            )
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut bought = Vec::new();
    for (hid, _) in ranked {
        let pool: Vec<DwellingId> = listed(w, Listing::Sale)
            .into_iter()
            .filter(|d| w.dwellings[d].owner != Owner::Household(hid))
            .collect();
        let mut sample: Vec<DwellingId> = pool
            .choose_multiple(&mut w.rng.housing, p.sigma as usize)
            .copied()
            .collect();
        sample.sort_by(|a, b| {
            w.dwellings[b]
                .ask
                .total_cmp(&w.dwellings[a].ask)
                .then(a.cmp(b))
        });
        for d in sample {
            let ask = w.dwellings[&d].ask;
            let savings = w.households[&hid].savings.max_zero().to_units();
            let view = w.bank_view();
            let has_mortgage = w.households[&hid].mortgage.is_some();
            let cap = w.credit_estimate(hid, p);
            let share = supply_share(w);
            let rng = &mut w.rng.housing;
            let approve = |gap: f64| match evaluate_mortgage(
                view,
                has_mortgage,
                Money::from_units(gap),
                cap,
                p.nu,
            ) {
                Decision::Approved(m) => Some(m.to_units()),
                Decision::Declined(_) => None,
            };
            let deal = negotiate(ask, savings, p, approve, || chance(rng, share));
            let (price, loan) = match deal {
                Deal::Cash { price } | Deal::Reduced { price } => {
                    (Money::from_units(price), Money::ZERO)
                }
                Deal::Mortgage { price, loan } => {
                    let price = Money::from_units(price);
                    let loan = Money::from_units(loan).min(price);
                    // Rounding must not push the loan above the cap or LTV.
                    let loan = loan.min(price.scale(p.ltv)).min(cap);
                    (price, loan)
                }
                Deal::Next => continue,
                Deal::Leave => break,
            };
            let savings_m = w.households[&hid].savings.max_zero();
            if price - loan > savings_m {
                continue;
            }
            settle_sale(w, p, d, hid, price, loan, mortgage_rate);
            bought.push(hid);
            break;
        }
    }
    bought
}

/// Moves an owner to the best dwelling it owns, or, when every adult is out
/// of work, to the worst one while putting the best up for sale.
pub fn decide_move(w: &mut World, hid: HouseholdId) {
    let h = &w.households[&hid];
    if h.owned.is_empty() {
        return;
    }
    let mut owned: Vec<(DwellingId, f64)> =
        h.owned.iter().map(|&d| (d, dwelling_rank(w, d))).collect();
    owned.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let available = |d: DwellingId| {
        let occ = w.dwellings[&d].occupant;
        occ.is_none() || occ == Some(hid)
    };
    let employed = w.adults(h).any(|x| x.employer.is_some());
    let current = h.dwelling;
    let target = if employed {
        owned.iter().rev().find(|(d, _)| available(*d)).map(|x| x.0)
    } else {
        owned.iter().find(|(d, _)| available(*d)).map(|x| x.0)
    };
    let Some(target) = target else { return };
    if Some(target) != current {
        if let Some(cur) = current {
            if h.owned.contains(&cur)
                && !employed
                && dwelling_rank(w, cur) < dwelling_rank(w, target)
            {
                return;
            }
        }
        occupy(w, hid, target, None);
    }
    if !employed && owned.len() > 1 {
        let best = owned.last().expect("non-empty").0;
        if best != target {
            w.dwellings.get_mut(&best).expect("owned dwelling").for_sale = true;
        }
    }
}

fn comparable_mean(w: &World, region: RegionId, size: f64, quality: u8) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for d in w.dwellings.values() {
        if d.region == region
            && (d.size - size).abs() <= 10.0
            && (d.quality as i32 - quality as i32).abs() <= 1
        {
            sum += if d.listing == Listing::None {
                d.value
            } else {
                d.ask
            };
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Global share of unoccupied dwellings.
pub fn vacancy_share(w: &World) -> f64 {
    if w.dwellings.is_empty() {
        return 0.0;
    }
    w.dwellings
        .values()
        .filter(|d| d.occupant.is_none())
        .count() as f64
        / w.dwellings.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub region: RegionId,
    pub size: f64,
    pub quality: u8,
    pub work_cost: Money,
    pub license_fee: Money,
    pub profit: f64,
}

/// Construction planning for one firm.
pub fn plan_construction(w: &mut World, p: &SimParams, fid: FirmId) -> Option<Plan> {
    let firm = &w.firms[&fid];
    let capacity = Money::from_units(p.n_months as f64 * firm.produced * firm.price);
    let contracted: Money = firm.projects.iter().map(|x| x.cost_remaining).sum();
    if contracted >= capacity || !capacity.is_positive() {
        return None;
    }
    let cash = firm.cash;
    let size = w.rng.housing.random_range(20.0..=120.0f64).round();
    let quality = w.rng.housing.random_range(1..=4u8);
    let f = productivity_factor(&mut w.rng.housing, p.markup_pi);
    let hsq = size * quality as f64;
    let fee_of = |lp: f64| Money::from_units(hsq * f * lp * p.upsilon);
    let feasible: Vec<RegionId> = w
        .regions
        .iter()
        .filter(|r| r.licenses > 0 && fee_of(r.license_price) <= cash)
        .map(|r| r.id)
        .collect();
    if feasible.is_empty() {
        return None;
    }
    let vacancy = vacancy_share(w);
    if chance(&mut w.rng.housing, vacancy) {
        return None;
    }
    let mut best: Option<Plan> = None;
    for r in feasible {
        let Some(mean) = comparable_mean(w, r, size, quality) else {
            continue;
        };
        let lp = w.regions[r.index()].license_price;
        let profit = construction_profit(mean, hsq, f, lp, p.upsilon);
        let work_cost = Money::from_units(hsq * f * lp).max(Money::from_minor(1));
        if contracted + work_cost > capacity {
            continue;
        }
        if best.as_ref().is_none_or(|b| profit > b.profit) {
            best = Some(Plan {
                region: r,
                size,
                quality,
                work_cost,
                license_fee: fee_of(lp),
                profit,
            });
        }
    }
    best.filter(|b| b.profit > 0.0)
}

/// Construction firms decide on new projects and pay for the licenses.
pub fn run_construction_planning(w: &mut World, p: &SimParams) {
    let builders: Vec<FirmId> = w
        .firms
        .values()
        .filter(|f| f.kind == FirmKind::Construction)
        .map(|f| f.id)
        .collect();
    for fid in builders {
        let Some(plan) = plan_construction(w, p, fid) else {
            continue;
        };
        let muni = w.region_municipality(plan.region);
        w.regions[plan.region.index()].licenses -= 1;
        let firm = w.firms.get_mut(&fid).expect("builder exists");
        firm.cash -= plan.license_fee;
        firm.projects.push(Project {
            region: plan.region,
            size: plan.size,
            quality: plan.quality,
            cost_total: plan.work_cost,
            cost_remaining: plan.work_cost,
        });
        w.credit_tax(muni, TaxKind::Property, plan.license_fee);
    }
}

/// Households entering the real estate market this month.
pub fn sample_market_entrants(w: &mut World, p: &SimParams) -> Vec<HouseholdId> {
    let all: Vec<HouseholdId> = w.households.keys().copied().collect();
    let n = (all.len() as f64 * p.phi).round() as usize;
    let mut picked: Vec<HouseholdId> = all
        .choose_multiple(&mut w.rng.housing, n)
        .copied()
        .collect();
    picked.sort();
    picked
}

/// The monthly real estate market: prices, listings, rental then sales.
pub fn run_real_estate(
    w: &mut World,
    p: &SimParams,
    mortgage_rate: f64,
    extra: &[HouseholdId],
) -> Vec<HouseholdId> {
    update_prices(w, p);
    list_vacant(w, p);
    let mut entrants = sample_market_entrants(w, p);
    entrants.extend_from_slice(extra);
    entrants.sort();
    entrants.dedup();
    entrants.retain(|h| w.households.contains_key(h));
    let renters: Vec<HouseholdId> = entrants
        .iter()
        .copied()
        .filter(|h| w.households[h].owned.is_empty())
        .collect();
    run_rental_market(w, p, &renters);
    let mut moved = run_sales_market(w, p, &entrants, mortgage_rate);
    moved.extend(renters);
    moved
}

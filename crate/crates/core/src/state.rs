//! Simulation state: agents, dwellings, markets and the month clock.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::*;
use crate::money::Money;
use crate::params::PolicyKind;
use crate::rng::Streams;
use crate::synthpop::InputTables;

pub const ADULT_AGE: u32 = 18;
pub const WORK_MIN_AGE: u32 = 16;
pub const WORK_MAX_AGE: u32 = 70;
pub const MAX_AGE: u32 = 110;

/// Month of the year in which a person aged `age_months` before step
/// `next_step` has a birthday. Ages advance by one month at each step and a
/// birthday is the step at which the age reaches a whole number of years.
pub fn birthday_month_for(next_step: u32, age_months: u32) -> u8 {
    (next_step as i64 - age_months as i64 - 1).rem_euclid(12) as u8
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Person {
    pub id: PersonId,
    pub age_months: u32,
    pub gender: Gender,
    pub birthday_month: u8,
    /// Qualification level, 1 to 5.
    pub qual: u8,
    pub cash: Money,
    /// Last net wage received.
    pub wage: Money,
    pub employer: Option<FirmId>,
    pub household: HouseholdId,
    pub spouse: Option<PersonId>,
    /// Fixed uniform draw compared against the car-ownership table.
    pub car_draw: f64,
}

impl Person {
    pub fn age_years(&self) -> u32 {
        self.age_months / 12
    }

    pub fn is_adult(&self) -> bool {
        self.age_years() >= ADULT_AGE
    }

    pub fn in_labor_force(&self) -> bool {
        (WORK_MIN_AGE..=WORK_MAX_AGE).contains(&self.age_years())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rental {
    pub dwelling: DwellingId,
    pub rent: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Voucher {
    pub municipality: MunicipalityId,
    pub monthly: Money,
    pub months_left: u32,
    /// Funds set aside by the municipality for the remaining months.
    pub escrow: Money,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Household {
    pub id: HouseholdId,
    pub members: Vec<PersonId>,
    pub dwelling: Option<DwellingId>,
    pub owned: BTreeSet<DwellingId>,
    pub savings: Money,
    pub reserve: Money,
    /// Running mean of monthly household income, in currency units.
    pub income_mean: f64,
    pub income_months: u32,
    /// Income received during the current month.
    pub income_month: Money,
    pub mortgage: Option<LoanId>,
    pub rental: Option<Rental>,
    pub voucher: Option<Voucher>,
    /// Household the founding member came from.
    pub origin: Option<HouseholdId>,
    /// Last computed permanent income.
    pub pi: f64,
    /// Permanent income of the last twelve months, oldest first.
    pub pi_recent: Vec<f64>,
    pub defaulted_rent: bool,
    pub null_consumption: bool,
}

impl Household {
    pub fn new(id: HouseholdId) -> Self {
        Household {
            id,
            members: Vec::new(),
            dwelling: None,
            owned: BTreeSet::new(),
            savings: Money::ZERO,
            reserve: Money::ZERO,
            income_mean: 0.0,
            income_months: 0,
            income_month: Money::ZERO,
            mortgage: None,
            rental: None,
            voucher: None,
            origin: None,
            pi: 0.0,
            pi_recent: Vec::new(),
            defaulted_rent: false,
            null_consumption: false,
        }
    }

    pub fn record_income(&mut self, amount: f64) {
        self.income_months += 1;
        self.income_mean += (amount - self.income_mean) / self.income_months as f64;
    }

    /// Mean permanent income over the last year, falling back to the current one.
    pub fn prior_year_pi(&self) -> f64 {
        if self.pi_recent.is_empty() {
            self.pi
        } else {
            self.pi_recent.iter().sum::<f64>() / self.pi_recent.len() as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Owner {
    Household(HouseholdId),
    Firm(FirmId),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Listing {
    #[default]
    None,
    Rental,
    Sale,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dwelling {
    pub id: DwellingId,
    pub region: RegionId,
    pub size: f64,
    pub quality: u8,
    pub owner: Owner,
    pub occupant: Option<HouseholdId>,
    pub listing: Listing,
    pub months_listed: u32,
    /// Value at zero time on market, refreshed monthly.
    pub value: f64,
    /// Current asking price including the time-on-market discount.
    pub ask: f64,
    /// Set when the owner wants to sell rather than let.
    pub for_sale: bool,
}

impl Dwelling {
    pub fn hsq(&self) -> f64 {
        self.size * self.quality as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FirmKind {
    Consumer,
    Construction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub region: RegionId,
    pub size: f64,
    pub quality: u8,
    pub cost_total: Money,
    pub cost_remaining: Money,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Firm {
    pub id: FirmId,
    pub region: RegionId,
    pub kind: FirmKind,
    pub cash: Money,
    pub inventory: f64,
    /// Unit price of goods, or the value of a unit of construction work.
    pub price: f64,
    pub employees: BTreeSet<PersonId>,
    /// Revenue of the current month.
    pub revenue: Money,
    /// Revenue of the last closed month; the base for wages.
    pub last_revenue: Money,
    pub profit: Money,
    /// Total paid out in wages last month.
    pub wage_pool: Money,
    pub produced: f64,
    pub sold: f64,
    pub projects: Vec<Project>,
}

impl Firm {
    pub fn new(id: FirmId, region: RegionId, kind: FirmKind, price: f64) -> Self {
        Firm {
            id,
            region,
            kind,
            cash: Money::ZERO,
            inventory: 0.0,
            price,
            employees: BTreeSet::new(),
            revenue: Money::ZERO,
            last_revenue: Money::ZERO,
            profit: Money::ZERO,
            wage_pool: Money::ZERO,
            produced: 0.0,
            sold: 0.0,
            projects: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Loan {
    pub id: LoanId,
    pub household: HouseholdId,
    pub original: Money,
    pub balance: Money,
    pub rate: f64,
    pub months_left: u32,
    pub payment: Money,
    pub arrears: Money,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Bank {
    /// Own funds. Deposits are held on household savings accounts; the bank's
    /// balance is deposits plus equity.
    pub equity: Money,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaxReceipts {
    pub consumption: Money,
    pub labor: Money,
    pub firm: Money,
    pub transaction: Money,
    pub property: Money,
}

impl TaxReceipts {
    pub fn total(&self) -> Money {
        self.consumption + self.labor + self.firm + self.transaction + self.property
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaxKind {
    Consumption,
    Labor,
    Firm,
    Transaction,
    Property,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Municipality {
    pub id: MunicipalityId,
    pub regions: Vec<RegionId>,
    /// Unspent policy money carried to later months.
    pub treasury: Money,
    pub receipts: TaxReceipts,
    pub register: Vec<HouseholdId>,
    pub population_prev: u64,
    /// Total paid as policy outlays so far.
    pub policy_spent: Money,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Region {
    pub id: RegionId,
    pub municipality: MunicipalityId,
    pub x: f64,
    pub y: f64,
    pub qli: f64,
    pub licenses: u32,
    pub license_price: f64,
    /// Normalized neighborhood income index, refreshed monthly.
    pub income_index: f64,
    /// Qualification distribution of residents, used for newcomers.
    pub qual_cdf: [f64; 5],
    pub avg_household_size: f64,
}

/// Counters of events that happened during the current month.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonthActivity {
    pub births: u32,
    pub deaths: u32,
    pub migrants_in: u32,
    pub migrant_households: u32,
    pub marriages: u32,
    pub sales: u32,
    pub sale_value: f64,
    pub rentals: u32,
    pub mortgages: u32,
    pub hires: u32,
    pub fires: u32,
    pub houses_built: u32,
    pub acquisitions: u32,
    pub vouchers: u32,
    pub aid_paid: Money,
    pub taxes: Money,
    pub qli_investment: Money,
    /// Goods sold this month, in units.
    pub goods_sold: f64,
    /// Value of goods sold this month, gross of tax.
    pub goods_value: f64,
    /// Conservation checks: accounts opened or closed this month.
    pub opened: Vec<crate::ledger::Account>,
    pub closed: Vec<crate::ledger::Account>,
}

/// Completed mortgage sale, kept for auditing loan-to-value compliance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MortgageSale {
    pub month: u32,
    pub price: Money,
    pub loan: Money,
}

/// Audit trail of credit decisions over the run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CreditAudit {
    pub mortgage_sales: Vec<MortgageSale>,
    /// Loan book divided by deposits right after each origination.
    pub book_ratios: Vec<f64>,
    /// Largest count of live mortgages held by any one household.
    pub max_live_per_household: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct World {
    pub month: u32,
    pub start_year: i32,
    pub policy: PolicyKind,
    pub regions: Vec<Region>,
    pub municipalities: Vec<Municipality>,
    pub persons: BTreeMap<PersonId, Person>,
    pub households: BTreeMap<HouseholdId, Household>,
    pub dwellings: BTreeMap<DwellingId, Dwelling>,
    pub firms: BTreeMap<FirmId, Firm>,
    pub loans: BTreeMap<LoanId, Loan>,
    pub bank: Bank,
    /// Counterpart of money entering or leaving the metropolitan economy.
    pub external: Money,
    pub tables: InputTables,
    pub ids: IdCounters,
    pub rng: Streams,
    /// Unemployment rate measured at the end of the previous month.
    pub unemployment: f64,
    /// Sales-weighted goods price at month 0.
    pub price_base: Option<f64>,
    pub activity: MonthActivity,
    pub credit: CreditAudit,
}

impl World {
    pub fn empty(seed: u64, tables: InputTables) -> Self {
        World {
            month: 0,
            start_year: 2010,
            policy: PolicyKind::Baseline,
            regions: Vec::new(),
            municipalities: Vec::new(),
            persons: BTreeMap::new(),
            households: BTreeMap::new(),
            dwellings: BTreeMap::new(),
            firms: BTreeMap::new(),
            loans: BTreeMap::new(),
            bank: Bank::default(),
            external: Money::ZERO,
            tables,
            ids: IdCounters::default(),
            rng: Streams::new(seed),
            unemployment: 0.0,
            price_base: None,
            activity: MonthActivity::default(),
            credit: CreditAudit::default(),
        }
    }

    /// Calendar (year, month 1..=12) of the current step.
    pub fn calendar(&self) -> (i32, u32) {
        (
            self.start_year + (self.month / 12) as i32,
            self.month % 12 + 1,
        )
    }

    pub fn distance(&self, a: RegionId, b: RegionId) -> f64 {
        let (ra, rb) = (&self.regions[a.index()], &self.regions[b.index()]);
        ((ra.x - rb.x).powi(2) + (ra.y - rb.y).powi(2)).sqrt()
    }

    pub fn household_region(&self, h: HouseholdId) -> Option<RegionId> {
        let d = self.households.get(&h)?.dwelling?;
        Some(self.dwellings[&d].region)
    }

    pub fn household_municipality(&self, h: HouseholdId) -> Option<MunicipalityId> {
        self.household_region(h)
            .map(|r| self.regions[r.index()].municipality)
    }

    pub fn region_municipality(&self, r: RegionId) -> MunicipalityId {
        self.regions[r.index()].municipality
    }

    pub fn population(&self) -> usize {
        self.persons.len()
    }

    pub fn municipal_population(&self) -> Vec<u64> {
        let mut pop = vec![0u64; self.municipalities.len()];
        for h in self.households.values() {
            if let Some(m) = self.household_municipality(h.id) {
                pop[m.index()] += h.members.len() as u64;
            }
        }
        pop
    }

    /// Total deposits: the sum of household savings.
    pub fn deposits(&self) -> Money {
        self.households.values().map(|h| h.savings).sum()
    }

    pub fn loan_book(&self) -> Money {
        self.loans.values().map(|l| l.balance).sum()
    }

    pub fn bank_balance(&self) -> Money {
        self.deposits() + self.bank.equity
    }

    /// Net wealth entering permanent income: property values, reserve and
    /// savings minus outstanding mortgage debt.
    pub fn household_wealth(&self, h: &Household) -> f64 {
        let property: f64 = h.owned.iter().map(|d| self.dwellings[d].value).sum();
        let debt = h
            .mortgage
            .and_then(|l| self.loans.get(&l))
            .map_or(0.0, |l| (l.balance + l.arrears).to_units());
        property + h.reserve.to_units() + h.savings.to_units() - debt
    }

    pub fn adults<'a>(&'a self, h: &'a Household) -> impl Iterator<Item = &'a Person> + 'a {
        h.members
            .iter()
            .map(|p| &self.persons[p])
            .filter(|p| p.is_adult())
    }

    pub fn any_member_employed(&self, h: &Household) -> bool {
        h.members.iter().any(|p| self.persons[p].employer.is_some())
    }

    /// Months until the oldest member turns 75.
    pub fn months_to_75(&self, h: &Household) -> u32 {
        let oldest = h
            .members
            .iter()
            .map(|p| self.persons[p].age_months)
            .max()
            .unwrap_or(0);
        (75 * 12u32).saturating_sub(oldest)
    }

    pub fn credit_tax(&mut self, m: MunicipalityId, kind: TaxKind, amount: Money) {
        let r = &mut self.municipalities[m.index()].receipts;
        match kind {
            TaxKind::Consumption => r.consumption += amount,
            TaxKind::Labor => r.labor += amount,
            TaxKind::Firm => r.firm += amount,
            TaxKind::Transaction => r.transaction += amount,
            TaxKind::Property => r.property += amount,
        }
    }

    /// Removes a person from their employer's payroll, if any.
    pub fn detach_employer(&mut self, p: PersonId) {
        if let Some(person) = self.persons.get_mut(&p) {
            if let Some(f) = person.employer.take() {
                if let Some(firm) = self.firms.get_mut(&f) {
                    firm.employees.remove(&p);
                }
            }
        }
    }
}

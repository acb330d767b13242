//! Aging, deaths, births, marriage, divorce, migration and inheritance.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::housing::{decide_move, occupy, search_rental, vacate};
use crate::ids::{HouseholdId, MunicipalityId, PersonId, RegionId};
use crate::ledger::Account;
use crate::money::Money;
use crate::params::SimParams;
use crate::rng::chance;
use crate::state::{
    birthday_month_for, Gender, Household, Listing, Owner, Person, World, ADULT_AGE,
};
use crate::synthpop::{draw_qual, expected_wage, INITIAL_GOODS_PRICE};

/// Months of expected income a migrant household brings as savings.
pub const MIGRANT_SAVINGS_MONTHS: (f64, f64) = (3.0, 24.0);
/// Consecutive failed entries after which a municipality stops recruiting for the month.
const MIGRATION_FAILURES: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BirthdayEvent {
    Survived,
    Died,
    GaveBirth,
}

/// Birthday draws for one person who just turned `age` years.
pub fn birthday_draw<R: Rng + ?Sized>(
    gender: Gender,
    age: u32,
    w_tables: &crate::synthpop::InputTables,
    rng: &mut R,
) -> BirthdayEvent {
    if chance(rng, w_tables.mortality(gender, age)) {
        return BirthdayEvent::Died;
    }
    if gender == Gender::Female && chance(rng, w_tables.fertility(age)) {
        return BirthdayEvent::GaveBirth;
    }
    BirthdayEvent::Survived
}

/// Ages everyone by a month and runs the birthday draws of those whose
/// birthday falls in the current month.
pub fn run_birthdays(w: &mut World) {
    let month_of_year = (w.month % 12) as u8;
    let ids: Vec<PersonId> = w.persons.keys().copied().collect();
    let mut dead = Vec::new();
    let mut mothers = Vec::new();
    for pid in ids {
        let person = w.persons.get_mut(&pid).expect("person exists");
        person.age_months += 1;
        if !person.age_months.is_multiple_of(12) {
            continue;
        }
        debug_assert_eq!(person.birthday_month, month_of_year);
        let (gender, age) = (person.gender, person.age_years());
        match birthday_draw(gender, age, &w.tables, &mut w.rng.demographics) {
            BirthdayEvent::Died => dead.push(pid),
            BirthdayEvent::GaveBirth => mothers.push(pid),
            BirthdayEvent::Survived => {}
        }
    }
    for mother in mothers {
        add_child(w, mother);
    }
    for pid in dead {
        remove_person(w, pid);
    }
}

fn add_child(w: &mut World, mother: PersonId) {
    let hid = w.persons[&mother].household;
    let cdf = w
        .household_region(hid)
        .map_or([0.2, 0.4, 0.6, 0.8, 1.0], |r| w.regions[r.index()].qual_cdf);
    let rng = &mut w.rng.demographics;
    let gender = if rng.random::<bool>() {
        Gender::Female
    } else {
        Gender::Male
    };
    let qual = draw_qual(rng, &cdf);
    let car_draw = rng.random();
    let id = w.ids.person();
    w.persons.insert(
        id,
        Person {
            id,
            age_months: 0,
            gender,
            birthday_month: birthday_month_for(w.month + 1, 0),
            qual,
            cash: Money::ZERO,
            wage: Money::ZERO,
            employer: None,
            household: hid,
            spouse: None,
            car_draw,
        },
    );
    w.households
        .get_mut(&hid)
        .expect("mother's household")
        .members
        .push(id);
    w.activity.births += 1;
    w.activity.opened.push(Account::Person(id));
}

/// Removes a dead person. Their cash stays with the household; a household
/// left empty passes its estate on.
pub fn remove_person(w: &mut World, pid: PersonId) {
    w.detach_employer(pid);
    let person = w.persons.remove(&pid).expect("person exists");
    if let Some(s) = person.spouse {
        if let Some(sp) = w.persons.get_mut(&s) {
            sp.spouse = None;
        }
    }
    let hid = person.household;
    let h = w.households.get_mut(&hid).expect("household exists");
    h.members.retain(|&m| m != pid);
    h.reserve += person.cash;
    w.activity.deaths += 1;
    w.activity.closed.push(Account::Person(pid));
    if h.members.is_empty() {
        process_inheritance(w, hid);
    }
}

/// Passes the estate of an empty household to the household its founder
/// came from, or to a random household when there is none. Outstanding
/// mortgage debt is paid from the estate and the rest is written off.
pub fn process_inheritance(w: &mut World, hid: HouseholdId) {
    vacate(w, hid);
    let h = w.households.remove(&hid).expect("household exists");
    w.activity.closed.push(Account::Household(hid));
    let mut estate = h.savings + h.reserve;
    if let Some(l) = h.mortgage {
        if let Some(loan) = w.loans.remove(&l) {
            let paid = estate.min(loan.balance + loan.arrears);
            estate -= paid;
            w.bank.equity += paid;
        }
    }
    let heir = h
        .origin
        .filter(|o| w.households.contains_key(o))
        .or_else(|| {
            let all: Vec<HouseholdId> = w.households.keys().copied().collect();
            all.choose(&mut w.rng.demographics).copied()
        });
    match heir {
        Some(heir) => {
            for d in &h.owned {
                w.dwellings.get_mut(d).expect("owned dwelling").owner = Owner::Household(heir);
            }
            let e = w.households.get_mut(&heir).expect("heir exists");
            e.savings += estate;
            e.owned.extend(h.owned.iter().copied());
        }
        // Nobody is left in the city: the estate leaves with its owners.
        None => w.external += estate,
    }
}

fn sole_adult(w: &World, pid: PersonId) -> bool {
    let h = &w.households[&w.persons[&pid].household];
    w.adults(h).count() == 1
}

fn wage_of(w: &World, pid: PersonId) -> f64 {
    w.persons[&pid].wage.to_units()
}

/// Forms new couples from single adults. Each single adult enters the pool
/// with probability `rate`; the pool is paired in shuffled order.
pub fn process_marriage(w: &mut World, p: &SimParams) {
    if p.marriage_rate <= 0.0 {
        return;
    }
    let singles: Vec<PersonId> = w
        .persons
        .values()
        .filter(|x| x.is_adult() && x.spouse.is_none())
        .map(|x| x.id)
        .collect();
    let mut pool: Vec<PersonId> = singles
        .into_iter()
        .filter(|_| chance(&mut w.rng.demographics, p.marriage_rate))
        .collect();
    pool.shuffle(&mut w.rng.demographics);
    for pair in pool.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        if w.persons[&a].household == w.persons[&b].household {
            continue;
        }
        marry(w, p, a, b);
    }
}

/// Tries to marry `a` and `b`. Returns whether the new household persisted.
pub fn marry(w: &mut World, p: &SimParams, a: PersonId, b: PersonId) -> bool {
    let (ha, hb) = (w.persons[&a].household, w.persons[&b].household);
    let (brings_a, brings_b) = (sole_adult(w, a), sole_adult(w, b));
    if brings_a
        && brings_b
        && w.households[&ha].mortgage.is_some()
        && w.households[&hb].mortgage.is_some()
    {
        return false;
    }
    let housed = |h: HouseholdId| {
        let hh = &w.households[&h];
        !hh.owned.is_empty() || hh.rental.is_some()
    };
    let has_home = (brings_a && housed(ha)) || (brings_b && housed(hb));
    let found = if has_home {
        None
    } else {
        let pi = wage_of(w, a) + wage_of(w, b);
        let pool: Vec<_> = w
            .dwellings
            .values()
            .filter(|d| d.listing == Listing::Rental && d.occupant.is_none())
            .map(|d| d.id)
            .collect();
        match search_rental(w, p, pi, None, &pool, None) {
            Some(x) => Some(x),
            None => return false,
        }
    };

    // The pair keeps the household one of them brings, or founds a new one.
    let (keep, other, other_brings) = if brings_a {
        (ha, b, brings_b)
    } else if brings_b {
        (hb, a, false)
    } else {
        let id = w.ids.household();
        let mut h = Household::new(id);
        h.origin = Some(ha);
        h.income_mean = wage_of(w, a) + wage_of(w, b);
        h.income_months = 1;
        w.households.insert(id, h);
        w.activity.opened.push(Account::Household(id));
        move_person(w, a, id);
        (id, b, false)
    };
    if other_brings {
        merge_households(w, hb, keep);
    } else {
        move_person(w, other, keep);
    }
    if let Some((d, rent)) = found {
        occupy(w, keep, d, Some(rent));
    }
    if !w.households[&keep].owned.is_empty() {
        decide_move(w, keep);
    }
    w.persons.get_mut(&a).expect("spouse").spouse = Some(b);
    w.persons.get_mut(&b).expect("spouse").spouse = Some(a);
    w.activity.marriages += 1;
    true
}

fn move_person(w: &mut World, pid: PersonId, to: HouseholdId) {
    let from = w.persons[&pid].household;
    if from == to {
        return;
    }
    w.households
        .get_mut(&from)
        .expect("household")
        .members
        .retain(|&m| m != pid);
    w.households
        .get_mut(&to)
        .expect("household")
        .members
        .push(pid);
    w.persons.get_mut(&pid).expect("person").household = to;
}

/// Moves everything of household `from` into `into` and closes `from`.
fn merge_households(w: &mut World, from: HouseholdId, into: HouseholdId) {
    let keep_home = w.households[&into].dwelling.is_some();
    if keep_home {
        vacate(w, from);
    }
    let src = w.households.remove(&from).expect("household exists");
    w.activity.closed.push(Account::Household(from));
    for m in &src.members {
        w.persons.get_mut(m).expect("member").household = into;
    }
    for d in &src.owned {
        w.dwellings.get_mut(d).expect("dwelling").owner = Owner::Household(into);
    }
    if let Some(l) = src.mortgage {
        w.loans.get_mut(&l).expect("loan").household = into;
    }
    if !keep_home {
        if let Some(d) = src.dwelling {
            w.dwellings.get_mut(&d).expect("dwelling").occupant = Some(into);
        }
    }
    let dst = w.households.get_mut(&into).expect("household exists");
    dst.members.extend(src.members);
    dst.owned.extend(src.owned);
    dst.savings += src.savings;
    dst.reserve += src.reserve;
    dst.income_mean += src.income_mean;
    if dst.mortgage.is_none() {
        dst.mortgage = src.mortgage;
    }
    if !keep_home {
        dst.dwelling = src.dwelling;
        dst.rental = src.rental;
        dst.voucher = src.voucher;
    }
}

/// Couples split with probability `divorce_rate`; the leaving spouse must
/// find a rental or the couple stays together.
pub fn process_divorce(w: &mut World, p: &SimParams) {
    if p.divorce_rate <= 0.0 {
        return;
    }
    let couples: Vec<(PersonId, PersonId)> = w
        .persons
        .values()
        .filter_map(|x| x.spouse.filter(|&s| x.id < s).map(|s| (x.id, s)))
        .collect();
    for (a, b) in couples {
        if !chance(&mut w.rng.demographics, p.divorce_rate) {
            continue;
        }
        let leaving = if w.rng.demographics.random::<bool>() {
            a
        } else {
            b
        };
        let pool: Vec<_> = w
            .dwellings
            .values()
            .filter(|d| d.listing == Listing::Rental && d.occupant.is_none())
            .map(|d| d.id)
            .collect();
        let Some((d, rent)) = search_rental(w, p, wage_of(w, leaving), None, &pool, None) else {
            continue;
        };
        let from = w.persons[&leaving].household;
        let id = w.ids.household();
        let mut h = Household::new(id);
        h.origin = Some(from);
        h.income_mean = wage_of(w, leaving);
        h.income_months = 1;
        w.households.insert(id, h);
        w.activity.opened.push(Account::Household(id));
        move_person(w, leaving, id);
        occupy(w, id, d, Some(rent));
        w.persons.get_mut(&a).expect("spouse").spouse = None;
        w.persons.get_mut(&b).expect("spouse").spouse = None;
    }
}

/// A household that would like to move into the metropolitan area.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub region: RegionId,
    /// (age in months, gender, qualification, car draw)
    pub members: Vec<(u32, Gender, u8, f64)>,
    pub income: f64,
    pub endowment: Money,
}

pub fn draw_migrant(w: &mut World, p: &SimParams, m: MunicipalityId) -> Option<Candidate> {
    let price = w
        .firms
        .values()
        .map(|f| f.price)
        .next()
        .unwrap_or(INITIAL_GOODS_PRICE);
    let unemployment = w.unemployment;
    let rng = &mut w.rng.demographics;
    let region = *w.municipalities[m.index()].regions.choose(rng)?;
    let spec = &w.regions[region.index()];
    let size = (spec.avg_household_size * rng.random_range(0.4..1.6))
        .round()
        .max(1.0) as usize;
    let mut members = Vec::with_capacity(size);
    let head_age = rng.random_range(ADULT_AGE..60);
    let head_gender = if rng.random::<bool>() {
        Gender::Female
    } else {
        Gender::Male
    };
    members.push((
        head_age * 12 + rng.random_range(0..12),
        head_gender,
        draw_qual(rng, &spec.qual_cdf),
        rng.random(),
    ));
    for i in 1..size {
        let (age, gender) = if i == 1 && rng.random::<bool>() {
            let g = if head_gender == Gender::Male {
                Gender::Female
            } else {
                Gender::Male
            };
            (
                (head_age as i32 + rng.random_range(-5..=5)).max(ADULT_AGE as i32) as u32,
                g,
            )
        } else {
            (
                rng.random_range(0..ADULT_AGE),
                if rng.random::<bool>() {
                    Gender::Female
                } else {
                    Gender::Male
                },
            )
        };
        members.push((
            age * 12 + rng.random_range(0..12),
            gender,
            draw_qual(rng, &spec.qual_cdf),
            rng.random(),
        ));
    }
    let income: f64 = members
        .iter()
        .filter(|x| x.0 / 12 >= ADULT_AGE)
        .map(|x| expected_wage(x.2, p, price, unemployment))
        .sum::<f64>()
        * rng.random_range(0.5..1.5);
    let months = rng.random_range(MIGRANT_SAVINGS_MONTHS.0..MIGRANT_SAVINGS_MONTHS.1);
    Some(Candidate {
        region,
        members,
        income,
        endowment: Money::from_units(income * months),
    })
}

/// Brings in migrant households until each municipality reaches its target.
/// Entrants stay only if they find a rental inside the municipality.
pub fn process_migration(w: &mut World, p: &SimParams, targets: &[u64]) {
    let pop = w.municipal_population();
    for (mi, &target) in targets.iter().enumerate().take(w.municipalities.len()) {
        let m = MunicipalityId(mi as u32);
        let mut current = pop[mi];
        let mut failures = 0;
        while current < target && failures < MIGRATION_FAILURES {
            let Some(cand) = draw_migrant(w, p, m) else {
                break;
            };
            let pool: Vec<_> = w
                .dwellings
                .values()
                .filter(|d| d.listing == Listing::Rental && d.occupant.is_none())
                .map(|d| d.id)
                .collect();
            let Some((d, rent)) = search_rental(w, p, cand.income, None, &pool, Some(m)) else {
                failures += 1;
                continue;
            };
            failures = 0;
            current += cand.members.len() as u64;
            settle_migrant(w, cand, d, rent);
        }
    }
}

fn settle_migrant(w: &mut World, cand: Candidate, d: crate::ids::DwellingId, rent: Money) {
    let hid = w.ids.household();
    let mut h = Household::new(hid);
    h.income_mean = cand.income;
    h.income_months = 1;
    h.savings = cand.endowment;
    w.external -= cand.endowment;
    for (age_months, gender, qual, car_draw) in cand.members {
        let pid = w.ids.person();
        w.persons.insert(
            pid,
            Person {
                id: pid,
                age_months,
                gender,
                birthday_month: birthday_month_for(w.month + 1, age_months),
                qual,
                cash: Money::ZERO,
                wage: Money::ZERO,
                employer: None,
                household: hid,
                spouse: None,
                car_draw,
            },
        );
        h.members.push(pid);
        w.activity.opened.push(Account::Person(pid));
        w.activity.migrants_in += 1;
    }
    if h.members.len() > 1 {
        let (a, b) = (h.members[0], h.members[1]);
        if w.persons[&b].is_adult() && w.persons[&a].gender != w.persons[&b].gender {
            w.persons.get_mut(&a).expect("head").spouse = Some(b);
            w.persons.get_mut(&b).expect("partner").spouse = Some(a);
        }
    }
    w.households.insert(hid, h);
    w.activity.opened.push(Account::Household(hid));
    w.activity.migrant_households += 1;
    occupy(w, hid, d, Some(rent));
}

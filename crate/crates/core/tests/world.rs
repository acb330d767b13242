use std::collections::BTreeSet;

use polisim::ids::{DwellingId, FirmId, HouseholdId, MunicipalityId, PersonId, RegionId};
use polisim::series::{ExogenousSeries, SeriesDefaults};
use polisim::snapshot::digest;
use polisim::state::{
    Dwelling, Firm, FirmKind, Gender, Household, Listing, Municipality, Owner, Person, Region,
    TaxReceipts,
};
use polisim::synthpop::{CitySpec, InputTables};
use polisim::{step_month, Config, Money, PolicyKind, SimParams, World};

fn quiet_tables() -> InputTables {
    let mut t = InputTables::empty();
    t.fertility = vec![0.0; 35];
    t.mortality_male = vec![0.0; 111];
    t.mortality_female = vec![0.0; 111];
    t
}

fn small_config(months: u32) -> Config {
    Config {
        horizon_months: months,
        city: CitySpec {
            scale: 100.0,
            ..CitySpec::default()
        },
        ..Config::default()
    }
}

/// One region, one household of one worker employed by one consumer firm.
fn one_worker_world() -> World {
    let mut w = World::empty(3, quiet_tables());
    w.regions.push(Region {
        id: RegionId(0),
        municipality: MunicipalityId(0),
        x: 0.0,
        y: 0.0,
        qli: 1.0,
        licenses: 0,
        license_price: 1.0,
        income_index: 0.5,
        qual_cdf: [0.2, 0.4, 0.6, 0.8, 1.0],
        avg_household_size: 1.0,
    });
    w.municipalities.push(Municipality {
        id: MunicipalityId(0),
        regions: vec![RegionId(0)],
        treasury: Money::ZERO,
        receipts: TaxReceipts::default(),
        register: Vec::new(),
        population_prev: 1,
        policy_spent: Money::ZERO,
    });
    let (pid, hid, did, fid) = (PersonId(0), HouseholdId(0), DwellingId(0), FirmId(0));
    w.persons.insert(
        pid,
        Person {
            id: pid,
            age_months: 30 * 12 + 5,
            gender: Gender::Female,
            birthday_month: 6,
            qual: 1,
            cash: Money::ZERO,
            wage: Money::ZERO,
            employer: Some(fid),
            household: hid,
            spouse: None,
            car_draw: 0.5,
        },
    );
    let mut h = Household::new(hid);
    h.members.push(pid);
    h.dwelling = Some(did);
    h.owned.insert(did);
    w.households.insert(hid, h);
    w.dwellings.insert(
        did,
        Dwelling {
            id: did,
            region: RegionId(0),
            size: 50.0,
            quality: 2,
            owner: Owner::Household(hid),
            occupant: Some(hid),
            listing: Listing::None,
            months_listed: 0,
            value: 100.0,
            ask: 100.0,
            for_sale: false,
        },
    );
    let mut f = Firm::new(fid, RegionId(0), FirmKind::Consumer, 1.0);
    f.employees.insert(pid);
    w.firms.insert(fid, f);
    w.ids.person = 1;
    w.ids.household = 1;
    w.ids.dwelling = 1;
    w.ids.firm = 1;
    w
}

fn no_entry_series(months: usize, pop: &[u64]) -> ExogenousSeries {
    let d = SeriesDefaults {
        firm_entry_every: 0,
        annual_growth: 0.0,
        ..SeriesDefaults::default()
    };
    ExogenousSeries::from_defaults(&d, months, pop)
}

#[test]
fn empty_world_step_is_vacuous() {
    let mut w = World::empty(1, InputTables::empty());
    let frame = step_month(&mut w, &SimParams::default(), &no_entry_series(1, &[])).unwrap();
    assert_eq!(w.month, 1);
    assert_eq!(w.money_total(), 0);
    assert!(w.persons.is_empty() && w.firms.is_empty());
    assert_eq!(frame.gdp, 0.0);
    assert_eq!(frame.population, 0.0);
    assert_eq!(frame.gini, None);
    assert_eq!(frame.unemployment, None);
    assert_eq!(frame.price_index, None);
}

#[test]
fn single_worker_produces_a_tenth() {
    let mut w = one_worker_world();
    let before = w.money_total();
    step_month(&mut w, &SimParams::default(), &no_entry_series(1, &[1])).unwrap();
    assert!((w.firms[&FirmId(0)].produced - 0.1).abs() < 1e-12);
    assert_eq!(w.money_total(), before);
}

#[test]
fn series_exhaustion_is_an_error() {
    let mut w = one_worker_world();
    let series = no_entry_series(1, &[1]);
    step_month(&mut w, &SimParams::default(), &series).unwrap();
    assert!(step_month(&mut w, &SimParams::default(), &series).is_err());
}

#[test]
fn identical_runs_have_identical_digests() {
    let config = small_config(12);
    let mut a = config.build(42).unwrap();
    let mut b = config.build(42).unwrap();
    assert!(
        a.world.persons.len() >= 500,
        "{} persons",
        a.world.persons.len()
    );
    a.run(12).unwrap();
    b.run(12).unwrap();
    assert_eq!(digest(&a.world).unwrap(), digest(&b.world).unwrap());
    assert_eq!(a.frames, b.frames);
    let mut c = config.build(43).unwrap();
    c.run(12).unwrap();
    assert_ne!(digest(&a.world).unwrap(), digest(&c.world).unwrap());
}

fn check_structure(w: &World) {
    for p in w.persons.values() {
        let holders: Vec<&Household> = w
            .households
            .values()
            .filter(|h| h.members.contains(&p.id))
            .collect();
        assert_eq!(
            holders.len(),
            1,
            "person {:?} in {} households",
            p.id,
            holders.len()
        );
        assert_eq!(holders[0].id, p.household);
    }
    for h in w.households.values() {
        assert!(!h.members.is_empty(), "empty household {:?}", h.id);
        if let Some(d) = h.dwelling {
            assert_eq!(w.dwellings[&d].occupant, Some(h.id));
        }
        for d in &h.owned {
            assert_eq!(w.dwellings[d].owner, Owner::Household(h.id));
        }
    }
    let mut seen = BTreeSet::new();
    for d in w.dwellings.values() {
        if let Some(occ) = d.occupant {
            assert_eq!(w.households[&occ].dwelling, Some(d.id));
            assert!(seen.insert(occ), "household {occ:?} occupies two dwellings");
        }
        match d.owner {
            Owner::Household(h) => assert!(
                w.households[&h].owned.contains(&d.id),
                "orphan title {:?}",
                d.id
            ),
            Owner::Firm(f) => assert!(w.firms.contains_key(&f)),
        }
    }
    let titles: usize = w.households.values().map(|h| h.owned.len()).sum::<usize>()
        + w.dwellings
            .values()
            .filter(|d| matches!(d.owner, Owner::Firm(_)))
            .count();
    assert_eq!(titles, w.dwellings.len());
    for f in w.firms.values() {
        for e in &f.employees {
            assert_eq!(w.persons[e].employer, Some(f.id));
        }
    }
    let live: usize = w
        .households
        .values()
        .filter(|h| h.mortgage.is_some())
        .count();
    assert_eq!(live, w.loans.len());
}

#[test]
fn structure_and_population_accounting_hold_every_month() {
    let config = small_config(36);
    for scenario in PolicyKind::ALL {
        let mut sim = config.build_with(&config.params, scenario, 5).unwrap();
        check_structure(&sim.world);
        for _ in 0..36 {
            let pop = sim.world.persons.len() as i64;
            sim.step().unwrap();
            let a = &sim.world.activity;
            assert_eq!(
                sim.world.persons.len() as i64 - pop,
                a.births as i64 - a.deaths as i64 + a.migrants_in as i64,
                "month {}",
                sim.world.month
            );
            check_structure(&sim.world);
        }
    }
}

#[test]
fn aid_without_budget_matches_baseline() {
    let config = small_config(24);
    let zero = SimParams {
        delta: 0.0,
        ..config.params.clone()
    };
    let mut base = config.build_with(&zero, PolicyKind::Baseline, 9).unwrap();
    let mut aid = config.build_with(&zero, PolicyKind::Aid, 9).unwrap();
    base.run(24).unwrap();
    aid.run(24).unwrap();
    assert_eq!(base.frames, aid.frames);
}

#[test]
fn policies_only_reach_households_without_property() {
    let config = Config {
        horizon_months: 36,
        ..Config::default()
    };
    for scenario in [PolicyKind::Acquisition, PolicyKind::Voucher] {
        let mut sim = config.build_with(&config.params, scenario, 11).unwrap();
        let mut delivered = 0;
        for _ in 0..36 {
            let owners: BTreeSet<HouseholdId> = sim
                .world
                .households
                .values()
                .filter(|h| !h.owned.is_empty())
                .map(|h| h.id)
                .collect();
            let vouchered: BTreeSet<HouseholdId> = sim
                .world
                .households
                .values()
                .filter(|h| h.voucher.is_some())
                .map(|h| h.id)
                .collect();
            sim.step().unwrap();
            let a = &sim.world.activity;
            delivered += a.acquisitions + a.vouchers;
            for h in sim.world.households.values() {
                let new_voucher = h.voucher.is_some() && !vouchered.contains(&h.id);
                let new_title = scenario == PolicyKind::Acquisition
                    && h.owned.len() == 1
                    && !owners.contains(&h.id);
                if new_voucher {
                    assert!(!owners.contains(&h.id), "voucher for an owner");
                    assert!(h.rental.is_some(), "voucher for a non-renter");
                }
                if new_title {
                    assert!(!owners.contains(&h.id));
                }
            }
        }
        assert!(delivered > 0, "{scenario:?} delivered nothing");
    }
}

#[test]
fn snapshot_round_trip_resumes_identically() {
    let config = small_config(12);
    let mut a = config.build(21).unwrap();
    a.run(6).unwrap();
    let text = polisim::snapshot::to_json(&a.world).unwrap();
    let mut b = polisim::Simulation::new(
        polisim::snapshot::from_json(&text).unwrap(),
        a.params.clone(),
        a.series.clone(),
    );
    a.run(6).unwrap();
    b.run(6).unwrap();
    assert_eq!(digest(&a.world).unwrap(), digest(&b.world).unwrap());
}

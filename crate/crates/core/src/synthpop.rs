//! Input tables, a synthetic-city generator and city instantiation.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, SimError};
use crate::firms::production;
use crate::goods::permanent_income;
use crate::housing::{rent_for, update_prices};
use crate::ids::*;
use crate::money::Money;
use crate::params::SimParams;
use crate::rng::stream;
use crate::state::*;

pub const INITIAL_GOODS_PRICE: f64 = 5.0;
pub const QUAL_LEVELS: usize = 5;
pub const AGES: usize = MAX_AGE as usize + 1;
pub const FERTILE: std::ops::RangeInclusive<u32> = 15..=49;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub region_id: u32,
    pub municipality_id: u32,
    pub x: f64,
    pub y: f64,
    /// Share of the municipality's population living in the region.
    pub population_weight: f64,
    /// Cumulative distribution over qualification levels 1..=5.
    pub qual_cdf: [f64; QUAL_LEVELS],
    pub avg_household_size: f64,
    /// Firms at full population scale.
    pub firms: u32,
    /// Building licenses at full population scale.
    pub licenses: u32,
    pub license_price: f64,
    pub qli: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pyramid {
    pub male: Vec<u64>,
    pub female: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputTables {
    /// Age and gender counts per municipality, ages 0..=110.
    pub pyramids: Vec<Pyramid>,
    /// Annual birth probability for ages 15..=49.
    pub fertility: Vec<f64>,
    /// Annual death probability by age, 0..=110.
    pub mortality_male: Vec<f64>,
    pub mortality_female: Vec<f64>,
    /// Probability of owning a car by wage decile.
    pub car_by_decile: [f64; 10],
    /// Population estimates per municipality and year.
    pub population_estimates: Vec<Vec<u64>>,
    /// Initial human development index per municipality.
    pub hdi: Vec<f64>,
}

impl InputTables {
    pub fn empty() -> Self {
        InputTables {
            pyramids: Vec::new(),
            fertility: vec![0.0; 35],
            mortality_male: vec![0.0; AGES],
            mortality_female: vec![0.0; AGES],
            car_by_decile: [0.0; 10],
            population_estimates: Vec::new(),
            hdi: Vec::new(),
        }
    }

    pub fn mortality(&self, gender: Gender, age: u32) -> f64 {
        if age >= MAX_AGE {
            return 1.0;
        }
        let t = match gender {
            Gender::Male => &self.mortality_male,
            Gender::Female => &self.mortality_female,
        };
        t.get(age as usize).copied().unwrap_or(1.0).clamp(0.0, 1.0)
    }

    pub fn fertility(&self, age: u32) -> f64 {
        if !FERTILE.contains(&age) {
            return 0.0;
        }
        self.fertility
            .get((age - FERTILE.start()) as usize)
            .copied()
            .unwrap_or(0.0)
            .clamp(0.0, 1.0)
    }

    pub fn validate(&self, municipalities: usize) -> Result<(), ConfigError> {
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        if self.pyramids.len() != municipalities || self.hdi.len() != municipalities {
            return Err(ConfigError::City(format!(
                "tables cover {} pyramids and {} HDI values for {municipalities} municipalities",
                self.pyramids.len(),
                self.hdi.len()
            )));
        }
        if self.mortality_male.len() != AGES || self.mortality_female.len() != AGES {
            return Err(ConfigError::City(
                "mortality tables must cover ages 0..=110".into(),
            ));
        }
        if self.fertility.len() != 35 {
            return Err(ConfigError::City(
                "fertility table must cover ages 15..=49".into(),
            ));
        }
        let all = self
            .fertility
            .iter()
            .chain(&self.mortality_male)
            .chain(&self.mortality_female)
            .chain(&self.car_by_decile);
        if !all.copied().all(prob) {
            return Err(ConfigError::City(
                "table probabilities must lie in [0, 1]".into(),
            ));
        }
        if self.mortality_male[MAX_AGE as usize] != 1.0
            || self.mortality_female[MAX_AGE as usize] != 1.0
        {
            return Err(ConfigError::City("mortality at age 110 must be 1".into()));
        }
        if self.car_by_decile.windows(2).any(|w| w[1] < w[0]) {
            return Err(ConfigError::City(
                "car ownership must not fall with income decile".into(),
            ));
        }
        Ok(())
    }
}

pub fn validate_regions(specs: &[RegionSpec]) -> Result<usize, ConfigError> {
    if specs.is_empty() {
        return Err(ConfigError::City("no regions".into()));
    }
    let munis = specs.iter().map(|s| s.municipality_id).max().unwrap_or(0) as usize + 1;
    for (i, s) in specs.iter().enumerate() {
        if s.region_id as usize != i {
            return Err(ConfigError::City(format!(
                "region ids must be 0..n in order, found {} at {i}",
                s.region_id
            )));
        }
        if s.qual_cdf.windows(2).any(|w| w[1] < w[0])
            || (s.qual_cdf[QUAL_LEVELS - 1] - 1.0).abs() > 1e-9
        {
            return Err(ConfigError::City(format!(
                "region {i}: qualification CDF must be monotone and end at 1"
            )));
        }
        if !(s.avg_household_size >= 1.0)
            || !(s.population_weight >= 0.0)
            || !(s.license_price >= 0.0)
        {
            return Err(ConfigError::City(format!(
                "region {i}: invalid size, weight or license price"
            )));
        }
        if !(s.qli > 0.0) {
            return Err(ConfigError::City(format!(
                "region {i}: QLI must be positive"
            )));
        }
    }
    for m in 0..munis {
        let sum: f64 = specs
            .iter()
            .filter(|s| s.municipality_id as usize == m)
            .map(|s| s.population_weight)
            .sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::City(format!(
                "municipality {m}: region weights sum to {sum}"
            )));
        }
    }
    Ok(munis)
}

/// Splits `total` into integer parts proportional to `weights`; leftovers go
/// to the largest fractional parts.
pub fn largest_remainder(total: u64, weights: &[f64]) -> Vec<u64> {
    if weights.is_empty() {
        return Vec::new();
    }
    let sum: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let exact: Vec<f64> = if sum > 0.0 {
        weights
            .iter()
            .map(|w| total as f64 * w.max(0.0) / sum)
            .collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut parts: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    for &i in order
        .iter()
        .cycle()
        .take(total.saturating_sub(assigned) as usize)
    {
        parts[i] += 1;
    }
    parts
}

fn gompertz(age: usize, scale: f64) -> f64 {
    if age == 0 {
        return 0.015 * scale;
    }
    if age >= MAX_AGE as usize {
        return 1.0;
    }
    ((0.0004 + 0.00004 * (0.09 * age as f64).exp()) * scale).min(1.0)
}

/// Builds a schema-valid synthetic metropolitan area. Municipality 0 is the
/// core: richer, more qualified and with a higher initial HDI.
pub fn generate_synthetic_inputs(
    seed: u64,
    n_regions: usize,
    n_municipalities: usize,
    scale: f64,
) -> Result<(Vec<RegionSpec>, InputTables), ConfigError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(ConfigError::OutOfRange {
            name: "scale",
            value: scale,
            reason: "must be positive",
        });
    }
    if n_municipalities == 0 || n_regions < n_municipalities {
        return Err(ConfigError::City(format!(
            "need regions >= municipalities >= 1, got {n_regions} regions and {n_municipalities} municipalities"
        )));
    }
    let mut rng = stream(seed, "synth");
    let total_pop = scale * 1000.0;
    let muni_share: Vec<f64> = (0..n_municipalities)
        .map(|m| {
            if n_municipalities == 1 {
                1.0
            } else if m == 0 {
                0.5
            } else {
                0.5 / (n_municipalities - 1) as f64
            }
        })
        .collect();
    let centers: Vec<(f64, f64)> = (0..n_municipalities)
        .map(|m| {
            if m == 0 {
                (0.0, 0.0)
            } else {
                let angle = std::f64::consts::TAU * m as f64 / (n_municipalities - 1) as f64;
                let radius = rng.random_range(15.0..30.0);
                (radius * angle.cos(), radius * angle.sin())
            }
        })
        .collect();
    let hdi: Vec<f64> = (0..n_municipalities)
        .map(|m| {
            if m == 0 {
                0.80
            } else {
                rng.random_range(0.65..0.72)
            }
        })
        .collect();

    let mut raw_weights = vec![0.0; n_regions];
    for w in raw_weights.iter_mut() {
        *w = rng.random_range(0.5..1.5);
    }
    let muni_of = |r: usize| r % n_municipalities;
    let mut weight_sum = vec![0.0; n_municipalities];
    for (r, w) in raw_weights.iter().enumerate() {
        weight_sum[muni_of(r)] += w;
    }

    let mut specs = Vec::with_capacity(n_regions);
    for (r, raw_weight) in raw_weights.iter().enumerate() {
        let m = muni_of(r);
        let core = m == 0;
        let base: [f64; QUAL_LEVELS] = if core {
            [0.15, 0.25, 0.30, 0.20, 0.10]
        } else {
            [0.35, 0.30, 0.20, 0.10, 0.05]
        };
        let jittered: Vec<f64> = base
            .iter()
            .map(|p| p * rng.random_range(0.85..1.15))
            .collect();
        let total: f64 = jittered.iter().sum();
        let mut cdf = [0.0; QUAL_LEVELS];
        let mut acc = 0.0;
        for (i, p) in jittered.iter().enumerate() {
            acc += p / total;
            cdf[i] = acc;
        }
        cdf[QUAL_LEVELS - 1] = 1.0;
        let weight = raw_weight / weight_sum[m];
        let people = total_pop * muni_share[m] * weight;
        let (cx, cy) = centers[m];
        specs.push(RegionSpec {
            region_id: r as u32,
            municipality_id: m as u32,
            x: cx + rng.random_range(-4.0..4.0),
            y: cy + rng.random_range(-4.0..4.0),
            population_weight: weight,
            qual_cdf: cdf,
            avg_household_size: rng.random_range(2.7..3.3),
            firms: (people * if core { 0.006 } else { 0.004 }).round() as u32,
            licenses: (people * 0.04).round() as u32,
            license_price: (if core { 0.10 } else { 0.07 }) * rng.random_range(0.8..1.2),
            qli: (hdi[m] + rng.random_range(-0.03..0.03)).clamp(0.05, 1.0),
        });
    }
    // Make the weights of each municipality sum to one after rounding.
    for m in 0..n_municipalities {
        let idx: Vec<usize> = (0..n_regions).filter(|&r| muni_of(r) == m).collect();
        let partial: f64 = idx[..idx.len() - 1]
            .iter()
            .map(|&r| specs[r].population_weight)
            .sum();
        specs[*idx.last().expect("every municipality has a region")].population_weight =
            1.0 - partial;
    }

    let mortality_male: Vec<f64> = (0..AGES).map(|a| gompertz(a, 1.25)).collect();
    let mortality_female: Vec<f64> = (0..AGES).map(|a| gompertz(a, 1.0)).collect();
    let mut survival = vec![1.0; AGES];
    for a in 1..AGES {
        survival[a] =
            survival[a - 1] * (1.0 - 0.5 * (mortality_male[a - 1] + mortality_female[a - 1]));
    }
    let age_weight: Vec<f64> = (0..AGES)
        .map(|a| survival[a] * (-(a as f64) / 60.0).exp())
        .collect();
    let pyramids = (0..n_municipalities)
        .map(|m| {
            let people = (total_pop * muni_share[m]).round() as u64;
            let mut w = Vec::with_capacity(2 * AGES);
            w.extend(age_weight.iter().map(|x| x * 0.49));
            w.extend(age_weight.iter().map(|x| x * 0.51));
            let counts = largest_remainder(people, &w);
            Pyramid {
                male: counts[..AGES].to_vec(),
                female: counts[AGES..].to_vec(),
            }
        })
        .collect();
    let fertility = FERTILE
        .map(|a| 0.11 * (-((a as f64 - 28.0) / 7.0).powi(2)).exp())
        .collect();
    let population_estimates = (0..n_municipalities)
        .map(|m| {
            (0..11)
                .map(|y| (total_pop * muni_share[m] * 1.01f64.powi(y)).round() as u64)
                .collect()
        })
        .collect();
    let tables = InputTables {
        pyramids,
        fertility,
        mortality_male,
        mortality_female,
        car_by_decile: [0.05, 0.08, 0.12, 0.18, 0.25, 0.33, 0.42, 0.52, 0.65, 0.80],
        population_estimates,
        hdi,
    };
    Ok((specs, tables))
}

/// Settings for building the initial city.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CitySpec {
    /// Seed of the synthetic input tables (independent of the run seed).
    pub data_seed: u64,
    pub regions: usize,
    pub municipalities: usize,
    /// Real population in thousands.
    pub scale: f64,
    /// Directory with input CSVs; overrides the synthetic generator.
    pub data_dir: Option<std::path::PathBuf>,
    /// Share of households owning no dwelling.
    pub renter_share: f64,
    pub initial_unemployment: f64,
    /// Share of firms that build dwellings.
    pub construction_share: f64,
    /// Initial savings as months of household income, drawn uniformly.
    pub savings_months: (f64, f64),
    /// Bank equity as a share of initial deposits.
    pub bank_equity_share: f64,
    /// Initial unit price of goods, which sets the money scale of wages.
    pub goods_price: f64,
}

impl Default for CitySpec {
    fn default() -> Self {
        CitySpec {
            data_seed: 1,
            regions: 12,
            municipalities: 3,
            scale: 1000.0,
            data_dir: None,
            renter_share: 0.3,
            initial_unemployment: 0.1,
            construction_share: 0.1,
            savings_months: (12.0, 60.0),
            bank_equity_share: 0.1,
            goods_price: INITIAL_GOODS_PRICE,
        }
    }
}

impl CitySpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("renter_share", self.renter_share),
            ("initial_unemployment", self.initial_unemployment),
            ("construction_share", self.construction_share),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::OutOfRange {
                    name,
                    value: v,
                    reason: "must lie in [0, 1]",
                });
            }
        }
        if !(self.goods_price > 0.0 && self.goods_price.is_finite()) {
            return Err(ConfigError::OutOfRange {
                name: "goods_price",
                value: self.goods_price,
                reason: "must be positive",
            });
        }
        let (lo, hi) = self.savings_months;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(ConfigError::OutOfRange {
                name: "savings_months",
                value: lo,
                reason: "need 0 <= min <= max",
            });
        }
        Ok(())
    }

    pub fn inputs(&self) -> Result<(Vec<RegionSpec>, InputTables), SimError> {
        match &self.data_dir {
            Some(dir) => load_inputs(dir),
            None => Ok(generate_synthetic_inputs(
                self.data_seed,
                self.regions,
                self.municipalities,
                self.scale,
            )?),
        }
    }
}

pub fn draw_qual<R: Rng + ?Sized>(rng: &mut R, cdf: &[f64; QUAL_LEVELS]) -> u8 {
    let u: f64 = rng.random();
    cdf.iter().position(|&c| u < c).unwrap_or(QUAL_LEVELS - 1) as u8 + 1
}

/// Expected net monthly wage of a worker with qualification `q`.
pub fn expected_wage(q: u8, p: &SimParams, price: f64, unemployment: f64) -> f64 {
    production([q], p.alpha, p.beta) * price * (1.0 - unemployment) * (1.0 - p.tax_labor)
}

/// Creates the initial population, dwellings, firms, bank and municipalities.
pub fn instantiate_city(
    specs: &[RegionSpec],
    tables: &InputTables,
    p: &SimParams,
    city: &CitySpec,
    seed: u64,
    baseline_rate: f64,
) -> Result<World, SimError> {
    p.validate()?;
    city.validate()?;
    let n_munis = validate_regions(specs)?;
    tables.validate(n_munis)?;
    let mut w = World::empty(seed, tables.clone());
    let mut rng = stream(seed, "synth");

    for s in specs {
        w.regions.push(Region {
            id: RegionId(s.region_id),
            municipality: MunicipalityId(s.municipality_id),
            x: s.x,
            y: s.y,
            qli: s.qli,
            licenses: (s.licenses as f64 * p.pop).round() as u32,
            license_price: s.license_price,
            income_index: 0.5,
            qual_cdf: s.qual_cdf,
            avg_household_size: s.avg_household_size,
        });
    }
    for m in 0..n_munis {
        w.municipalities.push(Municipality {
            id: MunicipalityId(m as u32),
            regions: specs
                .iter()
                .filter(|s| s.municipality_id as usize == m)
                .map(|s| RegionId(s.region_id))
                .collect(),
            treasury: Money::ZERO,
            receipts: TaxReceipts::default(),
            register: Vec::new(),
            population_prev: 0,
            policy_spent: Money::ZERO,
        });
    }

    // Persons and households, municipality by municipality.
    let mut hh_region: BTreeMap<HouseholdId, RegionId> = BTreeMap::new();
    for m in 0..n_munis {
        let pyr = &tables.pyramids[m];
        let real: Vec<f64> = pyr
            .male
            .iter()
            .chain(&pyr.female)
            .map(|&c| c as f64)
            .collect();
        let n = (real.iter().sum::<f64>() * p.pop).round() as u64;
        let cells = largest_remainder(n, &real);
        let mut people: Vec<(u32, Gender)> = Vec::with_capacity(n as usize);
        for (i, &c) in cells.iter().enumerate() {
            let (age, gender) = if i < AGES {
                (i, Gender::Male)
            } else {
                (i - AGES, Gender::Female)
            };
            people.extend(std::iter::repeat_n((age as u32, gender), c as usize));
        }
        if people.is_empty() {
            continue;
        }
        people.shuffle(&mut rng);
        let regions: Vec<&RegionSpec> = specs
            .iter()
            .filter(|s| s.municipality_id as usize == m)
            .collect();
        let avg_size: f64 = regions
            .iter()
            .map(|s| s.avg_household_size * s.population_weight)
            .sum();
        let adults: Vec<usize> = (0..people.len())
            .filter(|&i| people[i].0 >= ADULT_AGE)
            .collect();
        if adults.is_empty() {
            return Err(SimError::Generation(format!(
                "municipality {m} has no adults to head households"
            )));
        }
        let n_h = ((people.len() as f64 / avg_size).round() as usize).clamp(1, adults.len());
        let mut members: Vec<Vec<usize>> = adults[..n_h].iter().map(|&i| vec![i]).collect();
        let heads: std::collections::BTreeSet<usize> = adults[..n_h].iter().copied().collect();
        for i in 0..people.len() {
            if !heads.contains(&i) {
                let k = rng.random_range(0..n_h);
                members[k].push(i);
            }
        }
        let weights: Vec<f64> = regions.iter().map(|s| s.population_weight).collect();
        let per_region = largest_remainder(n_h as u64, &weights);
        let mut slots: Vec<RegionId> = Vec::with_capacity(n_h);
        for (s, &k) in regions.iter().zip(&per_region) {
            slots.extend(std::iter::repeat_n(RegionId(s.region_id), k as usize));
        }
        slots.shuffle(&mut rng);
        for (group, region) in members.into_iter().zip(slots) {
            let hid = w.ids.household();
            let mut h = Household::new(hid);
            let cdf = &specs[region.index()].qual_cdf;
            for i in group {
                let (age, gender) = people[i];
                let pid = w.ids.person();
                let since_birthday = rng.random_range(0..12u32);
                w.persons.insert(
                    pid,
                    Person {
                        id: pid,
                        age_months: age * 12 + since_birthday,
                        gender,
                        birthday_month: birthday_month_for(0, age * 12 + since_birthday),
                        qual: draw_qual(&mut rng, cdf),
                        cash: Money::ZERO,
                        wage: Money::ZERO,
                        employer: None,
                        household: hid,
                        spouse: None,
                        car_draw: rng.random(),
                    },
                );
                h.members.push(pid);
            }
            // Pair the head with an adult of the other gender, if present.
            let head = h.members[0];
            let head_p = &w.persons[&head];
            let partner = h.members[1..].iter().copied().find(|q| {
                let o = &w.persons[q];
                o.is_adult()
                    && o.gender != head_p.gender
                    && o.age_years().abs_diff(head_p.age_years()) <= 15
            });
            if let Some(q) = partner {
                w.persons.get_mut(&head).expect("head").spouse = Some(q);
                w.persons.get_mut(&q).expect("partner").spouse = Some(head);
            }
            hh_region.insert(hid, region);
            w.households.insert(hid, h);
        }
    }
    if w.households.is_empty() {
        return Err(SimError::Generation("no households were created".into()));
    }
    for m in 0..n_munis {
        if !hh_region
            .values()
            .any(|r| w.regions[r.index()].municipality.index() == m)
        {
            return Err(SimError::Generation(format!(
                "municipality {m} has no households"
            )));
        }
    }

    // Firms.
    let mut firm_regions = Vec::new();
    for s in specs {
        let n = (s.firms as f64 * p.pop).round() as usize;
        firm_regions.extend(std::iter::repeat_n(RegionId(s.region_id), n));
    }
    if firm_regions.is_empty() {
        firm_regions.push(RegionId(0));
    }
    let n_builders = ((firm_regions.len() as f64 * city.construction_share).round() as usize)
        .min(firm_regions.len());
    let mut order: Vec<usize> = (0..firm_regions.len()).collect();
    order.shuffle(&mut rng);
    let builders: std::collections::BTreeSet<usize> = order[..n_builders].iter().copied().collect();
    for (i, region) in firm_regions.into_iter().enumerate() {
        let kind = if builders.contains(&i) {
            FirmKind::Construction
        } else {
            FirmKind::Consumer
        };
        let id = w.ids.firm();
        w.firms
            .insert(id, Firm::new(id, region, kind, city.goods_price));
    }

    // Initial jobs.
    let firm_ids: Vec<FirmId> = w.firms.keys().copied().collect();
    let workers: Vec<PersonId> = w
        .persons
        .values()
        .filter(|x| x.in_labor_force())
        .map(|x| x.id)
        .collect();
    for pid in &workers {
        if rng.random::<f64>() < city.initial_unemployment {
            continue;
        }
        let f = firm_ids[rng.random_range(0..firm_ids.len())];
        w.persons.get_mut(pid).expect("worker").employer = Some(f);
        w.firms.get_mut(&f).expect("firm").employees.insert(*pid);
    }
    let employed = workers
        .iter()
        .filter(|p| w.persons[p].employer.is_some())
        .count();
    w.unemployment = if workers.is_empty() {
        0.0
    } else {
        1.0 - employed as f64 / workers.len() as f64
    };

    // Warm start: last month's revenue equals current output value.
    let u0 = if p.wage_unemployment_discount {
        w.unemployment
    } else {
        0.0
    };
    for fid in &firm_ids {
        let q = production(
            w.firms[fid].employees.iter().map(|e| w.persons[e].qual),
            p.alpha,
            p.beta,
        );
        let revenue = Money::from_units(q * city.goods_price);
        let firm = w.firms.get_mut(fid).expect("firm");
        firm.last_revenue = revenue;
        firm.wage_pool = revenue.scale(1.0 - u0);
        firm.produced = q;
        firm.sold = q;
        firm.cash = revenue + revenue;
        if firm.kind == FirmKind::Consumer {
            firm.inventory = q;
        } else {
            firm.cash += Money::from_units(50.0);
        }
    }
    for x in w.persons.values_mut() {
        if x.employer.is_some() {
            let net = Money::from_units(expected_wage(x.qual, p, city.goods_price, u0));
            x.wage = net;
            x.cash = net;
        }
    }
    let ids: Vec<HouseholdId> = w.households.keys().copied().collect();
    for hid in &ids {
        let income: f64 = w.households[hid]
            .members
            .iter()
            .map(|m| w.persons[m].wage.to_units())
            .sum();
        let h = w.households.get_mut(hid).expect("household");
        h.income_mean = income;
        h.income_months = 12;
    }

    // Dwellings: one per household plus the vacant stock.
    let n_h = w.households.len();
    let n_d = (n_h as f64 / (1.0 - p.vacancy_share)).round() as usize;
    let global_w: Vec<f64> = specs
        .iter()
        .map(|s| {
            let m = s.municipality_id as usize;
            tables.pyramids[m]
                .male
                .iter()
                .chain(&tables.pyramids[m].female)
                .sum::<u64>() as f64
                * s.population_weight
        })
        .collect();
    let vacant = largest_remainder((n_d - n_h) as u64, &global_w);
    let mut by_region: Vec<Vec<HouseholdId>> = vec![Vec::new(); specs.len()];
    for (h, r) in &hh_region {
        by_region[r.index()].push(*h);
    }
    let mut renters_pool: Vec<DwellingId> = Vec::new();
    for (r, households) in by_region.iter_mut().enumerate() {
        let mut made: Vec<DwellingId> = Vec::new();
        for _ in 0..households.len() + vacant[r] as usize {
            let id = w.ids.dwelling();
            w.dwellings.insert(
                id,
                Dwelling {
                    id,
                    region: RegionId(r as u32),
                    size: rng.random_range(20..=120u32) as f64,
                    quality: rng.random_range(1..=4u8),
                    owner: Owner::Household(HouseholdId(0)),
                    occupant: None,
                    listing: Listing::None,
                    months_listed: 0,
                    value: 0.0,
                    ask: 0.0,
                    for_sale: false,
                },
            );
            made.push(id);
        }
        // Richer households live in larger, better dwellings.
        let mut noisy: Vec<(HouseholdId, f64)> = households
            .iter()
            .map(|h| (*h, w.households[h].income_mean * rng.random_range(0.5..1.5)))
            .collect();
        noisy.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        made.sort_by(|a, b| {
            w.dwellings[b]
                .hsq()
                .total_cmp(&w.dwellings[a].hsq())
                .then(a.cmp(b))
        });
        let occupied = households.len();
        let mut stock: Vec<DwellingId> = made.clone();
        // Spread the vacant units through the quality range.
        stock.shuffle(&mut rng);
        let mut homes: Vec<DwellingId> = stock[..occupied].to_vec();
        homes.sort_by(|a, b| {
            w.dwellings[b]
                .hsq()
                .total_cmp(&w.dwellings[a].hsq())
                .then(a.cmp(b))
        });
        for ((hid, _), d) in noisy.iter().zip(&homes) {
            w.dwellings.get_mut(d).expect("dwelling").occupant = Some(*hid);
            w.households.get_mut(hid).expect("household").dwelling = Some(*d);
        }
        renters_pool.extend_from_slice(&stock[occupied..]);
    }

    // Ownership: the poorest (noisily ranked) rent, the rest own their home;
    // every other dwelling goes to owners by an income-weighted lottery.
    let mut ranked: Vec<(HouseholdId, f64)> = ids
        .iter()
        .map(|h| (*h, w.households[h].income_mean * rng.random_range(0.5..1.5)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let n_renters = ((n_h as f64 * city.renter_share).round() as usize).min(n_h - 1);
    let renters: Vec<HouseholdId> = ranked[..n_renters].iter().map(|x| x.0).collect();
    let owners: Vec<HouseholdId> = ranked[n_renters..].iter().map(|x| x.0).collect();
    let mut surplus: Vec<DwellingId> = renters_pool;
    for hid in &owners {
        let d = w.households[hid].dwelling.expect("housed");
        w.dwellings.get_mut(&d).expect("dwelling").owner = Owner::Household(*hid);
        w.households.get_mut(hid).expect("owner").owned.insert(d);
    }
    for hid in &renters {
        surplus.push(w.households[hid].dwelling.expect("housed"));
    }
    surplus.sort();
    let lottery: Vec<f64> = owners
        .iter()
        .map(|h| w.households[h].income_mean + 0.01)
        .collect();
    let dist = rand::distr::weighted::WeightedIndex::new(&lottery)
        .map_err(|e| SimError::Generation(format!("ownership lottery: {e}")))?;
    for d in surplus {
        let owner = owners[rng.sample(&dist)];
        w.dwellings.get_mut(&d).expect("dwelling").owner = Owner::Household(owner);
        w.households.get_mut(&owner).expect("owner").owned.insert(d);
    }

    update_prices(&mut w, p);
    for hid in &renters {
        let d = w.households[hid].dwelling.expect("housed");
        let rent = Money::from_units(rent_for(w.dwellings[&d].value, p.rental_price_fraction))
            .max(Money::from_minor(1));
        w.households.get_mut(hid).expect("renter").rental = Some(Rental { dwelling: d, rent });
    }

    // Money: savings and reserves scaled to income.
    let (lo, hi) = city.savings_months;
    for hid in &ids {
        let income = w.households[hid].income_mean.max(0.05);
        let months = if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        };
        let h = w.households.get_mut(hid).expect("household");
        h.savings = Money::from_units(income * months);
        h.reserve = Money::from_units(income * 2.0);
    }
    w.bank.equity = w.deposits().scale(city.bank_equity_share);
    for hid in &ids {
        let wealth = w.household_wealth(&w.households[hid]);
        let h = w.households.get_mut(hid).expect("household");
        h.pi = permanent_income(h.income_mean, wealth, baseline_rate);
    }
    let pop = w.municipal_population();
    for (m, muni) in w.municipalities.iter_mut().enumerate() {
        muni.population_prev = pop[m];
    }
    Ok(w)
}

#[derive(Serialize, Deserialize)]
struct RegionRow {
    region_id: u32,
    municipality_id: u32,
    x: f64,
    y: f64,
    population_weight: f64,
    q1: f64,
    q2: f64,
    q3: f64,
    q4: f64,
    q5: f64,
    avg_household_size: f64,
    firms: u32,
    licenses: u32,
    license_price: f64,
    qli: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> SimError {
    SimError::Config(ConfigError::City(format!("{}: {e}", path.display())))
}

/// Writes the input tables as CSV files into `dir`.
pub fn write_inputs(
    dir: &Path,
    specs: &[RegionSpec],
    tables: &InputTables,
) -> Result<Vec<std::path::PathBuf>, SimError> {
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let mut written = Vec::new();
    let mut open =
        |name: &str| -> Result<(csv::Writer<std::fs::File>, std::path::PathBuf), SimError> {
            let path = dir.join(name);
            let wtr = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
            written.push(path.clone());
            Ok((wtr, path))
        };

    let (mut wtr, path) = open("regions.csv")?;
    for s in specs {
        let [q1, q2, q3, q4, q5] = s.qual_cdf;
        wtr.serialize(RegionRow {
            region_id: s.region_id,
            municipality_id: s.municipality_id,
            x: s.x,
            y: s.y,
            population_weight: s.population_weight,
            q1,
            q2,
            q3,
            q4,
            q5,
            avg_household_size: s.avg_household_size,
            firms: s.firms,
            licenses: s.licenses,
            license_price: s.license_price,
            qli: s.qli,
        })
        .map_err(|e| csv_err(&path, e))?;
    }
    wtr.flush().map_err(|e| SimError::io(&path, e))?;

    let (mut wtr, path) = open("pyramid.csv")?;
    wtr.write_record(["municipality_id", "age", "male", "female"])
        .map_err(|e| csv_err(&path, e))?;
    for (m, pyr) in tables.pyramids.iter().enumerate() {
        for a in 0..AGES {
            wtr.write_record([
                m.to_string(),
                a.to_string(),
                pyr.male[a].to_string(),
                pyr.female[a].to_string(),
            ])
            .map_err(|e| csv_err(&path, e))?;
        }
    }
    wtr.flush().map_err(|e| SimError::io(&path, e))?;

    let (mut wtr, path) = open("fertility.csv")?;
    wtr.write_record(["age", "probability"])
        .map_err(|e| csv_err(&path, e))?;
    for (i, f) in tables.fertility.iter().enumerate() {
        wtr.write_record([(FERTILE.start() + i as u32).to_string(), f.to_string()])
            .map_err(|e| csv_err(&path, e))?;
    }
    wtr.flush().map_err(|e| SimError::io(&path, e))?;

    let (mut wtr, path) = open("mortality.csv")?;
    wtr.write_record(["age", "male", "female"])
        .map_err(|e| csv_err(&path, e))?;
    for a in 0..AGES {
        wtr.write_record([
            a.to_string(),
            tables.mortality_male[a].to_string(),
            tables.mortality_female[a].to_string(),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    wtr.flush().map_err(|e| SimError::io(&path, e))?;

    let (mut wtr, path) = open("car_ownership.csv")?;
    wtr.write_record(["decile", "probability"])
        .map_err(|e| csv_err(&path, e))?;
    for (d, c) in tables.car_by_decile.iter().enumerate() {
        wtr.write_record([(d + 1).to_string(), c.to_string()])
            .map_err(|e| csv_err(&path, e))?;
    }
    wtr.flush().map_err(|e| SimError::io(&path, e))?;

    let (mut wtr, path) = open("population_estimates.csv")?;
    wtr.write_record(["municipality_id", "year_offset", "population"])
        .map_err(|e| csv_err(&path, e))?;
    for (m, row) in tables.population_estimates.iter().enumerate() {
        for (y, v) in row.iter().enumerate() {
            wtr.write_record([m.to_string(), y.to_string(), v.to_string()])
                .map_err(|e| csv_err(&path, e))?;
        }
    }
    wtr.flush().map_err(|e| SimError::io(&path, e))?;

    let (mut wtr, path) = open("hdi.csv")?;
    wtr.write_record(["municipality_id", "hdi"])
        .map_err(|e| csv_err(&path, e))?;
    for (m, v) in tables.hdi.iter().enumerate() {
        wtr.write_record([m.to_string(), v.to_string()])
            .map_err(|e| csv_err(&path, e))?;
    }
    wtr.flush().map_err(|e| SimError::io(&path, e))?;
    Ok(written)
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, SimError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    rdr.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| csv_err(path, e))
}

/// Reads tables written by [`write_inputs`] (or prepared by hand in the same layout).
pub fn load_inputs(dir: &Path) -> Result<(Vec<RegionSpec>, InputTables), SimError> {
    let specs: Vec<RegionSpec> = read_rows::<RegionRow>(&dir.join("regions.csv"))?
        .into_iter()
        .map(|r| RegionSpec {
            region_id: r.region_id,
            municipality_id: r.municipality_id,
            x: r.x,
            y: r.y,
            population_weight: r.population_weight,
            qual_cdf: [r.q1, r.q2, r.q3, r.q4, r.q5],
            avg_household_size: r.avg_household_size,
            firms: r.firms,
            licenses: r.licenses,
            license_price: r.license_price,
            qli: r.qli,
        })
        .collect();
    let munis = validate_regions(&specs)?;
    let mut t = InputTables::empty();
    t.pyramids = vec![
        Pyramid {
            male: vec![0; AGES],
            female: vec![0; AGES]
        };
        munis
    ];
    t.hdi = vec![0.0; munis];
    t.population_estimates = vec![Vec::new(); munis];
    let bad = |what: &str| SimError::Config(ConfigError::City(format!("{what} out of range")));
    for (m, a, male, female) in read_rows::<(usize, usize, u64, u64)>(&dir.join("pyramid.csv"))? {
        let pyr = t
            .pyramids
            .get_mut(m)
            .ok_or_else(|| bad("pyramid municipality"))?;
        if a >= AGES {
            return Err(bad("pyramid age"));
        }
        pyr.male[a] = male;
        pyr.female[a] = female;
    }
    for (a, prob) in read_rows::<(u32, f64)>(&dir.join("fertility.csv"))? {
        if !FERTILE.contains(&a) {
            return Err(bad("fertility age"));
        }
        t.fertility[(a - FERTILE.start()) as usize] = prob;
    }
    for (a, male, female) in read_rows::<(usize, f64, f64)>(&dir.join("mortality.csv"))? {
        if a >= AGES {
            return Err(bad("mortality age"));
        }
        t.mortality_male[a] = male;
        t.mortality_female[a] = female;
    }
    for (d, prob) in read_rows::<(usize, f64)>(&dir.join("car_ownership.csv"))? {
        if !(1..=10).contains(&d) {
            return Err(bad("car decile"));
        }
        t.car_by_decile[d - 1] = prob;
    }
    for (m, _year, v) in read_rows::<(usize, usize, u64)>(&dir.join("population_estimates.csv"))? {
        t.population_estimates
            .get_mut(m)
            .ok_or_else(|| bad("estimate municipality"))?
            .push(v);
    }
    for (m, v) in read_rows::<(usize, f64)>(&dir.join("hdi.csv"))? {
        *t.hdi.get_mut(m).ok_or_else(|| bad("HDI municipality"))? = v;
    }
    t.validate(munis)?;
    Ok((specs, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_region_gets_full_weight() {
        let (specs, tables) = generate_synthetic_inputs(1, 1, 1, 100.0).unwrap();
        assert_eq!(specs.len(), 1);
        assert_eq!(specs[0].population_weight, 1.0);
        assert_eq!(tables.mortality(Gender::Male, 110), 1.0);
        assert_eq!(tables.mortality_female[110], 1.0);
    }

    #[test]
    fn weights_sum_per_municipality() {
        let (specs, tables) = generate_synthetic_inputs(7, 10, 3, 100.0).unwrap();
        for m in 0..3 {
            let s: f64 = specs
                .iter()
                .filter(|x| x.municipality_id == m)
                .map(|x| x.population_weight)
                .sum();
            assert!((s - 1.0).abs() <= 1e-9);
        }
        assert_eq!(validate_regions(&specs).unwrap(), 3);
        tables.validate(3).unwrap();
    }

    #[test]
    fn bad_generation_inputs() {
        assert!(generate_synthetic_inputs(1, 1, 1, 0.0).is_err());
        assert!(generate_synthetic_inputs(1, 2, 3, 10.0).is_err());
        assert!(generate_synthetic_inputs(1, 2, 0, 10.0).is_err());
    }

    #[test]
    fn largest_remainder_is_exact() {
        assert_eq!(largest_remainder(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(largest_remainder(0, &[1.0]), vec![0]);
        assert_eq!(largest_remainder(5, &[0.0, 0.0]).iter().sum::<u64>(), 5);
    }

    #[test]
    fn qualification_draws_follow_cdf() {
        let mut rng = stream(3, "q");
        let cdf = [0.0, 0.0, 1.0, 1.0, 1.0];
        assert!((0..50).all(|_| draw_qual(&mut rng, &cdf) == 3));
    }
}

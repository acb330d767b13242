//! Monthly matching of job seekers and firm vacancies.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::firms::{enters_labor_market, pick_layoff};
use crate::ids::{FirmId, PersonId, RegionId};
use crate::params::SimParams;
use crate::rng::chance;
use crate::state::World;

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub person: PersonId,
    pub qual: u8,
    pub region: RegionId,
    /// Commuting cost per unit of distance.
    pub transport_cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vacancy {
    pub firm: FirmId,
    pub region: RegionId,
    /// Base wage: the firm's total payout last month.
    pub base_wage: f64,
    pub distance_only: bool,
}

pub fn score(c: &Candidate, v: &Vacancy, distance: f64) -> f64 {
    let commute = distance * c.transport_cost;
    if v.distance_only {
        v.base_wage - commute
    } else {
        c.qual as f64 + v.base_wage - commute
    }
}

/// Fills vacancies in descending base-wage order. Each vacancy looks at its
/// own sample of `sigma` candidates and hires the best one still available.
pub fn clear_market<R, D>(
    candidates: &[Candidate],
    vacancies: &[Vacancy],
    sigma: usize,
    distance: D,
    rng: &mut R,
) -> Vec<(FirmId, PersonId)>
where
    R: Rng + ?Sized,
    D: Fn(RegionId, RegionId) -> f64,
{
    let idx: Vec<usize> = (0..candidates.len()).collect();
    let samples: Vec<Vec<usize>> = vacancies
        .iter()
        .map(|_| idx.choose_multiple(rng, sigma).copied().collect())
        .collect();
    let mut order: Vec<usize> = (0..vacancies.len()).collect();
    order.sort_by(|&a, &b| vacancies[b].base_wage.total_cmp(&vacancies[a].base_wage));
    let mut taken = vec![false; candidates.len()];
    let mut matches = Vec::new();
    for vi in order {
        if matches.len() == candidates.len() {
            break;
        }
        let v = &vacancies[vi];
        let best = samples[vi]
            .iter()
            .copied()
            .filter(|&ci| !taken[ci])
            .map(|ci| {
                (
                    ci,
                    score(
                        &candidates[ci],
                        v,
                        distance(candidates[ci].region, v.region),
                    ),
                )
            })
            .fold(None::<(usize, f64)>, |best, (ci, s)| match best {
                Some((_, bs)) if bs >= s => best,
                _ => Some((ci, s)),
            });
        if let Some((ci, _)) = best {
            taken[ci] = true;
            matches.push((v.firm, candidates[ci].person));
        }
    }
    matches
}

/// Decile (0..=9) of `value` within the sorted sample.
pub fn decile(sorted: &[f64], value: f64) -> usize {
    if sorted.is_empty() {
        return 0;
    }
    let below = sorted.partition_point(|&x| x < value);
    ((below * 10) / sorted.len()).min(9)
}

pub fn run_labor_market(w: &mut World, p: &SimParams) {
    let mut firm_ids: Vec<FirmId> = w.firms.keys().copied().collect();
    firm_ids.shuffle(&mut w.rng.labor);
    let mut vacancies = Vec::new();
    for fid in firm_ids {
        if !enters_labor_market(&mut w.rng.labor, p.iota) {
            continue;
        }
        let firm = &w.firms[&fid];
        if firm.profit.is_negative() {
            let staff: Vec<PersonId> = firm.employees.iter().copied().collect();
            if let Some(pid) = pick_layoff(&staff, &mut w.rng.labor) {
                w.detach_employer(pid);
                w.activity.fires += 1;
            }
        } else {
            let distance_only = chance(&mut w.rng.labor, p.eta);
            vacancies.push(Vacancy {
                firm: fid,
                region: firm.region,
                base_wage: firm.wage_pool.to_units(),
                distance_only,
            });
        }
    }
    if vacancies.is_empty() {
        return;
    }

    let mut wages: Vec<f64> = w
        .persons
        .values()
        .filter(|x| x.in_labor_force())
        .map(|x| x.wage.to_units())
        .collect();
    wages.sort_by(f64::total_cmp);
    let mut candidates: Vec<Candidate> = w
        .persons
        .values()
        .filter(|x| x.in_labor_force() && x.employer.is_none())
        .filter_map(|x| {
            let region = w.household_region(x.household)?;
            let has_car = x.car_draw < w.tables.car_by_decile[decile(&wages, x.wage.to_units())];
            let transport_cost = if has_car {
                p.transport_cost_car
            } else {
                p.transport_cost_public
            };
            Some(Candidate {
                person: x.id,
                qual: x.qual,
                region,
                transport_cost,
            })
        })
        .collect();
    candidates.shuffle(&mut w.rng.labor);
    vacancies.shuffle(&mut w.rng.labor);

    let regions = &w.regions;
    let dist = |a: RegionId, b: RegionId| {
        let (ra, rb) = (&regions[a.index()], &regions[b.index()]);
        ((ra.x - rb.x).powi(2) + (ra.y - rb.y).powi(2)).sqrt()
    };
    let matches = clear_market(
        &candidates,
        &vacancies,
        p.sigma as usize,
        dist,
        &mut w.rng.labor,
    );
    for (fid, pid) in matches {
        w.persons.get_mut(&pid).expect("candidate exists").employer = Some(fid);
        w.firms
            .get_mut(&fid)
            .expect("firm exists")
            .employees
            .insert(pid);
        w.activity.hires += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn cand(id: u32, qual: u8, region: u32, cost: f64) -> Candidate {
        Candidate {
            person: PersonId(id),
            qual,
            region: RegionId(region),
            transport_cost: cost,
        }
    }

    fn vac(id: u32, wage: f64, distance_only: bool) -> Vacancy {
        Vacancy {
            firm: FirmId(id),
            region: RegionId(0),
            base_wage: wage,
            distance_only,
        }
    }

    #[test]
    fn score_examples() {
        let c = cand(0, 5, 0, 1.0);
        assert_eq!(score(&c, &vac(0, 10.0, false), 2.0), 13.0);
        assert_eq!(score(&c, &vac(0, 10.0, true), 2.0), 8.0);
        let free = cand(0, 5, 0, 0.0);
        assert_eq!(
            score(&free, &vac(0, 10.0, false), 2.0),
            score(&free, &vac(0, 10.0, false), 200.0)
        );
    }

    #[test]
    fn trivial_markets() {
        let mut rng = stream(1, "t");
        let none = clear_market(&[cand(0, 1, 0, 1.0)], &[], 20, |_, _| 0.0, &mut rng);
        assert!(none.is_empty());
        let one = clear_market(
            &[cand(7, 1, 0, 1.0)],
            &[vac(3, -100.0, false)],
            20,
            |_, _| 50.0,
            &mut rng,
        );
        assert_eq!(one, vec![(FirmId(3), PersonId(7))]);
    }

    #[test]
    fn higher_wage_firm_chooses_first() {
        let mut rng = stream(2, "t");
        let cands = [cand(0, 5, 0, 1.0), cand(1, 1, 0, 1.0)];
        let vacs = [vac(1, 5.0, false), vac(0, 10.0, false)];
        let m = clear_market(&cands, &vacs, 20, |_, _| 0.0, &mut rng);
        assert_eq!(m, vec![(FirmId(0), PersonId(0)), (FirmId(1), PersonId(1))]);
    }

    #[test]
    fn deciles() {
        let v: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(decile(&v, 0.0), 0);
        assert_eq!(decile(&v, 9.0), 9);
        assert_eq!(decile(&v, 100.0), 9);
        assert_eq!(decile(&[], 1.0), 0);
    }
}

//! The monthly event sequence.

use crate::demographics::{process_divorce, process_marriage, process_migration, run_birthdays};
use crate::error::{Result, SimError};
use crate::finance::{pay_deposit_interest, service_loans};
use crate::firms::{enter_firms, pay_firms, produce_all};
use crate::goods::consume_all;
use crate::govern::{collect_rent, run_municipal};
use crate::housing::{decide_move, run_construction_planning, run_real_estate};
use crate::ids::HouseholdId;
use crate::labor::run_labor_market;
use crate::ledger::{check_conservation, TOLERANCE};
use crate::money::Money;
use crate::params::SimParams;
use crate::series::ExogenousSeries;
use crate::state::{MonthActivity, World};
use crate::stats::{compute_frame, IndicatorFrame};

/// Names of the monthly phases, in execution order.
pub const PHASES: [&str; 14] = [
    "exogenous",
    "production",
    "demographics",
    "migration",
    "consumption",
    "loans",
    "firm payments",
    "construction",
    "labor",
    "real estate",
    "moving",
    "investment",
    "municipal",
    "statistics",
];

/// Months of permanent income history kept for the policy register.
const PI_HISTORY: usize = 12;

fn checked(w: &mut World, phase: &'static str, f: impl FnOnce(&mut World)) -> Result<()> {
    let before = w.money_total();
    f(w);
    let drift = w.money_total() - before;
    let scale = (before.unsigned_abs() as f64).max(1.0);
    if drift.unsigned_abs() as f64 / scale > TOLERANCE {
        return Err(SimError::Conservation { phase, drift });
    }
    Ok(())
}

/// Month-end household bookkeeping: income history, then member cash goes to
/// the reserve and anything above the reserve target is deposited as savings.
pub fn invest(w: &mut World, p: &SimParams) {
    let ids: Vec<HouseholdId> = w.households.keys().copied().collect();
    for hid in ids {
        let members = w.households[&hid].members.clone();
        let mut cash = Money::ZERO;
        for m in &members {
            let person = w.persons.get_mut(m).expect("member exists");
            cash += person.cash;
            person.cash = Money::ZERO;
        }
        let h = w.households.get_mut(&hid).expect("household exists");
        let income = std::mem::take(&mut h.income_month);
        h.record_income(income.to_units());
        h.pi_recent.push(h.pi);
        if h.pi_recent.len() > PI_HISTORY {
            h.pi_recent.remove(0);
        }
        h.reserve += cash;
        let target = Money::from_units(h.pi.max(0.0) * p.reserve_multiple);
        if h.reserve > target {
            let excess = h.reserve - target;
            h.reserve -= excess;
            h.savings += excess;
        }
    }
}

fn relocate_owners(w: &mut World) {
    let owners: Vec<HouseholdId> = w
        .households
        .values()
        .filter(|h| !h.owned.is_empty())
        .map(|h| h.id)
        .collect();
    for hid in owners {
        decide_move(w, hid);
    }
}

/// Advances the world by one month.
pub fn step_month(
    w: &mut World,
    p: &SimParams,
    series: &ExogenousSeries,
) -> Result<IndicatorFrame> {
    let inputs = series.month(w.month)?;
    w.activity = MonthActivity::default();
    let start = w.ledger_snapshot();

    checked(w, PHASES[0], |w| enter_firms(w, p, inputs.firm_entry))?;
    checked(w, PHASES[1], |w| produce_all(w, p))?;
    checked(w, PHASES[2], run_birthdays)?;
    let targets: Vec<u64> = (0..w.municipalities.len())
        .map(|m| inputs.population_target(m))
        .collect();
    checked(w, PHASES[3], |w| {
        process_migration(w, p, &targets);
        process_marriage(w, p);
        process_divorce(w, p);
    })?;
    checked(w, PHASES[4], |w| consume_all(w, p, inputs.baseline_rate))?;
    checked(w, PHASES[5], |w| {
        service_loans(w);
        collect_rent(w);
        pay_deposit_interest(w, inputs.baseline_rate);
    })?;
    checked(w, PHASES[6], |w| pay_firms(w, p))?;
    checked(w, PHASES[7], |w| run_construction_planning(w, p))?;
    checked(w, PHASES[8], |w| run_labor_market(w, p))?;
    checked(w, PHASES[9], |w| {
        run_real_estate(w, p, inputs.mortgage_rate, &[]);
    })?;
    checked(w, PHASES[10], relocate_owners)?;
    checked(w, PHASES[11], |w| invest(w, p))?;
    checked(w, PHASES[12], |w| {
        run_municipal(w, p);
    })?;

    let mut end = w.ledger_snapshot();
    let mut begin = start;
    begin.pad(&w.activity.opened);
    end.pad(&w.activity.closed);
    let report = check_conservation(&begin, &end)?;
    if report.violated {
        return Err(SimError::Conservation {
            phase: "month",
            drift: report.drift,
        });
    }

    if let Some(u) = crate::stats::unemployment(w.persons.values()) {
        w.unemployment = u;
    }
    let frame = compute_frame(w);
    w.month += 1;
    Ok(frame)
}

/// A world together with the inputs that drive it.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub world: World,
    pub params: SimParams,
    pub series: ExogenousSeries,
    pub frames: Vec<IndicatorFrame>,
}

impl Simulation {
    pub fn new(world: World, params: SimParams, series: ExogenousSeries) -> Self {
        Simulation {
            world,
            params,
            series,
            frames: Vec::new(),
        }
    }

    pub fn step(&mut self) -> Result<&IndicatorFrame> {
        let frame = step_month(&mut self.world, &self.params, &self.series)?;
        self.frames.push(frame);
        Ok(self.frames.last().expect("frame was just pushed"))
    }

    pub fn run(&mut self, months: u32) -> Result<()> {
        for _ in 0..months {
            self.step()?;
        }
        Ok(())
    }
}

//! Acceptance checks, one line per criterion. Runs full simulations, so it
//! takes a few minutes even with optimized test builds.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polisim::batch::{run_jobs, run_seed, seed_jobs, sweep_jobs, write_outputs, Job, Sweep};
use polisim::firms::{firm_tax, production, wage_bill};
use polisim::goods::permanent_income;
use polisim::housing::ask_price;
use polisim::ids::{FirmId, PersonId, RegionId};
use polisim::labor::{score, Candidate, Vacancy};
use polisim::stats::{gini, RunRecord};
use polisim::{Config, Money, PolicyKind, SimParams};

const EQ_TOL: f64 = 1e-9;
const DRIFT_TOL: f64 = 1e-9;
const GINI_TOL: f64 = 1e-12;
const POLICY_SEEDS: usize = 5;
const POLICY_MIN_WINS: usize = 4;
const SWITCH_SEEDS: usize = 3;
const DETERMINISM_MONTHS: u32 = 36;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: u32, started: Instant, o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!(
        "criterion {n}: {tag} ({:.1} s) {}",
        started.elapsed().as_secs_f64(),
        o.detail
    );
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= EQ_TOL
}

fn workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn formula_examples() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if !close(got, want) {
            failures.push(format!("{name}: got {got}, want {want}"));
        }
    };

    check("production q=1", production([1], 0.6, 10.0), 0.1);
    check("production q=4", production([4], 0.5, 1.0), 2.0);
    check("production q=1,4", production([1, 4], 0.5, 1.0), 3.0);

    for (r, y, w, want) in [
        (0.01, 0.0, 0.0, 0.0),
        (0.01, 100.0, 0.0, 100.0),
        (0.3, 100.0, 0.0, 100.0),
        (0.01, 100.0, 1000.0, 110.0),
    ] {
        check(
            &format!("pi y={y} w={w} r={r}"),
            permanent_income(y, w, r),
            want,
        );
    }

    let net = |bill: Vec<polisim::firms::WagePayment>| {
        bill.iter().map(|p| p.net.to_units()).collect::<Vec<_>>()
    };
    let one = net(wage_bill(Money::from_units(100.0), 0.0, &[1], 0.6, 0.0));
    check("wage tr=100", one[0], 100.0);
    let two = net(wage_bill(Money::from_units(200.0), 0.1, &[2, 2], 0.6, 0.0));
    check("wage tr=200 u=.1 a", two[0], 90.0);
    check("wage tr=200 u=.1 b", two[1], 90.0);
    let taxed = net(wage_bill(Money::from_units(100.0), 0.0, &[1], 0.6, 0.1));
    check("wage taxed", taxed[0], 90.0);
    check(
        "firm tax zero",
        firm_tax(Money::ZERO, Money::ZERO, &SimParams::default()).to_units(),
        0.0,
    );

    let cand = Candidate {
        person: PersonId(0),
        qual: 5,
        region: RegionId(0),
        transport_cost: 1.0,
    };
    let mut vac = Vacancy {
        firm: FirmId(0),
        region: RegionId(0),
        base_wage: 10.0,
        distance_only: false,
    };
    check("score full", score(&cand, &vac, 2.0), 13.0);
    vac.distance_only = true;
    check("score distance only", score(&cand, &vac, 2.0), 8.0);
    let free = Candidate {
        transport_cost: 0.0,
        ..cand
    };
    vac.distance_only = false;
    check(
        "score c=0",
        score(&free, &vac, 0.0) - score(&free, &vac, 50.0),
        0.0,
    );

    let p = SimParams {
        tau: 3.0,
        gamma: 0.6,
        kappa: -0.01,
        ..SimParams::default()
    };
    check("ask T=0", ask_price(100.0, 0.7, 0.5, 0, &p), 175.0);
    check(
        "ask T large",
        ask_price(100.0, 0.7, 0.5, 100_000, &p),
        105.0,
    );
    check(
        "ask tau=0",
        ask_price(
            100.0,
            0.7,
            0.5,
            0,
            &SimParams {
                tau: 0.0,
                ..p.clone()
            },
        ),
        70.0,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let y = rng.random_range(0.0..50_000.0);
        let w = rng.random_range(-100_000.0..1_000_000.0);
        let r = rng.random_range(1e-4..0.05);
        let pi = permanent_income(y, w, r);
        let err = (pi - (y + r * w)).abs() / (y + r * w).abs().max(1.0);
        worst = worst.max(err);
    }
    if worst > EQ_TOL {
        failures.push(format!("identity error {worst:e}"));
    }
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("all examples within {EQ_TOL:e}, identity worst relative error {worst:.1e} on 10000 households")
        } else {
            failures.join("; ")
        },
    }
}

struct DefaultRun {
    records: RunRecord,
    worst_drift: f64,
    seconds: f64,
    persons: usize,
    mortgage: Outcome,
}

fn default_run() -> DefaultRun {
    let config = Config::default();
    let mut sim = config.build(config.seed).expect("default city builds");
    let persons = sim.world.persons.len();
    let started = Instant::now();
    let mut worst_drift: f64 = 0.0;
    for _ in 0..config.horizon_months {
        let before = sim.world.money_total();
        sim.step().expect("default month runs");
        let after = sim.world.money_total();
        let drift =
            (after - before).unsigned_abs() as f64 / (before.unsigned_abs() as f64).max(1.0);
        worst_drift = worst_drift.max(drift);
    }
    let seconds = started.elapsed().as_secs_f64();

    let credit = &sim.world.credit;
    let ltv = sim.params.ltv;
    let nu = sim.params.nu;
    let over_ltv = credit
        .mortgage_sales
        .iter()
        .filter(|s| s.loan.minor() as f64 > ltv * s.price.minor() as f64)
        .count();
    let over_book = credit
        .book_ratios
        .iter()
        .filter(|&&r| r > nu + 1e-12)
        .count();
    let mortgage = Outcome {
        pass: over_ltv == 0 && over_book == 0 && credit.max_live_per_household <= 1 && !credit.mortgage_sales.is_empty(),
        detail: format!(
            "{} mortgage sales, {over_ltv} above LTV {ltv}, max live loans per household {}, {} of {} originations above book limit {nu}",
            credit.mortgage_sales.len(),
            credit.max_live_per_household,
            over_book,
            credit.book_ratios.len()
        ),
    };
    let records = RunRecord {
        run_id: "default".into(),
        group: "default".into(),
        scenario: config.scenario.name().into(),
        seed: config.seed,
        frames: std::mem::take(&mut sim.frames),
        error: None,
        config_error: false,
    };
    DefaultRun {
        records,
        worst_drift,
        seconds,
        persons,
        mortgage,
    }
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| e.expect("entry").path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).expect("file"),
            )
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let config = Config {
        horizon_months: DETERMINISM_MONTHS,
        ..Config::default()
    };
    let jobs = seed_jobs(&config, 4);
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, cpus) in dirs.iter().zip([1, 1, 4]) {
        let records = run_jobs(&config, &jobs, cpus).expect("pool");
        assert!(
            records.iter().all(|r| r.error.is_none()),
            "runs failed: {:?}",
            records.iter().find_map(|r| r.error.as_ref())
        );
        write_outputs(dir.path(), "acceptance", &config, &records, false).expect("outputs");
    }
    let [a, b, c] = [0, 1, 2].map(|i| read_dir_bytes(dirs[i].path()));
    let csvs = a.iter().filter(|f| f.0.ends_with(".csv")).count();
    Outcome {
        pass: a == b && a == c && csvs > 0,
        detail: format!(
            "{csvs} csv files over 4 runs x {DETERMINISM_MONTHS} months; repeat identical: {}, 1 vs 4 workers identical: {}",
            a == b,
            a == c
        ),
    }
}

fn brute_gini(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut diffs = 0.0;
    for x in v {
        for y in v {
            diffs += (x - y).abs();
        }
    }
    diffs / (2.0 * n * total)
}

fn gini_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut in_range = true;
    for k in 0..200 {
        let n = rng.random_range(1..=1000);
        let v: Vec<f64> = match k % 4 {
            0 => (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
            1 => (0..n)
                .map(|_| rng.random_range(0.0f64..1.0).powi(8) * 1e6)
                .collect(),
            2 => (0..n)
                .map(|_| {
                    if rng.random_bool(0.9) {
                        0.0
                    } else {
                        rng.random_range(0.0..1e3)
                    }
                })
                .collect(),
            _ => (0..n).map(|_| rng.random_range(0u32..5) as f64).collect(),
        };
        let g = gini(&v).expect("non-empty");
        in_range &= (0.0..=1.0).contains(&g);
        worst = worst.max((g - brute_gini(&v)).abs());
    }
    Outcome {
        pass: worst <= GINI_TOL && in_range,
        detail: format!("worst difference {worst:.1e} over 200 vectors, all in [0, 1]: {in_range}"),
    }
}

fn ask_monotonicity() -> Outcome {
    let p = SimParams {
        tau: 3.0,
        ..SimParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = 0;
    for _ in 0..1000 {
        let hs = rng.random_range(20.0..120.0);
        let hq = rng.random_range(1.0..4.0);
        let qli = rng.random_range(0.1..3.0);
        let nq = rng.random_range(0.0..1.0);
        let t = rng.random_range(0..120u32);
        let base = ask_price(hs * hq, qli, nq, t, &p);
        let ok = ask_price(hs * hq, qli, nq, t + 1, &p) < base
            && ask_price((hs + 1.0) * hq, qli, nq, t, &p) > base
            && ask_price(hs * (hq + 0.5), qli, nq, t, &p) > base
            && ask_price(hs * hq, qli * 1.1, nq, t, &p) > base
            && ask_price(hs * hq, qli, nq + 0.05, t, &p) > base;
        if !ok {
            violations += 1;
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations on 1000 dwellings"),
    }
}

fn mean_of(r: &RunRecord, f: impl Fn(&polisim::stats::IndicatorFrame) -> Option<f64>) -> f64 {
    let v: Vec<f64> = r.frames.iter().filter_map(f).collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn check_ok(records: &[RunRecord]) {
    if let Some(r) = records.iter().find(|r| r.error.is_some()) {
        panic!(
            "run {} failed: {}",
            r.run_id,
            r.error.as_deref().unwrap_or_default()
        );
    }
}

fn policies() -> Outcome {
    let config = Config::default();
    let jobs = sweep_jobs(&config, &Sweep::Policies, POLICY_SEEDS).expect("policy jobs");
    let records = run_jobs(&config, &jobs, workers()).expect("pool");
    check_ok(&records);
    let by = |k: PolicyKind| -> Vec<&RunRecord> {
        records.iter().filter(|r| r.scenario == k.name()).collect()
    };
    let (base, aid, acq) = (
        by(PolicyKind::Baseline),
        by(PolicyKind::Aid),
        by(PolicyKind::Acquisition),
    );
    let gini = |r: &RunRecord| mean_of(r, |f| f.gini);
    let gdp = |r: &RunRecord| mean_of(r, |f| Some(f.gdp));
    let mut wins = [0usize; 3];
    for i in 0..POLICY_SEEDS {
        assert_eq!(base[i].seed, aid[i].seed);
        wins[0] += (gini(aid[i]) < gini(base[i])) as usize;
        wins[1] += (gini(acq[i]) > gini(aid[i])) as usize;
        wins[2] += (gdp(aid[i]) > gdp(base[i])) as usize;
    }
    Outcome {
        pass: wins.iter().all(|&w| w >= POLICY_MIN_WINS),
        detail: format!(
            "seeds won of {POLICY_SEEDS}: gini(aid) < gini(baseline) {}, gini(acquisition) > gini(aid) {}, gdp(aid) > gdp(baseline) {}",
            wins[0], wins[1], wins[2]
        ),
    }
}

fn jobs_for(config: &Config, group: &str, params: SimParams) -> Vec<Job> {
    (0..SWITCH_SEEDS)
        .map(|i| Job {
            run_id: format!("{group}-{i}"),
            group: group.to_string(),
            scenario: config.scenario,
            seed: run_seed(config.seed, i),
            params: params.clone(),
        })
        .collect()
}

fn structural_switches() -> Outcome {
    let config = Config::default();
    let base = config.params.clone();
    let mut jobs = Vec::new();
    for eta in [0.0, 0.3, 1.0] {
        jobs.extend(jobs_for(
            &config,
            &format!("eta={eta}"),
            SimParams {
                eta,
                ..base.clone()
            },
        ));
    }
    jobs.extend(jobs_for(
        &config,
        "no-u-wages",
        SimParams {
            wage_unemployment_discount: false,
            ..base.clone()
        },
    ));
    let records = run_jobs(&config, &jobs, workers()).expect("pool");
    check_ok(&records);
    let group = |g: &str| -> Vec<&RunRecord> { records.iter().filter(|r| r.group == g).collect() };
    let mean_u = |g: &str| {
        group(g)
            .iter()
            .map(|r| mean_of(r, |f| f.unemployment))
            .sum::<f64>()
            / SWITCH_SEEDS as f64
    };
    let (u0, u3, u1) = (mean_u("eta=0"), mean_u("eta=0.3"), mean_u("eta=1"));
    let profit = |r: &RunRecord| mean_of(r, |f| f.firm_profit_mean);
    let lower = group("eta=0.3")
        .iter()
        .zip(group("no-u-wages"))
        .filter(|(on, off)| profit(off) < profit(on))
        .count();
    Outcome {
        pass: u0 >= u3 && u1 >= u3 && lower == SWITCH_SEEDS,
        detail: format!(
            "mean unemployment eta=0 {u0:.4}, eta=0.3 {u3:.4}, eta=1 {u1:.4}; profit lower without U in wages in {lower} of {SWITCH_SEEDS} seeds"
        ),
    }
}

fn sanity_bands(r: &RunRecord) -> Outcome {
    let range = |f: &dyn Fn(&polisim::stats::IndicatorFrame) -> Option<f64>| {
        let v: Vec<f64> = r.frames.iter().filter_map(f).collect();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi, v.len())
    };
    let u = range(&|f| f.unemployment);
    let g = range(&|f| f.gini);
    let n = range(&|f| f.null_consumption);
    let months = r.frames.len();
    let pass = u.2 == months
        && g.2 == months
        && u.0 >= 0.02
        && u.1 <= 0.30
        && g.0 >= 0.25
        && g.1 <= 0.65
        && n.1 < 0.10;
    Outcome {
        pass,
        detail: format!(
            "unemployment [{:.3}, {:.3}], gini [{:.3}, {:.3}], null consumption max {:.3} over {months} months",
            u.0, u.1, g.0, g.1, n.1
        ),
    }
}

fn run(n: u32, failed: &mut Vec<u32>, f: impl FnOnce() -> Outcome) {
    let started = Instant::now();
    let o = f();
    report(n, started, &o);
    if !o.pass {
        failed.push(n);
    }
}

fn main() {
    let mut failed = Vec::new();
    run(1, &mut failed, formula_examples);

    let mut default = None;
    run(2, &mut failed, || {
        let d = default.insert(default_run());
        Outcome {
            pass: d.worst_drift <= DRIFT_TOL && d.records.frames.len() == 120,
            detail: format!(
                "worst monthly relative drift {:.1e} over {} months, {} persons, simulation {:.1} s",
                d.worst_drift,
                d.records.frames.len(),
                d.persons,
                d.seconds
            ),
        }
    });
    let default = default.expect("default run finished");

    run(3, &mut failed, determinism);
    run(4, &mut failed, gini_oracle);
    run(5, &mut failed, || Outcome {
        pass: default.mortgage.pass,
        detail: default.mortgage.detail.clone(),
    });
    run(6, &mut failed, ask_monotonicity);
    run(7, &mut failed, policies);
    run(8, &mut failed, structural_switches);
    run(9, &mut failed, || sanity_bands(&default.records));

    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

//! Independent runs over seeds, scenarios and parameter grids.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::error::{ConfigError, Result, SimError};
use crate::params::{PolicyKind, SimParams};
use crate::rng::derive_u64;
use crate::stats::{export_csv, export_svg, RunRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct Job {
    pub run_id: String,
    pub group: String,
    pub scenario: PolicyKind,
    pub seed: u64,
    pub params: SimParams,
}

pub fn run_seed(master: u64, run: usize) -> u64 {
    derive_u64(master, &[b"run", &(run as u64).to_le_bytes()])
}

pub fn sweep_seed(master: u64, run: usize, value: f64) -> u64 {
    derive_u64(
        master,
        &[
            b"run",
            &(run as u64).to_le_bytes(),
            &value.to_bits().to_le_bytes(),
        ],
    )
}

/// `count` evenly spaced values from `start` to `end`, both included.
pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                if i + 1 == count {
                    end
                } else {
                    // Snap away float noise so grid labels read 0.6, not 0.6000000000000001.
                    ((start + (end - start) * t) * 1e12).round() / 1e12
                }
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sweep {
    Param { name: String, values: Vec<f64> },
    Policies,
}

/// Parses `NAME:START:END:INTERVALS` or `POLICIES`.
pub fn parse_sweep(spec: &str) -> Result<Sweep, ConfigError> {
    if spec.eq_ignore_ascii_case("POLICIES") {
        return Ok(Sweep::Policies);
    }
    let bad = |reason: &str| ConfigError::BadSweep {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let [name, start, end, count] = parts[..] else {
        return Err(bad("expected NAME:START:END:INTERVALS or POLICIES"));
    };
    let names = SimParams::parameter_names();
    if !names.iter().any(|n| n.eq_ignore_ascii_case(name)) {
        return Err(ConfigError::UnknownParameter {
            name: name.to_string(),
            valid: names.join(", "),
        });
    }
    let start: f64 = start.parse().map_err(|_| bad("start is not a number"))?;
    let end: f64 = end.parse().map_err(|_| bad("end is not a number"))?;
    let count: usize = count
        .parse()
        .map_err(|_| bad("intervals is not a whole number"))?;
    if count < 2 {
        return Err(bad("intervals must be at least 2"));
    }
    if !start.is_finite() || !end.is_finite() {
        return Err(bad("bounds must be finite"));
    }
    Ok(Sweep::Param {
        name: name.to_uppercase(),
        values: linspace(start, end, count),
    })
}

/// `runs` seeds of the configured scenario.
pub fn seed_jobs(config: &Config, runs: usize) -> Vec<Job> {
    scenario_jobs(config, config.scenario, runs)
}

fn scenario_jobs(config: &Config, scenario: PolicyKind, runs: usize) -> Vec<Job> {
    (0..runs)
        .map(|i| Job {
            run_id: format!("{}-{i}", scenario.name()),
            group: scenario.name().to_string(),
            scenario,
            seed: run_seed(config.seed, i),
            params: config.params.clone(),
        })
        .collect()
}

pub fn sweep_jobs(config: &Config, sweep: &Sweep, runs: usize) -> Result<Vec<Job>, ConfigError> {
    match sweep {
        Sweep::Policies => Ok(PolicyKind::ALL
            .iter()
            .flat_map(|&k| scenario_jobs(config, k, runs))
            .collect()),
        Sweep::Param { name, values } => {
            let mut jobs = Vec::new();
            for &v in values {
                let mut params = config.params.clone();
                params.set_by_name(name, v)?;
                params.validate()?;
                let group = format!("{name}={v}");
                for i in 0..runs {
                    jobs.push(Job {
                        run_id: format!("{group}-{i}"),
                        group: group.clone(),
                        scenario: config.scenario,
                        seed: sweep_seed(config.seed, i, v),
                        params: params.clone(),
                    });
                }
            }
            Ok(jobs)
        }
    }
}

pub fn execute(config: &Config, job: &Job) -> RunRecord {
    let mut record = RunRecord {
        run_id: job.run_id.clone(),
        group: job.group.clone(),
        scenario: job.scenario.name().to_string(),
        seed: job.seed,
        frames: Vec::new(),
        error: None,
        config_error: false,
    };
    let outcome = config
        .build_with(&job.params, job.scenario, job.seed)
        .and_then(|mut sim| {
            let result = sim.run(config.horizon_months);
            record.frames = std::mem::take(&mut sim.frames);
            result
        });
    if let Err(e) = outcome {
        record.config_error = matches!(e, SimError::Config(_) | SimError::Generation(_));
        record.error = Some(e.to_string());
    }
    record
}

/// Runs the jobs on `cpus` worker threads. Results come back in job order
/// and do not depend on the number of workers.
pub fn run_jobs(config: &Config, jobs: &[Job], cpus: usize) -> Result<Vec<RunRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cpus.max(1))
        .build()
        .map_err(|e| SimError::Structural(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(|j| execute(config, j)).collect()))
}

#[derive(Serialize)]
struct ManifestRun<'a> {
    run_id: &'a str,
    group: &'a str,
    scenario: &'a str,
    seed: u64,
    months: usize,
    status: &'static str,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    command: &'a str,
    config: &'a Config,
    runs: Vec<ManifestRun<'a>>,
    files: Vec<String>,
}

/// Writes indicator CSVs, optional SVG plots and `manifest.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    command: &str,
    config: &Config,
    records: &[RunRecord],
    svg: bool,
) -> Result<PathBuf> {
    let mut files = export_csv(dir, records)?;
    if svg {
        let names: Vec<String> = records
            .iter()
            .find_map(|r| r.frames.first())
            .map(|f| f.columns().into_iter().map(|c| c.0).collect())
            .unwrap_or_default();
        files.extend(export_svg(dir, records, &names)?);
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        runs: records
            .iter()
            .map(|r| ManifestRun {
                run_id: &r.run_id,
                group: &r.group,
                scenario: &r.scenario,
                seed: r.seed,
                months: r.frames.len(),
                status: if r.error.is_none() { "ok" } else { "failed" },
                error: r.error.as_deref(),
            })
            .collect(),
        files: files
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect(),
    };
    let path = dir.join("manifest.json");
    let body =
        serde_json::to_string_pretty(&manifest).map_err(|e| SimError::Snapshot(e.to_string()))?;
    std::fs::write(&path, body).map_err(|e| SimError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grid() {
        match parse_sweep("ALPHA:0:1:7").unwrap() {
            Sweep::Param { name, values } => {
                assert_eq!(name, "ALPHA");
                assert_eq!(values.len(), 7);
                assert_eq!(values[0], 0.0);
                assert_eq!(values[6], 1.0);
                assert!((values[1] - 1.0 / 6.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_sweep("POLICIES").unwrap(), Sweep::Policies);
    }

    #[test]
    fn bad_sweeps() {
        assert!(matches!(
            parse_sweep("NOPE:0:1:3"),
            Err(ConfigError::UnknownParameter { .. })
        ));
        assert!(matches!(
            parse_sweep("ALPHA:0:1:1"),
            Err(ConfigError::BadSweep { .. })
        ));
        assert!(matches!(
            parse_sweep("ALPHA:0:1"),
            Err(ConfigError::BadSweep { .. })
        ));
    }

    #[test]
    fn seeds_are_distinct() {
        let a: Vec<u64> = (0..50).map(|i| run_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(a.len(), b.len());
        assert_ne!(sweep_seed(7, 0, 0.1), sweep_seed(7, 0, 0.2));
    }
}

//! The `ewlab` command line: configuration, experiment drivers, report files
//! and SVG plots.

pub mod config;
pub mod criteria;
pub mod error;
pub mod experiments;
pub mod output;
pub mod plot;

use std::path::{Path, PathBuf};
use std::time::Instant;

use ewlab_core::ensemble::Pool;

use crate::config::Config;
use crate::error::{exit, CliError};
use crate::experiments::{prepare, RunContext};
use crate::output::{CriterionEntry, ExperimentEntry, Platform, RunManifest};

/// Experiments run by each command.
pub fn experiments_for(command: &str) -> Option<&'static [&'static str]> {
    Some(match command {
        "kernel-checks" => &["kernel_checks"],
        "noise" => &["noise"],
        "exactness" => &["exactness"],
        "schemes" => &["schemes"],
        "stationarity" => &["moments", "stationarity", "structure"],
        "coupling" => &["coupling"],
        "ew" => &["first_chaos", "ew"],
        "probe" => &["probe"],
        "all" => &experiments::ALL,
        _ => return None,
    })
}

/// Command-line overrides of the `[run]` section.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub budget: Option<u64>,
}

pub fn load_config(path: &Path, o: &Overrides) -> Result<Config, CliError> {
    let mut cfg = Config::from_path(path)?;
    if let Some(s) = o.seed {
        cfg.run.seed = s;
    }
    if let Some(w) = o.workers {
        cfg.run.workers = Some(w);
    }
    if let Some(b) = o.budget {
        cfg.run.budget = b;
    }
    if let Some(out) = &o.out {
        cfg.run.out = Some(out.to_string_lossy().into_owned());
    }
    Ok(cfg)
}

/// Validates, costs and runs the experiments of `command`, writing reports under the output directory.
pub fn run(command: &str, cfg: &Config) -> Result<RunManifest, CliError> {
    let names = experiments_for(command).ok_or_else(|| CliError::Config(format!("unknown command {command}")))?;
    let started = Instant::now();
    let prepared = names.iter().map(|n| prepare(cfg, n)).collect::<Result<Vec<_>, _>>()?;
    let projected: f64 = prepared.iter().map(|e| e.cost()).sum();
    let budget = cfg.run.budget as f64;
    if projected > budget {
        return Err(CliError::Budget { projected, budget });
    }
    let ctx = RunContext {
        pool: Pool::new(cfg.run.workers)?,
        seed: cfg.run.seed,
        tol: cfg.tolerances.clone(),
        dumps: cfg.run.dumps,
    };
    let root = PathBuf::from(cfg.run.out.clone().unwrap_or_else(|| "ewlab-out".into()));
    let hash = cfg.hash();
    let mut entries = Vec::new();
    for exp in &prepared {
        let t0 = Instant::now();
        eprintln!("[ewlab] {} ...", exp.name());
        let entry = match exp.run(&ctx) {
            Ok(mut out) => {
                out.report.config_hash = hash.clone();
                let files = out.write(&root, &root.join(exp.name()))?;
                ExperimentEntry {
                    name: exp.name().into(),
                    passed: out.report.passed(),
                    failed_checks: out.report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect(),
                    files,
                    wall_clock_seconds: t0.elapsed().as_secs_f64(),
                }
            }
            Err(e) if e.exit_code() == exit::CHECK_FAILURE => ExperimentEntry {
                name: exp.name().into(),
                passed: false,
                failed_checks: vec![e.to_string()],
                files: Vec::new(),
                wall_clock_seconds: t0.elapsed().as_secs_f64(),
            },
            Err(e) => return Err(e),
        };
        eprintln!(
            "[ewlab] {} {} in {:.1} s{}",
            entry.name,
            if entry.passed { "PASS" } else { "FAIL" },
            entry.wall_clock_seconds,
            if entry.failed_checks.is_empty() {
                String::new()
            } else {
                format!(": {}", entry.failed_checks.join(", "))
            }
        );
        entries.push(entry);
    }
    let criteria = criteria::CRITERIA
        .iter()
        .filter_map(|c| {
            let e = entries.iter().find(|e| e.name == c.experiment)?;
            Some(CriterionEntry {
                id: c.id,
                title: c.title.into(),
                passed: e.passed,
            })
        })
        .collect();
    let manifest = RunManifest {
        command: command.into(),
        config_hash: hash,
        version: env!("CARGO_PKG_VERSION").into(),
        platform: Platform::current(),
        seed: cfg.run.seed,
        workers: ctx.pool.workers(),
        projected_cell_updates: projected,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        passed: entries.iter().all(|e| e.passed),
        experiments: entries,
        criteria,
    };
    manifest.write(&root)?;
    Ok(manifest)
}

/// Runs a command end to end and maps the outcome to a process exit code.
pub fn main_with(command: &str, config: &Path, o: &Overrides) -> i32 {
    let result = load_config(config, o).and_then(|cfg| run(command, &cfg));
    match result {
        Ok(m) => {
            if m.passed {
                exit::PASS
            } else {
                exit::CHECK_FAILURE
            }
        }
        Err(e) => {
            eprintln!("ewlab: {e}");
            e.exit_code()
        }
    }
}

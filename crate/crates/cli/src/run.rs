//! Experiment execution and result files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Value};

use nrm_core::harness::{
    dual_convergence_experiment, fit_power_law, myopic_decay_experiment, regret_cell, PolicyEntry, RegretRow,
};
use nrm_core::solvers::solve_fluid;

use crate::config::{ExperimentConfig, PolicyConfig, RunConfig};
use crate::error::CliError;

pub const CSV_HEADER: &str = "experiment,policy,T_or_s,mean,stderr,reps,extra";

/// One line of `results.csv`; `None` fields are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub experiment: &'static str,
    pub policy: String,
    pub t_or_s: usize,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub reps: Option<usize>,
    pub extra: Vec<(String, String)>,
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Rounded to 10 decimals for the console; files keep full precision.
fn short(v: f64) -> String {
    let text = format!("{v:.10}");
    let text = text.trim_end_matches('0').trim_end_matches('.');
    if text == "-0" { "0".into() } else { text.into() }
}

fn short_list(values: &[f64]) -> String {
    values.iter().map(|v| short(*v)).collect::<Vec<_>>().join(", ")
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("|")
}

pub fn render_csv(rows: &[CsvRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let extra: String = r.extra.iter().map(|(k, v)| format!("{k}={v};")).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.experiment,
            r.policy,
            r.t_or_s,
            opt(&r.mean),
            opt(&r.stderr),
            opt(&r.reps),
            extra
        );
    }
    out
}

/// What a successful run printed and produced.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub rows: Vec<CsvRow>,
    pub fits: BTreeMap<String, Value>,
    /// Human-readable report for stdout.
    pub lines: Vec<String>,
}

fn fit_value(xs: &[f64], ys: &[f64]) -> Value {
    match fit_power_law(xs, ys) {
        Ok(f) => json!({
            "exponent": f.exponent,
            "coefficient": f.coefficient,
            "r_squared": f.r_squared,
            "excluded": f.excluded,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn regret_row(experiment: &'static str, r: &RegretRow) -> CsvRow {
    let mut extra = vec![("benchmark".to_string(), r.benchmark.to_string())];
    if let Some((m, se)) = r.vs_integer {
        extra.push(("vs_integer_mean".into(), m.to_string()));
        extra.push(("vs_integer_stderr".into(), se.to_string()));
    }
    extra.push(("solver_failures".into(), r.solver_failures.to_string()));
    CsvRow {
        experiment,
        policy: r.policy.clone(),
        t_or_s: r.horizon,
        mean: Some(r.mean),
        stderr: Some(r.stderr),
        reps: Some(r.replications),
        extra,
    }
}

fn entries(policies: &[PolicyConfig]) -> Vec<PolicyEntry> {
    policies
        .iter()
        .map(|p| PolicyEntry::new(p.label(), p.estimator()))
        .collect()
}

/// Runs the experiment, appending rows to `out` as cells complete so a
/// failure leaves the finished cells behind.
fn execute(config: &RunConfig, out: &mut RunSummary) -> Result<(), CliError> {
    let seed = config.seed;
    let name = config.experiment.name();
    match &config.experiment {
        ExperimentConfig::Simulate {
            policies,
            horizon,
            replications,
        } => {
            let spec = config.instance.to_spec(*horizon)?;
            let rows = regret_cell(&spec, &entries(policies), *horizon, *replications, seed)?;
            for r in &rows {
                out.lines.push(format!(
                    "{} T={}: regret {} ± {}",
                    r.policy, r.horizon, r.mean, r.stderr
                ));
                out.rows.push(regret_row(name, r));
            }
        }
        ExperimentConfig::Sweep {
            policies,
            horizons,
            replications,
        } => {
            let spec = config.instance.to_spec(1)?;
            let list = entries(policies);
            let mut grid = horizons.clone();
            grid.sort_unstable();
            grid.dedup();
            let mut cells: Vec<Vec<RegretRow>> = Vec::new();
            let mut failure = None;
            for &t in &grid {
                match regret_cell(&spec, &list, t, *replications, seed) {
                    Ok(rows) => cells.push(rows),
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                }
            }
            for (p, entry) in list.iter().enumerate() {
                for cell in &cells {
                    out.rows.push(regret_row(name, &cell[p]));
                }
                let (xs, ys): (Vec<f64>, Vec<f64>) =
                    cells.iter().map(|c| (c[p].horizon as f64, c[p].mean)).unzip();
                if failure.is_none() {
                    let fit = fit_value(&xs, &ys);
                    out.lines.push(format!("{}: growth fit {}", entry.id, fit));
                    out.fits.insert(entry.id.clone(), fit);
                }
            }
            if let Some(e) = failure {
                return Err(e.into());
            }
        }
        ExperimentConfig::Dualconv { s_grid, replications } => {
            let spec = config.instance.to_spec(1)?;
            let mut grid = s_grid.clone();
            grid.sort_unstable();
            grid.dedup();
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for &s in &grid {
                let row = dual_convergence_experiment(&spec, &spec.capacity_ratio, &[s], *replications, seed)?
                    .remove(0);
                let mut extra: Vec<(String, String)> = row
                    .per_type_mean
                    .iter()
                    .enumerate()
                    .map(|(j, m)| (format!("gap_type{j}"), m.to_string()))
                    .collect();
                extra.push(("population_dual".into(), join(&row.population_dual)));
                out.lines.push(format!("s={}: mean squared dual gap {} ± {}", s, row.mean, row.stderr));
                out.rows.push(CsvRow {
                    experiment: name,
                    policy: String::new(),
                    t_or_s: s,
                    mean: Some(row.mean),
                    stderr: Some(row.stderr),
                    reps: Some(row.replications),
                    extra,
                });
                xs.push(s as f64);
                ys.push(row.mean);
            }
            let fit = fit_value(&xs, &ys);
            out.lines.push(format!("dual gap fit {fit}"));
            out.fits.insert("dualconv".into(), fit);
        }
        ExperimentConfig::Myopic {
            s_grid,
            replications,
            kappa1,
        } => {
            let spec = config.instance.to_spec(1)?;
            let mut grid = s_grid.clone();
            grid.sort_unstable();
            grid.dedup();
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for &s in &grid {
                let row = myopic_decay_experiment(&spec, *kappa1, &[s], *replications, seed)?.remove(0);
                out.lines.push(format!("s={}: myopic loss {} ± {}", s, row.mean, row.stderr));
                out.rows.push(CsvRow {
                    experiment: name,
                    policy: "log2_fluid".into(),
                    t_or_s: s,
                    mean: Some(row.mean),
                    stderr: Some(row.stderr),
                    reps: Some(row.replications),
                    extra: vec![("kappa1".into(), kappa1.to_string())],
                });
                xs.push(s as f64);
                ys.push(row.mean);
            }
            let fit = fit_value(&xs, &ys);
            out.lines.push(format!("myopic loss fit {fit}"));
            out.fits.insert("myopic".into(), fit);
        }
        ExperimentConfig::Solve { periods_left } => {
            let spec = config.instance.to_spec(*periods_left)?;
            let sol = solve_fluid(&spec, &spec.capacities(), *periods_left)?;
            out.lines.push(format!("q* = ({})", short_list(&sol.quantiles)));
            out.lines.push(format!("mu* = ({})", short_list(&sol.dual)));
            out.lines.push(format!("objective = {}", short(sol.objective)));
            out.lines.push(format!("kkt residual = {:e}", sol.kkt_residual));
            out.rows.push(CsvRow {
                experiment: name,
                policy: String::new(),
                t_or_s: *periods_left,
                mean: Some(sol.objective),
                stderr: None,
                reps: None,
                extra: vec![
                    ("q".into(), join(&sol.quantiles)),
                    ("mu".into(), join(&sol.dual)),
                    ("kkt".into(), sol.kkt_residual.to_string()),
                ],
            });
        }
    }
    Ok(())
}

fn write_outputs(
    config: &RunConfig,
    summary: &RunSummary,
    workers: usize,
    wall: f64,
    failure: Option<&CliError>,
) -> Result<(), CliError> {
    let dir = Path::new(&config.output);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), render_csv(&summary.rows))?;
    let meta = json!({
        "config": config,
        "versions": {
            "nrm-cli": env!("CARGO_PKG_VERSION"),
            "nrm-core": nrm_core::VERSION,
        },
        "seed": config.seed,
        "workers": workers,
        "wall_time_seconds": wall,
        "partial": failure.is_some(),
        "error": failure.map(|e| e.to_string()),
        "fits": summary.fits,
    });
    let text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Solver(e.to_string()))?;
    std::fs::write(dir.join("meta.json"), text + "\n")?;
    Ok(())
}

/// Executes `config` on a pool of `config.workers` threads (all cores when
/// unset) and writes `results.csv` and `meta.json` to `config.output`.
/// On failure the completed rows are still written, marked `partial`.
pub fn run(config: &RunConfig) -> Result<RunSummary, CliError> {
    config.validate()?;
    let workers = config
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Solver(format!("cannot start worker pool: {e}")))?;
    let start = Instant::now();
    let mut summary = RunSummary::default();
    let result = pool.install(|| execute(config, &mut summary));
    let wall = start.elapsed().as_secs_f64();
    write_outputs(config, &summary, workers, wall, result.as_ref().err())?;
    result.map(|()| summary)
}

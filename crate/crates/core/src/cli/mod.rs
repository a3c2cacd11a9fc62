//! `cdfagg` batch driver.
//!
//! ```text
//! cdfagg [--config PATH] [--seed N] [--out DIR] [--jobs N] <simulate|aggregate|verify|report>
//! ```
//!
//! Settings come from the TOML file given by `--config`, then the
//! `CDFAGG_CONFIG`, `CDFAGG_SEED`, `CDFAGG_OUT`, `CDFAGG_JOBS` and
//! `CDFAGG_ALPHA` environment variables, then command-line flags, each level
//! overriding the previous one.
//!
//! Files under the output directory:
//!
//! ```text
//! forecasts.csv, observations.csv        simulate
//! aggregate/runs/<config>.csv            aggregate: daily weights, loss and regrets
//! aggregate/summary.csv                  aggregate: mean CRPS per config and lead time
//! aggregate/experts.csv                  aggregate: mean CRPS per expert and lead time
//! aggregate/oracles.csv                  aggregate: oracles per location and lead time
//! verify/flatness.csv                    verify: flat proportion per system and lead time
//! verify/tests.csv                       verify: flatness tests per system, lead, location
//! verify/histograms.csv                  verify: rank counts
//! report/regret.csv                      report: regret against time
//! report/weights.csv                     report: weights against time
//! report/scatter.csv                     report: mean CRPS against flat proportion
//! ```

mod config;
mod pipeline;

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

pub use config::{default_scenario, GridConfig, InputConfig, RunConfig};
pub use pipeline::{
    aggregate_histogram, evaluate_grid, expert_histogram, lead_times, prepare, rank_rng, GridResult, PanelContext,
    SystemFlatness,
};

use crate::aggregation::{StrategyConfig, WeightVector};
use crate::error::{Error, Result};
use crate::experts::{format_value, generate_scenario_set, load_panels_csv, write_panels_csv, ExpertPanel};
use crate::scoring::crps_estimate;

#[derive(Debug, Parser)]
#[command(name = "cdfagg", version, about = "Online aggregation of step-wise CDF forecasts")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "CDFAGG_CONFIG")]
    pub config: Option<PathBuf>,
    /// Random seed for simulation and rank tie-breaks.
    #[arg(long, global = true, env = "CDFAGG_SEED")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "CDFAGG_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "CDFAGG_JOBS")]
    pub jobs: Option<usize>,
    /// False discovery rate of the flatness tests.
    #[arg(long, global = true, env = "CDFAGG_ALPHA")]
    pub alpha: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write a synthetic panel set.
    Simulate,
    /// Run the strategy grid on the panels.
    Aggregate,
    /// Rank histograms and flatness tests of experts and strategies.
    Verify,
    /// Plot-ready tables.
    Report,
}

impl Cli {
    /// Configuration file values overridden by environment and flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(jobs) = self.jobs {
            cfg.jobs = jobs;
        }
        if let Some(alpha) = self.alpha {
            cfg.alpha = alpha;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exit status for an error category.
pub fn exit_code(err: &Error) -> i32 {
    match err.category() {
        "io" => 3,
        "parse" => 4,
        "config" => 5,
        "panel" => 6,
        _ => 7,
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.resolve().and_then(|cfg| execute(cli.command, &cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            exit_code(&e)
        }
    }
}

/// Runs `command` on a worker pool sized by `cfg.jobs`.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.jobs)))?;
    pool.install(|| match command {
        Command::Simulate => cmd_simulate(cfg).map(|_| ()),
        Command::Aggregate => cmd_aggregate(cfg),
        Command::Verify => cmd_verify(cfg),
        Command::Report => cmd_report(cfg),
    })
}

fn forecasts_path(cfg: &RunConfig) -> PathBuf {
    cfg.input.forecasts.clone().unwrap_or_else(|| cfg.out.join("forecasts.csv"))
}

fn observations_path(cfg: &RunConfig) -> PathBuf {
    cfg.input.observations.clone().unwrap_or_else(|| cfg.out.join("observations.csv"))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(csv::Reader::from_reader(file))
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// Writes the simulated panels.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<ExpertPanel>> {
    let mut spec = cfg.scenario.clone();
    spec.seed = cfg.seed;
    let panels = generate_scenario_set(&spec)?;
    create_dir(&cfg.out)?;
    write_panels_csv(&panels, &cfg.out.join("forecasts.csv"), &cfg.out.join("observations.csv"))?;
    Ok(panels)
}

fn load_contexts(cfg: &RunConfig) -> Result<Vec<PanelContext>> {
    prepare(load_panels_csv(&forecasts_path(cfg), &observations_path(cfg))?)
}

fn config_columns(c: &StrategyConfig) -> [String; 4] {
    [
        c.id(),
        c.kind.to_string(),
        c.window.to_string(),
        if c.kind.uses_eta() {
            format_value(c.eta.log10())
        } else {
            String::new()
        },
    ]
}

fn run_path(cfg: &RunConfig, config: &StrategyConfig) -> PathBuf {
    cfg.out.join("aggregate").join("runs").join(format!("{}.csv", config.id()))
}

/// Runs the grid, writing one file per configuration and the summaries.
pub fn cmd_aggregate(cfg: &RunConfig) -> Result<()> {
    let contexts = load_contexts(cfg)?;
    let configs = cfg.grid.configs()?;
    let dir = cfg.out.join("aggregate");
    create_dir(&dir.join("runs"))?;
    let names: Vec<String> = contexts[0].panel.expert_names().to_vec();
    let leads = lead_times(&contexts);

    // mean loss per (config, context)
    let means: Vec<Vec<f64>> = configs
        .par_iter()
        .map(|config| {
            let mut w = csv_writer(&run_path(cfg, config))?;
            let mut header = vec!["location_id", "lead_time_h", "date", "t"]
                .into_iter()
                .map(String::from)
                .collect::<Vec<_>>();
            header.extend(names.iter().map(|n| format!("w_{n}")));
            header.extend(["loss", "regret_best_expert", "regret_best_constant"].map(String::from));
            w.write_record(&header)?;
            let mut means = Vec::with_capacity(contexts.len());
            for ctx in &contexts {
                let run = ctx.run(config)?;
                let lead = ctx.panel.lead_time_h().to_string();
                for t in 1..=run.n_days() {
                    let mut row = vec![
                        ctx.panel.location_id().to_string(),
                        lead.clone(),
                        ctx.panel.date(t).to_string(),
                        t.to_string(),
                    ];
                    row.extend(run.weights_at(t).iter().map(|v| format_value(*v)));
                    row.push(format_value(run.losses().losses()[t - 1]));
                    row.push(format_value(run.regret_best_expert()[t - 1]));
                    row.push(format_value(run.regret_best_constant()[t - 1]));
                    w.write_record(&row)?;
                }
                means.push(run.mean_loss());
            }
            finish(w)?;
            Ok(means)
        })
        .collect::<Result<_>>()?;

    let mut w = csv_writer(&dir.join("summary.csv"))?;
    w.write_record(["config", "kind", "window", "log10_eta", "lead_time_h", "mean_crps", "n_locations"])?;
    for (config, per_ctx) in configs.iter().zip(&means) {
        for &lead in &leads {
            let values: Vec<f64> = contexts
                .iter()
                .zip(per_ctx)
                .filter(|(c, _)| c.panel.lead_time_h() == lead)
                .map(|(_, m)| *m)
                .collect();
            let mut row = config_columns(config).to_vec();
            row.push(lead.to_string());
            row.push(format_value(values.iter().sum::<f64>() / values.len() as f64));
            row.push(values.len().to_string());
            w.write_record(&row)?;
        }
    }
    finish(w)?;

    let mut w = csv_writer(&dir.join("experts.csv"))?;
    w.write_record(["expert", "lead_time_h", "mean_crps", "mean_crps_estimator", "n_locations"])?;
    for (e, name) in names.iter().enumerate() {
        for &lead in &leads {
            let selected: Vec<&PanelContext> = contexts.iter().filter(|c| c.panel.lead_time_h() == lead).collect();
            let exact: f64 = selected.iter().map(|c| c.scores.expert_losses()[e].mean()).sum::<f64>();
            let estimator: f64 = selected
                .par_iter()
                .map(|c| {
                    let obs = c.panel.observations();
                    let total: f64 = c.panel.series(e).iter().zip(obs).map(|(f, o)| crps_estimate(f, o.value)).sum();
                    total / obs.len() as f64
                })
                .collect::<Vec<f64>>()
                .iter()
                .sum();
            let n = selected.len() as f64;
            w.write_record([
                name.clone(),
                lead.to_string(),
                format_value(exact / n),
                format_value(estimator / n),
                selected.len().to_string(),
            ])?;
        }
    }
    finish(w)?;

    let mut w = csv_writer(&dir.join("oracles.csv"))?;
    let mut header: Vec<String> = [
        "location_id",
        "lead_time_h",
        "best_expert",
        "best_expert_mean_crps",
        "best_constant_mean_crps",
        "best_constant_converged",
        "best_constant_iterations",
    ]
    .map(String::from)
    .to_vec();
    header.extend(names.iter().map(|n| format!("w_{n}")));
    w.write_record(&header)?;
    for ctx in &contexts {
        let o = &ctx.oracles;
        let mut row = vec![
            ctx.panel.location_id().to_string(),
            ctx.panel.lead_time_h().to_string(),
            names[o.best_expert.index].clone(),
            format_value(o.best_expert.losses.mean()),
            format_value(o.best_constant.losses.mean()),
            o.best_constant.converged.to_string(),
            o.best_constant.iterations.to_string(),
        ];
        row.extend(o.best_constant.weights.iter().map(|v| format_value(*v)));
        w.write_record(&row)?;
    }
    finish(w)
}

/// Daily rows of one run file.
struct RunRows {
    // (location, lead) -> per-day values in day order
    weights: HashMap<(String, u32), Vec<WeightVector>>,
    regrets: HashMap<(String, u32), Vec<(f64, f64)>>,
    dates: HashMap<(String, u32), Vec<String>>,
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, field: Option<&str>, what: &str) -> Result<T> {
    field
        .and_then(|s| s.trim().parse::<T>().ok())
        .ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line,
            message: format!("invalid {what}"),
        })
}

fn read_run(path: &Path, n_experts: usize) -> Result<RunRows> {
    let mut reader = csv_reader(path)?;
    let mut rows = RunRows {
        weights: HashMap::new(),
        regrets: HashMap::new(),
        dates: HashMap::new(),
    };
    let expected = 4 + n_experts + 3;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != expected {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                message: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        let key = (record[0].to_string(), parse_field::<u32>(path, line, record.get(1), "lead time")?);
        let t: usize = parse_field(path, line, record.get(3), "day index")?;
        let w: Vec<f64> = (0..n_experts)
            .map(|e| parse_field::<f64>(path, line, record.get(4 + e), "weight"))
            .collect::<Result<_>>()?;
        let weights = WeightVector::from_unnormalized(w).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line,
            message: e.to_string(),
        })?;
        let r1: f64 = parse_field(path, line, record.get(4 + n_experts + 1), "regret")?;
        let r2: f64 = parse_field(path, line, record.get(4 + n_experts + 2), "regret")?;
        let series = rows.weights.entry(key.clone()).or_default();
        if t != series.len() + 1 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                message: format!("day {t} out of sequence"),
            });
        }
        series.push(weights);
        rows.regrets.entry(key.clone()).or_default().push((r1, r2));
        rows.dates.entry(key).or_default().push(record[2].to_string());
    }
    Ok(rows)
}

fn run_weights<'a>(rows: &'a RunRows, ctx: &PanelContext, path: &Path) -> Result<&'a [WeightVector]> {
    let key = (ctx.panel.location_id().to_string(), ctx.panel.lead_time_h());
    match rows.weights.get(&key) {
        Some(w) if w.len() == ctx.panel.n_days() => Ok(w),
        _ => Err(Error::IncompletePanel(format!(
            "{} has no complete run for {} lead {}",
            path.display(),
            key.0,
            key.1
        ))),
    }
}

/// Flatness of every expert and every configuration, per lead time.
pub fn cmd_verify(cfg: &RunConfig) -> Result<()> {
    let contexts = load_contexts(cfg)?;
    let configs = cfg.grid.configs()?;
    let names: Vec<String> = contexts[0].panel.expert_names().to_vec();
    let leads = lead_times(&contexts);
    let dir = cfg.out.join("verify");
    create_dir(&dir)?;

    let mut systems: Vec<(String, Vec<(u32, Vec<usize>, SystemFlatness)>)> = Vec::new();
    let expert_results: Vec<Vec<(u32, Vec<usize>, SystemFlatness)>> = (0..names.len())
        .into_par_iter()
        .map(|e| {
            leads
                .iter()
                .map(|&lead| {
                    let idx: Vec<usize> = (0..contexts.len())
                        .filter(|&i| contexts[i].panel.lead_time_h() == lead)
                        .collect();
                    let histograms = idx
                        .iter()
                        .map(|&i| expert_histogram(&contexts[i].panel, e, cfg.seed))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((lead, idx, SystemFlatness::new(histograms, cfg.alpha)?))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    systems.extend(names.iter().cloned().zip(expert_results));

    let config_results: Vec<Vec<(u32, Vec<usize>, SystemFlatness)>> = configs
        .par_iter()
        .map(|config| {
            let path = run_path(cfg, config);
            let rows = read_run(&path, names.len())?;
            let id = config.id();
            leads
                .iter()
                .map(|&lead| {
                    let idx: Vec<usize> = (0..contexts.len())
                        .filter(|&i| contexts[i].panel.lead_time_h() == lead)
                        .collect();
                    let histograms = idx
                        .iter()
                        .map(|&i| {
                            let ctx = &contexts[i];
                            aggregate_histogram(ctx, &id, run_weights(&rows, ctx, &path)?, cfg.seed)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok((lead, idx, SystemFlatness::new(histograms, cfg.alpha)?))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    systems.extend(configs.iter().map(StrategyConfig::id).zip(config_results));

    let mut flat_w = csv_writer(&dir.join("flatness.csv"))?;
    flat_w.write_record(["system", "lead_time", "flat_proportion", "n_locations"])?;
    let mut tests_w = csv_writer(&dir.join("tests.csv"))?;
    tests_w.write_record([
        "system",
        "lead_time_h",
        "location_id",
        "k",
        "n",
        "chi2_stat",
        "chi2_pvalue",
        "slope_stat",
        "slope_pvalue",
        "convexity_stat",
        "convexity_pvalue",
        "wave_stat",
        "wave_pvalue",
        "flat",
    ])?;
    let mut hist_w = csv_writer(&dir.join("histograms.csv"))?;
    hist_w.write_record(["system", "lead_time_h", "location_id", "rank", "count"])?;
    for (system, per_lead) in &systems {
        for (lead, idx, flatness) in per_lead {
            flat_w.write_record([
                system.clone(),
                lead.to_string(),
                format_value(flatness.proportion()),
                idx.len().to_string(),
            ])?;
            for (j, &i) in idx.iter().enumerate() {
                let location = contexts[i].panel.location_id();
                let h = &flatness.histograms[j];
                let r = &flatness.reports[j];
                tests_w.write_record([
                    system.clone(),
                    lead.to_string(),
                    location.to_string(),
                    h.k().to_string(),
                    h.total().to_string(),
                    format_value(r.chi2_stat),
                    format_value(r.chi2_pvalue),
                    format_value(r.slope.stat),
                    format_value(r.slope.pvalue),
                    format_value(r.convexity.stat),
                    format_value(r.convexity.pvalue),
                    format_value(r.wave.stat),
                    format_value(r.wave.pvalue),
                    flatness.flat[j].to_string(),
                ])?;
                for (rank, count) in h.counts().iter().enumerate() {
                    hist_w.write_record([
                        system.clone(),
                        lead.to_string(),
                        location.to_string(),
                        (rank + 1).to_string(),
                        count.to_string(),
                    ])?;
                }
            }
        }
    }
    finish(flat_w)?;
    finish(tests_w)?;
    finish(hist_w)
}

fn read_table(path: &Path) -> Result<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut reader = csv_reader(path)?;
    let header = reader.headers()?.clone();
    let rows = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((header, rows))
}

fn column(header: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        path: path.display().to_string(),
        line: 1,
        message: format!("missing column {name:?}"),
    })
}

/// Regret and weight trajectories averaged over locations, and the
/// skill/reliability scatter.
pub fn cmd_report(cfg: &RunConfig) -> Result<()> {
    let configs = cfg.grid.configs()?;
    let dir = cfg.out.join("report");
    create_dir(&dir)?;

    let summary_path = cfg.out.join("aggregate").join("summary.csv");
    let (header, rows) = read_table(&summary_path)?;
    let (c_cfg, c_lead, c_crps) = (
        column(&header, "config", &summary_path)?,
        column(&header, "lead_time_h", &summary_path)?,
        column(&header, "mean_crps", &summary_path)?,
    );
    let crps: HashMap<(String, String), String> = rows
        .iter()
        .map(|r| ((r[c_cfg].to_string(), r[c_lead].to_string()), r[c_crps].to_string()))
        .collect();
    let flat_path = cfg.out.join("verify").join("flatness.csv");
    let (header, rows) = read_table(&flat_path)?;
    let (f_sys, f_lead, f_prop) = (
        column(&header, "system", &flat_path)?,
        column(&header, "lead_time", &flat_path)?,
        column(&header, "flat_proportion", &flat_path)?,
    );
    let flat: HashMap<(String, String), String> = rows
        .iter()
        .map(|r| ((r[f_sys].to_string(), r[f_lead].to_string()), r[f_prop].to_string()))
        .collect();

    let first_run = run_path(cfg, &configs[0]);
    let (run_header, _) = {
        let mut reader = csv_reader(&first_run)?;
        (reader.headers()?.clone(), ())
    };
    let names: Vec<String> = run_header
        .iter()
        .filter_map(|h| h.strip_prefix("w_").map(String::from))
        .collect();

    struct Trajectories {
        id: String,
        per_lead: Vec<(u32, Vec<String>, Vec<(f64, f64)>, Vec<Vec<f64>>)>,
    }
    let trajectories: Vec<Trajectories> = configs
        .par_iter()
        .map(|config| {
            let path = run_path(cfg, config);
            let rows = read_run(&path, names.len())?;
            let mut keys: Vec<&(String, u32)> = rows.weights.keys().collect();
            keys.sort();
            let mut leads: Vec<u32> = keys.iter().map(|k| k.1).collect();
            leads.sort_unstable();
            leads.dedup();
            let mut per_lead = Vec::new();
            for lead in leads {
                let selected: Vec<&&(String, u32)> = keys.iter().filter(|k| k.1 == lead).collect();
                let days = rows.weights[*selected[0]].len();
                let n = selected.len() as f64;
                let mut regret = vec![(0.0, 0.0); days];
                let mut weights = vec![vec![0.0; names.len()]; days];
                for key in &selected {
                    let w = &rows.weights[**key];
                    let r = &rows.regrets[**key];
                    if w.len() != days {
                        return Err(Error::IncompletePanel(format!(
                            "{}: locations of lead {lead} have different lengths",
                            path.display()
                        )));
                    }
                    for t in 0..days {
                        regret[t].0 += r[t].0 / n;
                        regret[t].1 += r[t].1 / n;
                        for (acc, v) in weights[t].iter_mut().zip(w[t].iter()) {
                            *acc += v / n;
                        }
                    }
                }
                let dates = rows.dates[*selected[0]].clone();
                per_lead.push((lead, dates, regret, weights));
            }
            Ok(Trajectories {
                id: config.id(),
                per_lead,
            })
        })
        .collect::<Result<_>>()?;

    let mut regret_w = csv_writer(&dir.join("regret.csv"))?;
    regret_w.write_record(["config", "lead_time_h", "t", "date", "regret_best_expert", "regret_best_constant"])?;
    let mut weights_w = csv_writer(&dir.join("weights.csv"))?;
    let mut header: Vec<String> = ["config", "lead_time_h", "t", "date"].map(String::from).to_vec();
    header.extend(names.iter().map(|n| format!("w_{n}")));
    weights_w.write_record(&header)?;
    for traj in &trajectories {
        for (lead, dates, regret, weights) in &traj.per_lead {
            for t in 0..regret.len() {
                regret_w.write_record([
                    traj.id.clone(),
                    lead.to_string(),
                    (t + 1).to_string(),
                    dates[t].clone(),
                    format_value(regret[t].0),
                    format_value(regret[t].1),
                ])?;
                let mut row = vec![traj.id.clone(), lead.to_string(), (t + 1).to_string(), dates[t].clone()];
                row.extend(weights[t].iter().map(|v| format_value(*v)));
                weights_w.write_record(&row)?;
            }
        }
    }
    finish(regret_w)?;
    finish(weights_w)?;

    let mut scatter_w = csv_writer(&dir.join("scatter.csv"))?;
    scatter_w.write_record(["config", "kind", "window", "log10_eta", "lead_time_h", "mean_crps", "flat_proportion"])?;
    for (config, traj) in configs.iter().zip(&trajectories) {
        for (lead, ..) in &traj.per_lead {
            let key = (config.id(), lead.to_string());
            let (Some(c), Some(f)) = (crps.get(&key), flat.get(&key)) else {
                return Err(Error::MissingInput(if crps.contains_key(&key) { flat_path.clone() } else { summary_path.clone() }));
            };
            let mut row = config_columns(config).to_vec();
            row.extend([lead.to_string(), c.clone(), f.clone()]);
            scatter_w.write_record(&row)?;
        }
    }
    finish(scatter_w)
}

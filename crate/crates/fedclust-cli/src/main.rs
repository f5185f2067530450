//! `fedclust` — run clustered federated learning experiments, generate
//! synthetic federations, and tune the clustering threshold.
//!
//! Exit codes: 0 on full success, 1 for configuration/setup problems, 2 when
//! the experiment ran but at least one (seed, algorithm) cell failed.

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use fedclust_core::data::{gen_mixture_linreg, save_federated_csv, SyntheticSpec};
use fedclust_core::harness::{
    emit_report, materialize_dataset, run_experiment, tune_lambda, Algo, ExperimentConfig,
    ReportFormat,
};
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "fedclust",
    version,
    about = "Clustered federated learning simulations: SR-FCA, IFCA, local, and global baselines"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the seed × algorithm grid described by a JSON config.
    Run {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed (overrides the config's seed list).
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of algorithms (srfca,ifca,local,global).
        #[arg(long, value_delimiter = ',')]
        algo: Option<Vec<String>>,
        /// Output directory for the report and SR-FCA traces.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report format: json or csv.
        #[arg(long)]
        format: Option<String>,
    },
    /// Generate a synthetic mixture-of-linear-regressions federation.
    Gen {
        /// Comma-separated key=value pairs: m, n, d, c, sigma required;
        /// seed (default 1) and train_fraction (default 0.8) optional.
        #[arg(long)]
        synthetic: String,
        /// Directory to write meta.json and the per-client CSVs into.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the one-shot threshold on a config's dataset and report the
    /// best value by validation-loss improvement.
    Tune {
        /// Experiment config (JSON); the sweep uses its first seed.
        #[arg(long)]
        config: PathBuf,
        /// Grid as start:end:count (linear) or start:end:count:log.
        #[arg(long = "lambda-grid")]
        lambda_grid: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = write_stdout(&e.to_string());
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn write_stdout(text: &str) -> io::Result<()> {
    io::stdout().write_all(text.as_bytes())
}

/// A reader that hangs up mid-stream (`fedclust run … | head`) ends the
/// pipeline normally; it must not be reported as a failure.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.root_cause()
        .downcast_ref::<io::Error>()
        .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Run {
            config,
            seed,
            algo,
            out,
            format,
        } => cmd_run(config, seed, algo, out, format),
        Cmd::Gen { synthetic, out } => cmd_gen(&synthetic, out),
        Cmd::Tune {
            config,
            lambda_grid,
        } => cmd_tune(config, &lambda_grid),
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    Ok(ExperimentConfig::from_json(&path.display().to_string(), &text)?)
}

fn cmd_run(
    config: PathBuf,
    seed: Option<u64>,
    algo: Option<Vec<String>>,
    out: Option<PathBuf>,
    format: Option<String>,
) -> Result<ExitCode> {
    let mut cfg = load_config(&config)?;
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    if let Some(names) = algo {
        cfg.algorithms = names
            .iter()
            .map(|n| n.parse::<Algo>())
            .collect::<fedclust_core::Result<Vec<_>>>()?;
    }
    if let Some(out) = out {
        cfg.out = Some(out);
    }
    if let Some(format) = format {
        cfg.format = match format.as_str() {
            "json" => ReportFormat::Json,
            "csv" => ReportFormat::Csv,
            other => bail!("unknown format {other:?} (expected json or csv)"),
        };
    }
    let report = run_experiment(&cfg)?;
    let rendered = emit_report(&report, cfg.format)?;
    // Persist before printing so a consumer that hangs up early cannot cost
    // the caller the on-disk copy.
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        let ext = match cfg.format {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        };
        let path = dir.join(format!("report.{ext}"));
        std::fs::write(&path, &rendered)
            .with_context(|| format!("writing report {}", path.display()))?;
    }
    write_stdout(&rendered)?;
    if report.cells.iter().any(|c| c.error.is_some()) {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(synthetic: &str, out: PathBuf) -> Result<ExitCode> {
    let spec = parse_synthetic(synthetic)?;
    let fd = gen_mixture_linreg(&spec)?;
    save_federated_csv(&fd, &out)?;
    write_stdout(&format!(
        "wrote {} clients (n = {}, d = {}, {} clusters, sigma = {}) to {}\n",
        spec.m,
        spec.n,
        spec.d,
        spec.c,
        spec.sigma,
        out.display()
    ))?;
    Ok(ExitCode::SUCCESS)
}

fn parse_synthetic(s: &str) -> Result<SyntheticSpec> {
    let (mut m, mut n, mut d, mut c, mut sigma) = (None, None, None, None, None);
    let mut seed = 1u64;
    let mut train_fraction = fedclust_core::data::DEFAULT_TRAIN_FRACTION;
    for pair in s.split(',') {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got {pair:?}"))?;
        let (key, value) = (key.trim(), value.trim());
        let parse_usize =
            || -> Result<usize> { Ok(value.parse().with_context(|| format!("bad {key}={value}"))?) };
        match key {
            "m" => m = Some(parse_usize()?),
            "n" => n = Some(parse_usize()?),
            "d" => d = Some(parse_usize()?),
            "c" => c = Some(parse_usize()?),
            "sigma" => sigma = Some(value.parse::<f64>().with_context(|| format!("bad sigma={value}"))?),
            "seed" => seed = value.parse().with_context(|| format!("bad seed={value}"))?,
            "train_fraction" => {
                train_fraction =
                    value.parse().with_context(|| format!("bad train_fraction={value}"))?
            }
            other => bail!("unknown synthetic key {other:?} (m, n, d, c, sigma, seed, train_fraction)"),
        }
    }
    let spec = SyntheticSpec {
        m: m.ok_or_else(|| anyhow!("missing m"))?,
        n: n.ok_or_else(|| anyhow!("missing n"))?,
        d: d.ok_or_else(|| anyhow!("missing d"))?,
        c: c.ok_or_else(|| anyhow!("missing c"))?,
        sigma: sigma.ok_or_else(|| anyhow!("missing sigma"))?,
        train_fraction,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let (range, log) = match parts.as_slice() {
        [a, b, c] => ([*a, *b, *c], false),
        [a, b, c, "log"] => ([*a, *b, *c], true),
        _ => bail!("expected start:end:count or start:end:count:log, got {s:?}"),
    };
    let start: f64 = range[0].parse().context("bad grid start")?;
    let end: f64 = range[1].parse().context("bad grid end")?;
    let count: usize = range[2].parse().context("bad grid count")?;
    if count < 1 {
        bail!("grid count must be >= 1");
    }
    if !(start.is_finite() && end.is_finite() && start <= end) {
        bail!("grid needs finite start <= end");
    }
    if log && start <= 0.0 {
        bail!("log grids need start > 0");
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            let t = i as f64 / step;
            if log {
                (start.ln() + t * (end.ln() - start.ln())).exp()
            } else {
                start + t * (end - start)
            }
        })
        .collect())
}

fn cmd_tune(config: PathBuf, lambda_grid: &str) -> Result<ExitCode> {
    let cfg = load_config(&config)?;
    let grid = parse_grid(lambda_grid)?;
    let seed = cfg.seeds[0];
    let fd = materialize_dataset(&cfg.dataset, seed)?;
    let train = cfg.train.resolve(&fd)?;
    let scfg = cfg.srfca.build(train);
    let outcome = tune_lambda(&fd, &grid, &scfg, seed)?;
    let mut rendered = String::from("lambda,objective,cluster_count\n");
    for p in &outcome.points {
        rendered.push_str(&format!(
            "{},{},{}\n",
            p.lambda,
            p.objective.map_or(String::new(), |v| format!("{v:.6e}")),
            p.cluster_count.map_or(String::new(), |v| v.to_string()),
        ));
    }
    rendered.push_str(&format!("best_lambda,{}\n", outcome.best_lambda));
    write_stdout(&rendered)?;
    Ok(ExitCode::SUCCESS)
}

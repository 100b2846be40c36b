use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fedsurv_harness::records::read_records_path;
use fedsurv_harness::report::report;
use fedsurv_harness::simulate::{BOXPLOT_FILE, PAIRED_FILE, SUMMARY_FILE};
use fedsurv_harness::{simulate, ExperimentConfig};
use fedsurv_transport::{run_client, ClientConfig, Coordinator, CoordinatorConfig, LocalSite, RoundParams};
use log::info;
use serde_json::json;

#[derive(Parser)]
#[command(name = "fedsurv", version, about = "Federated random survival forests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the feature-withholding experiment in-process.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the master seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write boxplot.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Summarize an existing records CSV.
    Report {
        #[arg(long)]
        records: PathBuf,
        /// Write summary.csv and paired.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, requires = "out")]
        svg: bool,
    },
    /// Serve one federation round.
    Coordinator {
        #[arg(long)]
        listen: String,
        /// File with one client id per line.
        #[arg(long)]
        roster: PathBuf,
        #[arg(long, default_value_t = 120)]
        timeout_secs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Experiment config supplying the update method and weighting.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Join a round with a local CSV.
    Client {
        #[arg(long)]
        connect: String,
        #[arg(long)]
        client_id: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Share of local rows held out for evaluation.
        #[arg(long, default_value_t = 0.3)]
        test_fraction: f64,
        #[arg(long, default_value_t = 120)]
        timeout_secs: u64,
        /// Experiment config supplying forest parameters and CSV columns.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_path(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn read_roster(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading roster {}", path.display()))?;
    let roster: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    if roster.is_empty() {
        bail!("roster {} lists no clients", path.display());
    }
    Ok(roster)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate {
            config,
            data,
            out,
            seed,
            svg,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dataset = cfg
                .data
                .load(&data)
                .with_context(|| format!("loading {}", data.display()))?;
            info!("{} rows, {} covariates", dataset.n_rows(), dataset.feature_names().len());
            let sim = simulate(&cfg, &dataset)?;
            sim.write_to(&out, svg)?;
            print!("{}", sim.report.to_text());
        }
        Command::Report { records, out, svg } => {
            let recs = read_records_path(&records).with_context(|| format!("reading {}", records.display()))?;
            let rep = report(&recs)?;
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                rep.write_summary_csv(fs::File::create(dir.join(SUMMARY_FILE))?)?;
                rep.write_paired_csv(fs::File::create(dir.join(PAIRED_FILE))?)?;
                if svg {
                    fs::write(dir.join(BOXPLOT_FILE), rep.to_svg())?;
                }
            }
            print!("{}", rep.to_text());
        }
        Command::Coordinator {
            listen,
            roster,
            timeout_secs,
            seed,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let round = RoundParams {
                update_method: cfg.update_method,
                update_weighting: cfg.update_weighting,
                seed,
                ..RoundParams::default()
            };
            let mut coord_cfg = CoordinatorConfig::new(read_roster(&roster)?, round);
            coord_cfg.timeout = Duration::from_secs(timeout_secs);
            let coordinator = Coordinator::bind(&listen, coord_cfg)?;
            eprintln!("listening on {}", coordinator.local_addr()?);
            let log = coordinator.run()?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "canonical_columns": log.federated_schema.canonical_columns,
                    "sites": log.sites,
                }))?
            );
        }
        Command::Client {
            connect,
            client_id,
            data,
            seed,
            test_fraction,
            timeout_secs,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let dataset = cfg
                .data
                .load(&data)
                .with_context(|| format!("loading {}", data.display()))?;
            let site = LocalSite::prepare(client_id.clone(), &dataset, test_fraction, seed)?;
            let mut client_cfg = ClientConfig::new(client_id, cfg.forest.clone(), seed);
            client_cfg.timeout = Duration::from_secs(timeout_secs);
            let out = run_client(&connect, &site, &client_cfg)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "client_id": out.client_id,
                    "c_index": out.evaluation.c_index,
                    "n_test": out.evaluation.n_test,
                    "n_comparable_pairs": out.evaluation.n_comparable_pairs,
                    "n_received": out.model.federated_trees().len(),
                    "n_active": out.model.active_set().len(),
                }))?
            );
        }
    }
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qlmf_harness::config::ExperimentConfig;
use qlmf_harness::experiment::{baseline_metrics, evaluate_run, write_config, write_metrics, MetricsReport};
use qlmf_harness::tables::{parse_seeds, reproduce_tables, table_dir, Series, TableOptions};
use qlmf_harness::{feed, generate_datasets, run_experiment, HarnessError};

#[derive(Parser)]
#[command(name = "qlmf", version, about = "Multifidelity lattice-Boltzmann / KAN experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Problem defaults to start from when no config file is given.
    #[arg(long)]
    problem: Option<String>,
    /// Override one key, e.g. `--set lambda_alpha=1e-4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.problem) {
            (Some(path), _) => ExperimentConfig::from_file(path)?,
            (None, Some(p)) => ExperimentConfig::for_problem(p.parse()?),
            (None, None) => ExperimentConfig::burgers(),
        };
        if let (Some(_), Some(p)) = (&self.config, &self.problem) {
            if cfg.problem != p.parse()? {
                return Err(HarnessError::Config(format!("--problem {p} disagrees with the config file")).into());
            }
        }
        cfg.apply_overrides(&self.overrides)?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run both solvers and write lf.csv, hf_train.csv and hf_eval.csv.
    Generate(ConfigArgs),
    /// Generate data, train both stages and write the full artifact tree.
    Train(ConfigArgs),
    /// Recompute metrics for an existing run directory.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
    },
    /// Reproduce a results table over several seeds.
    Table {
        /// `b` (Burgers) or `c` (cavity).
        #[arg(long)]
        series: String,
        #[arg(long, default_value = "0,1,2")]
        seeds: String,
        /// Comma-separated subset of row ids, e.g. `B4,B5`.
        #[arg(long)]
        rows: Option<String>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write each run's artifact tree.
        #[arg(long)]
        persist: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write long-form field CSVs for plotting from a run directory.
    DumpFigures {
        #[arg(long)]
        run: PathBuf,
    },
}

fn print_report(r: &MetricsReport) {
    let opt = |v: Option<f64>| v.map_or("absent".to_string(), |v| format!("{v:.4}"));
    println!("run {} (seed {}), alpha = {:.4}, training {:.1} s", r.name, r.seed, r.alpha, r.wall_time_s);
    for q in &r.quantities {
        for (what, m) in [("mf", &q.mf), ("lf_surrogate", &q.lf_surrogate), ("lf_baseline", &q.lf_baseline)] {
            println!(
                "  {:<2} {:<13} train {:>8}  extrap {:>8}  full {:.4}",
                q.quantity,
                what,
                opt(m.train),
                opt(m.extrap),
                m.full
            );
        }
        println!("  {:<2} reduction vs baseline {:.1}%", q.quantity, 100.0 * q.reduction());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Command::Generate(args) => {
            let cfg = args.load()?;
            let data = generate_datasets(&cfg)?;
            let dir = cfg.run_dir();
            write_config(&cfg, &dir)?;
            data.save(&dir)?;
            println!(
                "wrote {} ({} LF, {} HF train, {} HF eval rows)",
                dir.display(),
                data.lf.len(),
                data.hf_train.len(),
                data.hf_eval.len()
            );
            for (q, m) in baseline_metrics(&data)? {
                println!("  LF baseline {q}: full {:.4}", m.full);
            }
        }
        Command::Train(args) => {
            let cfg = args.load()?;
            let report = run_experiment(&cfg)?;
            print_report(&report);
            println!("artifacts in {}", cfg.run_dir().display());
        }
        Command::Evaluate { run } => {
            let report = evaluate_run(&run).with_context(|| format!("evaluating {}", run.display()))?;
            write_metrics(&run.join("metrics.json"), &report)?;
            print_report(&report);
        }
        Command::Table {
            series,
            seeds,
            rows,
            jobs,
            persist,
            config,
        } => {
            let series: Series = series.parse()?;
            let mut config = config;
            if config.config.is_none() && config.problem.is_none() {
                config.problem = Some(series.problem().to_string());
            }
            let base = config.load()?;
            let mut opts = TableOptions::new(series);
            opts.out_dir = table_dir(&base.out_dir, series);
            opts.base = base;
            opts.persist_runs = persist;
            if let Some(j) = jobs {
                opts.jobs = j.max(1);
            }
            if let Some(r) = rows {
                opts.only = r.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            }
            let table = reproduce_tables(series, &parse_seeds(&seeds)?, &opts)?;
            print!("{}", table.text);
            println!("wrote {}", table.csv_path.display());
        }
        Command::DumpFigures { run } => {
            for p in feed::dump_figures(&run)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<HarnessError>().map_or(1, HarnessError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

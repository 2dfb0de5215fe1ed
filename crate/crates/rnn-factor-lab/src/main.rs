//! Command-line driver: parameter accounting tables, training runs,
//! throughput benchmarks and the gradient-check suite.
//!
//! Exit codes: 0 success, 1 usage, 2 config, 3 data, 4 numeric failure.

use std::fs;
use std::path::PathBuf;
use std::process;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Parser, Subcommand};

use rnn_factor_core::accounting::table1_report;
use rnn_factor_core::cells::CellConfig;
use rnn_factor_core::model::{gradient_check, ModelConfig};

use rnn_factor_lab::bench::{throughput_bench, variant_suite, BenchSettings};
use rnn_factor_lab::config::RunConfig;
use rnn_factor_lab::report;
use rnn_factor_lab::trainer::train_run;
use rnn_factor_lab::{LabError, Result};

const GRADCHECK_TOLERANCE: f64 = 1e-5;
const GRADCHECK_EPS: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "rnn-factor-lab",
    about = "Projected, factorized and group LSTM laboratory",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print parameter counts and MAC costs of the named configurations.
    Params {
        /// Also write the report as CSV to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a language model from a JSON run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override run.steps from the config.
        #[arg(long)]
        steps: Option<u64>,
        /// Override run.seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override run.metrics_path from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time full training steps for each cell variant at fixed dims.
    Bench {
        /// Timed steps per variant (0 skips measurement).
        #[arg(long, default_value_t = 2)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report as CSV to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify analytic gradients against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            process::exit(err.kind.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Params { out } => cmd_params(out),
        Command::Train {
            config,
            steps,
            seed,
            out,
        } => cmd_train(config, steps, seed, out),
        Command::Bench { steps, seed, out } => cmd_bench(steps, seed, out),
        Command::Gradcheck { seed } => cmd_gradcheck(seed),
    }
}

fn write_out(path: &PathBuf, content: &str) -> Result<()> {
    fs::write(path, content)
        .map_err(|e| LabError::data(format!("cannot write {}: {e}", path.display())))
}

fn cmd_params(out: Option<PathBuf>) -> Result<()> {
    let reports = table1_report()?;
    print!("{}", report::text_table(&reports));
    if let Some(path) = out {
        write_out(&path, &report::csv(&reports))?;
    }
    Ok(())
}

fn cmd_train(
    config_path: PathBuf,
    steps: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut config = RunConfig::load(&config_path)?;
    if let Some(steps) = steps {
        config.run.steps = steps;
    }
    if let Some(seed) = seed {
        config.run.seed = seed;
    }
    if let Some(out) = out {
        config.run.metrics_path = Some(out);
    }
    let outcome = train_run(config)?;
    let best = match outcome.best_ppl {
        Some(ppl) => format!("{ppl:.4}"),
        None => "n/a".to_string(),
    };
    println!("vocabulary size {}", outcome.vocab_size);
    if let Some(ppl) = outcome.held_out_ppl {
        println!("held-out perplexity {ppl:.4}");
    }
    println!(
        "trained {} steps, best train perplexity {best}",
        outcome.steps_completed
    );
    Ok(())
}

fn cmd_bench(steps: usize, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let settings = BenchSettings {
        steps,
        seed,
        ..BenchSettings::default()
    };
    let configs = variant_suite(settings.embed_dim, settings.cell_dim);
    println!(
        "dims: p={} n={} batch={} unroll={} ({} timed steps per variant)",
        settings.embed_dim, settings.cell_dim, settings.batch, settings.unroll, settings.steps
    );
    let reports = throughput_bench(&configs, &settings)?;
    print!("{}", report::text_table(&reports));
    if let Some(path) = out {
        write_out(&path, &report::csv(&reports))?;
    }
    Ok(())
}

fn cmd_gradcheck(seed: u64) -> Result<()> {
    let suites: Vec<(&str, ModelConfig)> = vec![
        (
            "dense",
            ModelConfig {
                vocab_size: 5,
                embed_dim: 2,
                layers: vec![CellConfig::dense(2, 4)],
                unroll: 3,
                batch: 2,
            },
        ),
        (
            "factorized r=1",
            ModelConfig {
                vocab_size: 5,
                embed_dim: 2,
                layers: vec![CellConfig::factorized(2, 4, 1)],
                unroll: 3,
                batch: 2,
            },
        ),
        (
            "grouped k=2",
            ModelConfig {
                vocab_size: 5,
                embed_dim: 2,
                layers: vec![CellConfig::grouped(2, 4, 2)],
                unroll: 3,
                batch: 2,
            },
        ),
        (
            "hierarchy k=2,k=4",
            ModelConfig {
                vocab_size: 6,
                embed_dim: 4,
                layers: vec![CellConfig::grouped(4, 8, 2), CellConfig::grouped(4, 8, 4)],
                unroll: 3,
                batch: 2,
            },
        ),
    ];
    let mut worst_overall = 0.0_f64;
    for (label, config) in &suites {
        let report = gradient_check(config, seed, GRADCHECK_EPS)?;
        let verdict = if report.max_rel_error <= GRADCHECK_TOLERANCE {
            "ok"
        } else {
            "FAIL"
        };
        println!(
            "gradcheck {label}: max_rel_error {:.3e} over {} params (worst {}[{}]) {verdict}",
            report.max_rel_error, report.params_checked, report.worst_tensor, report.worst_index
        );
        worst_overall = worst_overall.max(report.max_rel_error);
    }
    if worst_overall > GRADCHECK_TOLERANCE {
        return Err(LabError::numeric(format!(
            "gradient check failed: worst relative error {worst_overall:.3e} exceeds {GRADCHECK_TOLERANCE:.0e}"
        )));
    }
    println!("all gradient checks within {GRADCHECK_TOLERANCE:.0e}");
    Ok(())
}

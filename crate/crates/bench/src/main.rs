use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use reginit::problems::{load_pgm, make_disc_pair, write_pgm};
use reginit_bench::config::{parse_memory, parse_regularizer};
use reginit_bench::register::{register_images, save_field_csv, RegisterOptions};
use reginit_bench::{aggregate, emit_report, run_experiment, BenchError, BenchResult, ExperimentSpec, ReportFormat};

#[derive(Parser)]
#[command(name = "bench", version, about = "L-BFGS initialization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment matrix described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output file (overrides `output` in the config; stdout if neither).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Worker threads for independent cells.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Keep one row per repetition instead of the mean.
        #[arg(long)]
        per_rep: bool,
    },
    /// Register two PGM images and write the displacement field.
    Register {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "tpl")]
        template: PathBuf,
        #[arg(long, default_value = "dp")]
        strategy: String,
        #[arg(long, default_value_t = 1e-3)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
        /// curvature or elastic
        #[arg(long, default_value = "curvature")]
        regularizer: String,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Memory length, or `inf`.
        #[arg(long, default_value = "5")]
        memory: String,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
    /// Write a synthetic disc pair as 8-bit PGM files.
    Synth {
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long, default_value_t = 8.0)]
        radius_ref: f64,
        #[arg(long, default_value_t = 6.0)]
        radius_tpl: f64,
        #[arg(long, default_value_t = 2.0)]
        offset: f64,
        #[arg(long = "out-ref")]
        out_ref: PathBuf,
        #[arg(long = "out-tpl")]
        out_tpl: PathBuf,
    },
}

fn run(cli: Cli) -> BenchResult<()> {
    match cli.command {
        Command::Run { config, out, format, parallel, per_rep } => {
            let spec = ExperimentSpec::from_file(&config).map_err(|e| match e {
                BenchError::Io(io) => BenchError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", config.display()))),
                other => other,
            })?;
            let rows = run_experiment(&spec, parallel)?;
            let rows = if per_rep { rows } else { aggregate(&rows) };
            let format = match format {
                Format::Csv => ReportFormat::Csv,
                Format::Table => ReportFormat::Table,
            };
            emit_report(&rows, format, out.as_deref().or(spec.output.as_deref()))
        }
        Command::Register { reference, template, strategy, alpha, out, regularizer, mu, lambda, memory, max_iter } => {
            let opts = RegisterOptions {
                strategy,
                alpha,
                regularizer: parse_regularizer(&regularizer, mu, lambda).map_err(|m| BenchError::config("regularizer", m))?,
                memory: parse_memory(&memory).map_err(|m| BenchError::config("memory", m))?,
                max_iter,
            };
            if !(alpha > 0.0) {
                return Err(BenchError::config("alpha", "must be positive"));
            }
            let (problem, result) = register_images(load_pgm(&reference)?, load_pgm(&template)?, &opts)?;
            save_field_csv(&problem, &result.x, &out)?;
            let r = &result.record;
            eprintln!(
                "{}: iter={} feval={} reduction={:.4e} converged_by={}",
                opts.strategy, r.iterations, r.fevals, r.reduction, r.converged_by
            );
            Ok(())
        }
        Command::Synth { size, radius_ref, radius_tpl, offset, out_ref, out_tpl } => {
            let (r, t) = make_disc_pair(size, radius_ref, radius_tpl, (offset, 0.0))
                .map_err(|e| BenchError::config("size", e.to_string()))?;
            write_pgm(&out_ref, &r)?;
            write_pgm(&out_tpl, &t)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

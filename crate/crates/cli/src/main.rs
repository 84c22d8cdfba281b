use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use irsense::experiment::{
    emit, figure_preset, infeasible_only, init_workers_from_env, optimize, run_experiment, to_csv_string,
    to_json_string, ExperimentId, Format, ResultRow, ScenarioConfig, SweepSpec,
};
use irsense::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "irsense", version, about = "Target-mounted IRS secure sensing simulator")]
struct Cli {
    /// TOML scenario file; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Radar {
    Lrs,
    Urs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scan a radar's DFT codebook and report received power per beam.
    Scan {
        #[arg(long, value_enum, default_value_t = Radar::Lrs)]
        radar: Radar,
    },
    /// Solve one CPI and print the reflection and powers as JSON.
    Optimize,
    /// Run one experiment over a grid.
    Sweep {
        /// Experiment id, e.g. gamma_sweep.
        #[arg(long)]
        experiment: String,
        /// Comma-separated grid; the experiment's default grid when omitted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
    },
    /// Run the preset behind a figure (fig5 … fig12) or experiment id.
    Reproduce { figure: String },
    /// Print the effective configuration as TOML.
    Config,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config_error = err.chain().any(|cause| {
                matches!(
                    cause.downcast_ref::<Error>(),
                    Some(Error::Config { .. } | Error::InvalidParameter { .. })
                )
            });
            ExitCode::from(if config_error { EXIT_CONFIG } else { 1 })
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<ScenarioConfig> {
    let mut config = match &cli.config {
        Some(path) => ScenarioConfig::load(path).map_err(|e| match e {
            Error::Io { .. } => Error::Config {
                field: "--config".into(),
                reason: e.to_string(),
            },
            other => other,
        })?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    init_workers_from_env()?;
    let config = load_config(cli)?;
    let (config, sweep) = match &cli.command {
        Command::Optimize => {
            let report = optimize(&config)?;
            let text = serde_json::to_string_pretty(&report).context("serializing report")?;
            write_text(cli.out.as_deref(), &text)?;
            return Ok(ExitCode::SUCCESS);
        }
        Command::Config => {
            write_text(cli.out.as_deref(), &config.to_toml_string()?)?;
            return Ok(ExitCode::SUCCESS);
        }
        Command::Scan { radar } => {
            let id = match radar {
                Radar::Lrs => ExperimentId::BeamScanLrs,
                Radar::Urs => ExperimentId::BeamScanUrs,
            };
            let sweep = SweepSpec::preset(id, &config);
            (config, sweep)
        }
        Command::Sweep { experiment, values } => {
            let id: ExperimentId = experiment.parse()?;
            let sweep = match values {
                Some(v) => SweepSpec::new(id, v.clone()),
                None => SweepSpec::preset(id, &config),
            };
            (config, sweep)
        }
        Command::Reproduce { figure } => figure_preset(figure, &config)?,
    };
    let rows = run_experiment(&config, &sweep)?;
    write_rows(cli, &rows)?;
    if infeasible_only(&rows) {
        eprintln!("every proposed-scheme row is infeasible");
        return Ok(ExitCode::from(EXIT_INFEASIBLE));
    }
    Ok(ExitCode::SUCCESS)
}

fn write_rows(cli: &Cli, rows: &[ResultRow]) -> anyhow::Result<()> {
    let format = match cli.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    match &cli.out {
        Some(path) => emit(rows, format, path)?,
        None => {
            let text = match format {
                Format::Csv => to_csv_string(rows)?,
                Format::Json => to_json_string(rows)?,
            };
            write_text(None, &text)?;
        }
    }
    Ok(())
}

fn write_text(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

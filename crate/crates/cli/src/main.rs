use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use com_core::eval::{emit_report, run_eval, run_pipeline, BackendKind, EvalConfig, EvalError, MetricsTable, ReportFormat};
use com_core::{ModalitySet, StrategyKind};

#[derive(Parser)]
#[command(name = "eval", version, about = "Evaluate demonstration-to-plan strategies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured strategy and modality subset over a corpus.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured strategies; repeat or comma-separate.
        #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
        strategy: Vec<StrategyKind>,
        /// Overrides the configured modality subsets; repeat for several,
        /// e.g. `--modalities force,hand,image --modalities "w.o. force"`.
        #[arg(long, value_parser = parse_modalities)]
        modalities: Vec<ModalitySet>,
        #[arg(long, value_parser = parse_backend)]
        backend: Option<BackendKind>,
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run analysis, program generation and simulation for one recording.
    Pipeline {
        #[arg(long)]
        demo: PathBuf,
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit a metrics table in the requested format.
    Report {
        #[arg(long, value_parser = parse_format)]
        format: ReportFormat,
        /// Metrics JSON written by `eval run`.
        #[arg(long, default_value = "out/metrics.json")]
        input: PathBuf,
        /// Also write the report file into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    s.parse()
}

fn parse_modalities(s: &str) -> Result<ModalitySet, String> {
    ModalitySet::parse(s)
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            strategy,
            modalities,
            backend,
            trials,
            out,
        } => {
            let mut config = EvalConfig::load(&config)?;
            if !strategy.is_empty() {
                config.strategies = strategy;
            }
            if !modalities.is_empty() {
                config.ablations = modalities;
            }
            if let Some(kind) = backend {
                config.backend.kind = kind;
            }
            if let Some(n) = trials {
                config.trials = n;
            }
            if let Some(dir) = out {
                config.output_dir = dir;
            }
            config.validate()?;
            let table = run_eval(&config)?;
            print!("{}", table.to_csv());
            for row in table.rows.iter().filter(|r| !r.failures.is_empty()) {
                for f in &row.failures {
                    log::warn!("{} {}: {f}", row.task, row.strategy);
                }
            }
            log::info!("reports written to {}", config.output_dir.display());
        }
        Command::Pipeline {
            demo,
            task,
            config,
            out,
        } => {
            let mut config = EvalConfig::load(&config)?;
            if let Some(dir) = out {
                config.output_dir = dir;
            }
            let report = run_pipeline(&demo, &task, &config)?;
            println!("{report}");
            log::info!("artifacts written to {}", config.output_dir.display());
        }
        Command::Report { format, input, out } => {
            let table = MetricsTable::load(&input)?;
            print!("{}", format.render(&table));
            if let Some(dir) = out {
                let path = emit_report(&table, format, &dir)
                    .with_context(|| format!("writing {} report", format.file_name()))?;
                log::info!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .chain()
                .find_map(|e| e.downcast_ref::<EvalError>())
                .map_or(1, EvalError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

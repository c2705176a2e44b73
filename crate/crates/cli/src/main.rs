use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use privnet_cli::output::TraceWriter;
use privnet_cli::{
    config, emit_csv, emit_plot, read_csv, run_experiment, run_sweep, write_csv, CliError, Experiment,
    ExperimentConfig, ResultRow,
};
use privnet_core::sim::MetricsGranularity;

#[derive(Parser)]
#[command(name = "privnet", version, about = "Private/open uplink scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write a single CSV row.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Per-block trace CSV (written when metrics_granularity is per_block).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a sweep configuration and write per-run and aggregated rows.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Also render the aggregated rates to this SVG.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Render a result CSV as an SVG rate plot.
    Plot {
        csv: PathBuf,
        svg: PathBuf,
        /// Label of the horizontal axis.
        #[arg(long, default_value = "axis value")]
        x_label: String,
    },
}

#[derive(Args)]
struct Overrides {
    /// Fading seed (the first seed of each sweep point).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of blocks per run.
    #[arg(long)]
    blocks: Option<u64>,
    /// Output CSV path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(n) = self.blocks {
            c.n_blocks = n;
            if c.warmup_blocks.is_some_and(|w| w >= n) {
                c.warmup_blocks = None;
            }
        }
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<Experiment, CliError> {
    let mut experiment = config::parse_config(path)?;
    match &mut experiment {
        Experiment::Run(c) => overrides.apply(c),
        Experiment::Sweep(s) => overrides.apply(&mut s.base),
    }
    // overrides can break invariants, so check again
    match experiment {
        Experiment::Run(c) => config::validate_experiment(c),
        Experiment::Sweep(s) => s.validate().map(|_| Experiment::Sweep(s)),
    }
}

fn write_rows(rows: &[ResultRow], out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => emit_csv(rows, p),
        None => write_csv(rows, io::stdout().lock()).map_err(|source| CliError::Csv {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn default_trace_path(out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => p.with_extension("blocks.csv"),
        None => PathBuf::from("trace.blocks.csv"),
    }
}

fn cmd_run(path: &Path, overrides: &Overrides, trace: Option<&Path>) -> Result<(), CliError> {
    let Experiment::Run(c) = load(path, overrides)? else {
        return Err(CliError::Validation(vec![format!(
            "{} is a sweep config; use `privnet sweep`",
            path.display()
        )]));
    };
    let summary = if c.metrics_granularity == MetricsGranularity::PerBlock {
        let trace_path = trace.map(Path::to_path_buf).unwrap_or_else(|| default_trace_path(overrides.out.as_deref()));
        let io_err = |source| CliError::Io {
            path: trace_path.clone(),
            source,
        };
        let csv_err = |source| CliError::Csv {
            path: trace_path.clone(),
            source,
        };
        let mut writer = TraceWriter::new(BufWriter::new(File::create(&trace_path).map_err(io_err)?));
        let mut failure = None;
        let summary = run_experiment(
            &c,
            Some(&mut |rec| {
                if failure.is_none() {
                    failure = writer.record(rec).err();
                }
            }),
        )?;
        if let Some(e) = failure {
            return Err(csv_err(e));
        }
        writer.finish().map_err(csv_err)?;
        log::info!("per-block trace written to {}", trace_path.display());
        summary
    } else {
        if trace.is_some() {
            log::warn!("--trace ignored: metrics_granularity is summary");
        }
        run_experiment(&c, None)?
    };
    let row = ResultRow::from_summary(None, &c, &summary);
    write_rows(&[row], overrides.out.as_deref())
}

fn cmd_sweep(path: &Path, overrides: &Overrides, plot: Option<&Path>) -> Result<(), CliError> {
    let Experiment::Sweep(spec) = load(path, overrides)? else {
        return Err(CliError::Validation(vec![format!(
            "{} has no sweep section; use `privnet run`",
            path.display()
        )]));
    };
    if spec.base.metrics_granularity == MetricsGranularity::PerBlock {
        log::warn!("per-block traces are not written for sweeps");
    }
    let result = run_sweep(&spec)?;
    let rows = result.rows();
    write_rows(&rows, overrides.out.as_deref())?;
    if let Some(svg) = plot {
        emit_plot(&rows, spec.axis.name(), svg)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, overrides, trace } => cmd_run(config, overrides, trace.as_deref()),
        Command::Sweep { config, overrides, plot } => cmd_sweep(config, overrides, plot.as_deref()),
        Command::Plot { csv, svg, x_label } => read_csv(csv).and_then(|rows| emit_plot(&rows, x_label, svg)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

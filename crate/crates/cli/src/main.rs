use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lpv_guidance_cli::commands::{self, LoopSelection, ReportFormat};
use lpv_guidance_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "lpv-guide",
    version,
    about = "Gain-scheduled LPV guidance: synthesis, simulation, reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LoopArg {
    Kinematic,
    Dynamic,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Svg,
    CsvOnly,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize vertex gains and write gain documents plus a validation report.
    Synth {
        /// TOML run configuration; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "loop", value_enum, default_value = "both")]
        loop_sel: LoopArg,
    },
    /// Plan the reference, run the closed loop and write telemetry and metrics.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory holding the gain documents (defaults to the output directory).
        #[arg(long)]
        gains: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Simulated duration [s].
        #[arg(long)]
        horizon: Option<f64>,
        /// Waypoint file (`x y [speed]` per line) replacing the configured course.
        #[arg(long)]
        circuit: Option<PathBuf>,
        /// Reserved; runs are deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render SVG plots (or re-emit metrics) from a telemetry CSV.
    Report {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Telemetry CSV (defaults to telemetry.csv in the output directory).
        #[arg(long)]
        telemetry: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "svg")]
        format: FormatArg,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { config, out, loop_sel } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let selection = match loop_sel {
                LoopArg::Kinematic => LoopSelection::Kinematic,
                LoopArg::Dynamic => LoopSelection::Dynamic,
                LoopArg::Both => LoopSelection::Both,
            };
            for p in commands::synth(&cfg, &out, selection)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Simulate {
            config,
            gains,
            out,
            horizon,
            circuit,
            seed: _,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let gains = gains.unwrap_or_else(|| out.clone());
            if let Some(h) = horizon {
                if h.is_nan() || h <= 0.0 {
                    return Err(CliError::Config(format!("--horizon must be positive, got {h}")));
                }
            }
            let m = commands::simulate(&cfg, &gains, &out, horizon, circuit.as_deref())?;
            println!(
                "rmse_v {:.4} m/s  rmse_w {:.4} rad/s  rmse_y {:.4} m  max_ev {:.4}  max_ey {:.4}",
                m.rmse_v, m.rmse_w, m.rmse_y, m.max_ev, m.max_ey
            );
            println!("wrote {}", out.display());
        }
        Command::Report {
            config,
            telemetry,
            out,
            format,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let telemetry = telemetry.unwrap_or_else(|| cfg.output_dir.join(commands::TELEMETRY));
            let format = match format {
                FormatArg::Svg => ReportFormat::Svg,
                FormatArg::CsvOnly => ReportFormat::CsvOnly,
            };
            for p in commands::report(&telemetry, &out, format)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::TimeDelta;
use clap::{Parser, Subcommand};

use oceanmine::pipeline::{run, AnalysisConfig, PipelineConfig};

#[derive(Parser)]
#[command(name = "oceanmine", version, about = "Float telemetry to ocean index, episode rules and advisories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline over one or more raw feed files.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Raw OIDS text files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, short = 'o', default_value = "out")]
    output_dir: PathBuf,
    /// Region grid cell size in degrees.
    #[arg(long, default_value_t = 1.0)]
    cell_size: f64,
    /// Calibration file (`key = value`, keys named after the calibration fields).
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Levels at or below this pressure (dbar) are not indexed.
    #[arg(long, default_value_t = 0.5)]
    pressure_floor: f64,
    /// Samples per window of the average min/max band.
    #[arg(long, default_value_t = 10)]
    window_len: usize,
    /// Largest gap inside one event, seconds.
    #[arg(long, default_value_t = 3600.0)]
    delta: f64,
    /// Number of index classes.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Longest episode on either side of a rule.
    #[arg(long, default_value_t = 2)]
    max_len: usize,
    /// Antecedent window, seconds.
    #[arg(long, default_value_t = 0.0)]
    win_a: f64,
    /// Consequent window, seconds.
    #[arg(long, default_value_t = 0.0)]
    win_c: f64,
    /// Consequent start offset after the antecedent end, seconds. Defaults to delta.
    #[arg(long)]
    lag: Option<f64>,
    #[arg(long, default_value_t = 2)]
    min_support: usize,
    /// Fishing-zone confidence threshold.
    #[arg(long, default_value_t = 0.8)]
    theta: f64,
    /// Confidence curve grid step, seconds. Defaults to delta.
    #[arg(long)]
    step: Option<f64>,
    /// Skip the index and confidence plot-data files.
    #[arg(long)]
    no_plots: bool,
}

fn duration(name: &str, secs: f64) -> Result<TimeDelta, String> {
    if !secs.is_finite() || secs.abs() > 1e12 {
        return Err(format!("{name} must be a finite number of seconds"));
    }
    Ok(TimeDelta::milliseconds((secs * 1000.0).round() as i64))
}

impl RunArgs {
    fn into_config(self) -> Result<PipelineConfig, String> {
        let delta = duration("delta", self.delta)?;
        let analysis = AnalysisConfig {
            cell_size: self.cell_size,
            pressure_floor: self.pressure_floor,
            window_len: self.window_len,
            delta,
            k: self.k,
            max_len: self.max_len,
            win_a: duration("win-a", self.win_a)?,
            win_c: duration("win-c", self.win_c)?,
            lag: self.lag.map_or(Ok(delta), |l| duration("lag", l))?,
            min_support: self.min_support,
            theta: self.theta,
            step: self.step.map_or(Ok(delta), |s| duration("step", s))?,
            ..AnalysisConfig::default()
        };
        Ok(PipelineConfig {
            inputs: self.inputs,
            output_dir: self.output_dir,
            calibration_path: self.calibration,
            analysis,
            emit_plots: !self.no_plots,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run(args) = cli.command;
    let config = match args.into_config() {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: config: {msg}");
            return ExitCode::from(1);
        }
    };
    match run(&config) {
        Ok(summary) => {
            for d in &summary.diagnostics {
                eprintln!("warning: {d}");
            }
            println!(
                "{} regions, {} records, {} files written to {}",
                summary.regions,
                summary.records,
                summary.files.len(),
                config.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let oceanmine::pipeline::PipelineError::AllRejected { diagnostics } = &e {
                for d in diagnostics {
                    eprintln!("rejected: {d}");
                }
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

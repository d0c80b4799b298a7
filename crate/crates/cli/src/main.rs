//! `croptrack` — scene synthesis, crop-window tracking, window-size sweeps,
//! curve fitting, and optimum reports from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "croptrack",
    version,
    about = "Color-segmentation object tracking in a Kalman-predicted search window"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene (numbered PPM frames + truth.csv).
    Synth(SynthArgs),
    /// Track the object through a scene directory.
    Track(TrackArgs),
    /// Benchmark window multiples over one or more scenes and fit the trends.
    Sweep(SweepArgs),
    /// Fit a model to a two-column x,y CSV.
    Fit(FitArgs),
    /// Locate the optimum window multiple from fitted curve parameters.
    Optimum(OptimumArgs),
    /// Render a saved sweep report (tables, fits, optimum).
    Report(ReportArgs),
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {s}"))
    }
}

fn parse_unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must be in [0,1], got {s}"))
    }
}

fn parse_radius(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("`{s}` is not an integer"))?;
    if v >= 1 {
        Ok(v)
    } else {
        Err("must be >= 1".to_string())
    }
}

fn parse_preset(s: &str) -> Result<String, String> {
    let valid: Vec<String> = croptrack_core::synth::standard_objects()
        .into_iter()
        .map(|spec| spec.name)
        .collect();
    if valid.iter().any(|name| name == s) {
        Ok(s.to_string())
    } else {
        Err(format!(
            "unknown preset `{s}` (valid presets: {})",
            valid.join(", ")
        ))
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Built-in scene preset.
    #[arg(long, value_parser = parse_preset, conflicts_with = "spec")]
    preset: Option<String>,
    /// Scene spec as a key=value file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory for frames and truth.csv.
    #[arg(long)]
    out: PathBuf,
    /// Override the scene seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the frame count.
    #[arg(long)]
    frames: Option<usize>,
}

/// Tracker knobs shared by `track` and `sweep`. Unset flags fall back to
/// the config file, then to the defaults.
#[derive(Args, Clone)]
struct TrackerFlags {
    /// Red-difference threshold in [0,1].
    #[arg(long, value_parser = parse_unit_interval)]
    threshold: Option<f64>,
    /// Median filter radius.
    #[arg(long, value_parser = parse_radius)]
    median_radius: Option<usize>,
    /// Kalman process noise intensity.
    #[arg(long)]
    q: Option<f64>,
    /// Kalman measurement noise variance.
    #[arg(long, value_parser = parse_positive)]
    r: Option<f64>,
    /// Innovation gate distance in pixels (off when absent).
    #[arg(long, value_parser = parse_positive)]
    gate: Option<f64>,
    /// Frames to try during full-frame initialization.
    #[arg(long, value_parser = parse_radius)]
    max_init_frames: Option<usize>,
    /// key=value config file supplying any of the above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrackArgs {
    /// Scene directory of PPM frames (plus optional truth.csv).
    scene: PathBuf,
    /// Search window side as a multiple of the object's largest dimension.
    #[arg(long, value_parser = parse_positive, conflicts_with = "full_frame")]
    window_multiple: Option<f64>,
    /// Search the whole frame every step.
    #[arg(long)]
    full_frame: bool,
    /// Output directory for result.json and result.csv.
    #[arg(long, default_value = "track_out")]
    out: PathBuf,
    #[command(flatten)]
    tracker: TrackerFlags,
}

#[derive(Args)]
struct SweepArgs {
    /// Scene presets to benchmark (default: all three standard objects).
    #[arg(long, value_parser = parse_preset, num_args = 1..)]
    preset: Vec<String>,
    /// Scene directories to benchmark instead of (or besides) presets.
    #[arg(long, num_args = 1..)]
    scene: Vec<PathBuf>,
    /// Window multiples: comma list (0.5,1.0,...) or lo:hi:step range.
    #[arg(long)]
    multiples: Option<String>,
    /// Tracking runs per cell; synthetic trials use distinct seeds.
    #[arg(long, value_parser = parse_radius)]
    trials: Option<usize>,
    /// Offset applied to the preset scene seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json/report.csv/timing.csv and plots/.
    #[arg(long, default_value = "sweep_out")]
    out: PathBuf,
    #[command(flatten)]
    tracker: TrackerFlags,
}

#[derive(Args)]
struct FitArgs {
    /// Two-column x,y CSV (a header row is detected and skipped).
    csv: PathBuf,
    /// Model family to fit.
    #[arg(long, value_parser = ["poly5", "exp"])]
    model: String,
    /// Also write the fitted parameters as JSON to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimumArgs {
    /// Polynomial coefficients a0,a1,a2,...,an as one comma-separated list
    /// (a_i multiplies x^i).
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    poly: Vec<f64>,
    /// Exponential parameters: amplitude a then rate b.
    #[arg(long, num_args = 2, required = true, allow_hyphen_values = true)]
    exp: Vec<f64>,
    /// Search range.
    #[arg(long, num_args = 2, default_values_t = [0.0, 10.0], allow_hyphen_values = true)]
    range: Vec<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Path to a sweep report.json.
    report: PathBuf,
    /// Regenerate the plot-ready series under this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::Track(args) => commands::track(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Fit(args) => commands::fit(args),
        Command::Optimum(args) => commands::optimum(args),
        Command::Report(args) => commands::report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<commands::Usage>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

//! `vsr`: value-sensitive rejection of classifier decisions.
//!
//! Subcommands cover the full pipeline: calibrate classifier confidences,
//! compute total-value curves over rejection thresholds, derive closed-form
//! optimal thresholds from a value model, compare models by delivered value,
//! aggregate survey responses into scenario values, and sample
//! representative documents from a labeled corpus.

mod commands;
mod error;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vsr_core::{AlphaMetric, FileFormat, Scale};

#[derive(Parser)]
#[command(
    name = "vsr",
    version,
    about = "Value-sensitive rejection of classifier decisions",
    after_help = "Exit codes: 0 success, 1 i/o failure, 2 validation or domain error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for FileFormat {
    fn from(f: FormatArg) -> FileFormat {
        match f {
            FormatArg::Csv => FileFormat::Csv,
            FormatArg::Json => FileFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Me,
    S100,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Scale {
        match s {
            ScaleArg::Me => Scale::Me,
            ScaleArg::S100 => Scale::S100,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Nominal,
    Ordinal,
    Interval,
    Ratio,
}

impl From<MetricArg> for AlphaMetric {
    fn from(m: MetricArg) -> AlphaMetric {
        match m {
            MetricArg::Nominal => AlphaMetric::Nominal,
            MetricArg::Ordinal => AlphaMetric::Ordinal,
            MetricArg::Interval => AlphaMetric::Interval,
            MetricArg::Ratio => AlphaMetric::Ratio,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit temperature scaling on a predictions file with raw logits
    Calibrate {
        /// Predictions file (raw_logits records)
        #[arg(long)]
        predictions: PathBuf,
        /// Predictions file format
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        /// Confidence bins for the expected calibration error
        #[arg(long, default_value_t = 15)]
        bins: usize,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Total-value curve over rejection thresholds, with the optimum marked
    Curve {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        /// Value model JSON (v_tp, v_tn, v_fp, v_fn, v_r)
        #[arg(long)]
        values: PathBuf,
        /// Threshold grid step, in (0, 0.25]
        #[arg(long, default_value_t = 0.001)]
        grid_step: f64,
        /// Sweep separate thresholds for positive and negative predictions
        #[arg(long)]
        per_class: bool,
        /// Apply this temperature to raw-logit records before sweeping
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-form optimal thresholds from a value model
    Threshold {
        #[arg(long)]
        values: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank models by delivered value versus plain accuracy
    Compare {
        /// Predictions files (repeatable); all model ids found are compared
        #[arg(long, required = true)]
        predictions: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[arg(long)]
        values: PathBuf,
        #[arg(long, default_value_t = 0.001)]
        grid_step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scenario values, reliability, and validity from survey responses
    Survey {
        #[arg(long)]
        survey: PathBuf,
        /// Restrict the analysis to one scale
        #[arg(long, value_enum)]
        scale: Option<ScaleArg>,
        /// Require the cross-scale validity report (needs both scales)
        #[arg(long)]
        validity: bool,
        /// Distance function for Krippendorff's alpha
        #[arg(long, value_enum, default_value = "interval")]
        alpha_metric: MetricArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select representative documents from a labeled corpus
    Sample {
        /// corpus.csv: doc_id, text, plus one column per stratum label
        #[arg(long)]
        corpus: PathBuf,
        /// Plan JSON: [{"name", "filters", "clusters": N | "auto"}, ...]
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// SVD rank override (default: min(100, vocabulary, documents - 1))
        #[arg(long)]
        svd_rank: Option<usize>,
        /// Smallest cluster count tried when a stratum uses "auto"
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        /// Largest cluster count tried when a stratum uses "auto"
        #[arg(long, default_value_t = 25)]
        k_max: usize,
        /// Drop documents whose text matches this regex before sampling
        #[arg(long)]
        exclude_pattern: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), error::CliError> {
    match cli.command {
        Command::Calibrate {
            predictions,
            format,
            bins,
            out,
        } => commands::calibrate::run(&predictions, format.into(), bins, &out),
        Command::Curve {
            predictions,
            format,
            values,
            grid_step,
            per_class,
            temperature,
            out,
        } => commands::curve::run(
            &predictions,
            format.into(),
            &values,
            grid_step,
            per_class,
            temperature,
            &out,
        ),
        Command::Threshold { values, out } => commands::threshold::run(&values, &out),
        Command::Compare {
            predictions,
            format,
            values,
            grid_step,
            out,
        } => commands::compare::run(&predictions, format.into(), &values, grid_step, &out),
        Command::Survey {
            survey,
            scale,
            validity,
            alpha_metric,
            out,
        } => commands::survey::run(
            &survey,
            scale.map(Scale::from),
            validity,
            alpha_metric.into(),
            &out,
        ),
        Command::Sample {
            corpus,
            plan,
            seed,
            svd_rank,
            k_min,
            k_max,
            exclude_pattern,
            out,
        } => commands::sample::run(
            &corpus,
            &plan,
            seed,
            svd_rank,
            (k_min, k_max),
            exclude_pattern.as_deref(),
            &out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

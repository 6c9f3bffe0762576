//! `litd`: every stage of the encrypted-inference pipeline behind one binary.
#![doc = include_str!("../../../book/src/cli.md")]

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use litd::enc_infer::EncError;
use litd::profile::Profile;
use litd::proto::{ProtoError, RejectCode, Rejection};
use litd::she::SheError;

const AFTER_HELP: &str = "\
Exit codes: 0 success, 1 usage or input error, 2 verification failure, 3 noise or plaintext budget exhausted.
Settings: --config FILE holds key = value lines (profile, seed, weights, keys, server_keys, image, input_scale,
weight_scale, function, degree, interval, endpoint, listen, max_requests). Flags override the file.";

#[derive(Debug, Parser)]
#[command(name = "litd", version, about = "Encrypted CNN inference with polynomial activations", after_help = AFTER_HELP)]
pub struct Cli {
    /// Print one JSON document instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for every random choice (keys, encryption noise, nonces).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Settings file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Parameter profile: ci-4096, default-8192 or toy-1024.
    #[arg(long, global = true, env = "LITD_PROFILE")]
    pub profile: Option<Profile>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Function {
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlainActivation {
    /// Whatever the weights were trained with (ReLU if unrecorded).
    Model,
    Relu,
    Sigmoid,
    /// The polynomial from --degree, or the one stored with the weights.
    Poly,
}

/// Replaces the weights' activation polynomial with a fresh fit.
#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Function to fit when --degree is given.
    #[arg(long, value_enum)]
    pub function: Option<Function>,
    /// Degree of the fitted activation polynomial.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Fit interval as `lo,hi`, default -10,10.
    #[arg(long, allow_hyphen_values = true)]
    pub interval: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ScaleArgs {
    /// Fixed-point exponent of the pixels.
    #[arg(long)]
    pub input_scale: Option<i32>,
    /// Fixed-point exponent of weights and activation coefficients.
    #[arg(long)]
    pub weight_scale: Option<i32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a Chebyshev polynomial and write its monomial coefficients and error grid.
    Approx {
        #[arg(value_enum)]
        function: Function,
        /// 3, 5, 7 or 9.
        #[arg(value_parser = parse_table_degree)]
        degree: usize,
        /// Coefficient CSV. The error grid goes next to it as `<stem>.errors.csv`.
        out: PathBuf,
        /// Interval as `lo,hi`, default -10,10.
        #[arg(long, allow_hyphen_values = true)]
        interval: Option<String>,
        /// Error grid destination.
        #[arg(long)]
        errors: Option<PathBuf>,
        /// Points in the error grid.
        #[arg(long, default_value_t = litd::approx::REPORT_GRID_POINTS)]
        points: usize,
    },
    /// Generate a session: `client.keys` (with the secret key) and `server.keys`.
    Keygen {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Encrypt a PGM image into a cipher tensor file.
    EncryptImage {
        /// Client key file.
        #[arg(long)]
        keys: Option<PathBuf>,
        image: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        input_scale: Option<i32>,
    },
    /// Classify images in the clear.
    InferPlain {
        #[arg(long)]
        weights: Option<PathBuf>,
        images: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "model")]
        activation: PlainActivation,
        #[command(flatten)]
        fit: FitArgs,
        /// Run the fixed-point integer pipeline that encrypted inference reproduces.
        #[arg(long)]
        quantized: bool,
        #[command(flatten)]
        scales: ScaleArgs,
    },
    /// Encrypt, evaluate and decrypt one image locally.
    InferEnc {
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Client key file; fresh keys for the profile when absent.
        #[arg(long)]
        keys: Option<PathBuf>,
        image: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        scales: ScaleArgs,
        /// Per-layer timing CSV.
        #[arg(long)]
        telemetry: Option<PathBuf>,
    },
    /// Answer classification requests.
    Serve {
        /// Server key file.
        #[arg(long)]
        keys: Option<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// host:port; port 0 picks a free one.
        #[arg(long)]
        listen: Option<String>,
        /// Stop after this many connections.
        #[arg(long)]
        max_requests: Option<usize>,
        /// Largest request accepted, in bytes.
        #[arg(long, default_value_t = litd::proto::DEFAULT_MAX_FRAME)]
        max_frame: usize,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        scales: ScaleArgs,
    },
    /// Classify images through a server.
    Classify {
        /// Client key file.
        #[arg(long)]
        keys: Option<PathBuf>,
        /// host:port of the server.
        #[arg(long)]
        endpoint: Option<String>,
        images: Vec<PathBuf>,
        #[arg(long)]
        input_scale: Option<i32>,
        /// Largest response accepted, in bytes.
        #[arg(long, default_value_t = litd::proto::DEFAULT_MAX_FRAME)]
        max_frame: usize,
    },
    /// Time every layer of one encrypted inference.
    Bench {
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Client key file; fresh keys for the profile when absent.
        #[arg(long)]
        keys: Option<PathBuf>,
        image: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        scales: ScaleArgs,
        /// Evaluate only the first N plaintext lanes. Times scale linearly
        /// with lanes; the logits are not decoded.
        #[arg(long)]
        lanes: Option<usize>,
        /// Also record the lowest noise budget after every layer.
        #[arg(long)]
        budgets: bool,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_table_degree(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(d @ (3 | 5 | 7 | 9)) => Ok(d),
        _ => Err(format!("degree must be 3, 5, 7 or 9, got {s:?}")),
    }
}

/// The exit code classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Usage = 1,
    Verification = 2,
    Budget = 3,
}

impl Failure {
    pub fn name(self) -> &'static str {
        match self {
            Failure::Usage => "usage",
            Failure::Verification => "verification",
            Failure::Budget => "budget",
        }
    }
}

fn enc_failure(e: &EncError) -> Option<Failure> {
    match e {
        EncError::Headroom { .. } | EncError::Budget { .. } | EncError::PredictedBudget { .. } => Some(Failure::Budget),
        EncError::She(s) => she_failure(s),
        _ => None,
    }
}

fn she_failure(e: &SheError) -> Option<Failure> {
    matches!(e, SheError::BudgetExhausted { .. }).then_some(Failure::Budget)
}

fn rejection_failure(r: &Rejection, remote: bool) -> Failure {
    let budget = r.detail.contains("budget") || r.detail.contains("headroom");
    if remote && r.code == RejectCode::Evaluation && budget {
        Failure::Budget
    } else {
        Failure::Verification
    }
}

/// Walks the error chain for the first typed cause.
pub fn failure_of(err: &anyhow::Error) -> Failure {
    for cause in err.chain() {
        let found = if let Some(e) = cause.downcast_ref::<ProtoError>() {
            match e {
                ProtoError::Local(r) => Some(rejection_failure(r, false)),
                ProtoError::Remote(r) => Some(rejection_failure(r, true)),
                ProtoError::Enc(e) => enc_failure(e),
                ProtoError::She(e) => she_failure(e),
                _ => None,
            }
        } else if let Some(e) = cause.downcast_ref::<EncError>() {
            enc_failure(e)
        } else if let Some(e) = cause.downcast_ref::<SheError>() {
            she_failure(e)
        } else {
            cause.downcast_ref::<Rejection>().map(|r| rejection_failure(r, false))
        };
        if let Some(f) = found {
            return f;
        }
    }
    Failure::Usage
}

/// What a command prints.
pub struct Output {
    pub text: String,
    pub json: serde_json::Value,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(Failure::Usage as u8) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_millis()
        .init();
    let json = cli.json;
    match commands::run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = if json {
                writeln!(stdout, "{}", out.json)
            } else if out.text.is_empty() {
                Ok(())
            } else {
                writeln!(stdout, "{}", out.text.trim_end())
            };
            ExitCode::SUCCESS
        }
        Err(err) => {
            let failure = failure_of(&err);
            if json {
                println!(
                    "{}",
                    serde_json::json!({ "ok": false, "exit_code": failure as u8, "kind": failure.name(), "error": format!("{err:#}") })
                );
            }
            eprintln!("error: {err:#}");
            ExitCode::from(failure as u8)
        }
    }
}

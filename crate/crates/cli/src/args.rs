use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::signal::SignalFormat;

#[derive(Debug, Parser)]
#[command(name = "modalstat", version, about = "Modal-solution based response statistics", args_override_self = true)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON file whose keys mirror the long flags of the subcommand.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a sine-on-random load file.
    GenLoad(GenLoadArgs),
    /// Build and solve a lumped spring-mass chain, write its modal model.
    Eigen(EigenArgs),
    /// Field statistics and critical planes for every node of a model.
    Analyze(AnalyzeArgs),
    /// Time the modal path against the direct per-node path.
    Bench(BenchArgs),
    /// Check model and load files and the modal path against the direct path.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct GenLoadArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Output format; defaults to `bin` for a `.bin` extension, else `csv`.
    #[arg(long, value_enum)]
    pub format: Option<SignalFormat>,
    #[arg(long, default_value_t = 2000.0)]
    pub fs: f64,
    /// Seconds.
    #[arg(long, default_value_t = 120.0)]
    pub duration: f64,
    /// RMS of the Gaussian part; 0 leaves only the sweep.
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    /// Sweep amplitude; 0 leaves only the noise.
    #[arg(long, default_value_t = 22.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 150.0)]
    pub f_start: f64,
    #[arg(long, default_value_t = 300.0)]
    pub f_end: f64,
    /// Octaves per minute.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Noise pass band low edge in Hz.
    #[arg(long, default_value_t = 0.0)]
    pub band_low: f64,
    /// Noise pass band high edge in Hz (default: Nyquist).
    #[arg(long)]
    pub band_high: Option<f64>,
    /// Independent channels; channel c uses seed + c.
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Clamp {
    Both,
    Left,
    Right,
    None,
}

impl Clamp {
    pub fn ends(self) -> (bool, bool) {
        match self {
            Clamp::Both => (true, true),
            Clamp::Left => (true, false),
            Clamp::Right => (false, true),
            Clamp::None => (false, false),
        }
    }
}

#[derive(Debug, Args)]
pub struct EigenArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Number of masses of a uniform chain.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    #[arg(long, default_value_t = 7.8e5)]
    pub stiffness: f64,
    /// Explicit masses (overrides --n and --mass).
    #[arg(long, value_delimiter = ',')]
    pub masses: Option<Vec<f64>>,
    /// Explicit spring stiffnesses, left to right (overrides --stiffness).
    #[arg(long, value_delimiter = ',')]
    pub stiffnesses: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Clamp::Both)]
    pub clamp: Clamp,
    /// Retained modes.
    #[arg(long, default_value_t = 8)]
    pub modes: usize,
    #[arg(long, default_value_t = 0.05)]
    pub zeta: f64,
    /// Loaded degrees of freedom (default: both chain ends).
    #[arg(long, value_delimiter = ',')]
    pub inputs: Option<Vec<usize>>,
    /// Write stress shapes to a binary file next to the model.
    #[arg(long)]
    pub sidecar: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatArg {
    Mu2,
    Mu4,
    Mu4stat,
    C4,
    Beta,
}

impl StatArg {
    pub fn statistic(self) -> modalstat::rotation::Statistic {
        use modalstat::rotation::Statistic;
        match self {
            StatArg::Mu2 => Statistic::Mu2,
            StatArg::Mu4 => Statistic::Mu4,
            StatArg::Mu4stat => Statistic::Mu4Stat,
            StatArg::C4 => Statistic::C4,
            StatArg::Beta => Statistic::Beta,
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub loads: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Rotation increment in degrees for plane-stress nodes.
    #[arg(long, default_value_t = 2.0)]
    pub delta: f64,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [StatArg::Mu2, StatArg::Mu4, StatArg::Mu4stat, StatArg::C4, StatArg::Beta])]
    pub stats: Vec<StatArg>,
    /// Nodes listed per statistic in the summary.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Welch segment length for the spectral cross-check.
    #[arg(long, default_value_t = 4096)]
    pub segment: usize,
    /// Also run the direct per-node path and report deviations.
    #[arg(long)]
    pub validate: bool,
    /// Nodes checked by --validate (default: all), evenly spread.
    #[arg(long)]
    pub validate_nodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1000usize, 2000, 4000, 8000])]
    pub nodes: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    pub modes: usize,
    #[arg(long, default_value_t = 3)]
    pub n_sigma: usize,
    /// Base series length; a second run uses --length-factor times as many.
    #[arg(long, default_value_t = 16384)]
    pub samples: usize,
    #[arg(long, default_value_t = 8)]
    pub length_factor: usize,
    #[arg(long, default_value_t = 2.0)]
    pub delta: f64,
    /// Nodes actually run through the direct path; its total is extrapolated.
    #[arg(long, default_value_t = 20)]
    pub direct_nodes: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub loads: Option<PathBuf>,
    /// Nodes run through the direct path (default: all), evenly spread.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Maximum accepted relative deviation between the paths.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 2.0)]
    pub delta: f64,
}

const SUBCOMMANDS: [&str; 5] = ["gen-load", "eigen", "analyze", "bench", "validate"];

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn value_text(key: &str, v: &Value) -> CliResult<Option<String>> {
    Ok(match v {
        Value::Bool(true) => None,
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => {
            let parts: CliResult<Vec<String>> = items
                .iter()
                .map(|i| value_text(key, i)?.ok_or_else(|| CliError::usage(format!("config key {key}: bad list item"))))
                .collect();
            Some(parts?.join(","))
        }
        _ => return Err(CliError::usage(format!("config key {key}: unsupported value {v}"))),
    })
}

/// Flags from a config object, in key order.
pub fn config_tokens(config: &Value) -> CliResult<Vec<OsString>> {
    let obj = config.as_object().ok_or_else(|| CliError::usage("config file must hold a JSON object"))?;
    let mut out = Vec::new();
    for (key, v) in obj {
        if key == "config" || *v == Value::Bool(false) || v.is_null() {
            continue;
        }
        out.push(OsString::from(format!("--{}", key.replace('_', "-"))));
        if let Some(text) = value_text(key, v)? {
            out.push(OsString::from(text));
        }
    }
    Ok(out)
}

/// Inserts config-file flags right after the subcommand so later
/// command-line occurrences override them.
pub fn expand_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&args) else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let tokens = config_tokens(&value)?;
    let Some(pos) = args.iter().position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref())) else {
        return Ok(args);
    };
    let mut out = args[..=pos].to_vec();
    out.extend(tokens);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

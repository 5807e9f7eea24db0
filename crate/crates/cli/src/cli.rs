//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cps_core::bench::SpeckleLaw;
use cps_core::penalty::PenaltyKind;

pub const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  internal error
  2  usage or malformed config
  3  unreadable or unwritable file
  4  malformed raster, matrix or descriptor file
  5  invalid parameter, domain or shape
  6  solver divergence
  7  prox-check deviation not below 1e-5

Config files (--config PATH) hold `key = value` lines mirroring the long
flags; flags on the command line override file values.";

#[derive(Debug, Parser)]
#[command(
    name = "cps",
    version,
    about = "Cauchy proximal splitting for imaging inverse problems"
)]
#[command(after_help = EXIT_CODES)]
pub struct Cli {
    /// Read `key = value` flags from a file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Super-resolve a blurred, decimated image.
    Superres(SuperresArgs),
    /// Remove multiplicative speckle in the log-wavelet domain.
    Despeckle(DespeckleArgs),
    /// Reconstruct a scene from linear measurements.
    Form(FormArgs),
    /// Detect ship wakes in the Radon domain.
    Wake(WakeArgs),
    /// Run the seeded comparison suites.
    Bench(BenchArgs),
    /// Compare the closed-form Cauchy prox with a numerical reference.
    ProxCheck(ProxCheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Seed for generated noise, measurements and the power iteration.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "cauchy", value_parser = parse_penalty)]
    pub penalty: PenaltyKind,
    /// Cauchy scale: `auto` (√μ/2) or a value.
    #[arg(long, default_value = "auto")]
    pub gamma: String,
    /// L1 or TV weight λ.
    #[arg(long, default_value_t = 0.1)]
    pub weight: f64,
    /// Inner iterations of the TV prox.
    #[arg(long, default_value_t = cps_core::penalty::DEFAULT_TV_INNER_ITERS)]
    pub tv_iters: usize,
    /// Step size: `auto` (1.8/L), `F/L`, or a value [default: auto, despeckle 1/L].
    #[arg(long)]
    pub mu: Option<String>,
    /// Relative-change stopping tolerance.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Noise standard deviation: `auto` or a value.
    #[arg(long, default_value = "auto")]
    pub sigma: String,
    /// Observed image (.pgm or .csv).
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Scene descriptor (TOML) used to generate the observation and truth.
    #[arg(long, value_name = "PATH")]
    pub scene: Option<PathBuf>,
    /// Ground-truth image for metrics.
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
    /// Result image (.pgm or .csv).
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// JSON report path; printed to stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SuperresArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 2)]
    pub factor: usize,
    #[arg(long, default_value_t = 5)]
    pub psf_size: usize,
    #[arg(long, default_value_t = 2.0)]
    pub psf_std: f64,
    /// Blurred signal-to-noise ratio (dB) for generated scenes.
    #[arg(long, default_value_t = 30.0)]
    pub bsnr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpeckleArg {
    Gamma,
    Lognormal,
}

impl From<SpeckleArg> for SpeckleLaw {
    fn from(s: SpeckleArg) -> Self {
        match s {
            SpeckleArg::Gamma => SpeckleLaw::Gamma,
            SpeckleArg::Lognormal => SpeckleLaw::Lognormal,
        }
    }
}

#[derive(Debug, Args)]
pub struct DespeckleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Number of looks for generated speckle.
    #[arg(long, default_value_t = 5.0)]
    pub looks: f64,
    #[arg(long, value_enum, default_value_t = SpeckleArg::Gamma)]
    pub speckle: SpeckleArg,
    /// Ratio image (observation divided by estimate).
    #[arg(long, value_name = "PATH")]
    pub ratio: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FormArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Measurement matrix (CSV, one row per measurement).
    #[arg(long, value_name = "PATH", requires = "data")]
    pub matrix: Option<PathBuf>,
    /// Measurements (CSV), read in row-major order.
    #[arg(long, value_name = "PATH", requires = "matrix")]
    pub data: Option<PathBuf>,
    /// Scene shape ROWSxCOLS for matrix input [default: square].
    #[arg(long, value_parser = parse_shape)]
    pub shape: Option<(usize, usize)>,
    /// Measurements per pixel for generated scenes.
    #[arg(long, default_value_t = 0.5)]
    pub measurement_ratio: f64,
    /// Noise standard deviation for generated scenes.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Matched-filter image.
    #[arg(long, value_name = "PATH")]
    pub matched: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WakeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of projection angles over [0, 180).
    #[arg(long, default_value_t = 180)]
    pub angles: usize,
    /// Visibility threshold in robust z-units.
    #[arg(long, default_value_t = 10.0)]
    pub threshold: f64,
    /// Narrow-V search window around the turbulent angle, degrees.
    #[arg(long, default_value_t = 5.0)]
    pub narrow_v_window: f64,
    #[arg(long, default_value_t = 14.0)]
    pub kelvin_min: f64,
    #[arg(long, default_value_t = 20.0)]
    pub kelvin_max: f64,
    /// Radial search band around the turbulent offset, pixels.
    #[arg(long, default_value_t = 3.0)]
    pub offset_band: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchProblem {
    Superres,
    Despeckle,
    Form,
    Wake,
    All,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = BenchProblem::All)]
    pub problem: BenchProblem,
    /// Small scenes and grids for a fast run.
    #[arg(long)]
    pub quick: bool,
    /// TOML file with `[superres]`, `[form]`, `[despeckle]` or `[wake]` tables.
    #[arg(long, value_name = "PATH")]
    pub bench_config: Option<PathBuf>,
    /// Added to every scene seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProxCheckArgs {
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

fn parse_penalty(s: &str) -> Result<PenaltyKind, String> {
    s.parse().map_err(|e: cps_core::Error| e.to_string())
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got '{s}'"))?;
    let dim = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad dimension '{v}'"))
    };
    Ok((dim(r)?, dim(c)?))
}

//! `traderank` command-line front end.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use traderank::rank::RankError;
use traderank::IngestError;

#[derive(Parser)]
#[command(
    name = "traderank",
    version,
    about = "Google matrix ranking of trade networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// PageRank, CheiRank, 2DRank, ImportRank and ExportRank of one snapshot.
    Rank(RankArgs),
    /// Complex eigenvalue spectrum of G.
    Spectrum(SpectrumArgs),
    /// Density of countries in the (K*-K, K*+K) plane over a range of years.
    Spindle(SpindleArgs),
    /// Year-over-year rank velocities.
    Velocity(VelocityArgs),
    /// PageRank-CheiRank and ImportRank-ExportRank correlators per year.
    Correlator(CorrelatorArgs),
    /// Countries, links and total mass per year.
    Summary(SummaryArgs),
    /// Ensembles of the random matrix trade model.
    Rmwtn(RmwtnArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Inclusive range of years, written `Y` or `Y-Y2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct YearRange {
    pub first: i32,
    pub last: i32,
}

impl FromStr for YearRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| {
            t.trim()
                .parse::<i32>()
                .map_err(|_| format!("bad year {t:?}"))
        };
        let (first, last) = match s.split_once('-') {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let y = parse(s)?;
                (y, y)
            }
        };
        if first > last {
            return Err(format!("empty year range {s}"));
        }
        Ok(Self { first, last })
    }
}

/// `A:B` pair of integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Span(pub usize, pub usize);

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected A:B, got {s:?}"))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad integer {t:?}"))
        };
        Ok(Span(parse(a)?, parse(b)?))
    }
}

/// `WxH` cell size in ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Cell(pub usize, pub usize);

impl FromStr for Cell {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad integer {t:?}"))
        };
        let cell = Cell(parse(a)?, parse(b)?);
        if cell.0 == 0 || cell.1 == 0 {
            return Err("cell dimensions must be positive".into());
        }
        Ok(cell)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Flow CSV files (`year,commodity,exporter,importer,value_usd`).
    #[arg(long, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Import-side flow CSV files used to fill flows missing on the export side.
    #[arg(long, num_args = 1..)]
    pub imports: Vec<PathBuf>,
    /// Year or inclusive range `Y-Y2`; defaults to every year in the data.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub year: Option<YearRange>,
    #[arg(long, default_value = "TOTAL")]
    pub commodity: String,
    /// Damping factor in (0, 1].
    #[arg(long, default_value_t = traderank::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Power-iteration tolerance on the l1 residual.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Record wall-clock timings in the metadata sidecar (makes it
    /// run-dependent).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RankArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Rows in the top excerpt.
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    /// Rank range `A:B` for power-law fits of the four rank vectors.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_range: Option<Span>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Distance from the unit circle below which undamped eigenvalues are
    /// reported as quasi-degenerate.
    #[arg(long, default_value_t = 0.02)]
    pub gap: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Binning {
    /// Cell size for the raw (K*-K, K*+K) plane.
    #[arg(long, default_value = "3x3")]
    pub cell: Cell,
    /// Bin ((K*-K)/N, (K*+K)/N) on the 76x152 grid instead.
    #[arg(long)]
    pub rescale: bool,
}

impl Binning {
    pub fn to_core(&self) -> traderank::analysis::Binning {
        if self.rescale {
            traderank::analysis::Binning::Rescaled
        } else {
            traderank::analysis::Binning::Raw {
                width: self.cell.0,
                height: self.cell.1,
            }
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SpindleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub binning: Binning,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VelocityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Comma-separated inclusive K+K* bands.
    #[arg(long, value_delimiter = ',', default_value = "1:40,41:80,81:120")]
    pub bands: Vec<Span>,
    /// Averaging window in years.
    #[arg(long, default_value_t = 5)]
    pub window: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CorrelatorArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SummaryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Pair,
    Shared,
    Two,
}

impl From<VariantArg> for traderank::Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Pair => traderank::Variant::PerElementPair,
            VariantArg::Shared => traderank::Variant::SharedVector,
            VariantArg::Two => traderank::Variant::TwoVectors,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RmwtnArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Number of countries.
    #[arg(long, default_value_t = 227)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub realizations: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Pair)]
    pub variant: VariantArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub binning: Binning,
    /// ImportRank range `A:B` for the Zipf fit; defaults to the top half.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_range: Option<Span>,
}

/// Bad input: unreadable files, malformed data, invalid options.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(RankError::NotConverged { .. }) = cause.downcast_ref::<RankError>() {
            return 3;
        }
        if let Some(traderank::Error::Rank(RankError::NotConverged { .. })) =
            cause.downcast_ref::<traderank::Error>()
        {
            return 3;
        }
    }
    for cause in err.chain() {
        if cause.is::<InputError>()
            || cause.is::<IngestError>()
            || matches!(
                cause.downcast_ref::<traderank::Error>(),
                Some(traderank::Error::Ingest(_))
            )
        {
            return 2;
        }
    }
    1
}

fn worker_threads() -> anyhow::Result<Option<usize>> {
    match std::env::var("TRADERANK_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(InputError(format!(
                "TRADERANK_THREADS must be a positive integer, got {v:?}"
            ))
            .into()),
        },
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_threads()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| match cli.command {
        Command::Rank(a) => commands::rank(&a),
        Command::Spectrum(a) => commands::spectrum(&a),
        Command::Spindle(a) => commands::spindle(&a),
        Command::Velocity(a) => commands::velocity(&a),
        Command::Correlator(a) => commands::correlators(&a),
        Command::Summary(a) => commands::summary(&a),
        Command::Rmwtn(a) => commands::rmwtn(&a),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

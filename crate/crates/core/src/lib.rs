//! Google matrix ranking of weighted directed flow networks.
//!
//! The crate turns yearly trade-flow records into a money matrix `M`
//! (`M[i][j]` is the flow from country `j` to country `i`), builds the
//! column-stochastic Google matrices for the direct and the inverted flow
//! network, and derives from them:
//!
//! * PageRank `K` and CheiRank `K*` orderings, their 2DRank `K2` combination,
//!   and the mass-based ImportRank / ExportRank orderings ([`rank`]);
//! * the full complex spectrum of `G` with the damping-scaling check and
//!   quasi-degenerate mode detection ([`spectrum`]);
//! * power-law fits, correlators, spindle-plane histograms and rank
//!   velocities ([`analysis`]);
//! * synthetic money matrices from a random matrix model of the trade
//!   network ([`rmwtn`]).

pub mod analysis;
pub mod google_matrix;
pub mod numeric;
pub mod rank;
pub mod rmwtn;
pub mod spectrum;
pub mod trade_graph;

pub use analysis::AnalysisError;
pub use google_matrix::{Direction, GoogleMatrix, MatrixError, StochasticMatrix};
pub use rank::{PowerIteration, RankError, RankKind, RankTable, RankVector};
pub use rmwtn::{RmwtnConfig, Variant};
pub use spectrum::{Spectrum, SpectrumError};
pub use trade_graph::{CountryRegistry, IngestError, MoneyMatrix, TradeFlowRecord};

/// Default damping factor used for ranking.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Any error produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

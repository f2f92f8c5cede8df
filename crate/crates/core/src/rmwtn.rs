//! Random matrix model of the world trade network.
//!
//! `M_ij = ε_i ε_j / (i j)` with `ε` uniform on `[0, 1)` and `i, j = 1..N`
//! the ImportRank positions. The formula admits three readings, selected by
//! [`Variant`]. The diagonal is always zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::SpindlePoint;
use crate::rank::{rank_snapshot, PowerIteration, RankError};
use crate::trade_graph::{CountryRegistry, MoneyMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Fresh `u_ij, v_ij` for every element: `M_ij = u_ij v_ij / (i j)`.
    #[default]
    PerElementPair,
    /// One vector: `M_ij = ε_i ε_j / (i j)`, exactly symmetric.
    SharedVector,
    /// Two independent vectors: `M_ij = ε_i ε'_j / (i j)`.
    TwoVectors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RmwtnConfig {
    pub n: usize,
    pub seed: u64,
    pub variant: Variant,
}

impl RmwtnConfig {
    pub fn new(n: usize, seed: u64, variant: Variant) -> Self {
        assert!(n >= 2, "model needs at least two countries");
        Self { n, seed, variant }
    }
}

/// Country codes `R001, R002, ...`: code order is index order.
pub fn model_registry(n: usize) -> CountryRegistry {
    let width = n.to_string().len().max(3);
    CountryRegistry::from_codes((1..=n).map(|i| format!("R{i:0width$}")))
}

/// Draws one money matrix. Deterministic in the config.
pub fn generate(cfg: &RmwtnConfig) -> MoneyMatrix {
    let n = cfg.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut values = vec![0.0; n * n];
    let index = |i: usize| (i + 1) as f64;

    match cfg.variant {
        Variant::PerElementPair => {
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let u: f64 = rng.random();
                    let v: f64 = rng.random();
                    values[i * n + j] = u * v / (index(i) * index(j));
                }
            }
        }
        Variant::SharedVector | Variant::TwoVectors => {
            let eps: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let eps2: Vec<f64> = if cfg.variant == Variant::TwoVectors {
                (0..n).map(|_| rng.random()).collect()
            } else {
                eps.clone()
            };
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        values[i * n + j] = eps[i] * eps2[j] / (index(i) * index(j));
                    }
                }
            }
        }
    }
    MoneyMatrix::from_dense(model_registry(n), values, 0, "RMWTN").expect("valid by construction")
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of realization `r`: `splitmix64(base + (r + 1) · φ)` with `φ` the
/// 64-bit golden-ratio increment.
pub fn realization_seed(base_seed: u64, realization: usize) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    splitmix64(base_seed.wrapping_add(GOLDEN.wrapping_mul(realization as u64 + 1)))
}

/// Ranks of one synthetic network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Realization {
    pub index: usize,
    pub seed: u64,
    pub n: usize,
    /// `(code, K, K*)`, by node id.
    pub ranks: Vec<(String, usize, usize)>,
    /// ImportRank probabilities sorted by rank.
    pub import_by_rank: Vec<f64>,
}

impl Realization {
    pub fn spindle_points(&self) -> impl Iterator<Item = SpindlePoint> + '_ {
        self.ranks.iter().map(|&(_, k, k_star)| SpindlePoint {
            k,
            k_star,
            n: self.n,
        })
    }
}

/// Generates and ranks `realizations` independent matrices in parallel on
/// the current rayon pool. Output is ordered by realization index.
pub fn ensemble_run(
    cfg: &RmwtnConfig,
    realizations: usize,
    alpha: f64,
    opts: PowerIteration,
) -> Result<Vec<Realization>, RankError> {
    (0..realizations)
        .into_par_iter()
        .map(|index| {
            let seed = realization_seed(cfg.seed, index);
            let m = generate(&RmwtnConfig { seed, ..*cfg });
            let snap = rank_snapshot(&m, alpha, opts)?;
            let ranks = (0..m.n())
                .map(|i| {
                    (
                        m.registry().code(i).to_string(),
                        snap.pagerank.ranks()[i],
                        snap.cheirank.ranks()[i],
                    )
                })
                .collect();
            Ok(Realization {
                index,
                seed,
                n: m.n(),
                ranks,
                import_by_rank: snap.import.by_rank(),
            })
        })
        .collect()
}

/// Combined `realization,code,K,Kstar` CSV.
pub fn write_ensemble_csv<W: std::io::Write>(
    runs: &[Realization],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "realization,code,K,Kstar")?;
    for r in runs {
        for (code, k, k_star) in &r.ranks {
            writeln!(out, "{},{code},{k},{k_star}", r.index)?;
        }
    }
    Ok(())
}

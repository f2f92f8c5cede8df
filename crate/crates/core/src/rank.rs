//! PageRank, CheiRank, 2DRank and mass-based ImportRank / ExportRank.
//!
//! Orderings put the most probable node first. Equal probabilities are
//! broken by ascending node id, which is ascending country code because
//! registries are code-sorted.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::google_matrix::{Direction, GoogleMatrix, MatrixError};
use crate::numeric::sum;
use crate::trade_graph::{mass_vectors, MoneyMatrix};

#[derive(Debug, thiserror::Error)]
pub enum RankError {
    #[error("power iteration did not converge in {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("total mass is zero")]
    ZeroMass,
    #[error("rank vectors do not cover the same node set: {0}")]
    NodeMismatch(String),
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankKind {
    PageRank,
    CheiRank,
    Import,
    Export,
}

/// A probability vector together with the ordering it induces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankVector {
    kind: RankKind,
    probabilities: Vec<f64>,
    /// `order[r]` is the node at rank `r + 1`.
    order: Vec<usize>,
    /// `ranks[i]` is the 1-based rank of node `i`.
    ranks: Vec<usize>,
    iterations: usize,
    residual: f64,
}

impl RankVector {
    pub fn from_probabilities(kind: RankKind, probabilities: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..probabilities.len()).collect();
        order.sort_by(|&a, &b| {
            probabilities[b]
                .total_cmp(&probabilities[a])
                .then(a.cmp(&b))
        });
        let mut ranks = vec![0; order.len()];
        for (r, &node) in order.iter().enumerate() {
            ranks[node] = r + 1;
        }
        Self {
            kind,
            probabilities,
            order,
            ranks,
            iterations: 0,
            residual: 0.0,
        }
    }

    pub fn kind(&self) -> RankKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Probability of each node, indexed by node id.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Node ids from rank 1 downwards.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// 1-based rank of each node.
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Probabilities sorted by rank: `P(K)` for `K = 1..N`.
    pub fn by_rank(&self) -> Vec<f64> {
        self.order.iter().map(|&i| self.probabilities[i]).collect()
    }

    /// Matrix-vector products used; zero for mass ranks.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `‖G v − v‖₁` at the returned vector; zero for mass ranks.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Power-iteration stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIteration {
    /// Threshold on the ℓ₁ residual `‖G v − v‖₁`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 1000,
        }
    }
}

/// Stationary vector of `G` by power iteration from the uniform vector.
///
/// Returns the first iterate `v` with `‖G v − v‖₁ < tol`.
pub fn pagerank(g: &GoogleMatrix, opts: PowerIteration) -> Result<RankVector, RankError> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(RankError::Tolerance(opts.tol));
    }
    let n = g.n();
    let kind = match g.direction() {
        Direction::Direct => RankKind::PageRank,
        Direction::Inverted => RankKind::CheiRank,
    };
    if n == 0 {
        return Ok(RankVector::from_probabilities(kind, Vec::new()));
    }

    let mut v = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for step in 1..=opts.max_iter {
        let mut next = g.matvec(&v)?;
        residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        if residual < opts.tol {
            let mut out = RankVector::from_probabilities(kind, v);
            out.iterations = step;
            out.residual = residual;
            return Ok(out);
        }
        let total = sum(&next);
        next.iter_mut().for_each(|x| *x /= total);
        v = next;
    }
    Err(RankError::NotConverged {
        iterations: opts.max_iter,
        residual,
    })
}

/// PageRank of the flow-inverted Google matrix `G*` at the same damping.
pub fn cheirank(
    m: &MoneyMatrix,
    alpha: f64,
    opts: PowerIteration,
) -> Result<RankVector, RankError> {
    let g = GoogleMatrix::from_money(m, alpha, Direction::Inverted)?;
    pagerank(&g, opts)
}

/// Which trade mass a [`mass_rank`] is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassSide {
    Import,
    Export,
}

/// ImportRank (`m_i / M_T` over import masses) or ExportRank.
pub fn mass_rank(m: &MoneyMatrix, side: MassSide) -> Result<RankVector, RankError> {
    let mass = mass_vectors(m);
    if mass.total.is_nan() || mass.total <= 0.0 {
        return Err(RankError::ZeroMass);
    }
    let (kind, values) = match side {
        MassSide::Import => (RankKind::Import, mass.import),
        MassSide::Export => (RankKind::Export, mass.export),
    };
    let probabilities = values.iter().map(|v| v / mass.total).collect();
    Ok(RankVector::from_probabilities(kind, probabilities))
}

fn check_permutation(ranks: &[usize], name: &str) -> Result<(), RankError> {
    let n = ranks.len();
    let mut seen = vec![false; n];
    for &r in ranks {
        if r == 0 || r > n || std::mem::replace(&mut seen[r - 1], true) {
            return Err(RankError::NodeMismatch(format!(
                "{name} is not a permutation of 1..{n}"
            )));
        }
    }
    Ok(())
}

/// 2DRank: orders nodes by the first `K×K` square of the `(K, K*)` plane
/// that contains them.
///
/// Inputs are 1-based ranks indexed by node id. Nodes entering the same
/// square are ordered by `min(K, K*)`, then by node id. Returns the 1-based
/// `K2` of each node.
pub fn two_d_rank(k: &[usize], k_star: &[usize]) -> Result<Vec<usize>, RankError> {
    if k.len() != k_star.len() {
        return Err(RankError::NodeMismatch(format!(
            "{} PageRank entries vs {} CheiRank entries",
            k.len(),
            k_star.len()
        )));
    }
    check_permutation(k, "K")?;
    check_permutation(k_star, "K*")?;

    let mut nodes: Vec<usize> = (0..k.len()).collect();
    nodes.sort_by_key(|&i| (k[i].max(k_star[i]), k[i].min(k_star[i]), i));
    let mut k2 = vec![0; k.len()];
    for (r, &node) in nodes.iter().enumerate() {
        k2[node] = r + 1;
    }
    Ok(k2)
}

/// One country's row of a [`RankTable`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRow {
    pub code: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "Kstar")]
    pub k_star: usize,
    #[serde(rename = "K2")]
    pub k2: usize,
    #[serde(rename = "Kimport")]
    pub k_import: usize,
    #[serde(rename = "Kexport")]
    pub k_export: usize,
}

/// All five orderings of one `(year, commodity)` snapshot, rows sorted by `K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankTable {
    pub year: i32,
    pub commodity: String,
    pub rows: Vec<RankRow>,
}

impl RankTable {
    /// Assembles the table from the individual rank vectors; `codes[i]`
    /// names node `i`.
    pub fn assemble(
        year: i32,
        commodity: &str,
        codes: &[&str],
        pagerank: &RankVector,
        cheirank: &RankVector,
        import: &RankVector,
        export: &RankVector,
    ) -> Result<Self, RankError> {
        let k2 = two_d_rank(pagerank.ranks(), cheirank.ranks())?;
        let rows = pagerank
            .order()
            .iter()
            .map(|&i| RankRow {
                code: codes[i].to_string(),
                k: pagerank.ranks()[i],
                k_star: cheirank.ranks()[i],
                k2: k2[i],
                k_import: import.ranks()[i],
                k_export: export.ranks()[i],
            })
            .collect();
        Ok(Self {
            year,
            commodity: commodity.to_string(),
            rows,
        })
    }

    /// The first `k` rows (by PageRank).
    pub fn top(&self, k: usize) -> RankTable {
        RankTable {
            year: self.year,
            commodity: self.commodity.clone(),
            rows: self.rows.iter().take(k).cloned().collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), RankError> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(["code", "K", "Kstar", "K2", "Kimport", "Kexport"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rank table serializes")
    }
}

/// Every rank vector of one snapshot plus the assembled table.
#[derive(Debug, Clone)]
pub struct RankSnapshot {
    pub pagerank: RankVector,
    pub cheirank: RankVector,
    pub import: RankVector,
    pub export: RankVector,
    pub table: RankTable,
}

pub fn rank_snapshot(
    m: &MoneyMatrix,
    alpha: f64,
    opts: PowerIteration,
) -> Result<RankSnapshot, RankError> {
    let g = GoogleMatrix::from_money(m, alpha, Direction::Direct)?;
    let pagerank = pagerank(&g, opts)?;
    let cheirank = cheirank(m, alpha, opts)?;
    let import = mass_rank(m, MassSide::Import)?;
    let export = mass_rank(m, MassSide::Export)?;
    let codes: Vec<&str> = m.registry().codes().collect();
    let table = RankTable::assemble(
        m.year(),
        m.commodity(),
        &codes,
        &pagerank,
        &cheirank,
        &import,
        &export,
    )?;
    Ok(RankSnapshot {
        pagerank,
        cheirank,
        import,
        export,
        table,
    })
}

/// All five rank columns of one snapshot.
pub fn rank_table(
    m: &MoneyMatrix,
    alpha: f64,
    opts: PowerIteration,
) -> Result<RankTable, RankError> {
    rank_snapshot(m, alpha, opts).map(|s| s.table)
}

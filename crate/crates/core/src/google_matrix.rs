//! Column-stochastic matrices and the damped Google matrix.
//!
//! `S_ij = M_ij / m_j` where `m_j` is the outgoing mass of column `j`;
//! a column with zero mass is replaced by the uniform column `1/N`.
//! The Google matrix is `G = α S + (1 − α)/N`, kept as `S` plus `α` and
//! never materialized unless asked for.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::numeric::{sum, CompensatedSum};
use crate::trade_graph::MoneyMatrix;

#[derive(Debug, thiserror::Error)]
pub enum MatrixError {
    #[error("damping factor {0} outside (0, 1]")]
    Alpha(f64),
    #[error("dimension mismatch: matrix is {expected}x{expected}, vector has {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which flow direction the stochastic matrix follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Links follow money: PageRank.
    Direct,
    /// Links reversed: CheiRank.
    Inverted,
}

/// Dense column-major stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    n: usize,
    columns: Vec<f64>,
    dangling: Vec<bool>,
}

impl StochasticMatrix {
    /// Normalizes the columns of `M` (direct) or of `Mᵀ` (inverted).
    pub fn from_money(m: &MoneyMatrix, direction: Direction) -> Self {
        let n = m.n();
        let element = |i: usize, j: usize| match direction {
            Direction::Direct => m.get(i, j),
            Direction::Inverted => m.get(j, i),
        };
        let mut columns = vec![0.0; n * n];
        let mut dangling = vec![false; n];
        for j in 0..n {
            let col = &mut columns[j * n..(j + 1) * n];
            let mut mass = CompensatedSum::new();
            for (i, c) in col.iter_mut().enumerate() {
                *c = element(i, j);
                mass.add(*c);
            }
            let mass = mass.value();
            if mass > 0.0 {
                col.iter_mut().for_each(|c| *c /= mass);
            } else {
                col.fill(1.0 / n as f64);
                dangling[j] = true;
            }
        }
        Self {
            n,
            columns,
            dangling,
        }
    }

    /// Wraps column-major data, normalizing each column; all-zero columns
    /// become uniform. Panics on negative or non-finite input.
    pub fn from_columns(n: usize, mut columns: Vec<f64>) -> Self {
        assert_eq!(columns.len(), n * n);
        assert!(columns.iter().all(|c| c.is_finite() && *c >= 0.0));
        let mut dangling = vec![false; n];
        for j in 0..n {
            let col = &mut columns[j * n..(j + 1) * n];
            let mass = sum(col);
            if mass > 0.0 {
                col.iter_mut().for_each(|c| *c /= mass);
            } else {
                col.fill(1.0 / n as f64);
                dangling[j] = true;
            }
        }
        Self {
            n,
            columns,
            dangling,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.columns[j * self.n + i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.n..(j + 1) * self.n]
    }

    /// Columns that had zero mass before normalization.
    pub fn dangling_mask(&self) -> &[bool] {
        &self.dangling
    }

    pub fn trace(&self) -> f64 {
        (0..self.n)
            .map(|i| self.get(i, i))
            .collect::<CompensatedSum>()
            .value()
    }
}

/// `G = α S + (1 − α)/N`, with the rank-one term applied implicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct GoogleMatrix {
    s: StochasticMatrix,
    alpha: f64,
    direction: Direction,
}

impl GoogleMatrix {
    pub fn new(s: StochasticMatrix, alpha: f64) -> Result<Self, MatrixError> {
        Self::with_direction(s, alpha, Direction::Direct)
    }

    pub fn with_direction(
        s: StochasticMatrix,
        alpha: f64,
        direction: Direction,
    ) -> Result<Self, MatrixError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(MatrixError::Alpha(alpha));
        }
        Ok(Self {
            s,
            alpha,
            direction,
        })
    }

    /// Builds `G` (direct) or `G*` (inverted) straight from a money matrix.
    pub fn from_money(
        m: &MoneyMatrix,
        alpha: f64,
        direction: Direction,
    ) -> Result<Self, MatrixError> {
        Self::with_direction(StochasticMatrix::from_money(m, direction), alpha, direction)
    }

    pub fn n(&self) -> usize {
        self.s.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn stochastic(&self) -> &StochasticMatrix {
        &self.s
    }

    /// Same `S` with a different damping factor.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self, MatrixError> {
        Self::with_direction(self.s.clone(), alpha, self.direction)
    }

    #[inline]
    fn teleport(&self) -> f64 {
        (1.0 - self.alpha) / self.s.n as f64
    }

    /// Effective element `α S_ij + (1 − α)/N`.
    #[inline]
    pub fn element(&self, i: usize, j: usize) -> f64 {
        if self.alpha == 1.0 {
            self.s.get(i, j)
        } else {
            self.alpha * self.s.get(i, j) + self.teleport()
        }
    }

    /// Dense effective matrix, row-major.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.s.n;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.element(i, j));
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        if self.alpha == 1.0 {
            self.s.trace()
        } else {
            self.alpha * self.s.trace() + (1.0 - self.alpha)
        }
    }

    /// `G v = α S v + (1 − α)/N · Σv`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, MatrixError> {
        let n = self.s.n;
        if v.len() != n {
            return Err(MatrixError::Dimension {
                expected: n,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; n];
        for (j, &vj) in v.iter().enumerate() {
            if vj == 0.0 {
                continue;
            }
            for (o, &s) in out.iter_mut().zip(self.s.column(j)) {
                *o += s * vj;
            }
        }
        if self.alpha < 1.0 {
            let shift = self.teleport() * sum(v);
            for o in &mut out {
                *o = self.alpha * *o + shift;
            }
        }
        Ok(out)
    }

    /// Writes the dense effective matrix as CSV, row-major, 17 significant digits.
    pub fn write_dense_csv<W: Write>(&self, mut out: W) -> Result<(), MatrixError> {
        let n = self.s.n;
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| format!("{:.16e}", self.element(i, j)))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

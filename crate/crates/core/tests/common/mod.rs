//! Reference implementations and generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use traderank::MoneyMatrix;

/// Random money matrix with zero diagonal; each off-diagonal flow is absent
/// with probability `sparsity`.
pub fn random_money<R: Rng>(rng: &mut R, n: usize, sparsity: f64) -> MoneyMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            if i != j && rng.random::<f64>() >= sparsity {
                *cell = rng.random_range(0.01..10.0);
            }
        }
    }
    MoneyMatrix::from_rows(&rows).unwrap()
}

/// Column-stochastic matrix built by hand from a money matrix, row-major.
pub fn dense_stochastic(m: &MoneyMatrix) -> Vec<f64> {
    let n = m.n();
    let mut s = vec![0.0; n * n];
    for j in 0..n {
        let mut mass = 0.0;
        for i in 0..n {
            mass += m.get(i, j);
        }
        for i in 0..n {
            s[i * n + j] = if mass > 0.0 {
                m.get(i, j) / mass
            } else {
                1.0 / n as f64
            };
        }
    }
    s
}

/// Full Google matrix `α S + (1 − α)/N`, row-major.
pub fn dense_google(m: &MoneyMatrix, alpha: f64) -> Vec<f64> {
    let n = m.n() as f64;
    dense_stochastic(m)
        .into_iter()
        .map(|s| alpha * s + (1.0 - alpha) / n)
        .collect()
}

pub fn dense_matvec(a: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum())
        .collect()
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
            .unwrap();
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row * n + row];
    }
    x
}

/// Stationary vector from `(I − α S) p = (1 − α)/N · 1`.
pub fn pagerank_by_solve(m: &MoneyMatrix, alpha: f64) -> Vec<f64> {
    let n = m.n();
    let s = dense_stochastic(m);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = if i == j { 1.0 } else { 0.0 } - alpha * s[i * n + j];
        }
    }
    let p = solve(a, vec![(1.0 - alpha) / n as f64; n]);
    let total: f64 = p.iter().sum();
    p.into_iter().map(|x| x / total).collect()
}

/// 2DRank by sweeping squares `1..=N` of the `(K, K*)` plane and walking the
/// newly added boundary outward from the axes.
pub fn two_d_rank_sweep(k: &[usize], k_star: &[usize]) -> Vec<usize> {
    let n = k.len();
    let mut k2 = vec![0; n];
    let mut next = 1;
    for s in 1..=n {
        for t in 1..=s {
            let mut hits: Vec<usize> = (0..n)
                .filter(|&i| (k[i] == t && k_star[i] == s) || (k[i] == s && k_star[i] == t))
                .collect();
            hits.sort_unstable();
            for i in hits {
                k2[i] = next;
                next += 1;
            }
        }
    }
    k2
}

pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (1..=n).collect();
    p.shuffle(rng);
    p
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Spearman rank correlation of two samples without ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        for (pos, i) in idx.into_iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn load_fixture(name: &str, year: i32, commodity: &str) -> MoneyMatrix {
    let file = std::fs::File::open(fixture(name)).unwrap();
    traderank::trade_graph::load_flows(file, year, commodity).unwrap()
}

//! Complex spectrum of the Google matrix.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::google_matrix::{GoogleMatrix, MatrixError, StochasticMatrix};

/// Largest matrix accepted by [`full_spectrum`].
pub const MAX_DENSE_N: usize = 5000;

/// Tolerance of the damping-scaling check.
pub const ALPHA_SCALING_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum SpectrumError {
    #[error("matrix size {0} exceeds the dense eigensolver limit of {MAX_DENSE_N}")]
    TooLarge(usize),
    #[error("eigensolver failed: {0}")]
    Solver(String),
    #[error("damping scaling violated: max mismatch {max_mismatch:e} at alpha {alpha}")]
    ScalingMismatch { alpha: f64, max_mismatch: f64 },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// All eigenvalues of a Google matrix, by descending modulus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub alpha: f64,
    pub year: Option<i32>,
    pub commodity: Option<String>,
    pub eigenvalues: Vec<Complex64>,
}

fn sort_eigenvalues(values: &mut [Complex64]) {
    values.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
}

fn ensure_dense_size(n: usize) -> Result<(), SpectrumError> {
    if n > MAX_DENSE_N {
        return Err(SpectrumError::TooLarge(n));
    }
    Ok(())
}

/// Dense eigensolve of the effective matrix `α S + (1 − α)/N`.
pub fn full_spectrum(g: &GoogleMatrix) -> Result<Spectrum, SpectrumError> {
    let n = g.n();
    ensure_dense_size(n)?;
    let mut eigenvalues = if n == 0 {
        Vec::new()
    } else {
        let dense = faer::Mat::<f64>::from_fn(n, n, |i, j| g.element(i, j));
        dense
            .eigenvalues()
            .map_err(|e| SpectrumError::Solver(format!("{e:?}")))?
    };
    sort_eigenvalues(&mut eigenvalues);
    Ok(Spectrum {
        alpha: g.alpha(),
        year: None,
        commodity: None,
        eigenvalues,
    })
}

impl Spectrum {
    pub fn with_tags(mut self, year: i32, commodity: impl Into<String>) -> Self {
        self.year = Some(year);
        self.commodity = Some(commodity.into());
        self
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn leading(&self) -> Option<Complex64> {
        self.eigenvalues.first().copied()
    }

    pub fn sum(&self) -> Complex64 {
        let re = crate::numeric::sum(&self.eigenvalues.iter().map(|z| z.re).collect::<Vec<_>>());
        let im = crate::numeric::sum(&self.eigenvalues.iter().map(|z| z.im).collect::<Vec<_>>());
        Complex64::new(re, im)
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.im.abs())
            .fold(0.0, f64::max)
    }

    /// Largest distance from an eigenvalue's conjugate to the nearest
    /// eigenvalue in the spectrum.
    pub fn conjugate_asymmetry(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| {
                let c = z.conj();
                self.eigenvalues
                    .iter()
                    .map(|w| (w - c).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    /// Eigenvalues with `|λ| > 1 − gap_threshold`.
    pub fn quasi_degenerate(&self, gap_threshold: f64) -> Vec<Complex64> {
        detect_quasi_degenerate(self, gap_threshold)
    }

    /// `re,im` rows with a header, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), SpectrumError> {
        writeln!(out, "re,im")?;
        for z in &self.eigenvalues {
            writeln!(out, "{:.16e},{:.16e}", z.re, z.im)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            alpha: f64,
            year: Option<i32>,
            commodity: Option<&'a str>,
            n: usize,
            eigenvalues: Vec<[f64; 2]>,
        }
        serde_json::to_string_pretty(&Out {
            alpha: self.alpha,
            year: self.year,
            commodity: self.commodity.as_deref(),
            n: self.len(),
            eigenvalues: self.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
        })
        .expect("spectrum serializes")
    }
}

/// Eigenvalues within `gap_threshold` of the unit circle.
///
/// Meant for spectra at `α = 1`, where such modes mark slowly relaxing,
/// nearly isolated parts of the network.
pub fn detect_quasi_degenerate(sp: &Spectrum, gap_threshold: f64) -> Vec<Complex64> {
    sp.eigenvalues
        .iter()
        .copied()
        .filter(|z| z.norm() > 1.0 - gap_threshold)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaScalingReport {
    pub alpha: f64,
    pub max_mismatch: f64,
}

/// Greedy nearest-neighbour pairing; returns the largest pair distance.
fn greedy_mismatch(expected: &[Complex64], actual: &[Complex64]) -> f64 {
    let mut used = vec![false; actual.len()];
    let mut worst = 0.0f64;
    for e in expected {
        let (best, dist) = actual
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, a)| (k, (a - e).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("spectra have equal length");
        used[best] = true;
        worst = worst.max(dist);
    }
    worst
}

/// Checks that damping keeps the eigenvalue 1 and multiplies every other
/// eigenvalue of `S` by `alpha`.
///
/// Compares the spectrum of `α S + (1 − α)/N` with `{1} ∪ {α λ}` built from
/// the undamped spectrum minus its eigenvalue closest to 1.
pub fn verify_alpha_scaling(
    s: &StochasticMatrix,
    alpha: f64,
) -> Result<AlphaScalingReport, SpectrumError> {
    let undamped = full_spectrum(&GoogleMatrix::new(s.clone(), 1.0)?)?;
    if alpha == 1.0 {
        let again = full_spectrum(&GoogleMatrix::new(s.clone(), 1.0)?)?;
        let max_mismatch = greedy_mismatch(&undamped.eigenvalues, &again.eigenvalues);
        return check_scaling(alpha, max_mismatch);
    }
    let damped = full_spectrum(&GoogleMatrix::new(s.clone(), alpha)?)?;

    let one = Complex64::new(1.0, 0.0);
    let mut expected = undamped.eigenvalues.clone();
    if let Some(lead) = expected
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - one).norm().total_cmp(&(b.1 - one).norm()))
        .map(|(k, _)| k)
    {
        expected.remove(lead);
    }
    expected.iter_mut().for_each(|z| *z *= alpha);
    expected.push(one);
    sort_eigenvalues(&mut expected);
    check_scaling(alpha, greedy_mismatch(&expected, &damped.eigenvalues))
}

fn check_scaling(alpha: f64, max_mismatch: f64) -> Result<AlphaScalingReport, SpectrumError> {
    if max_mismatch < ALPHA_SCALING_TOL {
        Ok(AlphaScalingReport {
            alpha,
            max_mismatch,
        })
    } else {
        Err(SpectrumError::ScalingMismatch {
            alpha,
            max_mismatch,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize, cols: Vec<f64>, alpha: f64) -> GoogleMatrix {
        GoogleMatrix::new(StochasticMatrix::from_columns(n, cols), alpha).unwrap()
    }

    #[test]
    fn uniform_rank_one() {
        let n = 6;
        let sp = full_spectrum(&g(n, vec![1.0; n * n], 1.0)).unwrap();
        assert!((sp.eigenvalues[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        for z in &sp.eigenvalues[1..] {
            assert!(z.norm() < 1e-12);
        }
        assert_eq!(sp.quasi_degenerate(0.01).len(), 1);
    }

    #[test]
    fn swap_matrix_spectrum() {
        let sp = full_spectrum(&g(2, vec![0.0, 1.0, 1.0, 0.0], 1.0)).unwrap();
        assert!((sp.eigenvalues[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((sp.eigenvalues[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn sorted_by_modulus_then_real_part() {
        // 3-cycle: cube roots of unity, all of modulus 1.
        let sp = full_spectrum(&g(
            3,
            vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            1.0,
        ))
        .unwrap();
        assert!((sp.eigenvalues[0].re - 1.0).abs() < 1e-12);
        assert!(sp.eigenvalues[1].im > 0.0);
        assert!(sp.eigenvalues[2].im < 0.0);
        assert!(sp.conjugate_asymmetry() < 1e-12);
    }

    #[test]
    fn alpha_scaling_trivial_cases() {
        let s = StochasticMatrix::from_columns(4, vec![1.0; 16]);
        assert_eq!(verify_alpha_scaling(&s, 1.0).unwrap().max_mismatch, 0.0);
        assert!(verify_alpha_scaling(&s, 0.5).unwrap().max_mismatch < 1e-12);
    }

    #[test]
    fn size_guard() {
        assert!(ensure_dense_size(MAX_DENSE_N).is_ok());
        assert!(matches!(
            ensure_dense_size(MAX_DENSE_N + 1),
            Err(SpectrumError::TooLarge(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let sp = full_spectrum(&g(2, vec![0.0, 1.0, 1.0, 0.0], 1.0)).unwrap();
        let mut buf = Vec::new();
        sp.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("re,im\n"));
        assert_eq!(text.lines().count(), 3);
    }
}

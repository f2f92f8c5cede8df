//! Statistical diagnostics over rank vectors and rank trajectories.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::numeric::{linear_regression, two_sum, DoubleDouble};
use crate::rank::{RankTable, RankVector};
use crate::trade_graph::{link_stats, mass_vectors, MoneyMatrix};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("invalid fit range {k_min}..={k_max} for {n} ranks")]
    FitRange {
        k_min: usize,
        k_max: usize,
        n: usize,
    },
    #[error("power-law fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("probability at rank {0} is not strictly positive")]
    NonPositive(usize),
    #[error("vectors have different lengths ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("no input points")]
    EmptyInput,
    #[error("invalid spindle point K={k}, K*={k_star}, N={n}")]
    InvalidPoint { k: usize, k_star: usize, n: usize },
    #[error("cell dimensions must be positive")]
    InvalidCell,
    #[error("band {0:?} is empty or overlaps another band")]
    InvalidBand((usize, usize)),
    #[error("window length must be at least one year")]
    InvalidWindow,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Least-squares fit of `log P(K) = c − β log K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub beta: f64,
    pub stderr: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub r_squared: f64,
}

/// Fits `P(K) ∝ K^−β` over ranks `k_min..=k_max` (1-based, inclusive).
pub fn fit_power_law(
    p: &RankVector,
    k_min: usize,
    k_max: usize,
) -> Result<PowerLawFit, AnalysisError> {
    fit_power_law_sorted(&p.by_rank(), k_min, k_max)
}

/// As [`fit_power_law`], on probabilities already sorted by rank.
pub fn fit_power_law_sorted(
    by_rank: &[f64],
    k_min: usize,
    k_max: usize,
) -> Result<PowerLawFit, AnalysisError> {
    let n = by_rank.len();
    if k_min < 1 || k_min >= k_max || k_max > n {
        return Err(AnalysisError::FitRange { k_min, k_max, n });
    }
    let count = k_max - k_min + 1;
    if count < 3 {
        return Err(AnalysisError::TooFewPoints(count));
    }
    let mut x = Vec::with_capacity(count);
    let mut y = Vec::with_capacity(count);
    for k in k_min..=k_max {
        let p = by_rank[k - 1];
        if p.is_nan() || p <= 0.0 {
            return Err(AnalysisError::NonPositive(k));
        }
        x.push((k as f64).ln());
        y.push(p.ln());
    }
    let (slope, _, stderr, r_squared) = linear_regression(&x, &y);
    Ok(PowerLawFit {
        beta: -slope,
        stderr,
        k_min,
        k_max,
        r_squared,
    })
}

/// `κ = N Σ_i P(i) P*(i) − 1` for two rank vectors over the same nodes.
pub fn correlator(p: &RankVector, p_star: &RankVector) -> Result<f64, AnalysisError> {
    correlator_values(p.probabilities(), p_star.probabilities())
}

/// Correlator of two normalized probability vectors indexed by node.
///
/// Evaluated in the centered form `N Σ (P_i − 1/N)(P*_i − 1/N)`, equal to
/// `N Σ P_i P*_i − 1` for normalized input, with double-double
/// accumulation. Uniform input gives exactly 0 and disjoint unit vectors
/// exactly −1.
pub fn correlator_values(p: &[f64], p_star: &[f64]) -> Result<f64, AnalysisError> {
    if p.len() != p_star.len() {
        return Err(AnalysisError::Dimension(p.len(), p_star.len()));
    }
    let n = p.len();
    if n == 0 {
        return Err(AnalysisError::EmptyInput);
    }
    let u = 1.0 / n as f64;
    let mut acc = DoubleDouble::default();
    for (&a, &b) in p.iter().zip(p_star) {
        let (ah, al) = two_sum(a, -u);
        let (bh, bl) = two_sum(b, -u);
        acc.add(DoubleDouble::from_parts(ah, al).mul(DoubleDouble::from_parts(bh, bl)));
    }
    Ok(DoubleDouble::from_parts(n as f64, 0.0).mul(acc).to_f64())
}

/// One `(K, K*)` observation together with the network size it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpindlePoint {
    pub k: usize,
    pub k_star: usize,
    pub n: usize,
}

/// Cell layout of a spindle histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Binning {
    /// `(K* − K, K* + K)` in cells of `width × height` ranks. The cell
    /// containing `K* − K = 0` is centered on the axis (exactly for odd
    /// widths).
    Raw { width: usize, height: usize },
    /// `((K* − K)/N, (K* + K)/N)` on a 76 × 152 grid over `[−1, 1] × [0, 2]`.
    Rescaled,
}

pub const RESCALED_COLUMNS: usize = 76;
pub const RESCALED_ROWS: usize = 152;

impl Default for Binning {
    fn default() -> Self {
        Binning::Raw {
            width: 3,
            height: 3,
        }
    }
}

/// Coarse-grained density of points in the spindle plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpindleHistogram {
    pub binning: Binning,
    pub columns: usize,
    pub rows: usize,
    /// Lower-left corner of cell `(0, 0)`.
    pub x_origin: f64,
    pub y_origin: f64,
    pub cell_width: f64,
    pub cell_height: f64,
    /// Row-major, `counts[row * columns + column]`; rows follow `K* + K`.
    pub counts: Vec<u64>,
    pub total: u64,
    /// Points with `K* − K` negative, zero and positive.
    pub sign_counts: [u64; 3],
}

/// Bins `(K, K*)` points into the spindle plane.
pub fn spindle_histogram(
    points: &[SpindlePoint],
    binning: Binning,
) -> Result<SpindleHistogram, AnalysisError> {
    if points.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    for p in points {
        if p.k == 0 || p.k_star == 0 || p.k > p.n || p.k_star > p.n {
            return Err(AnalysisError::InvalidPoint {
                k: p.k,
                k_star: p.k_star,
                n: p.n,
            });
        }
    }

    let mut hist = match binning {
        Binning::Raw { width, height } => {
            if width == 0 || height == 0 {
                return Err(AnalysisError::InvalidCell);
            }
            let n_max = points.iter().map(|p| p.n).max().expect("non-empty");
            let half = width / 2;
            // Cells on each side of the axis cell; for even widths the axis
            // cell reaches one rank further left than right.
            let side = (n_max - 1).saturating_sub(width - 1 - half).div_ceil(width);
            SpindleHistogram {
                binning,
                columns: 2 * side + 1,
                rows: 2 * n_max / height + 1,
                x_origin: -(half as f64) - (side * width) as f64 - 0.5,
                y_origin: -0.5,
                cell_width: width as f64,
                cell_height: height as f64,
                counts: Vec::new(),
                total: 0,
                sign_counts: [0; 3],
            }
        }
        Binning::Rescaled => SpindleHistogram {
            binning,
            columns: RESCALED_COLUMNS,
            rows: RESCALED_ROWS,
            x_origin: -1.0,
            y_origin: 0.0,
            cell_width: 2.0 / RESCALED_COLUMNS as f64,
            cell_height: 2.0 / RESCALED_ROWS as f64,
            counts: Vec::new(),
            total: 0,
            sign_counts: [0; 3],
        },
    };
    hist.counts = vec![0; hist.columns * hist.rows];
    for p in points {
        let (col, row) = hist.cell_of(p);
        hist.counts[row * hist.columns + col] += 1;
        hist.total += 1;
        hist.sign_counts[(p.k_star.cmp(&p.k) as i8 + 1) as usize] += 1;
    }
    Ok(hist)
}

impl SpindleHistogram {
    /// Cell `(column, row)` of a point, in exact integer arithmetic.
    fn cell_of(&self, p: &SpindlePoint) -> (usize, usize) {
        let diff = p.k_star as i64 - p.k as i64;
        let total = (p.k_star + p.k) as i64;
        match self.binning {
            Binning::Raw { width, height } => {
                let shift = (width / 2 + (self.columns / 2) * width) as i64;
                let col = ((diff + shift) / width as i64) as usize;
                let row = (total / height as i64) as usize;
                (col, row)
            }
            Binning::Rescaled => {
                let n = p.n as i64;
                let half_cols = (self.columns / 2) as i64;
                let half_rows = (self.rows / 2) as i64;
                let col = ((diff + n) * half_cols / n).min(self.columns as i64 - 1);
                let row = (total * half_rows / n).min(self.rows as i64 - 1);
                (col as usize, row as usize)
            }
        }
    }

    pub fn count(&self, column: usize, row: usize) -> u64 {
        self.counts[row * self.columns + column]
    }

    pub fn row_total(&self, row: usize) -> u64 {
        self.counts[row * self.columns..(row + 1) * self.columns]
            .iter()
            .sum()
    }

    /// Cell centers `(x, y)`.
    pub fn center(&self, column: usize, row: usize) -> (f64, f64) {
        (
            self.x_origin + (column as f64 + 0.5) * self.cell_width,
            self.y_origin + (row as f64 + 0.5) * self.cell_height,
        )
    }

    /// Upper edge of a row in the `y` coordinate.
    pub fn row_top(&self, row: usize) -> f64 {
        self.y_origin + (row + 1) as f64 * self.cell_height
    }

    /// Columns whose closed x-interval contains `x = 0`.
    pub fn axis_columns(&self) -> Vec<usize> {
        match self.binning {
            Binning::Raw { .. } => vec![self.columns / 2],
            Binning::Rescaled => vec![self.columns / 2 - 1, self.columns / 2],
        }
    }

    /// Columns holding the row maximum (several on ties; empty for an empty row).
    pub fn row_argmax(&self, row: usize) -> Vec<usize> {
        let cells = &self.counts[row * self.columns..(row + 1) * self.columns];
        let max = cells.iter().copied().max().unwrap_or(0);
        if max == 0 {
            return Vec::new();
        }
        (0..self.columns).filter(|&c| cells[c] == max).collect()
    }

    /// Whether some maximum of the row lies on, or next to, a column
    /// touching `x = 0`.
    pub fn row_peak_near_axis(&self, row: usize) -> bool {
        let axis = self.axis_columns();
        self.row_argmax(row)
            .iter()
            .any(|&c| axis.iter().any(|&a| c.abs_diff(a) <= 1))
    }

    /// `|#(x > 0) − #(x < 0)| / total`.
    pub fn x_asymmetry(&self) -> f64 {
        let [neg, _, pos] = self.sign_counts;
        neg.abs_diff(pos) as f64 / self.total as f64
    }

    /// Normalized densities (sum 1).
    pub fn density(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.total as f64)
            .collect()
    }

    /// Half the ℓ₁ distance between the normalized histograms; both must
    /// share a layout.
    pub fn total_variation(&self, other: &SpindleHistogram) -> f64 {
        assert_eq!((self.columns, self.rows), (other.columns, other.rows));
        0.5 * self
            .density()
            .iter()
            .zip(other.density())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// `x,y,count` rows at cell centers, nonzero cells only.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), AnalysisError> {
        writeln!(out, "x,y,count")?;
        for row in 0..self.rows {
            for col in 0..self.columns {
                let c = self.count(col, row);
                if c > 0 {
                    let (x, y) = self.center(col, row);
                    writeln!(out, "{x},{y},{c}")?;
                }
            }
        }
        Ok(())
    }
}

/// Per-country `(K, K*)` by year.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankTrajectories {
    by_country: BTreeMap<String, BTreeMap<i32, (usize, usize)>>,
}

impl RankTrajectories {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, code: impl Into<String>, year: i32, k: usize, k_star: usize) {
        self.by_country
            .entry(code.into())
            .or_default()
            .insert(year, (k, k_star));
    }

    pub fn from_tables(tables: &[RankTable]) -> Self {
        let mut out = Self::new();
        for t in tables {
            for row in &t.rows {
                out.insert(row.code.clone(), t.year, row.k, row.k_star);
            }
        }
        out
    }

    pub fn countries(&self) -> impl Iterator<Item = &str> {
        self.by_country.keys().map(String::as_str)
    }
}

/// Squared one-year displacement in the `(K, K*)` plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocitySample {
    pub code: String,
    pub year_from: i32,
    pub year_to: i32,
    /// `K + K*` at `year_from`.
    pub kpk: usize,
    pub dv2: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VelocitySeries {
    pub samples: Vec<VelocitySample>,
}

/// `Δv² = (K(t) − K(t−1))² + (K*(t) − K*(t−1))²` for every country and
/// every pair of consecutive years it is ranked in. Gaps give no sample.
pub fn velocity_sq(trajectories: &RankTrajectories) -> VelocitySeries {
    let mut samples = Vec::new();
    for (code, years) in &trajectories.by_country {
        for ((&y0, &(k0, ks0)), (&y1, &(k1, ks1))) in years.iter().zip(years.iter().skip(1)) {
            if y1 != y0 + 1 {
                continue;
            }
            let dk = k1 as f64 - k0 as f64;
            let dks = ks1 as f64 - ks0 as f64;
            samples.push(VelocitySample {
                code: code.clone(),
                year_from: y0,
                year_to: y1,
                kpk: k0 + ks0,
                dv2: dk * dk + dks * dks,
            });
        }
    }
    VelocitySeries { samples }
}

impl VelocitySeries {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["code", "year_from", "year_to", "kpk", "dv2"])?;
        for s in &self.samples {
            w.write_record([
                s.code.clone(),
                s.year_from.to_string(),
                s.year_to.to_string(),
                s.kpk.to_string(),
                s.dv2.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Half width of the sliding mean over `K + K*`.
pub const SMOOTHING_HALF_WIDTH: usize = 10;

/// Mean `Δv²` of one band of `K + K*` over one window of years.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandWindowMean {
    pub lo: usize,
    pub hi: usize,
    pub window_start: i32,
    pub window_end: i32,
    pub count: usize,
    pub mean: Option<f64>,
    /// The window extends past the last year with data.
    pub partial: bool,
}

/// Mean `Δv²` at one value of `K + K*`, its sliding average and case count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub kpk: usize,
    pub mean: f64,
    pub smoothed: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityAggregate {
    pub window_years: usize,
    pub bands: Vec<BandWindowMean>,
    pub curve: Vec<CurvePoint>,
}

/// Band/window means and the `K + K*` curve of a velocity series.
///
/// Bands are inclusive `(lo, hi)` ranges of `K + K*` taken at the earlier
/// year. Windows are consecutive runs of `window_years` years of the later
/// year `t`, starting at the first one present; the last window is flagged
/// partial when it runs past the data. The curve's smoothed value at `v`
/// averages the per-value means over `[v − 10, v + 10]`.
pub fn velocity_aggregate(
    vs: &VelocitySeries,
    bands: &[(usize, usize)],
    window_years: usize,
) -> Result<VelocityAggregate, AnalysisError> {
    if window_years == 0 {
        return Err(AnalysisError::InvalidWindow);
    }
    for (a, &band) in bands.iter().enumerate() {
        if band.0 > band.1 {
            return Err(AnalysisError::InvalidBand(band));
        }
        if bands[..a].iter().any(|b| band.0 <= b.1 && b.0 <= band.1) {
            return Err(AnalysisError::InvalidBand(band));
        }
    }

    let mut out_bands = Vec::new();
    if let (Some(first), Some(last)) = (
        vs.samples.iter().map(|s| s.year_to).min(),
        vs.samples.iter().map(|s| s.year_to).max(),
    ) {
        let w = window_years as i32;
        for &(lo, hi) in bands {
            let mut start = first;
            while start <= last {
                let end = start + w - 1;
                let members: Vec<f64> = vs
                    .samples
                    .iter()
                    .filter(|s| (start..=end).contains(&s.year_to) && (lo..=hi).contains(&s.kpk))
                    .map(|s| s.dv2)
                    .collect();
                out_bands.push(BandWindowMean {
                    lo,
                    hi,
                    window_start: start,
                    window_end: end,
                    count: members.len(),
                    mean: mean(&members),
                    partial: end > last,
                });
                start += w;
            }
        }
    }

    let mut by_kpk: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for s in &vs.samples {
        by_kpk.entry(s.kpk).or_default().push(s.dv2);
    }
    let means: BTreeMap<usize, (f64, usize)> = by_kpk
        .iter()
        .map(|(&k, v)| (k, (mean(v).expect("non-empty"), v.len())))
        .collect();
    let curve = means
        .iter()
        .map(|(&kpk, &(m, count))| {
            let lo = kpk.saturating_sub(SMOOTHING_HALF_WIDTH);
            let window: Vec<f64> = means
                .range(lo..=kpk + SMOOTHING_HALF_WIDTH)
                .map(|(_, &(m, _))| m)
                .collect();
            CurvePoint {
                kpk,
                mean: m,
                smoothed: mean(&window).expect("contains kpk itself"),
                count,
            }
        })
        .collect();

    Ok(VelocityAggregate {
        window_years,
        bands: out_bands,
        curve,
    })
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(crate::numeric::sum(values) / values.len() as f64)
    }
}

impl VelocityAggregate {
    /// `kpk,mean,smoothed,count`
    pub fn write_curve_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kpk", "mean", "smoothed", "count"])?;
        for p in &self.curve {
            w.write_record([
                p.kpk.to_string(),
                p.mean.to_string(),
                p.smoothed.to_string(),
                p.count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `lo,hi,window_start,window_end,count,mean,partial`; empty `mean` for
    /// empty cells.
    pub fn write_bands_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "lo",
            "hi",
            "window_start",
            "window_end",
            "count",
            "mean",
            "partial",
        ])?;
        for b in &self.bands {
            w.write_record([
                b.lo.to_string(),
                b.hi.to_string(),
                b.window_start.to_string(),
                b.window_end.to_string(),
                b.count.to_string(),
                b.mean.map(|m| m.to_string()).unwrap_or_default(),
                b.partial.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Global parameters of one yearly snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearSummary {
    pub year: i32,
    pub n: usize,
    pub links_total: usize,
    pub links_per_country: f64,
    pub total_mass: f64,
}

/// One summary row per snapshot, in input order.
pub fn yearly_summary(snapshots: &[MoneyMatrix]) -> Vec<YearSummary> {
    snapshots
        .iter()
        .map(|m| {
            let links = link_stats(m);
            YearSummary {
                year: m.year(),
                n: m.n(),
                links_total: links.links_total,
                links_per_country: links.links_per_country,
                total_mass: mass_vectors(m).total,
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[YearSummary], out: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "year",
        "n",
        "links_total",
        "links_per_country",
        "total_mass",
    ])?;
    for r in rows {
        w.write_record([
            r.year.to_string(),
            r.n.to_string(),
            r.links_total.to_string(),
            r.links_per_country.to_string(),
            r.total_mass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::RankKind;

    fn exact_power_law(beta: f64, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (1..=n).map(|k| (k as f64).powf(-beta)).collect();
        let z: f64 = raw.iter().sum();
        raw.iter().map(|p| p / z).collect()
    }

    #[test]
    fn zipf_exponent_one() {
        let fit = fit_power_law_sorted(&exact_power_law(1.0, 50), 1, 50).unwrap();
        assert!((fit.beta - 1.0).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_exponent() {
        let fit = fit_power_law_sorted(&exact_power_law(0.5, 80), 5, 60).unwrap();
        assert!((fit.beta - 0.5).abs() < 1e-12);
        assert_eq!((fit.k_min, fit.k_max), (5, 60));
    }

    #[test]
    fn fit_uses_rank_order() {
        let p = RankVector::from_probabilities(
            RankKind::PageRank,
            vec![0.25, 0.5, 1.0 / 6.0, 1.0 / 12.0],
        );
        let fit = fit_power_law(&p, 1, 3).unwrap();
        assert!((fit.beta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let p = exact_power_law(1.0, 10);
        assert!(matches!(
            fit_power_law_sorted(&p, 1, 2),
            Err(AnalysisError::TooFewPoints(2))
        ));
        assert!(matches!(
            fit_power_law_sorted(&p, 0, 5),
            Err(AnalysisError::FitRange { .. })
        ));
        assert!(matches!(
            fit_power_law_sorted(&p, 1, 11),
            Err(AnalysisError::FitRange { .. })
        ));
        let mut z = p.clone();
        z[7] = 0.0;
        assert!(matches!(
            fit_power_law_sorted(&z, 1, 10),
            Err(AnalysisError::NonPositive(8))
        ));
    }

    #[test]
    fn correlator_identities() {
        for n in [2usize, 3, 5, 49, 227] {
            let u = vec![1.0 / n as f64; n];
            assert_eq!(correlator_values(&u, &u).unwrap(), 0.0, "n={n}");
            let mut e1 = vec![0.0; n];
            let mut e2 = vec![0.0; n];
            e1[0] = 1.0;
            e2[1] = 1.0;
            assert_eq!(correlator_values(&e1, &e2).unwrap(), -1.0, "n={n}");
        }
        let k = correlator_values(&[0.7, 0.3], &[0.6, 0.4]).unwrap();
        assert!((k - 0.08).abs() < 1e-15);
        assert!(correlator_values(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn single_point_spindle() {
        let h = spindle_histogram(
            &[SpindlePoint {
                k: 1,
                k_star: 1,
                n: 10,
            }],
            Binning::default(),
        )
        .unwrap();
        assert_eq!(h.total, 1);
        let (col, row) = (0..h.rows)
            .flat_map(|r| (0..h.columns).map(move |c| (c, r)))
            .find(|&(c, r)| h.count(c, r) == 1)
            .unwrap();
        let (x, y) = h.center(col, row);
        assert!((x - 0.0).abs() <= h.cell_width / 2.0);
        assert!((y - 2.0).abs() <= h.cell_height / 2.0);
        assert_eq!(col, h.columns / 2);
    }

    #[test]
    fn mirrored_points_give_mirrored_histogram() {
        let pts = [
            SpindlePoint {
                k: 2,
                k_star: 5,
                n: 9,
            },
            SpindlePoint {
                k: 5,
                k_star: 2,
                n: 9,
            },
        ];
        for binning in [
            Binning::default(),
            Binning::Raw {
                width: 1,
                height: 2,
            },
            Binning::Rescaled,
        ] {
            let h = spindle_histogram(&pts, binning).unwrap();
            for r in 0..h.rows {
                for c in 0..h.columns {
                    assert_eq!(h.count(c, r), h.count(h.columns - 1 - c, r), "{binning:?}");
                }
            }
            assert_eq!(h.x_asymmetry(), 0.0);
        }
    }

    #[test]
    fn rescaled_extremes_stay_on_grid() {
        let n = 227;
        let pts = [
            SpindlePoint { k: 1, k_star: n, n },
            SpindlePoint { k: n, k_star: 1, n },
            SpindlePoint { k: n, k_star: n, n },
            SpindlePoint { k: 1, k_star: 1, n },
        ];
        let h = spindle_histogram(&pts, Binning::Rescaled).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 4);
        assert_eq!(h.count(RESCALED_COLUMNS / 2, RESCALED_ROWS - 1), 1);
    }

    #[test]
    fn spindle_errors() {
        assert!(matches!(
            spindle_histogram(&[], Binning::Rescaled),
            Err(AnalysisError::EmptyInput)
        ));
        let p = [SpindlePoint {
            k: 1,
            k_star: 1,
            n: 3,
        }];
        assert!(matches!(
            spindle_histogram(
                &p,
                Binning::Raw {
                    width: 0,
                    height: 3
                }
            ),
            Err(AnalysisError::InvalidCell)
        ));
        let bad = [SpindlePoint {
            k: 4,
            k_star: 1,
            n: 3,
        }];
        assert!(spindle_histogram(&bad, Binning::Rescaled).is_err());
    }

    #[test]
    fn constant_ranks_have_zero_velocity() {
        let mut t = RankTrajectories::new();
        for y in 2000..2004 {
            t.insert("A", y, 3, 7);
            t.insert("B", y, 1, 1);
        }
        let vs = velocity_sq(&t);
        assert_eq!(vs.samples.len(), 6);
        assert!(vs.samples.iter().all(|s| s.dv2 == 0.0));
    }

    #[test]
    fn velocity_arithmetic_and_gaps() {
        let mut t = RankTrajectories::new();
        t.insert("A", 2000, 1, 2);
        t.insert("A", 2001, 3, 2);
        t.insert("A", 2003, 4, 4);
        let vs = velocity_sq(&t);
        assert_eq!(vs.samples.len(), 1);
        assert_eq!(vs.samples[0].dv2, 4.0);
        assert_eq!(vs.samples[0].kpk, 3);
        assert_eq!(
            (vs.samples[0].year_from, vs.samples[0].year_to),
            (2000, 2001)
        );
    }

    #[test]
    fn three_year_hand_trajectory() {
        let mut t = RankTrajectories::new();
        t.insert("X", 1990, 5, 9);
        t.insert("X", 1991, 2, 10);
        t.insert("X", 1992, 6, 6);
        let vs = velocity_sq(&t);
        let got: Vec<(usize, f64)> = vs.samples.iter().map(|s| (s.kpk, s.dv2)).collect();
        // (2-5)² + (10-9)² = 10; (6-2)² + (6-10)² = 32
        assert_eq!(got, vec![(14, 10.0), (12, 32.0)]);
    }

    fn sample(kpk: usize, year_to: i32, dv2: f64) -> VelocitySample {
        VelocitySample {
            code: format!("c{kpk}"),
            year_from: year_to - 1,
            year_to,
            kpk,
            dv2,
        }
    }

    #[test]
    fn constant_velocity_aggregates() {
        let vs = VelocitySeries {
            samples: (0..40)
                .map(|i| sample(2 + i % 30, 2000 + (i / 7) as i32, 3.5))
                .collect(),
        };
        let agg = velocity_aggregate(&vs, &[(1, 10), (11, 40)], 5).unwrap();
        assert!(agg.bands.iter().filter_map(|b| b.mean).all(|m| m == 3.5));
        assert!(agg.curve.iter().all(|p| p.mean == 3.5 && p.smoothed == 3.5));
    }

    #[test]
    fn band_means_are_independent() {
        let vs = VelocitySeries {
            samples: vec![
                sample(5, 2001, 1.0),
                sample(6, 2001, 3.0),
                sample(50, 2001, 100.0),
                sample(60, 2002, 300.0),
            ],
        };
        let agg = velocity_aggregate(&vs, &[(1, 40), (41, 80), (81, 120)], 5).unwrap();
        assert_eq!(agg.bands.len(), 3);
        assert_eq!(agg.bands[0].mean, Some(2.0));
        assert_eq!(agg.bands[1].mean, Some(200.0));
        assert_eq!(agg.bands[2].mean, None);
        assert!(agg.bands.iter().all(|b| b.partial));
        assert_eq!(
            (agg.bands[0].window_start, agg.bands[0].window_end),
            (2001, 2005)
        );
    }

    #[test]
    fn curve_smoothing_window() {
        // Means 0 at kpk=10, 10 at kpk=20, 100 at kpk=31; 31 sees only itself.
        let vs = VelocitySeries {
            samples: vec![
                sample(10, 2001, 0.0),
                sample(20, 2001, 10.0),
                sample(20, 2001, 10.0),
                sample(31, 2001, 100.0),
            ],
        };
        let agg = velocity_aggregate(&vs, &[], 1).unwrap();
        let c: Vec<(usize, f64, usize)> = agg
            .curve
            .iter()
            .map(|p| (p.kpk, p.smoothed, p.count))
            .collect();
        assert_eq!(c, vec![(10, 5.0, 1), (20, 5.0, 2), (31, 100.0, 1)]);
    }

    #[test]
    fn windows_split_years() {
        let vs = VelocitySeries {
            samples: (2001..=2007).map(|y| sample(4, y, y as f64)).collect(),
        };
        let agg = velocity_aggregate(&vs, &[(1, 10)], 3).unwrap();
        let w: Vec<(i32, i32, Option<f64>, bool)> = agg
            .bands
            .iter()
            .map(|b| (b.window_start, b.window_end, b.mean, b.partial))
            .collect();
        assert_eq!(
            w,
            vec![
                (2001, 2003, Some(2002.0), false),
                (2004, 2006, Some(2005.0), false),
                (2007, 2009, Some(2007.0), true)
            ]
        );
    }

    #[test]
    fn aggregate_validation() {
        let vs = VelocitySeries::default();
        assert!(velocity_aggregate(&vs, &[(1, 10)], 0).is_err());
        assert!(velocity_aggregate(&vs, &[(1, 10), (10, 20)], 5).is_err());
        assert!(velocity_aggregate(&vs, &[(5, 1)], 5).is_err());
    }

    #[test]
    fn summary_matches_direct_calls() {
        let m = MoneyMatrix::from_rows(&[
            vec![0.0, 2.0, 0.0],
            vec![3.0, 0.0, 1.0],
            vec![0.0, 0.5, 0.0],
        ])
        .unwrap()
        .with_tags(1999, "TOTAL");
        let rows = yearly_summary(std::slice::from_ref(&m));
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].year, 1999);
        assert_eq!(rows[0].n, 3);
        assert_eq!(rows[0].links_total, link_stats(&m).links_total);
        assert_eq!(rows[0].links_per_country, link_stats(&m).links_per_country);
        assert_eq!(rows[0].total_mass, mass_vectors(&m).total);
    }
}

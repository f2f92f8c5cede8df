//! Trade-flow ingestion: country registry, money matrix and mass aggregates.
//!
//! Input is CSV with the mandatory header
//! `year,commodity,exporter,importer,value_usd`. One snapshot is a
//! `(year, commodity)` pair; its registry holds every country that appears
//! on either side of an accepted record, sorted by code.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::numeric::CompensatedSum;

pub const CSV_HEADER: [&str; 5] = ["year", "commodity", "exporter", "importer", "value_usd"];

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("line {line}: negative value {value}")]
    NegativeValue { line: u64, value: f64 },
    #[error("missing or wrong header, expected `{}`", CSV_HEADER.join(","))]
    BadHeader,
    #[error("no flows for year {year}, commodity {commodity:?}")]
    EmptySnapshot { year: i32, commodity: String },
    #[error("matrix of size {n} needs {expected} values, got {got}")]
    Shape {
        n: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid matrix element ({i}, {j}) = {value}")]
    InvalidElement { i: usize, j: usize, value: f64 },
    #[error("registry has {registry} countries but matrix has size {n}")]
    RegistryMismatch { registry: usize, n: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Country {
    pub code: String,
    pub name: String,
}

/// Dense, code-sorted country index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CountryRegistry {
    entries: Vec<Country>,
    index: HashMap<String, usize>,
}

#[derive(Serialize)]
struct RegistryEntry<'a> {
    code: &'a str,
    name: &'a str,
    id: usize,
}

impl CountryRegistry {
    /// Registry over the given codes; duplicates collapse, display names
    /// default to the code.
    pub fn from_codes<I, S>(codes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = codes.into_iter().map(Into::into).collect();
        Self::from_sorted(set.into_iter().map(|code| Country {
            name: code.clone(),
            code,
        }))
    }

    /// Registry over `(code, name)` pairs. The first name seen for a code wins.
    pub fn from_named<I>(countries: I) -> Self
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut map = BTreeMap::new();
        for (code, name) in countries {
            map.entry(code).or_insert(name);
        }
        Self::from_sorted(map.into_iter().map(|(code, name)| Country { code, name }))
    }

    fn from_sorted(entries: impl Iterator<Item = Country>) -> Self {
        let entries: Vec<Country> = entries.collect();
        let index = entries
            .iter()
            .enumerate()
            .map(|(id, c)| (c.code.clone(), id))
            .collect();
        Self { entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn code(&self, id: usize) -> &str {
        &self.entries[id].code
    }

    pub fn name(&self, id: usize) -> &str {
        &self.entries[id].name
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|c| c.code.as_str())
    }

    pub fn countries(&self) -> &[Country] {
        &self.entries
    }

    /// Union of two registries; names from `self` take precedence.
    pub fn union(&self, other: &CountryRegistry) -> CountryRegistry {
        Self::from_named(
            self.entries
                .iter()
                .chain(other.entries.iter())
                .map(|c| (c.code.clone(), c.name.clone())),
        )
    }

    /// JSON array of `{code, name, id}`.
    pub fn to_json(&self) -> String {
        let rows: Vec<RegistryEntry<'_>> = self
            .entries
            .iter()
            .enumerate()
            .map(|(id, c)| RegistryEntry {
                code: &c.code,
                name: &c.name,
                id,
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("registry serializes")
    }
}

/// One row of the input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeFlowRecord {
    pub year: i32,
    pub commodity: String,
    pub exporter: String,
    pub importer: String,
    pub value: f64,
}

/// Parses a flow CSV into records.
///
/// Rows are validated individually; the reported line number is the
/// 1-based line of the file, header included. Self-loops are dropped with a
/// warning.
pub fn read_records<R: Read>(source: R) -> Result<Vec<TradeFlowRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = reader.headers().map_err(|_| IngestError::BadHeader)?;
    if header.len() != CSV_HEADER.len() || header.iter().zip(CSV_HEADER).any(|(a, b)| a != b) {
        return Err(IngestError::BadHeader);
    }

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            IngestError::MalformedRow {
                line,
                message: e.to_string(),
            }
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |message: String| IngestError::MalformedRow { line, message };

        if row.len() != CSV_HEADER.len() {
            return Err(malformed(format!("expected 5 fields, got {}", row.len())));
        }
        let year: i32 = row[0]
            .parse()
            .map_err(|_| malformed(format!("bad year {:?}", &row[0])))?;
        let value: f64 = row[4]
            .parse()
            .map_err(|_| malformed(format!("bad value {:?}", &row[4])))?;
        if !value.is_finite() {
            return Err(malformed(format!("non-finite value {:?}", &row[4])));
        }
        if value < 0.0 {
            return Err(IngestError::NegativeValue { line, value });
        }
        let (commodity, exporter, importer) = (&row[1], &row[2], &row[3]);
        if commodity.is_empty() || exporter.is_empty() || importer.is_empty() {
            return Err(malformed("empty commodity or country code".into()));
        }
        if exporter == importer {
            log::warn!("line {line}: self-loop for {exporter} rejected");
            continue;
        }
        out.push(TradeFlowRecord {
            year,
            commodity: commodity.to_string(),
            exporter: exporter.to_string(),
            importer: importer.to_string(),
            value,
        });
    }
    Ok(out)
}

/// Dense nonnegative flow matrix for one `(year, commodity)` snapshot.
///
/// Element `(i, j)` is the money flow from country `j` to country `i`.
/// Stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MoneyMatrix {
    n: usize,
    values: Vec<f64>,
    year: i32,
    commodity: String,
    registry: CountryRegistry,
}

impl MoneyMatrix {
    /// Builds a matrix from row-major values, validating nonnegativity and
    /// a zero diagonal.
    pub fn from_dense(
        registry: CountryRegistry,
        values: Vec<f64>,
        year: i32,
        commodity: impl Into<String>,
    ) -> Result<Self, IngestError> {
        let n = registry.len();
        if values.len() != n * n {
            return Err(IngestError::Shape {
                n,
                expected: n * n,
                got: values.len(),
            });
        }
        for (k, &value) in values.iter().enumerate() {
            let (i, j) = (k / n, k % n);
            if !(value.is_finite() && value >= 0.0) || (i == j && value != 0.0) {
                return Err(IngestError::InvalidElement { i, j, value });
            }
        }
        Ok(Self {
            n,
            values,
            year,
            commodity: commodity.into(),
            registry,
        })
    }

    /// Convenience constructor from nested rows with generated codes
    /// `C0, C1, ...` (zero padded so that code order equals row order).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, IngestError> {
        let n = rows.len();
        let width = n.saturating_sub(1).to_string().len();
        let registry = CountryRegistry::from_codes((0..n).map(|i| format!("C{i:0width$}")));
        let mut values = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(IngestError::Shape {
                    n,
                    expected: n,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_dense(registry, values, 0, "TOTAL")
    }

    /// Sums the records of one snapshot into a matrix.
    pub fn from_records(
        records: &[TradeFlowRecord],
        year: i32,
        commodity: &str,
    ) -> Result<Self, IngestError> {
        let selected: Vec<&TradeFlowRecord> = records
            .iter()
            .filter(|r| r.year == year && r.commodity == commodity && r.exporter != r.importer)
            .collect();
        if selected.is_empty() {
            return Err(IngestError::EmptySnapshot {
                year,
                commodity: commodity.to_string(),
            });
        }
        let registry = CountryRegistry::from_codes(
            selected
                .iter()
                .flat_map(|r| [r.exporter.as_str(), r.importer.as_str()]),
        );
        let n = registry.len();
        // Per-cell compensated sums make the result independent of row order
        // up to the compensation error.
        let mut cells: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for r in &selected {
            let i = registry.id(&r.importer).expect("importer registered");
            let j = registry.id(&r.exporter).expect("exporter registered");
            cells.entry((i, j)).or_default().push(r.value);
        }
        let mut values = vec![0.0; n * n];
        for ((i, j), mut parts) in cells {
            parts.sort_by(f64::total_cmp);
            values[i * n + j] = crate::numeric::sum(&parts);
        }
        Self::from_dense(registry, values, year, commodity)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn commodity(&self) -> &str {
        &self.commodity
    }

    pub fn registry(&self) -> &CountryRegistry {
        &self.registry
    }

    /// Flow from `j` to `i`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Row-major element slice.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn with_tags(mut self, year: i32, commodity: impl Into<String>) -> Self {
        self.year = year;
        self.commodity = commodity.into();
        self
    }

    /// Flow-reversed network: `Mᵀ` over the same registry.
    pub fn transpose(&self) -> MoneyMatrix {
        let n = self.n;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[j * n + i] = self.values[i * n + j];
            }
        }
        MoneyMatrix {
            values,
            ..self.clone()
        }
    }

    /// Every element multiplied by `factor` (must be positive and finite).
    pub fn scaled(&self, factor: f64) -> MoneyMatrix {
        assert!(factor.is_finite() && factor > 0.0);
        MoneyMatrix {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Column `j` multiplied by `factors[j]`.
    pub fn column_scaled(&self, factors: &[f64]) -> MoneyMatrix {
        assert_eq!(factors.len(), self.n);
        let n = self.n;
        MoneyMatrix {
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(k, v)| v * factors[k % n])
                .collect(),
            ..self.clone()
        }
    }

    /// Same flows re-indexed on a larger registry.
    fn embed(&self, registry: &CountryRegistry) -> MoneyMatrix {
        let n = registry.len();
        let map: Vec<usize> = self
            .registry
            .codes()
            .map(|c| registry.id(c).expect("registry is a superset"))
            .collect();
        let mut values = vec![0.0; n * n];
        for i in 0..self.n {
            for j in 0..self.n {
                values[map[i] * n + map[j]] = self.get(i, j);
            }
        }
        MoneyMatrix {
            n,
            values,
            year: self.year,
            commodity: self.commodity.clone(),
            registry: registry.clone(),
        }
    }
}

/// Fills cells the export side left at zero with flows reported by importers.
///
/// Import records for the matrix's `(year, commodity)` are summed per
/// `(exporter, importer)` pair; a pair reported more than once is summed and
/// a warning is logged. Existing nonzero cells are never overwritten, so the
/// operation is idempotent. Countries known only from import records are
/// added to the registry.
pub fn mirror_fill(export_matrix: &MoneyMatrix, import_records: &[TradeFlowRecord]) -> MoneyMatrix {
    let selected: Vec<&TradeFlowRecord> = import_records
        .iter()
        .filter(|r| {
            r.year == export_matrix.year
                && r.commodity == export_matrix.commodity
                && r.exporter != r.importer
        })
        .collect();

    let import_registry = CountryRegistry::from_codes(
        selected
            .iter()
            .flat_map(|r| [r.exporter.as_str(), r.importer.as_str()]),
    );
    let registry = export_matrix.registry.union(&import_registry);
    let mut out = export_matrix.embed(&registry);
    let n = out.n;

    let mut reported: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in &selected {
        let i = registry.id(&r.importer).expect("registered");
        let j = registry.id(&r.exporter).expect("registered");
        reported.entry((i, j)).or_default().push(r.value);
    }
    for ((i, j), mut parts) in reported {
        if parts.len() > 1 {
            log::warn!(
                "{} import records for {} -> {} in {}/{}; summed",
                parts.len(),
                registry.code(j),
                registry.code(i),
                out.year,
                out.commodity
            );
        }
        let cell = &mut out.values[i * n + j];
        if *cell == 0.0 {
            parts.sort_by(f64::total_cmp);
            *cell = crate::numeric::sum(&parts);
        }
    }
    out
}

/// Reads a flow CSV and builds the matrix for one snapshot.
pub fn load_flows<R: Read>(
    source: R,
    year: i32,
    commodity: &str,
) -> Result<MoneyMatrix, IngestError> {
    let records = read_records(source)?;
    MoneyMatrix::from_records(&records, year, commodity)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassVectors {
    /// `export[j] = Σ_i M_ij`
    pub export: Vec<f64>,
    /// `import[i] = Σ_j M_ij`
    pub import: Vec<f64>,
    pub total: f64,
}

/// Export masses, import masses and the total mass `M_T`.
pub fn mass_vectors(m: &MoneyMatrix) -> MassVectors {
    let n = m.n;
    let mut export = vec![CompensatedSum::new(); n];
    let mut import = Vec::with_capacity(n);
    let mut total = CompensatedSum::new();
    for i in 0..n {
        let mut row = CompensatedSum::new();
        for (j, acc) in export.iter_mut().enumerate() {
            let v = m.get(i, j);
            acc.add(v);
            row.add(v);
            total.add(v);
        }
        import.push(row.value());
    }
    MassVectors {
        export: export.iter().map(CompensatedSum::value).collect(),
        import,
        total: total.value(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkStats {
    pub links_total: usize,
    pub links_per_country: f64,
}

/// Number of strictly positive flows and their average per country.
pub fn link_stats(m: &MoneyMatrix) -> LinkStats {
    let links_total = m.values.iter().filter(|&&v| v > 0.0).count();
    let links_per_country = if m.n == 0 {
        0.0
    } else {
        links_total as f64 / m.n as f64
    };
    LinkStats {
        links_total,
        links_per_country,
    }
}

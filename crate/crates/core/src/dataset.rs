//! Labeled and unlabeled datasets, CSV ingestion and the random
//! labeled/unlabeled splits used by coverage studies.

use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::resampling::RngStream;
use crate::{Error, Result};

/// Features and outcomes without model predictions.
///
/// Input to cross-fitting, where predictions are produced by fold models.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    features: Array2<f64>,
    outcomes: Vec<f64>,
}

impl Observations {
    pub fn new(features: Array2<f64>, outcomes: Vec<f64>) -> Result<Self> {
        if features.nrows() != outcomes.len() {
            return Err(Error::Validation(format!(
                "feature matrix has {} rows but there are {} outcomes",
                features.nrows(),
                outcomes.len()
            )));
        }
        if outcomes.len() < 2 {
            return Err(Error::Validation(format!(
                "at least 2 labeled rows are required, got {}",
                outcomes.len()
            )));
        }
        check_finite(features.iter(), "features")?;
        check_finite(outcomes.iter(), "outcomes")?;
        Ok(Self { features, outcomes })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn with_predictions(self, predictions: Vec<f64>) -> Result<LabeledDataset> {
        LabeledDataset::new(self.features, self.outcomes, predictions)
    }
}

/// Labeled rows `(X_i, Y_i)` together with model predictions `f(X_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    outcomes: Vec<f64>,
    predictions: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, outcomes: Vec<f64>, predictions: Vec<f64>) -> Result<Self> {
        let n = outcomes.len();
        if features.nrows() != n || predictions.len() != n {
            return Err(Error::Validation(format!(
                "row counts differ: {} feature rows, {} outcomes, {} predictions",
                features.nrows(),
                n,
                predictions.len()
            )));
        }
        if n < 2 {
            return Err(Error::Validation(format!(
                "at least 2 labeled rows are required, got {n}"
            )));
        }
        check_finite(features.iter(), "features")?;
        check_finite(outcomes.iter(), "outcomes")?;
        check_finite(predictions.iter(), "predictions")?;
        Ok(Self {
            features,
            outcomes,
            predictions,
        })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }

    /// Drops the prediction column.
    pub fn observations(&self) -> Observations {
        Observations {
            features: self.features.clone(),
            outcomes: self.outcomes.clone(),
        }
    }

    /// Copies the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), rows),
            outcomes: rows.iter().map(|&i| self.outcomes[i]).collect(),
            predictions: rows.iter().map(|&i| self.predictions[i]).collect(),
        }
    }
}

/// Unlabeled rows `X̃_i` together with model predictions `f(X̃_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledDataset {
    features: Array2<f64>,
    predictions: Vec<f64>,
}

impl UnlabeledDataset {
    pub fn new(features: Array2<f64>, predictions: Vec<f64>) -> Result<Self> {
        if features.nrows() != predictions.len() {
            return Err(Error::Validation(format!(
                "row counts differ: {} feature rows, {} predictions",
                features.nrows(),
                predictions.len()
            )));
        }
        if predictions.len() < 2 {
            return Err(Error::Validation(format!(
                "at least 2 unlabeled rows are required, got {}",
                predictions.len()
            )));
        }
        check_finite(features.iter(), "features")?;
        check_finite(predictions.iter(), "predictions")?;
        Ok(Self {
            features,
            predictions,
        })
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }
}

/// Checks that a labeled/unlabeled pair has matching feature dimension.
pub fn check_compatible(labeled: &LabeledDataset, unlabeled: &UnlabeledDataset) -> Result<()> {
    if labeled.dim() != unlabeled.dim() {
        return Err(Error::Validation(format!(
            "labeled data has {} feature columns but unlabeled data has {}",
            labeled.dim(),
            unlabeled.dim()
        )));
    }
    Ok(())
}

fn check_finite<'a>(values: impl Iterator<Item = &'a f64>, what: &str) -> Result<()> {
    for (i, v) in values.enumerate() {
        if !v.is_finite() {
            return Err(Error::Validation(format!(
                "non-finite value {v} in {what} (entry {i})"
            )));
        }
    }
    Ok(())
}

/// Column roles for CSV ingestion.
///
/// When `features` is omitted, every column that is neither the outcome nor
/// the prediction is used as a feature, in header order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    #[serde(default)]
    pub outcome: Option<String>,
    #[serde(default)]
    pub prediction: Option<String>,
    #[serde(default)]
    pub features: Option<Vec<String>>,
}

impl CsvSchema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }
}

/// A rectangular numeric table read from CSV, with the header kept.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path, wanted: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(|h| h.trim().to_owned())
            .collect();
        let mut positions = Vec::with_capacity(wanted.len());
        for name in wanted {
            let pos = header.iter().position(|h| h == name).ok_or_else(|| {
                Error::Schema(format!("column `{name}` not found in {}", path.display()))
            })?;
            positions.push(pos);
        }
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let mut row = Vec::with_capacity(positions.len());
            for (&pos, name) in positions.iter().zip(wanted) {
                let cell = record.get(pos).unwrap_or("").trim();
                let value: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: i + 1,
                    column: (*name).to_owned(),
                    message: format!("cannot parse {cell:?} as a number"),
                })?;
                row.push(value);
            }
            rows.push(row);
        }
        Ok(Self {
            header: wanted.iter().map(|s| (*s).to_owned()).collect(),
            rows,
        })
    }

    fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    fn matrix(&self, cols: std::ops::Range<usize>) -> Array2<f64> {
        let width = cols.len();
        Array2::from_shape_fn((self.rows.len(), width), |(i, j)| self.rows[i][cols.start + j])
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if let csv::ErrorKind::Io(_) = e.kind() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_owned(),
                source,
            },
            _ => unreachable!(),
        }
    } else {
        Error::Validation(format!("{}: malformed CSV: {e}", path.display()))
    }
}

fn header_names(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    Ok(reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect())
}

fn feature_names(path: &Path, schema: &CsvSchema, skip: &[&str]) -> Result<Vec<String>> {
    match &schema.features {
        Some(f) => Ok(f.clone()),
        None => Ok(header_names(path)?
            .into_iter()
            .filter(|h| !skip.contains(&h.as_str()))
            .collect()),
    }
}

fn require<'a>(field: &'a Option<String>, what: &str) -> Result<&'a str> {
    field
        .as_deref()
        .ok_or_else(|| Error::Schema(format!("schema does not name the {what} column")))
}

/// Reads a labeled CSV file: features, outcome and prediction columns.
pub fn load_labeled_csv(path: &Path, schema: &CsvSchema) -> Result<LabeledDataset> {
    let outcome = require(&schema.outcome, "outcome")?;
    let prediction = require(&schema.prediction, "prediction")?;
    let features = feature_names(path, schema, &[outcome, prediction])?;
    let mut wanted: Vec<&str> = features.iter().map(String::as_str).collect();
    wanted.push(outcome);
    wanted.push(prediction);
    let table = Table::read(path, &wanted)?;
    let d = features.len();
    debug_assert_eq!(table.header.len(), d + 2);
    LabeledDataset::new(table.matrix(0..d), table.column(d), table.column(d + 1))
}

/// Reads a labeled CSV file without requiring a prediction column.
pub fn load_observations_csv(path: &Path, schema: &CsvSchema) -> Result<Observations> {
    let outcome = require(&schema.outcome, "outcome")?;
    let mut skip = vec![outcome];
    if let Some(p) = schema.prediction.as_deref() {
        skip.push(p);
    }
    let features = feature_names(path, schema, &skip)?;
    let mut wanted: Vec<&str> = features.iter().map(String::as_str).collect();
    wanted.push(outcome);
    let table = Table::read(path, &wanted)?;
    let d = features.len();
    Observations::new(table.matrix(0..d), table.column(d))
}

/// Reads an unlabeled CSV file: features and prediction columns. The
/// schema's outcome column, if any, is ignored.
pub fn load_unlabeled_csv(path: &Path, schema: &CsvSchema) -> Result<UnlabeledDataset> {
    let prediction = require(&schema.prediction, "prediction")?;
    let mut skip = vec![prediction];
    if let Some(o) = schema.outcome.as_deref() {
        skip.push(o);
    }
    let features = feature_names(path, schema, &skip)?;
    let mut wanted: Vec<&str> = features.iter().map(String::as_str).collect();
    wanted.push(prediction);
    let table = Table::read(path, &wanted)?;
    let d = features.len();
    UnlabeledDataset::new(table.matrix(0..d), table.column(d))
}

/// Reads only the feature columns of an unlabeled CSV file.
pub fn load_unlabeled_features_csv(path: &Path, schema: &CsvSchema) -> Result<Array2<f64>> {
    let mut skip = Vec::new();
    skip.extend(schema.outcome.as_deref());
    skip.extend(schema.prediction.as_deref());
    let features = feature_names(path, schema, &skip)?;
    let wanted: Vec<&str> = features.iter().map(String::as_str).collect();
    let table = Table::read(path, &wanted)?;
    if table.rows.len() < 2 {
        return Err(Error::Validation(format!(
            "at least 2 unlabeled rows are required, got {}",
            table.rows.len()
        )));
    }
    let m = table.matrix(0..features.len());
    check_finite(m.iter(), "features")?;
    Ok(m)
}

/// Row indices of one labeled/unlabeled split, both sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
}

/// Chooses a uniformly random subset of `n` out of `total` rows.
pub fn split_indices(total: usize, n: usize, stream: &RngStream) -> Result<SplitIndices> {
    if n < 2 || n + 2 > total {
        return Err(Error::argument(format!(
            "labeled size {n} must satisfy 2 <= n <= {} (total rows {total})",
            total.saturating_sub(2)
        )));
    }
    let mut rng = stream.rng();
    let mut labeled = index::sample(&mut rng, total, n).into_vec();
    labeled.sort_unstable();
    let mut is_labeled = vec![false; total];
    for &i in &labeled {
        is_labeled[i] = true;
    }
    let unlabeled = (0..total).filter(|&i| !is_labeled[i]).collect();
    Ok(SplitIndices { labeled, unlabeled })
}

/// Splits a fully labeled dataset into a labeled part of size `n` and an
/// unlabeled remainder whose outcomes are discarded.
pub fn split_trial(
    full: &LabeledDataset,
    n: usize,
    stream: &RngStream,
) -> Result<(LabeledDataset, UnlabeledDataset)> {
    let idx = split_indices(full.len(), n, stream)?;
    let labeled = full.select(&idx.labeled);
    let unlabeled = UnlabeledDataset {
        features: full.features.select(Axis(0), &idx.unlabeled),
        predictions: idx.unlabeled.iter().map(|&i| full.predictions[i]).collect(),
    };
    Ok((labeled, unlabeled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn schema(outcome: Option<&str>, prediction: &str, features: Option<&[&str]>) -> CsvSchema {
        CsvSchema {
            outcome: outcome.map(str::to_owned),
            prediction: Some(prediction.to_owned()),
            features: features.map(|f| f.iter().map(|s| (*s).to_owned()).collect()),
        }
    }

    #[test]
    fn loads_three_row_labeled_file() {
        let f = write_tmp("x,y,fhat\n1,2,2.5\n2,4,3.5\n3,6,6\n");
        let ds = load_labeled_csv(f.path(), &schema(Some("y"), "fhat", Some(&["x"]))).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 1);
        assert_eq!(ds.outcomes(), &[2.0, 4.0, 6.0]);
        assert_eq!(ds.predictions(), &[2.5, 3.5, 6.0]);
        assert_eq!(ds.features(), array![[1.0], [2.0], [3.0]]);
    }

    #[test]
    fn parse_error_names_the_row() {
        let f = write_tmp("x,y,fhat\n1,2,2\n2,abc,3\n3,6,6\n");
        let err = load_labeled_csv(f.path(), &schema(Some("y"), "fhat", None)).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn loads_unlabeled_file_without_outcome() {
        let f = write_tmp("x1,x2,fhat\n1,2,0\n2,3,1\n3,4,0\n4,5,1\n5,6,1\n");
        let ds =
            load_unlabeled_csv(f.path(), &schema(Some("y"), "fhat", Some(&["x1", "x2"]))).unwrap();
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.dim(), 2);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let f = write_tmp("x,fhat\n1,2\n2,3\n");
        let err = load_labeled_csv(f.path(), &schema(Some("y"), "fhat", None)).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err:?}");
    }

    #[test]
    fn non_finite_cell_is_validation_error() {
        let f = write_tmp("x,y,fhat\n1,NaN,2\n2,3,3\n");
        let err = load_labeled_csv(f.path(), &schema(Some("y"), "fhat", None)).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err:?}");
        let f = write_tmp("x,y,fhat\n1,inf,2\n2,3,3\n");
        let err = load_labeled_csv(f.path(), &schema(Some("y"), "fhat", None)).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err:?}");
    }

    #[test]
    fn default_features_are_remaining_columns() {
        let f = write_tmp("a,y,b,fhat\n1,2,3,4\n5,6,7,8\n");
        let ds = load_labeled_csv(f.path(), &schema(Some("y"), "fhat", None)).unwrap();
        assert_eq!(ds.features(), array![[1.0, 3.0], [5.0, 7.0]]);
    }

    fn toy(total: usize) -> LabeledDataset {
        let x = Array2::from_shape_fn((total, 2), |(i, j)| (i * 10 + j) as f64);
        let y = (0..total).map(|i| i as f64 * 0.5).collect();
        let f = (0..total).map(|i| i as f64 * 0.25).collect();
        LabeledDataset::new(x, y, f).unwrap()
    }

    #[test]
    fn split_partitions_rows() {
        let full = toy(10);
        let s = RngStream::new(1, &[0]);
        let (lab, unl) = split_trial(&full, 4, &s).unwrap();
        assert_eq!(lab.len(), 4);
        assert_eq!(unl.len(), 6);
        let idx = split_indices(10, 4, &s).unwrap();
        let mut all: Vec<usize> = idx.labeled.iter().chain(&idx.unlabeled).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        for (k, &i) in idx.labeled.iter().enumerate() {
            assert_eq!(lab.outcomes()[k].to_bits(), full.outcomes()[i].to_bits());
            assert_eq!(lab.predictions()[k].to_bits(), full.predictions()[i].to_bits());
            assert_eq!(lab.features().row(k), full.features().row(i));
        }
        for (k, &i) in idx.unlabeled.iter().enumerate() {
            assert_eq!(unl.predictions()[k].to_bits(), full.predictions()[i].to_bits());
            assert_eq!(unl.features().row(k), full.features().row(i));
        }
    }

    #[test]
    fn split_is_deterministic() {
        let s = RngStream::new(99, &[3, 0]);
        assert_eq!(split_indices(50, 20, &s).unwrap(), split_indices(50, 20, &s).unwrap());
    }

    #[test]
    fn split_rejects_too_few_unlabeled() {
        let full = toy(10);
        assert!(matches!(
            split_trial(&full, 9, &RngStream::new(0, &[])),
            Err(Error::Argument(_))
        ));
        assert!(split_trial(&full, 1, &RngStream::new(0, &[])).is_err());
        assert!(split_trial(&full, 8, &RngStream::new(0, &[])).is_ok());
    }

    #[test]
    fn split_inclusion_frequency_is_uniform() {
        let (total, n, seeds) = (20usize, 6usize, 4000u64);
        let mut hits = vec![0usize; total];
        for seed in 0..seeds {
            for i in split_indices(total, n, &RngStream::new(seed, &[0])).unwrap().labeled {
                hits[i] += 1;
            }
        }
        let p = n as f64 / total as f64;
        let se = (p * (1.0 - p) / seeds as f64).sqrt();
        for h in hits {
            let freq = h as f64 / seeds as f64;
            assert!((freq - p).abs() <= 3.0 * se + 1e-12, "freq {freq} vs {p}");
        }
    }
}

//! Plot-ready tables from a [`TrialSummary`], as CSV or JSON.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Method, TrialSummary};
use crate::{Error, Result};

/// One row per `(method, n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub n: usize,
    pub coverage: f64,
    pub mean_width: f64,
    pub ground_truth: f64,
}

/// One recorded interval of a displayed trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayedInterval {
    pub method: Method,
    pub n: usize,
    pub trial: usize,
    pub lower: f64,
    pub upper: f64,
    pub point: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTables {
    pub aggregate: Vec<AggregateRow>,
    pub displayed: Vec<DisplayedInterval>,
}

pub fn summarize_to_tables(summary: &TrialSummary) -> ReportTables {
    ReportTables {
        aggregate: summary
            .cells
            .iter()
            .map(|c| AggregateRow {
                method: c.method,
                n: c.n,
                coverage: c.coverage,
                mean_width: c.mean_width,
                ground_truth: summary.ground_truth,
            })
            .collect(),
        displayed: summary.displayed.clone(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Validation(format!("report CSV: {e}"))
}

fn write_rows<T: Serialize>(rows: &[T], header: &[&str], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Validation(format!("report CSV: {e}")))
}

fn read_rows<T: for<'de> Deserialize<'de>>(input: impl Read) -> Result<Vec<T>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)
}

pub const AGGREGATE_HEADER: [&str; 5] = ["method", "n", "coverage", "mean_width", "ground_truth"];
pub const DISPLAYED_HEADER: [&str; 6] = ["method", "n", "trial", "lower", "upper", "point"];

impl ReportTables {
    /// Header is written even when there are no rows.
    pub fn write_aggregate_csv(&self, out: impl Write) -> Result<()> {
        write_rows(&self.aggregate, &AGGREGATE_HEADER, out)
    }

    pub fn write_displayed_csv(&self, out: impl Write) -> Result<()> {
        write_rows(&self.displayed, &DISPLAYED_HEADER, out)
    }

    pub fn aggregate_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_aggregate_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn displayed_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_displayed_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report tables serialize")
    }

    pub fn from_csv(aggregate: impl Read, displayed: impl Read) -> Result<Self> {
        Ok(Self {
            aggregate: read_rows(aggregate)?,
            displayed: read_rows(displayed)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::CellSummary;

    fn summary() -> TrialSummary {
        let cells = [Method::Ppboot, Method::Classical]
            .into_iter()
            .flat_map(|m| {
                [50, 100, 200].into_iter().map(move |n| CellSummary {
                    method: m,
                    n,
                    trials: 7,
                    covered: 6,
                    failed: 0,
                    coverage: 6.0 / 7.0,
                    mean_width: 0.1 / n as f64 + 1e-17,
                })
            })
            .collect();
        TrialSummary {
            ground_truth: 0.299_999_999_999_999_97,
            cells,
            displayed: vec![DisplayedInterval {
                method: Method::Ppboot,
                n: 50,
                trial: 3,
                lower: -1.0 / 3.0,
                upper: 2.0f64.sqrt(),
                point: 1e-300,
            }],
        }
    }

    #[test]
    fn six_rows_with_bounded_coverage() {
        let t = summarize_to_tables(&summary());
        assert_eq!(t.aggregate.len(), 6);
        assert!(t.aggregate.iter().all(|r| (0.0..=1.0).contains(&r.coverage)));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = summarize_to_tables(&summary());
        let a = t.aggregate_csv().unwrap();
        let d = t.displayed_csv().unwrap();
        assert!(a.starts_with("method,n,coverage,mean_width,ground_truth\nppboot,50,"));
        assert!(d.starts_with("method,n,trial,lower,upper,point\n"));
        let back = ReportTables::from_csv(a.as_bytes(), d.as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn json_round_trip() {
        let t = summarize_to_tables(&summary());
        let back: ReportTables = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert!(t.to_json().contains("\"mean_width\""));
    }

    #[test]
    fn empty_displayed_table_keeps_header() {
        let mut s = summary();
        s.displayed.clear();
        let t = summarize_to_tables(&s);
        assert_eq!(t.displayed_csv().unwrap(), "method,n,trial,lower,upper,point\n");
    }
}

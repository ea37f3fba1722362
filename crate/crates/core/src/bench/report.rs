use super::{BenchmarkTable, RunRecord, SweepResult, SweepSeries};
use crate::error::{Error, Result};

/// Column headers of the summary table, in order.
pub const TABLE_COLUMNS: [&str; 6] = ["Method", "Mean", "1st Quartile", "2nd Quartile", "3rd Quartile", "Time (s)"];

/// Header of the long-format sweep CSV.
pub const SWEEP_HEADER: &str = "estimator,axis_value,median,q1,q3";

/// Header of the per-run log CSV.
pub const RUN_LOG_HEADER: &str = "run,estimator,seed,estimate,truth,squared_error,elapsed,error";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!("unknown table format `{other}`"))),
        }
    }
}

/// One rendered table line as numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub time: f64,
}

impl ReportRow {
    /// Every value rounded to three significant digits, as rendered.
    pub fn rounded(&self) -> Self {
        let r = |v: f64| format_sci3(v).parse().unwrap_or(f64::NAN);
        Self {
            method: self.method.clone(),
            mean: r(self.mean),
            q1: r(self.q1),
            median: r(self.median),
            q3: r(self.q3),
            time: r(self.time),
        }
    }
}

impl BenchmarkTable {
    /// Numeric content of the rendered table; estimators with no successful run are NaN.
    pub fn report_rows(&self) -> Vec<ReportRow> {
        self.rows
            .iter()
            .map(|row| {
                let s = row.summary;
                let get = |f: fn(&crate::metrics::RunSummary) -> f64| s.as_ref().map_or(f64::NAN, f);
                ReportRow {
                    method: row.estimator.clone(),
                    mean: get(|s| s.mean),
                    q1: get(|s| s.q1),
                    median: get(|s| s.median),
                    q3: get(|s| s.q3),
                    time: get(|s| s.mean_time),
                }
            })
            .collect()
    }
}

/// Scientific notation with three significant digits and a signed two-digit exponent.
///
/// ```
/// assert_eq!(natex::bench::format_sci3(0.000000998), "9.98e-07");
/// assert_eq!(natex::bench::format_sci3(9.89), "9.89e+00");
/// ```
pub fn format_sci3(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let raw = format!("{v:.2e}");
    let (mantissa, exp) = raw.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Renders the summary table.
pub fn emit_table(table: &BenchmarkTable, format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(&TABLE_COLUMNS.join(","));
            out.push('\n');
        }
        TableFormat::Markdown => {
            out.push_str(&format!("| {} |\n", TABLE_COLUMNS.join(" | ")));
            out.push_str(&format!("|{}\n", "---|".repeat(TABLE_COLUMNS.len())));
        }
    }
    for row in table.report_rows() {
        let cells = [row.mean, row.q1, row.median, row.q3, row.time].map(format_sci3);
        match format {
            TableFormat::Csv => out.push_str(&format!("{},{}\n", row.method, cells.join(","))),
            TableFormat::Markdown => out.push_str(&format!("| {} | {} |\n", row.method, cells.join(" | "))),
        }
    }
    out
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, line: usize, name: &str) -> Result<&'a str> {
    rec.get(i).ok_or_else(|| Error::Parse {
        row: line,
        column: name.to_string(),
        value: String::new(),
    })
}

fn number(rec: &csv::StringRecord, i: usize, line: usize, name: &str) -> Result<f64> {
    let raw = field(rec, i, line, name)?;
    raw.trim().parse().map_err(|_| Error::Parse {
        row: line,
        column: name.to_string(),
        value: raw.to_string(),
    })
}

fn records(text: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let got = reader.headers()?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        let missing = header.iter().find(|h| !got.iter().any(|g| g == **h)).unwrap_or(&header[0]);
        return Err(Error::MissingColumn {
            column: missing.to_string(),
        });
    }
    reader.records().map(|r| r.map_err(Error::from)).collect()
}

/// Parses CSV produced by [`emit_table`].
pub fn parse_table_csv(text: &str) -> Result<Vec<ReportRow>> {
    records(text, &TABLE_COLUMNS)?
        .iter()
        .enumerate()
        .map(|(k, rec)| {
            let line = k + 1;
            Ok(ReportRow {
                method: field(rec, 0, line, TABLE_COLUMNS[0])?.to_string(),
                mean: number(rec, 1, line, TABLE_COLUMNS[1])?,
                q1: number(rec, 2, line, TABLE_COLUMNS[2])?,
                median: number(rec, 3, line, TABLE_COLUMNS[3])?,
                q3: number(rec, 4, line, TABLE_COLUMNS[4])?,
                time: number(rec, 5, line, TABLE_COLUMNS[5])?,
            })
        })
        .collect()
}

/// Long-format CSV: one row per estimator and axis point.
pub fn emit_sweep(result: &SweepResult) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for s in &result.series {
        for (k, x) in result.axis_values.iter().enumerate() {
            out.push_str(&format!("{},{},{},{},{}\n", s.estimator, x, s.median[k], s.q1[k], s.q3[k]));
        }
    }
    out
}

/// Parses CSV produced by [`emit_sweep`]. Rows must be grouped by estimator
/// with identical axis values in each group.
pub fn parse_sweep_csv(text: &str, axis_name: &str) -> Result<SweepResult> {
    let header: Vec<&str> = SWEEP_HEADER.split(',').collect();
    let mut result = SweepResult {
        axis_name: axis_name.to_string(),
        axis_values: Vec::new(),
        series: Vec::new(),
    };
    let mut axis_of_series: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in records(text, &header)?.iter().enumerate() {
        let line = k + 1;
        let name = field(rec, 0, line, header[0])?;
        if result.series.last().is_none_or(|s: &SweepSeries| s.estimator != name) {
            if result.series.iter().any(|s| s.estimator == name) {
                return Err(Error::Validation {
                    row: line,
                    message: format!("rows for `{name}` are not contiguous"),
                });
            }
            result.series.push(SweepSeries {
                estimator: name.to_string(),
                median: Vec::new(),
                q1: Vec::new(),
                q3: Vec::new(),
            });
            axis_of_series.push(Vec::new());
        }
        let s = result.series.last_mut().expect("pushed above");
        axis_of_series.last_mut().expect("pushed above").push(number(rec, 1, line, header[1])?);
        s.median.push(number(rec, 2, line, header[2])?);
        s.q1.push(number(rec, 3, line, header[3])?);
        s.q3.push(number(rec, 4, line, header[4])?);
    }
    if let Some(first) = axis_of_series.first() {
        let same = |a: &Vec<f64>| a.len() == first.len() && a.iter().zip(first).all(|(x, y)| x.to_bits() == y.to_bits());
        if !axis_of_series.iter().all(same) {
            return Err(Error::Validation {
                row: 0,
                message: "estimators disagree on the axis values".into(),
            });
        }
        result.axis_values = first.clone();
    }
    Ok(result)
}

/// Writes the per-run log as CSV.
pub fn write_run_log(log: &[RunRecord]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(RUN_LOG_HEADER.split(',')).expect("in-memory write");
    for r in log {
        w.write_record([
            r.run.to_string(),
            r.estimator.clone(),
            r.seed.to_string(),
            r.estimate.to_string(),
            r.truth.to_string(),
            r.squared_error.to_string(),
            r.elapsed.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Parses CSV produced by [`write_run_log`].
pub fn parse_run_log(text: &str) -> Result<Vec<RunRecord>> {
    let header: Vec<&str> = RUN_LOG_HEADER.split(',').collect();
    records(text, &header)?
        .iter()
        .enumerate()
        .map(|(k, rec)| {
            let line = k + 1;
            let int = |i: usize| -> Result<u64> {
                let raw = field(rec, i, line, header[i])?;
                raw.parse().map_err(|_| Error::Parse {
                    row: line,
                    column: header[i].to_string(),
                    value: raw.to_string(),
                })
            };
            let error = field(rec, 7, line, header[7])?;
            Ok(RunRecord {
                run: int(0)? as usize,
                estimator: field(rec, 1, line, header[1])?.to_string(),
                seed: int(2)?,
                estimate: number(rec, 3, line, header[3])?,
                truth: number(rec, 4, line, header[4])?,
                squared_error: number(rec, 5, line, header[5])?,
                elapsed: number(rec, 6, line, header[6])?,
                error: (!error.is_empty()).then(|| error.to_string()),
            })
        })
        .collect()
}

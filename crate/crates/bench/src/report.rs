//! Report rows and their CSV form.

use std::io::Write;
use std::path::Path;

use crate::BenchError;

pub const CSV_HEADER: [&str; 10] = [
    "method",
    "horizon",
    "dimension",
    "actual",
    "est_mean",
    "est_sd",
    "avg_runtime_s",
    "reps",
    "seed",
    "params",
];

/// One `(method, horizon)` cell of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub horizon: usize,
    pub dimension: usize,
    pub actual: f64,
    pub est_mean: f64,
    pub est_sd: f64,
    pub avg_runtime_s: f64,
    pub reps: usize,
    pub seed: u64,
    pub params: String,
    /// Individual repetition estimates; not written to CSV.
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

/// `printf("%g")`: 6 significant digits, trailing zeros dropped, exponent
/// form outside `[1e-5, 1e6)`.
pub fn format_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl ExperimentReport {
    /// Writes the CSV form to any sink.
    pub fn write_to<W: Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.horizon.to_string(),
                r.dimension.to_string(),
                format_g(r.actual),
                format_g(r.est_mean),
                format_g(r.est_sd),
                format_g(r.avg_runtime_s),
                r.reps.to_string(),
                r.seed.to_string(),
                r.params.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

/// Writes `report` to `path`.
pub fn write_csv(report: &ExperimentReport, path: &Path) -> Result<(), BenchError> {
    let file = std::fs::File::create(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })?;
    report.write_to(std::io::BufWriter::new(file)).map_err(|source| BenchError::Csv { path: path.to_path_buf(), source })
}

/// Parses CSV written by [`write_csv`]; `estimates` come back empty.
pub fn read_csv(text: &str) -> Result<ExperimentReport, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let field = |k: usize| record.get(k).ok_or(format!("row {line}: missing column {}", CSV_HEADER[k]));
        let num = |k: usize| -> Result<f64, String> {
            field(k)?.parse().map_err(|e| format!("row {line}, {}: {e}", CSV_HEADER[k]))
        };
        let int = |k: usize| -> Result<u64, String> {
            field(k)?.parse().map_err(|e| format!("row {line}, {}: {e}", CSV_HEADER[k]))
        };
        rows.push(ReportRow {
            method: field(0)?.to_string(),
            horizon: int(1)? as usize,
            dimension: int(2)? as usize,
            actual: num(3)?,
            est_mean: num(4)?,
            est_sd: num(5)?,
            avg_runtime_s: num(6)?,
            reps: int(7)? as usize,
            seed: int(8)?,
            params: field(9)?.to_string(),
            estimates: Vec::new(),
        });
    }
    Ok(ExperimentReport { rows })
}

#[cfg(test)]
mod tests {
    use super::format_g;

    #[test]
    fn g_format_matches_printf() {
        let cases = [
            (1.25, "1.25"),
            (27.5, "27.5"),
            (100.0, "100"),
            (72.020_123, "72.0201"),
            (0.000_123_456_7, "0.000123457"),
            (0.000_012_345_67, "1.23457e-05"),
            (1_234_567.0, "1.23457e+06"),
            (999_999.6, "1e+06"),
            (-0.5, "-0.5"),
            (245.0, "245"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g(x), want, "{x}");
        }
    }
}

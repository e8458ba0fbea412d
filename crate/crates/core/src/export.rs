//! Report serialization and artifact files.
//!
//! All floats are written with 12 significant digits and JSON objects have
//! sorted keys, so identical runs produce identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::Format;
use crate::error::{Error, Result};
use crate::pipeline::{BenchRow, RunReport, Trace};

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap()
}

/// Formats `x` with 12 significant digits for text files.
pub fn fmt_sig(x: f64) -> String {
    let r = round_sig(x);
    if r.is_finite() {
        format!("{r}")
    } else {
        format!("{x}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap());
            *v = serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with sorted keys and 12-digit floats.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("reports serialize to JSON");
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).unwrap();
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn tuple_label(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_sig(v)).collect::<Vec<_>>().join(";")
}

/// Writes `design.csv`, `trace.csv`, `sequence.csv`, `graph.dot` and
/// `report.json` as selected by `formats`. Trace, sequence and graph files are
/// skipped when the report carries no trace or realization. Returns the
/// written paths.
pub fn export_artifacts(report: &RunReport, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    if formats.contains(&Format::Csv) {
        let path = dir.join("design.csv");
        write_design_csv(&path, report)?;
        written.push(path);

        if let Some(trace) = &report.trace {
            let path = dir.join("trace.csv");
            write_trace_csv(&path, trace)?;
            written.push(path);
        }

        if let Some(r) = &report.realization {
            let path = dir.join("sequence.csv");
            write_sequence_csv(&path, &r.sequence)?;
            written.push(path);
        }
    }
    if formats.contains(&Format::Dot) {
        if let Some(r) = &report.realization {
            let path = dir.join("graph.dot");
            let graph = r.report.graph(report.levels, report.subsequence_length)?;
            write_file(&path, &graph.to_dot(&report.grid, &r.report.added_edges)?)?;
            written.push(path);
        }
    }
    if formats.contains(&Format::Json) {
        let path = dir.join("report.json");
        write_file(&path, &to_json_string(report))?;
        written.push(path);
    }
    Ok(written)
}

fn write_design_csv(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["k", "subsequence", "weight"]).map_err(&err)?;
    for e in &report.design {
        w.write_record([e.k.to_string(), tuple_label(&e.values), fmt_sig(e.weight)])
            .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_trace_csv(path: &Path, trace: &Trace) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["iteration", "det", "max_dispersion"]).map_err(&err)?;
    for (i, (d, v)) in trace.det.iter().zip(&trace.max_dispersion).enumerate() {
        w.write_record([(i + 1).to_string(), fmt_sig(*d), fmt_sig(*v)])
            .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sequence_csv(path: &Path, sequence: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["t", "u"]).map_err(&err)?;
    for (t, u) in sequence.iter().enumerate() {
        w.write_record([(t + 1).to_string(), fmt_sig(*u)]).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads the `u` column of a `t,u` sequence file.
pub fn read_sequence_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == "u")
        .ok_or_else(|| Error::domain(format!("{} has no `u` column", path.display())))?;
    r.records()
        .enumerate()
        .map(|(row, rec)| {
            let rec = rec.map_err(csv_err(path))?;
            let field = rec.get(col).unwrap_or("").trim();
            field.parse::<f64>().map_err(|_| {
                Error::domain(format!(
                    "{} row {}: `{field}` is not a number",
                    path.display(),
                    row + 1
                ))
            })
        })
        .collect()
}

pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record([
        "levels",
        "memory",
        "basis_size",
        "basis_seconds",
        "optimize_seconds",
        "iterations",
        "converged",
        "det",
    ])
    .map_err(&err)?;
    for r in rows {
        w.write_record([
            r.levels.to_string(),
            r.memory.to_string(),
            r.basis_size.to_string(),
            fmt_sig(r.basis_seconds),
            fmt_sig(r.optimize_seconds),
            r.iterations.to_string(),
            r.converged.to_string(),
            fmt_sig(r.det),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_to_twelve_digits() {
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(1827.182908872396), 1827.18290887);
        assert_eq!(round_sig(0.0), 0.0);
        assert!(round_sig(f64::NEG_INFINITY).is_infinite());
        assert_eq!(fmt_sig(-5.0 / 9.0), "-0.555555555556");
    }

    #[test]
    fn json_keys_are_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: f64,
            alpha: Vec<f64>,
        }
        let s = to_json_string(&S {
            zeta: 2.0 / 3.0,
            alpha: vec![f64::NEG_INFINITY],
        });
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
        assert!(s.contains("0.666666666667"));
        assert!(s.contains("null"));
    }

    #[test]
    fn sequence_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.csv");
        let seq = vec![-1.0, 1.0 / 3.0, 1.0];
        write_sequence_csv(&path, &seq).unwrap();
        let back = read_sequence_csv(&path).unwrap();
        for (a, b) in seq.iter().zip(&back) {
            assert!((a - b).abs() < 1e-11);
        }
        fs::write(&path, "t,u\n1,abc\n").unwrap();
        assert!(read_sequence_csv(&path).is_err());
    }
}

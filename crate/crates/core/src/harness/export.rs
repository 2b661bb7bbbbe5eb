//! CSV and JSON tables with a small `key=value` settings preamble.
//!
//! CSV files start with `# key=value` lines followed by a mandatory header
//! row. JSON files hold `{"settings": {...}, "records": [...]}`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table<T> {
    pub settings: BTreeMap<String, String>,
    pub records: Vec<T>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn fmt_err(path: &Path, message: impl ToString) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Column names of `T` as written by the CSV serializer.
pub fn csv_header<T: Serialize + Default>() -> Result<Vec<String>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(T::default())
        .map_err(|e| Error::Unsupported(format!("record layout: {e}")))?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Unsupported(format!("record layout: {e}")))?;
    let text = String::from_utf8_lossy(&bytes);
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| Error::Unsupported(format!("record layout: {e}")))?;
    Ok(header.iter().map(str::to_string).collect())
}

/// Writes `records` to `path`. An empty slice still yields a header.
pub fn export<T: Serialize + Default>(
    records: &[T],
    format: Format,
    path: &Path,
    settings: &BTreeMap<String, String>,
) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Csv => {
            for (k, v) in settings {
                writeln!(out, "# {k}={v}").map_err(io_err(path))?;
            }
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
            w.write_record(csv_header::<T>()?).map_err(|e| fmt_err(path, e))?;
            for r in records {
                w.serialize(r).map_err(|e| fmt_err(path, e))?;
            }
            w.flush().map_err(io_err(path))?;
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Envelope<'a, T> {
                settings: &'a BTreeMap<String, String>,
                records: &'a [T],
            }
            serde_json::to_writer_pretty(&mut out, &Envelope { settings, records })
                .map_err(|e| fmt_err(path, e))?;
            writeln!(out).map_err(io_err(path))?;
        }
    }
    out.flush().map_err(io_err(path))
}

/// Reads a file written by [`export`].
pub fn import<T: DeserializeOwned>(format: Format, path: &Path) -> Result<Table<T>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    match format {
        Format::Json => serde_json::from_str(&text).map_err(|e| fmt_err(path, e)),
        Format::Csv => {
            let mut settings = BTreeMap::new();
            let mut body_start = 0;
            for line in text.split_inclusive('\n') {
                let Some(rest) = line.strip_prefix('#') else { break };
                body_start += line.len();
                if let Some((k, v)) = rest.trim().split_once('=') {
                    settings.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
            let body = &text[body_start..];
            if body.trim().is_empty() {
                return Err(fmt_err(path, "missing header row"));
            }
            let mut r = csv::ReaderBuilder::new().from_reader(body.as_bytes());
            let records = r
                .deserialize()
                .enumerate()
                .map(|(i, rec)| rec.map_err(|e| fmt_err(path, format!("record {}: {e}", i + 1))))
                .collect::<Result<Vec<T>>>()?;
            Ok(Table { settings, records })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::CheckRow;

    fn rows() -> Vec<CheckRow> {
        vec![
            CheckRow::new("s", "a,b".into(), 0.1 + 0.2, 1.0 / 3.0, Some(1e-8)),
            CheckRow::new("s", "c".into(), f64::MIN_POSITIVE, -1e300, None),
        ]
    }

    fn settings() -> BTreeMap<String, String> {
        BTreeMap::from([("tol".to_string(), "1e-8".to_string())])
    }

    #[test]
    fn round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        for (fmt, name) in [(Format::Csv, "t.csv"), (Format::Json, "t.json")] {
            let p = dir.path().join(name);
            export(&rows(), fmt, &p, &settings()).unwrap();
            let t: Table<CheckRow> = import(fmt, &p).unwrap();
            assert_eq!(t.records, rows());
            assert_eq!(t.settings, settings());
        }
    }

    #[test]
    fn empty_table_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        export::<CheckRow>(&[], Format::Csv, &p, &BTreeMap::new()).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.trim(), "suite,case,measured,reference,deviation,tolerance,pass");
        let t: Table<CheckRow> = import(Format::Csv, &p).unwrap();
        assert!(t.records.is_empty());
    }

    #[test]
    fn bad_path_is_named() {
        let p = Path::new("/nonexistent-dir/x/out.csv");
        let e = export(&rows(), Format::Csv, p, &BTreeMap::new()).unwrap_err();
        assert!(e.to_string().contains("/nonexistent-dir/x/out.csv"));
        let e = import::<CheckRow>(Format::Json, p).unwrap_err();
        assert!(e.to_string().contains("/nonexistent-dir/x/out.csv"));
    }
}

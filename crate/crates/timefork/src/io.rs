//! Header ingestion and atomic file output.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use timefork_core::forensics::{sort_records, ForensicsError, HeaderRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeaderFormat {
    Csv,
    Jsonl,
}

impl HeaderFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "jsonl" | "ndjson" => Some(Self::Jsonl),
            _ => None,
        }
    }

    /// Guesses from the file extension; CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("jsonl") || e.eq_ignore_ascii_case("ndjson") => Self::Jsonl,
            _ => Self::Csv,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Duplicate(#[from] ForensicsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses headers and sorts them by `(chain, height)`.
pub fn load_headers<R: Read>(source: R, format: HeaderFormat) -> Result<Vec<HeaderRecord>, LoadError> {
    let mut records = match format {
        HeaderFormat::Csv => load_csv(source)?,
        HeaderFormat::Jsonl => load_jsonl(source)?,
    };
    sort_records(&mut records)?;
    Ok(records)
}

fn load_csv<R: Read>(source: R) -> Result<Vec<HeaderRecord>, LoadError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let mut out = Vec::new();
    for row in rdr.deserialize::<HeaderRecord>() {
        out.push(row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            let message = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            };
            LoadError::Parse { line, message }
        })?);
    }
    Ok(out)
}

fn load_jsonl<R: Read>(source: R) -> Result<Vec<HeaderRecord>, LoadError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| LoadError::Parse {
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_headers_file(path: &Path, format: Option<HeaderFormat>) -> Result<Vec<HeaderRecord>, LoadError> {
    let f = std::fs::File::open(path)?;
    load_headers(f, format.unwrap_or_else(|| HeaderFormat::from_path(path)))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_sorted() {
        let data = "chain,height,timestamp,miner\nx,3,30,a\nx,1,10,b\nx,2,20,a\n";
        let r = load_headers(data.as_bytes(), HeaderFormat::Csv).unwrap();
        assert_eq!(r.iter().map(|h| h.height).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(r[0].difficulty, None);
    }

    #[test]
    fn optional_difficulty() {
        let data = "chain,height,timestamp,miner,difficulty\nx,1,10,b,12345\nx,2,20,a,\n";
        let r = load_headers(data.as_bytes(), HeaderFormat::Csv).unwrap();
        assert_eq!(r[0].difficulty, Some(12345));
        assert_eq!(r[1].difficulty, None);
    }

    #[test]
    fn missing_miner_reports_line() {
        let data = "chain,height,timestamp,miner\nx,1,10,a\nx,2,20\n";
        match load_headers(data.as_bytes(), HeaderFormat::Csv) {
            Err(LoadError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let data = "chain,timestamp,height\nx,1,1\n";
        assert!(matches!(load_headers(data.as_bytes(), HeaderFormat::Csv), Err(LoadError::Parse { line: 2, .. })));
    }

    #[test]
    fn duplicate_height() {
        let data = "chain,height,timestamp,miner\nx,1,10,a\nx,1,11,b\n";
        assert!(matches!(load_headers(data.as_bytes(), HeaderFormat::Csv), Err(LoadError::Duplicate(_))));
    }

    #[test]
    fn jsonl() {
        let data = "{\"chain\":\"e\",\"height\":2,\"timestamp\":5,\"miner\":\"m\"}\n\n{\"chain\":\"e\",\"height\":1,\"timestamp\":1,\"miner\":\"m\",\"difficulty\":7}\n{\"chain\":\"e\"}\n";
        match load_headers(data.as_bytes(), HeaderFormat::Jsonl) {
            Err(LoadError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let ok: String = data.lines().take(3).map(|l| format!("{l}\n")).collect();
        let r = load_headers(ok.as_bytes(), HeaderFormat::Jsonl).unwrap();
        assert_eq!(r[0].difficulty, Some(7));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}

//! CSV / JSONL readers and writers for scores, catalogs and arrivals.
//!
//! CSV headers: `user_id,item_id,score`, `item_id,provider_id[,merit]` and
//! `interval,user_id`. JSONL files carry one object per line with the same
//! field names.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Arrival, ArrivalSchedule, PreferenceStore, ProviderCatalog};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Jsonl,
}

impl DataFormat {
    /// Guesses the format from the file extension (`.jsonl`/`.json` → JSONL).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => DataFormat::Jsonl,
            _ => DataFormat::Csv,
        }
    }
}

impl FromStr for DataFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "jsonl" => Ok(DataFormat::Jsonl),
            other => Err(Error::Validation(format!("unknown data format `{other}`"))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreRow {
    user_id: String,
    item_id: String,
    score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogRow {
    item_id: String,
    provider_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    merit: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrivalRow {
    interval: usize,
    user_id: String,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads every row of `path`, handing `(line number, row)` to `sink`.
fn read_rows<T, F>(path: &Path, format: DataFormat, mut sink: F) -> Result<()>
where
    T: DeserializeOwned,
    F: FnMut(usize, T) -> Result<()>,
{
    let file = open(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    if format == DataFormat::Jsonl {
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row = serde_json::from_str(&line).map_err(|e| parse_err(n + 1, e.to_string()))?;
            sink(n + 1, row)?;
        }
        return Ok(());
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => return Ok(()),
            Ok(true) => {
                let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
                let row: T = record
                    .deserialize(Some(&headers))
                    .map_err(|e| parse_err(line, e.to_string()))?;
                sink(line, row)?;
            }
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                return Err(parse_err(line, e.to_string()));
            }
        }
    }
}

/// Loads a score file. Repeated (user, item) rows keep the last value; see
/// [`PreferenceStore::duplicate_count`].
pub fn load_scores(path: &Path, format: DataFormat) -> Result<PreferenceStore> {
    let mut b = PreferenceStore::builder();
    read_rows(path, format, |line, row: ScoreRow| {
        b.insert(&row.user_id, &row.item_id, row.score)
            .map_err(|e| match e {
                Error::Validation(m) => Error::Validation(format!("{}: line {line}: {m}", path.display())),
                other => other,
            })
    })?;
    let store = b.build();
    if store.duplicate_count() > 0 {
        log::warn!(
            "{}: {} duplicate score rows overwritten",
            path.display(),
            store.duplicate_count()
        );
    }
    Ok(store)
}

/// Loads a catalog. An optional `merit` column overrides the count-based
/// merit; its value must agree across rows of the same provider.
pub fn load_catalog(path: &Path, format: DataFormat) -> Result<ProviderCatalog> {
    let mut pairs = Vec::new();
    let mut merits: Vec<(String, f64)> = Vec::new();
    read_rows(path, format, |_, row: CatalogRow| {
        if let Some(m) = row.merit {
            merits.push((row.provider_id.clone(), m));
        }
        pairs.push((row.item_id, row.provider_id));
        Ok(())
    })?;
    let catalog = ProviderCatalog::from_pairs(pairs)?;
    if merits.is_empty() {
        return Ok(catalog);
    }
    let mut merit: Vec<Option<f64>> = vec![None; catalog.num_providers()];
    for (p, m) in merits {
        let idx = catalog.provider_index(&p).expect("provider seen in pairs");
        match merit[idx] {
            Some(prev) if prev != m => {
                return Err(Error::Validation(format!(
                    "provider {p} has conflicting merit values {prev} and {m}"
                )))
            }
            _ => merit[idx] = Some(m),
        }
    }
    let merit = merit
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            m.ok_or_else(|| {
                Error::Validation(format!("provider {} has no merit value", catalog.providers()[i]))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    catalog.with_merit(merit)
}

/// Loads arrivals; `N` is `interval_count` when given, else the largest
/// interval in the file.
pub fn load_arrivals(
    path: &Path,
    format: DataFormat,
    interval_count: Option<usize>,
) -> Result<ArrivalSchedule> {
    let mut arrivals = Vec::new();
    read_rows(path, format, |_, row: ArrivalRow| {
        arrivals.push(Arrival {
            interval: row.interval,
            user: row.user_id,
        });
        Ok(())
    })?;
    match interval_count {
        Some(n) => ArrivalSchedule::new(arrivals, n),
        None => ArrivalSchedule::from_arrivals(arrivals),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_all<T: Serialize>(path: &Path, format: DataFormat, rows: impl Iterator<Item = T>) -> Result<()> {
    let out = create(path)?;
    let io_err = |e: std::io::Error| Error::io(path, e);
    match format {
        DataFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in rows {
                w.serialize(row).map_err(|e| Error::io(path, e.into()))?;
            }
            w.flush().map_err(io_err)
        }
        DataFormat::Jsonl => {
            let mut out = out;
            for row in rows {
                serde_json::to_writer(&mut out, &row).map_err(|e| Error::io(path, e.into()))?;
                out.write_all(b"\n").map_err(io_err)?;
            }
            out.flush().map_err(io_err)
        }
    }
}

/// Writes scores with shortest round-trip float formatting, so reloading
/// gives bit-identical values.
pub fn write_scores(path: &Path, format: DataFormat, store: &PreferenceStore) -> Result<()> {
    if format == DataFormat::Csv && store.is_empty() {
        // csv::Writer only emits headers alongside the first record
        let mut out = create(path)?;
        return out
            .write_all(b"user_id,item_id,score\n")
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e));
    }
    write_all(
        path,
        format,
        store.entries().map(|(u, i, s)| ScoreRow {
            user_id: u.to_owned(),
            item_id: i.to_owned(),
            score: s,
        }),
    )
}

pub fn write_catalog(path: &Path, format: DataFormat, catalog: &ProviderCatalog) -> Result<()> {
    write_all(
        path,
        format,
        catalog.items().iter().enumerate().map(|(i, item)| CatalogRow {
            item_id: item.clone(),
            provider_id: catalog.providers()[catalog.owner(i)].clone(),
            merit: None,
        }),
    )
}

pub fn write_arrivals(path: &Path, format: DataFormat, schedule: &ArrivalSchedule) -> Result<()> {
    write_all(
        path,
        format,
        schedule.arrivals().iter().map(|a| ArrivalRow {
            interval: a.interval,
            user_id: a.user.clone(),
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn tmp(content: &str, name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        fs::write(&p, content).unwrap();
        (dir, p)
    }

    #[test]
    fn loads_scores_csv() {
        let (_d, p) = tmp("user_id,item_id,score\nu1,i1,0.9\nu1,i2,0.4\n", "s.csv");
        let s = load_scores(&p, DataFormat::Csv).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.score("u1", "i1"), 0.9);
    }

    #[test]
    fn empty_scores_file() {
        let (_d, p) = tmp("", "s.csv");
        let s = load_scores(&p, DataFormat::Csv).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.score("a", "b"), 0.0);
        let (_d, p) = tmp("user_id,item_id,score\n", "s.csv");
        assert!(load_scores(&p, DataFormat::Csv).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_score_is_validation_error() {
        let (_d, p) = tmp("user_id,item_id,score\nu1,i1,1.5\n", "s.csv");
        let err = load_scores(&p, DataFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn malformed_row_names_line() {
        let (_d, p) = tmp("user_id,item_id,score\nu1,i1,0.5\nu2,i2,abc\n", "s.csv");
        match load_scores(&p, DataFormat::Csv).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let (_d, p) = tmp("{\"user_id\":\"u\",\"item_id\":\"i\",\"score\":0.1}\n{oops\n", "s.jsonl");
        match load_scores(&p, DataFormat::Jsonl).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn catalog_and_arrivals() {
        let (_d, p) = tmp("item_id,provider_id\na,p1\nb,p1\nc,p1\nd,p2\n", "c.csv");
        let c = load_catalog(&p, DataFormat::Csv).unwrap();
        assert_eq!(c.merit(), &[0.75, 0.25]);
        let (_d, p) = tmp("item_id,provider_id\na,p1\na,p2\n", "c.csv");
        assert!(load_catalog(&p, DataFormat::Csv).is_err());
        let (_d, p) = tmp("item_id,provider_id,merit\na,p1,0.3\nb,p2,0.7\n", "c.csv");
        assert_eq!(load_catalog(&p, DataFormat::Csv).unwrap().merit(), &[0.3, 0.7]);
        let (_d, p) = tmp("interval,user_id\n1,u1\n1,u2\n3,u1\n", "a.csv");
        let a = load_arrivals(&p, DataFormat::Csv, None).unwrap();
        assert_eq!(a.traffic(), vec![2, 0, 1]);
        let a = load_arrivals(&p, DataFormat::Csv, Some(4)).unwrap();
        assert_eq!(a.interval_count(), 4);
    }

    #[test]
    fn jsonl_catalog() {
        let (_d, p) = tmp(
            "{\"item_id\":\"a\",\"provider_id\":\"p\"}\n\n{\"item_id\":\"b\",\"provider_id\":\"q\"}\n",
            "c.jsonl",
        );
        let c = load_catalog(&p, DataFormat::from_path(&p)).unwrap();
        assert_eq!(c.num_providers(), 2);
    }
}

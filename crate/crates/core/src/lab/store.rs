//! Append-only CSV tables and the run manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use csv::StringRecord;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

/// A row that can be written to and read back from a CSV table.
pub trait TableRow: Sized {
    fn header(&self) -> Vec<String>;
    fn record(&self) -> Vec<String>;
    fn parse(header: &StringRecord, record: &StringRecord) -> Result<Self>;
}

/// Field names and values of a flat serde row, in declaration order.
pub(crate) fn serde_fields<T: Serialize>(row: &T) -> (Vec<String>, Vec<String>) {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(row).expect("flat row serializes");
    let bytes = w.into_inner().expect("in-memory writer");
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let header = r.headers().expect("header line").iter().map(String::from).collect();
    let record = r.records().next().expect("one record").expect("valid record");
    (header, record.iter().map(String::from).collect())
}

macro_rules! serde_table_row {
    ($($t:ty),* $(,)?) => {$(
        impl $crate::lab::store::TableRow for $t {
            fn header(&self) -> Vec<String> {
                $crate::lab::store::serde_fields(self).0
            }
            fn record(&self) -> Vec<String> {
                $crate::lab::store::serde_fields(self).1
            }
            fn parse(header: &csv::StringRecord, record: &csv::StringRecord) -> $crate::error::Result<Self> {
                $crate::lab::store::parse_serde(header, record)
            }
        }
    )*};
}
pub(crate) use serde_table_row;

pub(crate) fn parse_serde<T: DeserializeOwned>(header: &StringRecord, record: &StringRecord) -> Result<T> {
    record.deserialize(Some(header)).map_err(Error::from)
}

/// Looks up `name` in a header and parses the matching field.
pub(crate) fn field<T: std::str::FromStr>(header: &StringRecord, record: &StringRecord, name: &str) -> Result<T> {
    let k = header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Parse(format!("missing column {name}")))?;
    record
        .get(k)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad value in column {name}")))
}

/// CSV table whose file is only ever appended to, one whole row per write.
pub struct Table<R> {
    path: PathBuf,
    rows: Vec<R>,
    has_header: bool,
}

impl<R: TableRow> Table<R> {
    /// Opens `path`, keeping every well-formed row already present. A torn
    /// final line (interrupted write) is cut off.
    pub fn open(path: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        let text = if path.exists() { fs::read_to_string(path)? } else { String::new() };
        let Some(header_end) = text.find('\n').map(|n| n + 1) else {
            // nothing usable yet, not even a full header line
            if !text.is_empty() {
                fs::remove_file(path)?;
            }
            return Ok(Table { path: path.to_path_buf(), rows, has_header: false });
        };
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        let mut good_bytes = header_end;
        for rec in reader.records() {
            let Ok(rec) = rec else { break };
            let start = rec.position().map_or(text.len(), |p| p.byte() as usize);
            // every append ends in a newline; a row without one is torn
            let Some(end) = text[start..].find('\n').map(|n| start + n + 1) else { break };
            if rec.len() != header.len() {
                break;
            }
            let Ok(row) = R::parse(&header, &rec) else { break };
            rows.push(row);
            good_bytes = end;
        }
        if good_bytes < text.len() {
            log::warn!("{}: dropping an incomplete trailing row", path.display());
            fs::write(path, &text[..good_bytes])?;
        }
        Ok(Table { path: path.to_path_buf(), rows, has_header: true })
    }

    pub fn rows(&self) -> &[R] {
        &self.rows
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, row: R) -> Result<()> {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            if !self.has_header {
                w.write_record(row.header())?;
            }
            w.write_record(row.record())?;
            w.flush()?;
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        f.write_all(&buf)?;
        f.flush()?;
        self.has_header = true;
        self.rows.push(row);
        Ok(())
    }
}

/// Whole-table rewrite, for derived summaries.
pub fn write_table<R: TableRow>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if let Some(first) = rows.first() {
        w.write_record(first.header())?;
    }
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub code_version: String,
    pub updated_unix: u64,
    /// Wall-clock seconds per completed cell.
    pub cells: BTreeMap<String, f64>,
}

/// Output directory of one experiment configuration.
pub struct RunDirectory {
    pub dir: PathBuf,
    manifest: Manifest,
}

impl RunDirectory {
    /// Creates or reopens the directory; a manifest written for a different
    /// configuration is a hard error.
    pub fn open(config: &ExperimentConfig) -> Result<Self> {
        let dir = config.run.output_dir.clone();
        fs::create_dir_all(&dir)?;
        let hash = config.hash();
        let path = dir.join("manifest.json");
        let manifest = if path.exists() {
            let m: Manifest = serde_json::from_str(&fs::read_to_string(&path)?)?;
            if m.config_hash != hash {
                return Err(Error::ConfigMismatch(dir));
            }
            m
        } else {
            Manifest { config_hash: hash, code_version: env!("CARGO_PKG_VERSION").to_string(), ..Default::default() }
        };
        let run = RunDirectory { dir, manifest };
        run.save_manifest()?;
        Ok(run)
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn record_cell(&mut self, label: String, seconds: f64) {
        self.manifest.cells.insert(label, seconds);
    }

    pub fn save_manifest(&self) -> Result<()> {
        let mut m = self.manifest.clone();
        m.code_version = env!("CARGO_PKG_VERSION").to_string();
        m.updated_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let tmp = self.dir.join("manifest.json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(&m)?)?;
        fs::rename(&tmp, self.dir.join("manifest.json"))?;
        Ok(())
    }
}

/// Runs `todo` in parallel batches and hands results to `commit` in input
/// order, so the file contents never depend on scheduling. Stops at the first
/// failing item after committing everything before it.
pub fn run_ordered<K, T, F, C>(todo: &[K], work: F, mut commit: C) -> Result<()>
where
    K: Sync,
    T: Send,
    F: Fn(&K) -> Result<T> + Sync,
    C: FnMut(&K, T, f64) -> Result<()>,
{
    use rayon::prelude::*;
    let batch = rayon::current_num_threads().max(1);
    for chunk in todo.chunks(batch) {
        let results: Vec<(Result<T>, f64)> = chunk
            .par_iter()
            .map(|k| {
                let start = std::time::Instant::now();
                let r = work(k);
                (r, start.elapsed().as_secs_f64())
            })
            .collect();
        for (k, (r, secs)) in chunk.iter().zip(results) {
            commit(k, r?, secs)?;
        }
    }
    Ok(())
}

/// Keys already present in a table.
pub fn completed<R, K: Ord>(table: &Table<R>, key: impl Fn(&R) -> K) -> BTreeSet<K> {
    table.rows.iter().map(key).collect()
}

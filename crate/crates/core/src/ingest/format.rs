//! On-disk interchange formats.
//!
//! Embedding matrix (little-endian):
//!
//! ```text
//! b"EMB1" | rows: u32 | dim: u32 | rows * dim * f32 (row-major)
//! ```
//!
//! Row `i` of the matrix is described by row `i` of a sidecar CSV with
//! columns `doc_id,target,date,split` (`date` and `split` may be empty).
//! Chunked encoder output uses the same matrix format with one row per
//! chunk and a sidecar of `doc_id,token_count`.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::pool::ChunkedEmbeddingRecord;
use crate::dataset::{EmbeddingDataset, Split};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

pub fn encode_embeddings(features: &Array2<f64>) -> Result<Vec<u8>> {
    let (n, d) = features.dim();
    let rows = u32::try_from(n).map_err(|_| Error::Format(format!("{n} rows exceed u32")))?;
    let dim = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * d);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for v in features.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "file too short for header ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            std::str::from_utf8(MAGIC).unwrap()
        )));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if n == 0 {
        return Err(Error::Empty("embedding file declares zero rows".into()));
    }
    if d == 0 {
        return Err(Error::Empty(
            "embedding file declares zero dimension".into(),
        ));
    }
    let expected = n
        .checked_mul(d)
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| Error::Format("header size overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, header declares {n}x{d} ({expected} bytes)",
            payload.len()
        )));
    }
    let mut data = Vec::with_capacity(n * d);
    for (k, c) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: k / d,
                col: k % d,
            });
        }
        data.push(f64::from(v));
    }
    Ok(Array2::from_shape_vec((n, d), data).expect("shape checked"))
}

pub fn read_embeddings(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embeddings(&bytes)
}

pub fn write_embeddings(path: &Path, features: &Array2<f64>) -> Result<()> {
    let bytes = encode_embeddings(features)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub doc_id: String,
    pub target: f64,
    #[serde(default, with = "opt_date")]
    pub date: Option<NaiveDate>,
    #[serde(default, with = "opt_split")]
    pub split: Option<Split>,
}

pub fn read_targets(path: &Path) -> Result<Vec<TargetRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    rdr.deserialize()
        .map(|row| row.map_err(|e| Error::csv(path, e)))
        .collect()
}

pub fn write_targets(path: &Path, records: &[TargetRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sidecar path used by [`load_embedding_file`]: `x.bin` → `x.csv`.
pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("csv")
}

pub fn load_embedding_file(path: &Path) -> Result<EmbeddingDataset> {
    load_embedding_pair(path, &sidecar_path(path))
}

pub fn load_embedding_pair(bin: &Path, csv_path: &Path) -> Result<EmbeddingDataset> {
    let features = read_embeddings(bin)?;
    let records = read_targets(csv_path)?;
    if records.len() != features.nrows() {
        return Err(Error::LengthMismatch {
            what: "embedding rows vs target rows",
            left: features.nrows(),
            right: records.len(),
        });
    }
    let provenance = bin.display().to_string();
    let targets = records.iter().map(|r| r.target).collect();
    EmbeddingDataset::new(features, targets, provenance)?
        .with_doc_ids(records.iter().map(|r| r.doc_id.clone()).collect())?
        .with_dates(records.iter().map(|r| r.date).collect())?
        .with_splits(records.iter().map(|r| r.split).collect())
}

/// Writes `path` and its `.csv` sidecar.
pub fn save_embedding_file(path: &Path, ds: &EmbeddingDataset) -> Result<()> {
    write_embeddings(path, ds.features())?;
    let records: Vec<TargetRecord> = (0..ds.len())
        .map(|i| TargetRecord {
            doc_id: ds.doc_ids()[i].clone(),
            target: ds.targets()[i],
            date: ds.dates()[i],
            split: ds.splits()[i],
        })
        .collect();
    write_targets(&sidecar_path(path), &records)
}

#[derive(Debug, Deserialize)]
struct IdRow {
    doc_id: String,
}

/// A bare feature matrix (e.g. class probabilities) whose sidecar CSV needs
/// only a `doc_id` column.
pub fn load_feature_file(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let features = read_embeddings(path)?;
    let csv_path = sidecar_path(path);
    let mut rdr = csv::Reader::from_path(&csv_path).map_err(|e| Error::csv(&csv_path, e))?;
    let ids: Vec<String> = rdr
        .deserialize::<IdRow>()
        .map(|r| r.map(|r| r.doc_id).map_err(|e| Error::csv(&csv_path, e)))
        .collect::<Result<_>>()?;
    if ids.len() != features.nrows() {
        return Err(Error::LengthMismatch {
            what: "feature rows vs id rows",
            left: features.nrows(),
            right: ids.len(),
        });
    }
    Ok((ids, features))
}

/// Reorders `features` (keyed by `ids`) to follow `order`.
pub fn align_rows(ids: &[String], features: &Array2<f64>, order: &[String]) -> Result<Array2<f64>> {
    let pos: std::collections::HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let rows = order
        .iter()
        .map(|id| {
            pos.get(id.as_str())
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("no feature row for doc_id {id:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(features.select(ndarray::Axis(0), &rows))
}

#[derive(Debug, Deserialize)]
struct ChunkRow {
    doc_id: String,
    token_count: u32,
}

/// Groups chunk rows into per-document records, in order of first appearance.
pub fn load_chunked(bin: &Path, chunks_csv: &Path) -> Result<Vec<ChunkedEmbeddingRecord>> {
    let vectors = read_embeddings(bin)?;
    let mut rdr = csv::Reader::from_path(chunks_csv).map_err(|e| Error::csv(chunks_csv, e))?;
    let rows: Vec<ChunkRow> = rdr
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::csv(chunks_csv, e))?;
    if rows.len() != vectors.nrows() {
        return Err(Error::LengthMismatch {
            what: "chunk vectors vs chunk rows",
            left: vectors.nrows(),
            right: rows.len(),
        });
    }
    let mut order: Vec<String> = Vec::new();
    let mut map: std::collections::HashMap<String, ChunkedEmbeddingRecord> = Default::default();
    for (row, v) in rows.into_iter().zip(vectors.rows()) {
        let rec = map.entry(row.doc_id.clone()).or_insert_with(|| {
            order.push(row.doc_id.clone());
            ChunkedEmbeddingRecord {
                doc_id: row.doc_id.clone(),
                chunk_vectors: Vec::new(),
                token_counts: Vec::new(),
            }
        });
        rec.chunk_vectors.push(v.to_vec());
        rec.token_counts.push(row.token_count);
    }
    Ok(order
        .into_iter()
        .map(|id| map.remove(&id).unwrap())
        .collect())
}

mod opt_date {
    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Option<NaiveDate>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_str(&d.format("%Y-%m-%d").to_string()),
            None => s.serialize_str(""),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<NaiveDate>, D::Error> {
        let s = Option::<String>::deserialize(d)?.unwrap_or_default();
        let s = s.trim();
        if s.is_empty() {
            return Ok(None);
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map(Some)
            .map_err(serde::de::Error::custom)
    }
}

mod opt_split {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::dataset::Split;

    pub fn serialize<S: Serializer>(v: &Option<Split>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(v.map_or("", Split::as_str))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Split>, D::Error> {
        let s = Option::<String>::deserialize(d)?.unwrap_or_default();
        if s.trim().is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(serde::de::Error::custom)
    }
}

//! Artifact writers.

use std::fs;
use std::path::Path;

use anyhow::Context;
use congest_core::algorithms::DistanceMatrix;
use congest_core::cluster::bs::HierarchyDump;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Summary written next to a binary distance matrix.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct MatrixSummary {
    pub n: usize,
    /// Entry encoding of the `.bin` file.
    pub encoding: String,
    pub unreachable: usize,
    pub max_finite: Option<u64>,
    pub fnv1a: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write(path, s.as_bytes())
}

/// CSV with a header row.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    write(path, &w.into_inner()?)
}

/// `<stem>.bin` (row-major little-endian `u64`, `u64::MAX` for unreachable) and `<stem>.json`.
pub fn write_distances(dir: &Path, stem: &str, d: &DistanceMatrix) -> anyhow::Result<MatrixSummary> {
    let bytes = d.to_le_bytes();
    let summary = MatrixSummary {
        n: d.n(),
        encoding: "u64 little-endian, row-major, 18446744073709551615 = unreachable".into(),
        unreachable: d.infinite_count(),
        max_finite: d.max_finite(),
        fnv1a: format!("{:016x}", d.checksum()),
        sha256: sha256_hex(&bytes),
    };
    write(&dir.join(format!("{stem}.bin")), &bytes)?;
    write_json(&dir.join(format!("{stem}.json")), &summary)?;
    Ok(summary)
}

/// Reads a matrix written by [`write_distances`].
pub fn read_distances(path: &Path) -> anyhow::Result<DistanceMatrix> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    anyhow::ensure!(bytes.len() % 8 == 0, "{}: length {} is not a multiple of 8", path.display(), bytes.len());
    let words: Vec<u64> = bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let n = (words.len() as f64).sqrt() as usize;
    anyhow::ensure!(n * n == words.len(), "{}: {} entries is not a square", path.display(), words.len());
    let rows: Vec<Vec<Option<u64>>> =
        words.chunks(n.max(1)).take(n).map(|r| r.iter().map(|&x| (x != u64::MAX).then_some(x)).collect()).collect();
    Ok(DistanceMatrix::from_rows(&rows))
}

pub fn write_hierarchy(path: &Path, dump: &HierarchyDump) -> anyhow::Result<()> {
    write_json(path, dump)
}

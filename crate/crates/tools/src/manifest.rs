//! Manifest and rejects files: JSONL, one record per line, struct field
//! order as the canonical key order, UTF-8. Re-emitting the same records
//! yields byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

use scop_core::decode::ManifestRecord;

use crate::coco::Reject;

/// Write records as JSONL; returns the number of lines written.
pub fn write_manifest(records: &[ManifestRecord], path: &Path) -> Result<usize> {
    write_jsonl(records, path)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    read_jsonl(path)
}

pub fn write_rejects(rejects: &[Reject], path: &Path) -> Result<usize> {
    write_jsonl(rejects, path)
}

pub fn write_jsonl<T: serde::Serialize>(items: &[T], path: &Path) -> Result<usize> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(items.len())
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .with_context(|| format!("{} line {}", path.display(), idx + 1))?;
        items.push(item);
    }
    Ok(items)
}

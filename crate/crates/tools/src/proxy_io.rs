//! Prompt-group and embedding files for the retrieval proxy task.
//!
//! Groups are JSONL of `PromptGroup`. Embeddings are JSONL records
//! `{group_id, variant, vector}`; vectors must be finite and share one
//! dimension per file. The two reference embedders can synthesize embedding
//! sets in-process so the retrieval path can run without any external
//! encoder.

use std::path::Path;

use anyhow::{bail, Context, Result};

use scop_core::proxy::{
    bag_of_words_embedding, order_sensitive_embedding, EmbeddingRecord, PromptGroup, Variant,
};

use crate::manifest::{read_jsonl, write_jsonl};

pub fn write_groups(groups: &[PromptGroup], path: &Path) -> Result<usize> {
    write_jsonl(groups, path)
}

pub fn read_groups(path: &Path) -> Result<Vec<PromptGroup>> {
    read_jsonl(path)
}

/// Read and validate an embeddings file.
pub fn read_embeddings(path: &Path) -> Result<Vec<EmbeddingRecord>> {
    let records: Vec<EmbeddingRecord> =
        read_jsonl(path).with_context(|| format!("reading embeddings {}", path.display()))?;
    let mut dim = None;
    for (idx, rec) in records.iter().enumerate() {
        if rec.vector.iter().any(|v| !v.is_finite()) {
            bail!(
                "{} record {}: non-finite embedding value (group {}, {:?})",
                path.display(),
                idx + 1,
                rec.group_id,
                rec.variant
            );
        }
        match dim {
            None => dim = Some(rec.vector.len()),
            Some(d) if d != rec.vector.len() => bail!(
                "{} record {}: dimension {} differs from the file's {}",
                path.display(),
                idx + 1,
                rec.vector.len(),
                d
            ),
            _ => {}
        }
    }
    Ok(records)
}

/// Built-in reference embedders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oracle {
    /// Order-blind token-bag sum.
    BagOfWords,
    /// Position-modulated token sum.
    OrderSensitive,
}

impl Oracle {
    pub fn embed(&self, prompt: &str, dim: usize) -> Vec<f32> {
        match self {
            Oracle::BagOfWords => bag_of_words_embedding(prompt, dim),
            Oracle::OrderSensitive => order_sensitive_embedding(prompt, dim),
        }
    }
}

/// Embed all four variants of every group with a reference embedder.
pub fn oracle_records(groups: &[PromptGroup], oracle: Oracle, dim: usize) -> Vec<EmbeddingRecord> {
    let mut out = Vec::with_capacity(groups.len() * 4);
    for g in groups {
        for variant in [Variant::Base, Variant::Rephrased, Variant::Negated, Variant::Swapped] {
            out.push(EmbeddingRecord {
                group_id: g.group_id,
                variant,
                vector: oracle.embed(variant.text_of(g), dim),
            });
        }
    }
    out
}

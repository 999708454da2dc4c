//! Text-encoder proxy task: prompt-group generation and nearest-variation
//! retrieval.
//!
//! A group holds a base prompt ("a dog to the left of a cat") and three
//! variations: *rephrased* (entities swapped and relation negated, logically
//! equivalent), *negated* (relation negated only), and *swapped* (entities
//! swapped only). An encoder that preserves spatial meaning should rank the
//! rephrased variation closest to the base; the retrieval report counts how
//! often that actually happens.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::decode::article_for;
use crate::relation::CardinalRelation;
use crate::rng::{splitmix64, Stream};

/// A base prompt with its three variations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptGroup {
    pub group_id: u64,
    pub base: String,
    pub rephrased: String,
    pub negated: String,
    pub swapped: String,
    pub categories: (String, String),
    pub relation: CardinalRelation,
}

/// How category pairs map onto groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairingMode {
    /// One group per ordered pair, relation cycling with the group index.
    /// 80 categories make 80 * 79 = 6,320 groups.
    #[default]
    Paper,
    /// Every ordered pair times all four relations.
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupError {
    TooFewCategories,
    DuplicateCategory(String),
}

impl core::fmt::Display for GroupError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GroupError::TooFewCategories => write!(f, "need at least two categories"),
            GroupError::DuplicateCategory(c) => write!(f, "duplicate category name {c:?}"),
        }
    }
}

impl core::error::Error for GroupError {}

fn spatial_prompt(a: &str, relation: CardinalRelation, b: &str) -> String {
    alloc::format!(
        "{} {} {} {} {}",
        article_for(a),
        a,
        relation.phrase(),
        article_for(b),
        b
    )
}

fn make_group(group_id: u64, a: &str, b: &str, relation: CardinalRelation) -> PromptGroup {
    PromptGroup {
        group_id,
        base: spatial_prompt(a, relation, b),
        rephrased: spatial_prompt(b, relation.opposite(), a),
        negated: spatial_prompt(a, relation.opposite(), b),
        swapped: spatial_prompt(b, relation, a),
        categories: (a.to_string(), b.to_string()),
        relation,
    }
}

/// Generate prompt groups over ordered distinct category pairs.
pub fn generate_groups(categories: &[String], mode: PairingMode) -> Result<Vec<PromptGroup>, GroupError> {
    if categories.len() < 2 {
        return Err(GroupError::TooFewCategories);
    }
    for (i, c) in categories.iter().enumerate() {
        if categories[..i].contains(c) {
            return Err(GroupError::DuplicateCategory(c.clone()));
        }
    }
    let mut groups = Vec::new();
    for a in categories {
        for b in categories {
            if a == b {
                continue;
            }
            match mode {
                PairingMode::Paper => {
                    let id = groups.len() as u64;
                    let relation = CardinalRelation::ALL[(id % 4) as usize];
                    groups.push(make_group(id, a, b, relation));
                }
                PairingMode::Full => {
                    for relation in CardinalRelation::ALL {
                        groups.push(make_group(groups.len() as u64, a, b, relation));
                    }
                }
            }
        }
    }
    Ok(groups)
}

/// Which variation an embedding belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Base,
    Rephrased,
    Negated,
    Swapped,
}

impl Variant {
    pub const VARIATIONS: [Variant; 3] = [Variant::Rephrased, Variant::Negated, Variant::Swapped];

    pub fn text_of<'g>(&self, group: &'g PromptGroup) -> &'g str {
        match self {
            Variant::Base => &group.base,
            Variant::Rephrased => &group.rephrased,
            Variant::Negated => &group.negated,
            Variant::Swapped => &group.swapped,
        }
    }
}

/// One ingested embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub group_id: u64,
    pub variant: Variant,
    pub vector: Vec<f32>,
}

/// Similarity used for retrieval. Winner is the argmax of the score, so
/// euclidean scores as negated distance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Dot,
    Euclidean,
}

/// Similarity score with 64-bit accumulation over `f32` inputs.
pub fn score(metric: Metric, a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    match metric {
        Metric::Cosine => {
            let mut dot = 0.0f64;
            let mut na = 0.0f64;
            let mut nb = 0.0f64;
            for (x, y) in a.iter().zip(b) {
                dot += *x as f64 * *y as f64;
                na += *x as f64 * *x as f64;
                nb += *y as f64 * *y as f64;
            }
            dot / (libm::sqrt(na) * libm::sqrt(nb))
        }
        Metric::Dot => a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum(),
        Metric::Euclidean => {
            let d: f64 = a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let diff = *x as f64 - *y as f64;
                    diff * diff
                })
                .sum();
            -libm::sqrt(d)
        }
    }
}

/// Retrieval accounting across all groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub rephrased: u64,
    pub negated: u64,
    pub swapped: u64,
    pub skipped: u64,
    pub groups_evaluated: u64,
    /// `rephrased / groups_evaluated`.
    pub correct_rate: f64,
}

impl RetrievalReport {
    pub fn winner_total(&self) -> u64 {
        self.rephrased + self.negated + self.swapped
    }
}

/// Per-group embeddings, indexed `[base, rephrased, negated, swapped]`.
pub type GroupVectors = [Option<Vec<f32>>; 4];

fn variant_slot(v: Variant) -> usize {
    match v {
        Variant::Base => 0,
        Variant::Rephrased => 1,
        Variant::Negated => 2,
        Variant::Swapped => 3,
    }
}

/// Collect embedding records into per-group slots. Later records overwrite
/// earlier ones for the same `(group_id, variant)`.
pub fn index_embeddings(
    group_ids: &[u64],
    records: impl IntoIterator<Item = EmbeddingRecord>,
) -> alloc::collections::BTreeMap<u64, GroupVectors> {
    let mut map: alloc::collections::BTreeMap<u64, GroupVectors> = group_ids
        .iter()
        .map(|id| (*id, [const { None }; 4]))
        .collect();
    for rec in records {
        if let Some(slots) = map.get_mut(&rec.group_id) {
            slots[variant_slot(rec.variant)] = Some(rec.vector);
        }
    }
    map
}

fn zero_norm(v: &[f32]) -> bool {
    v.iter().all(|x| *x == 0.0)
}

/// Retrieve the most similar variation for every group and tally winners.
///
/// Groups missing any variant embedding, or containing a zero-norm vector,
/// are skipped and counted. Ties break in the fixed order rephrased,
/// negated, swapped.
pub fn retrieve(
    groups: &[PromptGroup],
    vectors: &alloc::collections::BTreeMap<u64, GroupVectors>,
    metric: Metric,
) -> RetrievalReport {
    let mut report = RetrievalReport::default();
    for group in groups {
        let slots = vectors.get(&group.group_id);
        let complete = slots.is_some_and(|s| s.iter().all(Option::is_some));
        let Some(slots) = slots.filter(|_| complete) else {
            report.skipped += 1;
            continue;
        };
        let vecs: Vec<&Vec<f32>> = slots.iter().map(|s| s.as_ref().unwrap()).collect();
        if vecs.iter().any(|v| zero_norm(v)) {
            report.skipped += 1;
            continue;
        }
        let base = vecs[0];
        let mut winner = Variant::Rephrased;
        let mut best = f64::NEG_INFINITY;
        for variant in Variant::VARIATIONS {
            let s = score(metric, base, vecs[variant_slot(variant)]);
            if s > best {
                best = s;
                winner = variant;
            }
        }
        report.groups_evaluated += 1;
        match winner {
            Variant::Rephrased => report.rephrased += 1,
            Variant::Negated => report.negated += 1,
            Variant::Swapped => report.swapped += 1,
            Variant::Base => unreachable!(),
        }
    }
    report.correct_rate = if report.groups_evaluated == 0 {
        0.0
    } else {
        report.rephrased as f64 / report.groups_evaluated as f64
    };
    report
}

/// Index records against `groups` and retrieve in one step.
pub fn retrieve_records(
    groups: &[PromptGroup],
    records: impl IntoIterator<Item = EmbeddingRecord>,
    metric: Metric,
) -> RetrievalReport {
    let ids: Vec<u64> = groups.iter().map(|g| g.group_id).collect();
    let vectors = index_embeddings(&ids, records);
    retrieve(groups, &vectors, metric)
}

fn tokenize(prompt: &str) -> impl Iterator<Item = &str> {
    prompt.split_whitespace()
}

fn token_vector(token: &str, dim: usize) -> Vec<f64> {
    let mut h = 0xcbf29ce484222325u64;
    for b in token.as_bytes() {
        h = splitmix64(h ^ *b as u64);
    }
    let mut stream = Stream::new(h);
    (0..dim).map(|_| stream.next_signed()).collect()
}

/// Order-blind reference embedder: the sum of per-token hash vectors.
///
/// Permuting tokens leaves the embedding bit-identical, which makes the
/// swapped-entities variation indistinguishable from the base prompt.
pub fn bag_of_words_embedding(prompt: &str, dim: usize) -> Vec<f32> {
    let mut acc = alloc::vec![0.0f64; dim];
    for token in tokenize(prompt) {
        for (slot, v) in acc.iter_mut().zip(token_vector(token, dim)) {
            *slot += v;
        }
    }
    acc.into_iter().map(|v| v as f32).collect()
}

/// Order-sensitive reference embedder: each token vector is gated
/// elementwise by its sinusoidal position vector before summation, so the
/// same token multiset in a different order produces a different embedding.
pub fn order_sensitive_embedding(prompt: &str, dim: usize) -> Vec<f32> {
    debug_assert!(dim >= 8, "dimension too small to separate positions");
    let mut acc = alloc::vec![0.0f64; dim];
    for (pos, token) in tokenize(prompt).enumerate() {
        let pe = crate::tenor::sinusoidal_pe(pos, dim & !1).expect("even dim");
        for (i, (slot, v)) in acc.iter_mut().zip(token_vector(token, dim)).enumerate() {
            let gate = if i < pe.len() { pe[i] } else { 1.0 };
            *slot += v * gate;
        }
    }
    acc.into_iter().map(|v| v as f32).collect()
}

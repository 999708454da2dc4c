//! Candidate-pair enumeration: every unordered pair of instances in an
//! image, in canonical order, with a relation token attached.

use alloc::vec::Vec;

use crate::dataset::{ImageRecord, ObjectInstance};
use crate::relation::{classify_relation, RelationRule, RelationToken};

/// An ordered (subject, object) pair under evaluation.
///
/// Canonical order puts the lower `instance_id` first; `pair_index` is the
/// pair's position in the per-image enumeration and stays stable whether or
/// not other pairs survive filtering, which keeps per-record seeds stable.
#[derive(Debug, Clone, Copy)]
pub struct CandidatePair<'a> {
    pub subject: &'a ObjectInstance,
    pub object: &'a ObjectInstance,
    pub relation: RelationToken,
    pub pair_index: u64,
}

impl CandidatePair<'_> {
    pub fn image_id(&self) -> i64 {
        self.subject.image_id
    }
}

/// All `n * (n - 1) / 2` pairs over `instances`, which must already be in
/// ascending `instance_id` order (as produced by dataset ingest).
pub fn enumerate_pairs<'a>(
    image: &ImageRecord,
    instances: &'a [ObjectInstance],
    rule: RelationRule,
) -> Vec<CandidatePair<'a>> {
    debug_assert!(instances.iter().all(|i| i.image_id == image.image_id));
    let n = instances.len();
    let mut pairs = Vec::with_capacity(n.saturating_sub(1) * n / 2);
    let mut pair_index = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            let subject = &instances[i];
            let object = &instances[j];
            pairs.push(CandidatePair {
                subject,
                object,
                relation: classify_relation(&subject.bbox, &object.bbox, rule),
                pair_index,
            });
            pair_index += 1;
        }
    }
    pairs
}

/// Number of pairs an image with `n` instances produces.
pub const fn pair_count(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

//! Parallel curation: ingest order in, canonical order out.
//!
//! Images are processed independently on a worker pool; per-image results
//! are collected back in ascending image-id order and stats merge by
//! commutative sums, so output bytes do not depend on the thread count.

use anyhow::{Context, Result};
use rayon::prelude::*;

use scop_core::constraints::{self, StageStats};
use scop_core::dataset::DatasetIndex;
use scop_core::decode::{decode, DecodeConfig, ManifestRecord, TemplatePool};

use crate::config::Config;

#[derive(Debug)]
pub struct CurateOutput {
    pub records: Vec<ManifestRecord>,
    pub stats: StageStats,
}

/// Filter the dataset and decode every survivor.
pub fn curate(dataset: &DatasetIndex, config: &Config, pool: &TemplatePool) -> Result<CurateOutput> {
    let pipeline_cfg = constraints::PipelineConfig {
        thresholds: config.thresholds,
        union_mode: config.union_mode,
        relation_rule: config.relation_rule,
    };
    let decode_cfg = DecodeConfig {
        and_probability: config.and_probability,
        max_expansion: config.max_expansion,
    };

    let entries: Vec<_> = dataset.entries().collect();
    let per_image: Vec<(Vec<ManifestRecord>, StageStats)> = entries
        .par_iter()
        .map(|entry| {
            let (descriptors, stats) =
                constraints::evaluate_image(&entry.image, &entry.instances, &pipeline_cfg);
            let records = descriptors
                .iter()
                .map(|d| decode(d, &entry.image, pool, &decode_cfg, config.global_seed))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((records, stats))
        })
        .collect::<Result<Vec<_>, scop_core::decode::DecodeError>>()
        .context("decoding survivors")?;

    let mut records = Vec::new();
    let mut stats = StageStats::default();
    for (mut image_records, image_stats) in per_image {
        records.append(&mut image_records);
        stats.merge(&image_stats);
    }
    Ok(CurateOutput { records, stats })
}

/// Filtering stats only, no decoding.
pub fn stats_only(dataset: &DatasetIndex, config: &Config) -> StageStats {
    let pipeline_cfg = constraints::PipelineConfig {
        thresholds: config.thresholds,
        union_mode: config.union_mode,
        relation_rule: config.relation_rule,
    };
    let entries: Vec<_> = dataset.entries().collect();
    entries
        .par_iter()
        .map(|entry| constraints::evaluate_image(&entry.image, &entry.instances, &pipeline_cfg).1)
        .reduce(StageStats::default, |mut a, b| {
            a.merge(&b);
            a
        })
}

/// Run `f` on a dedicated pool with `threads` workers (0 = rayon default).
pub fn with_thread_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")?;
    Ok(pool.install(f))
}

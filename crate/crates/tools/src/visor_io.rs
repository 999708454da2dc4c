//! Detection-trial files: JSONL records
//! `{prompt_id, image_index, expected:{a,relation,b}, detections:[...]}` with
//! float boxes that normalize to integer pixels like every other box here.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use scop_core::geometry::{round_half_up, Rect};
use scop_core::relation::CardinalRelation;
use scop_core::visor::{Detection, Expectation, TrialRecord};

#[derive(Debug, Deserialize)]
struct RawBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

#[derive(Debug, Deserialize)]
struct RawDetection {
    category: String,
    bbox: RawBox,
    confidence: f64,
}

#[derive(Debug, Deserialize)]
struct RawExpectation {
    a: String,
    relation: CardinalRelation,
    b: String,
}

#[derive(Debug, Deserialize)]
struct RawTrial {
    prompt_id: String,
    image_index: u8,
    expected: RawExpectation,
    detections: Vec<RawDetection>,
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    let raw: Vec<RawTrial> = crate::manifest::read_jsonl(path)
        .with_context(|| format!("reading detections {}", path.display()))?;
    let mut trials = Vec::with_capacity(raw.len());
    for (idx, t) in raw.into_iter().enumerate() {
        if t.image_index > 3 {
            bail!(
                "{} record {}: image_index {} out of 0..=3",
                path.display(),
                idx + 1,
                t.image_index
            );
        }
        let mut detections = Vec::with_capacity(t.detections.len());
        for d in t.detections {
            if !(0.0..=1.0).contains(&d.confidence) {
                bail!(
                    "{} record {}: confidence {} out of [0, 1]",
                    path.display(),
                    idx + 1,
                    d.confidence
                );
            }
            // Clamp to a range where centroid arithmetic cannot overflow.
            const LIMIT: i64 = 10_000_000;
            detections.push(Detection {
                category: d.category,
                bbox: Rect::new(
                    round_half_up(d.bbox.x).clamp(-LIMIT, LIMIT),
                    round_half_up(d.bbox.y).clamp(-LIMIT, LIMIT),
                    round_half_up(d.bbox.w).clamp(0, LIMIT),
                    round_half_up(d.bbox.h).clamp(0, LIMIT),
                ),
                confidence: d.confidence,
            });
        }
        trials.push(TrialRecord {
            prompt_id: t.prompt_id,
            image_index: t.image_index,
            expected: Expectation {
                a: t.expected.a,
                relation: t.expected.relation,
                b: t.expected.b,
            },
            detections,
        });
    }
    Ok(trials)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_trial_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"prompt_id":"p0","image_index":0,"expected":{"a":"dog","relation":"left","b":"cat"},"#,
                r#""detections":[{"category":"dog","bbox":{"x":1.4,"y":2.5,"w":9.9,"h":10.0},"confidence":0.8}]}"#,
                "\n"
            ),
        )
        .unwrap();
        let trials = read_trials(&path).unwrap();
        assert_eq!(trials.len(), 1);
        assert_eq!(trials[0].detections[0].bbox, Rect::new(1, 3, 10, 10));
        assert_eq!(trials[0].expected.relation, CardinalRelation::Left);
    }

    #[test]
    fn bad_confidence_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"prompt_id":"p0","image_index":0,"expected":{"a":"a","relation":"left","b":"b"},"#,
                r#""detections":[{"category":"a","bbox":{"x":0,"y":0,"w":1,"h":1},"confidence":1.5}]}"#,
            ),
        )
        .unwrap();
        assert!(read_trials(&path).is_err());
    }
}

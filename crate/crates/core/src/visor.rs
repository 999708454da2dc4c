//! Spatial-generation scoring over detection records.
//!
//! Each prompt owns four generated images. A trial is judged on whether both
//! expected objects were detected and whether their highest-confidence boxes
//! stand in the expected relation (strict centroid inequality on the single
//! relevant axis, y growing downward). Aggregation produces object accuracy,
//! the unconditional and conditional success rates, and the at-least-n
//! curve.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::Rect;
use crate::relation::CardinalRelation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub category: String,
    pub bbox: Rect,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub a: String,
    pub relation: CardinalRelation,
    pub b: String,
}

/// One generated image with its detections and the prompt's expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub prompt_id: String,
    pub image_index: u8,
    pub expected: Expectation,
    pub detections: Vec<Detection>,
}

/// Outcome of judging a single image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub objects_present: bool,
    pub relation_correct: bool,
}

/// Highest-confidence detection for `category`; earliest wins ties.
fn best_detection<'a>(
    detections: &'a [Detection],
    category: &str,
    conf_threshold: f64,
) -> Option<&'a Detection> {
    let mut best: Option<&Detection> = None;
    for d in detections {
        if d.category == category
            && d.confidence >= conf_threshold
            && best.is_none_or(|b| d.confidence > b.confidence)
        {
            best = Some(d);
        }
    }
    best
}

/// Strict centroid comparison on the axis named by the relation.
fn relation_holds(a: &Rect, b: &Rect, relation: CardinalRelation) -> bool {
    let (ax2, ay2) = a.centroid_x2();
    let (bx2, by2) = b.centroid_x2();
    match relation {
        CardinalRelation::Left => ax2 < bx2,
        CardinalRelation::Right => ax2 > bx2,
        CardinalRelation::Above => ay2 < by2,
        CardinalRelation::Below => ay2 > by2,
    }
}

/// Judge one trial at the given confidence threshold.
pub fn judge_trial(trial: &TrialRecord, conf_threshold: f64) -> Judgment {
    let a = best_detection(&trial.detections, &trial.expected.a, conf_threshold);
    let b = best_detection(&trial.detections, &trial.expected.b, conf_threshold);
    match (a, b) {
        (Some(a), Some(b)) => Judgment {
            objects_present: true,
            relation_correct: relation_holds(&a.bbox, &b.bbox, trial.expected.relation),
        },
        _ => Judgment {
            objects_present: false,
            relation_correct: false,
        },
    }
}

/// Aggregate scores. Fractions in `[0, 1]`; the raw counters they derive
/// from ride along so identities can be checked without float rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisorScores {
    /// Fraction of images with both objects detected.
    pub oa: f64,
    /// Fraction of images with the correct relation.
    pub uncond: f64,
    /// Correct fraction among object-present images (0 when none present).
    pub cond: f64,
    /// `visor[n-1]`: fraction of prompts with at least n of 4 correct.
    pub visor: [f64; 4],
    pub prompts: u64,
    pub images: u64,
    pub present_images: u64,
    pub correct_images: u64,
    /// `at_least[n-1]`: prompts with at least n correct images.
    pub at_least: [u64; 4],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggregateError {
    /// Prompts that do not own exactly four trials.
    WrongTrialCount(Vec<String>),
}

impl core::fmt::Display for AggregateError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AggregateError::WrongTrialCount(ids) => {
                write!(f, "prompts without exactly 4 images: {ids:?}")
            }
        }
    }
}

impl core::error::Error for AggregateError {}

/// Judge and aggregate a full trial set.
pub fn aggregate(trials: &[TrialRecord], conf_threshold: f64) -> Result<VisorScores, AggregateError> {
    let mut per_prompt: BTreeMap<&str, Vec<Judgment>> = BTreeMap::new();
    for t in trials {
        per_prompt
            .entry(t.prompt_id.as_str())
            .or_default()
            .push(judge_trial(t, conf_threshold));
    }
    let offenders: Vec<String> = per_prompt
        .iter()
        .filter(|(_, v)| v.len() != 4)
        .map(|(k, _)| String::from(*k))
        .collect();
    if !offenders.is_empty() {
        return Err(AggregateError::WrongTrialCount(offenders));
    }
    Ok(aggregate_judged(per_prompt.into_values().map(|v| {
        let mut it = v.into_iter();
        [
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
        ]
    })))
}

/// Aggregate pre-judged prompts, four judgments each. This is the replay
/// path: per-image outcomes can come from any judge.
pub fn aggregate_judged(prompts: impl IntoIterator<Item = [Judgment; 4]>) -> VisorScores {
    let mut prompt_count = 0u64;
    let mut present_images = 0u64;
    let mut correct_images = 0u64;
    let mut at_least = [0u64; 4];
    for judgments in prompts {
        prompt_count += 1;
        let correct = judgments.iter().filter(|j| j.relation_correct).count();
        present_images += judgments.iter().filter(|j| j.objects_present).count() as u64;
        correct_images += correct as u64;
        for n in 1..=4 {
            if correct >= n {
                at_least[n - 1] += 1;
            }
        }
    }
    let images = prompt_count * 4;
    let frac = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    VisorScores {
        oa: frac(present_images, images),
        uncond: frac(correct_images, images),
        cond: frac(correct_images, present_images),
        visor: [
            frac(at_least[0], prompt_count),
            frac(at_least[1], prompt_count),
            frac(at_least[2], prompt_count),
            frac(at_least[3], prompt_count),
        ],
        prompts: prompt_count,
        images,
        present_images,
        correct_images,
        at_least,
    }
}

/// Expand per-prompt counts into judgments: `counts[k]` prompts with exactly
/// `k` correct images, all of which are object-present, plus
/// `extra_present_incorrect` additional present-but-wrong images spread over
/// the zero-correct prompts.
///
/// Useful for replaying published score rows through the aggregator.
pub fn judgments_from_counts(
    counts_by_correct: [u64; 5],
    extra_present_incorrect: u64,
) -> Vec<[Judgment; 4]> {
    let present_correct = Judgment {
        objects_present: true,
        relation_correct: true,
    };
    let present_wrong = Judgment {
        objects_present: true,
        relation_correct: false,
    };
    let absent = Judgment {
        objects_present: false,
        relation_correct: false,
    };
    let mut out = Vec::new();
    let mut extra = extra_present_incorrect;
    for k in (0..=4usize).rev() {
        for _ in 0..counts_by_correct[k] {
            let mut prompt = [absent; 4];
            for slot in prompt.iter_mut().take(k) {
                *slot = present_correct;
            }
            for slot in prompt.iter_mut().skip(k) {
                if extra > 0 {
                    *slot = present_wrong;
                    extra -= 1;
                }
            }
            out.push(prompt);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn det(category: &str, x: i64, y: i64, confidence: f64) -> Detection {
        Detection {
            category: category.to_string(),
            bbox: Rect::new(x, y, 10, 10),
            confidence,
        }
    }

    fn trial(prompt: &str, idx: u8, detections: Vec<Detection>) -> TrialRecord {
        TrialRecord {
            prompt_id: prompt.to_string(),
            image_index: idx,
            expected: Expectation {
                a: "dog".to_string(),
                relation: CardinalRelation::Left,
                b: "cat".to_string(),
            },
            detections,
        }
    }

    #[test]
    fn judge_left_relation_by_centroid() {
        // A centroid x=10 < B centroid x=80.
        let t = trial("p", 0, vec![det("dog", 5, 45, 0.9), det("cat", 75, 45, 0.9)]);
        let j = judge_trial(&t, 0.1);
        assert!(j.objects_present);
        assert!(j.relation_correct);
    }

    #[test]
    fn missing_object_fails_both() {
        let t = trial("p", 0, vec![det("dog", 5, 45, 0.9)]);
        let j = judge_trial(&t, 0.1);
        assert!(!j.objects_present);
        assert!(!j.relation_correct);
    }

    #[test]
    fn equal_centroids_fail_strict_comparison() {
        let t = trial("p", 0, vec![det("dog", 40, 0, 0.9), det("cat", 40, 50, 0.9)]);
        assert!(!judge_trial(&t, 0.1).relation_correct);
    }

    #[test]
    fn low_confidence_detections_are_invisible() {
        let t = trial("p", 0, vec![det("dog", 5, 45, 0.05), det("cat", 75, 45, 0.9)]);
        assert!(!judge_trial(&t, 0.1).objects_present);
    }

    #[test]
    fn highest_confidence_detection_wins() {
        // The low-confidence dog on the wrong side must lose.
        let t = trial(
            "p",
            0,
            vec![
                det("dog", 90, 45, 0.3),
                det("dog", 5, 45, 0.8),
                det("cat", 50, 45, 0.9),
            ],
        );
        assert!(judge_trial(&t, 0.1).relation_correct);
    }

    #[test]
    fn aggregate_counts_one_prompt() {
        // Correctness pattern [1, 1, 0, 0].
        let trials = vec![
            trial("p", 0, vec![det("dog", 5, 45, 0.9), det("cat", 75, 45, 0.9)]),
            trial("p", 1, vec![det("dog", 5, 45, 0.9), det("cat", 75, 45, 0.9)]),
            trial("p", 2, vec![det("dog", 90, 45, 0.9), det("cat", 5, 45, 0.9)]),
            trial("p", 3, vec![det("dog", 90, 45, 0.9)]),
        ];
        let s = aggregate(&trials, 0.1).unwrap();
        assert_eq!(s.visor, [1.0, 1.0, 0.0, 0.0]);
        assert_eq!(s.uncond, 0.5);
        assert_eq!(s.oa, 0.75);
        assert_eq!(s.prompts, 1);
    }

    #[test]
    fn all_correct_scores_one_everywhere() {
        let trials: Vec<TrialRecord> = (0..4)
            .map(|i| trial("p", i, vec![det("dog", 5, 45, 0.9), det("cat", 75, 45, 0.9)]))
            .collect();
        let s = aggregate(&trials, 0.1).unwrap();
        assert_eq!(s.visor, [1.0; 4]);
        assert_eq!(s.uncond, 1.0);
        assert_eq!(s.cond, 1.0);
        assert_eq!(s.oa, 1.0);
    }

    #[test]
    fn wrong_trial_count_is_an_error() {
        let trials = vec![trial("p", 0, vec![])];
        match aggregate(&trials, 0.1) {
            Err(AggregateError::WrongTrialCount(ids)) => assert_eq!(ids, vec!["p".to_string()]),
            other => panic!("expected error, got {other:?}"),
        }
    }

    #[test]
    fn mean_of_visor_curve_equals_uncond() {
        let prompts = judgments_from_counts([3, 5, 2, 4, 1], 7);
        let s = aggregate_judged(prompts);
        // Counting identity, exact: the at-least curve sums to the number of
        // correct images.
        assert_eq!(s.at_least.iter().sum::<u64>(), s.correct_images);
        let mean = s.visor.iter().sum::<f64>() / 4.0;
        assert!((mean - s.uncond).abs() < 1e-15);
        assert!(s.visor[0] >= s.visor[1] && s.visor[1] >= s.visor[2] && s.visor[2] >= s.visor[3]);
    }
}

//! The five pairing constraints and the ordered filtering pipeline.
//!
//! Filtering order is fixed: visual significance, semantic distinction,
//! spatial clarity, minimal overlap, size balance. Each dropped pair is
//! attributed to the first failing stage; survivors become descriptors.
//!
//! All comparisons are exact. Thresholds are decimal rationals, area ratios
//! compare by integer cross-multiplication, and the clarity ratio compares
//! squared (`d^2 * den^2 < num^2 * l^2`), so no boundary ever depends on
//! floating-point rounding and counts reproduce bit-for-bit everywhere.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{ImageRecord, ObjectInstance};
use crate::decode::DescribedObject;
use crate::geometry;
use crate::pairing::{enumerate_pairs, CandidatePair};
use crate::relation::{RelationRule, RelationToken};

/// Exact non-negative rational parsed from a decimal literal.
///
/// `"0.2"` becomes 2/10, not the nearest `f64`, so threshold boundaries land
/// exactly where the configuration says.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    num: i64,
    den: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RatioParseError {
    Empty,
    InvalidDigit,
    TooManyDigits,
}

impl core::fmt::Display for RatioParseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RatioParseError::Empty => write!(f, "empty decimal literal"),
            RatioParseError::InvalidDigit => write!(f, "invalid character in decimal literal"),
            RatioParseError::TooManyDigits => {
                write!(f, "decimal literal exceeds 12 significant digits")
            }
        }
    }
}

impl core::error::Error for RatioParseError {}

impl Ratio {
    pub const fn new(num: i64, den: i64) -> Self {
        assert!(num >= 0 && den > 0);
        Self { num, den }
    }

    /// Parse a non-negative decimal such as `"2"`, `"0.2"`, or `"2.0"`.
    ///
    /// At most 12 digits total, which keeps every downstream i128 product
    /// far from overflow.
    pub fn parse_decimal(s: &str) -> Result<Self, RatioParseError> {
        let s = s.trim();
        if s.is_empty() {
            return Err(RatioParseError::Empty);
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(RatioParseError::Empty);
        }
        let mut digits = 0usize;
        let mut num: i64 = 0;
        for part in [int_part, frac_part] {
            for c in part.chars() {
                let d = c.to_digit(10).ok_or(RatioParseError::InvalidDigit)? as i64;
                digits += 1;
                if digits > 12 {
                    return Err(RatioParseError::TooManyDigits);
                }
                num = num * 10 + d;
            }
        }
        let den = 10i64.pow(frac_part.len() as u32);
        Ok(Self { num, den })
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Exact `lhs_num / lhs_den > self`, for non-negative integer operands.
    pub fn lt_fraction(self, lhs_num: i64, lhs_den: i64) -> bool {
        debug_assert!(lhs_num >= 0 && lhs_den > 0);
        (lhs_num as i128) * (self.den as i128) > (self.num as i128) * (lhs_den as i128)
    }

    /// Exact `lhs_num / lhs_den < self`.
    pub fn gt_fraction(self, lhs_num: i64, lhs_den: i64) -> bool {
        debug_assert!(lhs_num >= 0 && lhs_den > 0);
        (lhs_num as i128) * (self.den as i128) < (self.num as i128) * (lhs_den as i128)
    }

    /// Exact `sqrt(sq_num / sq_den) < self`, comparing squares.
    pub fn gt_sqrt_fraction(self, sq_num: i64, sq_den: i64) -> bool {
        debug_assert!(sq_num >= 0 && sq_den > 0);
        let lhs = (sq_num as i128) * (self.den as i128) * (self.den as i128);
        let rhs = (self.num as i128) * (self.num as i128) * (sq_den as i128);
        lhs < rhs
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdError(pub String);

impl core::fmt::Display for ThresholdError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "invalid threshold: {}", self.0)
    }
}

impl core::error::Error for ThresholdError {}

/// The four filtering thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub tau_v: Ratio,
    pub tau_u: Ratio,
    pub tau_o: Ratio,
    pub tau_s: Ratio,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            tau_v: Ratio::new(2, 10),
            tau_u: Ratio::new(2, 1),
            tau_o: Ratio::new(3, 10),
            tau_s: Ratio::new(5, 10),
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), ThresholdError> {
        let frac = |r: Ratio| r.num > 0 && r.num < r.den;
        if !frac(self.tau_v) {
            return Err(ThresholdError(String::from("tau_v must satisfy 0 < tau_v < 1")));
        }
        if self.tau_u.num <= 0 {
            return Err(ThresholdError(String::from("tau_u must be positive")));
        }
        if self.tau_o.num < 0 || self.tau_o.num > self.tau_o.den {
            return Err(ThresholdError(String::from("tau_o must satisfy 0 <= tau_o <= 1")));
        }
        if self.tau_s.num <= 0 || self.tau_s.num > self.tau_s.den {
            return Err(ThresholdError(String::from("tau_s must satisfy 0 < tau_s <= 1")));
        }
        Ok(())
    }
}

/// Interpretation of the pair-coverage numerator in visual significance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnionMode {
    /// Inclusion-exclusion union area of the two boxes.
    #[default]
    Exact,
    /// Area of the minimal box enclosing both.
    EnclosingBox,
}

/// Everything the filtering pipeline needs to know.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub thresholds: Thresholds,
    pub union_mode: UnionMode,
    pub relation_rule: RelationRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintError {
    ZeroImageArea,
}

impl core::fmt::Display for ConstraintError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ConstraintError::ZeroImageArea => write!(f, "image has zero area"),
        }
    }
}

impl core::error::Error for ConstraintError {}

/// Pair coverage must exceed `tau_v`: union area over image area, strictly.
pub fn visual_significance(
    pair: &CandidatePair<'_>,
    image: &ImageRecord,
    mode: UnionMode,
    tau_v: Ratio,
) -> Result<bool, ConstraintError> {
    let image_area = image.area();
    if image_area <= 0 {
        return Err(ConstraintError::ZeroImageArea);
    }
    let covered = match mode {
        UnionMode::Exact => geometry::union_area(&pair.subject.bbox, &pair.object.bbox),
        UnionMode::EnclosingBox => {
            geometry::enclosing_box_area(&pair.subject.bbox, &pair.object.bbox)
        }
    };
    Ok(tau_v.lt_fraction(covered, image_area))
}

/// Category ids must differ; names are not consulted.
pub fn semantic_distinction(pair: &CandidatePair<'_>) -> bool {
    pair.subject.category_id != pair.object.category_id
}

/// Centroid distance over the smaller diagonal must stay under `tau_u`.
///
/// Compared squared: `4 d^2` and `4 l^2` are exact integers. Zero diagonals
/// (possible only for degenerate boxes) fail the constraint.
pub fn spatial_clarity(pair: &CandidatePair<'_>, tau_u: Ratio) -> bool {
    let a = &pair.subject.bbox;
    let b = &pair.object.bbox;
    let l_sq = a.diagonal_sq().min(b.diagonal_sq());
    if l_sq == 0 {
        return false;
    }
    let d_sq_x4 = geometry::centroid_distance_sq_x4(a, b);
    tau_u.gt_sqrt_fraction(d_sq_x4, 4 * l_sq)
}

/// Overlap over the smaller box area must stay under `tau_o`.
pub fn minimal_overlap(pair: &CandidatePair<'_>, tau_o: Ratio) -> bool {
    let a = &pair.subject.bbox;
    let b = &pair.object.bbox;
    let min_area = a.area().min(b.area());
    if min_area <= 0 {
        return false;
    }
    tau_o.gt_fraction(geometry::intersection_area(a, b), min_area)
}

/// Smaller over larger box area must exceed `tau_s`.
pub fn size_balance(pair: &CandidatePair<'_>, tau_s: Ratio) -> bool {
    let a = pair.subject.bbox.area();
    let b = pair.object.bbox.area();
    let max_area = a.max(b);
    if max_area <= 0 {
        return false;
    }
    tau_s.lt_fraction(a.min(b), max_area)
}

/// Filtering stages, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    VisualSignificance,
    SemanticDistinction,
    SpatialClarity,
    MinimalOverlap,
    SizeBalance,
}

impl Stage {
    pub const ORDER: [Stage; 5] = [
        Stage::VisualSignificance,
        Stage::SemanticDistinction,
        Stage::SpatialClarity,
        Stage::MinimalOverlap,
        Stage::SizeBalance,
    ];

    pub const fn name(&self) -> &'static str {
        match self {
            Stage::VisualSignificance => "visual_significance",
            Stage::SemanticDistinction => "semantic_distinction",
            Stage::SpatialClarity => "spatial_clarity",
            Stage::MinimalOverlap => "minimal_overlap",
            Stage::SizeBalance => "size_balance",
        }
    }
}

/// Drops attributed to the first failing stage, in pipeline order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub visual_significance: u64,
    pub semantic_distinction: u64,
    pub spatial_clarity: u64,
    pub minimal_overlap: u64,
    pub size_balance: u64,
}

impl DropCounts {
    pub fn get(&self, stage: Stage) -> u64 {
        match stage {
            Stage::VisualSignificance => self.visual_significance,
            Stage::SemanticDistinction => self.semantic_distinction,
            Stage::SpatialClarity => self.spatial_clarity,
            Stage::MinimalOverlap => self.minimal_overlap,
            Stage::SizeBalance => self.size_balance,
        }
    }

    fn bump(&mut self, stage: Stage) {
        match stage {
            Stage::VisualSignificance => self.visual_significance += 1,
            Stage::SemanticDistinction => self.semantic_distinction += 1,
            Stage::SpatialClarity => self.spatial_clarity += 1,
            Stage::MinimalOverlap => self.minimal_overlap += 1,
            Stage::SizeBalance => self.size_balance += 1,
        }
    }

    pub fn total(&self) -> u64 {
        Stage::ORDER.iter().map(|s| self.get(*s)).sum()
    }
}

/// Pipeline accounting. `candidates == drops.total() + survivors` always.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub candidates: u64,
    pub drops: DropCounts,
    pub survivors: u64,
    /// Pairs whose centroids coincide and therefore carry `<and>`.
    pub degenerate_relations: u64,
}

impl StageStats {
    pub fn merge(&mut self, other: &StageStats) {
        self.candidates += other.candidates;
        self.survivors += other.survivors;
        self.degenerate_relations += other.degenerate_relations;
        self.drops.visual_significance += other.drops.visual_significance;
        self.drops.semantic_distinction += other.drops.semantic_distinction;
        self.drops.spatial_clarity += other.drops.spatial_clarity;
        self.drops.minimal_overlap += other.drops.minimal_overlap;
        self.drops.size_balance += other.drops.size_balance;
    }

    pub fn is_conserved(&self) -> bool {
        self.candidates == self.drops.total() + self.survivors
    }
}

/// Structured survivor record: subject, relation token, object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialDescriptor {
    pub image_id: i64,
    pub pair_index: u64,
    pub subject: DescribedObject,
    pub relation: RelationToken,
    pub object: DescribedObject,
}

/// First stage a pair fails under `cfg`, or `None` for survivors.
pub fn first_failing_stage(
    pair: &CandidatePair<'_>,
    image: &ImageRecord,
    cfg: &PipelineConfig,
) -> Option<Stage> {
    let t = &cfg.thresholds;
    if !visual_significance(pair, image, cfg.union_mode, t.tau_v).unwrap_or(false) {
        Some(Stage::VisualSignificance)
    } else if !semantic_distinction(pair) {
        Some(Stage::SemanticDistinction)
    } else if !spatial_clarity(pair, t.tau_u) {
        Some(Stage::SpatialClarity)
    } else if !minimal_overlap(pair, t.tau_o) {
        Some(Stage::MinimalOverlap)
    } else if !size_balance(pair, t.tau_s) {
        Some(Stage::SizeBalance)
    } else {
        None
    }
}

/// Run the full pipeline over one image's instances.
pub fn evaluate_image(
    image: &ImageRecord,
    instances: &[ObjectInstance],
    cfg: &PipelineConfig,
) -> (Vec<SpatialDescriptor>, StageStats) {
    let mut stats = StageStats::default();
    let mut survivors = Vec::new();
    for pair in enumerate_pairs(image, instances, cfg.relation_rule) {
        stats.candidates += 1;
        if pair.relation == RelationToken::And {
            stats.degenerate_relations += 1;
        }
        match first_failing_stage(&pair, image, cfg) {
            Some(stage) => stats.drops.bump(stage),
            None => {
                stats.survivors += 1;
                survivors.push(SpatialDescriptor {
                    image_id: image.image_id,
                    pair_index: pair.pair_index,
                    subject: DescribedObject {
                        category: pair.subject.category_name.clone(),
                        bbox: pair.subject.bbox,
                    },
                    relation: pair.relation,
                    object: DescribedObject {
                        category: pair.object.category_name.clone(),
                        bbox: pair.object.bbox,
                    },
                });
            }
        }
    }
    (survivors, stats)
}

/// Sequential pipeline over a whole dataset, images in ascending id order.
pub fn run_pipeline(
    dataset: &crate::dataset::DatasetIndex,
    cfg: &PipelineConfig,
) -> (Vec<SpatialDescriptor>, StageStats) {
    let mut all = Vec::new();
    let mut stats = StageStats::default();
    for entry in dataset.entries() {
        let (mut descriptors, image_stats) = evaluate_image(&entry.image, &entry.instances, cfg);
        all.append(&mut descriptors);
        stats.merge(&image_stats);
    }
    (all, stats)
}

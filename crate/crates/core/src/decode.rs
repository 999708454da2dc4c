//! Descriptor decoding: survivor pairs become crop rectangles plus templated
//! captions.
//!
//! Decoding is deterministic given `(global_seed, image_id, pair_index)`:
//! that triple seeds a per-record stream which draws, in fixed order, the
//! `<and>` substitution, the template index, and the crop expansion. Records
//! therefore decode identically no matter how work is scheduled.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::constraints::SpatialDescriptor;
use crate::dataset::ImageRecord;
use crate::geometry::{enclosing_square, Rect};
use crate::relation::RelationToken;
use crate::rng::{record_seed, Stream};

/// A named box, as it appears in descriptors and manifest records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescribedObject {
    pub category: String,
    pub bbox: Rect,
}

/// Identity of the randomness used to decode one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedMaterial {
    pub global_seed: u64,
    pub image_id: i64,
    pub pair_index: u64,
}

/// One decoded training sample: crop + caption + provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image_id: i64,
    pub pair_index: u64,
    pub crop: Rect,
    pub prompt: String,
    pub relation: RelationToken,
    pub subject: DescribedObject,
    pub object: DescribedObject,
    pub seed_material: SeedMaterial,
    pub flags: Vec<String>,
}

pub const FLAG_CROP_TRUNCATED: &str = "crop_truncated";
pub const FLAG_DEGENERATE_RELATION: &str = "degenerate_relation";
pub const FLAG_AND_SUBSTITUTED: &str = "and_substituted";

/// Caption templates per relation token. `{subject}` and `{object}` slots
/// must each appear exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplatePool {
    templates: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PoolError {
    UnknownToken(String),
    MissingToken(RelationToken),
    BadSlots { token: RelationToken, template: String },
}

impl core::fmt::Display for PoolError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PoolError::UnknownToken(t) => write!(f, "unknown relation token {t:?}"),
            PoolError::MissingToken(t) => write!(f, "no templates for token {t}"),
            PoolError::BadSlots { token, template } => write!(
                f,
                "template for {token} must use {{subject}} and {{object}} exactly once: {template:?}"
            ),
        }
    }
}

impl core::error::Error for PoolError {}

impl TemplatePool {
    pub fn from_map(templates: BTreeMap<String, Vec<String>>) -> Result<Self, PoolError> {
        let pool = Self { templates };
        pool.validate()?;
        Ok(pool)
    }

    /// Every one of the 8 directional tokens plus `<and>` must have at least
    /// one well-formed template.
    pub fn validate(&self) -> Result<(), PoolError> {
        for key in self.templates.keys() {
            if RelationToken::parse(key).is_none() {
                return Err(PoolError::UnknownToken(key.clone()));
            }
        }
        for token in RelationToken::ALL {
            let list = self
                .templates
                .get(token.as_str())
                .filter(|l| !l.is_empty())
                .ok_or(PoolError::MissingToken(token))?;
            for template in list {
                let subject_ok = template.matches("{subject}").count() == 1;
                let object_ok = template.matches("{object}").count() == 1;
                if !subject_ok || !object_ok {
                    return Err(PoolError::BadSlots {
                        token,
                        template: template.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn templates_for(&self, token: RelationToken) -> &[String] {
        self.templates
            .get(token.as_str())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// The built-in pool: three captions per token.
    pub fn default_pool() -> Self {
        let mut templates = BTreeMap::new();
        let mut add = |token: RelationToken, list: [&str; 3]| {
            templates.insert(
                token.as_str().to_string(),
                list.iter().map(|s| s.to_string()).collect(),
            );
        };
        add(
            RelationToken::Left,
            [
                "a {subject} to the left of a {object}",
                "an image of a {subject} on the left side of a {object}",
                "a photo of a {object} with a {subject} to its left",
            ],
        );
        add(
            RelationToken::Right,
            [
                "a {subject} to the right of a {object}",
                "an image of a {subject} on the right side of a {object}",
                "a photo of a {object} with a {subject} to its right",
            ],
        );
        add(
            RelationToken::Above,
            [
                "a {subject} above a {object}",
                "a {subject} on top of a {object}",
                "an image of a {object} below a {subject}",
            ],
        );
        add(
            RelationToken::Below,
            [
                "a {subject} below a {object}",
                "a {subject} underneath a {object}",
                "an image of a {object} above a {subject}",
            ],
        );
        add(
            RelationToken::LeftAbove,
            [
                "a {subject} to the upper left of a {object}",
                "an image of a {subject} above and to the left of a {object}",
                "a photo of a {object} with a {subject} at its upper left",
            ],
        );
        add(
            RelationToken::RightAbove,
            [
                "a {subject} to the upper right of a {object}",
                "an image of a {subject} above and to the right of a {object}",
                "a photo of a {object} with a {subject} at its upper right",
            ],
        );
        add(
            RelationToken::LeftBelow,
            [
                "a {subject} to the lower left of a {object}",
                "an image of a {subject} below and to the left of a {object}",
                "a photo of a {object} with a {subject} at its lower left",
            ],
        );
        add(
            RelationToken::RightBelow,
            [
                "a {subject} to the lower right of a {object}",
                "an image of a {subject} below and to the right of a {object}",
                "a photo of a {object} with a {subject} at its lower right",
            ],
        );
        add(
            RelationToken::And,
            [
                "a {subject} and a {object}",
                "an image of a {subject} and a {object}",
                "a photo with a {subject} and a {object}",
            ],
        );
        Self { templates }
    }
}

impl Default for TemplatePool {
    fn default() -> Self {
        Self::default_pool()
    }
}

/// Nouns whose article does not follow the vowel-letter heuristic.
const ARTICLE_EXCEPTIONS: &[(&str, &str)] = &[
    ("hour", "an"),
    ("honest", "an"),
    ("heir", "an"),
    ("umbrella", "an"),
    ("unicorn", "a"),
    ("university", "a"),
    ("user", "a"),
    ("one", "a"),
    ("ukulele", "a"),
];

/// Indefinite article for `noun`: vowel-initial words take "an", with a
/// short exception table for spelling/sound mismatches.
pub fn article_for(noun: &str) -> &'static str {
    let first_word = noun.split_whitespace().next().unwrap_or("");
    let lowered = first_word.to_lowercase();
    for (word, art) in ARTICLE_EXCEPTIONS {
        if lowered == *word {
            return art;
        }
    }
    match lowered.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// Fill a template's slots, fixing the indefinite article in front of each.
pub fn render_template(template: &str, subject: &str, object: &str) -> String {
    let mut out = template.to_string();
    for (slot, noun) in [("{subject}", subject), ("{object}", object)] {
        let articled = alloc::format!("a {slot}");
        if out.contains(&articled) {
            out = out.replace(&articled, &alloc::format!("{} {}", article_for(noun), noun));
        } else {
            out = out.replace(slot, noun);
        }
    }
    out
}

/// Invert [`render_template`] for one template: recover `(subject, object)`.
fn match_template(template: &str, prompt: &str) -> Option<(String, String)> {
    // Split the template into literal runs and slots, articles made flexible.
    #[derive(Clone, Copy)]
    enum Piece<'t> {
        Lit(&'t str),
        Subject,
        Object,
    }
    let mut pieces = Vec::new();
    let mut rest = template;
    while let Some(pos) = rest.find('{') {
        let end = rest[pos..].find('}')? + pos + 1;
        if pos > 0 {
            pieces.push(Piece::Lit(&rest[..pos]));
        }
        match &rest[pos..end] {
            "{subject}" => pieces.push(Piece::Subject),
            "{object}" => pieces.push(Piece::Object),
            _ => return None,
        }
        rest = &rest[end..];
    }
    if !rest.is_empty() {
        pieces.push(Piece::Lit(rest));
    }

    // A slot never captures an embedded article; category names do not
    // contain one, and rejecting it stops a slot from swallowing literal
    // text that belongs to a longer template.
    fn plausible_slot(value: &str) -> bool {
        !value.is_empty()
            && !value.starts_with(' ')
            && !value.ends_with(' ')
            && !value.contains(" a ")
            && !value.contains(" an ")
    }

    // "a " as a standalone word at the end of a literal may have been
    // rendered as "an ".
    fn article_variants(lit: &str) -> Vec<String> {
        if let Some(stem) = lit.strip_suffix("a ") {
            if stem.is_empty() || stem.ends_with(' ') {
                return alloc::vec![alloc::format!("{stem}a "), alloc::format!("{stem}an ")];
            }
        }
        alloc::vec![lit.to_string()]
    }

    fn matches<'p>(
        pieces: &[Piece<'_>],
        prompt: &'p str,
        subject: Option<&'p str>,
        object: Option<&'p str>,
    ) -> Option<(String, String)> {
        match pieces.split_first() {
            None => {
                if prompt.is_empty() {
                    Some((subject?.to_string(), object?.to_string()))
                } else {
                    None
                }
            }
            Some((Piece::Lit(lit), tail)) => {
                for cand in article_variants(lit) {
                    if let Some(rest) = prompt.strip_prefix(cand.as_str()) {
                        if let Some(hit) = matches(tail, rest, subject, object) {
                            return Some(hit);
                        }
                    }
                }
                None
            }
            Some((piece, tail)) => {
                // The slot runs until the next literal begins; try every cut.
                let has_following_lit = !tail.is_empty();
                let cuts: Vec<usize> = if has_following_lit {
                    (1..=prompt.len())
                        .filter(|i| prompt.is_char_boundary(*i))
                        .collect()
                } else {
                    alloc::vec![prompt.len()]
                };
                for cut in cuts {
                    let (value, rest) = prompt.split_at(cut);
                    if !plausible_slot(value) {
                        continue;
                    }
                    let (s, o) = match piece {
                        Piece::Subject => (Some(value), object),
                        Piece::Object => (subject, Some(value)),
                        Piece::Lit(_) => unreachable!(),
                    };
                    if let Some(hit) = matches(tail, rest, s, o) {
                        return Some(hit);
                    }
                }
                None
            }
        }
    }

    matches(&pieces, prompt, None, None)
}

/// Search the pool for the template that produced `prompt`.
///
/// Returns the relation token and the recovered category names. Templates
/// with more literal text are tried first, so a sparse template cannot
/// shadow a more specific one that also matches.
pub fn parse_prompt(pool: &TemplatePool, prompt: &str) -> Option<(RelationToken, String, String)> {
    let mut candidates: Vec<(RelationToken, &String)> = RelationToken::ALL
        .into_iter()
        .flat_map(|token| pool.templates_for(token).iter().map(move |t| (token, t)))
        .collect();
    candidates.sort_by_key(|(_, t)| core::cmp::Reverse(t.len()));
    for (token, template) in candidates {
        if let Some((subject, object)) = match_template(template, prompt) {
            return Some((token, subject, object));
        }
    }
    None
}

/// Knobs for descriptor decoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    /// Probability of replacing the relation with `<and>`.
    pub and_probability: f64,
    /// Upper bound of the uniform crop expansion.
    pub max_expansion: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            and_probability: 0.1,
            max_expansion: 0.10,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if !(0.0..=1.0).contains(&self.and_probability) {
            return Err(DecodeError::BadConfig("and_probability must be in [0, 1]"));
        }
        if !(0.0..=0.10).contains(&self.max_expansion) {
            return Err(DecodeError::BadConfig("max_expansion must be in [0, 0.10]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    BadConfig(&'static str),
    MissingTemplate(RelationToken),
}

impl core::fmt::Display for DecodeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DecodeError::BadConfig(msg) => write!(f, "invalid decode config: {msg}"),
            DecodeError::MissingTemplate(t) => write!(f, "no template for token {t}"),
        }
    }
}

impl core::error::Error for DecodeError {}

/// Decode one descriptor into a manifest record.
///
/// Draw order from the per-record stream is fixed: substitution, template,
/// expansion. All three draws happen even when a knob disables their effect,
/// so records keep identical crops across `and_probability` settings.
pub fn decode(
    descriptor: &SpatialDescriptor,
    image: &ImageRecord,
    pool: &TemplatePool,
    cfg: &DecodeConfig,
    global_seed: u64,
) -> Result<ManifestRecord, DecodeError> {
    cfg.validate()?;
    let seed_material = SeedMaterial {
        global_seed,
        image_id: descriptor.image_id,
        pair_index: descriptor.pair_index,
    };
    let mut stream = Stream::new(record_seed(
        global_seed,
        descriptor.image_id,
        descriptor.pair_index,
    ));

    let substitute = stream.next_f64() < cfg.and_probability;
    let token = if substitute {
        RelationToken::And
    } else {
        descriptor.relation
    };

    let templates = pool.templates_for(token);
    if templates.is_empty() {
        return Err(DecodeError::MissingTemplate(token));
    }
    let template = &templates[stream.next_index(templates.len())];
    let prompt = render_template(template, &descriptor.subject.category, &descriptor.object.category);

    let expansion = stream.next_f64() * cfg.max_expansion;
    let (crop, truncated) = enclosing_square(
        &descriptor.subject.bbox,
        &descriptor.object.bbox,
        image,
        expansion,
    );

    let mut flags = Vec::new();
    if truncated {
        flags.push(FLAG_CROP_TRUNCATED.to_string());
    }
    if descriptor.relation == RelationToken::And {
        flags.push(FLAG_DEGENERATE_RELATION.to_string());
    }
    if substitute {
        flags.push(FLAG_AND_SUBSTITUTED.to_string());
    }
    flags.sort();

    Ok(ManifestRecord {
        image_id: descriptor.image_id,
        pair_index: descriptor.pair_index,
        crop,
        prompt,
        relation: token,
        subject: descriptor.subject.clone(),
        object: descriptor.object.clone(),
        seed_material,
        flags,
    })
}

//! Directional relation tokens and their classification from box geometry.
//!
//! A token names the subject's position relative to the object. The plane
//! around the displacement origin splits into eight sectors: the four
//! cardinal sectors span 45 degrees centered on each axis direction, the
//! diagonals fill the rest and absorb the sector boundaries. `<and>` is the
//! neutral token used for coincident centroids and decode-time substitution.
//!
//! Classification runs entirely in doubled integer coordinates, so boundary
//! decisions are exact: comparing `|dy| < tan(22.5 deg) * |dx|` becomes
//! `(|dx| + |dy|)^2 < 2 * dx^2`, which no nonzero integer pair can satisfy
//! with equality.

use serde::{Deserialize, Serialize};

use crate::geometry::Rect;

/// The eight compass tokens plus the neutral `<and>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationToken {
    #[serde(rename = "<left>")]
    Left,
    #[serde(rename = "<right>")]
    Right,
    #[serde(rename = "<above>")]
    Above,
    #[serde(rename = "<below>")]
    Below,
    #[serde(rename = "<left+above>")]
    LeftAbove,
    #[serde(rename = "<right+above>")]
    RightAbove,
    #[serde(rename = "<left+below>")]
    LeftBelow,
    #[serde(rename = "<right+below>")]
    RightBelow,
    #[serde(rename = "<and>")]
    And,
}

impl RelationToken {
    pub const ALL: [RelationToken; 9] = [
        RelationToken::Left,
        RelationToken::Right,
        RelationToken::Above,
        RelationToken::Below,
        RelationToken::LeftAbove,
        RelationToken::RightAbove,
        RelationToken::LeftBelow,
        RelationToken::RightBelow,
        RelationToken::And,
    ];

    pub const fn as_str(&self) -> &'static str {
        match self {
            RelationToken::Left => "<left>",
            RelationToken::Right => "<right>",
            RelationToken::Above => "<above>",
            RelationToken::Below => "<below>",
            RelationToken::LeftAbove => "<left+above>",
            RelationToken::RightAbove => "<right+above>",
            RelationToken::LeftBelow => "<left+below>",
            RelationToken::RightBelow => "<right+below>",
            RelationToken::And => "<and>",
        }
    }

    pub fn parse(s: &str) -> Option<RelationToken> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// The 180-degree rotated token. Involution; `<and>` is its own opposite.
    pub const fn opposite(&self) -> RelationToken {
        match self {
            RelationToken::Left => RelationToken::Right,
            RelationToken::Right => RelationToken::Left,
            RelationToken::Above => RelationToken::Below,
            RelationToken::Below => RelationToken::Above,
            RelationToken::LeftAbove => RelationToken::RightBelow,
            RelationToken::RightAbove => RelationToken::LeftBelow,
            RelationToken::LeftBelow => RelationToken::RightAbove,
            RelationToken::RightBelow => RelationToken::LeftAbove,
            RelationToken::And => RelationToken::And,
        }
    }
}

impl core::fmt::Display for RelationToken {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The four axis-aligned relations used by prompt groups and trial judging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CardinalRelation {
    Left,
    Right,
    Above,
    Below,
}

impl CardinalRelation {
    pub const ALL: [CardinalRelation; 4] = [
        CardinalRelation::Left,
        CardinalRelation::Right,
        CardinalRelation::Above,
        CardinalRelation::Below,
    ];

    pub const fn opposite(&self) -> CardinalRelation {
        match self {
            CardinalRelation::Left => CardinalRelation::Right,
            CardinalRelation::Right => CardinalRelation::Left,
            CardinalRelation::Above => CardinalRelation::Below,
            CardinalRelation::Below => CardinalRelation::Above,
        }
    }

    /// Natural-language phrase linking subject to object.
    pub const fn phrase(&self) -> &'static str {
        match self {
            CardinalRelation::Left => "to the left of",
            CardinalRelation::Right => "to the right of",
            CardinalRelation::Above => "above",
            CardinalRelation::Below => "below",
        }
    }

    pub const fn as_str(&self) -> &'static str {
        match self {
            CardinalRelation::Left => "left",
            CardinalRelation::Right => "right",
            CardinalRelation::Above => "above",
            CardinalRelation::Below => "below",
        }
    }
}

/// Sector rule for turning a centroid displacement into a token.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationRule {
    /// Eight 45-degree sectors; cardinal sectors centered on the axes.
    #[default]
    Octant,
    /// Token follows the dominant displacement axis; exact ties go diagonal.
    AxisDominant,
}

/// Token describing `subject`'s position relative to `object`.
///
/// Computed from the displacement `centroid(subject) - centroid(object)` in
/// image coordinates (y down). Coincident centroids yield `<and>`, the
/// deterministic degenerate fallback.
pub fn classify_relation(subject: &Rect, object: &Rect, rule: RelationRule) -> RelationToken {
    let (sx2, sy2) = subject.centroid_x2();
    let (ox2, oy2) = object.centroid_x2();
    classify_displacement(sx2 - ox2, sy2 - oy2, rule)
}

/// Classification from a raw displacement in doubled pixel units.
pub fn classify_displacement(dx2: i64, dy2: i64, rule: RelationRule) -> RelationToken {
    if dx2 == 0 && dy2 == 0 {
        return RelationToken::And;
    }
    let ax = dx2.unsigned_abs() as i128;
    let ay = dy2.unsigned_abs() as i128;
    let (horizontal, vertical) = match rule {
        RelationRule::Octant => {
            let s = (ax + ay) * (ax + ay);
            (s < 2 * ax * ax, s < 2 * ay * ay)
        }
        RelationRule::AxisDominant => (ax > ay, ay > ax),
    };
    if horizontal {
        if dx2 > 0 {
            RelationToken::Right
        } else {
            RelationToken::Left
        }
    } else if vertical {
        if dy2 < 0 {
            RelationToken::Above
        } else {
            RelationToken::Below
        }
    } else {
        match (dx2 > 0, dy2 < 0) {
            (true, true) => RelationToken::RightAbove,
            (true, false) => RelationToken::RightBelow,
            (false, true) => RelationToken::LeftAbove,
            (false, false) => RelationToken::LeftBelow,
        }
    }
}

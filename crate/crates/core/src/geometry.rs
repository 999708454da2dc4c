//! Exact axis-aligned rectangle arithmetic.
//!
//! All coordinates are integer pixels with y growing downward. Centroids land
//! on half-pixel positions, so anything that needs them exactly works in
//! doubled coordinates (`2 * coordinate`), which stay integral.

use serde::{Deserialize, Serialize};

use crate::dataset::ImageRecord;

/// Axis-aligned box: top-left corner plus non-negative extent.
///
/// Arithmetic assumes sides at most ~10^5 px, so areas and squared distances
/// fit comfortably in `i64`/`i128` without overflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl Rect {
    pub const fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        Self { x, y, w, h }
    }

    pub const fn right(&self) -> i64 {
        self.x + self.w
    }

    pub const fn bottom(&self) -> i64 {
        self.y + self.h
    }

    /// Area in square pixels.
    pub const fn area(&self) -> i64 {
        self.w * self.h
    }

    /// Centroid in doubled coordinates: `(2cx, 2cy)` is always integral.
    pub const fn centroid_x2(&self) -> (i64, i64) {
        (2 * self.x + self.w, 2 * self.y + self.h)
    }

    /// Centroid as floats. Half-pixel positions are exact in `f64`.
    pub fn centroid(&self) -> (f64, f64) {
        let (cx2, cy2) = self.centroid_x2();
        (cx2 as f64 / 2.0, cy2 as f64 / 2.0)
    }

    /// Squared diagonal length, exact.
    pub const fn diagonal_sq(&self) -> i64 {
        self.w * self.w + self.h * self.h
    }

    /// Euclidean diagonal length.
    pub fn diagonal(&self) -> f64 {
        libm::sqrt(self.diagonal_sq() as f64)
    }

    pub const fn contains_rect(&self, other: &Rect) -> bool {
        self.x <= other.x
            && self.y <= other.y
            && self.right() >= other.right()
            && self.bottom() >= other.bottom()
    }

    /// Bounding box of `self` and `other`.
    pub fn bounding_union(&self, other: &Rect) -> Rect {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        let right = self.right().max(other.right());
        let bottom = self.bottom().max(other.bottom());
        Rect::new(x, y, right - x, bottom - y)
    }
}

/// Area of `r`, in square pixels.
pub const fn area(r: &Rect) -> i64 {
    r.area()
}

/// Overlap area of two rects; 0 when disjoint.
pub fn intersection_area(a: &Rect, b: &Rect) -> i64 {
    let w = a.right().min(b.right()) - a.x.max(b.x);
    let h = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if w <= 0 || h <= 0 {
        0
    } else {
        w * h
    }
}

/// Inclusion-exclusion union area of two rects.
pub fn union_area(a: &Rect, b: &Rect) -> i64 {
    a.area() + b.area() - intersection_area(a, b)
}

/// Area of the minimal axis-aligned box enclosing both rects.
pub fn enclosing_box_area(a: &Rect, b: &Rect) -> i64 {
    a.bounding_union(b).area()
}

/// Squared centroid distance in quarter-pixel units: `4 * d^2`, exact.
pub fn centroid_distance_sq_x4(a: &Rect, b: &Rect) -> i64 {
    let (ax2, ay2) = a.centroid_x2();
    let (bx2, by2) = b.centroid_x2();
    let dx2 = ax2 - bx2;
    let dy2 = ay2 - by2;
    dx2 * dx2 + dy2 * dy2
}

/// Euclidean distance between centroids.
pub fn centroid_distance(a: &Rect, b: &Rect) -> f64 {
    libm::sqrt(centroid_distance_sq_x4(a, b) as f64) / 2.0
}

/// Round to nearest integer, halves toward positive infinity.
pub fn round_half_up(v: f64) -> i64 {
    libm::floor(v + 0.5) as i64
}

/// Round-half-up of `k / 2` in pure integer arithmetic.
const fn round_half_of(k: i64) -> i64 {
    (k + 1).div_euclid(2)
}

/// Square crop covering `a` and `b`, expanded by `expansion` and fitted to
/// the image.
///
/// The minimal enclosing square is centered on the pair's bounding box, its
/// side scaled by `1 + expansion` (rounded half-up), then translated to lie
/// inside the image. If the side exceeds an image dimension the region is
/// truncated on that axis and the result shrinks to the largest centered
/// square that fits.
///
/// Returns the square and whether it failed to contain both inputs
/// (`crop_truncated`). The output is always square.
pub fn enclosing_square(
    a: &Rect,
    b: &Rect,
    image: &ImageRecord,
    expansion: f64,
) -> (Rect, bool) {
    let bb = a.bounding_union(b);
    let side = bb.w.max(bb.h);
    let expanded = round_half_up(side as f64 * (1.0 + expansion)).max(side);

    // Ideal placement: centered on bb, computed in doubled coordinates.
    let ideal_x = round_half_of(2 * bb.x + bb.w - expanded);
    let ideal_y = round_half_of(2 * bb.y + bb.h - expanded);

    let (x, w) = fit_axis(ideal_x, expanded, image.width);
    let (y, h) = fit_axis(ideal_y, expanded, image.height);

    let square = if w == h {
        Rect::new(x, y, w, h)
    } else {
        let s = w.min(h);
        Rect::new(x + round_half_of(w - s), y + round_half_of(h - s), s, s)
    };
    let truncated = !square.contains_rect(&bb);
    (square, truncated)
}

/// Place a span of length `len` near `pos` within `[0, limit]`.
///
/// Translation preserves containment whenever the span fits; otherwise the
/// axis is truncated to the full image extent.
fn fit_axis(pos: i64, len: i64, limit: i64) -> (i64, i64) {
    if len <= limit {
        (pos.clamp(0, limit - len), len)
    } else {
        (0, limit)
    }
}

//! Instance-annotation ingest.
//!
//! The reader makes one streaming pass over the annotations JSON, keeping
//! only compact per-record structs; polygons and other bulk fields are
//! parsed and discarded, so memory stays bounded by the annotation count
//! rather than the file size. Normalization rounds boxes half-up to integer
//! pixels, clamps them to the image, and drops crowd regions and empty
//! boxes. Dropped records land in a rejects report instead of failing the
//! load.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use scop_core::dataset::{DatasetIndex, ImageRecord, ObjectInstance};
use scop_core::geometry::{round_half_up, Rect};

#[derive(Debug, Error)]
pub enum CocoError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed JSON near byte {offset} (line {line}, column {column}): {source}")]
    Json {
        offset: u64,
        line: usize,
        column: usize,
        source: serde_json::Error,
    },
    #[error("image {0} has dimensions outside 1..=100000 px")]
    InvalidImage(i64),
    #[error("duplicate image id {0}")]
    DuplicateImage(i64),
}

/// Upper bound on image sides; keeps every downstream product in range.
const MAX_IMAGE_SIDE: i64 = 100_000;

/// Why an annotation was excluded from the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub instance_id: i64,
    pub reason: String,
}

pub const REASON_IS_CROWD: &str = "is_crowd";
pub const REASON_UNKNOWN_CATEGORY: &str = "unknown_category";
pub const REASON_UNKNOWN_IMAGE: &str = "unknown_image";
pub const REASON_EMPTY_AFTER_CLAMP: &str = "empty_after_clamp";

#[derive(Debug, Deserialize)]
struct RawImage {
    id: i64,
    width: i64,
    height: i64,
    file_name: String,
}

#[derive(Debug, Deserialize)]
struct RawCategory {
    id: i64,
    name: String,
}

#[derive(Debug, Deserialize)]
struct RawAnnotation {
    id: i64,
    image_id: i64,
    category_id: i64,
    bbox: [f64; 4],
    #[serde(default)]
    iscrowd: u8,
}

#[derive(Debug, Deserialize)]
struct RawFile {
    #[serde(default)]
    images: Vec<RawImage>,
    #[serde(default)]
    annotations: Vec<RawAnnotation>,
    #[serde(default)]
    categories: Vec<RawCategory>,
}

/// Loaded dataset plus the records that did not make it in.
#[derive(Debug)]
pub struct LoadedDataset {
    pub index: DatasetIndex,
    pub rejects: Vec<Reject>,
}

struct CountingReader<R> {
    inner: R,
    count: Arc<AtomicU64>,
}

impl<R: Read> Read for CountingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.count.fetch_add(n as u64, Ordering::Relaxed);
        Ok(n)
    }
}

/// Parse and normalize a COCO-format instances file.
pub fn load_dataset(path: &Path) -> Result<LoadedDataset, CocoError> {
    let file = File::open(path).map_err(|source| CocoError::Open {
        path: path.display().to_string(),
        source,
    })?;
    let count = Arc::new(AtomicU64::new(0));
    let reader = CountingReader {
        inner: BufReader::with_capacity(1 << 20, file),
        count: Arc::clone(&count),
    };
    let raw: RawFile = serde_json::from_reader(reader).map_err(|source| CocoError::Json {
        offset: count.load(Ordering::Relaxed),
        line: source.line(),
        column: source.column(),
        source,
    })?;
    normalize(raw)
}

/// Same as [`load_dataset`] but from an in-memory string (tests, fixtures).
pub fn load_dataset_str(json: &str) -> Result<LoadedDataset, CocoError> {
    let raw: RawFile = serde_json::from_str(json).map_err(|source| CocoError::Json {
        offset: 0,
        line: source.line(),
        column: source.column(),
        source,
    })?;
    normalize(raw)
}

fn normalize(raw: RawFile) -> Result<LoadedDataset, CocoError> {
    let mut images = Vec::with_capacity(raw.images.len());
    let mut seen = std::collections::HashSet::with_capacity(raw.images.len());
    for img in raw.images {
        if !(1..=MAX_IMAGE_SIDE).contains(&img.width) || !(1..=MAX_IMAGE_SIDE).contains(&img.height)
        {
            return Err(CocoError::InvalidImage(img.id));
        }
        if !seen.insert(img.id) {
            return Err(CocoError::DuplicateImage(img.id));
        }
        images.push(ImageRecord {
            image_id: img.id,
            width: img.width,
            height: img.height,
            file_name: img.file_name,
        });
    }
    let dims: std::collections::HashMap<i64, (i64, i64)> = images
        .iter()
        .map(|i| (i.image_id, (i.width, i.height)))
        .collect();
    let categories: std::collections::BTreeMap<i64, String> = {
        let mut m = std::collections::BTreeMap::new();
        for c in raw.categories {
            m.entry(c.id).or_insert(c.name);
        }
        m
    };

    let mut instances = Vec::new();
    let mut rejects = Vec::new();
    for ann in raw.annotations {
        let Some((width, height)) = dims.get(&ann.image_id).copied() else {
            rejects.push(Reject {
                instance_id: ann.id,
                reason: REASON_UNKNOWN_IMAGE.to_string(),
            });
            continue;
        };
        let Some(category_name) = categories.get(&ann.category_id) else {
            rejects.push(Reject {
                instance_id: ann.id,
                reason: REASON_UNKNOWN_CATEGORY.to_string(),
            });
            continue;
        };
        if ann.iscrowd != 0 {
            rejects.push(Reject {
                instance_id: ann.id,
                reason: REASON_IS_CROWD.to_string(),
            });
            continue;
        }
        let Some(bbox) = clamp_bbox(ann.bbox, width, height) else {
            rejects.push(Reject {
                instance_id: ann.id,
                reason: REASON_EMPTY_AFTER_CLAMP.to_string(),
            });
            continue;
        };
        instances.push(ObjectInstance {
            instance_id: ann.id,
            image_id: ann.image_id,
            category_id: ann.category_id,
            category_name: category_name.clone(),
            bbox,
            is_crowd: false,
        });
    }

    let index = DatasetIndex::from_parts(images, categories, instances);
    Ok(LoadedDataset { index, rejects })
}

/// Round a float xywh box half-up and clamp it into `[0,w] x [0,h]`.
/// Returns `None` when nothing is left.
fn clamp_bbox(bbox: [f64; 4], width: i64, height: i64) -> Option<Rect> {
    let x = round_half_up(bbox[0]);
    let y = round_half_up(bbox[1]);
    let w = round_half_up(bbox[2]);
    let h = round_half_up(bbox[3]);
    let x0 = x.clamp(0, width);
    let y0 = y.clamp(0, height);
    let x1 = (x + w).clamp(0, width);
    let y1 = (y + h).clamp(0, height);
    if x1 <= x0 || y1 <= y0 {
        return None;
    }
    Some(Rect::new(x0, y0, x1 - x0, y1 - y0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(annotations: &str) -> String {
        format!(
            r#"{{
              "images": [{{"id": 1, "width": 100, "height": 80, "file_name": "1.jpg"}}],
              "annotations": [{annotations}],
              "categories": [{{"id": 1, "name": "dog"}}, {{"id": 2, "name": "cat"}}]
            }}"#
        )
    }

    #[test]
    fn parses_and_clamps() {
        let loaded = load_dataset_str(&minimal(
            r#"{"id": 10, "image_id": 1, "category_id": 1, "bbox": [12.3, 4.6, 10.2, 8.9], "iscrowd": 0}"#,
        ))
        .unwrap();
        assert_eq!(loaded.index.instance_count(), 1);
        let inst = &loaded.index.entries().next().unwrap().instances[0];
        assert_eq!(inst.bbox, Rect::new(12, 5, 10, 9));
        assert_eq!(inst.category_name, "dog");
    }

    #[test]
    fn crowd_and_empty_boxes_are_rejected() {
        let loaded = load_dataset_str(&minimal(
            r#"{"id": 10, "image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10], "iscrowd": 1},
               {"id": 11, "image_id": 1, "category_id": 1, "bbox": [0, 0, 0.2, 10]},
               {"id": 12, "image_id": 1, "category_id": 9, "bbox": [0, 0, 10, 10]},
               {"id": 13, "image_id": 7, "category_id": 1, "bbox": [0, 0, 10, 10]}"#,
        ))
        .unwrap();
        assert_eq!(loaded.index.instance_count(), 0);
        let reasons: Vec<&str> = loaded.rejects.iter().map(|r| r.reason.as_str()).collect();
        assert_eq!(
            reasons,
            vec![
                REASON_IS_CROWD,
                REASON_EMPTY_AFTER_CLAMP,
                REASON_UNKNOWN_CATEGORY,
                REASON_UNKNOWN_IMAGE
            ]
        );
    }

    #[test]
    fn boxes_overhanging_the_image_are_clamped() {
        let loaded = load_dataset_str(&minimal(
            r#"{"id": 10, "image_id": 1, "category_id": 1, "bbox": [-5.0, 70.0, 20.0, 30.0]}"#,
        ))
        .unwrap();
        let inst = &loaded.index.entries().next().unwrap().instances[0];
        assert_eq!(inst.bbox, Rect::new(0, 70, 15, 10));
    }

    #[test]
    fn empty_annotations_is_a_valid_dataset() {
        let loaded = load_dataset_str(&minimal("")).unwrap();
        assert_eq!(loaded.index.image_count(), 1);
        assert_eq!(loaded.index.instance_count(), 0);
        assert!(loaded.rejects.is_empty());
    }

    #[test]
    fn annotation_order_does_not_matter() {
        let a = load_dataset_str(&minimal(
            r#"{"id": 11, "image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10]},
               {"id": 10, "image_id": 1, "category_id": 2, "bbox": [20, 0, 10, 10]}"#,
        ))
        .unwrap();
        let b = load_dataset_str(&minimal(
            r#"{"id": 10, "image_id": 1, "category_id": 2, "bbox": [20, 0, 10, 10]},
               {"id": 11, "image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10]}"#,
        ))
        .unwrap();
        assert_eq!(a.index, b.index);
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = load_dataset_str("{\"images\": [,]}").unwrap_err();
        match err {
            CocoError::Json { line, column, .. } => {
                assert_eq!(line, 1);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nonpositive_image_dims_are_fatal() {
        let json = r#"{"images": [{"id": 1, "width": 0, "height": 80, "file_name": "x"}],
                       "annotations": [], "categories": []}"#;
        assert!(matches!(
            load_dataset_str(json).unwrap_err(),
            CocoError::InvalidImage(1)
        ));
    }

    #[test]
    fn duplicate_categories_keep_first_name() {
        let json = r#"{"images": [], "annotations": [],
                       "categories": [{"id": 1, "name": "dog"}, {"id": 1, "name": "hound"}]}"#;
        let loaded = load_dataset_str(json).unwrap();
        assert_eq!(
            loaded.index.category_table(),
            vec![(1, "dog".to_string())]
        );
    }

    #[test]
    fn segmentation_fields_are_ignored() {
        let loaded = load_dataset_str(&minimal(
            r#"{"id": 10, "image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10],
                "segmentation": [[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]], "area": 100.0}"#,
        ))
        .unwrap();
        assert_eq!(loaded.index.instance_count(), 1);
    }

    #[test]
    fn wrong_bbox_arity_is_a_parse_error() {
        let err = load_dataset_str(&minimal(
            r#"{"id": 10, "image_id": 1, "category_id": 1, "bbox": [0, 0, 10]}"#,
        ))
        .unwrap_err();
        assert!(matches!(err, CocoError::Json { .. }));
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let err = load_dataset_str(r#"{"images": [{"id": 1, "wid"#).unwrap_err();
        assert!(matches!(err, CocoError::Json { .. }));
    }

    #[test]
    fn oversized_image_dims_are_fatal() {
        let json = r#"{"images": [{"id": 1, "width": 100001, "height": 80, "file_name": "x"}],
                       "annotations": [], "categories": []}"#;
        assert!(matches!(
            load_dataset_str(json).unwrap_err(),
            CocoError::InvalidImage(1)
        ));
    }
}

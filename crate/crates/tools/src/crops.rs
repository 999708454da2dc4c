//! Optional pixel pass-through: cut each record's crop rectangle out of the
//! source image. Metadata-only pipelines never touch this module.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use scop_core::dataset::DatasetIndex;
use scop_core::decode::ManifestRecord;

#[derive(Debug, Serialize)]
struct SidecarEntry<'a> {
    image_id: i64,
    pair_index: u64,
    file: String,
    flags: &'a [String],
}

#[derive(Debug, Default)]
pub struct CropSummary {
    pub written: usize,
    pub missing_sources: usize,
}

/// Crop every record from its source image under `images_dir`, writing PNGs
/// and a sidecar JSONL into `out_dir`. Missing source files produce warnings
/// on stderr, not failures.
pub fn crop_records(
    records: &[ManifestRecord],
    dataset: &DatasetIndex,
    images_dir: &Path,
    out_dir: &Path,
) -> Result<CropSummary> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let file_names: BTreeMap<i64, &str> = dataset
        .entries()
        .map(|e| (e.image.image_id, e.image.file_name.as_str()))
        .collect();

    let mut summary = CropSummary::default();
    let mut sidecar = Vec::new();
    let mut by_image: BTreeMap<i64, Vec<&ManifestRecord>> = BTreeMap::new();
    for r in records {
        by_image.entry(r.image_id).or_default().push(r);
    }

    for (image_id, image_records) in by_image {
        let Some(file_name) = file_names.get(&image_id) else {
            eprintln!("warning: image {image_id} not in dataset; skipping its crops");
            summary.missing_sources += image_records.len();
            continue;
        };
        let src = images_dir.join(file_name);
        let image = match image::open(&src) {
            Ok(img) => img,
            Err(err) => {
                eprintln!("warning: cannot read {}: {err}", src.display());
                summary.missing_sources += image_records.len();
                continue;
            }
        };
        for record in image_records {
            // Crop rects are in-bounds for the annotated dimensions; clamp
            // against the actual file in case they disagree.
            let x = record.crop.x.clamp(0, image.width() as i64) as u32;
            let y = record.crop.y.clamp(0, image.height() as i64) as u32;
            let w = (record.crop.w as u32).min(image.width().saturating_sub(x));
            let h = (record.crop.h as u32).min(image.height().saturating_sub(y));
            let out_name = format!("img{:012}_pair{:06}.png", record.image_id, record.pair_index);
            let out_path = out_dir.join(&out_name);
            image
                .crop_imm(x, y, w, h)
                .save(&out_path)
                .with_context(|| format!("writing {}", out_path.display()))?;
            sidecar.push(SidecarEntry {
                image_id: record.image_id,
                pair_index: record.pair_index,
                file: out_name,
                flags: &record.flags,
            });
            summary.written += 1;
        }
    }
    crate::manifest::write_jsonl(&sidecar, &out_dir.join("crops.jsonl"))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coco::load_dataset_str;
    use scop_core::decode::{DescribedObject, SeedMaterial};
    use scop_core::geometry::Rect;
    use scop_core::relation::RelationToken;

    #[test]
    fn crops_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let images_dir = dir.path().join("images");
        let out_dir = dir.path().join("crops");
        std::fs::create_dir_all(&images_dir).unwrap();
        let img = image::RgbImage::from_fn(100, 100, |x, y| {
            image::Rgb([(x % 256) as u8, (y % 256) as u8, 0])
        });
        img.save(images_dir.join("1.jpg")).unwrap();

        let dataset = load_dataset_str(
            r#"{"images": [{"id": 1, "width": 100, "height": 100, "file_name": "1.jpg"}],
                "annotations": [], "categories": []}"#,
        )
        .unwrap()
        .index;
        let record = ManifestRecord {
            image_id: 1,
            pair_index: 0,
            crop: Rect::new(10, 10, 30, 30),
            prompt: String::new(),
            relation: RelationToken::And,
            subject: DescribedObject { category: "a".into(), bbox: Rect::new(10, 10, 5, 5) },
            object: DescribedObject { category: "b".into(), bbox: Rect::new(20, 20, 5, 5) },
            seed_material: SeedMaterial { global_seed: 0, image_id: 1, pair_index: 0 },
            flags: vec!["crop_truncated".to_string()],
        };
        let summary = crop_records(&[record], &dataset, &images_dir, &out_dir).unwrap();
        assert_eq!(summary.written, 1);
        let crop = image::open(out_dir.join("img000000000001_pair000000.png")).unwrap();
        assert_eq!((crop.width(), crop.height()), (30, 30));
        let sidecar = std::fs::read_to_string(out_dir.join("crops.jsonl")).unwrap();
        assert!(sidecar.contains("crop_truncated"));
    }

    #[test]
    fn missing_source_is_a_warning_not_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = load_dataset_str(
            r#"{"images": [{"id": 1, "width": 100, "height": 100, "file_name": "absent.jpg"}],
                "annotations": [], "categories": []}"#,
        )
        .unwrap()
        .index;
        let record = ManifestRecord {
            image_id: 1,
            pair_index: 0,
            crop: Rect::new(0, 0, 10, 10),
            prompt: String::new(),
            relation: RelationToken::And,
            subject: DescribedObject { category: "a".into(), bbox: Rect::new(0, 0, 5, 5) },
            object: DescribedObject { category: "b".into(), bbox: Rect::new(5, 5, 5, 5) },
            seed_material: SeedMaterial { global_seed: 0, image_id: 1, pair_index: 0 },
            flags: vec![],
        };
        let summary =
            crop_records(&[record], &dataset, dir.path(), &dir.path().join("out")).unwrap();
        assert_eq!(summary.written, 0);
        assert_eq!(summary.missing_sources, 1);
    }
}

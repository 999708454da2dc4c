//! Normalized dataset model: images, object instances, categories.
//!
//! A [`DatasetIndex`] is the immutable output of annotation ingest. Instances
//! are stored per image in ascending `instance_id` order, so two loads of the
//! same data compare equal regardless of input ordering.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::Rect;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: i64,
    pub width: i64,
    pub height: i64,
    pub file_name: String,
}

impl ImageRecord {
    pub const fn area(&self) -> i64 {
        self.width * self.height
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub instance_id: i64,
    pub image_id: i64,
    pub category_id: i64,
    pub category_name: String,
    pub bbox: Rect,
    pub is_crowd: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image: ImageRecord,
    pub instances: Vec<ObjectInstance>,
}

/// Immutable per-image view of a loaded dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    categories: BTreeMap<i64, String>,
    entries: BTreeMap<i64, ImageEntry>,
}

impl DatasetIndex {
    /// Assemble an index from raw parts. Instances are routed to their image
    /// and sorted by `instance_id`; categories deduplicate on id with the
    /// first definition winning.
    pub fn from_parts(
        images: impl IntoIterator<Item = ImageRecord>,
        categories: impl IntoIterator<Item = (i64, String)>,
        instances: impl IntoIterator<Item = ObjectInstance>,
    ) -> Self {
        let mut entries: BTreeMap<i64, ImageEntry> = images
            .into_iter()
            .map(|image| {
                (
                    image.image_id,
                    ImageEntry {
                        image,
                        instances: Vec::new(),
                    },
                )
            })
            .collect();
        let mut cats = BTreeMap::new();
        for (id, name) in categories {
            cats.entry(id).or_insert(name);
        }
        for inst in instances {
            if let Some(entry) = entries.get_mut(&inst.image_id) {
                entry.instances.push(inst);
            }
        }
        for entry in entries.values_mut() {
            entry.instances.sort_by_key(|i| i.instance_id);
        }
        Self {
            categories: cats,
            entries,
        }
    }

    /// Images in ascending `image_id` order.
    pub fn entries(&self) -> impl Iterator<Item = &ImageEntry> {
        self.entries.values()
    }

    pub fn image_count(&self) -> usize {
        self.entries.len()
    }

    pub fn instance_count(&self) -> usize {
        self.entries.values().map(|e| e.instances.len()).sum()
    }

    pub fn category_name(&self, id: i64) -> Option<&str> {
        self.categories.get(&id).map(String::as_str)
    }

    /// Deduplicated `(category_id, name)` pairs sorted by id.
    pub fn category_table(&self) -> Vec<(i64, String)> {
        self.categories
            .iter()
            .map(|(id, name)| (*id, name.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn inst(id: i64, image_id: i64) -> ObjectInstance {
        ObjectInstance {
            instance_id: id,
            image_id,
            category_id: 1,
            category_name: "cat".to_string(),
            bbox: Rect::new(0, 0, 10, 10),
            is_crowd: false,
        }
    }

    #[test]
    fn instances_sorted_regardless_of_insertion_order() {
        let image = ImageRecord {
            image_id: 7,
            width: 100,
            height: 100,
            file_name: "7.jpg".to_string(),
        };
        let a = DatasetIndex::from_parts(
            [image.clone()],
            [(1, "cat".to_string())],
            vec![inst(3, 7), inst(1, 7), inst(2, 7)],
        );
        let b = DatasetIndex::from_parts(
            [image],
            [(1, "cat".to_string())],
            vec![inst(1, 7), inst(2, 7), inst(3, 7)],
        );
        assert_eq!(a, b);
        let ids: Vec<i64> = a
            .entries()
            .flat_map(|e| e.instances.iter().map(|i| i.instance_id))
            .collect();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    #[test]
    fn category_table_deduplicates() {
        let ds = DatasetIndex::from_parts(
            [],
            [
                (2, "dog".to_string()),
                (1, "cat".to_string()),
                (2, "dog".to_string()),
            ],
            [],
        );
        assert_eq!(
            ds.category_table(),
            vec![(1, "cat".to_string()), (2, "dog".to_string())]
        );
    }
}

//! Core algorithms for spatial-relationship data curation and measurement.
//!
//! Everything in this crate is pure computation over owned values: rectangle
//! arithmetic, relation classification, the five pairing constraints,
//! descriptor decoding, retrieval scoring, and the ordering-injection
//! attention reference. File formats, parallelism, and the CLI live in the
//! companion `scop-tools` crate.
//!
//! The crate is `no_std` (with `alloc`) so the same arithmetic can run in
//! embedded or wasm evaluation harnesses unchanged.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod constraints;
pub mod dataset;
pub mod decode;
pub mod geometry;
pub mod pairing;
pub mod proxy;
pub mod relation;
pub mod rng;
pub mod tenor;
pub mod visor;

pub use dataset::{DatasetIndex, ImageRecord, ObjectInstance};
pub use geometry::Rect;
pub use relation::RelationToken;

//! IO, file formats, configuration, and the parallel pipeline around
//! `scop-core`. The `scop` binary is a thin clap front-end over this crate.

pub mod builtin;
pub mod coco;
pub mod config;
pub mod crops;
pub mod manifest;
pub mod pipeline;
pub mod proxy_io;
pub mod report;
pub mod tenor_check;
pub mod visor_io;

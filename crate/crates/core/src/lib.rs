//! Material maps for albedo-only assets.
//!
//! An asset (OBJ mesh plus albedo PNG) is rendered from a fixed schedule of
//! 41 cameras, each render is labelled with one of 14 material classes by a
//! segmentation backend, the labels are gathered back into UV space, fused by
//! a weighted vote, cleaned up per mesh part, and turned into metallic and
//! roughness textures.
//!
//! ```no_run
//! use matbake::pipeline::{run_bake, BackendSpec, PipelineConfig};
//!
//! let mut cfg = PipelineConfig::default();
//! cfg.asset = "chair.obj".into();
//! cfg.backend = BackendSpec::Oracle { palette: Some("palette.toml".into()) };
//! cfg.out = "out".into();
//! let report = run_bake(&cfg).unwrap();
//! println!("{} texels unassigned", report.manifest.unassigned_texels);
//! ```

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asset_io;
pub mod fixtures;
pub mod fusion;
pub mod material_pbr;
pub mod metrics;
pub mod multiview;
pub mod pipeline;
pub mod raster;
pub mod seg_backend;
pub mod topology;
pub mod uv_bake;

/// Vector types used throughout the public API.
pub use glam;

//! Mapping from error chains to process exit codes.

use matbake::asset_io::AssetError;
use matbake::fusion::FusionError;
use matbake::material_pbr::PbrError;
use matbake::metrics::MetricError;
use matbake::pipeline::{PipelineError, StageError};
use matbake::seg_backend::SegError;
use matbake::uv_bake::BakeError;

pub const OK: u8 = 0;
pub const USAGE: u8 = 2;
pub const NOT_FOUND: u8 = 3;
pub const PARSE: u8 = 4;
pub const BACKEND_UNAVAILABLE: u8 = 5;
pub const PROTOCOL: u8 = 6;
pub const INTERNAL: u8 = 7;

/// Bad flags or config values detected by the CLI itself.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Usage(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Exit code for the first error in the chain that has a known class.
pub fn code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return USAGE;
        }
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            return stage_code(&e.source);
        }
        if let Some(e) = cause.downcast_ref::<StageError>() {
            return stage_code(e);
        }
        if let Some(e) = cause.downcast_ref::<AssetError>() {
            return asset_code(e);
        }
        if let Some(e) = cause.downcast_ref::<PbrError>() {
            return pbr_code(e);
        }
        if let Some(e) = cause.downcast_ref::<SegError>() {
            return seg_code(e);
        }
        if cause.is::<MetricError>() {
            return INTERNAL;
        }
        if cause.is::<std::io::Error>() {
            return NOT_FOUND;
        }
    }
    INTERNAL
}

fn stage_code(e: &StageError) -> u8 {
    match e {
        StageError::Config(_) => USAGE,
        StageError::Asset(e) => asset_code(e),
        StageError::Seg(e) => seg_code(e),
        StageError::Bake(BakeError::InvalidResolution(_)) => USAGE,
        StageError::Bake(_) => INTERNAL,
        StageError::Fusion(FusionError::InvalidConfig(_)) => USAGE,
        StageError::Fusion(_) => INTERNAL,
        StageError::Pbr(e) => pbr_code(e),
    }
}

fn asset_code(e: &AssetError) -> u8 {
    match e {
        AssetError::FileNotFound(_) | AssetError::Io { .. } => NOT_FOUND,
        _ => PARSE,
    }
}

fn pbr_code(e: &PbrError) -> u8 {
    match e {
        PbrError::Asset(e) => asset_code(e),
        PbrError::ShapeMismatch(_) => INTERNAL,
        PbrError::MissingClass(_) | PbrError::RangeError { .. } | PbrError::Parse(_) => PARSE,
    }
}

fn seg_code(e: &SegError) -> u8 {
    match e {
        SegError::BackendUnavailable(_) => BACKEND_UNAVAILABLE,
        SegError::Protocol(_) => PROTOCOL,
        SegError::ShapeMismatch { .. } => PROTOCOL,
    }
}

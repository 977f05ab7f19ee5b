//! Per-view material label maps from interchangeable segmentation backends.
//!
//! Every backend goes through [`segment`], which checks dimensions and label
//! range and forces background (alpha 0) pixels to [`BACKGROUND`], so a
//! misbehaving backend can never label empty space.

mod directory;
#[cfg(feature = "http")]
mod http;
mod oracle;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asset_io::TextureImage;

pub use self::directory::{label_file_name, DirectoryBackend};
#[cfg(feature = "http")]
pub use self::http::{HttpBackend, HttpOutcome, RetryPolicy};
pub use self::oracle::{oracle_segment, OracleBackend, OraclePalette};

/// Label value for background and for "no label".
pub const BACKGROUND: u8 = 255;
pub const NUM_CLASSES: usize = 14;

/// The material label space, in its canonical id order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum MaterialClass {
    Metal = 0,
    Wood,
    Plastic,
    Glass,
    Paint,
    Rubber,
    Leather,
    Fabric,
    FruitLeaf,
    Flower,
    Brick,
    Porcelain,
    ClayTerracotta,
    Concrete,
}

impl MaterialClass {
    pub const ALL: [MaterialClass; NUM_CLASSES] = [
        MaterialClass::Metal,
        MaterialClass::Wood,
        MaterialClass::Plastic,
        MaterialClass::Glass,
        MaterialClass::Paint,
        MaterialClass::Rubber,
        MaterialClass::Leather,
        MaterialClass::Fabric,
        MaterialClass::FruitLeaf,
        MaterialClass::Flower,
        MaterialClass::Brick,
        MaterialClass::Porcelain,
        MaterialClass::ClayTerracotta,
        MaterialClass::Concrete,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MaterialClass::Metal => "metal",
            MaterialClass::Wood => "wood",
            MaterialClass::Plastic => "plastic",
            MaterialClass::Glass => "glass",
            MaterialClass::Paint => "paint",
            MaterialClass::Rubber => "rubber",
            MaterialClass::Leather => "leather",
            MaterialClass::Fabric => "fabric",
            MaterialClass::FruitLeaf => "fruit&leaf",
            MaterialClass::Flower => "flower",
            MaterialClass::Brick => "brick",
            MaterialClass::Porcelain => "porcelain",
            MaterialClass::ClayTerracotta => "clay_terracotta",
            MaterialClass::Concrete => "concrete",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name() == name)
    }
}

impl fmt::Display for MaterialClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn is_valid_label(v: u8) -> bool {
    (v as usize) < NUM_CLASSES || v == BACKGROUND
}

#[derive(Debug, Error)]
pub enum SegError {
    #[error("segmentation backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("segmentation protocol error: {0}")]
    Protocol(String),
    #[error("label map is {actual:?}, expected {expected:?}")]
    ShapeMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
}

/// Screen-space class ids, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u8>,
}

impl LabelMap {
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        LabelMap {
            width,
            height,
            labels: vec![value; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn to_png(&self) -> Vec<u8> {
        crate::asset_io::encode_gray_png(self.width, self.height, &self.labels)
    }
}

/// Anything that turns a rendered view into a label map.
pub trait SegmentationBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Produce labels for `image`, the `view`-th rendering of the schedule.
    /// Callers should use [`segment`], which validates the result.
    fn segment_raw(&self, view: usize, image: &TextureImage) -> Result<LabelMap, SegError>;

    /// Transient failures retried so far.
    fn retry_count(&self) -> usize {
        0
    }
}

pub(crate) fn validate_labels(
    labels: &[u8],
    width: u32,
    height: u32,
    expected: (u32, u32),
) -> Result<(), SegError> {
    if (width, height) != expected || labels.len() != width as usize * height as usize {
        return Err(SegError::ShapeMismatch {
            expected,
            actual: (width, height),
        });
    }
    if let Some(bad) = labels.iter().find(|&&v| !is_valid_label(v)) {
        return Err(SegError::Protocol(format!("label out of range: {bad}")));
    }
    Ok(())
}

/// Segment one view through `backend`, validating shape and values and
/// masking transparent pixels to [`BACKGROUND`].
pub fn segment(
    backend: &dyn SegmentationBackend,
    view: usize,
    image: &TextureImage,
) -> Result<LabelMap, SegError> {
    let mut map = backend.segment_raw(view, image)?;
    validate_labels(
        &map.labels,
        map.width,
        map.height,
        (image.width(), image.height()),
    )?;
    for (label, px) in map.labels.iter_mut().zip(image.pixels().chunks_exact(4)) {
        if px[3] == 0 {
            *label = BACKGROUND;
        }
    }
    Ok(map)
}

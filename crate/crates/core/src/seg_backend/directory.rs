use std::path::PathBuf;

use crate::asset_io::{decode_label_png, TextureImage};

use super::{LabelMap, SegError, SegmentationBackend};

pub fn label_file_name(view: usize) -> String {
    format!("view_{view:03}.png")
}

/// Reads precomputed label maps `view_{i:03}.png` from a directory.
#[derive(Clone, Debug)]
pub struct DirectoryBackend {
    dir: PathBuf,
}

impl DirectoryBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DirectoryBackend { dir: dir.into() }
    }
}

impl SegmentationBackend for DirectoryBackend {
    fn name(&self) -> &str {
        "dir"
    }

    fn segment_raw(&self, view: usize, _image: &TextureImage) -> Result<LabelMap, SegError> {
        let path = self.dir.join(label_file_name(view));
        let bytes = std::fs::read(&path).map_err(|e| {
            SegError::BackendUnavailable(format!(
                "no label map for view {view} ({}): {e}",
                path.display()
            ))
        })?;
        let (width, height, labels) = decode_label_png(&bytes)
            .map_err(|e| SegError::Protocol(format!("{}: {e}", path.display())))?;
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }
}

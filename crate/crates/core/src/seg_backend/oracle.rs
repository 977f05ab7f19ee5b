use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::asset_io::TextureImage;

use super::{LabelMap, MaterialClass, SegError, SegmentationBackend, BACKGROUND, NUM_CLASSES};

/// Color → class table for the nearest-color oracle backend.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OraclePalette {
    entries: Vec<([u8; 3], u8)>,
}

impl OraclePalette {
    pub fn new(entries: Vec<([u8; 3], u8)>) -> Result<Self, String> {
        if entries.is_empty() {
            return Err("palette is empty".into());
        }
        let mut seen = HashSet::new();
        for (color, class) in &entries {
            if *class as usize >= NUM_CLASSES {
                return Err(format!("palette class id {class} out of range"));
            }
            if !seen.insert(*color) {
                return Err(format!("palette color {color:?} listed twice"));
            }
        }
        Ok(OraclePalette { entries })
    }

    pub fn entries(&self) -> &[([u8; 3], u8)] {
        &self.entries
    }

    /// Parse `class_name = [r, g, b]` lines (TOML).
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let table: BTreeMap<String, [u8; 3]> =
            toml::from_str(text).map_err(|e| format!("invalid palette: {e}"))?;
        let mut entries = Vec::new();
        for (name, color) in table {
            let class = MaterialClass::from_name(&name)
                .ok_or_else(|| format!("unknown material class `{name}`"))?;
            entries.push((color, class.id()));
        }
        entries.sort_by_key(|e| e.1);
        OraclePalette::new(entries)
    }

    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        for (color, class) in &self.entries {
            let name = MaterialClass::from_id(*class)
                .map(|c| c.name())
                .unwrap_or("?");
            out.push_str(&format!(
                "\"{name}\" = [{}, {}, {}]\n",
                color[0], color[1], color[2]
            ));
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text)
    }

    /// Class of the nearest palette color (squared RGB distance); ties go to
    /// the lowest class id.
    pub fn classify(&self, rgb: [u8; 3]) -> u8 {
        let dist = |c: [u8; 3]| -> u32 {
            (0..3)
                .map(|i| {
                    let d = c[i] as i32 - rgb[i] as i32;
                    (d * d) as u32
                })
                .sum()
        };
        self.entries
            .iter()
            .map(|(c, class)| (dist(*c), *class))
            .min()
            .map(|(_, class)| class)
            .expect("palette is non-empty")
    }
}

pub fn oracle_segment(palette: &OraclePalette, image: &TextureImage) -> LabelMap {
    let labels = image
        .pixels()
        .chunks_exact(4)
        .map(|px| {
            if px[3] == 0 {
                BACKGROUND
            } else {
                palette.classify([px[0], px[1], px[2]])
            }
        })
        .collect();
    LabelMap {
        width: image.width(),
        height: image.height(),
        labels,
    }
}

/// Labels each rendered pixel by the class whose palette color is nearest.
#[derive(Clone, Debug)]
pub struct OracleBackend {
    palette: OraclePalette,
}

impl OracleBackend {
    pub fn new(palette: OraclePalette) -> Self {
        OracleBackend { palette }
    }
}

impl SegmentationBackend for OracleBackend {
    fn name(&self) -> &str {
        "oracle"
    }

    fn segment_raw(&self, _view: usize, image: &TextureImage) -> Result<LabelMap, SegError> {
        Ok(oracle_segment(&self.palette, image))
    }
}

//! Class → PBR value mapping, metallic/roughness map export and a GGX preview
//! renderer.
//!
//! Material tables are TOML, one section per class name plus an optional
//! `[unassigned]` section used for texels without a label:
//!
//! ```toml
//! [metal]
//! metallic = 1.0
//! roughness = 0.3
//! display_color = [150, 150, 160]
//!
//! ["fruit&leaf"]
//! metallic = 0.0
//! roughness = 0.6
//! display_color = [60, 160, 40]
//! ```
//!
//! The shipped defaults are editorial placeholders chosen by eye, not
//! measured values.

use std::f64::consts::PI;
use std::path::Path;

use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asset_io::{encode_indexed_png, Asset, AssetError, GrayImage, TextureImage};
use crate::multiview::{gbuffer_uv, rasterize_gbuffer, Camera, CameraPose, NO_FACE};
use crate::seg_backend::{MaterialClass, BACKGROUND, NUM_CLASSES};
use crate::uv_bake::LabelUV;

/// Texel rings added around labelled charts at export.
pub const DILATION_PASSES: usize = 2;

#[derive(Debug, Error)]
pub enum PbrError {
    #[error("material table is missing class `{0}`")]
    MissingClass(String),
    #[error("material table: {class}.{field} = {value} is outside [0, 1]")]
    RangeError {
        class: String,
        field: &'static str,
        value: f64,
    },
    #[error("material table: {0}")]
    Parse(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Asset(#[from] AssetError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialEntry {
    pub metallic: f64,
    pub roughness: f64,
    pub display_color: [u8; 3],
}

impl MaterialEntry {
    const fn new(metallic: f64, roughness: f64, display_color: [u8; 3]) -> Self {
        MaterialEntry {
            metallic,
            roughness,
            display_color,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialTable {
    classes: [MaterialEntry; NUM_CLASSES],
    unassigned: MaterialEntry,
}

const DEFAULT_CLASSES: [MaterialEntry; NUM_CLASSES] = [
    MaterialEntry::new(1.0, 0.3, [150, 150, 160]),
    MaterialEntry::new(0.0, 0.7, [160, 100, 45]),
    MaterialEntry::new(0.0, 0.4, [30, 140, 250]),
    MaterialEntry::new(0.0, 0.1, [170, 220, 235]),
    MaterialEntry::new(0.0, 0.5, [220, 30, 60]),
    MaterialEntry::new(0.0, 0.9, [35, 35, 35]),
    MaterialEntry::new(0.0, 0.6, [95, 55, 25]),
    MaterialEntry::new(0.0, 0.95, [150, 110, 220]),
    MaterialEntry::new(0.0, 0.6, [60, 160, 40]),
    MaterialEntry::new(0.0, 0.6, [250, 110, 180]),
    MaterialEntry::new(0.0, 0.9, [175, 40, 35]),
    MaterialEntry::new(0.0, 0.15, [245, 245, 240]),
    MaterialEntry::new(0.0, 0.85, [215, 120, 60]),
    MaterialEntry::new(0.0, 0.9, [120, 120, 110]),
];

const DEFAULT_UNASSIGNED: MaterialEntry = MaterialEntry::new(0.0, 0.8, [0, 0, 0]);

impl Default for MaterialTable {
    fn default() -> Self {
        MaterialTable {
            classes: DEFAULT_CLASSES,
            unassigned: DEFAULT_UNASSIGNED,
        }
    }
}

impl MaterialTable {
    pub fn new(
        classes: [MaterialEntry; NUM_CLASSES],
        unassigned: MaterialEntry,
    ) -> Result<Self, PbrError> {
        let table = MaterialTable {
            classes,
            unassigned,
        };
        for class in MaterialClass::ALL {
            check_entry(class.name(), table.entry(class.id()))?;
        }
        check_entry("unassigned", &table.unassigned)?;
        Ok(table)
    }

    /// Entry for a class id; `255` (and anything else out of range) gives
    /// the unassigned entry.
    pub fn entry(&self, label: u8) -> &MaterialEntry {
        self.classes.get(label as usize).unwrap_or(&self.unassigned)
    }

    pub fn unassigned(&self) -> &MaterialEntry {
        &self.unassigned
    }

    /// 256-entry palette: class colors at their ids, the unassigned color
    /// everywhere else (including 255).
    pub fn palette(&self) -> Vec<[u8; 3]> {
        (0..=255u8).map(|l| self.entry(l).display_color).collect()
    }

    pub fn from_toml(text: &str) -> Result<Self, PbrError> {
        let doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| PbrError::Parse(e.to_string()))?;
        let section = |name: &str| -> Result<Option<MaterialEntry>, PbrError> {
            doc.get(name)
                .map(|v| {
                    v.clone()
                        .try_into::<MaterialEntry>()
                        .map_err(|e| PbrError::Parse(format!("[{name}]: {e}")))
                })
                .transpose()
        };
        for key in doc.keys() {
            if key != "unassigned" && MaterialClass::from_name(key).is_none() {
                return Err(PbrError::Parse(format!("unknown class `{key}`")));
            }
        }
        let mut classes = DEFAULT_CLASSES;
        for class in MaterialClass::ALL {
            classes[class.id() as usize] = section(class.name())?
                .ok_or_else(|| PbrError::MissingClass(class.name().into()))?;
        }
        let unassigned = section("unassigned")?.unwrap_or(DEFAULT_UNASSIGNED);
        MaterialTable::new(classes, unassigned)
    }

    pub fn to_toml(&self) -> String {
        let mut doc = toml::Table::new();
        let mut put = |name: &str, e: &MaterialEntry| {
            doc.insert(
                name.to_string(),
                toml::Value::try_from(e).expect("entry serializes"),
            );
        };
        for class in MaterialClass::ALL {
            put(class.name(), self.entry(class.id()));
        }
        put("unassigned", &self.unassigned);
        toml::to_string(&doc).expect("table serializes")
    }

    pub fn load(path: &Path) -> Result<Self, PbrError> {
        let text = std::fs::read_to_string(path).map_err(|e| AssetError::io(path, e))?;
        Self::from_toml(&text)
    }
}

fn check_entry(class: &str, e: &MaterialEntry) -> Result<(), PbrError> {
    for (field, value) in [("metallic", e.metallic), ("roughness", e.roughness)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(PbrError::RangeError {
                class: class.to_string(),
                field,
                value,
            });
        }
    }
    Ok(())
}

/// `round(value × 255)`, halves away from zero.
pub fn unit_to_byte(value: f64) -> u8 {
    (value.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Exported material maps, all at the fused label resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct PbrMaps {
    pub resolution: u32,
    /// Labels after padding; drives all three maps.
    pub labels: Vec<u8>,
    pub metallic: GrayImage,
    pub roughness: GrayImage,
    /// Texels that were 255 in the fused input, before padding.
    pub unassigned: usize,
    palette: Vec<[u8; 3]>,
}

impl PbrMaps {
    /// Build from raw grayscale maps, e.g. ones read back from disk.
    pub fn from_maps(metallic: GrayImage, roughness: GrayImage) -> Result<Self, PbrError> {
        if metallic.width != roughness.width || metallic.height != roughness.height {
            return Err(PbrError::ShapeMismatch(format!(
                "metallic {}x{} vs roughness {}x{}",
                metallic.width, metallic.height, roughness.width, roughness.height
            )));
        }
        Ok(PbrMaps {
            resolution: metallic.width,
            labels: vec![BACKGROUND; metallic.data.len()],
            metallic,
            roughness,
            unassigned: 0,
            palette: MaterialTable::default().palette(),
        })
    }

    /// Label visualization as an indexed PNG (value = class id).
    pub fn label_png(&self) -> Vec<u8> {
        encode_indexed_png(
            self.resolution,
            self.resolution,
            &self.labels,
            &self.palette,
        )
    }

    /// Label visualization as an opaque RGBA image.
    pub fn label_vis(&self) -> TextureImage {
        let pixels = self
            .labels
            .iter()
            .flat_map(|&l| {
                let [r, g, b] = self.palette[l as usize];
                [r, g, b, 255]
            })
            .collect();
        TextureImage::new(self.resolution, self.resolution, pixels).expect("sized buffer")
    }
}

/// One padding ring: every 255 texel with labelled 8-neighbours takes their
/// most common label (ties to the lowest id).
fn dilate_once(labels: &[u8], res: usize) -> Vec<u8> {
    let mut out = labels.to_vec();
    for y in 0..res {
        for x in 0..res {
            if labels[y * res + x] != BACKGROUND {
                continue;
            }
            let mut counts = [0u8; NUM_CLASSES];
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if (dx, dy) == (0, 0)
                        || nx < 0
                        || ny < 0
                        || nx >= res as i64
                        || ny >= res as i64
                    {
                        continue;
                    }
                    let l = labels[ny as usize * res + nx as usize];
                    if (l as usize) < NUM_CLASSES {
                        counts[l as usize] += 1;
                    }
                }
            }
            let (best, n) =
                counts
                    .iter()
                    .enumerate()
                    .fold((0, 0), |acc, (c, &n)| if n > acc.1 { (c, n) } else { acc });
            if n > 0 {
                out[y * res + x] = best as u8;
            }
        }
    }
    out
}

/// Map fused labels to metallic/roughness bytes, padding charts by
/// [`DILATION_PASSES`] texels.
pub fn emit_pbr(fused: &LabelUV, table: &MaterialTable) -> PbrMaps {
    let res = fused.resolution as usize;
    let unassigned = fused.labels.iter().filter(|&&l| l == BACKGROUND).count();
    let mut labels = fused.labels.clone();
    for _ in 0..DILATION_PASSES {
        labels = dilate_once(&labels, res);
    }
    let map = |f: fn(&MaterialEntry) -> f64| GrayImage {
        width: fused.resolution,
        height: fused.resolution,
        data: labels
            .iter()
            .map(|&l| unit_to_byte(f(table.entry(l))))
            .collect(),
    };
    PbrMaps {
        resolution: fused.resolution,
        metallic: map(|e| e.metallic),
        roughness: map(|e| e.roughness),
        labels,
        unassigned,
        palette: table.palette(),
    }
}

/// Directional light. `direction` is the direction the light travels, so
/// surfaces facing `-direction` are lit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Light {
    pub direction: DVec3,
    pub intensity: [f64; 3],
    pub ambient: f64,
}

impl Default for Light {
    fn default() -> Self {
        Light {
            direction: DVec3::splat(-1.0).normalize(),
            intensity: [1.0; 3],
            ambient: 0.08,
        }
    }
}

/// Smallest GGX alpha; keeps roughness 0 finite.
const MIN_ALPHA: f64 = 1e-3;
const DIELECTRIC_F0: f64 = 0.04;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrdfTerms {
    pub diffuse: [f64; 3],
    pub specular: [f64; 3],
}

fn ggx_d(n_h: f64, a2: f64) -> f64 {
    let t = n_h * n_h * (a2 - 1.0) + 1.0;
    a2 / (PI * t * t)
}

fn smith_g1(n_x: f64, a2: f64) -> f64 {
    2.0 * n_x / (n_x + (a2 + (1.0 - a2) * n_x * n_x).sqrt())
}

/// Metallic-roughness microfacet BRDF (per steradian, linear albedo).
/// Returns zeros when either direction is below the surface.
pub fn ggx_brdf(
    n: DVec3,
    v: DVec3,
    l: DVec3,
    albedo: [f64; 3],
    metallic: f64,
    roughness: f64,
) -> BrdfTerms {
    let (n_l, n_v) = (n.dot(l), n.dot(v));
    if n_l <= 0.0 || n_v <= 0.0 {
        return BrdfTerms {
            diffuse: [0.0; 3],
            specular: [0.0; 3],
        };
    }
    let h = (v + l).normalize();
    let (n_h, v_h) = (n.dot(h).max(0.0), v.dot(h).max(0.0));
    let alpha = (roughness * roughness).max(MIN_ALPHA);
    let a2 = alpha * alpha;
    let d = ggx_d(n_h, a2);
    let g = smith_g1(n_l, a2) * smith_g1(n_v, a2);
    let schlick = (1.0 - v_h).powi(5);
    let mut diffuse = [0.0; 3];
    let mut specular = [0.0; 3];
    for c in 0..3 {
        let f0 = DIELECTRIC_F0 + (albedo[c] - DIELECTRIC_F0) * metallic;
        let f = f0 + (1.0 - f0) * schlick;
        specular[c] = d * g * f / (4.0 * n_l * n_v);
        diffuse[c] = (1.0 - metallic) * albedo[c] / PI;
    }
    BrdfTerms { diffuse, specular }
}

pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

/// Linear radiance image; `None` marks background.
#[derive(Clone, Debug, PartialEq)]
pub struct HdrImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<Option<[f64; 3]>>,
}

impl HdrImage {
    /// sRGB-encoded, clamped to 8 bits; background is transparent.
    pub fn to_srgb8(&self) -> TextureImage {
        let pixels = self
            .pixels
            .iter()
            .flat_map(|p| match p {
                None => [0, 0, 0, 0],
                Some(c) => {
                    let e = |v: f64| (linear_to_srgb(v.clamp(0.0, 1.0)) * 255.0).round() as u8;
                    [e(c[0]), e(c[1]), e(c[2]), 255]
                }
            })
            .collect();
        TextureImage::new(self.width, self.height, pixels).expect("sized buffer")
    }
}

/// Linear relit render. Outgoing radiance is scaled by π so a white
/// Lambertian surface facing a unit light reads 1.0.
pub fn render_preview_hdr(
    asset: &Asset,
    pbr: &PbrMaps,
    pose: &CameraPose,
    light: &Light,
) -> HdrImage {
    let camera = Camera::new(pose);
    let g = rasterize_gbuffer(&asset.mesh, &camera);
    let l = -light.direction.normalize();
    let mesh = &asset.mesh;
    let pixels = (0..g.face.len())
        .map(|i| {
            let face = g.face[i];
            if face == NO_FACE {
                return None;
            }
            let b = g.bary[i];
            let p = mesh.face_positions(face as usize);
            let pos = p[0] * b[0] + p[1] * b[1] + p[2] * b[2];
            let v = (camera.eye - pos).normalize();
            let mut geometric = mesh.face_normal(face as usize);
            if geometric.dot(v) < 0.0 {
                geometric = -geometric;
            }
            let mut n = match mesh.face_vertex_normals(face as usize) {
                Some(vn) => (vn[0] * b[0] + vn[1] * b[1] + vn[2] * b[2]).normalize_or_zero(),
                None => DVec3::ZERO,
            };
            if n == DVec3::ZERO {
                n = geometric;
            } else if n.dot(geometric) < 0.0 {
                n = -n;
            }
            // Interpolated normals can lean toward a light that the facet
            // itself faces away from; the facet decides.
            let lit = geometric.dot(l) > 0.0;
            let uv = gbuffer_uv(mesh, face, b);
            let texel = asset.albedo.sample_bilinear(uv);
            let albedo = [0, 1, 2].map(|c| srgb_to_linear(texel[c] / 255.0));
            let metallic = pbr.metallic.sample_nearest(uv) as f64 / 255.0;
            let roughness = pbr.roughness.sample_nearest(uv) as f64 / 255.0;
            let f = ggx_brdf(n, v, l, albedo, metallic, roughness);
            let n_l = if lit { n.dot(l).max(0.0) } else { 0.0 };
            Some([0, 1, 2].map(|c| {
                PI * (f.diffuse[c] + f.specular[c]) * light.intensity[c] * n_l
                    + light.ambient * albedo[c]
            }))
        })
        .collect();
    HdrImage {
        width: pose.width,
        height: pose.height,
        pixels,
    }
}

pub fn render_preview(
    asset: &Asset,
    pbr: &PbrMaps,
    pose: &CameraPose,
    light: &Light,
) -> TextureImage {
    render_preview_hdr(asset, pbr, pose, light).to_srgb8()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::multiview::ViewDefaults;
    use crate::uv_bake::ViewTag;

    fn full_table_text() -> String {
        MaterialTable::default().to_toml()
    }

    #[test]
    fn table_round_trips() {
        let t = MaterialTable::from_toml(&full_table_text()).unwrap();
        assert_eq!(t, MaterialTable::default());
        assert_eq!(MaterialTable::from_toml(&t.to_toml()).unwrap(), t);
    }

    #[test]
    fn missing_class_is_named() {
        let mut doc: toml::Table = full_table_text().parse().unwrap();
        doc.remove("concrete");
        match MaterialTable::from_toml(&toml::to_string(&doc).unwrap()) {
            Err(PbrError::MissingClass(c)) => assert_eq!(c, "concrete"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_range_value_is_rejected() {
        let text = full_table_text().replace("metallic = 1.0", "metallic = 1.2");
        assert!(matches!(
            MaterialTable::from_toml(&text),
            Err(PbrError::RangeError {
                field: "metallic",
                ..
            })
        ));
    }

    #[test]
    fn byte_rounding() {
        assert_eq!(unit_to_byte(1.0), 255);
        assert_eq!(unit_to_byte(0.5), 128);
        assert_eq!(unit_to_byte(0.0), 0);
    }

    #[test]
    fn all_unassigned_input_gets_defaults() {
        let fused = LabelUV::filled(64, BACKGROUND, ViewTag::Fused);
        let maps = emit_pbr(&fused, &MaterialTable::default());
        assert_eq!(maps.unassigned, 64 * 64);
        assert!(maps.metallic.data.iter().all(|&b| b == 0));
        assert!(maps.roughness.data.iter().all(|&b| b == unit_to_byte(0.8)));
    }

    #[test]
    fn dilation_pads_two_rings_without_overwriting() {
        let mut fused = LabelUV::filled(64, BACKGROUND, ViewTag::Fused);
        for y in 20..30 {
            for x in 20..30 {
                fused.labels[y * 64 + x] = MaterialClass::Metal.id();
            }
        }
        fused.labels[10 * 64 + 10] = MaterialClass::Wood.id();
        let maps = emit_pbr(&fused, &MaterialTable::default());
        for (i, (&before, &after)) in fused.labels.iter().zip(&maps.labels).enumerate() {
            if before != BACKGROUND {
                assert_eq!(before, after, "texel {i}");
            }
        }
        assert_eq!(maps.labels[18 * 64 + 18], MaterialClass::Metal.id());
        assert_eq!(maps.labels[17 * 64 + 20], BACKGROUND);
        assert_eq!(maps.labels[12 * 64 + 12], MaterialClass::Wood.id());
        assert_eq!(maps.metallic.data[18 * 64 + 18], 255);
    }

    #[test]
    fn brdf_is_reciprocal() {
        let n = DVec3::Z;
        let dirs = [
            DVec3::new(0.3, 0.1, 0.9),
            DVec3::new(-0.5, 0.4, 0.6),
            DVec3::new(0.1, -0.8, 0.3),
            DVec3::new(0.7, 0.7, 0.05),
        ];
        for &a in &dirs {
            for &b in &dirs {
                for r in [0.05, 0.3, 0.8] {
                    let (a, b) = (a.normalize(), b.normalize());
                    let x = ggx_brdf(n, a, b, [0.8, 0.5, 0.2], 0.5, r).specular;
                    let y = ggx_brdf(n, b, a, [0.8, 0.5, 0.2], 0.5, r).specular;
                    for c in 0..3 {
                        assert!((x[c] - y[c]).abs() <= 1e-6 * x[c].abs().max(1e-300));
                    }
                }
            }
        }
    }

    #[test]
    fn metal_has_no_diffuse() {
        let t = ggx_brdf(
            DVec3::Z,
            DVec3::Z,
            DVec3::new(0.2, 0.0, 1.0).normalize(),
            [0.9, 0.6, 0.3],
            1.0,
            0.4,
        );
        assert_eq!(t.diffuse, [0.0; 3]);
        assert!(t.specular[0] > 0.0);
    }

    fn sphere_scene(metallic: f64, roughness: f64) -> (Asset, PbrMaps) {
        let mesh = fixtures::octasphere(5);
        let albedo = TextureImage::filled(64, 64, [255, 255, 255, 255]);
        let asset = Asset::new("sphere", mesh, albedo);
        let maps = PbrMaps::from_maps(
            GrayImage::filled(64, 64, unit_to_byte(metallic)),
            GrayImage::filled(64, 64, unit_to_byte(roughness)),
        )
        .unwrap();
        (asset, maps)
    }

    fn head_on(res: u32) -> CameraPose {
        ViewDefaults::with_resolution(res).pose(0.0, 0.0, false)
    }

    #[test]
    fn unlit_side_is_black_without_ambient() {
        let (asset, maps) = sphere_scene(0.0, 0.5);
        // Light travels toward the camera, so every visible point is unlit.
        let light = Light {
            direction: DVec3::new(1.0, 0.0, 0.0),
            intensity: [1.0; 3],
            ambient: 0.0,
        };
        let img = render_preview(&asset, &maps, &head_on(64), &light);
        let mut covered = 0;
        for px in img.pixels().chunks(4) {
            if px[3] == 255 {
                covered += 1;
                assert_eq!(&px[..3], &[0, 0, 0]);
            }
        }
        assert!(covered > 100);
    }

    fn lobe(roughness: f64) -> (f64, usize) {
        let (asset, maps) = sphere_scene(1.0, roughness);
        let light = Light {
            direction: DVec3::new(-1.0, 0.3, -0.2).normalize(),
            intensity: [1.0; 3],
            ambient: 0.0,
        };
        let img = render_preview_hdr(&asset, &maps, &head_on(128), &light);
        let lum: Vec<f64> = img.pixels.iter().flatten().map(|c| c[1]).collect();
        let peak = lum.iter().cloned().fold(0.0, f64::max);
        (peak, lum.iter().filter(|&&v| v > peak / 2.0).count())
    }

    #[test]
    fn rougher_highlights_are_dimmer_and_wider() {
        let (p_smooth, w_smooth) = lobe(0.2);
        let (p_rough, w_rough) = lobe(0.8);
        assert!(p_rough < p_smooth, "{p_rough} vs {p_smooth}");
        assert!(w_rough > w_smooth, "{w_rough} vs {w_smooth}");
    }
}

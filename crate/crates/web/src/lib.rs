//! Browser demo: the chair fixture rendered from any angle, a full bake of
//! it with a corrupted segmenter, and a relit material sphere.
//!
//! Every export works on plain RGBA byte buffers so the page can hand them
//! straight to `ImageData`.

use std::sync::OnceLock;

use matbake::asset_io::{Asset, GrayImage, TextureImage};
use matbake::fixtures::{self, default_palette, Fixture};
use matbake::fusion::{accumulate, region_unify, vote, FusionConfig};
use matbake::glam::DVec3;
use matbake::material_pbr::{render_preview, unit_to_byte, Light, MaterialTable, PbrMaps};
use matbake::metrics::miou;
use matbake::multiview::{build_schedule_with, render_view, ViewDefaults};
use matbake::seg_backend::{
    segment, LabelMap, OracleBackend, SegError, SegmentationBackend, BACKGROUND, NUM_CLASSES,
};
use matbake::uv_bake::{bake_view, rasterize_uv, LabelUV, TexelSampleTable};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use wasm_bindgen::prelude::*;

const FUSE_RENDER_RES: u32 = 128;
const FUSE_UV_RES: u32 = 256;

struct Chair {
    fixture: Fixture,
    asset: Asset,
    texels: TexelSampleTable,
    truth: LabelUV,
}

fn chair() -> &'static Chair {
    static CHAIR: OnceLock<Chair> = OnceLock::new();
    CHAIR.get_or_init(|| {
        let fixture = fixtures::chair();
        let asset = fixture.asset(512).normalized().expect("fixture normalizes");
        let texels = rasterize_uv(&asset.mesh, FUSE_UV_RES).expect("valid resolution");
        let truth = fixture.ground_truth(&texels);
        Chair {
            fixture,
            asset,
            texels,
            truth,
        }
    })
}

fn sphere() -> &'static Asset {
    static SPHERE: OnceLock<Asset> = OnceLock::new();
    SPHERE.get_or_init(|| {
        let mesh = fixtures::octasphere(16);
        Asset::new(
            "sphere",
            mesh,
            TextureImage::filled(4, 4, [200, 120, 60, 255]),
        )
    })
}

/// Unlit albedo render of the chair; transparent background.
#[wasm_bindgen]
pub fn render_chair(elevation: f64, azimuth: f64, size: u32) -> Vec<u8> {
    let pose = ViewDefaults::with_resolution(size.clamp(16, 1024)).pose(
        elevation.clamp(-90.0, 90.0),
        azimuth,
        false,
    );
    render_view(&chair().asset, &pose).0.into_pixels()
}

/// Oracle segmentation that confuses each class with the next one on a
/// fraction `noise` of the pixels in automatic views. Manual views stay
/// clean, which is what a larger alpha can exploit.
struct ConfusedOracle {
    inner: OracleBackend,
    noise: f64,
    seed: u64,
    manual: Vec<bool>,
}

impl SegmentationBackend for ConfusedOracle {
    fn name(&self) -> &str {
        "confused-oracle"
    }

    fn segment_raw(&self, view: usize, image: &TextureImage) -> Result<LabelMap, SegError> {
        let mut map = self.inner.segment_raw(view, image)?;
        if self.manual[view] {
            return Ok(map);
        }
        let mut rng = SplitMix64::seed_from_u64(
            self.seed ^ (view as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
        );
        let threshold = (self.noise.clamp(0.0, 1.0) * u32::MAX as f64) as u64;
        for label in map.labels.iter_mut() {
            if *label != BACKGROUND && (rng.next_u32() as u64) < threshold {
                *label = (*label + 1) % NUM_CLASSES as u8;
            }
        }
        Ok(map)
    }
}

/// Outcome of [`fuse_chair`].
#[wasm_bindgen]
pub struct FuseOutcome {
    labels_rgba: Vec<u8>,
    size: u32,
    voted_miou: f64,
    fused_miou: f64,
}

#[wasm_bindgen]
impl FuseOutcome {
    /// Fused label UV map colored by class, `size × size` RGBA.
    #[wasm_bindgen(getter)]
    pub fn labels_rgba(&self) -> Vec<u8> {
        self.labels_rgba.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn size(&self) -> u32 {
        self.size
    }

    /// mIoU of the raw vote against the painted ground truth.
    #[wasm_bindgen(getter)]
    pub fn voted_miou(&self) -> f64 {
        self.voted_miou
    }

    /// mIoU after region unification.
    #[wasm_bindgen(getter)]
    pub fn fused_miou(&self) -> f64 {
        self.fused_miou
    }
}

/// Bake the chair through all 41 views with a corrupted segmenter and fuse
/// with vote weight `alpha` on the manual views.
#[wasm_bindgen]
pub fn fuse_chair(alpha: f64, noise: f64, seed: u32) -> Result<FuseOutcome, JsError> {
    fuse(alpha, noise, seed as u64).map_err(|e| JsError::new(&e))
}

/// [`fuse_chair`] without the JavaScript error type.
pub fn fuse(alpha: f64, noise: f64, seed: u64) -> Result<FuseOutcome, String> {
    fuse_inner(alpha, noise, seed).map_err(|e| e.to_string())
}

fn fuse_inner(
    alpha: f64,
    noise: f64,
    seed: u64,
) -> Result<FuseOutcome, Box<dyn std::error::Error>> {
    let c = chair();
    let schedule = build_schedule_with(seed, &ViewDefaults::with_resolution(FUSE_RENDER_RES));
    let backend = ConfusedOracle {
        inner: OracleBackend::new(default_palette()),
        noise,
        seed,
        manual: schedule.poses.iter().map(|p| p.manual).collect(),
    };
    let cfg = FusionConfig {
        alpha,
        ..Default::default()
    };
    let mut stack = Vec::with_capacity(schedule.len());
    for (view, pose) in schedule.poses.iter().enumerate() {
        let (image, gbuffer) = render_view(&c.asset, pose);
        let labels = segment(&backend, view, &image)?;
        stack.push(bake_view(&c.texels, &gbuffer, &labels, pose, view)?);
    }
    let voted = vote(&accumulate(&stack, &schedule, &cfg)?);
    let fused = region_unify(&voted, &c.texels, &c.asset.mesh, &cfg)?;
    let palette = MaterialTable::default().palette();
    let mut labels_rgba = Vec::with_capacity(fused.labels.len() * 4);
    for &l in &fused.labels {
        let [r, g, b] = palette[l as usize];
        labels_rgba.extend_from_slice(&[r, g, b, if l == BACKGROUND { 0 } else { 255 }]);
    }
    Ok(FuseOutcome {
        labels_rgba,
        size: fused.resolution,
        voted_miou: miou(&voted, &c.truth)?.mean_iou,
        fused_miou: miou(&fused, &c.truth)?.mean_iou,
    })
}

/// Number of triangles in the demo chair.
#[wasm_bindgen]
pub fn chair_triangles() -> usize {
    chair().fixture.mesh.face_count()
}

/// Sphere shaded with uniform metallic/roughness under a directional light
/// arriving from the given elevation and azimuth (degrees).
#[wasm_bindgen]
pub fn relit_sphere(
    metallic: f64,
    roughness: f64,
    light_elevation: f64,
    light_azimuth: f64,
    size: u32,
) -> Vec<u8> {
    let size = size.clamp(16, 1024);
    let m = GrayImage::filled(4, 4, unit_to_byte(metallic.clamp(0.0, 1.0)));
    let r = GrayImage::filled(4, 4, unit_to_byte(roughness.clamp(0.0, 1.0)));
    let maps = PbrMaps::from_maps(m, r).expect("equal sizes");
    let (el, az) = (light_elevation.to_radians(), light_azimuth.to_radians());
    let toward_light = DVec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
    let light = Light {
        direction: -toward_light,
        ..Light::default()
    };
    let pose = ViewDefaults::with_resolution(size).pose(15.0, 0.0, false);
    render_preview(sphere(), &maps, &pose, &light).into_pixels()
}

//! Camera schedule and software rendering of the input views.
//!
//! The schedule is five fixed "inspection" poses followed by three poses for
//! each of twelve azimuths 30° apart: one at elevation 0°, one drawn from
//! (0°, 30°) and one from (−30°, 0°). Each view is rendered unlit (albedo
//! only) together with a G-buffer that later drives visibility tests when
//! labels are baked back into UV space.

use glam::{DMat4, DVec2, DVec3, DVec4};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::asset_io::{encode_gray16_png, Asset, TextureImage, TriangleMesh};
use crate::raster::rasterize_triangle;

/// Fixed inspection poses as (elevation, azimuth) in degrees.
pub const MANUAL_POSES: [(f64, f64); 5] = [
    (90.0, 0.0),
    (15.0, 0.0),
    (15.0, 90.0),
    (15.0, 180.0),
    (15.0, 270.0),
];
pub const AZIMUTH_STEPS: usize = 12;
pub const RANDOM_ELEVATION_LIMIT: f64 = 30.0;
pub const VIEW_COUNT: usize = MANUAL_POSES.len() + AZIMUTH_STEPS * 3;

/// Above this |elevation| the camera up vector switches from +Z to −Y.
pub const POLE_ELEVATION: f64 = 89.0;
const NEAR_PLANE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    /// Degrees above the XY plane, in [−90, 90].
    pub elevation: f64,
    /// Degrees counter-clockwise from +X around +Z, in [0, 360).
    pub azimuth: f64,
    /// Distance from the origin; must exceed 1 (the normalized asset radius).
    pub radius: f64,
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
    pub manual: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewDefaults {
    pub radius: f64,
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for ViewDefaults {
    fn default() -> Self {
        ViewDefaults {
            // A unit sphere then fills 70% of the frame height.
            radius: 4.05,
            fov_y: 40.0,
            width: 1024,
            height: 1024,
        }
    }
}

impl ViewDefaults {
    pub fn with_resolution(resolution: u32) -> Self {
        ViewDefaults {
            width: resolution,
            height: resolution,
            ..Default::default()
        }
    }

    pub fn pose(&self, elevation: f64, azimuth: f64, manual: bool) -> CameraPose {
        CameraPose {
            elevation,
            azimuth: azimuth.rem_euclid(360.0),
            radius: self.radius,
            fov_y: self.fov_y,
            width: self.width,
            height: self.height,
            manual,
        }
    }
}

impl CameraPose {
    pub fn validate(&self) -> Result<(), String> {
        if !(-90.0..=90.0).contains(&self.elevation) {
            return Err(format!("elevation {} outside [-90, 90]", self.elevation));
        }
        if !(0.0..360.0).contains(&self.azimuth) {
            return Err(format!("azimuth {} outside [0, 360)", self.azimuth));
        }
        if !(self.radius > 1.0) {
            return Err(format!("radius {} must exceed 1", self.radius));
        }
        if !(self.fov_y > 0.0 && self.fov_y < 180.0) {
            return Err(format!("fov_y {} outside (0, 180)", self.fov_y));
        }
        if self.width == 0 || self.height == 0 {
            return Err("zero image size".into());
        }
        Ok(())
    }

    pub fn eye(&self) -> DVec3 {
        let (el, az) = (self.elevation.to_radians(), self.azimuth.to_radians());
        self.radius * DVec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }

    /// Short stable name, e.g. `e15_a090`.
    pub fn tag(&self) -> String {
        format!(
            "e{}_a{:03}",
            self.elevation.round() as i64,
            self.azimuth.round() as i64
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewSchedule {
    pub seed: u64,
    pub poses: Vec<CameraPose>,
}

impl ViewSchedule {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Voting weight of each view: `alpha` for manual poses, 1 otherwise.
    pub fn weights(&self, alpha: f64) -> Vec<f64> {
        self.poses
            .iter()
            .map(|p| if p.manual { alpha } else { 1.0 })
            .collect()
    }
}

/// Uniform draw from the open interval (0, 1): 53 random bits shifted half a
/// step off zero.
fn open_unit(rng: &mut SplitMix64) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

pub fn build_schedule(seed: u64) -> ViewSchedule {
    build_schedule_with(seed, &ViewDefaults::default())
}

/// The 41-view schedule. Random elevations come from SplitMix64 seeded with
/// `seed`, drawn per azimuth in the order (+, −).
pub fn build_schedule_with(seed: u64, defaults: &ViewDefaults) -> ViewSchedule {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut poses: Vec<CameraPose> = MANUAL_POSES
        .iter()
        .map(|&(el, az)| defaults.pose(el, az, true))
        .collect();
    for k in 0..AZIMUTH_STEPS {
        let azimuth = k as f64 * 360.0 / AZIMUTH_STEPS as f64;
        let up = RANDOM_ELEVATION_LIMIT * open_unit(&mut rng);
        let down = -RANDOM_ELEVATION_LIMIT * open_unit(&mut rng);
        for elevation in [0.0, up, down] {
            poses.push(defaults.pose(elevation, azimuth, false));
        }
    }
    ViewSchedule { seed, poses }
}

/// View (world → camera) and perspective projection for a pose. The camera
/// looks at the origin with +Z up, or −Y up near the poles.
pub fn pose_to_matrices(pose: &CameraPose) -> (DMat4, DMat4) {
    let up = if pose.elevation.abs() > POLE_ELEVATION {
        DVec3::NEG_Y
    } else {
        DVec3::Z
    };
    let view = DMat4::look_at_rh(pose.eye(), DVec3::ZERO, up);
    let aspect = pose.width as f64 / pose.height as f64;
    let far = pose.radius + 10.0;
    let proj = DMat4::perspective_rh_gl(pose.fov_y.to_radians(), aspect, NEAR_PLANE, far);
    (view, proj)
}

/// A point projected into a view: continuous pixel coordinates (pixel
/// centers at half-integers, y down) and camera-space depth along the
/// viewing axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projected {
    pub pixel: DVec2,
    pub depth: f64,
}

#[derive(Clone, Debug)]
pub struct Camera {
    pub pose: CameraPose,
    pub eye: DVec3,
    view_proj: DMat4,
}

impl Camera {
    pub fn new(pose: &CameraPose) -> Self {
        let (view, proj) = pose_to_matrices(pose);
        Camera {
            pose: *pose,
            eye: pose.eye(),
            view_proj: proj * view,
        }
    }

    /// `None` when the point is at or behind the near plane.
    pub fn project(&self, p: DVec3) -> Option<Projected> {
        let clip = self.view_proj * DVec4::new(p.x, p.y, p.z, 1.0);
        if !(clip.w > NEAR_PLANE) {
            return None;
        }
        let nx = clip.x / clip.w;
        let ny = clip.y / clip.w;
        Some(Projected {
            pixel: DVec2::new(
                (nx + 1.0) * 0.5 * self.pose.width as f64,
                (1.0 - ny) * 0.5 * self.pose.height as f64,
            ),
            depth: clip.w,
        })
    }

    /// Focal length in pixels along y.
    pub fn focal_pixels(&self) -> f64 {
        0.5 * self.pose.height as f64 / (0.5 * self.pose.fov_y.to_radians()).tan()
    }
}

pub const NO_FACE: u32 = u32::MAX;

/// Per-pixel face id, perspective-correct barycentrics and depth.
#[derive(Clone, Debug, PartialEq)]
pub struct GBuffer {
    pub width: u32,
    pub height: u32,
    pub face: Vec<u32>,
    pub bary: Vec<[f64; 3]>,
    pub depth: Vec<f64>,
}

impl GBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        GBuffer {
            width,
            height,
            face: vec![NO_FACE; n],
            bary: vec![[0.0; 3]; n],
            depth: vec![f64::INFINITY; n],
        }
    }

    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    /// 16-bit depth image: `depth / max_depth` scaled to 0..65534, background 65535.
    pub fn depth_png16(&self, max_depth: f64) -> Vec<u8> {
        let data: Vec<u16> = self
            .depth
            .iter()
            .map(|&d| {
                if d.is_finite() {
                    ((d / max_depth).clamp(0.0, 1.0) * 65534.0).round() as u16
                } else {
                    u16::MAX
                }
            })
            .collect();
        encode_gray16_png(self.width, self.height, &data)
    }
}

/// Z-buffered rasterization of every face into a G-buffer. Faces with a
/// corner at or behind the near plane are skipped; depth ties keep the
/// lower face id.
pub fn rasterize_gbuffer(mesh: &TriangleMesh, camera: &Camera) -> GBuffer {
    let (w, h) = (camera.pose.width, camera.pose.height);
    let mut g = GBuffer::new(w, h);
    let projected: Vec<Option<Projected>> = mesh
        .positions()
        .iter()
        .map(|&p| camera.project(p))
        .collect();
    for (face_id, face) in mesh.faces().iter().enumerate() {
        let (Some(a), Some(b), Some(c)) = (
            projected[face[0].position as usize],
            projected[face[1].position as usize],
            projected[face[2].position as usize],
        ) else {
            continue;
        };
        let depths = [a.depth, b.depth, c.depth];
        rasterize_triangle([a.pixel, b.pixel, c.pixel], w, h, |x, y, s| {
            let inv_depth = s[0] / depths[0] + s[1] / depths[1] + s[2] / depths[2];
            let depth = 1.0 / inv_depth;
            let i = y as usize * w as usize + x as usize;
            if depth < g.depth[i] {
                g.depth[i] = depth;
                g.face[i] = face_id as u32;
                g.bary[i] = [
                    s[0] / depths[0] * depth,
                    s[1] / depths[1] * depth,
                    s[2] / depths[2] * depth,
                ];
            }
        });
    }
    g
}

/// Interpolated UV at a G-buffer pixel.
pub fn gbuffer_uv(mesh: &TriangleMesh, face: u32, bary: [f64; 3]) -> DVec2 {
    let uv = mesh.face_uvs(face as usize);
    uv[0] * bary[0] + uv[1] * bary[1] + uv[2] * bary[2]
}

/// Render the unlit albedo image of one view plus its G-buffer. Background
/// pixels are fully transparent.
pub fn render_view(asset: &Asset, pose: &CameraPose) -> (TextureImage, GBuffer) {
    let camera = Camera::new(pose);
    let g = rasterize_gbuffer(&asset.mesh, &camera);
    let mut image = TextureImage::filled(pose.width, pose.height, [0, 0, 0, 0]);
    for y in 0..pose.height {
        for x in 0..pose.width {
            let i = g.index(x, y);
            if g.face[i] == NO_FACE {
                continue;
            }
            let uv = gbuffer_uv(&asset.mesh, g.face[i], g.bary[i]);
            let c = asset.albedo.sample_bilinear(uv);
            image.set_pixel(
                x,
                y,
                [
                    c[0].round().clamp(0.0, 255.0) as u8,
                    c[1].round().clamp(0.0, 255.0) as u8,
                    c[2].round().clamp(0.0, 255.0) as u8,
                    255,
                ],
            );
        }
    }
    (image, g)
}

//! Unprojection of screen-space labels into texture space.
//!
//! Baking is a gather: every texel covered by the UV layout knows its 3D
//! position and normal (from [`rasterize_uv`]); for each view the texel is
//! projected into the image and takes the label under it if it is in frame,
//! faces the camera, and is the surface the camera actually saw there.

use glam::{DVec2, DVec3};
use thiserror::Error;

use crate::asset_io::{encode_indexed_png, uv_to_raster, TriangleMesh};
use crate::multiview::{Camera, CameraPose, GBuffer, NO_FACE};
use crate::raster::rasterize_triangle;
use crate::seg_backend::{LabelMap, BACKGROUND};

pub const MIN_UV_RESOLUTION: u32 = 64;
pub const MAX_UV_RESOLUTION: u32 = 8192;
/// Depth tolerance as a fraction of the camera radius.
pub const DEPTH_BIAS: f64 = 1e-3;
/// Texels seen at `normal · view_dir` below this are skipped.
pub const GRAZING_LIMIT: f64 = 0.1;

#[derive(Debug, Error)]
pub enum BakeError {
    #[error("UV resolution {0} outside [{MIN_UV_RESOLUTION}, {MAX_UV_RESOLUTION}]")]
    InvalidResolution(u32),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Which view a [`LabelUV`] came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViewTag {
    View(usize),
    Fused,
}

/// Texture-space label raster (`resolution²`, row-major, v up).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelUV {
    pub resolution: u32,
    pub labels: Vec<u8>,
    pub view: ViewTag,
}

impl LabelUV {
    pub fn filled(resolution: u32, value: u8, view: ViewTag) -> Self {
        LabelUV {
            resolution,
            labels: vec![value; resolution as usize * resolution as usize],
            view,
        }
    }

    pub fn texel_count(&self) -> usize {
        self.labels.len()
    }

    /// Indexed PNG: pixel value = class id, colors from `palette`.
    pub fn to_png(&self, palette: &[[u8; 3]]) -> Vec<u8> {
        encode_indexed_png(self.resolution, self.resolution, &self.labels, palette)
    }
}

/// Per-texel surface samples of a mesh's UV layout.
#[derive(Clone, Debug)]
pub struct TexelSampleTable {
    pub resolution: u32,
    pub face: Vec<u32>,
    pub bary: Vec<[f64; 3]>,
    pub position: Vec<DVec3>,
    pub normal: Vec<DVec3>,
    /// Texels claimed by more than one triangle (kept by the lowest face id).
    pub overlap_texels: usize,
}

impl TexelSampleTable {
    pub fn len(&self) -> usize {
        self.face.len()
    }

    pub fn is_empty(&self) -> bool {
        self.face.is_empty()
    }

    pub fn is_assigned(&self, texel: usize) -> bool {
        self.face[texel] != NO_FACE
    }

    pub fn assigned_count(&self) -> usize {
        self.face.iter().filter(|&&f| f != NO_FACE).count()
    }

    /// Texel center in UV coordinates.
    pub fn texel_uv(&self, texel: usize) -> DVec2 {
        let r = self.resolution as usize;
        let (x, y) = (texel % r, texel / r);
        DVec2::new(
            (x as f64 + 0.5) / r as f64,
            1.0 - (y as f64 + 0.5) / r as f64,
        )
    }
}

/// Rasterize every triangle in UV space at texel centers.
pub fn rasterize_uv(mesh: &TriangleMesh, resolution: u32) -> Result<TexelSampleTable, BakeError> {
    if !(MIN_UV_RESOLUTION..=MAX_UV_RESOLUTION).contains(&resolution) {
        return Err(BakeError::InvalidResolution(resolution));
    }
    let n = resolution as usize * resolution as usize;
    let mut table = TexelSampleTable {
        resolution,
        face: vec![NO_FACE; n],
        bary: vec![[0.0; 3]; n],
        position: vec![DVec3::ZERO; n],
        normal: vec![DVec3::ZERO; n],
        overlap_texels: 0,
    };
    let mut overlapped = vec![false; n];
    for face in 0..mesh.face_count() {
        let uvs = mesh.face_uvs(face);
        let pts = uvs.map(|uv| uv_to_raster(uv, resolution, resolution));
        let p = mesh.face_positions(face);
        let normal = mesh.face_normal(face);
        rasterize_triangle(pts, resolution, resolution, |x, y, b| {
            let i = y as usize * resolution as usize + x as usize;
            if table.face[i] != NO_FACE {
                overlapped[i] = true;
                return;
            }
            table.face[i] = face as u32;
            table.bary[i] = b;
            table.position[i] = p[0] * b[0] + p[1] * b[1] + p[2] * b[2];
            table.normal[i] = normal;
        });
    }
    table.overlap_texels = overlapped.iter().filter(|&&o| o).count();
    if table.overlap_texels > 0 {
        log::warn!(
            "{} texel(s) claimed by overlapping UV triangles; lowest face id kept",
            table.overlap_texels
        );
    }
    Ok(table)
}

/// Outcome of the visibility test for one texel in one view.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TexelVisibility {
    Unassigned,
    OutOfFrame,
    BackFacing,
    Occluded,
    Visible { x: u32, y: u32 },
}

/// Visibility of a texel from `camera`, checked against the view's G-buffer.
/// A texel is visible when its nearest pixel shows the same face, or shows
/// a surface whose depth matches within `DEPTH_BIAS × radius`.
pub fn texel_visibility(
    table: &TexelSampleTable,
    texel: usize,
    camera: &Camera,
    gbuffer: &GBuffer,
) -> TexelVisibility {
    let face = table.face[texel];
    if face == NO_FACE {
        return TexelVisibility::Unassigned;
    }
    let pos = table.position[texel];
    let Some(proj) = camera.project(pos) else {
        return TexelVisibility::OutOfFrame;
    };
    let (fx, fy) = (proj.pixel.x.floor(), proj.pixel.y.floor());
    if fx < 0.0 || fy < 0.0 || fx >= gbuffer.width as f64 || fy >= gbuffer.height as f64 {
        return TexelVisibility::OutOfFrame;
    }
    let to_camera = (camera.eye - pos).normalize_or_zero();
    if table.normal[texel].dot(to_camera) < GRAZING_LIMIT {
        return TexelVisibility::BackFacing;
    }
    let (x, y) = (fx as u32, fy as u32);
    let i = gbuffer.index(x, y);
    let epsilon = DEPTH_BIAS * camera.pose.radius;
    if gbuffer.face[i] == face || (gbuffer.depth[i] - proj.depth).abs() <= epsilon {
        TexelVisibility::Visible { x, y }
    } else {
        TexelVisibility::Occluded
    }
}

/// Bake one view's label map into a temporary label UV.
pub fn bake_view(
    table: &TexelSampleTable,
    gbuffer: &GBuffer,
    labelmap: &LabelMap,
    pose: &CameraPose,
    view_index: usize,
) -> Result<LabelUV, BakeError> {
    if (gbuffer.width, gbuffer.height) != (labelmap.width, labelmap.height)
        || (gbuffer.width, gbuffer.height) != (pose.width, pose.height)
    {
        return Err(BakeError::ShapeMismatch(format!(
            "G-buffer {}x{}, label map {}x{}, pose {}x{}",
            gbuffer.width, gbuffer.height, labelmap.width, labelmap.height, pose.width, pose.height
        )));
    }
    let camera = Camera::new(pose);
    let mut out = LabelUV::filled(table.resolution, BACKGROUND, ViewTag::View(view_index));
    for (texel, label) in out.labels.iter_mut().enumerate() {
        if let TexelVisibility::Visible { x, y } = texel_visibility(table, texel, &camera, gbuffer)
        {
            *label = labelmap.get(x, y);
        }
    }
    Ok(out)
}

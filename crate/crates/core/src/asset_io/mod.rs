//! Loading, validating and normalizing input assets, and writing image outputs.
//!
//! Meshes come from Wavefront OBJ, textures from 8-bit PNG. Every output file
//! goes through [`write_atomic`] so an interrupted run never leaves a
//! truncated artifact behind.

mod image;
mod obj;

use std::path::{Path, PathBuf};

use glam::{DVec2, DVec3};
use thiserror::Error;

pub use self::image::{
    decode_label_png, decode_texture, encode_gray16_png, encode_gray_png, encode_indexed_png,
    encode_rgba_png, load_texture, write_atomic, write_image, GrayImage, TextureImage,
};
pub use self::obj::{load_mesh, locate_albedo, parse_obj, LoadedMesh};

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("face at line {line} has no texture coordinates; assets must be UV-parameterized")]
    MissingUvs { line: usize },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("mesh has zero spatial extent; cannot normalize")]
    DegenerateExtent,
    #[error("{kind} index {index} out of range (len {len}) in face {face}")]
    IndexOutOfRange {
        kind: &'static str,
        index: u32,
        len: usize,
        face: usize,
    },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("png decode error: {0}")]
    Decode(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AssetError {
    /// Wrap an I/O failure on `path`; a missing file becomes `FileNotFound`.
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            AssetError::FileNotFound(path.to_path_buf())
        } else {
            AssetError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

/// One corner of a triangle: indices into the mesh's position, UV and
/// (optional) normal arrays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Corner {
    pub position: u32,
    pub uv: u32,
    pub normal: Option<u32>,
}

impl Corner {
    pub fn new(position: u32, uv: u32) -> Self {
        Corner {
            position,
            uv,
            normal: None,
        }
    }
}

pub type Face = [Corner; 3];

/// Indexed triangle mesh with per-corner UVs.
///
/// Construction validates every index and canonicalizes UVs into `[0, 1]²`
/// by repeat wrapping, so downstream code may index without checks.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    positions: Vec<DVec3>,
    uvs: Vec<DVec2>,
    normals: Vec<DVec3>,
    faces: Vec<Face>,
}

/// Repeat-wrap a texture coordinate into `[0, 1]`. Values already inside the
/// closed interval are kept so that charts touching the border stay intact.
pub fn wrap_uv(value: f64) -> f64 {
    if (0.0..=1.0).contains(&value) {
        value
    } else {
        value.rem_euclid(1.0)
    }
}

impl TriangleMesh {
    pub fn new(
        positions: Vec<DVec3>,
        uvs: Vec<DVec2>,
        normals: Vec<DVec3>,
        faces: Vec<Face>,
    ) -> Result<Self, AssetError> {
        for (face_index, face) in faces.iter().enumerate() {
            for corner in face {
                check_index("position", corner.position, positions.len(), face_index)?;
                check_index("uv", corner.uv, uvs.len(), face_index)?;
                if let Some(n) = corner.normal {
                    check_index("normal", n, normals.len(), face_index)?;
                }
            }
        }
        let uvs = uvs
            .into_iter()
            .map(|uv| DVec2::new(wrap_uv(uv.x), wrap_uv(uv.y)))
            .collect();
        Ok(TriangleMesh {
            positions,
            uvs,
            normals,
            faces,
        })
    }

    pub fn empty() -> Self {
        TriangleMesh {
            positions: Vec::new(),
            uvs: Vec::new(),
            normals: Vec::new(),
            faces: Vec::new(),
        }
    }

    pub fn positions(&self) -> &[DVec3] {
        &self.positions
    }

    pub fn uvs(&self) -> &[DVec2] {
        &self.uvs
    }

    pub fn normals(&self) -> &[DVec3] {
        &self.normals
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn face_positions(&self, face: usize) -> [DVec3; 3] {
        let f = &self.faces[face];
        [
            self.positions[f[0].position as usize],
            self.positions[f[1].position as usize],
            self.positions[f[2].position as usize],
        ]
    }

    pub fn face_uvs(&self, face: usize) -> [DVec2; 3] {
        let f = &self.faces[face];
        [
            self.uvs[f[0].uv as usize],
            self.uvs[f[1].uv as usize],
            self.uvs[f[2].uv as usize],
        ]
    }

    /// Per-corner normals, if every corner of the face carries one.
    pub fn face_vertex_normals(&self, face: usize) -> Option<[DVec3; 3]> {
        let f = &self.faces[face];
        Some([
            self.normals[f[0].normal? as usize],
            self.normals[f[1].normal? as usize],
            self.normals[f[2].normal? as usize],
        ])
    }

    /// Unit geometric normal following the counter-clockwise winding; zero
    /// for degenerate faces.
    pub fn face_normal(&self, face: usize) -> DVec3 {
        let [a, b, c] = self.face_positions(face);
        (b - a).cross(c - a).normalize_or_zero()
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.face_positions(face);
        0.5 * (b - a).cross(c - a).length()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Largest distance of any referenced vertex from the origin.
    pub fn max_vertex_norm(&self) -> f64 {
        self.positions
            .iter()
            .map(|p| p.length())
            .fold(0.0, f64::max)
    }

    /// Returns a copy with every position mapped through `f`.
    pub fn map_positions(&self, f: impl Fn(DVec3) -> DVec3) -> TriangleMesh {
        TriangleMesh {
            positions: self.positions.iter().map(|&p| f(p)).collect(),
            ..self.clone()
        }
    }
}

fn check_index(kind: &'static str, index: u32, len: usize, face: usize) -> Result<(), AssetError> {
    if (index as usize) < len {
        Ok(())
    } else {
        Err(AssetError::IndexOutOfRange {
            kind,
            index,
            len,
            face,
        })
    }
}

/// Center and scale that [`normalize_mesh`] applies: `p' = (p - center) * scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub center: DVec3,
    pub scale: f64,
}

pub fn normalization(mesh: &TriangleMesh) -> Result<Normalization, AssetError> {
    if mesh.is_empty() || mesh.positions.is_empty() {
        return Err(AssetError::EmptyMesh);
    }
    let mut lo = DVec3::splat(f64::INFINITY);
    let mut hi = DVec3::splat(f64::NEG_INFINITY);
    for p in &mesh.positions {
        lo = lo.min(*p);
        hi = hi.max(*p);
    }
    let center = (lo + hi) * 0.5;
    let radius = mesh
        .positions
        .iter()
        .map(|p| (*p - center).length())
        .fold(0.0, f64::max);
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(AssetError::DegenerateExtent);
    }
    Ok(Normalization {
        center,
        scale: 1.0 / radius,
    })
}

/// Translate the bounding-box center to the origin and scale uniformly so
/// the farthest vertex lies on the unit sphere. UVs and normals are untouched.
pub fn normalize_mesh(mesh: &TriangleMesh) -> Result<TriangleMesh, AssetError> {
    let n = normalization(mesh)?;
    Ok(mesh.map_positions(|p| (p - n.center) * n.scale))
}

/// Geometry plus albedo texture.
#[derive(Clone, Debug)]
pub struct Asset {
    pub name: String,
    pub mesh: TriangleMesh,
    pub albedo: TextureImage,
}

impl Asset {
    pub fn new(name: impl Into<String>, mesh: TriangleMesh, albedo: TextureImage) -> Self {
        Asset {
            name: name.into(),
            mesh,
            albedo,
        }
    }

    /// Load an OBJ mesh and its PNG albedo. When `albedo` is `None` the
    /// material library referenced by the OBJ is searched for `map_Kd`.
    pub fn load(
        mesh_path: &Path,
        albedo: Option<&Path>,
    ) -> Result<(Asset, LoadedMesh), AssetError> {
        let loaded = load_mesh(mesh_path)?;
        let albedo_path = match albedo {
            Some(p) => p.to_path_buf(),
            None => locate_albedo(mesh_path)?.ok_or_else(|| AssetError::Parse {
                line: 0,
                message: "no albedo given and no map_Kd found in the material library".into(),
            })?,
        };
        let texture = load_texture(&albedo_path)?;
        let name = mesh_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "asset".into());
        Ok((Asset::new(name, loaded.mesh.clone(), texture), loaded))
    }

    pub fn normalized(&self) -> Result<Asset, AssetError> {
        Ok(Asset {
            name: self.name.clone(),
            mesh: normalize_mesh(&self.mesh)?,
            albedo: self.albedo.clone(),
        })
    }
}

/// Continuous texel-space coordinates of a UV point in a `width × height`
/// raster. `v = 0` is the bottom row, matching the OBJ convention; texel
/// centers sit at half-integer coordinates.
pub fn uv_to_raster(uv: DVec2, width: u32, height: u32) -> DVec2 {
    DVec2::new(uv.x * width as f64, (1.0 - uv.y) * height as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(half: f64) -> TriangleMesh {
        let mut positions = Vec::new();
        for i in 0..8 {
            positions.push(DVec3::new(
                if i & 1 == 0 { -half } else { half },
                if i & 2 == 0 { -half } else { half },
                if i & 4 == 0 { -half } else { half },
            ));
        }
        let uvs = vec![
            DVec2::new(0.0, 0.0),
            DVec2::new(1.0, 0.0),
            DVec2::new(0.0, 1.0),
        ];
        let faces = vec![
            [Corner::new(0, 0), Corner::new(1, 1), Corner::new(3, 2)],
            [Corner::new(4, 0), Corner::new(7, 1), Corner::new(6, 2)],
        ];
        TriangleMesh::new(positions, uvs, vec![], faces).unwrap()
    }

    #[test]
    fn cube_scale_factor_is_inverse_sqrt3() {
        let mesh = cube(1.0);
        let n = normalization(&mesh).unwrap();
        assert!((n.scale - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        let normalized = normalize_mesh(&mesh).unwrap();
        assert!((normalized.max_vertex_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_is_idempotent() {
        let mesh = cube(3.5).map_positions(|p| p + DVec3::new(10.0, -2.0, 0.25));
        let once = normalize_mesh(&mesh).unwrap();
        let twice = normalize_mesh(&once).unwrap();
        for (a, b) in once.positions().iter().zip(twice.positions()) {
            assert!((*a - *b).length() < 1e-6);
        }
    }

    #[test]
    fn zero_extent_is_rejected() {
        let p = DVec3::new(0.3, 0.3, 0.3);
        let mesh = TriangleMesh::new(
            vec![p, p, p],
            vec![DVec2::ZERO],
            vec![],
            vec![[Corner::new(0, 0), Corner::new(1, 0), Corner::new(2, 0)]],
        )
        .unwrap();
        assert!(matches!(
            normalize_mesh(&mesh),
            Err(AssetError::DegenerateExtent)
        ));
        assert!(matches!(
            normalize_mesh(&TriangleMesh::empty()),
            Err(AssetError::EmptyMesh)
        ));
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let err = TriangleMesh::new(
            vec![DVec3::ZERO; 3],
            vec![DVec2::ZERO],
            vec![],
            vec![[Corner::new(0, 0), Corner::new(1, 1), Corner::new(2, 0)]],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            AssetError::IndexOutOfRange { kind: "uv", .. }
        ));
    }

    #[test]
    fn uvs_are_wrapped() {
        assert_eq!(wrap_uv(1.0), 1.0);
        assert_eq!(wrap_uv(0.0), 0.0);
        assert!((wrap_uv(1.25) - 0.25).abs() < 1e-12);
        assert!((wrap_uv(-0.25) - 0.75).abs() < 1e-12);
    }
}

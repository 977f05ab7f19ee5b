//! Procedural test assets with known per-face material labels.
//!
//! Every fixture is Z-up, has non-overlapping UVs, and can paint its albedo
//! in the display colors of a [`MaterialTable`], which makes the color oracle
//! an exact segmenter for it.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use glam::{DVec2, DVec3};

use crate::asset_io::{
    write_atomic, write_image, Asset, AssetError, Corner, TextureImage, TriangleMesh,
};
use crate::material_pbr::MaterialTable;
use crate::multiview::NO_FACE;
use crate::seg_backend::{MaterialClass, OraclePalette, BACKGROUND};
use crate::uv_bake::{rasterize_uv, LabelUV, TexelSampleTable, ViewTag};

/// A mesh with one material label per face.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub mesh: TriangleMesh,
    pub face_labels: Vec<u8>,
}

impl Fixture {
    /// Albedo texture painted with each face's display color. Colors are
    /// grown a few texels past chart borders so bilinear lookups near an
    /// edge never mix in another class.
    pub fn albedo(&self, resolution: u32, table: &MaterialTable) -> TextureImage {
        let texels = rasterize_uv(&self.mesh, resolution).expect("fixture albedo resolution");
        let mut labels = face_labels_to_uv(&texels, &self.face_labels).labels;
        let res = resolution as usize;
        for _ in 0..4 {
            let prev = labels.clone();
            for y in 0..res {
                for x in 0..res {
                    if prev[y * res + x] != BACKGROUND {
                        continue;
                    }
                    let neighbours = [(0i64, -1i64), (-1, 0), (1, 0), (0, 1)];
                    if let Some(l) = neighbours.iter().find_map(|&(dx, dy)| {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        (nx >= 0 && ny >= 0 && nx < res as i64 && ny < res as i64)
                            .then(|| prev[ny as usize * res + nx as usize])
                            .filter(|&l| l != BACKGROUND)
                    }) {
                        labels[y * res + x] = l;
                    }
                }
            }
        }
        let pixels = labels
            .iter()
            .flat_map(|&l| {
                if l == BACKGROUND {
                    [0, 0, 0, 0]
                } else {
                    let [r, g, b] = table.entry(l).display_color;
                    [r, g, b, 255]
                }
            })
            .collect();
        TextureImage::new(resolution, resolution, pixels).expect("sized buffer")
    }

    pub fn asset(&self, albedo_resolution: u32) -> Asset {
        Asset::new(
            self.name.clone(),
            self.mesh.clone(),
            self.albedo(albedo_resolution, &MaterialTable::default()),
        )
    }

    /// Ground-truth label UV for a texel table built from this mesh.
    pub fn ground_truth(&self, texels: &TexelSampleTable) -> LabelUV {
        face_labels_to_uv(texels, &self.face_labels)
    }

    /// Write `<stem>.obj`, `<stem>.mtl` and `<stem>_albedo.png` into `dir`.
    pub fn write_obj(
        &self,
        dir: &Path,
        stem: &str,
        albedo_resolution: u32,
    ) -> Result<std::path::PathBuf, AssetError> {
        let obj_path = dir.join(format!("{stem}.obj"));
        let albedo_name = format!("{stem}_albedo.png");
        write_image(
            &self.albedo(albedo_resolution, &MaterialTable::default()),
            &dir.join(&albedo_name),
        )?;
        write_atomic(
            &dir.join(format!("{stem}.mtl")),
            format!("newmtl albedo\nmap_Kd {albedo_name}\n").as_bytes(),
        )?;
        let mut text = format!("mtllib {stem}.mtl\nusemtl albedo\n");
        text.push_str(&mesh_to_obj(&self.mesh));
        write_atomic(&obj_path, text.as_bytes())?;
        Ok(obj_path)
    }
}

/// OBJ text for a mesh (no material statements).
pub fn mesh_to_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for p in mesh.positions() {
        let _ = writeln!(out, "v {:?} {:?} {:?}", p.x, p.y, p.z);
    }
    for t in mesh.uvs() {
        let _ = writeln!(out, "vt {:?} {:?}", t.x, t.y);
    }
    for n in mesh.normals() {
        let _ = writeln!(out, "vn {:?} {:?} {:?}", n.x, n.y, n.z);
    }
    for face in mesh.faces() {
        out.push('f');
        for c in face {
            match c.normal {
                Some(n) => {
                    let _ = write!(out, " {}/{}/{}", c.position + 1, c.uv + 1, n + 1);
                }
                None => {
                    let _ = write!(out, " {}/{}", c.position + 1, c.uv + 1);
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn face_labels_to_uv(texels: &TexelSampleTable, face_labels: &[u8]) -> LabelUV {
    LabelUV {
        resolution: texels.resolution,
        labels: texels
            .face
            .iter()
            .map(|&f| {
                if f == NO_FACE {
                    BACKGROUND
                } else {
                    face_labels[f as usize]
                }
            })
            .collect(),
        view: ViewTag::Fused,
    }
}

/// Oracle palette made of the table's class display colors.
pub fn table_palette(table: &MaterialTable) -> OraclePalette {
    OraclePalette::new(
        MaterialClass::ALL
            .iter()
            .map(|c| (table.entry(c.id()).display_color, c.id()))
            .collect(),
    )
    .expect("table colors are distinct")
}

pub fn default_palette() -> OraclePalette {
    table_palette(&MaterialTable::default())
}

/// Unit sphere from an octahedron whose faces are split into `level²`
/// triangles each, with octahedral UVs: the upper hemisphere fills the
/// central diamond of the unit square and the lower one the four corners.
/// Texel density is close to uniform over the sphere.
pub fn octasphere(level: u32) -> TriangleMesh {
    let n = level.max(1) as i64;
    let mut positions = Vec::new();
    let mut pos_index: HashMap<(i64, i64, i64), u32> = HashMap::new();
    let mut uvs = Vec::new();
    let mut faces = Vec::new();
    for oct in 0..8 {
        let s = [
            if oct & 1 == 0 { 1 } else { -1 },
            if oct & 2 == 0 { 1 } else { -1 },
            if oct & 4 == 0 { 1 } else { -1 },
        ];
        let mut uv_index: HashMap<(i64, i64), u32> = HashMap::new();
        let mut vertex = |i: i64, j: i64| -> Corner {
            let (x, y, z) = (s[0] * i, s[1] * j, s[2] * (n - i - j));
            let p = *pos_index.entry((x, y, z)).or_insert_with(|| {
                positions.push(DVec3::new(x as f64, y as f64, z as f64).normalize());
                positions.len() as u32 - 1
            });
            let t = *uv_index.entry((i, j)).or_insert_with(|| {
                let (u, v) = if s[2] > 0 {
                    (x, y)
                } else {
                    (s[0] * (n - j), s[1] * (n - i))
                };
                uvs.push(DVec2::new(
                    (u + n) as f64 / (2 * n) as f64,
                    (v + n) as f64 / (2 * n) as f64,
                ));
                uvs.len() as u32 - 1
            });
            Corner {
                position: p,
                uv: t,
                normal: Some(p),
            }
        };
        let outward = s[0] * s[1] * s[2] > 0;
        let mut tri = |a: Corner, b: Corner, c: Corner| {
            faces.push(if outward { [a, b, c] } else { [a, c, b] });
        };
        for i in 0..n {
            for j in 0..n - i {
                tri(vertex(i, j), vertex(i + 1, j), vertex(i, j + 1));
                if i + j + 1 < n {
                    tri(vertex(i + 1, j), vertex(i + 1, j + 1), vertex(i, j + 1));
                }
            }
        }
    }
    let normals = positions.clone();
    TriangleMesh::new(positions, uvs, normals, faces).expect("valid sphere")
}

/// Octasphere with the upper hemisphere labelled `upper` and the lower one
/// `lower`.
pub fn sphere(level: u32, upper: MaterialClass, lower: MaterialClass) -> Fixture {
    let mesh = octasphere(level);
    let face_labels = (0..mesh.face_count())
        .map(|f| {
            let c: DVec3 = mesh.face_positions(f).iter().sum();
            if c.z >= 0.0 {
                upper.id()
            } else {
                lower.id()
            }
        })
        .collect();
    Fixture {
        name: "sphere".into(),
        mesh,
        face_labels,
    }
}

/// Builder for meshes made of axis-aligned boxes, each box face split into
/// `subdiv × subdiv` quads and given its own cell of a UV grid.
struct BoxBuilder {
    positions: Vec<DVec3>,
    uvs: Vec<DVec2>,
    faces: Vec<[Corner; 3]>,
    labels: Vec<u8>,
    grid: (u32, u32),
    next_cell: u32,
}

impl BoxBuilder {
    fn new(grid: (u32, u32)) -> Self {
        BoxBuilder {
            positions: Vec::new(),
            uvs: Vec::new(),
            faces: Vec::new(),
            labels: Vec::new(),
            grid,
            next_cell: 0,
        }
    }

    fn cell_uv(&mut self, a: f64, b: f64) -> u32 {
        let (cols, rows) = self.grid;
        let cell = self.next_cell;
        let (cx, cy) = ((cell % cols) as f64, (cell / cols) as f64);
        // Each chart leaves a 12% gutter inside its cell.
        let margin = 0.06;
        let u = (cx + margin + a * (1.0 - 2.0 * margin)) / cols as f64;
        let v = (cy + margin + b * (1.0 - 2.0 * margin)) / rows as f64;
        self.uvs.push(DVec2::new(u, v));
        self.uvs.len() as u32 - 1
    }

    /// Sides are indexed +X, −X, +Y, −Y, +Z, −Z; sides listed in `open` are
    /// left out.
    fn add_box(
        &mut self,
        min: DVec3,
        max: DVec3,
        subdiv: u32,
        open: &[usize],
        label: impl Fn(usize) -> u8,
    ) {
        let n = subdiv as i64;
        let mut index: HashMap<[i64; 3], u32> = HashMap::new();
        let ext = max - min;
        // (normal axis, sign): tangent axes chosen so that u × v = sign · normal.
        let sides = [(0usize, 1i64), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1)];
        for (side, &(axis, sign)) in sides.iter().enumerate() {
            if open.contains(&side) {
                continue;
            }
            let (mut ua, mut va) = ((axis + 1) % 3, (axis + 2) % 3);
            if sign < 0 {
                std::mem::swap(&mut ua, &mut va);
            }
            let level = if sign > 0 { n } else { 0 };
            let mut corner = |i: i64, j: i64, this: &mut BoxBuilder| -> Corner {
                let mut k = [0i64; 3];
                k[axis] = level;
                k[ua] = i;
                k[va] = j;
                let p = *index.entry(k).or_insert_with(|| {
                    let f = DVec3::new(k[0] as f64, k[1] as f64, k[2] as f64) / n as f64;
                    this.positions.push(min + ext * f);
                    this.positions.len() as u32 - 1
                });
                let t = this.cell_uv(i as f64 / n as f64, j as f64 / n as f64);
                Corner::new(p, t)
            };
            for i in 0..n {
                for j in 0..n {
                    let c00 = corner(i, j, self);
                    let c10 = corner(i + 1, j, self);
                    let c11 = corner(i + 1, j + 1, self);
                    let c01 = corner(i, j + 1, self);
                    self.faces.push([c00, c10, c11]);
                    self.faces.push([c00, c11, c01]);
                    self.labels.push(label(side));
                    self.labels.push(label(side));
                }
            }
            self.next_cell += 1;
        }
    }

    fn finish(self, name: &str) -> Fixture {
        Fixture {
            name: name.into(),
            mesh: TriangleMesh::new(self.positions, self.uvs, vec![], self.faces)
                .expect("valid boxes"),
            face_labels: self.labels,
        }
    }
}

/// Cube with corners (±1, ±1, ±1); each side a different class.
pub fn cube() -> Fixture {
    use MaterialClass::*;
    let classes = [Metal, Wood, Plastic, Paint, Fabric, Brick];
    let mut b = BoxBuilder::new((3, 2));
    b.add_box(DVec3::splat(-1.0), DVec3::splat(1.0), 1, &[], |side| {
        classes[side].id()
    });
    b.finish("cube")
}

pub const CHAIR_SEAT: MaterialClass = MaterialClass::Fabric;
pub const CHAIR_BACK: MaterialClass = MaterialClass::Wood;
pub const CHAIR_LEGS: MaterialClass = MaterialClass::Metal;
pub const CHAIR_ARMS: MaterialClass = MaterialClass::Plastic;

/// Chair from 8 boxes (seat, backrest, four legs, two armrests) in four
/// materials. Box faces are split 3×3. Caps that sit flush against another
/// part are left out, since no camera can see them; 738 triangles remain.
pub fn chair() -> Fixture {
    let mut b = BoxBuilder::new((8, 6));
    let v = DVec3::new;
    let seat = CHAIR_SEAT.id();
    let back = CHAIR_BACK.id();
    let legs = CHAIR_LEGS.id();
    let arms = CHAIR_ARMS.id();
    b.add_box(v(-0.5, -0.5, 0.0), v(0.5, 0.5, 0.1), 3, &[], |_| seat);
    b.add_box(v(-0.5, 0.4, 0.1), v(0.5, 0.5, 0.9), 3, &[5], |_| back);
    for (x, y) in [(-0.5, -0.5), (0.42, -0.5), (-0.5, 0.42), (0.42, 0.42)] {
        b.add_box(v(x, y, -0.8), v(x + 0.08, y + 0.08, 0.0), 3, &[4], |_| legs);
    }
    for x in [-0.5, 0.42] {
        b.add_box(v(x, -0.4, 0.35), v(x + 0.08, 0.4, 0.42), 3, &[2], |_| arms);
    }
    b.finish("chair")
}

pub const FRONT_QUAD: MaterialClass = MaterialClass::Metal;
pub const BACK_QUAD: MaterialClass = MaterialClass::Wood;

/// Two parallel quads facing +X: the front one at x = 0.2 with half size
/// 0.6, the back one at x = −0.2 with half size 0.3, hidden behind the
/// front quad from cameras near the +X axis. Faces 0–1 are the front quad.
pub fn parallel_quads() -> Fixture {
    let mut positions = Vec::new();
    let mut uvs = Vec::new();
    let mut faces = Vec::new();
    let mut labels = Vec::new();
    for (k, (x, half, label)) in [(0.2, 0.6, FRONT_QUAD), (-0.2, 0.3, BACK_QUAD)]
        .into_iter()
        .enumerate()
    {
        let base = positions.len() as u32;
        for (y, z) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
            positions.push(DVec3::new(x, y * half, z * half));
        }
        let u0 = 0.05 + 0.5 * k as f64;
        for (u, w) in [(0.0, 0.0), (0.4, 0.0), (0.4, 0.9), (0.0, 0.9)] {
            uvs.push(DVec2::new(u0 + u, 0.05 + w));
        }
        let c = |i: u32| Corner::new(base + i, base + i);
        // (+Y, +Z) ordering gives +X normals.
        faces.push([c(0), c(1), c(2)]);
        faces.push([c(0), c(2), c(3)]);
        labels.extend([label.id(), label.id()]);
    }
    Fixture {
        name: "quads".into(),
        mesh: TriangleMesh::new(positions, uvs, vec![], faces).expect("valid quads"),
        face_labels: labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{face_adjacency, uv_charts};

    #[test]
    fn octasphere_is_closed_and_unit() {
        let m = octasphere(6);
        assert_eq!(m.face_count(), 8 * 36);
        let adj = face_adjacency(&m);
        assert!(adj.neighbors.iter().all(|n| n.len() == 3));
        assert!(m
            .positions()
            .iter()
            .all(|p| (p.length() - 1.0).abs() < 1e-12));
        for f in 0..m.face_count() {
            let c: DVec3 = m.face_positions(f).iter().sum();
            assert!(m.face_normal(f).dot(c) > 0.0, "face {f} faces inward");
        }
        assert_eq!(uv_charts(&m).iter().max(), Some(&0));
    }

    #[test]
    fn octasphere_fills_uv_square() {
        let t = rasterize_uv(&octasphere(8), 128).unwrap();
        assert_eq!(t.assigned_count(), 128 * 128);
        assert_eq!(t.overlap_texels, 0);
    }

    #[test]
    fn chair_shape() {
        let c = chair();
        assert_eq!(c.mesh.face_count(), 738);
        let parts: std::collections::BTreeSet<u8> = c.face_labels.iter().copied().collect();
        assert_eq!(parts.len(), 4);
        for f in 0..c.mesh.face_count() {
            assert!(c.mesh.face_area(f) > 0.0);
        }
        let t = rasterize_uv(&c.mesh, 256).unwrap();
        assert_eq!(t.overlap_texels, 0);
    }

    #[test]
    fn box_faces_point_outward() {
        let c = cube();
        for f in 0..c.mesh.face_count() {
            let centroid: DVec3 = c.mesh.face_positions(f).iter().sum::<DVec3>() / 3.0;
            assert!(c.mesh.face_normal(f).dot(centroid) > 0.0);
        }
        assert_eq!(
            face_adjacency(&c.mesh)
                .neighbors
                .iter()
                .map(Vec::len)
                .sum::<usize>(),
            36
        );
    }

    #[test]
    fn painted_albedo_segments_exactly() {
        let fx = cube();
        let table = MaterialTable::default();
        let albedo = fx.albedo(128, &table);
        let texels = rasterize_uv(&fx.mesh, 128).unwrap();
        let gt = fx.ground_truth(&texels);
        let palette = default_palette();
        for (i, &l) in gt.labels.iter().enumerate() {
            if l != BACKGROUND {
                let p = &albedo.pixels()[i * 4..i * 4 + 3];
                assert_eq!(palette.classify([p[0], p[1], p[2]]), l);
            }
        }
    }

    #[test]
    fn obj_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let fx = chair();
        let path = fx.write_obj(dir.path(), "chair", 64).unwrap();
        let (asset, loaded) = Asset::load(&path, None).unwrap();
        assert_eq!(loaded.degenerate_dropped, 0);
        assert_eq!(asset.mesh.face_count(), fx.mesh.face_count());
        for (a, b) in asset.mesh.positions().iter().zip(fx.mesh.positions()) {
            assert_eq!(a, b);
        }
    }
}

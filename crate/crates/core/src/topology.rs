//! Face connectivity derived from an indexed mesh.
//!
//! Vertices are welded by exact coordinate before building adjacency, so
//! meshes that duplicate positions along UV seams are still connected in 3D.

use std::collections::HashMap;

use glam::{DVec2, DVec3};

use crate::asset_io::TriangleMesh;

fn key3(p: DVec3) -> [u64; 3] {
    // +0.0 and -0.0 weld together.
    [
        (p.x + 0.0).to_bits(),
        (p.y + 0.0).to_bits(),
        (p.z + 0.0).to_bits(),
    ]
}

fn key2(p: DVec2) -> [u64; 2] {
    [(p.x + 0.0).to_bits(), (p.y + 0.0).to_bits()]
}

fn weld<K: std::hash::Hash + Eq>(keys: impl Iterator<Item = K>) -> Vec<u32> {
    let mut ids = HashMap::new();
    keys.map(|k| {
        let next = ids.len() as u32;
        *ids.entry(k).or_insert(next)
    })
    .collect()
}

/// Faces sharing an edge in 3D, with the shared edge length.
#[derive(Clone, Debug)]
pub struct FaceAdjacency {
    pub neighbors: Vec<Vec<(u32, f64)>>,
}

pub fn face_adjacency(mesh: &TriangleMesh) -> FaceAdjacency {
    let pos_id = weld(mesh.positions().iter().map(|&p| key3(p)));
    let mut edges: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
    for (f, face) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            let a = pos_id[face[k].position as usize];
            let b = pos_id[face[(k + 1) % 3].position as usize];
            if a != b {
                edges
                    .entry((a.min(b), a.max(b)))
                    .or_default()
                    .push(f as u32);
            }
        }
    }
    let mut neighbors: Vec<Vec<(u32, f64)>> = vec![Vec::new(); mesh.face_count()];
    let welded_pos: HashMap<u32, DVec3> = mesh
        .positions()
        .iter()
        .enumerate()
        .map(|(i, &p)| (pos_id[i], p))
        .collect();
    for ((a, b), faces) in &edges {
        let len = (welded_pos[a] - welded_pos[b]).length();
        for (i, &f) in faces.iter().enumerate() {
            for &g in &faces[i + 1..] {
                if f != g {
                    neighbors[f as usize].push((g, len));
                    neighbors[g as usize].push((f, len));
                }
            }
        }
    }
    for n in &mut neighbors {
        n.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    }
    FaceAdjacency { neighbors }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

/// UV chart id per face: faces are in one chart when they share an edge
/// whose endpoints agree in both position and UV. Ids are dense and ordered
/// by lowest member face.
pub fn uv_charts(mesh: &TriangleMesh) -> Vec<u32> {
    let pos_id = weld(mesh.positions().iter().map(|&p| key3(p)));
    let uv_id = weld(mesh.uvs().iter().map(|&p| key2(p)));
    let n = mesh.face_count();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    let mut first: HashMap<(u32, u32, u32, u32), u32> = HashMap::new();
    for (f, face) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            let c0 = face[k];
            let c1 = face[(k + 1) % 3];
            let (p0, p1) = (pos_id[c0.position as usize], pos_id[c1.position as usize]);
            let (t0, t1) = (uv_id[c0.uv as usize], uv_id[c1.uv as usize]);
            let key = if p0 <= p1 {
                (p0, t0, p1, t1)
            } else {
                (p1, t1, p0, t0)
            };
            match first.get(&key) {
                Some(&g) => {
                    let (ra, rb) = (find(&mut parent, f as u32), find(&mut parent, g));
                    if ra != rb {
                        parent[ra.max(rb) as usize] = ra.min(rb);
                    }
                }
                None => {
                    first.insert(key, f as u32);
                }
            }
        }
    }
    let mut dense = HashMap::new();
    (0..n as u32)
        .map(|f| {
            let root = find(&mut parent, f);
            let next = dense.len() as u32;
            *dense.entry(root).or_insert(next)
        })
        .collect()
}

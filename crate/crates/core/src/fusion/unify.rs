//! Region unification of the fused label UV.
//!
//! 1. Holes: assigned texels still 255 copy the nearest labelled texel of
//!    their UV chart. Charts that saw nothing take the label of the closest
//!    labelled face across mesh edges, and as a last resort the nearest
//!    labelled texel anywhere.
//! 2. Each face gets the most frequent label of its texels. Faces where that
//!    label covers at least `unify_dominance` of the texels are coherent;
//!    the rest straddle a material boundary and keep their texels as is.
//! 3. Coherent faces connected across 3D edges and sharing a label form
//!    regions. Regions below `unify_min_region` of the assigned texels join
//!    the neighbouring region with the longest shared boundary, smallest
//!    first, until every small region is isolated.
//! 4. Texels of coherent faces take their region's label.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::asset_io::TriangleMesh;
use crate::multiview::NO_FACE;
use crate::seg_backend::{BACKGROUND, NUM_CLASSES};
use crate::topology::{face_adjacency, uv_charts, FaceAdjacency};
use crate::uv_bake::{LabelUV, TexelSampleTable, ViewTag};

use super::{nearest_source, FusionConfig, FusionError};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UnifyStats {
    pub holes_filled: usize,
    pub coherent_faces: usize,
    pub mixed_faces: usize,
    pub regions: usize,
    pub regions_absorbed: usize,
    pub texels_changed: usize,
}

pub fn region_unify(
    fused: &LabelUV,
    table: &TexelSampleTable,
    mesh: &TriangleMesh,
    cfg: &FusionConfig,
) -> Result<LabelUV, FusionError> {
    region_unify_with_stats(fused, table, mesh, cfg).map(|(l, _)| l)
}

pub fn region_unify_with_stats(
    fused: &LabelUV,
    table: &TexelSampleTable,
    mesh: &TriangleMesh,
    cfg: &FusionConfig,
) -> Result<(LabelUV, UnifyStats), FusionError> {
    cfg.validate()?;
    if fused.resolution != table.resolution || fused.labels.len() != table.len() {
        return Err(FusionError::ShapeMismatch(format!(
            "fused {} vs table {}",
            fused.resolution, table.resolution
        )));
    }
    if table
        .face
        .iter()
        .any(|&f| f != NO_FACE && f as usize >= mesh.face_count())
    {
        return Err(FusionError::ShapeMismatch(
            "texel table references faces missing from the mesh".into(),
        ));
    }
    let mut stats = UnifyStats::default();
    let mut labels: Vec<u8> = fused
        .labels
        .iter()
        .zip(&table.face)
        .map(|(&l, &f)| if f == NO_FACE { BACKGROUND } else { l })
        .collect();

    let assigned = table.assigned_count();
    let adjacency = face_adjacency(mesh);
    if labels.iter().any(|&l| l != BACKGROUND) {
        stats.holes_filled = fill_holes(&mut labels, table, mesh, &adjacency);
    }
    if labels.iter().all(|&l| l == BACKGROUND) {
        return Ok((
            LabelUV {
                resolution: fused.resolution,
                labels,
                view: ViewTag::Fused,
            },
            stats,
        ));
    }

    // Step 2: per-face label histogram.
    let faces = mesh.face_count();
    let mut counts = vec![[0u32; NUM_CLASSES]; faces];
    for (t, &f) in table.face.iter().enumerate() {
        if f != NO_FACE && labels[t] != BACKGROUND {
            counts[f as usize][labels[t] as usize] += 1;
        }
    }
    let mut dominant = vec![None; faces];
    let mut face_size = vec![0u64; faces];
    for f in 0..faces {
        let total: u32 = counts[f].iter().sum();
        if total == 0 {
            continue;
        }
        let (best, n) =
            counts[f].iter().enumerate().fold(
                (0usize, 0u32),
                |acc, (c, &n)| if n > acc.1 { (c, n) } else { acc },
            );
        face_size[f] = total as u64;
        if n as f64 >= cfg.unify_dominance * total as f64 {
            dominant[f] = Some(best as u8);
            stats.coherent_faces += 1;
        } else {
            stats.mixed_faces += 1;
        }
    }

    // Step 3: regions over coherent faces.
    let mut region_of = vec![usize::MAX; faces];
    let mut region_label = Vec::new();
    let mut region_size = Vec::new();
    for seed in 0..faces {
        let Some(label) = dominant[seed] else {
            continue;
        };
        if region_of[seed] != usize::MAX {
            continue;
        }
        let id = region_label.len();
        let mut size = 0u64;
        let mut stack = vec![seed];
        region_of[seed] = id;
        while let Some(f) = stack.pop() {
            size += face_size[f];
            for &(g, _) in &adjacency.neighbors[f] {
                let g = g as usize;
                if region_of[g] == usize::MAX && dominant[g] == Some(label) {
                    region_of[g] = id;
                    stack.push(g);
                }
            }
        }
        region_label.push(label);
        region_size.push(size);
    }
    let regions = region_label.len();
    stats.regions = regions;
    let mut boundary: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); regions];
    for f in 0..faces {
        let r = region_of[f];
        if r == usize::MAX {
            continue;
        }
        for &(g, len) in &adjacency.neighbors[f] {
            let s = region_of[g as usize];
            if s != usize::MAX && s != r {
                *boundary[r].entry(s).or_insert(0.0) += len;
            }
        }
    }

    let threshold = cfg.unify_min_region * assigned as f64;
    let mut merger = Merger {
        label: region_label,
        size: region_size,
        boundary,
        parent: (0..regions).collect(),
        small: BTreeSet::new(),
        threshold,
    };
    for r in 0..regions {
        merger.track(r);
    }
    while let Some((_, r)) = merger.small.pop_first() {
        let best = merger.boundary[r]
            .iter()
            .fold(None::<(usize, f64)>, |best, (&n, &len)| match best {
                Some((_, b)) if b >= len => best,
                _ => Some((n, len)),
            });
        if let Some((dst, _)) = best {
            merger.absorb(r, dst);
            stats.regions_absorbed += 1;
        }
    }

    // Step 4: rewrite coherent faces.
    for (t, &f) in table.face.iter().enumerate() {
        if f == NO_FACE {
            continue;
        }
        let r = region_of[f as usize];
        if r == usize::MAX {
            continue;
        }
        let label = merger.label[merger.root(r)];
        if labels[t] != label {
            labels[t] = label;
            stats.texels_changed += 1;
        }
    }

    Ok((
        LabelUV {
            resolution: fused.resolution,
            labels,
            view: ViewTag::Fused,
        },
        stats,
    ))
}

struct Merger {
    label: Vec<u8>,
    size: Vec<u64>,
    boundary: Vec<BTreeMap<usize, f64>>,
    parent: Vec<usize>,
    small: BTreeSet<(u64, usize)>,
    threshold: f64,
}

impl Merger {
    fn root(&self, mut r: usize) -> usize {
        while self.parent[r] != r {
            r = self.parent[r];
        }
        r
    }

    fn track(&mut self, r: usize) {
        if (self.size[r] as f64) < self.threshold {
            self.small.insert((self.size[r], r));
        }
    }

    /// Merge `src` into `dst` (which keeps its label), then fold in any
    /// neighbours that now touch `dst` with the same label.
    fn absorb(&mut self, src: usize, dst: usize) {
        let mut pending = vec![src];
        while let Some(src) = pending.pop() {
            if self.parent[src] != src || src == dst {
                continue;
            }
            self.small.remove(&(self.size[src], src));
            self.small.remove(&(self.size[dst], dst));
            self.size[dst] += self.size[src];
            self.parent[src] = dst;
            let edges = std::mem::take(&mut self.boundary[src]);
            for (n, len) in edges {
                self.boundary[n].remove(&src);
                if n == dst {
                    continue;
                }
                *self.boundary[n].entry(dst).or_insert(0.0) += len;
                *self.boundary[dst].entry(n).or_insert(0.0) += len;
            }
            self.boundary[dst].remove(&src);
            self.track(dst);
            for &n in self.boundary[dst].keys() {
                if self.label[n] == self.label[dst] {
                    pending.push(n);
                }
            }
        }
    }
}

/// Step 1. Returns the number of texels filled.
fn fill_holes(
    labels: &mut [u8],
    table: &TexelSampleTable,
    mesh: &TriangleMesh,
    adjacency: &FaceAdjacency,
) -> usize {
    let r = table.resolution as usize;
    let chart_of_face = uv_charts(mesh);
    let charts = chart_of_face
        .iter()
        .copied()
        .max()
        .map_or(0, |m| m as usize + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); charts];
    for (t, &f) in table.face.iter().enumerate() {
        if f != NO_FACE {
            members[chart_of_face[f as usize] as usize].push(t);
        }
    }
    let before = labels.to_vec();
    let mut filled = 0;
    for texels in &members {
        let has_hole = texels.iter().any(|&t| before[t] == BACKGROUND);
        let has_source = texels.iter().any(|&t| before[t] != BACKGROUND);
        if !has_hole || !has_source {
            continue;
        }
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for &t in texels {
            let (x, y) = (t % r, t / r);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
        let mut is_source = vec![false; w * h];
        for &t in texels {
            if before[t] != BACKGROUND {
                is_source[(t / r - y0) * w + (t % r - x0)] = true;
            }
        }
        let nearest = nearest_source(w, h, &is_source);
        for &t in texels {
            if before[t] == BACKGROUND {
                if let Some(j) = nearest[(t / r - y0) * w + (t % r - x0)] {
                    labels[t] = before[(y0 + j / w) * r + x0 + j % w];
                    filled += 1;
                }
            }
        }
    }

    filled += fill_from_neighbour_faces(labels, table, mesh, adjacency);

    // Disconnected parts that saw nothing borrow from the nearest labelled
    // texel anywhere.
    if labels
        .iter()
        .zip(&table.face)
        .any(|(&l, &f)| f != NO_FACE && l == BACKGROUND)
    {
        let snapshot = labels.to_vec();
        let is_source: Vec<bool> = snapshot.iter().map(|&l| l != BACKGROUND).collect();
        let nearest = nearest_source(r, r, &is_source);
        for t in 0..labels.len() {
            if table.face[t] != NO_FACE && snapshot[t] == BACKGROUND {
                if let Some(j) = nearest[t] {
                    labels[t] = snapshot[j];
                    filled += 1;
                }
            }
        }
    }
    filled
}

/// Breadth-first spread of face labels over the edge graph into faces
/// whose texels are all unlabelled.
fn fill_from_neighbour_faces(
    labels: &mut [u8],
    table: &TexelSampleTable,
    mesh: &TriangleMesh,
    adjacency: &FaceAdjacency,
) -> usize {
    let faces = mesh.face_count();
    let mut counts = vec![[0u32; NUM_CLASSES]; faces];
    let mut has_texels = vec![false; faces];
    for (t, &f) in table.face.iter().enumerate() {
        if f == NO_FACE {
            continue;
        }
        has_texels[f as usize] = true;
        if labels[t] != BACKGROUND {
            counts[f as usize][labels[t] as usize] += 1;
        }
    }
    let mut face_label: Vec<Option<u8>> = counts
        .iter()
        .map(|c| {
            let (best, n) =
                c.iter().enumerate().fold(
                    (0usize, 0u32),
                    |acc, (k, &n)| if n > acc.1 { (k, n) } else { acc },
                );
            (n > 0).then_some(best as u8)
        })
        .collect();
    let mut queue: VecDeque<usize> = (0..faces).filter(|&f| face_label[f].is_some()).collect();
    let needs: Vec<bool> = (0..faces)
        .map(|f| has_texels[f] && face_label[f].is_none())
        .collect();
    if !needs.iter().any(|&n| n) {
        return 0;
    }
    while let Some(f) = queue.pop_front() {
        for &(g, _) in &adjacency.neighbors[f] {
            let g = g as usize;
            if face_label[g].is_none() {
                face_label[g] = face_label[f];
                queue.push_back(g);
            }
        }
    }
    let mut filled = 0;
    for (t, &f) in table.face.iter().enumerate() {
        if f == NO_FACE || !needs[f as usize] {
            continue;
        }
        if let Some(l) = face_label[f as usize] {
            labels[t] = l;
            filled += 1;
        }
    }
    filled
}

//! Fixed-point triangle traversal shared by the screen-space and UV-space
//! rasterizers.
//!
//! Vertices are snapped to a 1/256 sub-pixel grid and edge functions are
//! evaluated exactly in integers, so two triangles sharing an edge always
//! agree on it: a sample on the edge goes to exactly one of them (top-left
//! rule). Samples are taken at pixel centers.

use glam::DVec2;

pub const SUBPIXEL_STEPS: f64 = 256.0;
const HALF_STEP: i64 = 128;
const STEP: i64 = 256;
// Keeps every edge-function product inside i64.
const COORD_LIMIT: f64 = (1i64 << 28) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fixed {
    pub x: i64,
    pub y: i64,
}

pub fn snap(p: DVec2) -> Fixed {
    let s = |v: f64| {
        (v * SUBPIXEL_STEPS)
            .round()
            .clamp(-COORD_LIMIT, COORD_LIMIT) as i64
    };
    Fixed {
        x: s(p.x),
        y: s(p.y),
    }
}

#[inline]
fn edge(a: Fixed, b: Fixed, px: i64, py: i64) -> i64 {
    (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)
}

/// With positive signed area in y-down coordinates, top edges run in +x and
/// left edges run in -y.
#[inline]
fn is_top_left(a: Fixed, b: Fixed) -> bool {
    let dy = b.y - a.y;
    let dx = b.x - a.x;
    dy < 0 || (dy == 0 && dx > 0)
}

/// Call `visit(x, y, bary)` for every pixel center of a `width × height`
/// grid covered by the triangle `pts` (continuous pixel coordinates). The
/// barycentric weights are linear in screen space, belong to `pts[0..3]` in
/// input order and sum to one. Zero-area triangles cover nothing.
pub fn rasterize_triangle(
    pts: [DVec2; 3],
    width: u32,
    height: u32,
    mut visit: impl FnMut(u32, u32, [f64; 3]),
) {
    let s = [snap(pts[0]), snap(pts[1]), snap(pts[2])];
    let area = edge(s[0], s[1], s[2].x, s[2].y);
    if area == 0 {
        return;
    }
    // Traverse with positive orientation; `order` maps back to input slots.
    let order: [usize; 3] = if area > 0 { [0, 1, 2] } else { [0, 2, 1] };
    let v = [s[order[0]], s[order[1]], s[order[2]]];
    let area = area.abs();
    let owners = [
        is_top_left(v[1], v[2]),
        is_top_left(v[2], v[0]),
        is_top_left(v[0], v[1]),
    ];

    let min_x = v.iter().map(|p| p.x).min().unwrap();
    let max_x = v.iter().map(|p| p.x).max().unwrap();
    let min_y = v.iter().map(|p| p.y).min().unwrap();
    let max_y = v.iter().map(|p| p.y).max().unwrap();
    // Pixel x covers center x*256+128.
    let x0 = (min_x - HALF_STEP).div_euclid(STEP).max(0);
    let x1 = ((max_x - HALF_STEP).div_euclid(STEP) + 1).min(width as i64 - 1);
    let y0 = (min_y - HALF_STEP).div_euclid(STEP).max(0);
    let y1 = ((max_y - HALF_STEP).div_euclid(STEP) + 1).min(height as i64 - 1);
    if x0 > x1 || y0 > y1 {
        return;
    }

    let inv_area = 1.0 / area as f64;
    for y in y0..=y1 {
        let py = y * STEP + HALF_STEP;
        for x in x0..=x1 {
            let px = x * STEP + HALF_STEP;
            let e0 = edge(v[1], v[2], px, py);
            let e1 = edge(v[2], v[0], px, py);
            let e2 = edge(v[0], v[1], px, py);
            let inside = |e: i64, owner: bool| e > 0 || (e == 0 && owner);
            if inside(e0, owners[0]) && inside(e1, owners[1]) && inside(e2, owners[2]) {
                let mut bary = [0.0; 3];
                bary[order[0]] = e0 as f64 * inv_area;
                bary[order[1]] = e1 as f64 * inv_area;
                bary[order[2]] = e2 as f64 * inv_area;
                visit(x as u32, y as u32, bary);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coverage(pts: [DVec2; 3], w: u32, h: u32) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        rasterize_triangle(pts, w, h, |x, y, b| {
            assert!((b[0] + b[1] + b[2] - 1.0).abs() < 1e-12);
            assert!(b.iter().all(|&v| v >= -1e-12));
            out.push((x, y));
        });
        out
    }

    #[test]
    fn shared_edges_are_watertight() {
        // A quad split along its diagonal, with the diagonal passing exactly
        // through pixel centers, plus a fan around a shared center vertex.
        let (w, h) = (16, 16);
        let a = DVec2::new(0.5, 0.5);
        let b = DVec2::new(12.5, 0.5);
        let c = DVec2::new(12.5, 12.5);
        let d = DVec2::new(0.5, 12.5);
        let mut hits = vec![0u32; (w * h) as usize];
        for tri in [[a, b, c], [a, c, d]] {
            for (x, y) in coverage(tri, w, h) {
                hits[(y * w + x) as usize] += 1;
            }
        }
        assert!(hits.iter().all(|&n| n <= 1));
        // Interior of the quad including the diagonal is fully covered.
        for y in 1..12u32 {
            for x in 1..12u32 {
                assert_eq!(hits[(y * w + x) as usize], 1, "pixel {x},{y}");
            }
        }

        let center = DVec2::new(8.0, 8.0);
        let ring: Vec<DVec2> = (0..7)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 7.0;
                center + DVec2::new(t.cos(), t.sin()) * 7.3
            })
            .collect();
        let mut hits = vec![0u32; (w * h) as usize];
        for k in 0..7 {
            for (x, y) in coverage([center, ring[k], ring[(k + 1) % 7]], w, h) {
                hits[(y * w + x) as usize] += 1;
            }
        }
        assert!(hits.iter().all(|&n| n <= 1));
        assert_eq!(hits[(8 * w + 8) as usize], 1);
    }

    #[test]
    fn winding_does_not_change_coverage() {
        let p = [
            DVec2::new(1.2, 0.3),
            DVec2::new(9.7, 4.1),
            DVec2::new(3.3, 8.8),
        ];
        let mut cw = coverage(p, 10, 10);
        let mut ccw = coverage([p[0], p[2], p[1]], 10, 10);
        cw.sort();
        ccw.sort();
        assert_eq!(cw, ccw);
        assert!(!cw.is_empty());
    }

    #[test]
    fn degenerate_triangle_covers_nothing() {
        let p = [
            DVec2::new(0.0, 0.0),
            DVec2::new(5.0, 5.0),
            DVec2::new(10.0, 10.0),
        ];
        assert!(coverage(p, 16, 16).is_empty());
    }

    #[test]
    fn barycentrics_reproduce_the_sample_point() {
        let p = [
            DVec2::new(0.0, 0.0),
            DVec2::new(8.0, 0.0),
            DVec2::new(0.0, 8.0),
        ];
        rasterize_triangle(p, 8, 8, |x, y, b| {
            let q = p[0] * b[0] + p[1] * b[1] + p[2] * b[2];
            assert!((q - DVec2::new(x as f64 + 0.5, y as f64 + 0.5)).length() < 1e-9);
        });
    }
}

/// Exact Euclidean nearest-source transform on a `width × height` grid.
///
/// Returns, for every cell, the row-major index of the closest cell with
/// `is_source[i] == true`, or `None` when the grid has no source. Two
/// separable passes (column distances, then the lower envelope of parabolas
/// along each row); ties resolve toward lower column, then lower row.
pub fn nearest_source(width: usize, height: usize, is_source: &[bool]) -> Vec<Option<usize>> {
    assert_eq!(is_source.len(), width * height);
    // Per column: nearest source row for each cell, or usize::MAX.
    let mut col_row = vec![usize::MAX; width * height];
    for x in 0..width {
        let mut last = usize::MAX;
        for y in 0..height {
            if is_source[y * width + x] {
                last = y;
            }
            col_row[y * width + x] = last;
        }
        let mut next = usize::MAX;
        for y in (0..height).rev() {
            if is_source[y * width + x] {
                next = y;
            }
            let i = y * width + x;
            let up = col_row[i];
            if next != usize::MAX && (up == usize::MAX || next - y < y - up) {
                col_row[i] = next;
            }
        }
    }

    let mut out = vec![None; width * height];
    let mut v = vec![0usize; width];
    let mut z = vec![0f64; width + 1];
    let mut f = vec![0f64; width];
    for y in 0..height {
        let mut k: isize = -1;
        for q in 0..width {
            let row = col_row[y * width + q];
            if row == usize::MAX {
                continue;
            }
            let dy = row.abs_diff(y) as f64;
            f[q] = dy * dy;
            let qf = q as f64;
            let mut s = f64::NEG_INFINITY;
            while k >= 0 {
                let p = v[k as usize] as f64;
                s = ((f[q] + qf * qf) - (f[v[k as usize]] + p * p)) / (2.0 * qf - 2.0 * p);
                if s <= z[k as usize] {
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = if k == 0 { f64::NEG_INFINITY } else { s };
            z[k as usize + 1] = f64::INFINITY;
        }
        if k < 0 {
            continue;
        }
        let mut j = 0usize;
        for x in 0..width {
            while z[j + 1] < x as f64 {
                j += 1;
            }
            let col = v[j];
            out[y * width + x] = Some(col_row[y * width + col] * width + col);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(width: usize, height: usize, src: &[bool]) -> Vec<Option<u64>> {
        (0..width * height)
            .map(|i| {
                let (x, y) = ((i % width) as i64, (i / width) as i64);
                src.iter()
                    .enumerate()
                    .filter(|(_, &s)| s)
                    .map(|(j, _)| {
                        let (sx, sy) = ((j % width) as i64, (j / width) as i64);
                        ((sx - x).pow(2) + (sy - y).pow(2)) as u64
                    })
                    .min()
            })
            .collect()
    }

    #[test]
    fn empty_grid_has_no_sources() {
        assert!(nearest_source(4, 3, &[false; 12])
            .iter()
            .all(|v| v.is_none()));
    }

    proptest! {
        #[test]
        fn matches_brute_force_distance(
            (w, h, src) in (1usize..20, 1usize..20).prop_flat_map(|(w, h)| {
                (Just(w), Just(h), proptest::collection::vec(proptest::bool::weighted(0.1), w * h))
            })
        ) {
            let got = nearest_source(w, h, &src);
            let expected = brute(w, h, &src);
            for i in 0..w * h {
                let d = got[i].map(|j| {
                    prop_assert!(src[j]);
                    let (x, y) = ((i % w) as i64, (i / w) as i64);
                    let (sx, sy) = ((j % w) as i64, (j / w) as i64);
                    Ok(((sx - x).pow(2) + (sy - y).pow(2)) as u64)
                });
                let d = match d { Some(r) => Some(r?), None => None };
                prop_assert_eq!(d, expected[i]);
            }
        }
    }
}

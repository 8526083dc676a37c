//! Exact squared Euclidean distance transform (Felzenszwalb & Huttenlocher,
//! separable lower envelope of parabolas).

const FAR: f64 = 1e20;

/// Squared distance, in cell units, from every cell center to the nearest
/// `true` cell of `mask` (row-major, `w × h`). Cells with no target at all
/// get `1e20`.
///
/// All intermediate values are sums of squared integers, so the result is
/// exact in `f64` for any grid that fits in memory.
pub fn squared_distance_transform(mask: &[bool], w: usize, h: usize) -> Vec<f64> {
    assert_eq!(mask.len(), w * h, "mask size");
    let mut grid: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { FAR }).collect();
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for iy in 0..h {
        f[..w].copy_from_slice(&grid[iy * w..(iy + 1) * w]);
        transform_1d(&f[..w], &mut d[..w], &mut v, &mut z);
        grid[iy * w..(iy + 1) * w].copy_from_slice(&d[..w]);
    }
    for ix in 0..w {
        for iy in 0..h {
            f[iy] = grid[iy * w + ix];
        }
        transform_1d(&f[..h], &mut d[..h], &mut v, &mut z);
        for iy in 0..h {
            grid[iy * w + ix] = d[iy];
        }
    }
    grid
}

fn transform_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    // skip leading cells without a finite parabola so FAR never enters the
    // intersection arithmetic
    let Some(first) = f.iter().position(|&x| x < FAR) else {
        d.iter_mut().for_each(|x| *x = FAR);
        return;
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if f[q] >= FAR {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k] {
                // k > 0 here: z[0] is -inf
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(mask: &[bool], w: usize, h: usize) -> Vec<f64> {
        let targets: Vec<(i64, i64)> = (0..w * h)
            .filter(|&i| mask[i])
            .map(|i| ((i % w) as i64, (i / w) as i64))
            .collect();
        (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as i64, (i / w) as i64);
                targets
                    .iter()
                    .map(|&(tx, ty)| ((tx - x).pow(2) + (ty - y).pow(2)) as f64)
                    .fold(FAR, f64::min)
            })
            .collect()
    }

    #[test]
    fn single_target() {
        let mut mask = vec![false; 25];
        mask[12] = true;
        let d = squared_distance_transform(&mask, 5, 5);
        assert_eq!(d[12], 0.0);
        assert_eq!(d[0], 8.0);
        assert_eq!(d[13], 1.0);
    }

    #[test]
    fn empty_mask_is_far() {
        let d = squared_distance_transform(&[false; 6], 3, 2);
        assert!(d.iter().all(|&x| x == FAR));
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            (w, h, mask) in (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
                (Just(w), Just(h), proptest::collection::vec(proptest::bool::weighted(0.1), w * h))
            })
        ) {
            prop_assert_eq!(squared_distance_transform(&mask, w, h), brute(&mask, w, h));
        }

        #[test]
        fn adding_targets_never_increases_distance(
            mask in proptest::collection::vec(proptest::bool::weighted(0.05), 400),
            extra in proptest::collection::vec(0usize..400, 1..10),
        ) {
            let before = squared_distance_transform(&mask, 20, 20);
            let mut more = mask.clone();
            for i in extra { more[i] = true; }
            let after = squared_distance_transform(&more, 20, 20);
            prop_assert!(before.iter().zip(&after).all(|(b, a)| a <= b));
        }
    }
}

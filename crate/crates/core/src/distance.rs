//! Exact squared Euclidean distance transform (two-phase, integer-only:
//! column scans followed by a lower-envelope pass along each row).

use crate::labelops::BinaryMask;

/// Marker for "no feature pixel reachable".
pub const UNREACHABLE: u64 = u64::MAX;

/// Vertical distance from each pixel to the nearest set pixel in its column,
/// capped at `w + h` (larger than any in-image distance).
fn column_distances(mask: &BinaryMask) -> Vec<i64> {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let inf = (w + h) as i64;
    let mut g = vec![inf; w * h];
    for x in 0..w {
        g[x] = if bits[x] { 0 } else { inf };
    }
    for y in 1..h {
        let (above, rest) = g.split_at_mut(y * w);
        let above = &above[(y - 1) * w..];
        for ((gx, &up), &set) in rest[..w].iter_mut().zip(above).zip(&bits[y * w..(y + 1) * w]) {
            *gx = if set { 0 } else { (up + 1).min(inf) };
        }
    }
    for y in (0..h.saturating_sub(1)).rev() {
        let (cur, below) = g.split_at_mut((y + 1) * w);
        for (gx, &down) in cur[y * w..].iter_mut().zip(&below[..w]) {
            *gx = (*gx).min(down + 1);
        }
    }
    g
}

/// Lower envelope of the parabolas `(x - i)² + g(i)²` along one row.
struct Envelope {
    g2: Vec<i64>,
    s: Vec<usize>,
    t: Vec<i64>,
}

impl Envelope {
    fn new(w: usize) -> Self {
        Envelope {
            g2: vec![0; w],
            s: vec![0; w],
            t: vec![0; w],
        }
    }

    /// Calls `emit(x, d²)` for every column of the row, right to left.
    fn scan(&mut self, row: &[i64], mut emit: impl FnMut(usize, u64)) {
        let w = row.len();
        for (r, &v) in self.g2.iter_mut().zip(row) {
            *r = v * v;
        }
        let (g2, s, t) = (&self.g2, &mut self.s, &mut self.t);
        let f = |x: i64, i: usize| (x - i as i64).pow(2) + g2[i];
        let sep = |i: usize, u: usize| {
            let (ii, uu) = (i as i64, u as i64);
            (uu * uu - ii * ii + g2[u] - g2[i]).div_euclid(2 * (uu - ii))
        };
        let mut q = 0usize;
        s[0] = 0;
        t[0] = 0;
        for u in 1..w {
            let mut empty = false;
            while f(t[q], s[q]) > f(t[q], u) {
                if q == 0 {
                    empty = true;
                    break;
                }
                q -= 1;
            }
            if empty {
                s[0] = u;
            } else {
                let wv = 1 + sep(s[q], u);
                if wv < w as i64 {
                    q += 1;
                    s[q] = u;
                    t[q] = wv;
                }
            }
        }
        for u in (0..w).rev() {
            emit(u, f(u as i64, s[q]) as u64);
            if q > 0 && u as i64 == t[q] {
                q -= 1;
            }
        }
    }
}

/// Squared distance from every pixel to the nearest set pixel of `mask`,
/// or [`UNREACHABLE`] everywhere when the mask is empty.
pub fn squared_edt(mask: &BinaryMask) -> Vec<u64> {
    let (w, h) = (mask.width(), mask.height());
    if mask.is_empty() {
        return vec![UNREACHABLE; w * h];
    }
    let g = column_distances(mask);
    let mut out = vec![0u64; w * h];
    let mut env = Envelope::new(w);
    for (row, dst) in g.chunks_exact(w).zip(out.chunks_exact_mut(w)) {
        env.scan(row, |x, d| dst[x] = d);
    }
    out
}

/// Largest squared distance from a set pixel of `query` to the nearest set
/// pixel of `features`; `None` when either mask is empty. Both masks must
/// have the same dimensions.
pub fn max_squared_distance(query: &BinaryMask, features: &BinaryMask) -> Option<u64> {
    let w = query.width();
    debug_assert_eq!((w, query.height()), (features.width(), features.height()));
    if query.is_empty() || features.is_empty() {
        return None;
    }
    let g = column_distances(features);
    let mut env = Envelope::new(w);
    let mut worst = 0u64;
    for (row, bits) in g.chunks_exact(w).zip(query.bits().chunks_exact(w)) {
        if !bits.contains(&true) {
            continue;
        }
        env.scan(row, |x, d| {
            if bits[x] && d > worst {
                worst = d;
            }
        });
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(mask: &BinaryMask) -> Vec<u64> {
        let pts = mask.points();
        (0..mask.height())
            .flat_map(|y| (0..mask.width()).map(move |x| (x, y)))
            .map(|(x, y)| {
                pts.iter()
                    .map(|&(px, py)| {
                        let dx = px.abs_diff(x) as u64;
                        let dy = py.abs_diff(y) as u64;
                        dx * dx + dy * dy
                    })
                    .min()
                    .unwrap_or(UNREACHABLE)
            })
            .collect()
    }

    #[test]
    fn matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..300 {
            let (w, h) = (rng.gen_range(1..20), rng.gen_range(1..20));
            let density = [0.01, 0.1, 0.5][trial % 3];
            let bits = (0..w * h).map(|_| rng.gen_bool(density)).collect();
            let m = BinaryMask::new(w, h, bits).unwrap();
            assert_eq!(squared_edt(&m), brute(&m), "trial {trial} {w}x{h}");
        }
    }

    #[test]
    fn directed_maximum_matches_field() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let (w, h) = (rng.gen_range(1..20), rng.gen_range(1..20));
            let mut mask = || BinaryMask::new(w, h, (0..w * h).map(|_| rng.gen_bool(0.1)).collect()).unwrap();
            let (a, b) = (mask(), mask());
            let expect = (!a.is_empty() && !b.is_empty()).then(|| {
                let field = brute(&b);
                a.points().iter().map(|&(x, y)| field[y * w + x]).max().unwrap()
            });
            assert_eq!(max_squared_distance(&a, &b), expect);
        }
    }

    #[test]
    fn empty_mask_is_unreachable() {
        let m = BinaryMask::zeros(3, 2);
        assert!(squared_edt(&m).iter().all(|&d| d == UNREACHABLE));
    }
}

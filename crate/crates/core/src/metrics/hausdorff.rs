use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distance::{max_squared_distance, squared_edt};
use crate::error::{Error, Result};
use crate::labelops::{ensure_same_dims, overlap_matrix, BinaryMask, InstanceMap, OverlapMatrix};

fn sq_dist(a: (usize, usize), b: (usize, usize)) -> u64 {
    let dx = a.0.abs_diff(b.0) as u64;
    let dy = a.1.abs_diff(b.1) as u64;
    dx * dx + dy * dy
}

fn directed_sq(a: &[(usize, usize)], b: &[(usize, usize)]) -> u64 {
    a.iter()
        .map(|&p| b.iter().map(|&q| sq_dist(p, q)).min().expect("nonempty"))
        .max()
        .expect("nonempty")
}

/// `sup_{x∈a} inf_{y∈b} |x - y|` by exhaustive search.
pub fn directed_hausdorff_exact(a: &[(usize, usize)], b: &[(usize, usize)]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("Hausdorff distance of an empty point set".into()));
    }
    Ok((directed_sq(a, b) as f64).sqrt())
}

/// Symmetric Hausdorff distance between pixel-centre sets, `O(|a|·|b|)`.
pub fn hausdorff_exact(a: &[(usize, usize)], b: &[(usize, usize)]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("Hausdorff distance of an empty point set".into()));
    }
    Ok((directed_sq(a, b).max(directed_sq(b, a)) as f64).sqrt())
}

/// Hausdorff distance between two masks via two exact distance transforms.
/// Returns the same value as [`hausdorff_exact`] on the masks' pixels.
pub fn hausdorff_fast(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    ensure_same_dims(a, b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("Hausdorff distance of an empty mask".into()));
    }
    let worst = |p: &BinaryMask, q: &BinaryMask| max_squared_distance(p, q).expect("nonempty");
    Ok((worst(a, b).max(worst(b, a)) as f64).sqrt())
}

/// How an object with no overlapping counterpart picks one for the Hausdorff term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HausdorffFallback {
    /// The opposite-side object at minimal Hausdorff distance.
    #[default]
    MinHausdorff,
    /// The opposite-side object with the nearest centroid.
    NearestCentroid,
}

impl fmt::Display for HausdorffFallback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HausdorffFallback::MinHausdorff => "min_hausdorff",
            HausdorffFallback::NearestCentroid => "nearest_centroid",
        })
    }
}

impl FromStr for HausdorffFallback {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min_hausdorff" => Ok(HausdorffFallback::MinHausdorff),
            "nearest_centroid" => Ok(HausdorffFallback::NearestCentroid),
            _ => Err(Error::config(format!(
                "unknown Hausdorff fallback `{s}` (min_hausdorff | nearest_centroid)"
            ))),
        }
    }
}

/// Area-weighted Hausdorff sums for one image (see [`super::DiceTerms`]).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HausdorffTerms {
    pub pred_area: u64,
    pub gt_area: u64,
    pub pred_side: f64,
    pub gt_side: f64,
    /// Image diagonal, the penalty when one side has no objects at all.
    pub diagonal: f64,
}

impl HausdorffTerms {
    /// Pools two images; the empty-side penalty becomes the larger diagonal.
    pub fn add(&mut self, other: &HausdorffTerms) {
        self.pred_area += other.pred_area;
        self.gt_area += other.gt_area;
        self.pred_side += other.pred_side;
        self.gt_side += other.gt_side;
        self.diagonal = self.diagonal.max(other.diagonal);
    }

    /// Both sides empty gives 0; exactly one side empty gives the diagonal.
    pub fn score(&self) -> f64 {
        match (self.pred_area, self.gt_area) {
            (0, 0) => 0.0,
            (0, _) | (_, 0) => self.diagonal,
            (pa, ga) => 0.5 * (self.pred_side / pa as f64 + self.gt_side / ga as f64),
        }
    }
}

struct Objects {
    pixels: Vec<Vec<(usize, usize)>>,
    fields: Vec<Vec<u64>>,
}

impl Objects {
    fn collect(map: &InstanceMap, ids: &[u32]) -> Objects {
        let mut lut = vec![usize::MAX; map.max_id() as usize + 1];
        for (i, &id) in ids.iter().enumerate() {
            lut[id as usize] = i;
        }
        let mut pixels = vec![Vec::new(); ids.len()];
        let w = map.width();
        for (i, &id) in map.ids().iter().enumerate() {
            if id != 0 {
                pixels[lut[id as usize]].push((i % w, i / w));
            }
        }
        let fields = pixels
            .iter()
            .map(|pts| squared_edt(&BinaryMask::from_points(w, map.height(), pts)))
            .collect();
        Objects { pixels, fields }
    }

    fn centroid(&self, i: usize) -> (f64, f64) {
        let n = self.pixels[i].len() as f64;
        let (sx, sy) = self.pixels[i]
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
        (sx / n, sy / n)
    }
}

fn pair_distance(objs_a: &Objects, a: usize, objs_b: &Objects, b: usize, width: usize) -> f64 {
    let worst = |pts: &[(usize, usize)], field: &[u64]| {
        pts.iter().map(|&(x, y)| field[y * width + x]).max().unwrap_or(0)
    };
    let ab = worst(&objs_a.pixels[a], &objs_b.fields[b]);
    let ba = worst(&objs_b.pixels[b], &objs_a.fields[a]);
    (ab.max(ba) as f64).sqrt()
}

fn counterpart_distance(
    mine: &Objects,
    i: usize,
    theirs: &Objects,
    best_overlap: Option<usize>,
    fallback: HausdorffFallback,
    width: usize,
    diagonal: f64,
) -> f64 {
    if let Some(j) = best_overlap {
        return pair_distance(mine, i, theirs, j, width);
    }
    if theirs.pixels.is_empty() {
        return diagonal;
    }
    match fallback {
        HausdorffFallback::MinHausdorff => (0..theirs.pixels.len())
            .map(|j| pair_distance(mine, i, theirs, j, width))
            .fold(f64::INFINITY, f64::min),
        HausdorffFallback::NearestCentroid => {
            let (cx, cy) = mine.centroid(i);
            let mut best = (0, f64::INFINITY);
            for j in 0..theirs.pixels.len() {
                let (tx, ty) = theirs.centroid(j);
                let d = (cx - tx).powi(2) + (cy - ty).powi(2);
                if d < best.1 {
                    best = (j, d);
                }
            }
            pair_distance(mine, i, theirs, best.0, width)
        }
    }
}

pub(crate) fn hausdorff_terms(
    pred: &InstanceMap,
    gt: &InstanceMap,
    o: &OverlapMatrix,
    fallback: HausdorffFallback,
) -> HausdorffTerms {
    let (w, h) = (pred.width(), pred.height());
    let diagonal = ((w * w + h * h) as f64).sqrt();
    let mut t = HausdorffTerms {
        pred_area: o.pred_areas.iter().sum(),
        gt_area: o.gt_areas.iter().sum(),
        diagonal,
        ..HausdorffTerms::default()
    };
    let preds = Objects::collect(pred, &o.pred_ids);
    let gts = Objects::collect(gt, &o.gt_ids);
    for p in 0..o.n_pred() {
        let d = counterpart_distance(&preds, p, &gts, o.best_gt(p), fallback, w, diagonal);
        t.pred_side += o.pred_areas[p] as f64 * d;
    }
    for g in 0..o.n_gt() {
        let d = counterpart_distance(&gts, g, &preds, o.best_pred(g), fallback, w, diagonal);
        t.gt_side += o.gt_areas[g] as f64 * d;
    }
    t
}

/// Object-level Hausdorff distance with the default (minimal-Hausdorff) fallback.
pub fn object_hausdorff(pred: &InstanceMap, gt: &InstanceMap) -> Result<f64> {
    object_hausdorff_with(pred, gt, HausdorffFallback::default())
}

pub fn object_hausdorff_with(
    pred: &InstanceMap,
    gt: &InstanceMap,
    fallback: HausdorffFallback,
) -> Result<f64> {
    let o = overlap_matrix(pred, gt)?;
    Ok(hausdorff_terms(pred, gt, &o, fallback).score())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_cases() {
        let a = [(0, 0), (1, 0)];
        assert_eq!(hausdorff_exact(&a, &a).unwrap(), 0.0);
        assert_eq!(hausdorff_exact(&[(0, 0)], &[(3, 4)]).unwrap(), 5.0);
        let one = [(0, 0)];
        let two = [(0, 0), (0, 9)];
        assert_eq!(directed_hausdorff_exact(&one, &two).unwrap(), 0.0);
        assert_eq!(directed_hausdorff_exact(&two, &one).unwrap(), 9.0);
        assert_eq!(hausdorff_exact(&one, &two).unwrap(), 9.0);
        assert!(matches!(hausdorff_exact(&[], &one), Err(Error::Domain(_))));
    }

    #[test]
    fn fast_single_pixels() {
        let a = BinaryMask::from_points(20, 20, &[(2, 3)]);
        let b = BinaryMask::from_points(20, 20, &[(14, 8)]);
        assert_eq!(hausdorff_fast(&a, &b).unwrap(), 13.0);
        assert_eq!(hausdorff_fast(&a, &a).unwrap(), 0.0);
        assert!(hausdorff_fast(&a, &BinaryMask::zeros(20, 20)).is_err());
    }

    #[test]
    fn translated_square_uses_fallback() {
        // 3x3 square at (0,0) vs the same square moved by (3,4): no overlap
        let mut gt = InstanceMap::zeros(10, 10);
        let mut pred = InstanceMap::zeros(10, 10);
        for y in 0..3 {
            for x in 0..3 {
                gt.set(x, y, 1);
                pred.set(x + 3, y + 4, 1);
            }
        }
        assert_eq!(object_hausdorff(&pred, &gt).unwrap(), 5.0);
        assert_eq!(
            object_hausdorff_with(&pred, &gt, HausdorffFallback::NearestCentroid).unwrap(),
            5.0
        );
    }

    #[test]
    fn empty_side_conventions() {
        let gt = InstanceMap::new(3, 4, vec![1; 12]).unwrap();
        let empty = InstanceMap::zeros(3, 4);
        assert_eq!(object_hausdorff(&gt, &gt).unwrap(), 0.0);
        assert_eq!(object_hausdorff(&empty, &empty).unwrap(), 0.0);
        assert_eq!(object_hausdorff(&empty, &gt).unwrap(), 5.0);
    }
}

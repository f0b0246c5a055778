use crate::error::Result;
use crate::labelops::{ensure_same_dims, overlap_matrix, BinaryMask, InstanceMap, OverlapMatrix};

/// `2|A∩B| / (|A|+|B|)`, and 1 when both masks are empty.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    ensure_same_dims(a, b)?;
    let (mut inter, mut na, mut nb) = (0u64, 0u64, 0u64);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        na += x as u64;
        nb += y as u64;
        inter += (x && y) as u64;
    }
    Ok(dice_from_counts(inter, na, nb))
}

pub(crate) fn dice_from_counts(inter: u64, na: u64, nb: u64) -> f64 {
    if na + nb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (na + nb) as f64
    }
}

/// Area-weighted Dice sums for one image, kept unnormalised so that images can
/// be pooled into a dataset score.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiceTerms {
    pub pred_area: u64,
    pub gt_area: u64,
    /// `Σ_i |S_i| · D(G(S_i), S_i)`
    pub pred_side: f64,
    /// `Σ_j |G_j| · D(G_j, S(G_j))`
    pub gt_side: f64,
}

impl DiceTerms {
    pub fn add(&mut self, other: &DiceTerms) {
        self.pred_area += other.pred_area;
        self.gt_area += other.gt_area;
        self.pred_side += other.pred_side;
        self.gt_side += other.gt_side;
    }

    /// Both sides empty gives 1; exactly one side empty gives 0.
    pub fn score(&self) -> f64 {
        match (self.pred_area, self.gt_area) {
            (0, 0) => 1.0,
            (0, _) | (_, 0) => 0.0,
            (pa, ga) => 0.5 * (self.pred_side / pa as f64 + self.gt_side / ga as f64),
        }
    }
}

pub(crate) fn dice_terms(o: &OverlapMatrix) -> DiceTerms {
    let mut t = DiceTerms {
        pred_area: o.pred_areas.iter().sum(),
        gt_area: o.gt_areas.iter().sum(),
        ..DiceTerms::default()
    };
    for p in 0..o.n_pred() {
        let d = o
            .best_gt(p)
            .map_or(0.0, |g| dice_from_counts(o.get(p, g), o.pred_areas[p], o.gt_areas[g]));
        t.pred_side += o.pred_areas[p] as f64 * d;
    }
    for g in 0..o.n_gt() {
        let d = o
            .best_pred(g)
            .map_or(0.0, |p| dice_from_counts(o.get(p, g), o.pred_areas[p], o.gt_areas[g]));
        t.gt_side += o.gt_areas[g] as f64 * d;
    }
    t
}

/// Object-level Dice: each object is compared with its maximal-overlap
/// counterpart, weighted by its share of its side's total area, and the two
/// sides are averaged.
pub fn object_dice(pred: &InstanceMap, gt: &InstanceMap) -> Result<f64> {
    Ok(dice_terms(&overlap_matrix(pred, gt)?).score())
}

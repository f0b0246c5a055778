use crate::error::Result;

use super::maps::{ensure_same_dims, InstanceMap};

/// Intersection pixel counts between predicted (rows) and ground-truth
/// (columns) instances, with both id lists in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapMatrix {
    pub pred_ids: Vec<u32>,
    pub gt_ids: Vec<u32>,
    pub pred_areas: Vec<u64>,
    pub gt_areas: Vec<u64>,
    counts: Vec<u64>,
}

impl OverlapMatrix {
    pub fn get(&self, pred: usize, gt: usize) -> u64 {
        self.counts[pred * self.gt_ids.len() + gt]
    }

    pub fn n_pred(&self) -> usize {
        self.pred_ids.len()
    }

    pub fn n_gt(&self) -> usize {
        self.gt_ids.len()
    }

    pub fn row(&self, pred: usize) -> &[u64] {
        let n = self.gt_ids.len();
        &self.counts[pred * n..(pred + 1) * n]
    }

    /// Ground-truth index with the largest overlap (ties to the lowest id),
    /// or `None` when the prediction touches no ground truth.
    pub fn best_gt(&self, pred: usize) -> Option<usize> {
        argmax_positive((0..self.n_gt()).map(|g| self.get(pred, g)))
    }

    /// Predicted index with the largest overlap (ties to the lowest id).
    pub fn best_pred(&self, gt: usize) -> Option<usize> {
        argmax_positive((0..self.n_pred()).map(|p| self.get(p, gt)))
    }
}

fn argmax_positive(values: impl Iterator<Item = u64>) -> Option<usize> {
    let mut best: Option<(usize, u64)> = None;
    for (i, v) in values.enumerate() {
        if v > 0 && best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Builds the overlap matrix in a single pass over the pixels.
pub fn overlap_matrix(pred: &InstanceMap, gt: &InstanceMap) -> Result<OverlapMatrix> {
    ensure_same_dims(pred, gt)?;
    let pred_ids = pred.instance_ids();
    let gt_ids = gt.instance_ids();
    let index = |ids: &[u32], max: u32| {
        let mut lut = vec![usize::MAX; max as usize + 1];
        for (i, &id) in ids.iter().enumerate() {
            lut[id as usize] = i;
        }
        lut
    };
    let plut = index(&pred_ids, pred.max_id());
    let glut = index(&gt_ids, gt.max_id());
    let ng = gt_ids.len();
    let mut counts = vec![0u64; pred_ids.len() * ng];
    let mut pred_areas = vec![0u64; pred_ids.len()];
    let mut gt_areas = vec![0u64; ng];
    for (&p, &g) in pred.ids().iter().zip(gt.ids()) {
        if p != 0 {
            pred_areas[plut[p as usize]] += 1;
        }
        if g != 0 {
            gt_areas[glut[g as usize]] += 1;
        }
        if p != 0 && g != 0 {
            counts[plut[p as usize] * ng + glut[g as usize]] += 1;
        }
    }
    Ok(OverlapMatrix {
        pred_ids,
        gt_ids,
        pred_areas,
        gt_areas,
        counts,
    })
}

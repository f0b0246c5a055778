use serde::Serialize;

use crate::error::Result;
use crate::labelops::{overlap_matrix, InstanceMap, OverlapMatrix};

/// One-to-one pairing of predicted and ground-truth objects under the
/// "covers more than half of a ground-truth object" rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchAssignment {
    pub pred_ids: Vec<u32>,
    pub gt_ids: Vec<u32>,
    /// For each predicted object (ascending id), the matched ground-truth id.
    pub pred_match: Vec<Option<u32>>,
    /// For each ground-truth object (ascending id), the matched predicted id.
    pub gt_match: Vec<Option<u32>>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionScore {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub assignment: MatchAssignment,
}

/// Precision, recall and F1 from counts; each ratio is 0 when its denominator is.
pub fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (f1, precision, recall)
}

pub(crate) fn match_objects(o: &OverlapMatrix) -> MatchAssignment {
    let mut order: Vec<usize> = (0..o.n_pred()).collect();
    // largest predictions first; equal areas keep ascending id order
    order.sort_by(|&a, &b| o.pred_areas[b].cmp(&o.pred_areas[a]).then(a.cmp(&b)));
    let mut pred_match = vec![None; o.n_pred()];
    let mut gt_match = vec![None; o.n_gt()];
    for p in order {
        let mut best: Option<(usize, u64)> = None;
        for g in 0..o.n_gt() {
            let inter = o.get(p, g);
            let eligible = gt_match[g].is_none() && 2 * inter > o.gt_areas[g];
            if eligible && best.map_or(true, |(_, b)| inter > b) {
                best = Some((g, inter));
            }
        }
        if let Some((g, _)) = best {
            pred_match[p] = Some(o.gt_ids[g]);
            gt_match[g] = Some(o.pred_ids[p]);
        }
    }
    let tp = pred_match.iter().filter(|m| m.is_some()).count();
    MatchAssignment {
        pred_ids: o.pred_ids.clone(),
        gt_ids: o.gt_ids.clone(),
        fp: o.n_pred() - tp,
        fn_: o.n_gt() - tp,
        tp,
        pred_match,
        gt_match,
    }
}

/// Object detection F1: a prediction is a true positive when it covers more
/// than 50% of an unmatched ground-truth object's area.
pub fn f1_detection(pred: &InstanceMap, gt: &InstanceMap) -> Result<DetectionScore> {
    let o = overlap_matrix(pred, gt)?;
    let assignment = match_objects(&o);
    let (f1, precision, recall) = f1_from_counts(assignment.tp, assignment.fp, assignment.fn_);
    Ok(DetectionScore {
        f1,
        precision,
        recall,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks(w: usize, h: usize, rects: &[(u32, usize, usize, usize, usize)]) -> InstanceMap {
        let mut m = InstanceMap::zeros(w, h);
        for &(id, x0, y0, x1, y1) in rects {
            for y in y0..y1 {
                for x in x0..x1 {
                    m.set(x, y, id);
                }
            }
        }
        m
    }

    #[test]
    fn identical_maps_score_one() {
        let m = blocks(10, 10, &[(1, 0, 0, 3, 3), (2, 5, 5, 9, 9), (3, 0, 6, 2, 9)]);
        let s = f1_detection(&m, &m).unwrap();
        assert_eq!((s.f1, s.assignment.tp), (1.0, 3));
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let gt = blocks(6, 6, &[(1, 0, 0, 3, 3)]);
        let s = f1_detection(&InstanceMap::zeros(6, 6), &gt).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        assert_eq!(s.assignment.fn_, 1);
    }

    #[test]
    fn fifty_one_percent_is_enough_fifty_is_not() {
        let gt = blocks(10, 10, &[(1, 0, 0, 10, 10)]);
        let mut pred = blocks(10, 10, &[(1, 0, 0, 10, 5)]);
        pred.set(0, 5, 1);
        let s = f1_detection(&pred, &gt).unwrap();
        assert_eq!(s.assignment.tp, 1);
        let half = blocks(10, 10, &[(1, 0, 0, 10, 5)]);
        let s = f1_detection(&half, &gt).unwrap();
        assert_eq!((s.assignment.tp, s.assignment.fp, s.assignment.fn_), (0, 1, 1));
    }

    #[test]
    fn counts_balance() {
        let gt = blocks(12, 12, &[(1, 0, 0, 4, 4), (2, 6, 6, 12, 12)]);
        let pred = blocks(12, 12, &[(5, 0, 0, 4, 3), (6, 6, 0, 8, 2), (7, 9, 9, 10, 10)]);
        let a = f1_detection(&pred, &gt).unwrap().assignment;
        assert_eq!(a.tp + a.fp, 3);
        assert_eq!(a.tp + a.fn_, 2);
        assert_eq!(a.pred_match, vec![Some(1), None, None]);
    }
}

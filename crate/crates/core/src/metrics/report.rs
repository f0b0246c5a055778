use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::labelops::{overlap_matrix, InstanceMap};

use super::dice::{dice_terms, DiceTerms};
use super::f1::{f1_from_counts, match_objects};
use super::hausdorff::{hausdorff_terms, HausdorffFallback, HausdorffTerms};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub hausdorff_fallback: HausdorffFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub id: String,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub object_dice: f64,
    pub object_hausdorff: f64,
    pub n_s: usize,
    pub n_g: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub missing_prediction: bool,
}

/// Split-level scores: detection counts pooled before F1, object metrics
/// weighted over every object of the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub object_dice: f64,
    pub object_hausdorff: f64,
    pub n_s: usize,
    pub n_g: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub images: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_image: Vec<ImageMetrics>,
    pub dataset: DatasetMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Per-image metrics together with the unnormalised object terms used for pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEvaluation {
    pub metrics: ImageMetrics,
    pub dice: DiceTerms,
    pub hausdorff: HausdorffTerms,
}

pub fn evaluate_image(
    id: &str,
    pred: &InstanceMap,
    gt: &InstanceMap,
    opts: EvalOptions,
) -> Result<ImageEvaluation> {
    let o = overlap_matrix(pred, gt)?;
    let m = match_objects(&o);
    let (f1, precision, recall) = f1_from_counts(m.tp, m.fp, m.fn_);
    let dice = dice_terms(&o);
    let hausdorff = hausdorff_terms(pred, gt, &o, opts.hausdorff_fallback);
    Ok(ImageEvaluation {
        metrics: ImageMetrics {
            id: id.to_string(),
            f1,
            precision,
            recall,
            object_dice: dice.score(),
            object_hausdorff: hausdorff.score(),
            n_s: o.n_pred(),
            n_g: o.n_gt(),
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
            missing_prediction: false,
        },
        dice,
        hausdorff,
    })
}

/// One ground-truth image and its prediction, if any.
#[derive(Debug, Clone, Copy)]
pub struct EvalItem<'a> {
    pub id: &'a str,
    pub pred: Option<&'a InstanceMap>,
    pub gt: &'a InstanceMap,
}

/// Evaluates a split. A missing prediction is scored as an empty map: its
/// ground-truth objects count as false negatives and a warning is recorded.
pub fn evaluate_dataset(items: &[EvalItem<'_>], opts: EvalOptions) -> Result<MetricsReport> {
    let evals = items
        .par_iter()
        .map(|item| {
            let empty;
            let pred = match item.pred {
                Some(p) => p,
                None => {
                    empty = InstanceMap::zeros(item.gt.width(), item.gt.height());
                    &empty
                }
            };
            let mut e = evaluate_image(item.id, pred, item.gt, opts)?;
            e.metrics.missing_prediction = item.pred.is_none();
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut dice = DiceTerms::default();
    let mut hausdorff = HausdorffTerms::default();
    let (mut tp, mut fp, mut fn_, mut n_s, mut n_g) = (0, 0, 0, 0, 0);
    let mut warnings = Vec::new();
    for e in &evals {
        dice.add(&e.dice);
        hausdorff.add(&e.hausdorff);
        tp += e.metrics.tp;
        fp += e.metrics.fp;
        fn_ += e.metrics.fn_;
        n_s += e.metrics.n_s;
        n_g += e.metrics.n_g;
        if e.metrics.missing_prediction {
            warnings.push(format!(
                "no prediction for `{}`: scored as an empty map",
                e.metrics.id
            ));
        }
    }
    let (f1, precision, recall) = f1_from_counts(tp, fp, fn_);
    Ok(MetricsReport {
        dataset: DatasetMetrics {
            f1,
            precision,
            recall,
            object_dice: dice.score(),
            object_hausdorff: hausdorff.score(),
            n_s,
            n_g,
            tp,
            fp,
            fn_,
            images: evals.len(),
        },
        per_image: evals.into_iter().map(|e| e.metrics).collect(),
        config_hash: None,
        warnings,
    })
}

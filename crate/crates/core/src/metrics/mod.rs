//! Evaluation: detection F1, object-level Dice and Hausdorff (with an exact
//! reference and a distance-transform fast path), split-level reports and
//! contest-style rank aggregation.

mod dice;
mod f1;
mod hausdorff;
mod rank;
mod report;

pub use dice::{dice, object_dice, DiceTerms};
pub use f1::{f1_detection, f1_from_counts, DetectionScore, MatchAssignment};
pub use hausdorff::{
    directed_hausdorff_exact, hausdorff_exact, hausdorff_fast, object_hausdorff,
    object_hausdorff_with, HausdorffFallback, HausdorffTerms,
};
pub use rank::{
    aggregate_ranks, default_split_weights, rank_aggregate, Column, MethodScores, Metric,
    RankRow, RankTable, ScoreGrid, TieRule,
};
pub use report::{
    evaluate_dataset, evaluate_image, DatasetMetrics, EvalItem, EvalOptions, ImageEvaluation,
    ImageMetrics, MetricsReport,
};

//! Scores a prediction that merges two touching glands against the ground
//! truth, then the ground truth against itself.

use glandseg::cli::{generate, SynthConfig};
use glandseg::labelops::InstanceMap;
use glandseg::metrics::{evaluate_dataset, EvalItem, EvalOptions};

fn merge_first_pair(labels: &InstanceMap) -> InstanceMap {
    let ids = labels.ids().iter().map(|&id| if id == 2 { 1 } else { id }).collect();
    InstanceMap::new(labels.width(), labels.height(), ids)
        .expect("same size")
        .relabel_dense()
}

fn main() -> glandseg::Result<()> {
    let synth = SynthConfig {
        touching: 1.0,
        ..SynthConfig::default()
    };
    let s = generate(&synth, 5, 0)?;
    let merged = merge_first_pair(&s.labels);
    for (name, pred) in [("merged pair", &merged), ("ground truth", &s.labels)] {
        let report = evaluate_dataset(
            &[EvalItem {
                id: &s.id,
                pred: Some(pred),
                gt: &s.labels,
            }],
            EvalOptions::default(),
        )?;
        let d = &report.dataset;
        println!(
            "{name:<13} objects {}/{}  F1 {:.3}  object Dice {:.3}  object Hausdorff {:.2}",
            d.n_s, d.n_g, d.f1, d.object_dice, d.object_hausdorff
        );
    }
    Ok(())
}

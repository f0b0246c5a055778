//! Rank sums and weighted rank sums for a few methods scored on two test
//! splits.

use glandseg::metrics::{
    default_split_weights, rank_aggregate, Column, Metric, MethodScores, ScoreGrid, TieRule,
};

fn main() -> glandseg::Result<()> {
    let columns = [Metric::F1, Metric::ObjectDice, Metric::ObjectHausdorff]
        .into_iter()
        .flat_map(|m| ["testA", "testB"].map(|s| Column::new(m, s)))
        .collect();
    let row = |name: &str, s: [f64; 6]| MethodScores {
        name: name.into(),
        scores: s.iter().copied().map(Some).collect(),
    };
    let grid = ScoreGrid {
        columns,
        methods: vec![
            row("baseline", [0.79, 0.76, 0.81, 0.80, 95.1, 146.2]),
            row("dilated", [0.85, 0.80, 0.88, 0.83, 62.2, 118.7]),
            row("multichannel", [0.89, 0.84, 0.91, 0.83, 44.1, 116.8]),
            row("contour-aware", [0.91, 0.72, 0.90, 0.78, 45.4, 160.3]),
        ],
    };
    let table = rank_aggregate(&grid, &default_split_weights(), TieRule::Min)?;
    print!("{}", table.to_text());
    Ok(())
}

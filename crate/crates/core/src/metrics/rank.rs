use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three contest indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    F1,
    ObjectDice,
    ObjectHausdorff,
}

impl Metric {
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::ObjectHausdorff)
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::F1 => "F1 Score",
            Metric::ObjectDice => "ObjectDice",
            Metric::ObjectHausdorff => "ObjectHausdorff",
        }
    }
}

/// One ranked column: a metric evaluated on one test split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub metric: Metric,
    pub split: String,
}

impl Column {
    pub fn new(metric: Metric, split: impl Into<String>) -> Self {
        Column {
            metric,
            split: split.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub name: String,
    /// One entry per column; `None` marks a missing score.
    pub scores: Vec<Option<f64>>,
}

/// Scores of several methods on a common set of columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreGrid {
    pub columns: Vec<Column>,
    pub methods: Vec<MethodScores>,
}

/// How equal scores share ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Competition ranking: tied methods all take the smallest rank ("1224").
    #[default]
    Min,
    /// Tied methods are ranked in listing order ("1234").
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    pub ranks: Vec<u32>,
    pub rank_sum: u32,
    pub weighted_rank_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub columns: Vec<Column>,
    pub weights: BTreeMap<String, f64>,
    pub tie_rule: TieRule,
    pub rows: Vec<RankRow>,
    /// Human-readable notes on ties encountered while ranking.
    pub ties: Vec<String>,
}

/// Split weights of the weighted rank sum: 3/4 for test A and 1/4 for test B.
pub fn default_split_weights() -> BTreeMap<String, f64> {
    BTreeMap::from([("testA".to_string(), 0.75), ("testB".to_string(), 0.25)])
}

fn rank_column(values: &[f64], higher_is_better: bool, rule: TieRule) -> (Vec<u32>, bool) {
    let better = |a: f64, b: f64| if higher_is_better { a > b } else { a < b };
    let mut tied = false;
    let ranks = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let strictly_better = values.iter().filter(|&&o| better(o, v)).count();
            let equal_before = values[..i].iter().filter(|&&o| o == v).count();
            tied |= values.iter().enumerate().any(|(j, &o)| j != i && o == v);
            let r = match rule {
                TieRule::Min => strictly_better,
                TieRule::Ordinal => strictly_better + equal_before,
            };
            r as u32 + 1
        })
        .collect();
    (ranks, tied)
}

fn weighted_sum(columns: &[Column], ranks: &[u32], weights: &BTreeMap<String, f64>) -> Result<f64> {
    let mut per_split: Vec<(&str, u32)> = Vec::new();
    for (c, &r) in columns.iter().zip(ranks) {
        match per_split.iter_mut().find(|(s, _)| *s == c.split) {
            Some((_, sum)) => *sum += r,
            None => per_split.push((&c.split, r)),
        }
    }
    per_split.iter().try_fold(0.0, |acc, (split, sum)| {
        let w = weights
            .get(*split)
            .ok_or_else(|| Error::config(format!("no weight given for split `{split}`")))?;
        Ok(acc + w * *sum as f64)
    })
}

/// Rank sums and weighted rank sums from already-assigned ranks.
pub fn aggregate_ranks(
    columns: &[Column],
    rows: &[(String, Vec<u32>)],
    weights: &BTreeMap<String, f64>,
) -> Result<RankTable> {
    let rows = rows
        .iter()
        .map(|(name, ranks)| {
            if ranks.len() != columns.len() {
                return Err(Error::data(format!(
                    "method `{name}` has {} ranks for {} columns",
                    ranks.len(),
                    columns.len()
                )));
            }
            Ok(RankRow {
                name: name.clone(),
                scores: None,
                rank_sum: ranks.iter().sum(),
                weighted_rank_sum: weighted_sum(columns, ranks, weights)?,
                ranks: ranks.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankTable {
        columns: columns.to_vec(),
        weights: weights.clone(),
        tie_rule: TieRule::default(),
        rows,
        ties: Vec::new(),
    })
}

/// Ranks every column (F1 and Dice descending, Hausdorff ascending) and
/// aggregates the ranks per method.
pub fn rank_aggregate(
    grid: &ScoreGrid,
    weights: &BTreeMap<String, f64>,
    rule: TieRule,
) -> Result<RankTable> {
    let ncol = grid.columns.len();
    let mut scores = Vec::with_capacity(grid.methods.len());
    for m in &grid.methods {
        if m.scores.len() != ncol {
            return Err(Error::data(format!(
                "method `{}` has {} scores for {ncol} columns",
                m.name,
                m.scores.len()
            )));
        }
        let row = m
            .scores
            .iter()
            .zip(&grid.columns)
            .map(|(s, c)| {
                s.filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::data(format!(
                        "method `{}` is missing a {} score on {}",
                        m.name,
                        c.metric.label(),
                        c.split
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        scores.push(row);
    }
    let mut ranks = vec![vec![0u32; ncol]; scores.len()];
    let mut ties = Vec::new();
    for (c, col) in grid.columns.iter().enumerate() {
        let values: Vec<f64> = scores.iter().map(|r| r[c]).collect();
        let (r, tied) = rank_column(&values, col.metric.higher_is_better(), rule);
        if tied {
            ties.push(format!("tied scores in {} {}", col.metric.label(), col.split));
        }
        for (m, rank) in r.into_iter().enumerate() {
            ranks[m][c] = rank;
        }
    }
    let named: Vec<(String, Vec<u32>)> = grid
        .methods
        .iter()
        .zip(ranks)
        .map(|(m, r)| (m.name.clone(), r))
        .collect();
    let mut table = aggregate_ranks(&grid.columns, &named, weights)?;
    for (row, s) in table.rows.iter_mut().zip(scores) {
        row.scores = Some(s);
    }
    table.tie_rule = rule;
    table.ties = ties;
    Ok(table)
}

impl RankTable {
    pub fn row(&self, name: &str) -> Option<&RankRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Aligned plain-text rendering: one line per method, score/rank pairs per
    /// column, then the rank sum and weighted rank sum.
    pub fn to_text(&self) -> String {
        let mut header = vec!["Method".to_string()];
        for c in &self.columns {
            header.push(format!("{} {}", c.metric.label(), c.split));
            header.push("Rank".to_string());
        }
        header.push("Rank Sum".to_string());
        header.push("Weighted Rank Sum".to_string());
        let mut lines = vec![header];
        for r in &self.rows {
            let mut cells = vec![r.name.clone()];
            for (i, rank) in r.ranks.iter().enumerate() {
                cells.push(
                    r.scores
                        .as_ref()
                        .map_or_else(|| "-".to_string(), |s| format!("{}", s[i])),
                );
                cells.push(rank.to_string());
            }
            cells.push(r.rank_sum.to_string());
            cells.push(format!("{}", r.weighted_rank_sum));
            lines.push(cells);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, l) in lines.iter().enumerate() {
            let cells: Vec<String> = l
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| {
                    if c == 0 {
                        format!("{s:<w$}")
                    } else {
                        format!("{s:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
            if i == 0 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 3 * (widths.len() - 1)));
            }
        }
        for t in &self.ties {
            let _ = writeln!(out, "note: {t} ({:?} tie rule)", self.tie_rule);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn six_columns() -> Vec<Column> {
        [Metric::F1, Metric::ObjectDice, Metric::ObjectHausdorff]
            .iter()
            .flat_map(|&m| [Column::new(m, "testA"), Column::new(m, "testB")])
            .collect()
    }

    #[test]
    fn tie_rules() {
        let (r, tied) = rank_column(&[0.9, 0.8, 0.8, 0.7], true, TieRule::Min);
        assert_eq!((r, tied), (vec![1, 2, 2, 4], true));
        let (r, _) = rank_column(&[0.9, 0.8, 0.8, 0.7], true, TieRule::Ordinal);
        assert_eq!(r, vec![1, 2, 3, 4]);
        let (r, tied) = rank_column(&[50.0, 40.0, 60.0], false, TieRule::Min);
        assert_eq!((r, tied), (vec![2, 1, 3], false));
    }

    #[test]
    fn weighted_sum_groups_by_split() {
        // column order F1 A, F1 B, Dice A, Dice B, Hd A, Hd B
        let t = aggregate_ranks(
            &six_columns(),
            &[("m".into(), vec![11, 4, 11, 4, 11, 4])],
            &default_split_weights(),
        )
        .unwrap();
        assert_eq!(t.rows[0].rank_sum, 45);
        assert_eq!(t.rows[0].weighted_rank_sum, 27.75);
    }

    #[test]
    fn missing_score_and_weight_are_errors() {
        let grid = ScoreGrid {
            columns: vec![Column::new(Metric::F1, "testA")],
            methods: vec![
                MethodScores {
                    name: "a".into(),
                    scores: vec![Some(0.5)],
                },
                MethodScores {
                    name: "b".into(),
                    scores: vec![None],
                },
            ],
        };
        let err = rank_aggregate(&grid, &default_split_weights(), TieRule::Min).unwrap_err();
        assert!(err.to_string().contains("`b`"), "{err}");
        let weights = BTreeMap::from([("testB".to_string(), 1.0)]);
        let mut ok = grid.clone();
        ok.methods[1].scores[0] = Some(0.4);
        assert!(rank_aggregate(&ok, &weights, TieRule::Min).is_err());
    }
}

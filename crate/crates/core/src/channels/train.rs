use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::diffnet::{seeded_rng, Graph, NetworkParams, Sgd, Tensor, Var};
use crate::error::{Error, Result};
use crate::labelops::{dilate, edge_labels, instance_contacts, InstanceMap};

use super::config::{PipelineConfig, TrainConfig};
use super::nets::{
    edge_logits, fusion_logits, init_edge, init_fusion, init_seg, seg_logits, EdgeVars,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Seg,
    Edge,
    Fusion,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Seg => "seg",
            ChannelKind::Edge => "edge",
            ChannelKind::Fusion => "fusion",
        })
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seg" => Ok(ChannelKind::Seg),
            "edge" => Ok(ChannelKind::Edge),
            "fusion" => Ok(ChannelKind::Fusion),
            _ => Err(Error::config(format!("unknown channel `{s}` (seg | edge | fusion)"))),
        }
    }
}

/// One training pair. `input` is the zero-mean image for seg/edge and the
/// channel bundle tensor for fusion.
#[derive(Debug, Clone)]
pub struct Example {
    pub id: String,
    pub input: Tensor,
    pub labels: InstanceMap,
}

/// Per-pixel supervision.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Classes(Vec<usize>),
    Edges(Vec<bool>),
}

/// Seg: foreground. Edge: dilated instance edges. Fusion: foreground with
/// the contacts between touching instances carved out, so that connected
/// components of the fused mask separate them.
pub fn training_target(kind: ChannelKind, cfg: &PipelineConfig, labels: &InstanceMap) -> Result<Target> {
    Ok(match kind {
        ChannelKind::Seg => Target::Classes(labels.ids().iter().map(|&id| usize::from(id != 0)).collect()),
        ChannelKind::Edge => Target::Edges(edge_labels(labels, cfg.edge_radius)?.bits().to_vec()),
        ChannelKind::Fusion => {
            let gap = dilate(&instance_contacts(labels), cfg.fusion_gap)?;
            Target::Classes(
                labels
                    .ids()
                    .iter()
                    .zip(gap.bits())
                    .map(|(&id, &g)| usize::from(id != 0 && !g))
                    .collect(),
            )
        }
    })
}

pub fn init_channel(kind: ChannelKind, cfg: &PipelineConfig, seed: u64) -> Result<NetworkParams> {
    let mut rng = seeded_rng(seed);
    match kind {
        ChannelKind::Seg => init_seg(&cfg.seg, &mut rng),
        ChannelKind::Edge => init_edge(&cfg.edge, &mut rng),
        ChannelKind::Fusion => init_fusion(&cfg.fusion, &mut rng),
    }
}

/// Balanced edge loss per pixel: fused term plus, optionally, every side term.
pub fn edge_loss(g: &mut Graph, vars: &EdgeVars, edges: &[bool], include_sides: bool) -> Result<Var> {
    let mut terms = vec![g.balanced_bce(vars.fused, edges)?];
    if include_sides {
        for &s in &vars.sides {
            terms.push(g.balanced_bce(s, edges)?);
        }
    }
    let total = g.sum(&terms)?;
    Ok(g.scale(total, 1.0 / edges.len() as f64))
}

/// Records the scalar training loss of one channel on one example.
pub fn channel_loss(
    g: &mut Graph,
    params: &NetworkParams,
    cfg: &PipelineConfig,
    kind: ChannelKind,
    input: &Tensor,
    target: &Target,
) -> Result<Var> {
    let (_, h, w) = input.dims3()?;
    let x = g.input(input.clone());
    match (kind, target) {
        (ChannelKind::Seg, Target::Classes(t)) => {
            let logits = seg_logits(g, params, &cfg.seg, x, h, w)?;
            g.cross_entropy(logits, t)
        }
        (ChannelKind::Fusion, Target::Classes(t)) => {
            let logits = fusion_logits(g, params, &cfg.fusion, x)?;
            g.cross_entropy(logits, t)
        }
        (ChannelKind::Edge, Target::Edges(t)) => {
            let vars = edge_logits(g, params, &cfg.edge, x, h, w)?;
            edge_loss(g, &vars, t, true)
        }
        _ => Err(Error::Internal(format!("target kind does not match the {kind} channel"))),
    }
}

/// Mean training loss over one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub channel: ChannelKind,
    pub epoch: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub params: NetworkParams,
    pub curve: Vec<EpochLoss>,
}

pub fn train_config(cfg: &PipelineConfig, kind: ChannelKind) -> &TrainConfig {
    match kind {
        ChannelKind::Seg => &cfg.seg_train,
        ChannelKind::Edge => &cfg.edge_train,
        ChannelKind::Fusion => &cfg.fusion_train,
    }
}

/// Per-example SGD over seeded shuffles. Deterministic given `seed`.
pub fn train_channel(
    examples: &[Example],
    cfg: &PipelineConfig,
    kind: ChannelKind,
    seed: u64,
) -> Result<Trained> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::data(format!("no training examples for the {kind} channel")));
    }
    let tc = train_config(cfg, kind);
    let targets = examples
        .iter()
        .map(|e| {
            let (_, h, w) = e.input.dims3()?;
            if (w, h) != (e.labels.width(), e.labels.height()) {
                return Err(Error::data(format!(
                    "{}: input is {w}x{h} but labels are {}x{}",
                    e.id,
                    e.labels.width(),
                    e.labels.height()
                )));
            }
            training_target(kind, cfg, &e.labels)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut params = init_channel(kind, cfg, seed)?;
    let mut sgd = Sgd::new(tc.lr, tc.momentum);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = seeded_rng(seed.wrapping_add(1));
    let mut curve = Vec::with_capacity(tc.epochs);
    let mut step = 0;
    for epoch in 0..tc.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            params.zero_grads();
            let mut g = Graph::new();
            let loss = channel_loss(&mut g, &params, cfg, kind, &examples[i].input, &targets[i])?;
            let value = g.value(loss).values()[0];
            if !value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    loss: value,
                });
            }
            g.backward(loss)?;
            g.accumulate_param_grads(&mut params)?;
            sgd.step(&mut params)?;
            if !params.all_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    loss: value,
                });
            }
            total += value;
            step += 1;
        }
        let mean_loss = total / examples.len() as f64;
        log::debug!("{kind} epoch {epoch}: loss {mean_loss:.6}");
        curve.push(EpochLoss {
            channel: kind,
            epoch,
            mean_loss,
        });
    }
    Ok(Trained { params, curve })
}

/// Fraction of pixels where `P(fg) > 0.5` agrees with the class target.
pub fn pixel_accuracy(fg_prob: &[f64], target: &[usize]) -> f64 {
    let hits = fg_prob
        .iter()
        .zip(target)
        .filter(|(&p, &t)| usize::from(p > 0.5) == t)
        .count();
    hits as f64 / target.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (PipelineConfig, Example) {
        let mut cfg = PipelineConfig::default();
        cfg.seg = "conv 3->4 k3 d1; relu; pool w2 s2; conv 4->2 k3 d2".parse().unwrap();
        cfg.edge = "conv 3->4 k3 d1; relu | pool w2 s2; conv 4->4 k3 d1".parse().unwrap();
        cfg.fusion = "conv 3->4 k3 d1; relu; conv 4->2 k1 d1".parse().unwrap();
        for t in [&mut cfg.seg_train, &mut cfg.edge_train, &mut cfg.fusion_train] {
            t.epochs = 2;
        }
        let (w, h) = (12, 10);
        let ids = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if (2..6).contains(&x) && (2..8).contains(&y) {
                    1
                } else if (6..10).contains(&x) && (2..8).contains(&y) {
                    2
                } else {
                    0
                }
            })
            .collect();
        let labels = InstanceMap::new(w, h, ids).unwrap();
        let v = (0..3 * w * h).map(|i| ((i * 31) % 17) as f64 / 8.0 - 1.0).collect();
        let input = Tensor::new(vec![3, h, w], v).unwrap();
        (cfg, Example { id: "t".into(), input, labels })
    }

    #[test]
    fn fusion_target_splits_touching_pair() {
        let (cfg, ex) = tiny();
        let Target::Classes(t) = training_target(ChannelKind::Fusion, &cfg, &ex.labels).unwrap() else {
            panic!()
        };
        let w = ex.labels.width();
        // contact columns 5 and 6, widened by the gap radius
        for x in 4..8 {
            assert_eq!(t[4 * w + x], 0, "x={x}");
        }
        assert_eq!(t[4 * w + 2], 1);
    }

    #[test]
    fn zero_lr_keeps_init_and_runs_are_deterministic() {
        let (mut cfg, ex) = tiny();
        for kind in [ChannelKind::Seg, ChannelKind::Edge, ChannelKind::Fusion] {
            cfg.seg_train.lr = 0.0;
            cfg.edge_train.lr = 0.0;
            cfg.fusion_train.lr = 0.0;
            let init = init_channel(kind, &cfg, 9).unwrap();
            let t = train_channel(std::slice::from_ref(&ex), &cfg, kind, 9).unwrap();
            assert_eq!(t.params.to_bytes(), init.to_bytes(), "{kind}");
            assert_eq!(t.curve.len(), 2);
        }
        let (cfg, ex) = tiny();
        let a = train_channel(std::slice::from_ref(&ex), &cfg, ChannelKind::Edge, 4).unwrap();
        let b = train_channel(std::slice::from_ref(&ex), &cfg, ChannelKind::Edge, 4).unwrap();
        assert_eq!(a.params.to_bytes(), b.params.to_bytes());
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn huge_lr_diverges() {
        let (mut cfg, ex) = tiny();
        cfg.seg_train.lr = 1e200;
        cfg.seg_train.epochs = 5;
        let err = train_channel(std::slice::from_ref(&ex), &cfg, ChannelKind::Seg, 1).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }
}

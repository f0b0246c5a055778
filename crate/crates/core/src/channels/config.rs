use std::fmt;
use std::str::FromStr;

use crate::diffnet::{LayerSpec, Sequential};
use crate::error::{Error, Result};

/// Edge network: `M` stages in sequence, each feeding a 1×1 side output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSchedule {
    pub stages: Vec<Sequential>,
}

impl EdgeSchedule {
    pub fn side_count(&self) -> usize {
        self.stages.len()
    }

    /// Returns the output width of every stage.
    pub fn validate(&self, in_channels: usize) -> Result<Vec<usize>> {
        if self.stages.is_empty() {
            return Err(Error::config("edge network needs at least one side output"));
        }
        let mut ch = in_channels;
        let mut widths = Vec::new();
        for (m, s) in self.stages.iter().enumerate() {
            if s.layers.is_empty() {
                return Err(Error::config(format!("edge stage {m} is empty")));
            }
            if s.layers.iter().any(|l| matches!(l, LayerSpec::Softmax)) {
                return Err(Error::config(format!("edge stage {m} must not contain softmax")));
            }
            ch = s
                .validate(ch)
                .map_err(|e| Error::config(format!("edge stage {m}: {e}")))?;
            widths.push(ch);
        }
        Ok(widths)
    }
}

/// Stages are separated by `|`.
impl fmt::Display for EdgeSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.stages.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" | "))
    }
}

impl FromStr for EdgeSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let stages = s
            .split('|')
            .map(str::parse)
            .collect::<Result<Vec<Sequential>>>()?;
        Ok(EdgeSchedule { stages })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
}

/// Network schedules and post-processing for the three channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Maps a 3-channel image to 2 logits, at any resolution.
    pub seg: Sequential,
    pub edge: EdgeSchedule,
    /// Maps the 3-channel bundle to 2 logits at full resolution.
    pub fusion: Sequential,
    /// Disk radius applied to edge labels (0 = one-pixel edges).
    pub edge_radius: f64,
    /// Disk radius by which touching-instance contacts are carved out of the
    /// fusion target.
    pub fusion_gap: f64,
    pub threshold: f64,
    pub min_area: usize,
    pub seg_train: TrainConfig,
    pub edge_train: TrainConfig,
    pub fusion_train: TrainConfig,
}

pub const DEFAULT_SEG: &str = "conv 3->8 k3 d1; relu; conv 8->8 k3 d1; relu; pool w2 s2; \
     conv 8->12 k3 d1; relu; pool w3 s1 p1; conv 12->12 k3 d2; relu; \
     pool w3 s1 p1; conv 12->12 k3 d4; relu; conv 12->2 k1 d1";

pub const DEFAULT_EDGE: &str = "conv 3->8 k3 d1; relu; conv 8->8 k3 d1; relu \
     | pool w2 s2; conv 8->8 k3 d1; relu \
     | pool w2 s2; conv 8->8 k3 d1; relu \
     | pool w3 s1 p1; conv 8->8 k3 d2; relu \
     | pool w3 s1 p1; conv 8->8 k3 d4; relu";

pub const DEFAULT_FUSION: &str = "conv 3->8 k3 d1; relu; conv 8->8 k3 d2; relu; \
     conv 8->8 k3 d4; relu; conv 8->8 k3 d8; relu; conv 8->8 k3 d4; relu; \
     conv 8->8 k3 d2; relu; conv 8->2 k1 d1";

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seg: DEFAULT_SEG.parse().expect("valid default"),
            edge: DEFAULT_EDGE.parse().expect("valid default"),
            fusion: DEFAULT_FUSION.parse().expect("valid default"),
            edge_radius: 1.0,
            fusion_gap: 2.0,
            threshold: 0.5,
            min_area: 16,
            seg_train: TrainConfig {
                epochs: 4,
                lr: 0.05,
                momentum: 0.9,
            },
            edge_train: TrainConfig {
                epochs: 16,
                lr: 0.15,
                momentum: 0.9,
            },
            fusion_train: TrainConfig {
                epochs: 4,
                lr: 0.05,
                momentum: 0.9,
            },
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let out = self
            .seg
            .validate(3)
            .map_err(|e| Error::config(format!("seg network: {e}")))?;
        if out != 2 {
            return Err(Error::config(format!("seg network must output 2 channels, got {out}")));
        }
        self.edge.validate(3)?;
        let out = self
            .fusion
            .validate(3)
            .map_err(|e| Error::config(format!("fusion network: {e}")))?;
        if out != 2 {
            return Err(Error::config(format!(
                "fusion network must output 2 channels, got {out}"
            )));
        }
        if self
            .fusion
            .layers
            .iter()
            .any(|l| matches!(l, LayerSpec::MaxPool { .. } | LayerSpec::Upsample { .. }))
        {
            return Err(Error::config("fusion network must keep full resolution"));
        }
        for (name, r) in [("edge_radius", self.edge_radius), ("fusion_gap", self.fusion_gap)] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::config(format!("{name} must be a finite radius >= 0, got {r}")));
            }
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(Error::config(format!(
                "threshold must lie in [0,1), got {}",
                self.threshold
            )));
        }
        for (name, t) in [
            ("seg", &self.seg_train),
            ("edge", &self.edge_train),
            ("fusion", &self.fusion_train),
        ] {
            if !(t.lr >= 0.0 && t.lr.is_finite()) || !(0.0..1.0).contains(&t.momentum) {
                return Err(Error::config(format!(
                    "{name} training: need lr >= 0 and momentum in [0,1), got {} and {}",
                    t.lr, t.momentum
                )));
            }
        }
        Ok(())
    }
}

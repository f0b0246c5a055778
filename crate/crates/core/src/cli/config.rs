//! `key = value` run configuration. Unknown keys are rejected; `#` starts a
//! comment. Every output embeds the hash of the resolved configuration.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::augment::{AugmentConfig, Strategy};
use crate::channels::PipelineConfig;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::metrics::{default_split_weights, HausdorffFallback, TieRule};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Corpus strategy of the `augment` command.
    pub strategy: Strategy,
    /// Augmentation applied in memory before training, if any.
    pub train_augment: Option<Strategy>,
    pub augment: AugmentConfig,
    pub pipeline: PipelineConfig,
    /// Jitter of boxes derived from labels when a record has no box file.
    pub box_jitter: usize,
    pub split_weights: BTreeMap<String, f64>,
    pub hausdorff_fallback: HausdorffFallback,
    pub tie_rule: TieRule,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            strategy: Strategy::I,
            train_augment: Some(Strategy::I),
            augment: AugmentConfig::default(),
            pipeline: PipelineConfig::default(),
            box_jitter: 0,
            split_weights: default_split_weights(),
            hausdorff_fallback: HausdorffFallback::default(),
            tie_rule: TieRule::default(),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("`{key}`: cannot parse `{v}`")))
}

fn range(key: &str, v: &str) -> Result<(f64, f64)> {
    let (a, b) = v
        .split_once(',')
        .ok_or_else(|| Error::config(format!("`{key}`: expected `lo,hi`, got `{v}`")))?;
    Ok((num(key, a.trim())?, num(key, b.trim())?))
}

fn fmt_range((a, b): (f64, f64)) -> String {
    format!("{a},{b}")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected `key = value`, got `{line}`", n + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), n + 1).is_some() {
                return Err(Error::config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| e.context(format_args!("line {}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fsutil::read(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::config(format!("{}: not UTF-8", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.augment.validate()?;
        for (split, w) in &self.split_weights {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::config(format!("weight of split `{split}` must be >= 0")));
            }
        }
        Ok(())
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let p = &mut self.pipeline;
        match key {
            "seed" => self.seed = num(key, v)?,
            "strategy" => self.strategy = v.parse()?,
            "train_augment" => {
                self.train_augment = if v == "none" { None } else { Some(v.parse()?) }
            }
            "warp_count" => self.augment.warp_count = num(key, v)?,
            "warp.amplitude" => self.augment.amplitude = range(key, v)?,
            "warp.period" => self.augment.period = range(key, v)?,
            "warp.pincushion" => self.augment.pincushion = range(key, v)?,
            "warp.shear" => self.augment.shear = range(key, v)?,
            "crop" => self.augment.crop = num(key, v)?,
            "edge_labels" => {
                p.edge_radius = match v {
                    "EDGE1" => 0.0,
                    "EDGE3" => 3.0,
                    _ => return Err(Error::config(format!("`{key}`: expected EDGE1 or EDGE3"))),
                }
            }
            "edge_radius" => p.edge_radius = num(key, v)?,
            "fusion_gap" => p.fusion_gap = num(key, v)?,
            "threshold" => p.threshold = num(key, v)?,
            "min_area" => p.min_area = num(key, v)?,
            "seg.net" => p.seg = v.parse()?,
            "edge.net" => p.edge = v.parse()?,
            "fusion.net" => p.fusion = v.parse()?,
            "box_jitter" => self.box_jitter = num(key, v)?,
            "hausdorff_fallback" => self.hausdorff_fallback = v.parse()?,
            "tie_rule" => {
                self.tie_rule = match v {
                    "min" => TieRule::Min,
                    "ordinal" => TieRule::Ordinal,
                    _ => return Err(Error::config(format!("`{key}`: expected min or ordinal"))),
                }
            }
            _ => {
                if let Some(split) = key.strip_prefix("weight.") {
                    self.split_weights.insert(split.to_string(), num(key, v)?);
                    return Ok(());
                }
                let (net, field) = key
                    .split_once('.')
                    .ok_or_else(|| Error::config(format!("unknown key `{key}`")))?;
                let t = match net {
                    "seg" => &mut p.seg_train,
                    "edge" => &mut p.edge_train,
                    "fusion" => &mut p.fusion_train,
                    _ => return Err(Error::config(format!("unknown key `{key}`"))),
                };
                match field {
                    "epochs" => t.epochs = num(key, v)?,
                    "lr" => t.lr = num(key, v)?,
                    "momentum" => t.momentum = num(key, v)?,
                    _ => return Err(Error::config(format!("unknown key `{key}`"))),
                }
            }
        }
        Ok(())
    }

    /// Canonical text form listing every key; parsing it yields `self`.
    pub fn to_text(&self) -> String {
        let p = &self.pipeline;
        let mut lines = vec![
            format!("seed = {}", self.seed),
            format!("strategy = {}", self.strategy),
            format!(
                "train_augment = {}",
                self.train_augment.map_or("none".to_string(), |s| s.to_string())
            ),
            format!("warp_count = {}", self.augment.warp_count),
            format!("warp.amplitude = {}", fmt_range(self.augment.amplitude)),
            format!("warp.period = {}", fmt_range(self.augment.period)),
            format!("warp.pincushion = {}", fmt_range(self.augment.pincushion)),
            format!("warp.shear = {}", fmt_range(self.augment.shear)),
            format!("crop = {}", self.augment.crop),
            format!("edge_radius = {}", p.edge_radius),
            format!("fusion_gap = {}", p.fusion_gap),
            format!("threshold = {}", p.threshold),
            format!("min_area = {}", p.min_area),
            format!("seg.net = {}", p.seg),
            format!("edge.net = {}", p.edge),
            format!("fusion.net = {}", p.fusion),
        ];
        for (name, t) in [("seg", &p.seg_train), ("edge", &p.edge_train), ("fusion", &p.fusion_train)] {
            lines.push(format!("{name}.epochs = {}", t.epochs));
            lines.push(format!("{name}.lr = {}", t.lr));
            lines.push(format!("{name}.momentum = {}", t.momentum));
        }
        lines.push(format!("box_jitter = {}", self.box_jitter));
        for (split, w) in &self.split_weights {
            lines.push(format!("weight.{split} = {w}"));
        }
        lines.push(format!("hausdorff_fallback = {}", self.hausdorff_fallback));
        lines.push(format!(
            "tie_rule = {}",
            match self.tie_rule {
                TieRule::Min => "min",
                TieRule::Ordinal => "ordinal",
            }
        ));
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }

    /// SHA-256 (hex) of the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

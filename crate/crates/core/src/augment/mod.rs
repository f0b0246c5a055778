//! Seeded preprocessing and geometric augmentation.
//!
//! Strategy I emits the eight flip × quarter-turn variants of a sample.
//! Strategy II adds seeded sinusoidal, pincushion and shear warps. Every
//! emitted sample carries the list of transforms that produced it, and
//! [`replay`] reproduces it bit-exactly from the source.

mod warp;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::labelops::InstanceMap;

pub use warp::apply_geometric;

/// One geometric transform. Warps map image samples bilinearly and label
/// ids by nearest neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    /// Mirror left-right.
    Hflip,
    /// `k` counter-clockwise quarter turns.
    Rot90 { k: u8 },
    /// Horizontal displacement `amplitude * sin(2π y / period)` (pixels).
    Sinusoidal { amplitude: f64, period: f64 },
    /// Radial stretch `r' = r (1 + strength (r / r_max)^2)` about the centre.
    Pincushion { strength: f64 },
    /// Horizontal shear `x' = x + factor (y - y_centre)`.
    Shear { factor: f64 },
    Crop {
        x0: usize,
        y0: usize,
        width: usize,
        height: usize,
    },
}

/// An image with its instance labels and the transforms applied so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: RgbImage,
    pub labels: InstanceMap,
    pub source_id: String,
    pub transforms: Vec<TransformSpec>,
}

impl Sample {
    pub fn new(source_id: impl Into<String>, image: RgbImage, labels: InstanceMap) -> Result<Self> {
        if (image.width(), image.height()) != (labels.width(), labels.height()) {
            return Err(Error::data(format!(
                "image is {}x{} but labels are {}x{}",
                image.width(),
                image.height(),
                labels.width(),
                labels.height()
            )));
        }
        Ok(Sample {
            image,
            labels,
            source_id: source_id.into(),
            transforms: Vec::new(),
        })
    }
}

/// Subtracts each RGB channel's own mean over the image.
pub fn per_channel_zero_mean(image: &RgbImage) -> RgbImage {
    let means = image.channel_means();
    let mut out = image.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        for c in 0..3 {
            px[c] -= means[c];
        }
    }
    out
}

/// Re-applies a transform log to the untouched source sample.
pub fn replay(source: &Sample, log: &[TransformSpec]) -> Result<Sample> {
    log.iter()
        .try_fold(source.clone(), |s, spec| apply_geometric(&s, spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Flips and quarter turns.
    I,
    /// Strategy I plus sinusoidal, pincushion and shear warps.
    II,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::I => "I",
            Strategy::II => "II",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "1" => Ok(Strategy::I),
            "II" | "2" => Ok(Strategy::II),
            _ => Err(Error::config(format!("unknown augmentation strategy `{s}` (I | II)"))),
        }
    }
}

/// Parameter ranges for the warps and the output crop.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    /// Number of warped variants Strategy II adds on top of the eight flips/rotations.
    pub warp_count: usize,
    pub amplitude: (f64, f64),
    pub period: (f64, f64),
    pub pincushion: (f64, f64),
    pub shear: (f64, f64),
    /// Side of the square crop taken from larger samples.
    pub crop: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            warp_count: 6,
            amplitude: (2.0, 8.0),
            period: (50.0, 150.0),
            pincushion: (0.05, 0.2),
            shear: (-0.2, 0.2),
            crop: 400,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("amplitude", self.amplitude),
            ("period", self.period),
            ("pincushion", self.pincushion),
            ("shear", self.shear),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::config(format!("bad {name} range [{lo}, {hi}]")));
            }
        }
        if self.period.0 <= 0.0 {
            return Err(Error::config("warp period must be positive"));
        }
        if self.crop == 0 {
            return Err(Error::config("crop size must be positive"));
        }
        Ok(())
    }
}

/// Per-sample seed: the first eight bytes of SHA-256(base seed ‖ sample id).
pub fn derive_seed(base: u64, sample_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(sample_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// The transform lists a strategy emits for one sample, before cropping.
pub fn strategy_specs(
    strategy: Strategy,
    cfg: &AugmentConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<TransformSpec>> {
    let mut out = Vec::new();
    for flip in [false, true] {
        for k in 0..4u8 {
            let mut specs = Vec::new();
            if flip {
                specs.push(TransformSpec::Hflip);
            }
            if k > 0 {
                specs.push(TransformSpec::Rot90 { k });
            }
            out.push(specs);
        }
    }
    if strategy == Strategy::II {
        for i in 0..cfg.warp_count {
            let spec = match i % 3 {
                0 => TransformSpec::Sinusoidal {
                    amplitude: draw(rng, cfg.amplitude),
                    period: draw(rng, cfg.period),
                },
                1 => TransformSpec::Pincushion {
                    strength: draw(rng, cfg.pincushion),
                },
                _ => TransformSpec::Shear {
                    factor: draw(rng, cfg.shear),
                },
            };
            out.push(vec![spec]);
        }
    }
    out
}

/// Expands one sample into its augmented variants. Variants larger than
/// `cfg.crop` on either side end with a seeded crop.
pub fn augment_strategy(
    sample: &Sample,
    strategy: Strategy,
    seed: u64,
    cfg: &AugmentConfig,
) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &sample.source_id));
    let mut out = Vec::new();
    for specs in strategy_specs(strategy, cfg, &mut rng) {
        let mut s = specs
            .iter()
            .try_fold(sample.clone(), |s, spec| apply_geometric(&s, spec))?;
        let (w, h) = (s.image.width(), s.image.height());
        if w > cfg.crop || h > cfg.crop {
            let (cw, ch) = (w.min(cfg.crop), h.min(cfg.crop));
            let crop = TransformSpec::Crop {
                x0: rng.gen_range(0..=w - cw),
                y0: rng.gen_range(0..=h - ch),
                width: cw,
                height: ch,
            };
            s = apply_geometric(&s, &crop)?;
        }
        out.push(s);
    }
    Ok(out)
}

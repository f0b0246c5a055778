//! Synthetic gland images: ring-stained ellipses with lighter lumens on a
//! textured background, some of them in touching pairs.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::derive_seed;
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::labelops::{dilate, instance_contacts, BBox, BinaryMask, InstanceMap};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub min_glands: usize,
    pub max_glands: usize,
    /// Probability that an image contains a touching pair.
    pub touching: f64,
    /// Range of the ellipse semi-axes in pixels.
    pub axes: (f64, f64),
    /// Amplitude of the uniform background texture.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 96,
            height: 96,
            min_glands: 2,
            max_glands: 4,
            touching: 0.5,
            axes: (9.0, 15.0),
            noise: 0.04,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_glands < 2 && self.touching > 0.0 {
            return Err(Error::config("touching pairs need at least two glands"));
        }
        if self.min_glands == 0 || self.min_glands > self.max_glands {
            return Err(Error::config(format!(
                "bad gland count range {}..={}",
                self.min_glands, self.max_glands
            )));
        }
        if !(0.0..=1.0).contains(&self.touching) {
            return Err(Error::config(format!("touching fraction {} outside [0,1]", self.touching)));
        }
        if !(self.axes.0 >= 3.0 && self.axes.0 <= self.axes.1) {
            return Err(Error::config(format!("bad axis range {:?}", self.axes)));
        }
        let min_side = self.width.min(self.height) as f64;
        if 4.0 * self.axes.1 + 8.0 > min_side {
            return Err(Error::config(format!(
                "{}x{} image is too small for semi-axes up to {}",
                self.width, self.height, self.axes.1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthImage {
    pub id: String,
    pub image: RgbImage,
    pub labels: InstanceMap,
    /// Tight bounding boxes of the instances in id order.
    pub boxes: Vec<BBox>,
    pub touching: bool,
}

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    theta: f64,
}

impl Ellipse {
    /// Normalised radius: 1 on the boundary.
    fn rho(&self, x: f64, y: f64) -> f64 {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        ((u / self.a).powi(2) + (v / self.b).powi(2)).sqrt()
    }

    /// Distance from the centre to the boundary along direction `phi`.
    fn extent(&self, phi: f64) -> f64 {
        let t = phi - self.theta;
        1.0 / ((t.cos() / self.a).powi(2) + (t.sin() / self.b).powi(2)).sqrt()
    }

    fn fits(&self, w: usize, h: usize, margin: f64) -> bool {
        let r = self.a.max(self.b) + margin;
        self.cx - r >= 0.0 && self.cy - r >= 0.0 && self.cx + r <= w as f64 - 1.0 && self.cy + r <= h as f64 - 1.0
    }
}

fn random_ellipse(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Ellipse {
    let a = rng.gen_range(cfg.axes.0..=cfg.axes.1);
    let b = rng.gen_range(cfg.axes.0..=cfg.axes.1);
    let m = a.max(b) + 2.0;
    Ellipse {
        cx: rng.gen_range(m..cfg.width as f64 - 1.0 - m),
        cy: rng.gen_range(m..cfg.height as f64 - 1.0 - m),
        a,
        b,
        theta: rng.gen_range(0.0..std::f64::consts::PI),
    }
}

/// Pixels inside any of `group`, each assigned to the ellipse with the
/// smallest normalised radius.
fn rasterize(group: &[Ellipse], w: usize, h: usize) -> Vec<Option<usize>> {
    (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            group
                .iter()
                .enumerate()
                .map(|(k, e)| (k, e.rho(x, y)))
                .filter(|&(_, r)| r <= 1.0)
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .map(|(k, _)| k)
        })
        .collect()
}

/// Two ellipses overlapping by a few pixels along a random direction.
fn touching_pair(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Option<[Ellipse; 2]> {
    for _ in 0..200 {
        let first = random_ellipse(rng, cfg);
        let mut second = random_ellipse(rng, cfg);
        let phi = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
        let d = first.extent(phi) + second.extent(phi + std::f64::consts::PI) - rng.gen_range(2.0..5.0);
        second.cx = first.cx + d * phi.cos();
        second.cy = first.cy + d * phi.sin();
        if second.fits(cfg.width, cfg.height, 2.0) {
            return Some([first, second]);
        }
    }
    None
}

pub fn generate(cfg: &SynthConfig, seed: u64, index: usize) -> Result<SynthImage> {
    cfg.validate()?;
    let id = format!("synth{index:04}");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &id));
    let (w, h) = (cfg.width, cfg.height);
    let want = rng.gen_range(cfg.min_glands..=cfg.max_glands);
    let wants_touching = rng.gen_bool(cfg.touching);

    let mut glands: Vec<Ellipse> = Vec::new();
    let mut ids = vec![0u32; w * h];
    let mut occupied = BinaryMask::zeros(w, h);
    let mut place = |group: &[Ellipse], ids: &mut Vec<u32>, glands: &mut Vec<Ellipse>| -> Result<bool> {
        let owner = rasterize(group, w, h);
        let keep_out = dilate(&occupied, 3.0)?;
        if owner.iter().enumerate().any(|(i, o)| o.is_some() && keep_out.bits()[i]) {
            return Ok(false);
        }
        for (i, o) in owner.iter().enumerate() {
            if let Some(k) = o {
                ids[i] = (glands.len() + k + 1) as u32;
                occupied.set(i % w, i / w, true);
            }
        }
        glands.extend_from_slice(group);
        Ok(true)
    };

    let mut touching = false;
    if wants_touching {
        if let Some(pair) = touching_pair(&mut rng, cfg) {
            touching = place(&pair, &mut ids, &mut glands)?;
        }
    }
    let mut attempts = 0;
    while glands.len() < want && attempts < 500 {
        attempts += 1;
        let e = random_ellipse(&mut rng, cfg);
        place(&[e], &mut ids, &mut glands)?;
    }
    let labels = InstanceMap::new(w, h, ids)?;
    let touching = touching && instance_contacts(&labels).count() > 0;

    let lumen = [0.93, 0.88, 0.93];
    let ring = [0.35, 0.15, 0.45];
    let background = [0.88, 0.72, 0.82];
    let mut image = RgbImage::filled(w, h, background);
    for y in 0..h {
        for x in 0..w {
            let id = labels.get(x, y);
            let mut px = background;
            if id > 0 {
                let rho = glands[id as usize - 1].rho(x as f64, y as f64);
                px = if rho < 0.56 {
                    lumen
                } else {
                    // darkest mid-ring, a quarter as dark on the boundary
                    let d = (1.0 - 0.75 * ((rho - 0.78) / 0.22).powi(2)).clamp(0.0, 1.0);
                    std::array::from_fn(|c| background[c] * (1.0 - d) + ring[c] * d)
                };
            }
            for v in px.iter_mut() {
                *v = (*v + rng.gen_range(-cfg.noise..=cfg.noise)).clamp(0.0, 1.0);
            }
            image.set_pixel(x, y, px);
        }
    }
    let boxes = labels.bounding_boxes().into_iter().map(|(_, b)| b).collect();
    Ok(SynthImage {
        id,
        image,
        labels,
        boxes,
        touching,
    })
}

/// `n` images with ids `synth0000`, `synth0001`, ...
pub fn generate_set(cfg: &SynthConfig, seed: u64, n: usize) -> Result<Vec<SynthImage>> {
    (0..n).map(|i| generate(cfg, seed, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelops::{connected_components, Connectivity};

    #[test]
    fn no_touching_means_separated() {
        let cfg = SynthConfig {
            touching: 0.0,
            ..SynthConfig::default()
        };
        for i in 0..10 {
            let s = generate(&cfg, 3, i).unwrap();
            assert!(!s.touching);
            assert!(s.labels.num_instances() >= 2);
            let cc = connected_components(&s.labels.foreground(), Connectivity::Eight);
            assert_eq!(cc.num_instances(), s.labels.num_instances());
        }
    }

    #[test]
    fn touching_pairs_touch() {
        let cfg = SynthConfig {
            touching: 1.0,
            ..SynthConfig::default()
        };
        let set = generate_set(&cfg, 11, 8).unwrap();
        assert!(set.iter().filter(|s| s.touching).count() >= 6);
        for s in set.iter().filter(|s| s.touching) {
            let cc = connected_components(&s.labels.foreground(), Connectivity::Four);
            assert!(cc.num_instances() < s.labels.num_instances());
        }
    }

    #[test]
    fn seeded() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg, 5, 2).unwrap();
        let b = generate(&cfg, 5, 2).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.labels, b.labels);
    }
}

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::labelops::InstanceMap;

use super::{Sample, TransformSpec};

/// Applies one transform and appends it to the sample's log.
pub fn apply_geometric(sample: &Sample, spec: &TransformSpec) -> Result<Sample> {
    let (image, labels) = match *spec {
        TransformSpec::Hflip => permute(sample, sample.image.width(), sample.image.height(), |x, y, w, _| {
            (w - 1 - x, y)
        }),
        TransformSpec::Rot90 { k } => {
            let mut s = (sample.image.clone(), sample.labels.clone());
            for _ in 0..k % 4 {
                s = rotate_ccw(&s.0, &s.1);
            }
            s
        }
        TransformSpec::Crop {
            x0,
            y0,
            width,
            height,
        } => {
            let (w, h) = (sample.image.width(), sample.image.height());
            if width == 0 || height == 0 || x0 + width > w || y0 + height > h {
                return Err(Error::data(format!(
                    "crop {width}x{height} at ({x0},{y0}) does not fit a {w}x{h} sample"
                )));
            }
            permute(sample, width, height, |x, y, _, _| (x + x0, y + y0))
        }
        TransformSpec::Sinusoidal { amplitude, period } => {
            if !(period > 0.0) {
                return Err(Error::config(format!("sinusoidal period must be > 0, got {period}")));
            }
            resample(sample, |x, y| {
                (x - amplitude * (2.0 * PI * y / period).sin(), y)
            })
        }
        TransformSpec::Pincushion { strength } => {
            let (w, h) = (sample.image.width() as f64, sample.image.height() as f64);
            let (cx, cy) = ((w - 1.0) / 2.0, (h - 1.0) / 2.0);
            let r_max = (cx * cx + cy * cy).sqrt().max(1.0);
            resample(sample, |x, y| {
                let (dx, dy) = (x - cx, y - cy);
                let r = (dx * dx + dy * dy).sqrt();
                if r == 0.0 || strength == 0.0 {
                    return (x, y);
                }
                let s = invert_radial(r, strength, r_max);
                (cx + dx * s / r, cy + dy * s / r)
            })
        }
        TransformSpec::Shear { factor } => {
            let cy = (sample.image.height() as f64 - 1.0) / 2.0;
            resample(sample, |x, y| (x - factor * (y - cy), y))
        }
    };
    let mut transforms = sample.transforms.clone();
    transforms.push(*spec);
    Ok(Sample {
        image,
        labels,
        source_id: sample.source_id.clone(),
        transforms,
    })
}

/// Solves `s (1 + k (s/r_max)^2) = r` for `s` by Newton's method.
fn invert_radial(r: f64, k: f64, r_max: f64) -> f64 {
    let c = k / (r_max * r_max);
    let mut s = r;
    for _ in 0..30 {
        let f = s + c * s * s * s - r;
        let step = f / (1.0 + 3.0 * c * s * s);
        s -= step;
        if step.abs() < 1e-13 {
            break;
        }
    }
    s
}

/// Exact pixel permutation: output `(x, y)` copies input `src(x, y, w, h)`.
fn permute(
    sample: &Sample,
    out_w: usize,
    out_h: usize,
    src: impl Fn(usize, usize, usize, usize) -> (usize, usize),
) -> (RgbImage, InstanceMap) {
    let (w, h) = (sample.image.width(), sample.image.height());
    let mut img = RgbImage::filled(out_w, out_h, [0.0; 3]);
    let mut lab = InstanceMap::zeros(out_w, out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let (sx, sy) = src(x, y, w, h);
            img.set_pixel(x, y, sample.image.pixel(sx, sy));
            lab.set(x, y, sample.labels.get(sx, sy));
        }
    }
    (img, lab)
}

fn rotate_ccw(img: &RgbImage, lab: &InstanceMap) -> (RgbImage, InstanceMap) {
    let (w, h) = (img.width(), img.height());
    let mut out_img = RgbImage::filled(h, w, [0.0; 3]);
    let mut out_lab = InstanceMap::zeros(h, w);
    // new (x, y) = old (w - 1 - y, x)
    for y in 0..w {
        for x in 0..h {
            out_img.set_pixel(x, y, img.pixel(w - 1 - y, x));
            out_lab.set(x, y, lab.get(w - 1 - y, x));
        }
    }
    (out_img, out_lab)
}

/// Backward-mapped warp. Image samples outside the frame take the source's
/// channel means; labels outside the frame become background.
fn resample(sample: &Sample, src: impl Fn(f64, f64) -> (f64, f64)) -> (RgbImage, InstanceMap) {
    let (w, h) = (sample.image.width(), sample.image.height());
    let fill = sample.image.channel_means();
    let mut img = RgbImage::filled(w, h, fill);
    let mut lab = InstanceMap::zeros(w, h);
    let (maxx, maxy) = ((w - 1) as f64, (h - 1) as f64);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = src(x as f64, y as f64);
            if !(0.0..=maxx).contains(&sx) || !(0.0..=maxy).contains(&sy) {
                continue;
            }
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let mut px = [0.0; 3];
            let (p00, p10, p01, p11) = (
                sample.image.pixel(x0, y0),
                sample.image.pixel(x1, y0),
                sample.image.pixel(x0, y1),
                sample.image.pixel(x1, y1),
            );
            for c in 0..3 {
                let top = if fx == 0.0 { p00[c] } else { p00[c] * (1.0 - fx) + p10[c] * fx };
                let bot = if fx == 0.0 { p01[c] } else { p01[c] * (1.0 - fx) + p11[c] * fx };
                px[c] = if fy == 0.0 { top } else { top * (1.0 - fy) + bot * fy };
            }
            img.set_pixel(x, y, px);
            let (nx, ny) = (sx.round() as usize, sy.round() as usize);
            lab.set(x, y, sample.labels.get(nx.min(w - 1), ny.min(h - 1)));
        }
    }
    (img, lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Sample {
        let (w, h) = (5, 3);
        let data = (0..w * h * 3).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let labels = InstanceMap::new(w, h, (0..w * h).map(|i| (i % 4) as u32).collect()).unwrap();
        Sample::new("s", RgbImage::new(w, h, data).unwrap(), labels).unwrap()
    }

    #[test]
    fn rotation_maps_corners() {
        let s = sample();
        let r = apply_geometric(&s, &TransformSpec::Rot90 { k: 1 }).unwrap();
        assert_eq!((r.image.width(), r.image.height()), (3, 5));
        // top-right corner of the source becomes top-left after a CCW turn
        assert_eq!(r.labels.get(0, 0), s.labels.get(4, 0));
        assert_eq!(r.image.pixel(0, 4), s.image.pixel(0, 0));
    }

    #[test]
    fn crop_bounds_checked() {
        let s = sample();
        let bad = TransformSpec::Crop {
            x0: 2,
            y0: 0,
            width: 4,
            height: 3,
        };
        assert!(apply_geometric(&s, &bad).is_err());
        let ok = TransformSpec::Crop {
            x0: 1,
            y0: 1,
            width: 4,
            height: 2,
        };
        let c = apply_geometric(&s, &ok).unwrap();
        assert_eq!(c.labels.get(0, 0), s.labels.get(1, 1));
    }

    #[test]
    fn radial_inverse() {
        let s = invert_radial(30.0, 0.15, 50.0);
        assert!((s * (1.0 + 0.15 * (s / 50.0).powi(2)) - 30.0).abs() < 1e-10);
    }
}

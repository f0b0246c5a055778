//! Binary netpbm I/O: 8/16-bit PGM (`P5`) and 8-bit PPM (`P6`).
//!
//! 16-bit samples are big-endian, as the format requires.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;
use crate::image::RgbImage;
use crate::labelops::{BinaryMask, CoverageMap, InstanceMap};

/// A decoded netpbm raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pnm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// 1 for PGM, 3 for PPM.
    pub channels: usize,
    pub samples: Vec<u16>,
}

struct Header<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::data(format!("netpbm header: bad {what}")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Pnm> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::data("not a binary PGM/PPM (expected P5 or P6)")),
    };
    let mut hdr = Header { buf: bytes, pos: 2 };
    let width = hdr.number("width")?;
    let height = hdr.number("height")?;
    let maxval = hdr.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::data(format!("netpbm: empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::data(format!("netpbm: maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(hdr.pos) {
        Some(c) if c.is_ascii_whitespace() => hdr.pos += 1,
        _ => return Err(Error::data("netpbm: missing whitespace after maxval")),
    }
    let n = width * height * channels;
    let bps = if maxval > 255 { 2 } else { 1 };
    let raster = &bytes[hdr.pos..];
    if raster.len() < n * bps {
        return Err(Error::data(format!(
            "netpbm raster truncated: need {} bytes, have {}",
            n * bps,
            raster.len()
        )));
    }
    let samples = if bps == 1 {
        raster[..n].iter().map(|&b| b as u16).collect()
    } else {
        raster[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok(Pnm {
        width,
        height,
        maxval: maxval as u16,
        channels,
        samples,
    })
}

pub fn encode(img: &Pnm) -> Vec<u8> {
    let magic = if img.channels == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if img.maxval > 255 {
        for s in &img.samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    } else {
        out.extend(img.samples.iter().map(|&s| s as u8));
    }
    out
}

fn read_file(path: &Path) -> Result<Pnm> {
    decode(&fsutil::read(path)?).map_err(|e| e.context(path.display()))
}

/// Encodes an instance map as a 16-bit PGM (maxval 65535).
pub fn encode_instance_map(map: &InstanceMap) -> Result<Vec<u8>> {
    let samples = map
        .ids()
        .iter()
        .map(|&id| {
            u16::try_from(id).map_err(|_| Error::data(format!("instance id {id} exceeds 65535")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(encode(&Pnm {
        width: map.width(),
        height: map.height(),
        maxval: 65535,
        channels: 1,
        samples,
    }))
}

pub fn decode_instance_map(bytes: &[u8]) -> Result<InstanceMap> {
    let p = decode(bytes)?;
    if p.channels != 1 {
        return Err(Error::data("instance map must be a PGM"));
    }
    InstanceMap::new(p.width, p.height, p.samples.into_iter().map(u32::from).collect())
}

pub fn save_instance_map(path: &Path, map: &InstanceMap) -> Result<()> {
    fsutil::write_atomic(path, &encode_instance_map(map)?)
}

pub fn load_instance_map(path: &Path) -> Result<InstanceMap> {
    decode_instance_map(&fsutil::read(path)?)
        .map_err(|e| e.context(path.display()))
}

/// Encodes a mask as an 8-bit PGM with values 0 and 255.
pub fn encode_mask(mask: &BinaryMask) -> Vec<u8> {
    encode(&Pnm {
        width: mask.width(),
        height: mask.height(),
        maxval: 255,
        channels: 1,
        samples: mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect(),
    })
}

pub fn save_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    fsutil::write_atomic(path, &encode_mask(mask))
}

/// Any nonzero sample reads as set.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let p = read_file(path)?;
    if p.channels != 1 {
        return Err(Error::data(format!("{}: mask must be a PGM", path.display())));
    }
    BinaryMask::new(p.width, p.height, p.samples.iter().map(|&s| s != 0).collect())
}

pub fn encode_coverage(map: &CoverageMap) -> Result<Vec<u8>> {
    let samples = map
        .counts()
        .iter()
        .map(|&c| u16::try_from(c).map_err(|_| Error::data(format!("coverage {c} exceeds 65535"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(encode(&Pnm {
        width: map.width(),
        height: map.height(),
        maxval: 65535,
        channels: 1,
        samples,
    }))
}

pub fn save_coverage(path: &Path, map: &CoverageMap) -> Result<()> {
    fsutil::write_atomic(path, &encode_coverage(map)?)
}

pub fn load_coverage(path: &Path) -> Result<CoverageMap> {
    let p = read_file(path)?;
    CoverageMap::new(p.width, p.height, p.samples.into_iter().map(u32::from).collect())
}

/// Writes an RGB image as an 8-bit PPM; values are clamped to [0,1] and rounded.
pub fn encode_rgb(img: &RgbImage) -> Vec<u8> {
    encode(&Pnm {
        width: img.width(),
        height: img.height(),
        maxval: 255,
        channels: 3,
        samples: img
            .data()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u16)
            .collect(),
    })
}

pub fn save_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    fsutil::write_atomic(path, &encode_rgb(img))
}

/// Reads a PPM into `[0,1]` floats.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let p = read_file(path)?;
    if p.channels != 3 {
        return Err(Error::data(format!("{}: expected a PPM (P6)", path.display())));
    }
    let scale = p.maxval as f64;
    RgbImage::new(
        p.width,
        p.height,
        p.samples.iter().map(|&s| s as f64 / scale).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_with_comments() {
        let mut bytes = b"P5\n# made by hand\n3 1 # width height\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 128, 255]);
        let p = decode(&bytes).unwrap();
        assert_eq!((p.width, p.height, p.maxval), (3, 1, 255));
        assert_eq!(p.samples, vec![0, 128, 255]);
    }

    #[test]
    fn sixteen_bit_is_big_endian() {
        let m = InstanceMap::new(2, 1, vec![1, 258]).unwrap();
        let bytes = encode_instance_map(&m).unwrap();
        assert!(bytes.starts_with(b"P5\n2 1\n65535\n"));
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 1, 1, 2]);
        assert_eq!(decode_instance_map(&bytes).unwrap(), m);
    }

    #[test]
    fn rejects_truncated_and_foreign() {
        assert!(decode(b"P2\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n2 2\n255\n\x00\x01").is_err());
        let m = InstanceMap::new(1, 1, vec![70000]).unwrap();
        assert!(encode_instance_map(&m).is_err());
    }
}

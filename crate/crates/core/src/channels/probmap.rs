use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffnet::Tensor;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::labelops::{connected_components, BinaryMask, Connectivity, CoverageMap, InstanceMap};

/// Planar `[K, H, W]` per-pixel probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: usize,
    height: usize,
    k: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    w: usize,
    h: usize,
    k: usize,
}

impl ProbMap {
    pub fn new(width: usize, height: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 || width == 0 || height == 0 || values.len() != k * width * height {
            return Err(Error::data(format!(
                "probability map {width}x{height}x{k} needs {} values, got {}",
                k * width * height,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::data(format!("probability {v} outside [0,1]")));
        }
        Ok(ProbMap {
            width,
            height,
            k,
            values,
        })
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (k, h, w) = t.dims3()?;
        ProbMap::new(w, h, k, t.values().to_vec())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.values[c * n..(c + 1) * n]
    }

    /// Foreground probability: channel 1 of a two-class map, channel 0 otherwise.
    pub fn foreground(&self) -> &[f64] {
        self.channel(if self.k == 2 { 1 } else { 0 })
    }

    /// Two-class map that is certain everywhere: 1 on the mask, 0 elsewhere.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        let fg: Vec<f64> = mask.bits().iter().map(|&b| f64::from(u8::from(b))).collect();
        let mut values: Vec<f64> = fg.iter().map(|p| 1.0 - p).collect();
        values.extend(fg);
        ProbMap {
            width: mask.width(),
            height: mask.height(),
            k: 2,
            values,
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.k, self.height, self.width], self.values.clone())
            .expect("consistent shape")
    }

    fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    /// Writes little-endian `f64` values to `path` and `{w,h,k}` to `path.json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fsutil::write_atomic(path, &bytes)?;
        let side = Sidecar {
            w: self.width,
            h: self.height,
            k: self.k,
        };
        fsutil::write_atomic(&Self::sidecar_path(path), &serde_json::to_vec(&side)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let side_path = Self::sidecar_path(path);
        let side: Sidecar = serde_json::from_slice(&fsutil::read(&side_path)?)
            .map_err(|e| Error::data(format!("{}: {e}", side_path.display())))?;
        let bytes = fsutil::read(path)?;
        if bytes.len() != side.w * side.h * side.k * 8 {
            return Err(Error::data(format!(
                "{}: expected {} bytes for {}x{}x{}, found {}",
                path.display(),
                side.w * side.h * side.k * 8,
                side.w,
                side.h,
                side.k,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        ProbMap::new(side.w, side.h, side.k, values).map_err(|e| e.context(path.display()))
    }
}

/// The three channel outputs for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBundle {
    pub seg: ProbMap,
    pub det: CoverageMap,
    pub edge: ProbMap,
}

impl ChannelBundle {
    pub fn new(seg: ProbMap, det: CoverageMap, edge: ProbMap) -> Result<Self> {
        let dims = (seg.width, seg.height);
        if (det.width(), det.height()) != dims || (edge.width, edge.height) != dims {
            return Err(Error::data(format!(
                "channel sizes disagree: seg {}x{}, det {}x{}, edge {}x{}",
                seg.width,
                seg.height,
                det.width(),
                det.height(),
                edge.width,
                edge.height
            )));
        }
        if seg.k != 2 || edge.k != 1 {
            return Err(Error::data(format!(
                "expected seg K=2 and edge K=1, got {} and {}",
                seg.k, edge.k
            )));
        }
        Ok(ChannelBundle { seg, det, edge })
    }

    pub fn width(&self) -> usize {
        self.seg.width
    }

    pub fn height(&self) -> usize {
        self.seg.height
    }

    /// Fusion input `[3, H, W]`: seg foreground, normalized coverage, edge.
    pub fn to_tensor(&self) -> Tensor {
        let mut values = self.seg.foreground().to_vec();
        values.extend(self.det.normalized());
        values.extend_from_slice(self.edge.channel(0));
        Tensor::new(vec![3, self.height(), self.width()], values).expect("consistent shape")
    }
}

/// Foreground where `P(fg) > threshold`, split into 4-connected instances;
/// instances under `min_area` pixels are dropped and ids are made dense.
pub fn instantiate(prob: &ProbMap, threshold: f64, min_area: usize) -> Result<InstanceMap> {
    if prob.k != 2 {
        return Err(Error::config(format!(
            "instantiation needs a two-class map, got K={}",
            prob.k
        )));
    }
    let bits = prob.foreground().iter().map(|&p| p > threshold).collect();
    let mask = BinaryMask::new(prob.width, prob.height, bits)?;
    let mut cc = connected_components(&mask, Connectivity::Four);
    let mut areas = vec![0usize; cc.max_id() as usize + 1];
    for &id in cc.ids() {
        areas[id as usize] += 1;
    }
    for id in cc.ids_mut() {
        if areas[*id as usize] < min_area {
            *id = 0;
        }
    }
    Ok(cc.relabel_dense())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = ProbMap::new(3, 2, 1, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.125]).unwrap();
        let path = dir.path().join("edge.f64");
        p.save(&path).unwrap();
        assert!(dir.path().join("edge.f64.json").exists());
        assert_eq!(ProbMap::load(&path).unwrap(), p);
    }

    #[test]
    fn area_filter() {
        let mut bits = vec![false; 100];
        for i in [0, 1, 10, 11, 12] {
            bits[i] = true;
        }
        for i in 50..60 {
            bits[i] = true;
        }
        let mask = BinaryMask::new(10, 10, bits).unwrap();
        let p = ProbMap::from_mask(&mask);
        assert_eq!(instantiate(&p, 0.5, 10).unwrap().num_instances(), 1);
        assert_eq!(instantiate(&p, 0.5, 1).unwrap().num_instances(), 2);
    }
}

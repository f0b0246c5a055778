use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// H×W grid of instance ids; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstanceMap {
    width: usize,
    height: usize,
    ids: Vec<u32>,
}

impl InstanceMap {
    pub fn new(width: usize, height: usize, ids: Vec<u32>) -> Result<Self> {
        check_dims(width, height, ids.len())?;
        Ok(InstanceMap { width, height, ids })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        InstanceMap {
            width,
            height,
            ids: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn ids_mut(&mut self) -> &mut [u32] {
        &mut self.ids
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.ids[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, id: u32) {
        self.ids[y * self.width + x] = id;
    }

    pub fn same_dims<T: Dims>(&self, other: &T) -> bool {
        (self.width, self.height) == other.dims()
    }

    /// Sorted distinct nonzero ids.
    pub fn instance_ids(&self) -> Vec<u32> {
        let mut seen = vec![false; self.max_id() as usize + 1];
        for &id in &self.ids {
            seen[id as usize] = true;
        }
        seen.iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &s)| s)
            .map(|(i, _)| i as u32)
            .collect()
    }

    pub fn num_instances(&self) -> usize {
        self.instance_ids().len()
    }

    pub fn max_id(&self) -> u32 {
        self.ids.iter().copied().max().unwrap_or(0)
    }

    pub fn foreground(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.ids.iter().map(|&i| i != 0).collect(),
        }
    }

    pub fn mask_of(&self, id: u32) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.ids.iter().map(|&i| i == id).collect(),
        }
    }

    /// Renumbers ids to 1..n in order of first appearance in a row-major scan.
    pub fn relabel_dense(&self) -> InstanceMap {
        let mut map = vec![0u32; self.max_id() as usize + 1];
        let mut next = 0;
        let ids = self
            .ids
            .iter()
            .map(|&id| {
                if id == 0 {
                    return 0;
                }
                if map[id as usize] == 0 {
                    next += 1;
                    map[id as usize] = next;
                }
                map[id as usize]
            })
            .collect();
        InstanceMap {
            width: self.width,
            height: self.height,
            ids,
        }
    }

    /// Tight bounding box of every instance, in ascending id order.
    pub fn bounding_boxes(&self) -> Vec<(u32, BBox)> {
        let n = self.max_id() as usize + 1;
        let mut ext = vec![(usize::MAX, usize::MAX, 0usize, 0usize); n];
        for y in 0..self.height {
            for x in 0..self.width {
                let id = self.ids[y * self.width + x] as usize;
                if id == 0 {
                    continue;
                }
                let e = &mut ext[id];
                e.0 = e.0.min(x);
                e.1 = e.1.min(y);
                e.2 = e.2.max(x + 1);
                e.3 = e.3.max(y + 1);
            }
        }
        ext.into_iter()
            .enumerate()
            .filter(|(_, e)| e.0 != usize::MAX)
            .map(|(id, (x0, y0, x1, y1))| (id as u32, BBox::new(x0, y0, x1, y1)))
            .collect()
    }
}

/// H×W boolean grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height, bits.len())?;
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_points(width: usize, height: usize, points: &[(usize, usize)]) -> Self {
        let mut m = BinaryMask::zeros(width, height);
        for &(x, y) in points {
            m.set(x, y, true);
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Coordinates `(x, y)` of set pixels in row-major order.
    pub fn points(&self) -> Vec<(usize, usize)> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }

    /// True when every set pixel of `self` is set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn and_not(&self, other: &BinaryMask) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && !b).collect(),
        }
    }
}

/// Shared access to a grid's `(width, height)`.
pub trait Dims {
    fn dims(&self) -> (usize, usize);
}

impl Dims for InstanceMap {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

impl Dims for BinaryMask {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

impl Dims for CoverageMap {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

pub(crate) fn ensure_same_dims(a: &impl Dims, b: &impl Dims) -> Result<()> {
    if a.dims() != b.dims() {
        let (aw, ah) = a.dims();
        let (bw, bh) = b.dims();
        return Err(Error::data(format!(
            "dimension mismatch: {aw}x{ah} vs {bw}x{bh}"
        )));
    }
    Ok(())
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::data(format!("empty grid {width}x{height}")));
    }
    if width * height != len {
        return Err(Error::data(format!(
            "grid {width}x{height} needs {} entries, got {len}",
            width * height
        )));
    }
    Ok(())
}

/// Axis-aligned box over the half-open pixel range `[x0,x1) × [y0,y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl BBox {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        BBox {
            x0,
            y0,
            x1,
            y1,
            score: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.x0 < self.x1 && self.x1 <= width && self.y0 < self.y1 && self.y1 <= height {
            if let Some(s) = self.score {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::data(format!("box score {s} outside [0,1]")));
                }
            }
            Ok(())
        } else {
            Err(Error::data(format!(
                "box [{},{})x[{},{}) is empty or outside the {width}x{height} image",
                self.x0, self.x1, self.y0, self.y1
            )))
        }
    }
}

/// Per-pixel count of covering boxes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMap {
    width: usize,
    height: usize,
    counts: Vec<u32>,
}

impl CoverageMap {
    pub fn new(width: usize, height: usize, counts: Vec<u32>) -> Result<Self> {
        check_dims(width, height, counts.len())?;
        Ok(CoverageMap {
            width,
            height,
            counts,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.counts[y * self.width + x]
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// `counts / max(1, max count)`, so the largest count maps to 1.0.
    pub fn normalized(&self) -> Vec<f64> {
        let m = self.max().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / m).collect()
    }
}

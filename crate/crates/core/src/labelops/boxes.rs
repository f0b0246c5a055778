use crate::error::Result;

use super::maps::{BBox, CoverageMap};

/// The box-filling operator: each pixel counts the boxes that contain it.
pub fn fill_boxes(boxes: &[BBox], width: usize, height: usize) -> Result<CoverageMap> {
    // 2-D difference array with one guard row and column
    let stride = width + 1;
    let mut diff = vec![0i64; stride * (height + 1)];
    for (i, b) in boxes.iter().enumerate() {
        b.validate(width, height)
            .map_err(|e| e.context(format_args!("box {i}")))?;
        diff[b.y0 * stride + b.x0] += 1;
        diff[b.y0 * stride + b.x1] -= 1;
        diff[b.y1 * stride + b.x0] -= 1;
        diff[b.y1 * stride + b.x1] += 1;
    }
    let mut counts = vec![0u32; width * height];
    let mut above = vec![0i64; width];
    for y in 0..height {
        let mut run = 0i64;
        for x in 0..width {
            run += diff[y * stride + x];
            above[x] += run;
            counts[y * width + x] = above[x] as u32;
        }
    }
    CoverageMap::new(width, height, counts)
}

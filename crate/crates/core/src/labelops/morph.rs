use crate::distance::{squared_edt, UNREACHABLE};
use crate::error::{Error, Result};

use super::maps::BinaryMask;

/// Dilation by a discrete Euclidean disk: `q` is set iff some set `p` has
/// `|p - q|^2 <= radius^2`.
pub fn dilate(mask: &BinaryMask, radius: f64) -> Result<BinaryMask> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::config(format!("dilation radius must be >= 0, got {radius}")));
    }
    let r2 = radius * radius;
    let bits = squared_edt(mask)
        .into_iter()
        .map(|d| d != UNREACHABLE && (d as f64) <= r2)
        .collect();
    BinaryMask::new(mask.width(), mask.height(), bits)
}

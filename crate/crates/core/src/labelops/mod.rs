//! Instance-label manipulation: connected components, edge labels, disk
//! dilation, box filling and overlap accounting.

mod boxes;
mod components;
mod edges;
mod maps;
mod morph;
mod overlap;

pub use boxes::fill_boxes;
pub use components::{connected_components, Connectivity};
pub use edges::{extract_edges, instance_contacts};
pub use maps::{BBox, BinaryMask, CoverageMap, Dims, InstanceMap};
pub(crate) use maps::ensure_same_dims;
pub use morph::dilate;
pub use overlap::{overlap_matrix, OverlapMatrix};

use crate::error::Result;

/// Edge labels for training the edge channel: instance edges dilated by a
/// disk of `radius` (0 keeps them one pixel wide).
pub fn edge_labels(labels: &InstanceMap, radius: f64) -> Result<BinaryMask> {
    dilate(&extract_edges(labels), radius)
}

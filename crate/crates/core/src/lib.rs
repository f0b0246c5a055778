//! Multichannel gland instance segmentation at desk scale.
//!
//! The crate bundles the pieces of a three-channel (region, location, edge)
//! instance-segmentation pipeline for histology glands:
//!
//! - [`diffnet`]: a minimal `f64` autodiff engine with dilated convolution.
//! - [`labelops`]: connected components, edge labels, disk dilation, box filling.
//! - [`augment`]: seeded flip/rotation and warp augmentation.
//! - [`channels`]: the segmentation, edge and fusion networks plus detection ingestion.
//! - [`metrics`]: detection F1, object-level Dice and Hausdorff, rank aggregation.
//! - [`cli`]: run configs, manifests, the synthetic gland generator and command drivers.

pub mod augment;
pub mod channels;
pub mod cli;
pub mod diffnet;
pub mod distance;
pub mod error;
pub mod fsutil;
pub mod image;
pub mod labelops;
pub mod metrics;
pub mod netpbm;

pub use error::{Error, Result};

//! Segmentation, detection and edge channels, their fusion network, and
//! instantiation of the fused map as labelled instances.
//!
//! All networks are small [`crate::diffnet::Sequential`] stacks configured
//! by [`PipelineConfig`]. The fusion input is always ordered
//! (seg foreground probability, normalized box coverage, edge probability).

mod config;
mod detection;
mod nets;
mod pipeline;
mod probmap;
mod train;

pub use config::{
    EdgeSchedule, PipelineConfig, TrainConfig, DEFAULT_EDGE, DEFAULT_FUSION, DEFAULT_SEG,
};
pub use detection::{boxes_from_labels, detection_ingest, load_boxes, parse_boxes, save_boxes};
pub use nets::{
    edge_forward, edge_logits, fuse_forward, fusion_logits, init_edge, init_fusion, init_seg,
    seg_forward, seg_logits, EdgeVars, EDGE_ALPHA, EDGE_PREFIX, FUSION_PREFIX, SEG_PREFIX,
};
pub use pipeline::{
    augment_labeled, compute_bundle, infer, network_input, train_pipeline, Inference, LabeledImage, Models,
};
pub use probmap::{instantiate, ChannelBundle, ProbMap};
pub use train::{
    channel_loss, edge_loss, init_channel, pixel_accuracy, train_channel, train_config,
    training_target, ChannelKind, EpochLoss, Example, Target, Trained,
};

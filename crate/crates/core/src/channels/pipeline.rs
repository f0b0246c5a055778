use rayon::prelude::*;

use crate::augment::{augment_strategy, per_channel_zero_mean, AugmentConfig, Sample, Strategy};
use crate::diffnet::{NetworkParams, Tensor};
use crate::error::Result;
use crate::image::RgbImage;
use crate::labelops::{fill_boxes, BBox, InstanceMap};

use super::config::PipelineConfig;
use super::nets::{edge_forward, fuse_forward, seg_forward};
use super::probmap::{instantiate, ChannelBundle, ProbMap};
use super::train::{train_channel, ChannelKind, EpochLoss, Example};

/// Weights of the three trained networks.
#[derive(Debug, Clone)]
pub struct Models {
    pub seg: NetworkParams,
    pub edge: NetworkParams,
    pub fusion: NetworkParams,
}

/// A raw RGB image with its instance labels and detection boxes.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub id: String,
    pub image: RgbImage,
    pub labels: InstanceMap,
    pub boxes: Vec<BBox>,
}

/// Expands every image into its augmented variants; boxes are recomputed as
/// tight boxes of the transformed labels. Variant `k` of `id` is `id_k`.
pub fn augment_labeled(
    items: &[LabeledImage],
    strategy: Strategy,
    seed: u64,
    cfg: &AugmentConfig,
) -> Result<Vec<LabeledImage>> {
    let mut out = Vec::new();
    for it in items {
        let sample = Sample::new(it.id.clone(), it.image.clone(), it.labels.clone())?;
        for (k, a) in augment_strategy(&sample, strategy, seed, cfg)?.into_iter().enumerate() {
            out.push(LabeledImage {
                id: format!("{}_{k}", it.id),
                boxes: a.labels.bounding_boxes().into_iter().map(|(_, b)| b).collect(),
                image: a.image,
                labels: a.labels,
            });
        }
    }
    Ok(out)
}

/// Zero-mean image tensor fed to the seg and edge networks.
pub fn network_input(image: &RgbImage) -> Tensor {
    per_channel_zero_mean(image).to_tensor()
}

/// Seg and edge outputs plus box coverage for one image.
pub fn compute_bundle(
    seg: &NetworkParams,
    edge: &NetworkParams,
    cfg: &PipelineConfig,
    image: &RgbImage,
    boxes: &[BBox],
) -> Result<ChannelBundle> {
    let x = network_input(image);
    let seg_prob = seg_forward(seg, &cfg.seg, &x)?;
    let (_, edge_prob) = edge_forward(edge, &cfg.edge, &x)?;
    let det = fill_boxes(boxes, image.width(), image.height())?;
    ChannelBundle::new(seg_prob, det, edge_prob)
}

/// Trains seg and edge on the images, then fusion on their outputs.
/// Channel `c` uses seed `seed + c`.
pub fn train_pipeline(
    items: &[LabeledImage],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(Models, Vec<EpochLoss>)> {
    let examples: Vec<Example> = items
        .iter()
        .map(|it| Example {
            id: it.id.clone(),
            input: network_input(&it.image),
            labels: it.labels.clone(),
        })
        .collect();
    let seg = train_channel(&examples, cfg, ChannelKind::Seg, seed)?;
    let edge = train_channel(&examples, cfg, ChannelKind::Edge, seed.wrapping_add(1))?;
    let fusion_examples = items
        .par_iter()
        .map(|it| {
            let bundle = compute_bundle(&seg.params, &edge.params, cfg, &it.image, &it.boxes)?;
            Ok(Example {
                id: it.id.clone(),
                input: bundle.to_tensor(),
                labels: it.labels.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fusion = train_channel(&fusion_examples, cfg, ChannelKind::Fusion, seed.wrapping_add(2))?;
    let mut curve = seg.curve;
    curve.extend(edge.curve);
    curve.extend(fusion.curve);
    Ok((
        Models {
            seg: seg.params,
            edge: edge.params,
            fusion: fusion.params,
        },
        curve,
    ))
}

#[derive(Debug, Clone)]
pub struct Inference {
    pub bundle: ChannelBundle,
    pub fused: ProbMap,
    /// Instances from the fused map.
    pub instances: InstanceMap,
    /// Instances from the segmentation channel alone.
    pub seg_instances: InstanceMap,
}

pub fn infer(models: &Models, cfg: &PipelineConfig, image: &RgbImage, boxes: &[BBox]) -> Result<Inference> {
    let bundle = compute_bundle(&models.seg, &models.edge, cfg, image, boxes)?;
    let fused = fuse_forward(&models.fusion, &cfg.fusion, &bundle)?;
    let instances = instantiate(&fused, cfg.threshold, cfg.min_area)?;
    let seg_instances = instantiate(&bundle.seg, cfg.threshold, cfg.min_area)?;
    Ok(Inference {
        bundle,
        fused,
        instances,
        seg_instances,
    })
}

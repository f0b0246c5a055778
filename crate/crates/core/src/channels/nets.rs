use rand_chacha::ChaCha8Rng;

use crate::diffnet::{
    xavier_uniform, ConvGeometry, Graph, NetworkParams, Sequential, Tensor, Var,
};
use crate::error::{Error, Result};

use super::config::EdgeSchedule;
use super::probmap::{ChannelBundle, ProbMap};

pub const SEG_PREFIX: &str = "seg";
pub const EDGE_PREFIX: &str = "edge";
pub const FUSION_PREFIX: &str = "fusion";

fn stage_prefix(m: usize) -> String {
    format!("{EDGE_PREFIX}.s{m}")
}

fn side_names(m: usize) -> (String, String) {
    (format!("{EDGE_PREFIX}.side{m}.w"), format!("{EDGE_PREFIX}.side{m}.b"))
}

/// Name of the bias-free 1×1 convolution that weighs the side outputs.
pub const EDGE_ALPHA: &str = "edge.alpha.w";

pub fn init_seg(net: &Sequential, rng: &mut ChaCha8Rng) -> Result<NetworkParams> {
    net.validate(3)?;
    let mut params = NetworkParams::new();
    net.init_params(SEG_PREFIX, rng, &mut params)?;
    Ok(params)
}

pub fn init_fusion(net: &Sequential, rng: &mut ChaCha8Rng) -> Result<NetworkParams> {
    net.validate(3)?;
    let mut params = NetworkParams::new();
    net.init_params(FUSION_PREFIX, rng, &mut params)?;
    Ok(params)
}

/// Side weights start at `1/M`.
pub fn init_edge(schedule: &EdgeSchedule, rng: &mut ChaCha8Rng) -> Result<NetworkParams> {
    let widths = schedule.validate(3)?;
    let mut params = NetworkParams::new();
    for (m, (stage, &ch)) in schedule.stages.iter().zip(&widths).enumerate() {
        stage.init_params(&stage_prefix(m), rng, &mut params)?;
        let (w, b) = side_names(m);
        params.insert(w, xavier_uniform(&[1, ch, 1, 1], rng))?;
        params.insert(b, Tensor::zeros(&[1]))?;
    }
    let m = widths.len();
    params.insert(EDGE_ALPHA, Tensor::full(&[1, m, 1, 1], 1.0 / m as f64))?;
    Ok(params)
}

/// Segmentation logits resized to `h × w`.
pub fn seg_logits(
    g: &mut Graph,
    params: &NetworkParams,
    net: &Sequential,
    x: Var,
    h: usize,
    w: usize,
) -> Result<Var> {
    let y = net.forward(g, params, SEG_PREFIX, x)?;
    g.resize(y, h, w)
}

/// Edge logits at input resolution.
#[derive(Debug, Clone)]
pub struct EdgeVars {
    pub sides: Vec<Var>,
    pub fused: Var,
}

pub fn edge_logits(
    g: &mut Graph,
    params: &NetworkParams,
    schedule: &EdgeSchedule,
    x: Var,
    h: usize,
    w: usize,
) -> Result<EdgeVars> {
    if schedule.stages.is_empty() {
        return Err(Error::config("edge network needs at least one side output"));
    }
    let mut feat = x;
    let mut sides = Vec::with_capacity(schedule.stages.len());
    for (m, stage) in schedule.stages.iter().enumerate() {
        feat = stage.forward(g, params, &stage_prefix(m), feat)?;
        let (wn, bn) = side_names(m);
        let (k, b) = (g.param(params, &wn)?, g.param(params, &bn)?);
        let side = g.conv2d(feat, k, Some(b), ConvGeometry::new(1, 1, 0))?;
        sides.push(g.resize(side, h, w)?);
    }
    let stacked = g.concat(&sides)?;
    let alpha = g.param(params, EDGE_ALPHA)?;
    let fused = g.conv2d(stacked, alpha, None, ConvGeometry::new(1, 1, 0))?;
    Ok(EdgeVars { sides, fused })
}

pub fn fusion_logits(
    g: &mut Graph,
    params: &NetworkParams,
    net: &Sequential,
    x: Var,
) -> Result<Var> {
    let in_dims = g.value(x).dims3()?;
    let y = net.forward(g, params, FUSION_PREFIX, x)?;
    let out_dims = g.value(y).dims3()?;
    if (out_dims.1, out_dims.2) != (in_dims.1, in_dims.2) {
        return Err(Error::config(format!(
            "fusion network changed resolution from {}x{} to {}x{}",
            in_dims.2, in_dims.1, out_dims.2, out_dims.1
        )));
    }
    Ok(y)
}

fn image_dims(image: &Tensor) -> Result<(usize, usize)> {
    let (c, h, w) = image.dims3()?;
    if c != 3 {
        return Err(Error::config(format!("expected a 3-channel input, got {c}")));
    }
    Ok((h, w))
}

/// Per-pixel background/foreground posterior for a zero-mean RGB tensor.
pub fn seg_forward(params: &NetworkParams, net: &Sequential, image: &Tensor) -> Result<ProbMap> {
    let (h, w) = image_dims(image)?;
    let mut g = Graph::new();
    let x = g.input(image.clone());
    let logits = seg_logits(&mut g, params, net, x, h, w)?;
    let p = g.softmax(logits)?;
    ProbMap::from_tensor(g.value(p))
}

/// Side-output edge maps and their fused map.
pub fn edge_forward(
    params: &NetworkParams,
    schedule: &EdgeSchedule,
    image: &Tensor,
) -> Result<(Vec<ProbMap>, ProbMap)> {
    let (h, w) = image_dims(image)?;
    let mut g = Graph::new();
    let x = g.input(image.clone());
    let vars = edge_logits(&mut g, params, schedule, x, h, w)?;
    let mut sides = Vec::with_capacity(vars.sides.len());
    for s in vars.sides {
        let p = g.sigmoid(s);
        sides.push(ProbMap::from_tensor(g.value(p))?);
    }
    let f = g.sigmoid(vars.fused);
    Ok((sides, ProbMap::from_tensor(g.value(f))?))
}

pub fn fuse_forward(
    params: &NetworkParams,
    net: &Sequential,
    bundle: &ChannelBundle,
) -> Result<ProbMap> {
    let mut g = Graph::new();
    let x = g.input(bundle.to_tensor());
    let logits = fusion_logits(&mut g, params, net, x)?;
    let p = g.softmax(logits)?;
    ProbMap::from_tensor(g.value(p))
}

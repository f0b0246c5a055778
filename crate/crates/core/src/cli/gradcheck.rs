//! Central-difference checks of every layer kind, both losses and the three
//! toy channel networks.

use rand::Rng;
use serde::Serialize;

use crate::channels::{channel_loss, init_edge, ChannelKind, EdgeSchedule, PipelineConfig, Target};
use crate::diffnet::{
    grad_check, seeded_rng, xavier_uniform, ConvGeometry, GradCheck, Graph, NetworkParams,
    Sequential, Tensor, Var,
};
use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckCase {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
    pub worst: Option<String>,
}

fn random_tensor(shape: &[usize], rng: &mut rand_chacha::ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    let v = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(shape.to_vec(), v).expect("consistent shape")
}

fn random_classes(n: usize, k: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..k)).collect()
}

fn record(name: &str, r: GradCheck) -> GradCheckCase {
    GradCheckCase {
        name: name.to_string(),
        max_rel_error: r.max_rel_error,
        checked: r.checked,
        worst: r.worst.map(|(n, i)| format!("{n}[{i}]")),
    }
}

/// A sequential stack read by cross entropy against random classes.
fn sequential_case(name: &str, net: &str, in_shape: [usize; 3], seed: u64, eps: f64) -> Result<GradCheckCase> {
    let net: Sequential = net.parse()?;
    let mut rng = seeded_rng(seed);
    let mut params = NetworkParams::new();
    net.init_params("n", &mut rng, &mut params)?;
    for (_, t) in params.iter_mut() {
        for v in t.values_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
    }
    let x = random_tensor(&in_shape, &mut rng);
    let (_, h, w) = x.dims3()?;
    let labels = random_classes(h * w, 2, &mut rng);
    let r = grad_check(&params, eps, |g, p| {
        let xv = g.input(x.clone());
        let y = net.forward(g, p, "n", xv)?;
        let y = g.resize(y, h, w)?;
        g.cross_entropy(y, &labels)
    })?;
    Ok(record(name, r))
}

/// Runs every case with finite-difference step `eps`.
pub fn gradcheck_suite(seed: u64, eps: f64) -> Result<Vec<GradCheckCase>> {
    let mut out = vec![
        sequential_case("conv", "conv 2->3 k3 d1; conv 3->2 k1 d1", [2, 6, 7], seed, eps)?,
        sequential_case("dilated_conv", "conv 2->3 k3 d2; conv 3->2 k3 d3", [2, 9, 8], seed + 1, eps)?,
        sequential_case("strided_conv", "conv 2->3 k3 d1 s2 p1; conv 3->2 k2 d1 s1 p0", [2, 8, 9], seed + 2, eps)?,
        sequential_case("relu", "conv 2->4 k3 d1; relu; conv 4->2 k1 d1", [2, 6, 6], seed + 3, eps)?,
        sequential_case("sigmoid", "conv 2->3 k3 d1; sigmoid; conv 3->2 k1 d1", [2, 6, 6], seed + 4, eps)?,
        sequential_case("softmax", "conv 2->3 k3 d1; softmax; conv 3->2 k1 d1", [2, 6, 6], seed + 5, eps)?,
        sequential_case("maxpool_stride1", "conv 2->3 k3 d1; pool w3 s1 p1; conv 3->2 k1 d1", [2, 7, 6], seed + 6, eps)?,
        sequential_case("maxpool_stride2", "conv 2->3 k3 d1; pool w2 s2; conv 3->2 k1 d1", [2, 8, 8], seed + 7, eps)?,
        sequential_case("upsample", "conv 2->2 k3 d1; pool w2 s2; upsample x2", [2, 8, 6], seed + 8, eps)?,
    ];

    // balanced sigmoid loss through a conv, plus concat/add/scale plumbing
    let mut rng = seeded_rng(seed + 9);
    let mut params = NetworkParams::new();
    params.insert("a", xavier_uniform(&[1, 2, 3, 3], &mut rng))?;
    params.insert("b", xavier_uniform(&[1, 2, 1, 1], &mut rng))?;
    let x = random_tensor(&[2, 7, 7], &mut rng);
    let edges: Vec<bool> = (0..49).map(|_| rng.gen_bool(0.3)).collect();
    let r = grad_check(&params, eps, |g, p| {
        let xv = g.input(x.clone());
        let (a, b) = (g.param(p, "a")?, g.param(p, "b")?);
        let ya = g.conv2d(xv, a, None, ConvGeometry::same(3, 1))?;
        let yb = g.conv2d(xv, b, None, ConvGeometry::same(1, 1))?;
        let both = g.concat(&[ya, yb])?;
        let sum = g.add(ya, yb)?;
        let half = g.scale(sum, 0.5);
        let l1 = g.balanced_bce(half, &edges)?;
        let l2 = g.cross_entropy(both, &random_classes(49, 2, &mut seeded_rng(seed)))?;
        g.sum(&[l1, l2])
    })?;
    out.push(record("balanced_bce_concat_add_scale", r));

    // channel networks with their training losses
    let mut cfg = PipelineConfig::default();
    cfg.seg = "conv 3->3 k3 d1; relu; pool w2 s2; conv 3->3 k3 d2; relu; pool w3 s1 p1; conv 3->2 k1 d1".parse()?;
    cfg.edge = "conv 3->3 k3 d1; relu | pool w2 s2; conv 3->3 k3 d1; relu | pool w3 s1 p1; conv 3->3 k3 d2".parse()?;
    cfg.fusion = "conv 3->3 k3 d1; relu; conv 3->3 k3 d2; relu; conv 3->3 k3 d4; relu; conv 3->2 k1 d1".parse()?;
    let mut rng = seeded_rng(seed + 10);
    let x = random_tensor(&[3, 10, 12], &mut rng);
    let classes = Target::Classes(random_classes(120, 2, &mut rng));
    let edges = Target::Edges((0..120).map(|_| rng.gen_bool(0.25)).collect());
    for (kind, target) in [
        (ChannelKind::Seg, &classes),
        (ChannelKind::Edge, &edges),
        (ChannelKind::Fusion, &classes),
    ] {
        let mut params = crate::channels::init_channel(kind, &cfg, seed + 11)?;
        if kind == ChannelKind::Edge {
            // break the symmetric 1/M start of the side weights
            for (i, v) in params.get_mut(crate::channels::EDGE_ALPHA).expect("alpha").values_mut().iter_mut().enumerate() {
                *v += 0.1 * i as f64;
            }
        }
        let r = grad_check(&params, eps, |g, p| channel_loss(g, p, &cfg, kind, &x, target))?;
        out.push(record(&format!("{kind}_network"), r));
    }
    Ok(out)
}

/// Side-loss-free variant of the edge loss, for checking that deep
/// supervision contributes gradient.
pub fn edge_gradients(
    schedule: &EdgeSchedule,
    params: &NetworkParams,
    x: &Tensor,
    edges: &[bool],
    include_sides: bool,
) -> Result<NetworkParams> {
    let (_, h, w) = x.dims3()?;
    let mut p = params.clone();
    p.zero_grads();
    let mut g = Graph::new();
    let xv: Var = g.input(x.clone());
    let vars = crate::channels::edge_logits(&mut g, &p, schedule, xv, h, w)?;
    let loss = crate::channels::edge_loss(&mut g, &vars, edges, include_sides)?;
    g.backward(loss)?;
    g.accumulate_param_grads(&mut p)?;
    Ok(p)
}

/// Initial edge parameters for [`edge_gradients`] tests.
pub fn edge_params(schedule: &EdgeSchedule, seed: u64) -> Result<NetworkParams> {
    init_edge(schedule, &mut seeded_rng(seed))
}

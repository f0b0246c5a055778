use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::graph::{Graph, Var};
use super::ops::ConvGeometry;
use super::params::{xavier_uniform, NetworkParams};
use super::tensor::Tensor;

/// One layer of a feed-forward network description.
///
/// Text form (used in run configs), one layer per `;`-separated item:
/// `conv 3->8 k3 d2 [s1] [p2]`, `relu`, `sigmoid`, `softmax`,
/// `pool w2 s2 [p0]`, `upsample x2`. A conv without `p` gets "same" padding
/// `dilation*(k-1)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        dilation: usize,
        padding: Option<usize>,
    },
    Relu,
    Sigmoid,
    Softmax,
    MaxPool {
        window: usize,
        stride: usize,
        padding: usize,
    },
    Upsample {
        factor: usize,
    },
}

impl LayerSpec {
    pub fn conv(in_ch: usize, out_ch: usize, kernel: usize, dilation: usize) -> Self {
        LayerSpec::Conv {
            in_ch,
            out_ch,
            kernel,
            stride: 1,
            dilation,
            padding: None,
        }
    }

    pub fn pool(window: usize, stride: usize, padding: usize) -> Self {
        LayerSpec::MaxPool {
            window,
            stride,
            padding,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                stride,
                dilation,
                ..
            } => {
                if in_ch == 0 || out_ch == 0 || kernel == 0 || stride == 0 || dilation == 0 {
                    return Err(Error::config(format!(
                        "invalid conv layer `{self}`: all sizes must be >= 1"
                    )));
                }
                if kernel % 2 == 0 && matches!(self, LayerSpec::Conv { padding: None, .. }) {
                    return Err(Error::config(format!(
                        "conv layer `{self}` needs explicit padding for an even kernel"
                    )));
                }
            }
            LayerSpec::MaxPool {
                window,
                stride,
                padding,
            } => {
                if window == 0 || stride == 0 || padding >= window {
                    return Err(Error::config(format!("invalid pool layer `{self}`")));
                }
            }
            LayerSpec::Upsample { factor } if factor == 0 => {
                return Err(Error::config("upsample factor must be >= 1"));
            }
            _ => {}
        }
        Ok(())
    }

    fn geometry(&self) -> Option<ConvGeometry> {
        match *self {
            LayerSpec::Conv {
                kernel,
                stride,
                dilation,
                padding,
                ..
            } => Some(ConvGeometry::new(
                stride,
                dilation,
                padding.unwrap_or(dilation * (kernel - 1) / 2),
            )),
            _ => None,
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                stride,
                dilation,
                padding,
            } => {
                write!(f, "conv {in_ch}->{out_ch} k{kernel} d{dilation}")?;
                if stride != 1 {
                    write!(f, " s{stride}")?;
                }
                if let Some(p) = padding {
                    write!(f, " p{p}")?;
                }
                Ok(())
            }
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::Sigmoid => f.write_str("sigmoid"),
            LayerSpec::Softmax => f.write_str("softmax"),
            LayerSpec::MaxPool {
                window,
                stride,
                padding,
            } => write!(f, "pool w{window} s{stride} p{padding}"),
            LayerSpec::Upsample { factor } => write!(f, "upsample x{factor}"),
        }
    }
}

fn tagged(tok: &str, tag: char, layer: &str) -> Result<usize> {
    tok.strip_prefix(tag)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::config(format!("bad token `{tok}` in layer `{layer}`")))
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let toks: Vec<&str> = s.split_whitespace().collect();
        let layer = match toks.as_slice() {
            ["relu"] => LayerSpec::Relu,
            ["sigmoid"] => LayerSpec::Sigmoid,
            ["softmax"] => LayerSpec::Softmax,
            ["upsample", x] => LayerSpec::Upsample {
                factor: tagged(x, 'x', s)?,
            },
            ["pool", rest @ ..] => {
                let (mut window, mut stride, mut padding) = (None, None, 0);
                for t in rest {
                    match t.chars().next() {
                        Some('w') => window = Some(tagged(t, 'w', s)?),
                        Some('s') => stride = Some(tagged(t, 's', s)?),
                        Some('p') => padding = tagged(t, 'p', s)?,
                        _ => return Err(Error::config(format!("bad token `{t}` in `{s}`"))),
                    }
                }
                let window =
                    window.ok_or_else(|| Error::config(format!("pool `{s}` needs w<N>")))?;
                LayerSpec::MaxPool {
                    window,
                    stride: stride.unwrap_or(window),
                    padding,
                }
            }
            ["conv", chans, rest @ ..] => {
                let (i, o) = chans
                    .split_once("->")
                    .and_then(|(i, o)| Some((i.parse().ok()?, o.parse().ok()?)))
                    .ok_or_else(|| Error::config(format!("conv `{s}` needs <in>-><out>")))?;
                let (mut kernel, mut stride, mut dilation, mut padding) = (None, 1, 1, None);
                for t in rest {
                    match t.chars().next() {
                        Some('k') => kernel = Some(tagged(t, 'k', s)?),
                        Some('s') => stride = tagged(t, 's', s)?,
                        Some('d') => dilation = tagged(t, 'd', s)?,
                        Some('p') => padding = Some(tagged(t, 'p', s)?),
                        _ => return Err(Error::config(format!("bad token `{t}` in `{s}`"))),
                    }
                }
                LayerSpec::Conv {
                    in_ch: i,
                    out_ch: o,
                    kernel: kernel
                        .ok_or_else(|| Error::config(format!("conv `{s}` needs k<N>")))?,
                    stride,
                    dilation,
                    padding,
                }
            }
            _ => return Err(Error::config(format!("unknown layer `{s}`"))),
        };
        layer.validate()?;
        Ok(layer)
    }
}

/// A chain of layers whose conv weights live in a [`NetworkParams`] under a prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequential {
    pub layers: Vec<LayerSpec>,
}

impl Sequential {
    pub fn new(layers: Vec<LayerSpec>) -> Self {
        Sequential { layers }
    }

    /// Checks that channel counts chain and returns the output channel count.
    pub fn validate(&self, in_channels: usize) -> Result<usize> {
        let mut ch = in_channels;
        for (i, l) in self.layers.iter().enumerate() {
            l.validate()?;
            if let LayerSpec::Conv { in_ch, out_ch, .. } = *l {
                if in_ch != ch {
                    return Err(Error::config(format!(
                        "layer {i} (`{l}`) expects {in_ch} channels but receives {ch}"
                    )));
                }
                ch = out_ch;
            }
        }
        Ok(ch)
    }

    pub fn param_names(prefix: &str, index: usize) -> (String, String) {
        (format!("{prefix}.l{index:02}.w"), format!("{prefix}.l{index:02}.b"))
    }

    pub fn init_params(
        &self,
        prefix: &str,
        rng: &mut ChaCha8Rng,
        params: &mut NetworkParams,
    ) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if let LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                ..
            } = *l
            {
                let (w, b) = Self::param_names(prefix, i);
                params.insert(w, xavier_uniform(&[out_ch, in_ch, kernel, kernel], rng))?;
                params.insert(b, Tensor::zeros(&[out_ch]))?;
            }
        }
        Ok(())
    }

    pub fn forward(
        &self,
        graph: &mut Graph,
        params: &NetworkParams,
        prefix: &str,
        mut x: Var,
    ) -> Result<Var> {
        for (i, l) in self.layers.iter().enumerate() {
            x = match *l {
                LayerSpec::Conv { .. } => {
                    let (w, b) = Self::param_names(prefix, i);
                    let w = graph.param(params, &w)?;
                    let b = graph.param(params, &b)?;
                    graph.conv2d(x, w, Some(b), l.geometry().expect("conv"))?
                }
                LayerSpec::Relu => graph.relu(x),
                LayerSpec::Sigmoid => graph.sigmoid(x),
                LayerSpec::Softmax => graph.softmax(x)?,
                LayerSpec::MaxPool {
                    window,
                    stride,
                    padding,
                } => graph.maxpool(x, window, stride, padding)?,
                LayerSpec::Upsample { factor } => graph.upsample(x, factor)?,
            };
        }
        Ok(x)
    }
}

impl fmt::Display for Sequential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.layers.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

impl FromStr for Sequential {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let layers = s
            .split(';')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Ok(Sequential { layers })
    }
}

//! Correlation encoder: densely connected convolutions lift the correlation
//! volume to `d_k` channels, then shifted-window self-attention blocks refine
//! the flattened tokens.

use candle_core::{DType, Device, Module, Result, Tensor};
use candle_nn::{linear, Conv2d, Linear, VarBuilder};

use super::attention::{softmax_last, LayerNorm, Mlp};
use super::config::NetworkConfig;
use super::layers::{pointwise, to_tokens, ConvNorm};

/// Dense block (each layer sees all previous outputs) followed by a 1×1 transition.
#[derive(Debug, Clone)]
pub struct DenseRaise {
    layers: Vec<ConvNorm>,
    transition: Conv2d,
}

impl DenseRaise {
    pub fn new(c_in: usize, growth: usize, n_layers: usize, c_out: usize, vb: VarBuilder) -> Result<Self> {
        let layers = (0..n_layers)
            .map(|l| ConvNorm::new(c_in + l * growth, growth, 3, 1, true, vb.pp(format!("dense_{l}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layers,
            transition: pointwise(c_in + n_layers * growth, c_out, vb.pp("transition"))?,
        })
    }
}

impl Module for DenseRaise {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut feats = x.clone();
        for layer in &self.layers {
            let y = layer.forward(&feats)?;
            feats = Tensor::cat(&[&feats, &y], 1)?;
        }
        self.transition.forward(&feats)
    }
}

/// Index into the `(2w-1)²` relative-position table for every query/key pair in a window.
pub fn relative_position_index(window: usize) -> Vec<u32> {
    let n = window * window;
    let side = 2 * window - 1;
    let mut idx = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let dy = (i / window) as isize - (j / window) as isize + window as isize - 1;
            let dx = (i % window) as isize - (j % window) as isize + window as isize - 1;
            idx.push((dy as usize * side + dx as usize) as u32);
        }
    }
    idx
}

/// Additive mask `(nW, N, N)` separating regions that the cyclic shift glued together.
pub fn shifted_window_mask(
    h: usize,
    w: usize,
    window: usize,
    shift: usize,
    dtype: DType,
    device: &Device,
) -> Result<Tensor> {
    let region = |i: usize, n: usize| -> usize {
        if i < n - window {
            0
        } else if i < n - shift {
            1
        } else {
            2
        }
    };
    let (nh, nw) = (h / window, w / window);
    let n = window * window;
    let mut mask = Vec::with_capacity(nh * nw * n * n);
    for wy in 0..nh {
        for wx in 0..nw {
            let ids: Vec<usize> = (0..n)
                .map(|p| {
                    let y = wy * window + p / window;
                    let x = wx * window + p % window;
                    region(y, h) * 3 + region(x, w)
                })
                .collect();
            for a in &ids {
                for b in &ids {
                    mask.push(if a == b { 0.0 } else { -100.0 });
                }
            }
        }
    }
    Tensor::from_vec(mask, (nh * nw, n, n), device)?.to_dtype(dtype)
}

/// Multi-head self-attention inside one window with a learned relative position bias.
#[derive(Debug, Clone)]
pub struct WindowAttention {
    qkv: Linear,
    proj: Linear,
    bias_table: Tensor,
    bias_index: Tensor,
    heads: usize,
    window: usize,
}

impl WindowAttention {
    pub fn new(dim: usize, heads: usize, window: usize, vb: VarBuilder) -> Result<Self> {
        let side = 2 * window - 1;
        let bias_table = vb.get_with_hints(
            (side * side, heads),
            "relative_position_bias_table",
            candle_nn::Init::Randn { mean: 0.0, stdev: 0.02 },
        )?;
        let idx = relative_position_index(window);
        Ok(Self {
            qkv: linear(dim, 3 * dim, vb.pp("qkv"))?,
            proj: linear(dim, dim, vb.pp("proj"))?,
            bias_index: Tensor::from_vec(idx, window.pow(4), vb.device())?,
            bias_table,
            heads,
            window,
        })
    }

    /// `x`: `(B·nW, N, C)`; `mask`: `(nW, N, N)`. Returns the output and the softmax weights.
    pub fn forward_with_weights(&self, x: &Tensor, mask: Option<&Tensor>) -> Result<(Tensor, Tensor)> {
        let (bw, n, c) = x.dims3()?;
        let hd = c / self.heads;
        let qkv = self
            .qkv
            .forward(x)?
            .reshape((bw, n, 3, self.heads, hd))?
            .permute((2, 0, 3, 1, 4))?
            .contiguous()?;
        let q = (qkv.get(0)? * (1.0 / (hd as f64).sqrt()))?;
        let k = qkv.get(1)?;
        let v = qkv.get(2)?;
        let bias = self
            .bias_table
            .index_select(&self.bias_index, 0)?
            .reshape((n, n, self.heads))?
            .permute((2, 0, 1))?;
        let mut logits = q.matmul(&k.t()?)?.broadcast_add(&bias.unsqueeze(0)?)?;
        if let Some(mask) = mask {
            let nw = mask.dim(0)?;
            logits = logits
                .reshape((bw / nw, nw, self.heads, n, n))?
                .broadcast_add(&mask.unsqueeze(1)?.unsqueeze(0)?)?
                .reshape((bw, self.heads, n, n))?;
        }
        let weights = softmax_last(&logits)?;
        let out = weights.matmul(&v)?.transpose(1, 2)?.reshape((bw, n, c))?;
        Ok((self.proj.forward(&out)?, weights))
    }

    pub fn window(&self) -> usize {
        self.window
    }
}

fn partition(x: &Tensor, window: usize) -> Result<Tensor> {
    let (b, h, w, c) = x.dims4()?;
    x.reshape((b, h / window, window, w / window, window, c))?
        .permute((0, 1, 3, 2, 4, 5))?
        .contiguous()?
        .reshape((b * (h / window) * (w / window), window * window, c))
}

fn unpartition(x: &Tensor, window: usize, b: usize, h: usize, w: usize) -> Result<Tensor> {
    let c = x.dim(2)?;
    x.reshape((b, h / window, w / window, window, window, c))?
        .permute((0, 1, 3, 2, 4, 5))?
        .contiguous()?
        .reshape((b, h, w, c))
}

/// Pre-norm windowed attention block; odd blocks use cyclically shifted windows.
#[derive(Debug, Clone)]
pub struct SwinBlock {
    norm1: LayerNorm,
    attn: WindowAttention,
    norm2: LayerNorm,
    mlp: Mlp,
    shift: usize,
    mask: Option<Tensor>,
    size: (usize, usize),
}

impl SwinBlock {
    pub fn new(cfg: &NetworkConfig, shift: usize, vb: VarBuilder) -> Result<Self> {
        let dim = cfg.feature_dim;
        let (w, h) = cfg.feature_size();
        let window = cfg.attn_window;
        let shift = if window >= h.min(w) { 0 } else { shift };
        let mask = if shift > 0 {
            Some(shifted_window_mask(h, w, window, shift, vb.dtype(), vb.device())?)
        } else {
            None
        };
        Ok(Self {
            norm1: LayerNorm::new(dim, vb.pp("norm1"))?,
            attn: WindowAttention::new(dim, cfg.attn_heads, window, vb.pp("attn"))?,
            norm2: LayerNorm::new(dim, vb.pp("norm2"))?,
            mlp: Mlp::new(dim, dim * cfg.mlp_ratio, vb.pp("mlp"))?,
            shift,
            mask,
            size: (h, w),
        })
    }

    pub fn shift(&self) -> usize {
        self.shift
    }

    /// `x`: `(B, h·w, C)`; returns the block output and the attention weights.
    pub fn forward_with_weights(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let (b, l, c) = x.dims3()?;
        let (h, w) = self.size;
        let window = self.attn.window();
        let s = self.shift as i32;
        let mut y = self.norm1.forward(x)?.reshape((b, h, w, c))?;
        if s > 0 {
            y = y.roll(-s, 1)?.roll(-s, 2)?;
        }
        let (attn, weights) = self.attn.forward_with_weights(&partition(&y, window)?, self.mask.as_ref())?;
        let mut y = unpartition(&attn, window, b, h, w)?;
        if s > 0 {
            y = y.roll(s, 1)?.roll(s, 2)?;
        }
        let x = (x + y.reshape((b, l, c))?)?;
        let out = (&x + self.mlp.forward(&self.norm2.forward(&x)?)?)?;
        Ok((out, weights))
    }
}

/// Dimension raise plus optional windowed-attention blocks.
#[derive(Debug, Clone)]
pub struct CorrelationEncoder {
    raise: DenseRaise,
    blocks: Vec<SwinBlock>,
    norm: Option<LayerNorm>,
}

impl CorrelationEncoder {
    pub fn new(cfg: &NetworkConfig, vb: VarBuilder) -> Result<Self> {
        let raise = DenseRaise::new(
            cfg.corr_channels(),
            cfg.dense_growth,
            cfg.dense_layers,
            cfg.feature_dim,
            vb.pp("raise"),
        )?;
        let (blocks, norm) = if cfg.use_encoder {
            let blocks = (0..cfg.encoder_layers)
                .map(|i| {
                    let shift = if i % 2 == 1 { cfg.attn_window / 2 } else { 0 };
                    SwinBlock::new(cfg, shift, vb.pp(format!("block_{i}")))
                })
                .collect::<Result<Vec<_>>>()?;
            (blocks, Some(LayerNorm::new(cfg.feature_dim, vb.pp("norm"))?))
        } else {
            (Vec::new(), None)
        };
        Ok(Self { raise, blocks, norm })
    }

    pub fn blocks(&self) -> &[SwinBlock] {
        &self.blocks
    }

    /// Dimension-raised tokens `(B, h·w, d_k)` before any attention.
    pub fn raise(&self, corr: &Tensor) -> Result<Tensor> {
        to_tokens(&self.raise.forward(corr)?)
    }

    /// Memory tokens `(B, h·w, d_k)`, row-major over the feature grid.
    pub fn forward(&self, corr: &Tensor) -> Result<Tensor> {
        let mut x = self.raise(corr)?;
        for block in &self.blocks {
            x = block.forward_with_weights(&x)?.0;
        }
        match &self.norm {
            Some(n) => n.forward(&x),
            None => Ok(x),
        }
    }
}

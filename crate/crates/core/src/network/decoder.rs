//! Single-query transformer decoder and the pose regression heads.

use candle_core::{Module, Result, Tensor, D};
use candle_nn::{linear, Linear, VarBuilder};

use super::attention::{LayerNorm, Mlp, MultiHeadAttention};
use super::config::NetworkConfig;

/// Normalized pixel-centre coordinates `((x+0.5)/w, (y+0.5)/h)` of an `h×w` grid, row-major.
pub fn grid_coordinates(w: usize, h: usize) -> Vec<[f64; 2]> {
    (0..h)
        .flat_map(|y| (0..w).map(move |x| [(x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64]))
        .collect()
}

/// Learned positional embedding: `2 → d_k → d_k` MLP on grid coordinates.
#[derive(Debug, Clone)]
pub struct PositionMlp {
    fc1: Linear,
    fc2: Linear,
    coords: Tensor,
}

impl PositionMlp {
    pub fn new(cfg: &NetworkConfig, vb: VarBuilder) -> Result<Self> {
        let (w, h) = cfg.feature_size();
        let flat: Vec<f64> = grid_coordinates(w, h).into_iter().flatten().collect();
        let coords = Tensor::from_vec(flat, (h * w, 2), vb.device())?.to_dtype(vb.dtype())?;
        Ok(Self {
            fc1: linear(2, cfg.feature_dim, vb.pp("fc1"))?,
            fc2: linear(cfg.feature_dim, cfg.feature_dim, vb.pp("fc2"))?,
            coords,
        })
    }

    /// `(1, h·w, d_k)`.
    pub fn embedding(&self) -> Result<Tensor> {
        self.fc2.forward(&self.fc1.forward(&self.coords)?.relu()?)?.unsqueeze(0)
    }
}

/// Post-norm decoder layer: self-attention, cross-attention over memory, MLP.
#[derive(Debug, Clone)]
pub struct DecoderLayer {
    self_attn: MultiHeadAttention,
    norm1: LayerNorm,
    cross_attn: MultiHeadAttention,
    norm2: LayerNorm,
    mlp: Mlp,
    norm3: LayerNorm,
}

impl DecoderLayer {
    pub fn new(cfg: &NetworkConfig, vb: VarBuilder) -> Result<Self> {
        let d = cfg.feature_dim;
        Ok(Self {
            self_attn: MultiHeadAttention::new(d, cfg.attn_heads, vb.pp("self_attn"))?,
            norm1: LayerNorm::new(d, vb.pp("norm1"))?,
            cross_attn: MultiHeadAttention::new(d, cfg.attn_heads, vb.pp("cross_attn"))?,
            norm2: LayerNorm::new(d, vb.pp("norm2"))?,
            mlp: Mlp::new(d, d * cfg.mlp_ratio, vb.pp("mlp"))?,
            norm3: LayerNorm::new(d, vb.pp("norm3"))?,
        })
    }

    /// `query`: `(B, 1, d)`; `memory`: `(B, L, d)`; `keys`: memory with positions added.
    /// Returns the updated query and the cross-attention weights `(B, heads, 1, L)`.
    pub fn forward(&self, query: &Tensor, memory: &Tensor, keys: &Tensor) -> Result<(Tensor, Tensor)> {
        let q = self.norm1.forward(&(query + self.self_attn.forward(query, query, query)?)?)?;
        let (ctx, weights) = self.cross_attn.forward_with_weights(&q, keys, memory)?;
        let q = self.norm2.forward(&(q + ctx)?)?;
        let q = self.norm3.forward(&(&q + self.mlp.forward(&q)?)?)?;
        Ok((q, weights))
    }
}

#[derive(Debug, Clone)]
pub struct PoseDecoder {
    layers: Vec<DecoderLayer>,
    pos: PositionMlp,
}

impl PoseDecoder {
    pub fn new(cfg: &NetworkConfig, vb: VarBuilder) -> Result<Self> {
        let layers = (0..cfg.decoder_layers)
            .map(|i| DecoderLayer::new(cfg, vb.pp(format!("layer_{i}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layers,
            pos: PositionMlp::new(cfg, vb.pp("pos"))?,
        })
    }

    /// `query`: `(B, d)`; `memory`: `(B, L, d)`. Returns the decoded query `(B, d)`.
    pub fn forward(&self, query: &Tensor, memory: &Tensor) -> Result<Tensor> {
        let keys = memory.broadcast_add(&self.pos.embedding()?)?;
        let mut q = query.unsqueeze(1)?;
        for layer in &self.layers {
            q = layer.forward(&q, memory, &keys)?.0;
        }
        q.squeeze(1)
    }
}

/// Unit quaternions with non-negative scalar part, row-wise over `(B, 4)`.
pub fn normalize_quaternion(q: &Tensor) -> Result<Tensor> {
    let norm = q.sqr()?.sum_keepdim(D::Minus1)?.sqrt()?;
    let q = q.broadcast_div(&norm)?;
    let w = q.narrow(1, 0, 1)?;
    let sign = w.ge(0.0)?.to_dtype(q.dtype())?.affine(2.0, -1.0)?.detach();
    q.broadcast_mul(&sign)
}

/// Two small MLP heads: translation `(B, 3)` and unit quaternion `(B, 4)`.
#[derive(Debug, Clone)]
pub struct PoseHeads {
    t_hidden: Linear,
    t_out: Linear,
    r_hidden: Linear,
    r_out: Linear,
}

fn small_linear(c_in: usize, c_out: usize, vb: VarBuilder) -> Result<Linear> {
    let w = vb.get_with_hints((c_out, c_in), "weight", candle_nn::Init::Randn { mean: 0.0, stdev: 0.01 })?;
    let b = vb.get_with_hints(c_out, "bias", candle_nn::init::ZERO)?;
    Ok(Linear::new(w, Some(b)))
}

impl PoseHeads {
    pub fn new(dim: usize, vb: VarBuilder) -> Result<Self> {
        Ok(Self {
            t_hidden: linear(dim, dim, vb.pp("t_hidden"))?,
            t_out: small_linear(dim, 3, vb.pp("t_out"))?,
            r_hidden: linear(dim, dim, vb.pp("r_hidden"))?,
            r_out: small_linear(dim, 4, vb.pp("r_out"))?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let t = self.t_out.forward(&self.t_hidden.forward(x)?.relu()?)?;
        let raw = self.r_out.forward(&self.r_hidden.forward(x)?.relu()?)?;
        // bias toward the identity rotation
        let identity = Tensor::new(&[1.0f64, 0.0, 0.0, 0.0], x.device())?.to_dtype(x.dtype())?;
        let q = normalize_quaternion(&raw.broadcast_add(&identity)?)?;
        Ok((t, q))
    }
}

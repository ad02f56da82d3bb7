//! Windowed multi-head correlation between LiDAR and camera feature maps.
//!
//! Queries come from the LiDAR map and keys from the camera map (swappable).
//! For head `i`, query position `p` and offset `o` with `‖o‖∞ ≤ d`:
//!
//! ```text
//! corr[i, o, p] = ⟨W_i^Q q(p), W_i^K k(p + o)⟩ / √(d_k / n)
//! ```
//!
//! Offsets that leave the map read zero-padded keys and therefore hold 0.
//! Channel layout is head-major, then offset row-major (`dy` outer, `dx` inner):
//! channel `i·(2d+1)² + (dy+d)·(2d+1) + (dx+d)`.

use candle_core::{Module, Result, Tensor};
use candle_nn::{conv2d_no_bias, Conv2d, Conv2dConfig, VarBuilder};

use super::config::NetworkConfig;

#[derive(Debug, Clone)]
pub struct MultiHeadCorrelation {
    projections: Option<(Conv2d, Conv2d)>,
    heads: usize,
    window: usize,
    swap: bool,
}

impl MultiHeadCorrelation {
    pub fn new(cfg: &NetworkConfig, vb: VarBuilder) -> Result<Self> {
        let projections = if cfg.use_multihead {
            let d = cfg.feature_dim;
            Some((
                conv2d_no_bias(d, d, 1, Conv2dConfig::default(), vb.pp("w_q"))?,
                conv2d_no_bias(d, d, 1, Conv2dConfig::default(), vb.pp("w_k"))?,
            ))
        } else {
            None
        };
        Ok(Self {
            projections,
            heads: cfg.effective_corr_heads(),
            window: cfg.corr_window,
            swap: cfg.swap_query_key,
        })
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// `(B, (2d+1)²·n, h, w)` correlation volume.
    pub fn forward(&self, f_lidar: &Tensor, f_cam: &Tensor) -> Result<Tensor> {
        if f_lidar.dims() != f_cam.dims() {
            candle_core::bail!(
                "correlation inputs differ in shape: {:?} vs {:?}",
                f_lidar.dims(),
                f_cam.dims()
            );
        }
        let (queries, keys) = if self.swap { (f_cam, f_lidar) } else { (f_lidar, f_cam) };
        let (q, k) = match &self.projections {
            Some((wq, wk)) => (wq.forward(queries)?, wk.forward(keys)?),
            None => (queries.clone(), keys.clone()),
        };
        windowed_correlation(&q, &k, self.heads, self.window)
    }
}

/// Correlation of already-projected maps `(B, C, h, w)` split into `heads` groups of `C / heads`.
pub fn windowed_correlation(q: &Tensor, k: &Tensor, heads: usize, window: usize) -> Result<Tensor> {
    let (b, c, h, w) = q.dims4()?;
    if c % heads != 0 {
        candle_core::bail!("{c} channels not divisible by {heads} heads");
    }
    let dh = c / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = q.reshape((b, heads, dh, h, w))?;
    let kp = k
        .reshape((b, heads, dh, h, w))?
        .pad_with_zeros(3, window, window)?
        .pad_with_zeros(4, window, window)?;
    let side = 2 * window + 1;
    let mut planes = Vec::with_capacity(side * side);
    for dy in 0..side {
        let rows = kp.narrow(3, dy, h)?;
        for dx in 0..side {
            let shifted = rows.narrow(4, dx, w)?;
            planes.push((&q * shifted)?.sum(2)?);
        }
    }
    Tensor::stack(&planes, 2)?
        .reshape((b, heads * side * side, h, w))?
        .affine(scale, 0.0)
}

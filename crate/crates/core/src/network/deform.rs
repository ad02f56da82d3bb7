//! Modulated deformable 3×3 convolution (stride 1, padding 1).
//!
//! Each output pixel samples the input at the regular kernel taps shifted by a
//! learned `(dy, dx)` offset and scaled by a learned sigmoid mask. Sampling is
//! bilinear; corners outside the input contribute zero. Offsets come from a
//! zero-initialized 3×3 convolution, so at initialization the layer is a plain
//! convolution scaled by 0.5.

use candle_core::{DType, Module, Result, Tensor};
use candle_nn::{init, Conv2d, Conv2dConfig, VarBuilder};

const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

#[derive(Debug, Clone)]
pub struct DeformConv2d {
    weight: Tensor,
    bias: Tensor,
    offset_conv: Conv2d,
}

impl DeformConv2d {
    pub fn new(c_in: usize, c_out: usize, vb: VarBuilder) -> Result<Self> {
        let weight = vb.get_with_hints((c_out, c_in, KERNEL, KERNEL), "weight", init::DEFAULT_KAIMING_NORMAL)?;
        let bias = vb.get_with_hints(c_out, "bias", init::ZERO)?;
        let ovb = vb.pp("offset");
        let ow = ovb.get_with_hints((3 * TAPS, c_in, KERNEL, KERNEL), "weight", init::ZERO)?;
        let ob = ovb.get_with_hints(3 * TAPS, "bias", init::ZERO)?;
        let offset_conv = Conv2d::new(
            ow,
            Some(ob),
            Conv2dConfig {
                padding: 1,
                ..Default::default()
            },
        );
        Ok(Self {
            weight,
            bias,
            offset_conv,
        })
    }
}

impl Module for DeformConv2d {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let om = self.offset_conv.forward(x)?;
        let offsets = om.narrow(1, 0, 2 * TAPS)?;
        let mask = candle_nn::ops::sigmoid(&om.narrow(1, 2 * TAPS, TAPS)?)?;
        deform_conv2d(x, &offsets, &mask, &self.weight, Some(&self.bias))
    }
}

struct Corner {
    index: Tensor,
    valid: Tensor,
}

/// Modulated deformable convolution with a 3×3 kernel, stride 1 and padding 1.
///
/// * `x`: `(B, C, H, W)`
/// * `offsets`: `(B, 18, H, W)`, channel `2k` is `dy` and `2k+1` is `dx` of tap `k` (row-major)
/// * `mask`: `(B, 9, H, W)`
/// * `weight`: `(O, C, 3, 3)`
pub fn deform_conv2d(
    x: &Tensor,
    offsets: &Tensor,
    mask: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    let o = weight.dim(0)?;
    let hw = h * w;
    let dtype = x.dtype();
    let dev = x.device();
    let w2 = weight.reshape((o, c * TAPS))?;
    let mut outs = Vec::with_capacity(b);
    for bi in 0..b {
        let xb = x.get(bi)?.reshape((c, hw))?;
        let ob = offsets.get(bi)?;
        let mb = mask.get(bi)?;
        let off_vals: Vec<f64> = ob.to_dtype(DType::F64)?.flatten_all()?.to_vec1()?;
        let mut taps = Vec::with_capacity(TAPS);
        for t in 0..TAPS {
            let (ki, kj) = ((t / KERNEL) as f64, (t % KERNEL) as f64);
            let dy_vals = &off_vals[(2 * t) * hw..(2 * t + 1) * hw];
            let dx_vals = &off_vals[(2 * t + 1) * hw..(2 * t + 2) * hw];
            let mut base_fy = vec![0f64; hw];
            let mut base_fx = vec![0f64; hw];
            let mut idx = [vec![0u32; hw], vec![0u32; hw], vec![0u32; hw], vec![0u32; hw]];
            let mut valid = [vec![0f64; hw], vec![0f64; hw], vec![0f64; hw], vec![0f64; hw]];
            for p in 0..hw {
                let (y, xx) = ((p / w) as f64, (p % w) as f64);
                let gy = y - 1.0 + ki;
                let gx = xx - 1.0 + kj;
                let py = gy + dy_vals[p];
                let px = gx + dx_vals[p];
                let (y0, x0) = (py.floor(), px.floor());
                base_fy[p] = gy - y0;
                base_fx[p] = gx - x0;
                for (ci, (cy, cx)) in [(y0, x0), (y0, x0 + 1.0), (y0 + 1.0, x0), (y0 + 1.0, x0 + 1.0)]
                    .into_iter()
                    .enumerate()
                {
                    if cy >= 0.0 && cx >= 0.0 && cy < h as f64 && cx < w as f64 {
                        idx[ci][p] = (cy as usize * w + cx as usize) as u32;
                        valid[ci][p] = 1.0;
                    }
                }
            }
            let to_t = |v: Vec<f64>| -> Result<Tensor> { Tensor::from_vec(v, hw, dev)?.to_dtype(dtype) };
            let fy = (ob.get(2 * t)?.flatten_all()? + to_t(base_fy)?)?;
            let fx = (ob.get(2 * t + 1)?.flatten_all()? + to_t(base_fx)?)?;
            let gy = fy.affine(-1.0, 1.0)?;
            let gx = fx.affine(-1.0, 1.0)?;
            let weights = [(&gy, &gx), (&gy, &fx), (&fy, &gx), (&fy, &fx)];
            let mut sampled: Option<Tensor> = None;
            for ((ix, vd), (wy, wx)) in idx.into_iter().zip(valid).zip(weights) {
                let corner = Corner {
                    index: Tensor::from_vec(ix, hw, dev)?,
                    valid: to_t(vd)?,
                };
                let wgt = ((wy * wx)? * corner.valid)?;
                let term = xb.index_select(&corner.index, 1)?.broadcast_mul(&wgt.unsqueeze(0)?)?;
                sampled = Some(match sampled {
                    None => term,
                    Some(s) => (s + term)?,
                });
            }
            let m = mb.get(t)?.flatten_all()?.unsqueeze(0)?;
            taps.push(sampled.expect("four corners").broadcast_mul(&m)?);
        }
        let cols = Tensor::stack(&taps, 1)?.reshape((c * TAPS, hw))?;
        let mut y = w2.matmul(&cols)?;
        if let Some(bias) = bias {
            y = y.broadcast_add(&bias.unsqueeze(1)?)?;
        }
        outs.push(y.reshape((o, h, w))?);
    }
    Tensor::stack(&outs, 0)
}

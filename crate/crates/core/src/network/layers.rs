//! Small building blocks shared by the network modules.

use candle_core::{DType, Device, Module, Result, Tensor};
use candle_nn::{conv2d, conv2d_no_bias, group_norm, Conv2d, Conv2dConfig, GroupNorm, VarBuilder};

use super::deform::DeformConv2d;

/// Largest group count ≤ 8 dividing `channels`.
pub fn norm_groups(channels: usize) -> usize {
    (1..=8).rev().find(|g| channels % g == 0).unwrap_or(1)
}

pub fn gn(channels: usize, vb: VarBuilder) -> Result<GroupNorm> {
    group_norm(norm_groups(channels), channels, 1e-5, vb)
}

fn conv_cfg(padding: usize, stride: usize) -> Conv2dConfig {
    Conv2dConfig {
        padding,
        stride,
        ..Default::default()
    }
}

/// `k×k` convolution (no bias) → GroupNorm → optional ReLU.
#[derive(Debug, Clone)]
pub struct ConvNorm {
    conv: Conv2d,
    norm: GroupNorm,
    relu: bool,
}

impl ConvNorm {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        relu: bool,
        vb: VarBuilder,
    ) -> Result<Self> {
        Ok(Self {
            conv: conv2d_no_bias(c_in, c_out, kernel, conv_cfg(kernel / 2, stride), vb.pp("conv"))?,
            norm: gn(c_out, vb.pp("norm"))?,
            relu,
        })
    }
}

impl Module for ConvNorm {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = self.norm.forward(&self.conv.forward(x)?)?;
        if self.relu {
            y.relu()
        } else {
            Ok(y)
        }
    }
}

/// 3×3 unit of the aggregation up-path: (deformable) conv → GroupNorm → ReLU.
#[derive(Debug, Clone)]
pub enum UpConv {
    Plain(ConvNorm),
    Deformable { conv: DeformConv2d, norm: GroupNorm },
}

impl UpConv {
    pub fn new(c_in: usize, c_out: usize, deformable: bool, vb: VarBuilder) -> Result<Self> {
        if deformable {
            Ok(Self::Deformable {
                conv: DeformConv2d::new(c_in, c_out, vb.pp("dconv"))?,
                norm: gn(c_out, vb.pp("norm"))?,
            })
        } else {
            Ok(Self::Plain(ConvNorm::new(c_in, c_out, 3, 1, true, vb)?))
        }
    }
}

impl Module for UpConv {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Self::Plain(c) => c.forward(x),
            Self::Deformable { conv, norm } => norm.forward(&conv.forward(x)?)?.relu(),
        }
    }
}

/// 1×1 convolution with bias, i.e. a per-pixel linear map.
pub fn pointwise(c_in: usize, c_out: usize, vb: VarBuilder) -> Result<Conv2d> {
    conv2d(c_in, c_out, 1, Conv2dConfig::default(), vb)
}

/// `(n_out × n_in)` linear interpolation matrix for half-pixel-centred upsampling by `factor`.
pub fn interp_matrix(n_in: usize, factor: usize, dtype: DType, device: &Device) -> Result<Tensor> {
    let n_out = n_in * factor;
    let mut m = vec![0f64; n_out * n_in];
    for o in 0..n_out {
        let src = ((o as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(n_in - 1);
        let w = src - i0 as f64;
        m[o * n_in + i0] += 1.0 - w;
        m[o * n_in + i1] += w;
    }
    Tensor::from_vec(m, (n_out, n_in), device)?.to_dtype(dtype)
}

/// Bilinear upsampling of `(B, C, H, W)` by an integer factor, as two interpolation matmuls.
pub fn upsample_bilinear(x: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 1 {
        return Ok(x.clone());
    }
    let (_, _, h, w) = x.dims4()?;
    let ah = interp_matrix(h, factor, x.dtype(), x.device())?;
    let awt = interp_matrix(w, factor, x.dtype(), x.device())?.t()?.contiguous()?;
    let y = x.broadcast_matmul(&awt)?;
    ah.broadcast_matmul(&y)
}

/// `(B, C, H, W)` → `(B, H·W, C)`.
pub fn to_tokens(x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    x.reshape((b, c, h * w))?.transpose(1, 2)?.contiguous()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interp_rows_sum_to_one() {
        let m = interp_matrix(5, 4, DType::F64, &Device::Cpu).unwrap();
        let sums: Vec<f64> = m.sum(1).unwrap().to_vec1().unwrap();
        assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn upsample_constant_and_ramp() {
        let dev = Device::Cpu;
        let x = Tensor::full(3.0f64, (1, 2, 3, 4), &dev).unwrap();
        let y = upsample_bilinear(&x, 2).unwrap();
        assert_eq!(y.dims(), &[1, 2, 6, 8]);
        let v: Vec<f64> = y.flatten_all().unwrap().to_vec1().unwrap();
        assert!(v.iter().all(|&a| (a - 3.0).abs() < 1e-12));
        // interior of a linear ramp stays linear
        let ramp = Tensor::new(&[[[[0.0f64, 1.0, 2.0, 3.0]]]], &dev).unwrap();
        let up: Vec<f64> = upsample_bilinear(&ramp, 2).unwrap().flatten_all().unwrap().to_vec1().unwrap();
        assert_eq!(up.len(), 16);
        for (i, v) in up.iter().enumerate().take(7).skip(1) {
            assert!((v - ((i as f64 + 0.5) / 2.0 - 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn groups() {
        assert_eq!(norm_groups(64), 8);
        assert_eq!(norm_groups(12), 6);
        assert_eq!(norm_groups(7), 7);
        assert_eq!(norm_groups(11), 1);
    }
}

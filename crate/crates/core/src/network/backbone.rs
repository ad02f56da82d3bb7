//! ResNet-18 feature pyramid with GroupNorm in place of BatchNorm.

use candle_core::{Module, Result, Tensor};
use candle_nn::VarBuilder;

use super::layers::ConvNorm;

#[derive(Debug, Clone)]
struct BasicBlock {
    conv1: ConvNorm,
    conv2: ConvNorm,
    downsample: Option<ConvNorm>,
}

impl BasicBlock {
    fn new(c_in: usize, c_out: usize, stride: usize, vb: VarBuilder) -> Result<Self> {
        let downsample = if stride != 1 || c_in != c_out {
            Some(ConvNorm::new(c_in, c_out, 1, stride, false, vb.pp("downsample"))?)
        } else {
            None
        };
        Ok(Self {
            conv1: ConvNorm::new(c_in, c_out, 3, stride, true, vb.pp("conv1"))?,
            conv2: ConvNorm::new(c_out, c_out, 3, 1, false, vb.pp("conv2"))?,
            downsample,
        })
    }
}

impl Module for BasicBlock {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = self.conv2.forward(&self.conv1.forward(x)?)?;
        let skip = match &self.downsample {
            Some(d) => d.forward(x)?,
            None => x.clone(),
        };
        (y + skip)?.relu()
    }
}

/// 3×3 max-pool, stride 2, padding 1, as shifted maxima (candle has no backward for
/// overlapping pooling windows).
pub fn max_pool_3x3_s2(x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        candle_core::bail!("max_pool_3x3_s2 needs even spatial dims, got {h}x{w}");
    }
    // inputs are post-ReLU, so zero padding is equivalent to -inf padding
    let p = x.pad_with_zeros(2, 1, 1)?.pad_with_zeros(3, 1, 1)?;
    let mut m: Option<Tensor> = None;
    for dy in 0..3 {
        for dx in 0..3 {
            let s = p.narrow(2, dy, h)?.narrow(3, dx, w)?;
            m = Some(match m {
                Some(m) => m.maximum(&s)?,
                None => s,
            });
        }
    }
    let m = m.expect("nine taps");
    m.reshape((b, c, h / 2, 2, w / 2, 2))?
        .narrow(3, 0, 1)?
        .narrow(5, 0, 1)?
        .reshape((b, c, h / 2, w / 2))
}

/// Stem (7×7/2 conv + 3×3/2 max-pool) and four stages of two basic blocks.
///
/// Returns stage outputs at strides 4, 8, 16 and 32.
#[derive(Debug, Clone)]
pub struct ResNet18 {
    stem: ConvNorm,
    stages: Vec<[BasicBlock; 2]>,
    channels: [usize; 4],
}

impl ResNet18 {
    pub fn new(in_channels: usize, channels: [usize; 4], vb: VarBuilder) -> Result<Self> {
        let stem = ConvNorm::new(in_channels, channels[0], 7, 2, true, vb.pp("stem"))?;
        let mut stages = Vec::with_capacity(4);
        let mut c_prev = channels[0];
        for (i, &c) in channels.iter().enumerate() {
            let stride = if i == 0 { 1 } else { 2 };
            let svb = vb.pp(format!("layer{}", i + 1));
            stages.push([
                BasicBlock::new(c_prev, c, stride, svb.pp("0"))?,
                BasicBlock::new(c, c, 1, svb.pp("1"))?,
            ]);
            c_prev = c;
        }
        Ok(Self {
            stem,
            stages,
            channels,
        })
    }

    pub fn channels(&self) -> [usize; 4] {
        self.channels
    }

    pub fn forward_stages(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let s = self.stem.forward(x)?;
        let mut h = max_pool_3x3_s2(&s)?;
        let mut outs = Vec::with_capacity(4);
        for [b0, b1] in &self.stages {
            h = b1.forward(&b0.forward(&h)?)?;
            outs.push(h.clone());
        }
        Ok(outs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};
    use candle_nn::VarMap;

    #[test]
    fn max_pool_matches_reference() {
        let x = Tensor::arange(0f32, 2.0 * 6.0 * 8.0, &Device::Cpu)
            .unwrap()
            .reshape((1, 2, 6, 8))
            .unwrap()
            .sin()
            .unwrap()
            .relu()
            .unwrap();
        let reference = x
            .pad_with_zeros(2, 1, 1)
            .unwrap()
            .pad_with_zeros(3, 1, 1)
            .unwrap()
            .max_pool2d_with_stride(3, 2)
            .unwrap();
        let ours = max_pool_3x3_s2(&x).unwrap();
        assert_eq!(ours.dims(), reference.dims());
        let d = (ours - reference).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f32>().unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn stage_strides() {
        let vm = VarMap::new();
        let vb = VarBuilder::from_varmap(&vm, DType::F32, &Device::Cpu);
        let net = ResNet18::new(2, [4, 8, 16, 32], vb).unwrap();
        let x = Tensor::zeros((1, 2, 64, 128), DType::F32, &Device::Cpu).unwrap();
        let outs = net.forward_stages(&x).unwrap();
        let dims: Vec<_> = outs.iter().map(|t| t.dims().to_vec()).collect();
        assert_eq!(
            dims,
            vec![vec![1, 4, 16, 32], vec![1, 8, 8, 16], vec![1, 16, 4, 8], vec![1, 32, 2, 4]]
        );
    }
}

//! Deep layer aggregation over backbone stages.
//!
//! Iterative aggregation (`IdaUp`) repeatedly projects a coarse map, upsamples
//! it ×2 and fuses it with the next finer map. `DlaUp` runs one IdaUp per level,
//! so every scale receives skip connections from all coarser ones; a final IdaUp
//! merges the per-scale outputs into one map at the finest requested stride.

use candle_core::{Module, Result, Tensor};
use candle_nn::{Conv2d, VarBuilder};

use super::backbone::ResNet18;
use super::config::NetworkConfig;
use super::layers::{pointwise, upsample_bilinear, UpConv};

#[derive(Debug, Clone)]
struct IdaUp {
    projs: Vec<UpConv>,
    nodes: Vec<UpConv>,
    factors: Vec<usize>,
}

impl IdaUp {
    /// `channels[0]`/`factors[0]` describe the target level; later entries are fused into it.
    fn new(out: usize, channels: &[usize], factors: &[usize], deformable: bool, vb: VarBuilder) -> Result<Self> {
        let mut projs = Vec::new();
        let mut nodes = Vec::new();
        for (i, &c) in channels.iter().enumerate().skip(1) {
            projs.push(UpConv::new(c, out, deformable, vb.pp(format!("proj_{i}")))?);
            nodes.push(UpConv::new(out, out, deformable, vb.pp(format!("node_{i}")))?);
        }
        Ok(Self {
            projs,
            nodes,
            factors: factors.to_vec(),
        })
    }

    fn forward(&self, layers: &mut [Tensor], start: usize, end: usize) -> Result<()> {
        for i in start + 1..end {
            let k = i - start;
            let up = upsample_bilinear(&self.projs[k - 1].forward(&layers[i])?, self.factors[k])?;
            layers[i] = self.nodes[k - 1].forward(&(up + &layers[i - 1])?)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct DlaUp {
    idas: Vec<IdaUp>,
}

impl DlaUp {
    fn new(channels: &[usize], deformable: bool, vb: VarBuilder) -> Result<Self> {
        let n = channels.len();
        let mut in_ch = channels.to_vec();
        let mut scales: Vec<usize> = (0..n).map(|i| 1 << i).collect();
        let mut idas = Vec::new();
        for i in 0..n.saturating_sub(1) {
            let j = n - i - 2;
            let factors: Vec<usize> = scales[j..].iter().map(|s| s / scales[j]).collect();
            idas.push(IdaUp::new(channels[j], &in_ch[j..], &factors, deformable, vb.pp(format!("ida_{i}")))?);
            for k in j + 1..n {
                scales[k] = scales[j];
                in_ch[k] = channels[j];
            }
        }
        Ok(Self { idas })
    }

    /// Per-scale aggregated maps, finest first.
    fn forward(&self, mut layers: Vec<Tensor>) -> Result<Vec<Tensor>> {
        let n = layers.len();
        let mut out = vec![layers[n - 1].clone()];
        for (i, ida) in self.idas.iter().enumerate() {
            ida.forward(&mut layers, n - i - 2, n)?;
            out.insert(0, layers[n - 1].clone());
        }
        Ok(out)
    }
}

/// Backbone + aggregation producing a `feature_dim`-channel map at `32 / upsample_rate` stride.
#[derive(Debug, Clone)]
pub struct FeatureBranch {
    backbone: ResNet18,
    first_level: usize,
    dla_up: Option<DlaUp>,
    ida_up: Option<IdaUp>,
    out_proj: Conv2d,
}

impl FeatureBranch {
    pub fn new(in_channels: usize, cfg: &NetworkConfig, vb: VarBuilder) -> Result<Self> {
        let stage_ch = cfg.stage_channels();
        let backbone = ResNet18::new(in_channels, stage_ch, vb.pp("backbone"))?;
        let levels = cfg.upsample_rate.trailing_zeros() as usize + 1;
        let first_level = 4 - levels;
        let used = &stage_ch[first_level..];
        let (dla_up, ida_up) = if levels > 1 {
            let dla = DlaUp::new(used, cfg.deformable, vb.pp("dla_up"))?;
            let factors: Vec<usize> = (0..levels - 1).map(|i| 1 << i).collect();
            let ida = IdaUp::new(used[0], &used[..levels - 1], &factors, cfg.deformable, vb.pp("ida_up"))?;
            (Some(dla), Some(ida))
        } else {
            (None, None)
        };
        Ok(Self {
            backbone,
            first_level,
            dla_up,
            ida_up,
            out_proj: pointwise(used[0], cfg.feature_dim, vb.pp("out_proj"))?,
        })
    }

    /// Aggregated feature map and the raw last backbone stage.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let stages = self.backbone.forward_stages(x)?;
        let last = stages[3].clone();
        let used: Vec<Tensor> = stages[self.first_level..].to_vec();
        let fused = match (&self.dla_up, &self.ida_up) {
            (Some(dla), Some(ida)) => {
                let mut y = dla.forward(used)?;
                y.pop();
                let n = y.len();
                ida.forward(&mut y, 0, n)?;
                y.pop().expect("at least one level")
            }
            _ => used.into_iter().next().expect("one level"),
        };
        Ok((self.out_proj.forward(&fused)?, last))
    }
}

//! Adam with global-norm gradient clipping and exportable state.

use std::collections::HashMap;

use candle_core::backprop::GradStore;
use candle_core::{DType, Tensor, Var};

use crate::error::{CalibError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Gradients are rescaled when their global L2 norm exceeds this; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl AdamParams {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(10.0),
        }
    }
}

/// Optimizer over a fixed, name-sorted list of variables.
#[derive(Debug)]
pub struct Adam {
    params: AdamParams,
    vars: Vec<(String, Var)>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: usize,
}

/// What one optimizer step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub grad_norm: f64,
    pub clipped: bool,
}

impl Adam {
    pub fn new(mut vars: Vec<(String, Var)>, params: AdamParams) -> Result<Self> {
        if !(params.lr >= 0.0) {
            return Err(CalibError::Config(format!("learning rate must be >= 0, got {}", params.lr)));
        }
        vars.sort_by(|a, b| a.0.cmp(&b.0));
        let m = vars
            .iter()
            .map(|(_, v)| v.zeros_like())
            .collect::<candle_core::Result<Vec<_>>>()?;
        let v = m.clone();
        Ok(Self {
            params,
            vars,
            m,
            v,
            step: 0,
        })
    }

    pub fn params(&self) -> &AdamParams {
        &self.params
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Global L2 norm of the gradients of the tracked variables.
    pub fn grad_norm(&self, grads: &GradStore) -> Result<f64> {
        let mut sq = 0.0;
        for (_, var) in &self.vars {
            if let Some(g) = grads.get(var.as_tensor()) {
                sq += g.to_dtype(DType::F64)?.sqr()?.sum_all()?.to_scalar::<f64>()?;
            }
        }
        Ok(sq.sqrt())
    }

    pub fn step(&mut self, grads: &GradStore) -> Result<StepInfo> {
        let norm = self.grad_norm(grads)?;
        if !norm.is_finite() {
            return Err(CalibError::NonFiniteLoss {
                step: self.step,
                detail: format!("gradient norm {norm}"),
            });
        }
        let scale = match self.params.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        self.step += 1;
        let AdamParams {
            lr, beta1, beta2, eps, ..
        } = self.params;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (i, (_, var)) in self.vars.iter().enumerate() {
            let Some(g) = grads.get(var.as_tensor()) else {
                continue;
            };
            // gradients carry their backward graph; detach so the moments don't pin every step's graph
            let g = (g.detach() * scale)?;
            self.m[i] = ((&self.m[i] * beta1)? + (&g * (1.0 - beta1))?)?.detach();
            self.v[i] = ((&self.v[i] * beta2)? + (g.sqr()? * (1.0 - beta2))?)?.detach();
            if lr == 0.0 {
                continue;
            }
            let m_hat = (&self.m[i] / bc1)?;
            let v_hat = (&self.v[i] / bc2)?;
            let update = (m_hat / (v_hat.sqrt()? + eps)?)?;
            var.set(&(var.as_tensor().detach() - (update * lr)?)?)?;
        }
        Ok(StepInfo {
            grad_norm: norm,
            clipped: scale < 1.0,
        })
    }

    /// Moment tensors keyed `m.<name>` / `v.<name>`.
    pub fn state(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::with_capacity(2 * self.vars.len());
        for (i, (name, _)) in self.vars.iter().enumerate() {
            out.push((format!("m.{name}"), self.m[i].clone()));
            out.push((format!("v.{name}"), self.v[i].clone()));
        }
        out
    }

    pub fn load_state(&mut self, state: &HashMap<String, Tensor>, step: usize) -> Result<()> {
        for (i, (name, var)) in self.vars.iter().enumerate() {
            for (key, slot) in [(format!("m.{name}"), &mut self.m[i]), (format!("v.{name}"), &mut self.v[i])] {
                let t = state
                    .get(&key)
                    .ok_or_else(|| CalibError::Config(format!("optimizer state lacks {key}")))?;
                *slot = t.to_dtype(var.dtype())?;
            }
        }
        self.step = step;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    #[test]
    fn first_step_moves_by_lr() {
        // bias-corrected first Adam step is lr·sign(g)
        let x = Var::new(&[1.0f64, -2.0], &Device::Cpu).unwrap();
        let mut opt = Adam::new(vec![("x".into(), x.clone())], AdamParams::new(0.1)).unwrap();
        let loss = (x.as_tensor().sqr().unwrap().sum_all().unwrap() * 0.5).unwrap();
        opt.step(&loss.backward().unwrap()).unwrap();
        let v: Vec<f64> = x.as_tensor().to_vec1().unwrap();
        assert!((v[0] - 0.9).abs() < 1e-6 && (v[1] + 1.9).abs() < 1e-6, "{v:?}");
    }

    #[test]
    fn clipping_bounds_gradient() {
        let x = Var::new(&[300.0f64, 400.0], &Device::Cpu).unwrap();
        let mut opt = Adam::new(vec![("x".into(), x.clone())], AdamParams::new(0.0)).unwrap();
        let loss = (x.as_tensor().sqr().unwrap().sum_all().unwrap() * 0.5).unwrap();
        let info = opt.step(&loss.backward().unwrap()).unwrap();
        assert!((info.grad_norm - 500.0).abs() < 1e-9);
        assert!(info.clipped);
        let m: Vec<f64> = opt.m[0].to_vec1().unwrap();
        // clipped gradient is (6, 8); m = 0.1·g
        assert!((m[0] - 0.6).abs() < 1e-12 && (m[1] - 0.8).abs() < 1e-12);
        assert_eq!(x.as_tensor().to_vec1::<f64>().unwrap(), vec![300.0, 400.0]);
    }
}

//! Custom autograd ops whose gradients must stay finite where the naive
//! composition (`sqrt` of a sum of squares, `atan2`) would produce NaN.

use candle_core::backend::BackendStorage;
use candle_core::{CpuStorage, CustomOp1, DType, Layout, Result, Shape, Tensor};

fn as_f64(s: &CpuStorage, l: &Layout) -> Result<Vec<f64>> {
    let (start, end) = match l.contiguous_offsets() {
        Some(o) => o,
        None => candle_core::bail!("custom op expects a contiguous input"),
    };
    Ok(match s {
        CpuStorage::F64(v) => v[start..end].to_vec(),
        CpuStorage::F32(v) => v[start..end].iter().map(|&x| x as f64).collect(),
        _ => candle_core::bail!("custom op supports f32 and f64 only"),
    })
}

fn storage(values: Vec<f64>, dtype: DType) -> Result<CpuStorage> {
    Ok(match dtype {
        DType::F64 => CpuStorage::F64(values),
        DType::F32 => CpuStorage::F32(values.into_iter().map(|x| x as f32).collect()),
        _ => candle_core::bail!("custom op supports f32 and f64 only"),
    })
}

fn tensor_f64(t: &Tensor) -> Result<Vec<f64>> {
    t.to_dtype(DType::F64)?.flatten_all()?.to_vec1()
}

/// Euclidean norm over the last dimension; the gradient at a zero row is zero.
struct RowNorm;

impl CustomOp1 for RowNorm {
    fn name(&self) -> &'static str {
        "row-norm"
    }

    fn cpu_fwd(&self, s: &CpuStorage, l: &Layout) -> Result<(CpuStorage, Shape)> {
        let dims = l.shape().dims();
        let k = *dims.last().unwrap_or(&1);
        let x = as_f64(s, l)?;
        let out: Vec<f64> = x.chunks(k.max(1)).map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        Ok((storage(out, s.dtype())?, Shape::from(&dims[..dims.len() - 1])))
    }

    fn bwd(&self, arg: &Tensor, res: &Tensor, grad_res: &Tensor) -> Result<Option<Tensor>> {
        let k = arg.dims().last().copied().unwrap_or(1);
        let x = tensor_f64(arg)?;
        let n = tensor_f64(res)?;
        let g = tensor_f64(grad_res)?;
        let mut out = vec![0.0; x.len()];
        for (r, (xr, outr)) in x.chunks(k).zip(out.chunks_mut(k)).enumerate() {
            if n[r] > 0.0 {
                for (o, v) in outr.iter_mut().zip(xr) {
                    *o = g[r] * v / n[r];
                }
            }
        }
        Ok(Some(Tensor::from_vec(out, arg.shape().clone(), arg.device())?.to_dtype(arg.dtype())?))
    }
}

/// `‖x‖` over the last dimension with a zero subgradient at the origin.
pub fn row_norm(x: &Tensor) -> Result<Tensor> {
    x.contiguous()?.apply_op1(RowNorm)
}

/// `2·atan2(‖v‖, |w|)` for rows `(w, v)` of a `(B, 4)` tensor.
struct QuatAngle;

fn quat_angle_grad(q: &[f64]) -> [f64; 4] {
    let (w, v) = (q[0], [q[1], q[2], q[3]]);
    let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let r2 = s * s + w * w;
    if r2 == 0.0 {
        return [0.0; 4];
    }
    let sign = if w < 0.0 { -1.0 } else { 1.0 };
    let dw = -2.0 * s * sign / r2;
    // at s = 0 the angle is a cone in v; take the zero subgradient
    let dv = if s > 0.0 { 2.0 * w.abs() / (r2 * s) } else { 0.0 };
    [dw, dv * v[0], dv * v[1], dv * v[2]]
}

impl CustomOp1 for QuatAngle {
    fn name(&self) -> &'static str {
        "quat-angle"
    }

    fn cpu_fwd(&self, s: &CpuStorage, l: &Layout) -> Result<(CpuStorage, Shape)> {
        let dims = l.shape().dims();
        if dims.len() != 2 || dims[1] != 4 {
            candle_core::bail!("quat-angle expects (B, 4), got {dims:?}");
        }
        let x = as_f64(s, l)?;
        let out = x
            .chunks(4)
            .map(|q| 2.0 * (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt().atan2(q[0].abs()))
            .collect();
        Ok((storage(out, s.dtype())?, Shape::from(dims[0])))
    }

    fn bwd(&self, arg: &Tensor, _res: &Tensor, grad_res: &Tensor) -> Result<Option<Tensor>> {
        let x = tensor_f64(arg)?;
        let g = tensor_f64(grad_res)?;
        let mut out = Vec::with_capacity(x.len());
        for (q, gr) in x.chunks(4).zip(g) {
            out.extend(quat_angle_grad(q).iter().map(|d| d * gr));
        }
        Ok(Some(Tensor::from_vec(out, arg.shape().clone(), arg.device())?.to_dtype(arg.dtype())?))
    }
}

/// Rotation angle of each row quaternion (not necessarily unit), in `[0, π]`.
pub fn quat_angle(q: &Tensor) -> Result<Tensor> {
    q.contiguous()?.apply_op1(QuatAngle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{Device, Var};

    #[test]
    fn row_norm_forward_and_zero_gradient() {
        let x = Var::new(&[[3.0f64, 4.0], [0.0, 0.0]], &Device::Cpu).unwrap();
        let n = row_norm(x.as_tensor()).unwrap();
        assert_eq!(n.to_vec1::<f64>().unwrap(), vec![5.0, 0.0]);
        let grads = n.sum_all().unwrap().backward().unwrap();
        let g: Vec<Vec<f64>> = grads.get(x.as_tensor()).unwrap().to_vec2().unwrap();
        assert_eq!(g, vec![vec![0.6, 0.8], vec![0.0, 0.0]]);
    }

    #[test]
    fn quat_angle_matches_finite_differences() {
        let q0 = [0.9, 0.2, -0.3, 0.1];
        let f = |q: &[f64]| 2.0 * (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt().atan2(q[0].abs());
        let g = quat_angle_grad(&q0);
        for i in 0..4 {
            let (mut a, mut b) = (q0, q0);
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (f(&a) - f(&b)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
        }
        assert_eq!(quat_angle_grad(&[1.0, 0.0, 0.0, 0.0]), [0.0; 4]);
    }
}

mod common;

use candle_core::{DType, Device, IndexOp, Tensor};
use candle_nn::{VarBuilder, VarMap};
use extcalib::network::attention::MultiHeadAttention;
use extcalib::network::encoder::{shifted_window_mask, WindowAttention};
use extcalib::network::{
    correlation_channels, load_checkpoint, save_checkpoint, windowed_correlation, CalibModel, CheckpointMeta,
    NetworkConfig,
};
use extcalib::trainer::AblationVariant;
use proptest::prelude::*;

fn to_vec(t: &Tensor) -> Vec<f64> {
    t.flatten_all().unwrap().to_dtype(DType::F64).unwrap().to_vec1().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn correlation_matches_loop_oracle(heads in 1usize..=3, dh in 1usize..=3, window in 0usize..=3,
                                       h in 1usize..=7, w in 1usize..=7, seed in any::<u64>()) {
        let dev = Device::Cpu;
        let c = heads * dh;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let q: Vec<f64> = (0..c * h * w).map(|_| common::gaussian(&mut rng)).collect();
        let k: Vec<f64> = (0..c * h * w).map(|_| common::gaussian(&mut rng)).collect();
        let qt = Tensor::from_slice(&q, (1, c, h, w), &dev).unwrap();
        let kt = Tensor::from_slice(&k, (1, c, h, w), &dev).unwrap();
        let got = to_vec(&windowed_correlation(&qt, &kt, heads, window).unwrap());
        let expect = common::correlation_oracle(&q, &k, c, h, w, heads, window);
        prop_assert_eq!(got.len(), correlation_channels(window, heads) * h * w);
        for (g, e) in got.iter().zip(&expect) {
            prop_assert!(common::rel_err(*g, *e, 1e-12) < 1e-9, "{} vs {}", g, e);
        }
    }
}

#[test]
fn correlation_layout_is_head_then_offset_major() {
    let dev = Device::Cpu;
    // one-hot keys: only pixel (2, 3) of head 1 carries a signal
    let q = Tensor::ones((1, 2, 5, 5), DType::F64, &dev).unwrap();
    let mut k = vec![0.0; 2 * 25];
    k[25 + 2 * 5 + 3] = 1.0;
    let k = Tensor::from_vec(k, (1, 2, 5, 5), &dev).unwrap();
    let corr = windowed_correlation(&q, &k, 2, 1).unwrap();
    // seen from query (2, 2) the key sits at offset (dy, dx) = (0, +1): channel 9 + 1·3 + 2
    assert_eq!(corr.i((0, 14, 2, 2)).unwrap().to_scalar::<f64>().unwrap(), 1.0);
    assert_eq!(to_vec(&corr.i((0, 0..9)).unwrap()).iter().filter(|v| **v != 0.0).count(), 0);
    assert_eq!(to_vec(&corr).iter().filter(|v| **v != 0.0).count(), 9);
}

#[test]
fn attention_rows_are_distributions() {
    let dev = Device::Cpu;
    let vm = VarMap::new();
    let vb = VarBuilder::from_varmap(&vm, DType::F64, &dev);
    let mha = MultiHeadAttention::new(16, 4, vb.pp("mha")).unwrap();
    let q = Tensor::randn(0f64, 1.0, (2, 3, 16), &dev).unwrap();
    let kv = Tensor::randn(0f64, 1.0, (2, 7, 16), &dev).unwrap();
    let (out, weights) = mha.forward_with_weights(&q, &kv, &kv).unwrap();
    assert_eq!(out.dims(), &[2, 3, 16]);
    assert_eq!(weights.dims(), &[2, 4, 3, 7]);
    for s in to_vec(&weights.sum(3).unwrap()) {
        assert!((s - 1.0).abs() < 1e-12);
    }
    assert!(to_vec(&weights).iter().all(|w| *w >= 0.0));

    let wa = WindowAttention::new(8, 2, 2, vb.pp("wa")).unwrap();
    let mask = shifted_window_mask(4, 4, 2, 1, DType::F64, &dev).unwrap();
    let x = Tensor::randn(0f64, 1.0, (4, 4, 8), &dev).unwrap();
    let (_, w) = wa.forward_with_weights(&x, Some(&mask)).unwrap();
    for s in to_vec(&w.sum(3).unwrap()) {
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn shifted_mask_separates_wrapped_regions() {
    let mask = shifted_window_mask(4, 4, 2, 1, DType::F64, &Device::Cpu).unwrap();
    assert_eq!(mask.dims(), &[4, 4, 4]);
    // the top-left window never straddles the wrap seam
    assert!(to_vec(&mask.i(0).unwrap()).iter().all(|v| *v == 0.0));
    // the bottom-right window holds four pieces from four different regions
    let last = to_vec(&mask.i(3).unwrap());
    for a in 0..4 {
        for b in 0..4 {
            assert_eq!(last[a * 4 + b], if a == b { 0.0 } else { -100.0 });
        }
    }
}

fn batch_inputs(cfg: &NetworkConfig) -> Vec<extcalib::dataio::CalibrationSample> {
    let frames = common::synthetic_frames([1, 2], cfg.input_size);
    let range = extcalib::geometry::DeviationRange::new(0.3, 3.0).unwrap();
    frames.iter().enumerate().map(|(i, f)| f.sample(&range, i as u64)).collect()
}

#[test]
fn every_variant_produces_unit_quaternions() {
    let base = NetworkConfig::tiny();
    let samples = batch_inputs(&base);
    let refs: Vec<_> = samples.iter().collect();
    for v in AblationVariant::ALL {
        let cfg = v.apply(&base);
        let model = CalibModel::new(&cfg, 0, DType::F32, &Device::Cpu).unwrap();
        let out = model.forward(&refs).unwrap();
        assert_eq!(out.translation.dims(), &[2, 3], "{v}");
        assert_eq!(out.rotation.dims(), &[2, 4], "{v}");
        let q = to_vec(&out.rotation);
        for row in q.chunks(4) {
            let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-5 && row[0] >= 0.0, "{v}: {row:?}");
        }
    }
}

#[test]
fn initialization_is_seeded() {
    let cfg = NetworkConfig::tiny();
    let a = CalibModel::new(&cfg, 9, DType::F32, &Device::Cpu).unwrap();
    let b = CalibModel::new(&cfg, 9, DType::F32, &Device::Cpu).unwrap();
    let c = CalibModel::new(&cfg, 10, DType::F32, &Device::Cpu).unwrap();
    let (va, vb, vc) = (a.named_vars(), b.named_vars(), c.named_vars());
    assert_eq!(va.len(), vb.len());
    let mut differs = false;
    for (((na, ta), (nb, tb)), (_, tc)) in va.iter().zip(&vb).zip(&vc) {
        assert_eq!(na, nb);
        assert_eq!(to_vec(ta.as_tensor()), to_vec(tb.as_tensor()), "{na}");
        differs |= to_vec(ta.as_tensor()) != to_vec(tc.as_tensor());
    }
    assert!(differs);
}

#[test]
fn checkpoint_roundtrip_preserves_predictions() {
    let cfg = NetworkConfig::tiny();
    let model = CalibModel::new(&cfg, 4, DType::F32, &Device::Cpu).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.safetensors");
    let mut meta = CheckpointMeta::new(&cfg, 3, 17);
    meta.extra.insert("note".into(), "hello".into());
    let extra = vec![("adam.m.x".to_string(), Tensor::ones(3, DType::F32, &Device::Cpu).unwrap())];
    save_checkpoint(&path, &model, &meta, &extra).unwrap();
    let loaded = load_checkpoint(&path, DType::F32, &Device::Cpu).unwrap();
    assert_eq!(loaded.meta, meta);
    let s = &batch_inputs(&cfg)[0];
    assert_eq!(model.predict(s).unwrap(), loaded.model.predict(s).unwrap());

    std::fs::write(&path, b"not a checkpoint").unwrap();
    assert!(matches!(
        load_checkpoint(&path, DType::F32, &Device::Cpu),
        Err(extcalib::CalibError::Checkpoint { .. })
    ));
}

#[test]
fn mismatched_resolution_is_rejected() {
    let model = CalibModel::new(&NetworkConfig::tiny(), 0, DType::F32, &Device::Cpu).unwrap();
    let s = &common::synthetic_frames([1], (256, 128))[0].sample_with(extcalib::geometry::SE3Transform::identity());
    assert!(matches!(model.predict(s), Err(extcalib::CalibError::ResolutionMismatch(_))));
}

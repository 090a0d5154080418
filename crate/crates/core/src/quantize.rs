//! Post-training dynamic-range quantization.
//!
//! Weight matrices and the positional table are stored as symmetric
//! per-tensor int8. At inference every activation entering a weight matmul
//! is quantized on the fly to asymmetric per-tensor int8, multiplied with
//! 32-bit integer accumulation and rescaled once. Everything else (norms,
//! softmax, GELU, attention products) runs in float.

use std::fmt;

use crate::backend::{value_ops, Backend, Float, ParamKind, ParamMap};
use crate::chromatic::RgbImage;
use crate::classifier::ClassProbabilities;
use crate::error::{Error, Result};
use crate::model::{forward_on, Classifier, FloatModel, Model, ModelConfig, Provenance};
use crate::tensor::{self, Tensor};
use crate::training::{predict_all, Dataset};

/// Largest magnitude of a symmetric int8 code.
pub const QMAX: i32 = 127;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    shape: Vec<usize>,
    data: Vec<i8>,
    scale: f32,
    zero_point: i32,
}

impl QuantizedTensor {
    pub fn new(shape: Vec<usize>, data: Vec<i8>, scale: f32, zero_point: i32) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() || shape.contains(&0) {
            return Err(Error::Shape(format!(
                "int8 tensor of shape {shape:?} with {} values",
                data.len()
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("quantization scale {scale} must be positive")));
        }
        if !(-128..=127).contains(&zero_point) {
            return Err(Error::Domain(format!("zero point {zero_point} outside int8")));
        }
        Ok(QuantizedTensor {
            shape,
            data,
            scale,
            zero_point,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    pub fn scale(&self) -> f32 {
        self.scale
    }

    pub fn zero_point(&self) -> i32 {
        self.zero_point
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// `scale = max|w| / 127`, `q = round(w / scale)`. An all-zero tensor gets
/// scale 1. Values so small that the scale would underflow get the smallest
/// positive `f32` as scale.
pub fn quantize_tensor(w: &Tensor) -> Result<QuantizedTensor> {
    w.check_finite("tensor to quantize")?;
    let max_abs = w.max_abs() as f64;
    let scale = if max_abs == 0.0 {
        1.0
    } else {
        ((max_abs / QMAX as f64) as f32).max(f32::from_bits(1))
    };
    let s = scale as f64;
    let data = w
        .data()
        .iter()
        .map(|&x| (x as f64 / s).round().clamp(-QMAX as f64, QMAX as f64) as i8)
        .collect();
    QuantizedTensor::new(w.shape().to_vec(), data, scale, 0)
}

/// `w' = scale · (q − zero_point)`.
pub fn dequantize_tensor(q: &QuantizedTensor) -> Tensor {
    let s = q.scale as f64;
    let data = q
        .data
        .iter()
        .map(|&v| {
            // Scale rounding can push the largest code just past f32::MAX.
            (s * (v as i32 - q.zero_point) as f64).clamp(-f32::MAX as f64, f32::MAX as f64) as f32
        })
        .collect();
    Tensor::new(q.shape.clone(), data).expect("shape validated at construction")
}

/// Weights and positional table in int8, the rest in float.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quantized;

impl ParamKind for Quantized {
    type Weight = QuantizedTensor;
    type Param = Tensor;
    type Embedding = QuantizedTensor;
}

pub type QuantizedModel = Model<Quantized>;

struct QuantizeWeights;

impl ParamMap<Float, Quantized> for QuantizeWeights {
    fn weight(&mut self, _: &str, w: &Tensor) -> Result<QuantizedTensor> {
        quantize_tensor(w)
    }
    fn param(&mut self, _: &str, p: &Tensor) -> Result<Tensor> {
        Ok(p.clone())
    }
    fn embedding(&mut self, _: &str, e: &Tensor) -> Result<QuantizedTensor> {
        quantize_tensor(e)
    }
}

struct DequantizeWeights;

impl ParamMap<Quantized, Float> for DequantizeWeights {
    fn weight(&mut self, _: &str, w: &QuantizedTensor) -> Result<Tensor> {
        Ok(dequantize_tensor(w))
    }
    fn param(&mut self, _: &str, p: &Tensor) -> Result<Tensor> {
        Ok(p.clone())
    }
    fn embedding(&mut self, _: &str, e: &QuantizedTensor) -> Result<Tensor> {
        Ok(dequantize_tensor(e))
    }
}

pub fn quantize_model(m: &FloatModel, provenance: Provenance) -> Result<QuantizedModel> {
    Ok(Model {
        config: m.config.clone(),
        class_names: m.class_names.clone(),
        params: m.params.try_map(&mut QuantizeWeights)?,
        training: m.training,
        provenance: Some(provenance),
    })
}

/// Float model whose weights are the int8 values scaled back.
pub fn dequantize_model(qm: &QuantizedModel) -> FloatModel {
    Model {
        config: qm.config.clone(),
        class_names: qm.class_names.clone(),
        params: qm
            .params
            .try_map(&mut DequantizeWeights)
            .expect("dequantization cannot fail"),
        training: qm.training,
        provenance: None,
    }
}

/// Asymmetric per-tensor int8 code of an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationQuant {
    pub data: Vec<i8>,
    pub scale: f32,
    pub zero_point: i32,
}

/// Scale from the value range widened to contain 0, so zero is exactly
/// representable. Returns `None` when the range is empty (all zeros).
pub fn quantize_activation(x: &[f32]) -> Option<ActivationQuant> {
    let lo = x.iter().fold(0.0f32, |m, &v| m.min(v)) as f64;
    let hi = x.iter().fold(0.0f32, |m, &v| m.max(v)) as f64;
    if hi == lo {
        return None;
    }
    let scale = ((hi - lo) / 255.0) as f32;
    let s = scale as f64;
    let zero_point = (-128.0 - lo / s).round().clamp(-128.0, 127.0) as i32;
    let data = x
        .iter()
        .map(|&v| ((v as f64 / s).round() + zero_point as f64).clamp(-128.0, 127.0) as i8)
        .collect();
    Some(ActivationQuant {
        data,
        scale,
        zero_point,
    })
}

/// Integer matmul `(a − zp_a) · w` for `a: [rows × k]`, `w: [k × cols]`,
/// saturating at the `i32` range. Returns the accumulators and how many
/// saturated.
pub fn int8_matmul(
    a: &[i8],
    zero_point: i32,
    w: &[i8],
    rows: usize,
    k: usize,
    cols: usize,
) -> (Vec<i32>, u64) {
    let mut acc = vec![0i64; rows * cols];
    for i in 0..rows {
        for p in 0..k {
            let av = (a[i * k + p] as i32 - zero_point) as i64;
            if av == 0 {
                continue;
            }
            let row = &w[p * cols..(p + 1) * cols];
            for (o, &wv) in acc[i * cols..(i + 1) * cols].iter_mut().zip(row) {
                *o += av * wv as i64;
            }
        }
    }
    let mut saturated = 0;
    let out = acc
        .into_iter()
        .map(|v| {
            if v > i32::MAX as i64 || v < i32::MIN as i64 {
                saturated += 1;
            }
            v.clamp(i32::MIN as i64, i32::MAX as i64) as i32
        })
        .collect();
    (out, saturated)
}

/// Inference backend with int8 weight matmuls.
#[derive(Debug, Default, Clone)]
pub struct DynamicQuantEval {
    /// Accumulators clamped to the `i32` range so far.
    pub saturations: u64,
}

impl Backend for DynamicQuantEval {
    type Kind = Quantized;
    type Node = Tensor;

    value_ops!();

    fn embedding(&mut self, e: &QuantizedTensor) -> Result<Tensor> {
        Ok(dequantize_tensor(e))
    }

    fn linear(&mut self, x: &Tensor, w: &QuantizedTensor, b: &Tensor) -> Result<Tensor> {
        let (rows, k) = x.dims2("quantized linear")?;
        let (wk, cols) = match w.shape[..] {
            [r, c] => (r, c),
            _ => return Err(Error::Shape(format!("weight shape {:?} is not a matrix", w.shape))),
        };
        if wk != k || b.shape() != [cols] {
            return Err(Error::dim("quantized linear", x.shape(), &w.shape));
        }
        let Some(aq) = quantize_activation(x.data()) else {
            // Constant zero input: the product vanishes.
            return tensor::add_row(&Tensor::zeros(&[rows, cols]), b);
        };
        let (acc, saturated) = int8_matmul(&aq.data, aq.zero_point, &w.data, rows, k, cols);
        self.saturations += saturated;
        let rescale = aq.scale as f64 * w.scale as f64;
        let data = acc
            .iter()
            .enumerate()
            .map(|(i, &v)| (v as f64 * rescale) as f32 + b.data()[i % cols])
            .collect();
        Tensor::new(vec![rows, cols], data)
    }
}

/// Class probabilities through the int8 path, with the number of saturated
/// accumulators.
pub fn quantized_forward(qm: &QuantizedModel, img: &RgbImage) -> Result<(ClassProbabilities, u64)> {
    let mut b = DynamicQuantEval::default();
    let (_, probs) = forward_on(&mut b, img, &qm.params, &qm.config)?;
    Ok((ClassProbabilities::new(probs.into_data())?, b.saturations))
}

impl Classifier for Model<Quantized> {
    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn predict(&self, img: &RgbImage) -> Result<ClassProbabilities> {
        let (probs, saturated) = quantized_forward(self, img)?;
        if saturated > 0 {
            log::warn!("{saturated} int32 accumulators saturated");
        }
        Ok(probs)
    }
}

/// Paired evaluation of a float model and its quantized counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantReport {
    pub samples: usize,
    pub float_accuracy: f64,
    pub quant_accuracy: f64,
    /// `float_accuracy − quant_accuracy`.
    pub accuracy_delta: f64,
    /// Fraction of samples where both models have the same top-1 class.
    pub agreement: f64,
    pub float_bytes: u64,
    pub quant_bytes: u64,
    /// `float_bytes / quant_bytes`.
    pub size_ratio: f64,
}

impl QuantReport {
    pub fn to_csv(&self) -> String {
        format!(
            "samples,float_accuracy,quant_accuracy,accuracy_delta,top1_agreement,float_bytes,quant_bytes,size_ratio\n\
             {},{:.6},{:.6},{:.6},{:.6},{},{},{:.6}\n",
            self.samples,
            self.float_accuracy,
            self.quant_accuracy,
            self.accuracy_delta,
            self.agreement,
            self.float_bytes,
            self.quant_bytes,
            self.size_ratio
        )
    }
}

impl fmt::Display for QuantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples          {}", self.samples)?;
        writeln!(f, "float accuracy   {:.4}", self.float_accuracy)?;
        writeln!(f, "int8 accuracy    {:.4}", self.quant_accuracy)?;
        writeln!(f, "accuracy delta   {:+.4}", self.accuracy_delta)?;
        writeln!(f, "top-1 agreement  {:.4}", self.agreement)?;
        writeln!(f, "float size       {} bytes", self.float_bytes)?;
        writeln!(f, "int8 size        {} bytes", self.quant_bytes)?;
        write!(f, "size ratio       {:.3}x", self.size_ratio)
    }
}

/// Evaluates both models on `test`. Sizes are the serialized container
/// lengths, i.e. exactly what [`crate::model_io::save_model`] writes.
pub fn compare(float: &FloatModel, qm: &QuantizedModel, test: &Dataset) -> Result<QuantReport> {
    if float.class_names != qm.class_names {
        return Err(Error::Config("float and quantized models have different classes".into()));
    }
    if test.is_empty() {
        return Err(Error::Dataset("comparison set is empty".into()));
    }
    let fp = predict_all(float, test)?;
    let qp = predict_all(qm, test)?;
    let labels = test.labels();
    let n = labels.len() as f64;
    let hits = |ps: &[ClassProbabilities]| {
        ps.iter().zip(&labels).filter(|(p, &l)| p.argmax() == l).count() as f64 / n
    };
    let agree = fp.iter().zip(&qp).filter(|(a, b)| a.argmax() == b.argmax()).count() as f64 / n;
    let float_bytes = crate::model_io::encode_model(float)?.len() as u64;
    let quant_bytes = crate::model_io::encode_model(qm)?.len() as u64;
    let (float_accuracy, quant_accuracy) = (hits(&fp), hits(&qp));
    Ok(QuantReport {
        samples: labels.len(),
        float_accuracy,
        quant_accuracy,
        accuracy_delta: float_accuracy - quant_accuracy,
        agreement: agree,
        float_bytes,
        quant_bytes,
        size_ratio: float_bytes as f64 / quant_bytes as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{FloatEval, Slot};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn extremes_map_to_127() {
        let q = quantize_tensor(&Tensor::from_vec(vec![-1.0, 0.0, 1.0])).unwrap();
        assert_eq!(q.data(), &[-127, 0, 127]);
        assert_eq!(q.scale(), 1.0 / 127.0);
        assert_eq!(q.zero_point(), 0);
    }

    #[test]
    fn single_element_round_trip_is_exact() {
        let q = quantize_tensor(&Tensor::from_vec(vec![0.5])).unwrap();
        assert_eq!(q.data(), &[127]);
        assert_eq!(q.scale(), 0.5 / 127.0);
        assert_eq!(dequantize_tensor(&q).data(), &[0.5]);
    }

    #[test]
    fn all_zero_tensor() {
        let q = quantize_tensor(&Tensor::zeros(&[2, 3])).unwrap();
        assert_eq!(q.scale(), 1.0);
        assert!(q.data().iter().all(|&v| v == 0));
        assert_eq!(dequantize_tensor(&q), Tensor::zeros(&[2, 3]));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(quantize_tensor(&Tensor::from_vec(vec![1.0, f32::INFINITY])).is_err());
    }

    #[test]
    fn uniform_round_trip_bound() {
        let w = Tensor::uniform(&[1000], -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
        let q = quantize_tensor(&w).unwrap();
        let err = w.max_abs_diff(&dequantize_tensor(&q));
        assert!(err <= q.scale() / 2.0, "{err} vs {}", q.scale());
    }

    #[test]
    fn activation_code_covers_range_and_zero() {
        let a = quantize_activation(&[-1.0, 0.0, 3.0]).unwrap();
        assert_eq!(a.scale, 4.0 / 255.0);
        assert_eq!(a.data[0], -128);
        assert_eq!(a.data[2], 127);
        // Zero lands on the zero point.
        assert_eq!(a.data[1] as i32, a.zero_point);
        assert!(quantize_activation(&[0.0, 0.0]).is_none());
        // A positive constant is widened to [0, c] and stays exact.
        let c = quantize_activation(&[0.7, 0.7]).unwrap();
        assert_eq!((c.zero_point, c.data[0]), (-128, 127));
    }

    #[test]
    fn int8_matmul_hand_oracle() {
        // (a - zp) = [[1, 2, 0, -1], [3, 0, 1, 1], [0, 0, 0, 0], [-2, 1, 1, 2]] with zp = 5.
        let centred: [[i32; 4]; 4] = [[1, 2, 0, -1], [3, 0, 1, 1], [0, 0, 0, 0], [-2, 1, 1, 2]];
        let a: Vec<i8> = centred.iter().flatten().map(|&v| (v + 5) as i8).collect();
        let w: Vec<i8> = vec![1, 0, -1, 2, 0, 1, 1, 0, 3, -2, 0, 1, -1, 0, 2, 4];
        let (acc, sat) = int8_matmul(&a, 5, &w, 4, 4, 4);
        assert_eq!(sat, 0);
        #[rustfmt::skip]
        let want = vec![
            2, 2, -1, -2,
            5, -2, -1, 11,
            0, 0, 0, 0,
            -1, -1, 7, 5,
        ];
        assert_eq!(acc, want);
    }

    #[test]
    fn int8_matmul_saturates() {
        let k = 140_000;
        let a = vec![-128i8; k];
        let w = vec![-127i8; k];
        let (acc, sat) = int8_matmul(&a, 127, &w, 1, k, 1);
        assert_eq!((acc[0], sat), (i32::MAX, 1));
    }

    #[test]
    fn quantized_linear_matches_hand_rescale() {
        // Exact codes: weights are multiples of their scale and activations
        // multiples of theirs, so the result is exact up to one rescale.
        let w = Tensor::from_rows(&[&[0.5, -0.25], &[0.0, 1.0], &[-1.0, 0.5], &[0.25, 0.75]]);
        let qw = quantize_tensor(&w).unwrap();
        let x = Tensor::from_rows(&[&[0.0, 1.0, 2.0, 3.0], &[-1.0, 0.5, 0.25, 2.0], &[1.0, 1.0, 1.0, 1.0], &[2.0, -0.5, 0.0, 1.5]]);
        let b = Tensor::from_vec(vec![0.1, -0.2]);
        let got = DynamicQuantEval::default().linear(&x, &qw, &b).unwrap();
        let want = tensor::linear(&x, &w, &b).unwrap();
        let aq = quantize_activation(x.data()).unwrap();
        let bound = 4.0 * (aq.scale * 1.0 + qw.scale() * 3.0);
        assert!(got.max_abs_diff(&want) <= bound, "{}", got.max_abs_diff(&want));
    }

    fn tiny_model(seed: u64) -> FloatModel {
        use crate::classifier::HeadConfig;
        use crate::vit::VitConfig;
        let cfg = ModelConfig {
            vit: VitConfig {
                image_size: 8,
                patch_size: 4,
                projection_dim: 8,
                num_heads: 2,
                num_layers: 1,
                mlp_hidden: 16,
                layer_norm_eps: 1e-6,
            },
            head: HeadConfig {
                hidden: 6,
                num_classes: 3,
                ..HeadConfig::default()
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Model::init(cfg, vec!["a".into(), "b".into(), "c".into()], &mut rng).unwrap();
        m.params.visit_mut(&mut |n, t| {
            if !n.ends_with("gamma") {
                *t = Tensor::uniform(t.shape(), -0.5, 0.5, &mut rng);
            }
        });
        m
    }

    fn prov() -> Provenance {
        Provenance {
            source_sha256: "0".repeat(64),
            quantized_at: 0,
        }
    }

    fn noise(seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RgbImage::new(8, 8, (0..192).map(|_| rng.gen()).collect()).unwrap()
    }

    #[test]
    fn tensor_set_is_preserved() {
        let m = tiny_model(1);
        let qm = quantize_model(&m, prov()).unwrap();
        assert_eq!(m.params.names(), qm.params.names());
        let mut kinds = Vec::new();
        qm.params.visit(&mut |n, slot| {
            kinds.push((n.to_string(), matches!(slot, Slot::Param(_))));
        });
        assert!(kinds.iter().any(|(n, float)| n == "vit.layers.0.wq" && !float));
        assert!(kinds.iter().any(|(n, float)| n == "head.svm_bias" && *float));
    }

    #[test]
    fn every_tensor_within_half_a_step() {
        let m = tiny_model(2);
        let qm = quantize_model(&m, prov()).unwrap();
        qm.params.visit(&mut |name, slot| {
            let q = match slot {
                Slot::Weight(q) | Slot::Embedding(q) => q,
                Slot::Param(_) => return,
            };
            let w = m.params.get(name).unwrap();
            assert!(w.max_abs_diff(&dequantize_tensor(q)) <= q.scale() / 2.0 + 1e-7, "{name}");
        });
    }

    #[test]
    fn zero_model_is_uniform_on_both_paths() {
        let mut m = tiny_model(3);
        m.params.visit_mut(&mut |_, t| *t = t.map(|_| 0.0));
        let qm = quantize_model(&m, prov()).unwrap();
        let img = noise(4);
        let (qp, _) = quantized_forward(&qm, &img).unwrap();
        assert_eq!(qp, m.predict(&img).unwrap());
        assert!(qp.as_slice().iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-7));
    }

    #[test]
    fn quantized_path_tracks_float_path() {
        let m = tiny_model(5);
        let qm = quantize_model(&m, prov()).unwrap();
        let deq = dequantize_model(&qm);
        for s in 0..20 {
            let img = noise(100 + s);
            let (_, fl) = forward_on(&mut FloatEval, &img, &deq.params, &deq.config).unwrap();
            let mut b = DynamicQuantEval::default();
            let (_, ql) = forward_on(&mut b, &img, &qm.params, &qm.config).unwrap();
            assert!(fl.max_abs_diff(&ql) < 0.05, "{}", fl.max_abs_diff(&ql));
        }
    }

    #[test]
    fn compare_reports_sizes_and_agreement() {
        let m = tiny_model(6);
        let qm = quantize_model(&m, prov()).unwrap();
        let ds = Dataset::from_memory(
            (0..9).map(|i| (noise(200 + i), (i % 3) as usize)).collect(),
            m.class_names.clone(),
        )
        .unwrap();
        let r = compare(&m, &qm, &ds).unwrap();
        assert_eq!(r.samples, 9);
        assert!(r.size_ratio > 1.0);
        assert_eq!(r.size_ratio, r.float_bytes as f64 / r.quant_bytes as f64);
        assert!((r.accuracy_delta - (r.float_accuracy - r.quant_accuracy)).abs() < 1e-15);
        assert!(r.to_csv().starts_with("samples,float_accuracy,"));
    }

    #[test]
    fn exactly_representable_model_has_no_delta() {
        // Zero weights quantize exactly and the float biases decide the
        // class, so both paths agree on every image.
        let mut m = tiny_model(7);
        m.params.visit_mut(&mut |n, t| {
            if !n.ends_with("bias") && !n.ends_with("gamma") && !n.ends_with("beta") {
                *t = t.map(|_| 0.0);
            }
        });
        let qm = quantize_model(&m, prov()).unwrap();
        let ds = Dataset::from_memory(
            (0..6).map(|i| (noise(300 + i), (i % 3) as usize)).collect(),
            m.class_names.clone(),
        )
        .unwrap();
        let r = compare(&m, &qm, &ds).unwrap();
        assert_eq!(r.accuracy_delta, 0.0);
        assert_eq!(r.agreement, 1.0);
    }

    fn finite_f32() -> impl Strategy<Value = f32> {
        prop_oneof![
            -1.0f32..1.0,
            -1e30f32..1e30,
            (-1000i32..1000).prop_map(|v| v as f32 * f32::from_bits(1)),
            Just(0.0f32),
            Just(f32::MAX),
            Just(-f32::MAX),
        ]
    }

    proptest! {
        #[test]
        fn round_trip_and_range(values in prop::collection::vec(finite_f32(), 1..64)) {
            let w = Tensor::from_vec(values);
            let q = quantize_tensor(&w).unwrap();
            prop_assert!(q.scale() > 0.0 && q.scale().is_finite());
            prop_assert!(q.data().iter().all(|&v| (-127..=127).contains(&v)));
            let back = dequantize_tensor(&q);
            for (a, b) in w.data().iter().zip(back.data()) {
                let err = (*a as f64 - *b as f64).abs();
                prop_assert!(err <= q.scale() as f64 / 2.0 + 1e-7, "{a} -> {b}: {err} vs scale {}", q.scale());
            }
        }

        #[test]
        fn requantizing_is_a_fixed_point(values in prop::collection::vec(-5.0f32..5.0, 1..64)) {
            let q = quantize_tensor(&Tensor::from_vec(values)).unwrap();
            let again = quantize_tensor(&dequantize_tensor(&q)).unwrap();
            prop_assert_eq!(again.data(), q.data());
        }

        #[test]
        fn order_preserved(values in prop::collection::vec(-3.0f32..3.0, 2..64)) {
            let q = quantize_tensor(&Tensor::from_vec(values.clone())).unwrap();
            for i in 0..values.len() {
                for j in 0..values.len() {
                    if values[i] < values[j] {
                        prop_assert!(q.data()[i] <= q.data()[j]);
                    }
                }
            }
        }
    }
}

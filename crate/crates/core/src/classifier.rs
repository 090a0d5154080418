//! Classification head: the ViT feature is concatenated with the image's GCC
//! scalar, passed through a ReLU dense layer and a final L2-regularized
//! linear ("SVM") layer, and normalized with softmax.

use rand::Rng;

use crate::backend::{Backend, Float, FloatEval};
use crate::error::{Error, Result};
use crate::params::define_params;
use crate::tensor::{Tape, Tensor, Var, PROB_FLOOR};

/// Training objective of the final layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeadLoss {
    /// Label-smoothed categorical cross entropy on the softmax output.
    #[default]
    SoftmaxCrossEntropy,
    /// Multiclass hinge on the raw logits. Experimental.
    Hinge,
}

impl HeadLoss {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadLoss::SoftmaxCrossEntropy => "softmax",
            HeadLoss::Hinge => "hinge",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(HeadLoss::SoftmaxCrossEntropy),
            "hinge" => Ok(HeadLoss::Hinge),
            other => Err(Error::Config(format!(
                "unknown head loss `{other}` (expected softmax or hinge)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadConfig {
    pub hidden: usize,
    pub num_classes: usize,
    /// Coefficient of `‖W_svm‖²`; applies to the final layer's weights only.
    pub l2_strength: f32,
    pub loss: HeadLoss,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            hidden: 64,
            num_classes: 39,
            l2_strength: 0.01,
            loss: HeadLoss::SoftmaxCrossEntropy,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.num_classes == 0 {
            return Err(Error::Config("head hidden and num_classes must be positive".into()));
        }
        if !(self.l2_strength >= 0.0) {
            return Err(Error::Config(format!(
                "l2_strength must be >= 0, got {}",
                self.l2_strength
            )));
        }
        Ok(())
    }
}

define_params! {
    /// Weights are `[in × out]`.
    pub struct HeadParams {
        dense_weight: Weight,
        dense_bias: Param,
        svm_weight: Weight,
        svm_bias: Param,
    }
}

impl HeadParams<Float> {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(fused_dim: usize, cfg: &HeadConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut glorot = |fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f32).sqrt();
            Tensor::uniform(&[fan_in, fan_out], -limit, limit, rng)
        };
        Ok(HeadParams {
            dense_weight: glorot(fused_dim, cfg.hidden),
            dense_bias: Tensor::zeros(&[cfg.hidden]),
            svm_weight: glorot(cfg.hidden, cfg.num_classes),
            svm_bias: Tensor::zeros(&[cfg.num_classes]),
        })
    }

    /// `λ·‖W_svm‖²`.
    pub fn l2_penalty(&self, l2_strength: f32) -> f64 {
        let sq: f64 = self
            .svm_weight
            .data()
            .iter()
            .map(|&w| (w as f64) * (w as f64))
            .sum();
        l2_strength as f64 * sq
    }
}

/// Softmax output over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbabilities(Vec<f32>);

impl ClassProbabilities {
    pub fn new(probs: Vec<f32>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::Numeric("invalid class probabilities".into()));
        }
        let total: f64 = probs.iter().map(|&p| p as f64).sum();
        if (total - 1.0).abs() > 1e-4 {
            return Err(Error::Numeric(format!("class probabilities sum to {total}")));
        }
        Ok(ClassProbabilities(probs))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn argmax(&self) -> usize {
        Tensor::from_vec(self.0.clone()).argmax()
    }

    /// The `k` most probable classes, most probable first; ties keep index order.
    pub fn top_k(&self, k: usize) -> Vec<(usize, f32)> {
        let mut ranked: Vec<(usize, f32)> = self.0.iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }
}

/// Appends the GCC scalar to the feature vector: `[D] → [D + 1]`.
pub fn fuse(feature: &Tensor, gcc: f32) -> Result<Tensor> {
    check_gcc(gcc)?;
    let mut data = feature.data().to_vec();
    data.push(gcc);
    Ok(Tensor::from_vec(data))
}

fn check_gcc(gcc: f32) -> Result<()> {
    if !(0.0..=1.0).contains(&gcc) {
        return Err(Error::Domain(format!("GCC {gcc} outside [0, 1]")));
    }
    Ok(())
}

/// Backend form of [`fuse`] on a `[1 × D]` feature row.
pub fn fuse_on<B: Backend>(b: &mut B, feature: &B::Node, gcc: f32) -> Result<B::Node> {
    check_gcc(gcc)?;
    let g = b.input(Tensor::new(vec![1, 1], vec![gcc])?);
    b.concat_cols(&[feature.clone(), g])
}

/// ReLU dense layer then the linear SVM layer. Returns `(logits, probs)`,
/// both `[1 × num_classes]`.
pub fn head_forward_on<B: Backend>(
    b: &mut B,
    fused: &B::Node,
    p: &HeadParams<B::Kind>,
) -> Result<(B::Node, B::Node)> {
    let hidden = b.linear(fused, &p.dense_weight, &p.dense_bias)?;
    let hidden = b.relu(&hidden);
    let logits = b.linear(&hidden, &p.svm_weight, &p.svm_bias)?;
    let probs = b.softmax(&logits, 1)?;
    Ok((logits, probs))
}

pub fn head_forward(fused: &Tensor, p: &HeadParams) -> Result<ClassProbabilities> {
    let row = fused.reshape(&[1, fused.numel()])?;
    let (_, probs) = head_forward_on(&mut FloatEval, &row, p)?;
    ClassProbabilities::new(probs.into_data())
}

/// `t_k = (1 − s)·[k = label] + s/num_classes`.
pub fn smoothed_target(label: usize, num_classes: usize, smoothing: f32) -> Result<Vec<f32>> {
    if label >= num_classes {
        return Err(Error::Domain(format!(
            "label {label} out of range for {num_classes} classes"
        )));
    }
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::Domain(format!("label smoothing {smoothing} outside [0, 1)")));
    }
    let off = smoothing / num_classes as f32;
    let mut t = vec![off; num_classes];
    t[label] += 1.0 - smoothing;
    Ok(t)
}

/// Smoothed cross entropy of `probs` against `label` plus the L2 penalty on
/// the SVM weights. Probabilities are clamped at 1e-12 before the log.
pub fn loss(
    probs: &ClassProbabilities,
    label: usize,
    smoothing: f32,
    params: &HeadParams,
    l2_strength: f32,
) -> Result<f64> {
    let target = smoothed_target(label, probs.len(), smoothing)?;
    let ce: f64 = probs
        .as_slice()
        .iter()
        .zip(&target)
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| -(t as f64) * (p.max(PROB_FLOOR) as f64).ln())
        .sum();
    Ok(ce + params.l2_penalty(l2_strength))
}

/// Records the training objective for one sample on the tape.
pub fn loss_on(
    tape: &mut Tape,
    logits: Var,
    probs: Var,
    label: usize,
    smoothing: f32,
    params: &HeadParams<crate::backend::OnTape>,
    cfg: &HeadConfig,
) -> Result<Var> {
    let data_term = match cfg.loss {
        HeadLoss::SoftmaxCrossEntropy => {
            let n = tape.value(probs).numel();
            let target = smoothed_target(label, n, smoothing)?;
            tape.cross_entropy(probs, &target)?
        }
        HeadLoss::Hinge => tape.hinge(logits, label)?,
    };
    if cfg.l2_strength == 0.0 {
        return Ok(data_term);
    }
    let sq = tape.sum_squares(params.svm_weight);
    let penalty = tape.scale(sq, cfg.l2_strength);
    tape.add(data_term, penalty)
}

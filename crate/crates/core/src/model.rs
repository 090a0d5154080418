//! The full GCC + ViT + SVM-head model.

use rand::Rng;

use crate::backend::{Backend, Float, FloatEval, OnTape, ParamKind, ParamMap, Slot};
use crate::chromatic::{gcc_image, RgbImage};
use crate::classifier::{
    fuse_on, head_forward_on, loss_on, ClassProbabilities, HeadConfig, HeadParams,
};
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};
use crate::vit::{encode_on, VitConfig, VitParams};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelConfig {
    pub vit: VitConfig,
    pub head: HeadConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.vit.validate()?;
        self.head.validate()
    }

    /// Width of the feature fed to the head: ViT feature plus the GCC scalar.
    pub fn fused_dim(&self) -> usize {
        self.vit.projection_dim + 1
    }
}

#[derive(Debug, Clone)]
pub struct ModelParams<K: ParamKind = Float> {
    pub vit: VitParams<K>,
    pub head: HeadParams<K>,
}

impl<K: ParamKind> ModelParams<K> {
    pub fn try_map<B: ParamKind, M: ParamMap<K, B>>(&self, map: &mut M) -> Result<ModelParams<B>> {
        Ok(ModelParams {
            vit: self.vit.try_map("vit.", map)?,
            head: self.head.try_map("head.", map)?,
        })
    }

    /// Walks every parameter with its qualified name, in a fixed order.
    pub fn visit(&self, f: &mut dyn FnMut(&str, Slot<'_, K>)) {
        self.vit.visit("vit.", f);
        self.head.visit("head.", f);
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit(&mut |n, _| names.push(n.to_string()));
        names
    }
}

impl ModelParams<Float> {
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        Ok(ModelParams {
            vit: VitParams::init(&cfg.vit, rng)?,
            head: HeadParams::init(cfg.fused_dim(), &cfg.head, rng)?,
        })
    }

    /// All-zero parameters with the shapes `cfg` implies.
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        let mut p = Self::init(cfg, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0))?;
        p.visit_mut(&mut |_, t| t.data_mut().fill(0.0));
        Ok(p)
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.vit.visit_mut("vit.", f);
        self.head.visit_mut("head.", f);
    }

    pub fn get(&self, name: &str) -> Option<Tensor> {
        let mut found = None;
        self.visit(&mut |n, slot| {
            if n == name {
                found = Some(match slot {
                    Slot::Weight(t) | Slot::Param(t) | Slot::Embedding(t) => t.clone(),
                });
            }
        });
        found
    }

    pub fn num_scalars(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, slot| {
            n += match slot {
                Slot::Weight(t) | Slot::Param(t) | Slot::Embedding(t) => t.numel(),
            }
        });
        n
    }

    pub fn bind(&self, tape: &mut Tape) -> ModelParams<OnTape> {
        self.try_map(&mut crate::backend::BindToTape(tape))
            .expect("binding to a tape cannot fail")
    }
}

/// Split used when the model was trained, so evaluation can reproduce the
/// held-out set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingRecord {
    pub split_seed: u64,
    pub split_ratio: f64,
}

/// Where a quantized model came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    /// SHA-256 of the float container the weights were quantized from.
    pub source_sha256: String,
    /// Seconds since the Unix epoch.
    pub quantized_at: u64,
}

#[derive(Debug, Clone)]
pub struct Model<K: ParamKind = Float> {
    pub config: ModelConfig,
    pub class_names: Vec<String>,
    pub params: ModelParams<K>,
    pub training: Option<TrainingRecord>,
    pub provenance: Option<Provenance>,
}

pub type FloatModel = Model<Float>;

impl Model<Float> {
    pub fn init<R: Rng + ?Sized>(
        config: ModelConfig,
        class_names: Vec<String>,
        rng: &mut R,
    ) -> Result<Self> {
        if class_names.len() != config.head.num_classes {
            return Err(Error::Config(format!(
                "{} class names for a {}-class head",
                class_names.len(),
                config.head.num_classes
            )));
        }
        let params = ModelParams::init(&config, rng)?;
        Ok(Model {
            config,
            class_names,
            params,
            training: None,
            provenance: None,
        })
    }
}

/// Full forward pass: ViT feature, GCC fusion, head. Returns
/// `(logits, probs)` as `[1 × num_classes]` rows.
pub fn forward_on<B: Backend>(
    b: &mut B,
    img: &RgbImage,
    params: &ModelParams<B::Kind>,
    cfg: &ModelConfig,
) -> Result<(B::Node, B::Node)> {
    let feature = encode_on(b, img, &params.vit, &cfg.vit)?;
    let gcc = gcc_image(img) as f32;
    let fused = fuse_on(b, &feature, gcc)?;
    head_forward_on(b, &fused, &params.head)
}

/// Records forward pass and per-sample loss. Returns `(loss, probs)`.
pub fn sample_loss(
    tape: &mut Tape,
    img: &RgbImage,
    label: usize,
    smoothing: f32,
    params: &ModelParams<OnTape>,
    cfg: &ModelConfig,
) -> Result<(Var, Var)> {
    let (logits, probs) = forward_on(tape, img, params, cfg)?;
    let loss = loss_on(tape, logits, probs, label, smoothing, &params.head, &cfg.head)?;
    Ok((loss, probs))
}

/// Anything that maps an image to class probabilities.
pub trait Classifier: Sync {
    fn config(&self) -> &ModelConfig;
    fn class_names(&self) -> &[String];
    fn predict(&self, img: &RgbImage) -> Result<ClassProbabilities>;
}

impl Classifier for Model<Float> {
    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn predict(&self, img: &RgbImage) -> Result<ClassProbabilities> {
        let (_, probs) = forward_on(&mut FloatEval, img, &self.params, &self.config)?;
        ClassProbabilities::new(probs.into_data())
    }
}

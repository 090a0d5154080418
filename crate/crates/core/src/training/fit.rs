use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::augment::{augment, AugmentConfig};
use super::dataset::Dataset;
use super::optim::{adam_step_model, AdamConfig, AdamState};
use super::split::stratified_split;
use crate::backend::{OnTape, Slot};
use crate::chromatic::RgbImage;
use crate::error::{Error, Result};
use crate::model::{sample_loss, FloatModel, Model, ModelConfig, TrainingRecord};
use crate::tensor::{Tape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub adam: AdamConfig,
    pub label_smoothing: f32,
    /// Fraction of each class used for training; the rest is held out and
    /// serves as both validation and test set.
    pub split_ratio: f64,
    pub seed: u64,
    /// `None` trains on the images as decoded.
    pub augment: Option<AugmentConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 50,
            learning_rate: 1e-4,
            adam: AdamConfig::default(),
            label_smoothing: 0.2,
            split_ratio: 0.8,
            seed: 0,
            augment: Some(AugmentConfig::default()),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Config(format!(
                "label_smoothing must lie in [0, 1), got {}",
                self.label_smoothing
            )));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!(
                "split_ratio must lie in (0, 1), got {}",
                self.split_ratio
            )));
        }
        self.adam.validate()?;
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// Counted from 1.
    pub epoch: usize,
    /// Mean objective over the epoch's (augmented) training samples, taken
    /// with the parameters current at each sample.
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

impl History {
    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }

    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }

    /// `epoch,train_loss,train_acc,val_loss,val_acc`; validation cells are
    /// empty when no validation set was given.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{},{}",
                e.epoch,
                e.train_loss,
                e.train_acc,
                opt(e.val_loss),
                opt(e.val_acc)
            );
        }
        out
    }
}

/// Objective and probabilities of one sample under the current parameters,
/// without keeping gradients.
fn score(model: &FloatModel, img: &RgbImage, label: usize, smoothing: f32) -> Result<(f64, usize)> {
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape);
    let (loss, probs) = sample_loss(&mut tape, img, label, smoothing, &bound, &model.config)?;
    Ok((tape.scalar_value(loss), tape.value(probs).argmax()))
}

/// Mean objective and accuracy over a dataset, without augmentation.
pub fn dataset_loss(model: &FloatModel, ds: &Dataset, smoothing: f32) -> Result<(f64, f64)> {
    let size = model.config.vit.image_size;
    let scored: Vec<(f64, usize)> = (0..ds.len())
        .into_par_iter()
        .map(|i| score(model, &ds.image(i, size)?, ds.items()[i].label, smoothing))
        .collect::<Result<_>>()?;
    let loss = scored.iter().map(|s| s.0).sum::<f64>() / ds.len() as f64;
    let correct = scored
        .iter()
        .zip(ds.items())
        .filter(|((_, p), item)| *p == item.label)
        .count();
    Ok((loss, correct as f64 / ds.len() as f64))
}

/// Trains a freshly initialized model on `train`, reporting each epoch to
/// `on_epoch`. Everything random is drawn from `cfg.seed`, and the gradient
/// path runs on the calling thread only, so equal inputs give bit-identical
/// parameters.
pub fn fit(
    train: &Dataset,
    val: Option<&Dataset>,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(FloatModel, History)> {
    model_cfg.validate()?;
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    let streams = |s: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(s);
        rng
    };
    let (mut init_rng, mut shuffle_rng, mut augment_rng) = (streams(0), streams(1), streams(2));

    let mut model = Model::init(model_cfg.clone(), train.class_names().to_vec(), &mut init_rng)?;
    let names = model.params.names();
    let mut shapes = Vec::new();
    model.params.visit(&mut |_, slot| match slot {
        Slot::Weight(t) | Slot::Param(t) | Slot::Embedding(t) => shapes.push(t.shape().to_vec()),
    });
    let mut adam = AdamState::new(shapes.iter().map(|s| s.as_slice()));
    let size = model_cfg.vit.image_size;
    let mut history = History::default();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s)).collect();
            for &i in batch {
                let label = train.items()[i].label;
                let mut img = train.image(i, size)?;
                if let Some(a) = &cfg.augment {
                    img = augment(&img, a, &mut augment_rng);
                }
                let mut tape = Tape::new();
                let bound = model.params.bind(&mut tape);
                let (loss, probs) =
                    sample_loss(&mut tape, &img, label, cfg.label_smoothing, &bound, model_cfg)?;
                let mut g = tape.backward(loss)?;
                accumulate(&bound, &mut g, &mut grads);
                loss_sum += tape.scalar_value(loss);
                correct += usize::from(tape.value(probs).argmax() == label);
            }
            let inv = 1.0 / batch.len() as f32;
            for g in &mut grads {
                g.data_mut().iter_mut().for_each(|x| *x *= inv);
            }
            adam_step_model(&mut model.params, &grads, &names, &mut adam, cfg.learning_rate, &cfg.adam)?;
        }
        let (val_loss, val_acc) = match val {
            Some(v) => {
                let (l, a) = dataset_loss(&model, v, cfg.label_smoothing)?;
                (Some(l), Some(a))
            }
            None => (None, None),
        };
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
            val_loss,
            val_acc,
        };
        if !stats.train_loss.is_finite() {
            return Err(Error::Numeric(format!("training loss diverged in epoch {epoch}")));
        }
        on_epoch(&stats);
        history.epochs.push(stats);
    }
    Ok((model, history))
}

fn accumulate(
    bound: &crate::model::ModelParams<OnTape>,
    g: &mut crate::tensor::Gradients,
    into: &mut [Tensor],
) {
    let mut k = 0;
    bound.visit(&mut |_, slot| {
        let v = match slot {
            Slot::Weight(v) | Slot::Param(v) | Slot::Embedding(v) => *v,
        };
        let gv = g.take(v);
        for (a, b) in into[k].data_mut().iter_mut().zip(gv.data()) {
            *a += b;
        }
        k += 1;
    });
}

pub struct TrainOutcome {
    pub model: FloatModel,
    pub history: History,
    pub train: Dataset,
    pub test: Dataset,
}

/// Stratified split of `ds`, then [`fit`] with the held-out part as the
/// validation set. The split is recorded in the model.
pub fn train(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (train_set, test_set) = stratified_split(ds, cfg.split_ratio, cfg.seed)?;
    let (mut model, history) = fit(&train_set, Some(&test_set), model_cfg, cfg, on_epoch)?;
    model.training = Some(TrainingRecord {
        split_seed: cfg.seed,
        split_ratio: cfg.split_ratio,
    });
    Ok(TrainOutcome {
        model,
        history,
        train: train_set,
        test: test_set,
    })
}

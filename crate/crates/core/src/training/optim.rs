use crate::backend::{Float, Slot};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config(format!(
                "Adam betas must lie in [0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("Adam epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// First and second moment estimates for a list of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    /// Steps taken so far.
    pub t: u64,
}

impl AdamState {
    pub fn new<'a>(shapes: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let m: Vec<Tensor> = shapes.into_iter().map(Tensor::zeros).collect();
        AdamState {
            v: m.clone(),
            m,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` from `grads` (same order,
/// `names` only for diagnostics). Nothing is modified if any gradient is
/// non-finite.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    names: &[String],
    state: &mut AdamState,
    lr: f32,
    cfg: &AdamConfig,
) -> Result<()> {
    let shapes: Vec<&[usize]> = params.iter().map(|p| p.shape()).collect();
    let t = check_step(&shapes, grads, names, state)?;
    for (i, p) in params.iter_mut().enumerate() {
        update(p, i, grads, state, t, lr, cfg);
    }
    Ok(())
}

/// [`adam_step`] over every tensor of a model, in visit order.
pub fn adam_step_model(
    params: &mut ModelParams,
    grads: &[Tensor],
    names: &[String],
    state: &mut AdamState,
    lr: f32,
    cfg: &AdamConfig,
) -> Result<()> {
    let mut shapes = Vec::new();
    params.visit(&mut |_, slot| shapes.push(slot_shape(slot)));
    let shapes: Vec<&[usize]> = shapes.iter().map(|s| s.as_slice()).collect();
    let t = check_step(&shapes, grads, names, state)?;
    let mut i = 0;
    params.visit_mut(&mut |_, p| {
        update(p, i, grads, state, t, lr, cfg);
        i += 1;
    });
    Ok(())
}

fn slot_shape(slot: Slot<'_, Float>) -> Vec<usize> {
    match slot {
        Slot::Weight(t) | Slot::Param(t) | Slot::Embedding(t) => t.shape().to_vec(),
    }
}

/// Validates shapes and finiteness, then advances and returns the step count.
fn check_step(
    shapes: &[&[usize]],
    grads: &[Tensor],
    names: &[String],
    state: &mut AdamState,
) -> Result<u64> {
    if shapes.len() != grads.len() || shapes.len() != state.m.len() || names.len() != grads.len() {
        return Err(Error::Shape(format!(
            "Adam got {} params, {} grads, {} names and {} moments",
            shapes.len(),
            grads.len(),
            names.len(),
            state.m.len()
        )));
    }
    let t = state.t + 1;
    for ((&shape, g), name) in shapes.iter().zip(grads).zip(names) {
        if shape != g.shape() {
            return Err(Error::dim("adam_step", shape, g.shape()));
        }
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient {
                step: t,
                param: name.clone(),
                max_abs: g.data().iter().fold(0.0f32, |m, x| m.max(x.abs())),
            });
        }
    }
    state.t = t;
    Ok(t)
}

fn update(
    theta: &mut Tensor,
    i: usize,
    grads: &[Tensor],
    state: &mut AdamState,
    t: u64,
    lr: f32,
    cfg: &AdamConfig,
) {
    let bc1 = 1.0 - (cfg.beta1 as f64).powi(t as i32);
    let bc2 = 1.0 - (cfg.beta2 as f64).powi(t as i32);
    let g = grads[i].data();
    let m = state.m[i].data_mut();
    let v = state.v[i].data_mut();
    for (j, theta) in theta.data_mut().iter_mut().enumerate() {
        m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
        v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
        let m_hat = m[j] as f64 / bc1;
        let v_hat = v[j] as f64 / bc2;
        *theta -= (lr as f64 * m_hat / (v_hat.sqrt() + cfg.epsilon as f64)) as f32;
    }
}

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Compares the tape gradient of a scalar function against central
/// differences on every coordinate of `x`.
///
/// `f` receives a fresh tape and the leaf holding `x`, and must return a
/// scalar node. The result is `max_i |analytic_i − numeric_i| / max(1, |analytic_i|)`.
pub fn grad_check<F>(f: F, x: &Tensor, h: f32) -> Result<f32>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let coords: Vec<usize> = (0..x.numel()).collect();
    check_coords(&f, x, h, &coords)
}

/// Like [`grad_check`] but probes at most `max_coords` coordinates chosen with
/// a seeded RNG; used where a full sweep costs two forward passes per
/// parameter.
pub fn grad_check_sampled<F>(f: F, x: &Tensor, h: f32, max_coords: usize, seed: u64) -> Result<f32>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let n = x.numel();
    let mut coords = if max_coords >= n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample(&mut rng, n, max_coords).into_vec()
    };
    coords.sort_unstable();
    check_coords(&f, x, h, &coords)
}

fn eval<F>(f: &F, x: Tensor) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let v = tape.leaf(x);
    let out = f(&mut tape, v)?;
    let value = tape.value(out);
    if value.numel() != 1 {
        return Err(Error::Shape(format!(
            "grad_check needs a scalar function, got shape {:?}",
            value.shape()
        )));
    }
    let y = tape.scalar_value(out);
    if !y.is_finite() {
        return Err(Error::Numeric(format!("function value is {y}")));
    }
    Ok(y)
}

fn check_coords<F>(f: &F, x: &Tensor, h: f32, coords: &[usize]) -> Result<f32>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(1e-5..=1e-2).contains(&h) {
        return Err(Error::Domain(format!("step {h} outside [1e-5, 1e-2]")));
    }
    let mut tape = Tape::new();
    let v = tape.leaf(x.clone());
    let out = f(&mut tape, v)?;
    let analytic = tape.backward(out)?.get(v);
    analytic.check_finite("analytic gradient")?;

    let mut worst = 0.0f64;
    for &i in coords {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        // Use the realized step, which differs from h after f32 rounding.
        let step = (plus.data()[i] as f64) - (minus.data()[i] as f64);
        let numeric = (eval(f, plus)? - eval(f, minus)?) / step;
        let a = analytic.data()[i] as f64;
        let err = (a - numeric).abs() / a.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst as f32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_step_outside_range() {
        let x = Tensor::zeros(&[2]);
        let f = |t: &mut Tape, v: Var| Ok(t.sum_squares(v));
        assert!(grad_check(f, &x, 0.5).is_err());
        assert!(grad_check(f, &x, 1e-7).is_err());
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // The detached constant makes the value grow 3x as fast as the tape
        // gradient reports.
        let x = Tensor::from_vec(vec![0.5, -1.0]);
        let err = grad_check(
            |t, v| {
                let s = t.sum(v);
                let k = t.value(s).data()[0];
                let c = t.leaf(Tensor::scalar(2.0 * k));
                t.add(s, c)
            },
            &x,
            1e-3,
        )
        .unwrap();
        assert!(err > 1.0);
    }

    #[test]
    fn non_finite_function_is_an_error() {
        let x = Tensor::from_vec(vec![1.0]);
        let r = grad_check(
            |t, v| {
                let inf = t.leaf(Tensor::scalar(f32::INFINITY));
                let s = t.sum(v);
                t.add(s, inf)
            },
            &x,
            1e-3,
        );
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn sampled_check_agrees_with_full_on_quadratic() {
        let x = Tensor::from_vec((0..50).map(|i| i as f32 * 0.1 - 2.0).collect());
        let f = |t: &mut Tape, v: Var| Ok(t.sum_squares(v));
        assert!(grad_check_sampled(f, &x, 1e-3, 10, 3).unwrap() < 1e-5);
    }
}

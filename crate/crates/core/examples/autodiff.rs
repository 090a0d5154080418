//! Reverse-mode gradients on the tape, checked against central differences.
//!
//! ```bash
//! cargo run --release --example autodiff
//! ```

use gccvit::tensor::{grad_check, Tape, Tensor};

fn main() -> gccvit::Result<()> {
    // f(x) = sum(softmax(x · W)) weighted by a fixed probe.
    let x = Tensor::from_rows(&[&[0.5, -1.0, 2.0], &[1.5, 0.0, -0.5]]);
    let w = Tensor::from_rows(&[&[1.0, -2.0], &[0.5, 0.25], &[-1.0, 1.0]]);
    let probe = Tensor::from_rows(&[&[1.0, 3.0], &[-2.0, 0.5]]);

    let f = |t: &mut Tape, xv| {
        let wv = t.leaf(w.clone());
        let y = t.matmul(xv, wv)?;
        let s = t.softmax(y, 1)?;
        let p = t.leaf(probe.clone());
        let m = t.mul(s, p)?;
        Ok(t.sum(m))
    };

    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let out = f(&mut tape, xv)?;
    let grads = tape.backward(out)?;
    println!("f(x)      = {:.6}", tape.scalar_value(out));
    println!("df/dx     = {:?}", grads.get(xv).data());
    println!("tape size = {} nodes", tape.len());

    let err = grad_check(f, &x, 1e-3)?;
    println!("max error against central differences: {err:.2e}");
    Ok(())
}

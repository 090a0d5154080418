//! Post-training int8 quantization of a trained model: weight round trip,
//! paired accuracy and container sizes.
//!
//! ```bash
//! cargo run --release --example quantize_model
//! ```

use gccvit::config::RunConfig;
use gccvit::model::{Classifier, Provenance};
use gccvit::quantize::{compare, dequantize_tensor, quantize_model, quantize_tensor, quantized_forward};
use gccvit::synthetic::{self, SyntheticSpec};
use gccvit::tensor::Tensor;
use gccvit::training::fit;

const DESK: &str = include_str!("../../../configs/desk.cfg");

fn main() -> gccvit::Result<()> {
    let w = Tensor::from_vec(vec![-0.8, -0.1, 0.0, 0.05, 0.4]);
    let q = quantize_tensor(&w)?;
    println!("w      {:?}", w.data());
    println!("int8   {:?}  scale {:.6}", q.data(), q.scale());
    println!("w'     {:?}", dequantize_tensor(&q).data());

    let ds = synthetic::dataset(&SyntheticSpec::default())?;
    let mut cfg = RunConfig::from_text(DESK)?;
    cfg.model.head.num_classes = ds.num_classes();
    let (model, _) = fit(&ds, None, &cfg.model, &cfg.train, |_| {})?;
    let qm = quantize_model(
        &model,
        Provenance {
            source_sha256: "unsaved".into(),
            quantized_at: 0,
        },
    )?;

    let img = ds.image(0, cfg.model.vit.image_size)?;
    let (qp, saturated) = quantized_forward(&qm, &img)?;
    println!("\nfloat probs {:.4?}", model.predict(&img)?.as_slice());
    println!("int8 probs  {:.4?} ({saturated} saturated accumulators)", qp.as_slice());

    println!("\n{}", compare(&model, &qm, &ds)?);
    Ok(())
}

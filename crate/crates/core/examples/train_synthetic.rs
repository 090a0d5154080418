//! Trains the desk-scale model on the generated leaf corpus and evaluates it
//! on the held-out split.
//!
//! ```bash
//! cargo run --release --example train_synthetic -- model.gvsm
//! ```

use gccvit::config::RunConfig;
use gccvit::model_io::save_model;
use gccvit::synthetic::{self, SyntheticSpec};
use gccvit::training::{evaluate, train};

const DESK: &str = include_str!("../../../configs/desk.cfg");

fn main() -> gccvit::Result<()> {
    let out = std::env::args().nth(1);
    let ds = synthetic::dataset(&SyntheticSpec {
        per_class: 20,
        ..SyntheticSpec::default()
    })?;
    let mut cfg = RunConfig::from_text(DESK)?;
    cfg.model.head.num_classes = ds.num_classes();

    let outcome = train(&ds, &cfg.model, &cfg.train, |e| {
        if e.epoch % 5 == 0 {
            println!(
                "epoch {:>2}  loss {:.4}  acc {:.3}  val_loss {:.4}  val_acc {:.3}",
                e.epoch,
                e.train_loss,
                e.train_acc,
                e.val_loss.unwrap_or(f64::NAN),
                e.val_acc.unwrap_or(f64::NAN)
            );
        }
    })?;
    let report = evaluate(&outcome.model, &outcome.test)?;
    print!("\n{}", report.confusion_text());
    println!("held-out accuracy {:.4} on {} images", report.accuracy, outcome.test.len());

    if let Some(path) = out {
        let bytes = save_model(&outcome.model, &path)?;
        println!("saved {path} ({bytes} bytes)");
    }
    Ok(())
}

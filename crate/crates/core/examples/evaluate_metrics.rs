//! Per-class and macro precision, recall, F1 and accuracy from a confusion
//! matrix, including a class that is never predicted.
//!
//! ```bash
//! cargo run --release --example evaluate_metrics
//! ```

use gccvit::training::EvalReport;

fn main() -> gccvit::Result<()> {
    let names = vec!["blight".to_string(), "healthy".to_string(), "rust".to_string()];
    // confusion[true][predicted]; nothing is ever predicted as rust.
    let confusion = vec![vec![8, 2, 0], vec![1, 9, 0], vec![3, 1, 0]];
    let report = EvalReport::from_confusion(names, confusion)?;
    print!("{}", report.confusion_text());
    println!();
    print!("{}", report.to_csv());
    println!();
    println!("overall accuracy {:.4}, macro F1 {:.4}", report.accuracy, report.macro_f1);
    let rust = &report.per_class[2];
    println!(
        "rust precision undefined: {} (reported as {})",
        rust.precision_undefined, rust.precision
    );
    Ok(())
}

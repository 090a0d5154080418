//! Stratified 80/20 split on a corpus shaped like the 39-class leaf dataset.
//!
//! ```bash
//! cargo run --release --example stratified_split
//! ```

use std::sync::Arc;

use gccvit::chromatic::RgbImage;
use gccvit::training::{stratified_split, train_count, Dataset, ImageSource, Item};

const COUNTS: [usize; 39] = [
    1000, 1000, 1000, 1645, 1143, 1502, 1000, 1052, 1000, 1000, 1162, 1000, 1180, 1000, 1000,
    1076, 1192, 1909, 1000, 1383, 1478, 1000, 1000, 1771, 1000, 5090, 5357, 1000, 2297, 2127,
    1000, 1591, 1109, 5507, 1000, 1835, 1404, 1000, 1676,
];

fn main() -> gccvit::Result<()> {
    // Items only need labels here, so they all share one tiny image.
    let pixel = Arc::new(RgbImage::filled(1, 1, [0.0; 3])?);
    let mut items = Vec::new();
    for (label, &n) in COUNTS.iter().enumerate() {
        items.extend((0..n).map(|_| Item {
            source: ImageSource::Memory(pixel.clone()),
            label,
        }));
    }
    let names = (0..COUNTS.len()).map(|k| format!("class_{k:02}")).collect();
    let ds = Dataset::new(items, names)?;

    let (train, test) = stratified_split(&ds, 0.8, 42)?;
    println!("{} images -> {} train, {} test", ds.len(), train.len(), test.len());
    for (k, (tr, te)) in train.class_counts().iter().zip(test.class_counts()).enumerate().take(5) {
        println!("class_{k:02}: {tr:>5} train {te:>5} test ({:.4})", *tr as f64 / (tr + te) as f64);
    }

    // Small classes still keep at least one item on each side.
    for n in [2, 3, 5, 7] {
        println!("n = {n}: {} train", train_count(n, 0.8));
    }
    Ok(())
}

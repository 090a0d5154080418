//! Green Chromatic Coordinate: per-pixel values, the image mean fed to the
//! classifier, and healthy vs diseased box-plot statistics.
//!
//! ```bash
//! cargo run --release --example gcc_features
//! ```

use gccvit::chromatic::{gcc_image, gcc_pixel, gcc_stats, Grouping, RgbImage};
use gccvit::synthetic::{self, SyntheticSpec};

fn main() -> gccvit::Result<()> {
    for (label, rgb) in [
        ("pure green", [0.0, 1.0, 0.0]),
        ("grey", [0.5, 0.5, 0.5]),
        ("black", [0.0, 0.0, 0.0]),
        ("leaf green", [0.25, 0.55, 0.2]),
        ("blight brown", [0.45, 0.3, 0.15]),
    ] {
        println!("{label:<13} {:?} -> {:.4}", rgb, gcc_pixel(rgb[0], rgb[1], rgb[2])?);
    }

    let img = RgbImage::filled(8, 8, [0.25, 0.55, 0.2])?;
    println!("uniform 8x8 leaf image mean GCC {:.4}", gcc_image(&img));

    let names = synthetic::class_names();
    let spec = SyntheticSpec {
        per_class: 40,
        ..SyntheticSpec::default()
    };
    let values: Vec<(String, f64)> = synthetic::generate(&spec)
        .iter()
        .map(|(img, label)| (names[*label].clone(), gcc_image(img)))
        .collect();
    let stats = gcc_stats(values.iter().map(|(c, v)| (c.as_str(), *v)), &names, Grouping::Both);
    print!("\n{}", stats.to_csv());
    Ok(())
}

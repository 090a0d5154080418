//! Seeded random augmentation. Writes the original and a few augmented
//! copies as PNGs.
//!
//! ```bash
//! cargo run --release --example augmentation -- /tmp/aug
//! ```

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gccvit::chromatic::RgbImage;
use gccvit::synthetic::leaf_image;
use gccvit::training::{augment, Affine, AugmentConfig};

fn save(img: &RgbImage, path: &PathBuf) {
    image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.to_u8())
        .unwrap()
        .save(path)
        .unwrap();
}

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "augmented".into()));
    std::fs::create_dir_all(&out).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let img = leaf_image(64, 2, &mut rng);
    save(&img, &out.join("original.png"));

    // A fixed affine map: 30 degrees of rotation after a 10 degree shear.
    let m = Affine::rotation(30.0).compose(&Affine::shear(10.0));
    save(&m.warp(&img), &out.join("rotate_shear.png"));

    let cfg = AugmentConfig::default();
    for i in 0..6 {
        let a = augment(&img, &cfg, &mut rng);
        save(&a, &out.join(format!("aug_{i}.png")));
    }

    // Same seed, same images.
    let first = augment(&img, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
    let again = augment(&img, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
    println!("deterministic: {}", first.pixels() == again.pixels());
    println!("wrote 8 images to {}", out.display());
}

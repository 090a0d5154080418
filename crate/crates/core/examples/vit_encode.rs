//! Patch embedding and the pre-norm transformer encoder: one image in, one
//! class-token feature out.
//!
//! ```bash
//! cargo run --release --example vit_encode
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gccvit::synthetic::leaf_image;
use gccvit::tensor::Tensor;
use gccvit::vit::{attention, encode, patchify, VitConfig, VitParams};

fn main() -> gccvit::Result<()> {
    let cfg = VitConfig {
        image_size: 32,
        num_layers: 2,
        ..VitConfig::default()
    };
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let params = VitParams::init(&cfg, &mut rng)?;
    let img = leaf_image(cfg.image_size, 1, &mut rng);

    let patches = patchify(&img, cfg.patch_size)?;
    println!(
        "{}x{} image, {}px patches -> {:?} patch matrix ({} tokens with the class token)",
        cfg.image_size,
        cfg.image_size,
        cfg.patch_size,
        patches.shape(),
        cfg.num_patches() + 1
    );

    let feature = encode(&img, &params, &cfg)?;
    println!("class-token feature {:?}", feature.shape());
    println!("first values {:?}", &feature.data()[..6]);

    // With V = I the attention output is the attention matrix itself.
    let q = Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 2.0]]);
    let k = Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
    let a = attention(&q, &k, &Tensor::eye(3))?;
    for row in a.data().chunks(3) {
        println!("attention row {row:.4?} sums to {:.6}", row.iter().sum::<f32>());
    }
    Ok(())
}

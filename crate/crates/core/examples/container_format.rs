//! The binary model container: writes a tiny model, dumps the header bytes
//! and the parsed manifest, and reads it back.
//!
//! ```bash
//! cargo run --release --example container_format -- /tmp/tiny
//! ```
//!
//! With a path argument it also writes `<path>.f32.gvsm` and its int8
//! counterpart `<path>.i8.gvsm`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gccvit::classifier::HeadConfig;
use gccvit::model::{FloatModel, ModelConfig, Provenance};
use gccvit::model_io::{decode_model, encode_model, read_manifest, save_model};
use gccvit::quantize::quantize_model;
use gccvit::vit::VitConfig;

fn hexdump(bytes: &[u8]) {
    for (i, row) in bytes.chunks(16).enumerate() {
        let hex: Vec<String> = row.iter().map(|b| format!("{b:02x}")).collect();
        let text: String = row
            .iter()
            .map(|&b| if b.is_ascii_graphic() || b == b' ' { b as char } else { '.' })
            .collect();
        println!("{:08x}  {:<47}  {text}", i * 16, hex.join(" "));
    }
}

fn main() -> gccvit::Result<()> {
    let cfg = ModelConfig {
        vit: VitConfig {
            image_size: 4,
            patch_size: 2,
            projection_dim: 2,
            num_heads: 1,
            num_layers: 1,
            mlp_hidden: 2,
            layer_norm_eps: 1e-6,
        },
        head: HeadConfig {
            hidden: 2,
            num_classes: 2,
            ..HeadConfig::default()
        },
    };
    let names = vec!["healthy".to_string(), "rust".to_string()];
    let model = FloatModel::init(cfg, names, &mut ChaCha8Rng::seed_from_u64(0))?;
    let bytes = encode_model(&model)?;

    let manifest = read_manifest(&bytes)?;
    println!("{} bytes, payload at {}", bytes.len(), manifest.payload_start);
    println!("first 64 bytes:");
    hexdump(&bytes[..64]);
    println!("\nconfig text:\n{}", manifest.config_text);
    println!("classes {:?}", manifest.class_names);
    for r in &manifest.records {
        println!(
            "{:<24} {:?} {:?} at +{} ({} bytes)",
            r.name, r.dtype, r.shape, r.offset, r.byte_len
        );
    }

    let back = decode_model(&bytes)?.into_float()?;
    println!("\nround trip re-encodes identically: {}", encode_model(&back)? == bytes);

    if let Some(base) = std::env::args().nth(1) {
        let qm = quantize_model(
            &model,
            Provenance {
                source_sha256: "0".repeat(64),
                quantized_at: 0,
            },
        )?;
        let f = save_model(&model, format!("{base}.f32.gvsm"))?;
        let q = save_model(&qm, format!("{base}.i8.gvsm"))?;
        println!("wrote {base}.f32.gvsm ({f} bytes) and {base}.i8.gvsm ({q} bytes)");
    }
    Ok(())
}

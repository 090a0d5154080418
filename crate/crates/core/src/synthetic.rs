//! Small generated leaf corpus for tests, examples and smoke runs: one
//! colored disk per image on a soil-colored background, three classes.
//!
//! - `blight`: brown disk with dark patches
//! - `healthy`: green disk
//! - `rust`: orange disk with dark red pustules

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chromatic::RgbImage;
use crate::error::{Error, Result};
use crate::training::Dataset;

pub const CLASS_NAMES: [&str; 3] = ["blight", "healthy", "rust"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub image_size: usize,
    pub per_class: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            image_size: 32,
            per_class: 10,
            seed: 0,
        }
    }
}

struct Style {
    leaf: [f32; 3],
    spot: Option<[f32; 3]>,
}

fn style(label: usize) -> Style {
    match label {
        0 => Style {
            leaf: [0.45, 0.32, 0.16],
            spot: Some([0.2, 0.14, 0.08]),
        },
        1 => Style {
            leaf: [0.22, 0.58, 0.16],
            spot: None,
        },
        _ => Style {
            leaf: [0.78, 0.42, 0.12],
            spot: Some([0.5, 0.12, 0.06]),
        },
    }
}

/// One image of class `label` (index into [`CLASS_NAMES`]).
pub fn leaf_image<R: Rng + ?Sized>(size: usize, label: usize, rng: &mut R) -> RgbImage {
    let s = style(label);
    let jitter = |c: [f32; 3], rng: &mut R, amount: f32| c.map(|v| v + rng.gen_range(-amount..amount));
    let leaf = jitter(s.leaf, rng, 0.05);
    let soil = jitter([0.36, 0.33, 0.3], rng, 0.04);
    let n = size as f32;
    let (cy, cx) = (rng.gen_range(0.4..0.6) * n, rng.gen_range(0.4..0.6) * n);
    let radius = rng.gen_range(0.28..0.4) * n;
    let spots: Vec<(f32, f32, f32)> = match s.spot {
        Some(_) => (0..rng.gen_range(3..7))
            .map(|_| {
                let a = rng.gen_range(0.0..std::f32::consts::TAU);
                let d = rng.gen_range(0.0..0.7) * radius;
                (cy + d * a.sin(), cx + d * a.cos(), rng.gen_range(0.06..0.12) * n)
            })
            .collect(),
        None => Vec::new(),
    };
    let mut px = Vec::with_capacity(size * size * 3);
    for r in 0..size {
        for c in 0..size {
            let (y, x) = (r as f32 + 0.5, c as f32 + 0.5);
            let inside = (y - cy).powi(2) + (x - cx).powi(2) <= radius * radius;
            let base = if !inside {
                soil
            } else if spots
                .iter()
                .any(|&(sy, sx, sr)| (y - sy).powi(2) + (x - sx).powi(2) <= sr * sr)
            {
                s.spot.unwrap()
            } else {
                leaf
            };
            px.extend(jitter(base, rng, 0.04).map(|v| v.clamp(0.0, 1.0)));
        }
    }
    RgbImage::new(size, size, px).expect("generated pixels are in range")
}

/// `per_class` images of every class, interleaved by class.
pub fn generate(spec: &SyntheticSpec) -> Vec<(RgbImage, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.per_class)
        .flat_map(|_| 0..CLASS_NAMES.len())
        .map(|label| (leaf_image(spec.image_size, label, &mut rng), label))
        .collect()
}

pub fn class_names() -> Vec<String> {
    CLASS_NAMES.iter().map(|s| s.to_string()).collect()
}

pub fn dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    Dataset::from_memory(generate(spec), class_names())
}

/// Writes the corpus as `root/<class>/<index>.png`.
pub fn write_dir(root: &Path, spec: &SyntheticSpec) -> Result<()> {
    for name in CLASS_NAMES {
        let dir = root.join(name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    for (i, (img, label)) in generate(spec).into_iter().enumerate() {
        let path = root.join(CLASS_NAMES[label]).join(format!("{i:04}.png"));
        image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.to_u8())
            .expect("buffer length matches dimensions")
            .save(&path)
            .map_err(|e| Error::Image {
                path: path.clone(),
                message: e.to_string(),
            })?;
    }
    Ok(())
}

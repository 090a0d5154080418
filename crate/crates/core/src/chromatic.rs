//! RGB channel handling and the Green Chromatic Coordinate (GCC),
//! `G / (R + G + B)`, used as a scalar greenness feature per image.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Height × width RGB image with channel-interleaved `f32` pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    pixels: Vec<f32>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty image {height}x{width}")));
        }
        if pixels.len() != height * width * 3 {
            return Err(Error::Shape(format!(
                "{height}x{width} RGB image needs {} values, got {}",
                height * width * 3,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(RgbImage {
            height,
            width,
            pixels,
        })
    }

    /// Rescales raw 8-bit samples by 1/255.
    pub fn from_u8(height: usize, width: usize, raw: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            raw.iter().map(|&v| v as f32 / 255.0).collect(),
        )
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Result<Self> {
        let pixels = (0..height * width).flat_map(|_| rgb).collect();
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        let i = (row * self.width + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub(crate) fn set_pixel(&mut self, row: usize, col: usize, rgb: [f32; 3]) {
        let i = (row * self.width + col) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Quantizes back to 8 bits per channel for encoding.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Splits an image into its R, G and B planes, each `[H×W]`.
pub fn split_channels(img: &RgbImage) -> (Tensor, Tensor, Tensor) {
    let plane = |c: usize| {
        let data = img.pixels.chunks(3).map(|px| px[c]).collect();
        Tensor::new(vec![img.height, img.width], data).expect("plane shape")
    };
    (plane(0), plane(1), plane(2))
}

/// Inverse of [`split_channels`].
pub fn merge_channels(r: &Tensor, g: &Tensor, b: &Tensor) -> Result<RgbImage> {
    let (h, w) = r.dims2("merge_channels")?;
    for p in [g, b] {
        if p.shape() != r.shape() {
            return Err(Error::dim("merge_channels", r.shape(), p.shape()));
        }
    }
    let pixels = r
        .data()
        .iter()
        .zip(g.data())
        .zip(b.data())
        .flat_map(|((&r, &g), &b)| [r, g, b])
        .collect();
    RgbImage::new(h, w, pixels)
}

/// GCC of one pixel. A black pixel has no chromaticity and maps to the
/// achromatic value 1/3.
pub fn gcc_pixel(r: f64, g: f64, b: f64) -> Result<f64> {
    if r < 0.0 || g < 0.0 || b < 0.0 {
        return Err(Error::Domain(format!(
            "negative channel value in ({r}, {g}, {b})"
        )));
    }
    let total = r + g + b;
    if total == 0.0 {
        return Ok(1.0 / 3.0);
    }
    Ok(g / total)
}

/// Mean per-pixel GCC of an image.
pub fn gcc_image(img: &RgbImage) -> f64 {
    let values: Vec<f64> = img
        .pixels
        .chunks(3)
        .map(|px| {
            gcc_pixel(px[0] as f64, px[1] as f64, px[2] as f64)
                .expect("image pixels are non-negative")
        })
        .collect();
    pairwise_sum(&values) / values.len() as f64
}

fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Health status implied by a class directory name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Health {
    Healthy,
    Diseased,
}

impl Health {
    /// Names containing "healthy" are healthy; background classes belong to
    /// neither group; everything else is diseased.
    pub fn of_class(name: &str) -> Option<Health> {
        let lower = name.to_ascii_lowercase();
        if lower.contains("background") {
            None
        } else if lower.contains("healthy") {
            Some(Health::Healthy)
        } else {
            Some(Health::Diseased)
        }
    }
}

/// Which grouping rows to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    Health,
    Class,
    Both,
}

/// Box-plot summary of one group of per-image GCC values.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl BoxStats {
    /// `None` for an empty group. Quartiles interpolate linearly between
    /// order statistics. The result does not depend on input order.
    pub fn from_values(values: &[f64]) -> Option<BoxStats> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let quantile = |q: f64| {
            let pos = q * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        };
        Some(BoxStats {
            n: sorted.len(),
            mean: pairwise_sum(&sorted) / sorted.len() as f64,
            median: quantile(0.5),
            q1: quantile(0.25),
            q3: quantile(0.75),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub group: String,
    pub stats: BoxStats,
}

/// GCC box-plot statistics per group. Empty groups are absent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GccStats {
    pub rows: Vec<GroupStats>,
}

impl GccStats {
    pub fn get(&self, group: &str) -> Option<&BoxStats> {
        self.rows.iter().find(|r| r.group == group).map(|r| &r.stats)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,n,mean,median,q1,q3,min,max\n");
        for row in &self.rows {
            let s = &row.stats;
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                csv_field(&row.group),
                s.n,
                s.mean,
                s.median,
                s.q1,
                s.q3,
                s.min,
                s.max
            )
            .expect("write to string");
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Aggregates per-image GCC values labelled with their class name. Health
/// groups come first ("healthy", "diseased"), then one "class:<name>" row per
/// class in `class_names` order.
pub fn gcc_stats<'a>(
    samples: impl IntoIterator<Item = (&'a str, f64)>,
    class_names: &[String],
    grouping: Grouping,
) -> GccStats {
    let mut healthy = Vec::new();
    let mut diseased = Vec::new();
    let mut per_class: Vec<Vec<f64>> = vec![Vec::new(); class_names.len()];
    for (class, value) in samples {
        match Health::of_class(class) {
            Some(Health::Healthy) => healthy.push(value),
            Some(Health::Diseased) => diseased.push(value),
            None => {}
        }
        if let Some(i) = class_names.iter().position(|c| c == class) {
            per_class[i].push(value);
        }
    }
    let mut rows = Vec::new();
    if matches!(grouping, Grouping::Health | Grouping::Both) {
        for (name, values) in [("healthy", &healthy), ("diseased", &diseased)] {
            if let Some(stats) = BoxStats::from_values(values) {
                rows.push(GroupStats {
                    group: name.to_string(),
                    stats,
                });
            }
        }
    }
    if matches!(grouping, Grouping::Class | Grouping::Both) {
        for (name, values) in class_names.iter().zip(&per_class) {
            if let Some(stats) = BoxStats::from_values(values) {
                rows.push(GroupStats {
                    group: format!("class:{name}"),
                    stats,
                });
            }
        }
    }
    GccStats { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_single_pixel() {
        let img = RgbImage::new(1, 1, vec![0.2, 0.5, 0.3]).unwrap();
        let (r, g, b) = split_channels(&img);
        assert_eq!(r.data(), &[0.2]);
        assert_eq!(g.data(), &[0.5]);
        assert_eq!(b.data(), &[0.3]);
        assert_eq!(r.shape(), &[1, 1]);
    }

    #[test]
    fn pure_green_has_empty_red_and_blue() {
        let img = RgbImage::filled(3, 4, [0.0, 1.0, 0.0]).unwrap();
        let (r, _, b) = split_channels(&img);
        assert!(r.data().iter().all(|&v| v == 0.0));
        assert!(b.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ingestion_rejects_out_of_range_pixels() {
        assert!(matches!(
            RgbImage::new(1, 1, vec![0.2, 1.5, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(RgbImage::new(1, 2, vec![0.2; 3]).is_err());
        let img = RgbImage::from_u8(1, 1, &[255, 0, 51]).unwrap();
        assert_eq!(img.pixel(0, 0), [1.0, 0.0, 0.2]);
    }

    #[test]
    fn gcc_pixel_examples() {
        assert_eq!(gcc_pixel(0.0, 1.0, 0.0).unwrap(), 1.0);
        assert!((gcc_pixel(0.4, 0.4, 0.4).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((gcc_pixel(0.1, 0.6, 0.3).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(gcc_pixel(0.0, 0.0, 0.0).unwrap(), 1.0 / 3.0);
        assert!(matches!(gcc_pixel(-0.1, 0.5, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn gcc_image_examples() {
        let green = RgbImage::filled(4, 4, [0.0, 1.0, 0.0]).unwrap();
        assert_eq!(gcc_image(&green), 1.0);

        let mut half = RgbImage::filled(2, 2, [0.5, 0.5, 0.5]).unwrap();
        half.set_pixel(0, 0, [0.0, 1.0, 0.0]);
        half.set_pixel(0, 1, [0.0, 1.0, 0.0]);
        assert!((gcc_image(&half) - 2.0 / 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn split_merge_round_trip(h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let px = (0..h * w * 3).map(|_| rng.gen::<f32>()).collect();
            let img = RgbImage::new(h, w, px).unwrap();
            let (r, g, b) = split_channels(&img);
            prop_assert_eq!(merge_channels(&r, &g, &b).unwrap(), img);
        }

        #[test]
        fn gcc_image_in_unit_interval(h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let px = (0..h * w * 3).map(|_| rng.gen::<f32>()).collect();
            let g = gcc_image(&RgbImage::new(h, w, px).unwrap());
            prop_assert!((0.0..=1.0).contains(&g));
        }

        #[test]
        fn elevating_green_raises_gcc(seed in any::<u64>(), bump in 0.01f32..0.5) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let px: Vec<f32> = (0..4 * 4 * 3).map(|_| rng.gen_range(0.05f32..0.5)).collect();
            let base = RgbImage::new(4, 4, px.clone()).unwrap();
            let mut greener = px;
            for c in greener.chunks_mut(3) {
                c[1] += bump;
            }
            let greener = RgbImage::new(4, 4, greener).unwrap();
            prop_assert!(gcc_image(&greener) > gcc_image(&base));
        }
    }

    #[test]
    fn box_stats_examples() {
        let s = BoxStats::from_values(&[0.6, 0.2]).unwrap();
        assert!((s.mean - 0.4).abs() < 1e-12);
        assert!((s.median - 0.4).abs() < 1e-12);

        let s = BoxStats::from_values(&[0.37]).unwrap();
        assert_eq!((s.min, s.median, s.max), (0.37, 0.37, 0.37));
        assert!(BoxStats::from_values(&[]).is_none());

        let s = BoxStats::from_values(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
    }

    #[test]
    fn box_stats_are_order_independent() {
        let v: Vec<f64> = (0..101).map(|i| ((i * 37) % 101) as f64 / 101.0 + 1e-9 * i as f64).collect();
        let mut r = v.clone();
        r.reverse();
        assert_eq!(BoxStats::from_values(&v), BoxStats::from_values(&r));
    }

    #[test]
    fn health_groups_and_background() {
        assert_eq!(Health::of_class("Tomato___healthy"), Some(Health::Healthy));
        assert_eq!(Health::of_class("Tomato___Late_blight"), Some(Health::Diseased));
        assert_eq!(Health::of_class("Background_without_leaves"), None);

        let names = vec!["Apple_healthy".to_string(), "Apple_scab".to_string(), "Background_without_leaves".to_string()];
        let samples = [("Apple_healthy", 0.5), ("Apple_scab", 0.3), ("Background_without_leaves", 0.2)];
        let stats = gcc_stats(samples, &names, Grouping::Both);
        assert_eq!(stats.get("healthy").unwrap().n, 1);
        assert_eq!(stats.get("diseased").unwrap().n, 1);
        assert_eq!(stats.get("class:Background_without_leaves").unwrap().n, 1);
        assert_eq!(stats.rows.len(), 5);
        let csv = stats.to_csv();
        assert!(csv.starts_with("group,n,mean,median,q1,q3,min,max\n"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn empty_group_is_absent() {
        let names = vec!["Corn_healthy".to_string()];
        let stats = gcc_stats([("Corn_healthy", 0.4)], &names, Grouping::Health);
        assert!(stats.get("diseased").is_none());
        assert_eq!(stats.rows.len(), 1);
    }
}

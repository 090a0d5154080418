//! Random geometric augmentation: rotation, shift, shear and zoom composed
//! into one affine map, then independent horizontal and vertical flips.

use rand::Rng;

use crate::chromatic::RgbImage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    /// Rotation angle drawn from `[-rotation_degrees, rotation_degrees]`.
    pub rotation_degrees: f64,
    /// Shift as a fraction of the width, drawn symmetrically.
    pub width_shift: f64,
    pub height_shift: f64,
    /// Shear angle in degrees, drawn symmetrically.
    pub shear: f64,
    /// Each axis is scaled by a factor drawn from `[1 - zoom, 1 + zoom]`.
    pub zoom: f64,
    pub horizontal_flip: bool,
    pub vertical_flip: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rotation_degrees: 25.0,
            width_shift: 0.1,
            height_shift: 0.1,
            shear: 0.2,
            zoom: 0.2,
            horizontal_flip: true,
            vertical_flip: true,
        }
    }
}

impl AugmentConfig {
    /// No geometric change at all.
    pub fn identity() -> Self {
        AugmentConfig {
            rotation_degrees: 0.0,
            width_shift: 0.0,
            height_shift: 0.0,
            shear: 0.0,
            zoom: 0.0,
            horizontal_flip: false,
            vertical_flip: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("rotation_degrees", self.rotation_degrees),
            ("width_shift", self.width_shift),
            ("height_shift", self.height_shift),
            ("shear", self.shear),
            ("zoom", self.zoom),
        ];
        for (name, v) in ranges {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("augment {name} must be >= 0, got {v}")));
            }
        }
        if self.zoom >= 1.0 {
            return Err(Error::Config(format!("augment zoom must be < 1, got {}", self.zoom)));
        }
        Ok(())
    }
}

/// Maps output pixel coordinates to source coordinates, both measured from
/// the image centre with `x` to the right and `y` down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    m: [[f64; 3]; 2],
}

impl Default for Affine {
    fn default() -> Self {
        Self::identity()
    }
}

impl Affine {
    pub fn identity() -> Self {
        Affine {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        }
    }

    pub fn rotation(degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        Affine {
            m: [[c, -s, 0.0], [s, c, 0.0]],
        }
    }

    /// Translation in pixels.
    pub fn shift(dx: f64, dy: f64) -> Self {
        Affine {
            m: [[1.0, 0.0, dx], [0.0, 1.0, dy]],
        }
    }

    pub fn shear(degrees: f64) -> Self {
        let a = degrees.to_radians();
        Affine {
            m: [[1.0, -a.sin(), 0.0], [0.0, a.cos(), 0.0]],
        }
    }

    pub fn zoom(zx: f64, zy: f64) -> Self {
        Affine {
            m: [[zx, 0.0, 0.0], [0.0, zy, 0.0]],
        }
    }

    /// `self` applied after `inner`: `(self ∘ inner)(p) = self(inner(p))`.
    pub fn compose(&self, inner: &Affine) -> Affine {
        let a = &self.m;
        let b = &inner.m;
        let mut m = [[0.0; 3]; 2];
        for (r, row) in m.iter_mut().enumerate() {
            for c in 0..3 {
                row[c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
            row[2] += a[r][2];
        }
        Affine { m }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.m;
        (
            m[0][0] * x + m[0][1] * y + m[0][2],
            m[1][0] * x + m[1][1] * y + m[1][2],
        )
    }

    /// Resamples `img`: each output pixel takes the bilinear source value at
    /// the mapped coordinate, with coordinates outside the frame clamped to
    /// the nearest edge pixel.
    pub fn warp(&self, img: &RgbImage) -> RgbImage {
        if self.is_identity() {
            return img.clone();
        }
        let (h, w) = (img.height(), img.width());
        let cy = (h as f64 - 1.0) / 2.0;
        let cx = (w as f64 - 1.0) / 2.0;
        let mut out = img.clone();
        for r in 0..h {
            for c in 0..w {
                let (sx, sy) = self.apply(c as f64 - cx, r as f64 - cy);
                let px = bilinear(img, snap(sy + cy, h), snap(sx + cx, w));
                out.set_pixel(r, c, px);
            }
        }
        out
    }
}

/// Clamps into the frame and removes floating-point dust around integer
/// positions so exact rotations land on exact pixels.
fn snap(v: f64, len: usize) -> f64 {
    let v = v.clamp(0.0, len as f64 - 1.0);
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

fn bilinear(img: &RgbImage, y: f64, x: f64) -> [f32; 3] {
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(img.height() - 1), (x0 + 1).min(img.width() - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    if fy == 0.0 && fx == 0.0 {
        return img.pixel(y0, x0);
    }
    let (p00, p01, p10, p11) = (
        img.pixel(y0, x0),
        img.pixel(y0, x1),
        img.pixel(y1, x0),
        img.pixel(y1, x1),
    );
    let mut out = [0.0f32; 3];
    for ch in 0..3 {
        let top = p00[ch] as f64 * (1.0 - fx) + p01[ch] as f64 * fx;
        let bottom = p10[ch] as f64 * (1.0 - fx) + p11[ch] as f64 * fx;
        out[ch] = ((top * (1.0 - fy) + bottom * fy) as f32).clamp(0.0, 1.0);
    }
    out
}

pub fn flip_horizontal(img: &RgbImage) -> RgbImage {
    let mut out = img.clone();
    for r in 0..img.height() {
        for c in 0..img.width() {
            out.set_pixel(r, c, img.pixel(r, img.width() - 1 - c));
        }
    }
    out
}

pub fn flip_vertical(img: &RgbImage) -> RgbImage {
    let mut out = img.clone();
    for r in 0..img.height() {
        for c in 0..img.width() {
            out.set_pixel(r, c, img.pixel(img.height() - 1 - r, c));
        }
    }
    out
}

/// Draws one random augmentation. The same number of random values is
/// consumed whatever the configuration, so the stream stays aligned when
/// ranges change.
pub fn augment<R: Rng + ?Sized>(img: &RgbImage, cfg: &AugmentConfig, rng: &mut R) -> RgbImage {
    let mut sym = |range: f64| (2.0 * rng.gen::<f64>() - 1.0) * range;
    let angle = sym(cfg.rotation_degrees);
    let dx = sym(cfg.width_shift) * img.width() as f64;
    let dy = sym(cfg.height_shift) * img.height() as f64;
    let shear = sym(cfg.shear);
    let zx = 1.0 + sym(cfg.zoom);
    let zy = 1.0 + sym(cfg.zoom);
    let flip_h = rng.gen_bool(0.5);
    let flip_v = rng.gen_bool(0.5);

    let transform = Affine::rotation(angle)
        .compose(&Affine::shift(dx, dy))
        .compose(&Affine::shear(shear))
        .compose(&Affine::zoom(zx, zy));
    let mut out = transform.warp(img);
    if cfg.horizontal_flip && flip_h {
        out = flip_horizontal(&out);
    }
    if cfg.vertical_flip && flip_v {
        out = flip_vertical(&out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pattern() -> RgbImage {
        // a b
        // c d
        RgbImage::new(
            2,
            2,
            vec![0.1, 0.0, 0.0, 0.2, 0.0, 0.0, 0.3, 0.0, 0.0, 0.4, 0.0, 0.0],
        )
        .unwrap()
    }

    fn noise(h: usize, w: usize, seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RgbImage::new(h, w, (0..h * w * 3).map(|_| rng.gen()).collect()).unwrap()
    }

    #[test]
    fn identity_config_is_bit_exact() {
        let img = noise(7, 5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            assert_eq!(augment(&img, &AugmentConfig::identity(), &mut rng), img);
        }
    }

    #[test]
    fn half_turn_permutes_a_2x2_pattern() {
        // d c
        // b a
        let got = Affine::rotation(180.0).warp(&pattern());
        let red: Vec<f32> = got.pixels().chunks(3).map(|p| p[0]).collect();
        assert_eq!(red, vec![0.4, 0.3, 0.2, 0.1]);
    }

    #[test]
    fn quarter_turn_of_a_square() {
        // Output (x, y) samples source (-y, x) relative to the centre:
        // b d / a c.
        let got = Affine::rotation(90.0).warp(&pattern());
        let red: Vec<f32> = got.pixels().chunks(3).map(|p| p[0]).collect();
        assert_eq!(red, vec![0.2, 0.4, 0.1, 0.3]);
    }

    #[test]
    fn flips() {
        let h: Vec<f32> = flip_horizontal(&pattern()).pixels().chunks(3).map(|p| p[0]).collect();
        assert_eq!(h, vec![0.2, 0.1, 0.4, 0.3]);
        let v: Vec<f32> = flip_vertical(&pattern()).pixels().chunks(3).map(|p| p[0]).collect();
        assert_eq!(v, vec![0.3, 0.4, 0.1, 0.2]);
    }

    #[test]
    fn shift_replicates_the_edge() {
        // Source x = output x + 1: everything moves one pixel left, and the
        // last column repeats the edge.
        let img = RgbImage::new(1, 3, vec![0.1, 0.0, 0.0, 0.5, 0.0, 0.0, 0.9, 0.0, 0.0]).unwrap();
        let red: Vec<f32> = Affine::shift(1.0, 0.0).warp(&img).pixels().chunks(3).map(|p| p[0]).collect();
        assert_eq!(red, vec![0.5, 0.9, 0.9]);
    }

    #[test]
    fn half_pixel_shift_interpolates() {
        let img = RgbImage::new(1, 2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let out = Affine::shift(0.5, 0.0).warp(&img);
        assert!((out.pixel(0, 0)[1] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn composition_order() {
        let r = Affine::rotation(30.0);
        let s = Affine::shift(2.0, -1.0);
        let (x, y) = r.compose(&s).apply(0.5, 0.25);
        let (ix, iy) = s.apply(0.5, 0.25);
        let (ex, ey) = r.apply(ix, iy);
        assert!((x - ex).abs() < 1e-12 && (y - ey).abs() < 1e-12);
    }

    #[test]
    fn default_augmentations_stay_in_range() {
        let img = noise(9, 9, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let out = augment(&img, &AugmentConfig::default(), &mut rng);
            assert_eq!((out.height(), out.width()), (9, 9));
            assert!(out.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn augmentation_is_seeded() {
        let img = noise(8, 8, 5);
        let a = augment(&img, &AugmentConfig::default(), &mut ChaCha8Rng::seed_from_u64(9));
        let b = augment(&img, &AugmentConfig::default(), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn negative_ranges_rejected() {
        let cfg = AugmentConfig {
            shear: -1.0,
            ..AugmentConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(AugmentConfig::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn dimensions_preserved(h in 1usize..12, w in 1usize..12, seed in any::<u64>()) {
            let img = noise(h, w, seed);
            let out = augment(&img, &AugmentConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!((out.height(), out.width(), out.pixels().len()), (h, w, h * w * 3));
        }
    }
}

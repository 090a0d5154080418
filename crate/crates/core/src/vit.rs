//! Vision Transformer feature extractor: patchify, linear patch embedding
//! with a learned class token and positional table, pre-norm encoder blocks
//! of multi-head self-attention and a GELU MLP, and class-token readout.

use rand::Rng;

use crate::backend::{Backend, Float, FloatEval, ParamKind, ParamMap, Slot};
use crate::chromatic::RgbImage;
use crate::error::{Error, Result};
use crate::params::define_params;
use crate::tensor::Tensor;

/// Standard deviation of the truncated-normal initializer.
pub const INIT_STD: f32 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct VitConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub projection_dim: usize,
    pub num_heads: usize,
    pub num_layers: usize,
    pub mlp_hidden: usize,
    pub layer_norm_eps: f32,
}

impl Default for VitConfig {
    fn default() -> Self {
        VitConfig {
            image_size: 64,
            patch_size: 4,
            projection_dim: 64,
            num_heads: 4,
            num_layers: 8,
            mlp_hidden: 128,
            layer_norm_eps: 1e-6,
        }
    }
}

impl VitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("image_size", self.image_size),
            ("patch_size", self.patch_size),
            ("projection_dim", self.projection_dim),
            ("num_heads", self.num_heads),
            ("num_layers", self.num_layers),
            ("mlp_hidden", self.mlp_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.image_size % self.patch_size != 0 {
            return Err(Error::Config(format!(
                "image_size {} is not divisible by patch_size {}",
                self.image_size, self.patch_size
            )));
        }
        if self.projection_dim % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "projection_dim {} is not divisible by num_heads {}",
                self.projection_dim, self.num_heads
            )));
        }
        if !(self.layer_norm_eps > 0.0) {
            return Err(Error::Config("layer_norm_eps must be > 0".into()));
        }
        Ok(())
    }

    pub fn num_patches(&self) -> usize {
        (self.image_size / self.patch_size).pow(2)
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * 3
    }

    /// Per-head key dimension `d_k`.
    pub fn head_dim(&self) -> usize {
        self.projection_dim / self.num_heads
    }
}

define_params! {
    /// Patch projection, class token, positional table and final norm.
    pub struct EmbeddingParams {
        patch_weight: Weight,
        patch_bias: Param,
        /// `[1 × D]`
        class_token: Param,
        /// `[(num_patches + 1) × D]`, row 0 belongs to the class token.
        pos_embedding: Embedding,
        final_gamma: Param,
        final_beta: Param,
    }
}

define_params! {
    /// One pre-norm encoder block. Weights are `[in × out]`.
    pub struct LayerParams {
        ln1_gamma: Param,
        ln1_beta: Param,
        wq: Weight,
        bq: Param,
        wk: Weight,
        bk: Param,
        wv: Weight,
        bv: Param,
        wo: Weight,
        bo: Param,
        ln2_gamma: Param,
        ln2_beta: Param,
        w1: Weight,
        b1: Param,
        w2: Weight,
        b2: Param,
    }
}

#[derive(Debug, Clone)]
pub struct VitParams<K: ParamKind = Float> {
    pub embed: EmbeddingParams<K>,
    pub layers: Vec<LayerParams<K>>,
}

impl<K: ParamKind> VitParams<K> {
    pub fn try_map<B: ParamKind, M: ParamMap<K, B>>(
        &self,
        prefix: &str,
        map: &mut M,
    ) -> Result<VitParams<B>> {
        Ok(VitParams {
            embed: self.embed.try_map(prefix, map)?,
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| l.try_map(&format!("{prefix}layers.{i}."), map))
                .collect::<Result<_>>()?,
        })
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_, K>)) {
        self.embed.visit(prefix, f);
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&format!("{prefix}layers.{i}."), f);
        }
    }
}

impl VitParams<Float> {
    /// Truncated-normal weights, tokens and positional table; zero biases;
    /// unit norm scales.
    pub fn init<R: Rng + ?Sized>(cfg: &VitConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.projection_dim;
        let w = |rows: usize, cols: usize, rng: &mut R| Tensor::trunc_normal(&[rows, cols], INIT_STD, rng);
        let embed = EmbeddingParams {
            patch_weight: w(cfg.patch_dim(), d, rng),
            patch_bias: Tensor::zeros(&[d]),
            class_token: w(1, d, rng),
            pos_embedding: w(cfg.num_patches() + 1, d, rng),
            final_gamma: Tensor::full(&[d], 1.0),
            final_beta: Tensor::zeros(&[d]),
        };
        let layers = (0..cfg.num_layers)
            .map(|_| LayerParams {
                ln1_gamma: Tensor::full(&[d], 1.0),
                ln1_beta: Tensor::zeros(&[d]),
                wq: w(d, d, rng),
                bq: Tensor::zeros(&[d]),
                wk: w(d, d, rng),
                bk: Tensor::zeros(&[d]),
                wv: w(d, d, rng),
                bv: Tensor::zeros(&[d]),
                wo: w(d, d, rng),
                bo: Tensor::zeros(&[d]),
                ln2_gamma: Tensor::full(&[d], 1.0),
                ln2_beta: Tensor::zeros(&[d]),
                w1: w(d, cfg.mlp_hidden, rng),
                b1: Tensor::zeros(&[cfg.mlp_hidden]),
                w2: w(cfg.mlp_hidden, d, rng),
                b2: Tensor::zeros(&[d]),
            })
            .collect();
        Ok(VitParams { embed, layers })
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.embed.visit_mut(prefix, f);
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_mut(&format!("{prefix}layers.{i}."), f);
        }
    }
}

/// Cuts an image into non-overlapping `patch × patch` tiles in row-major
/// tile order. Each row of the result is one tile flattened as
/// (row, column, channel).
pub fn patchify(img: &RgbImage, patch_size: usize) -> Result<Tensor> {
    let (h, w) = (img.height(), img.width());
    if patch_size == 0 || h % patch_size != 0 || w % patch_size != 0 {
        return Err(Error::Shape(format!(
            "{h}x{w} image is not divisible into {patch_size}x{patch_size} patches"
        )));
    }
    let (ph, pw) = (h / patch_size, w / patch_size);
    let patch_len = patch_size * patch_size * 3;
    let mut data = Vec::with_capacity(ph * pw * patch_len);
    let px = img.pixels();
    for py in 0..ph {
        for pxi in 0..pw {
            for r in 0..patch_size {
                let row = py * patch_size + r;
                let start = (row * w + pxi * patch_size) * 3;
                data.extend_from_slice(&px[start..start + patch_size * 3]);
            }
        }
    }
    Tensor::new(vec![ph * pw, patch_len], data)
}

/// Projects patches, prepends the class token and adds positional
/// embeddings: `[(num_patches + 1) × D]`.
pub fn embed_tokens<B: Backend>(
    b: &mut B,
    patches: &B::Node,
    p: &EmbeddingParams<B::Kind>,
) -> Result<B::Node> {
    let projected = b.linear(patches, &p.patch_weight, &p.patch_bias)?;
    let cls = b.param(&p.class_token);
    let tokens = b.concat_rows(&[cls, projected])?;
    let pos = b.embedding(&p.pos_embedding)?;
    let (t, e) = (b.value(&tokens).shape().to_vec(), b.value(&pos).shape().to_vec());
    if t != e {
        return Err(Error::dim("embed", &t, &e));
    }
    b.add(&tokens, &pos)
}

/// Scaled dot-product attention, `softmax(QKᵀ/√d_k)·V` with the softmax
/// over keys.
pub fn attention_on<B: Backend>(
    b: &mut B,
    q: &B::Node,
    k: &B::Node,
    v: &B::Node,
) -> Result<B::Node> {
    let (qs, ks, vs) = (
        b.value(q).shape().to_vec(),
        b.value(k).shape().to_vec(),
        b.value(v).shape().to_vec(),
    );
    if qs.len() != 2 || ks.len() != 2 || vs.len() != 2 || qs[1] != ks[1] {
        return Err(Error::dim("attention", &qs, &ks));
    }
    if ks[0] != vs[0] {
        return Err(Error::dim("attention", &ks, &vs));
    }
    let kt = b.transpose(k)?;
    let scores = b.matmul(q, &kt)?;
    let scores = b.scale(&scores, 1.0 / (qs[1] as f32).sqrt());
    let weights = b.softmax(&scores, 1)?;
    b.matmul(&weights, v)
}

/// Multi-head self-attention: per-head attention over column slices of the
/// Q/K/V projections, heads concatenated, then the output projection.
pub fn msa_on<B: Backend>(
    b: &mut B,
    z: &B::Node,
    layer: &LayerParams<B::Kind>,
    num_heads: usize,
) -> Result<B::Node> {
    let d = b.value(z).last_dim();
    if num_heads == 0 || d % num_heads != 0 {
        return Err(Error::Config(format!(
            "width {d} is not divisible by {num_heads} heads"
        )));
    }
    let dk = d / num_heads;
    let q = b.linear(z, &layer.wq, &layer.bq)?;
    let k = b.linear(z, &layer.wk, &layer.bk)?;
    let v = b.linear(z, &layer.wv, &layer.bv)?;
    let mut heads = Vec::with_capacity(num_heads);
    for h in 0..num_heads {
        let qh = b.slice_cols(&q, h * dk, dk)?;
        let kh = b.slice_cols(&k, h * dk, dk)?;
        let vh = b.slice_cols(&v, h * dk, dk)?;
        heads.push(attention_on(b, &qh, &kh, &vh)?);
    }
    let joined = if heads.len() == 1 {
        heads.pop().expect("one head")
    } else {
        b.concat_cols(&heads)?
    };
    b.linear(&joined, &layer.wo, &layer.bo)
}

/// `z' = z + MSA(LN(z))`, `out = z' + MLP(LN(z'))`.
pub fn encoder_block_on<B: Backend>(
    b: &mut B,
    z: &B::Node,
    layer: &LayerParams<B::Kind>,
    cfg: &VitConfig,
) -> Result<B::Node> {
    let normed = b.layer_norm(z, &layer.ln1_gamma, &layer.ln1_beta, cfg.layer_norm_eps)?;
    let attended = msa_on(b, &normed, layer, cfg.num_heads)?;
    let z1 = b.add(z, &attended)?;
    let normed = b.layer_norm(&z1, &layer.ln2_gamma, &layer.ln2_beta, cfg.layer_norm_eps)?;
    let hidden = b.linear(&normed, &layer.w1, &layer.b1)?;
    let hidden = b.gelu(&hidden);
    let out = b.linear(&hidden, &layer.w2, &layer.b2)?;
    b.add(&z1, &out)
}

/// Token matrix after all encoder blocks and the final norm.
pub fn encode_tokens_on<B: Backend>(
    b: &mut B,
    img: &RgbImage,
    p: &VitParams<B::Kind>,
    cfg: &VitConfig,
) -> Result<B::Node> {
    if img.height() != cfg.image_size || img.width() != cfg.image_size {
        return Err(Error::Shape(format!(
            "image is {}x{}, model expects {}x{}",
            img.height(),
            img.width(),
            cfg.image_size,
            cfg.image_size
        )));
    }
    let patches = patchify(img, cfg.patch_size)?;
    let patches = b.input(patches);
    let mut z = embed_tokens(b, &patches, &p.embed)?;
    for layer in &p.layers {
        z = encoder_block_on(b, &z, layer, cfg)?;
    }
    b.layer_norm(&z, &p.embed.final_gamma, &p.embed.final_beta, cfg.layer_norm_eps)
}

/// Image feature: the class-token row of the final token matrix, `[1 × D]`.
pub fn encode_on<B: Backend>(
    b: &mut B,
    img: &RgbImage,
    p: &VitParams<B::Kind>,
    cfg: &VitConfig,
) -> Result<B::Node> {
    let tokens = encode_tokens_on(b, img, p, cfg)?;
    b.slice_rows(&tokens, 0, 1)
}

/// [`attention_on`] evaluated directly on tensors.
pub fn attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor> {
    attention_on(&mut FloatEval, q, k, v)
}

pub fn msa(z: &Tensor, layer: &LayerParams, num_heads: usize) -> Result<Tensor> {
    msa_on(&mut FloatEval, z, layer, num_heads)
}

pub fn encoder_block(z: &Tensor, layer: &LayerParams, cfg: &VitConfig) -> Result<Tensor> {
    encoder_block_on(&mut FloatEval, z, layer, cfg)
}

pub fn embed(patches: &Tensor, p: &EmbeddingParams) -> Result<Tensor> {
    embed_tokens(&mut FloatEval, patches, p)
}

/// Feature vector of length `projection_dim` for one image.
pub fn encode(img: &RgbImage, p: &VitParams, cfg: &VitConfig) -> Result<Tensor> {
    let row = encode_on(&mut FloatEval, img, p, cfg)?;
    row.reshape(&[cfg.projection_dim])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BindToTape, Substitute};
    use crate::tensor::{self, grad_check_sampled, Tape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_image(size: usize, seed: u64) -> RgbImage {
        let mut r = rng(seed);
        let px = (0..size * size * 3).map(|_| r.gen::<f32>()).collect();
        RgbImage::new(size, size, px).unwrap()
    }

    fn small_cfg(image_size: usize, layers: usize) -> VitConfig {
        VitConfig {
            image_size,
            patch_size: 4,
            projection_dim: 8,
            num_heads: 2,
            num_layers: layers,
            mlp_hidden: 16,
            layer_norm_eps: 1e-6,
        }
    }

    fn random_layer(d: usize, hidden: usize, seed: u64, scale: f32) -> LayerParams {
        let mut r = rng(seed);
        let mut m = |a: usize, b: usize| Tensor::uniform(&[a, b], -scale, scale, &mut r);
        LayerParams {
            ln1_gamma: Tensor::full(&[d], 1.0),
            ln1_beta: Tensor::zeros(&[d]),
            wq: m(d, d),
            bq: Tensor::zeros(&[d]),
            wk: m(d, d),
            bk: Tensor::zeros(&[d]),
            wv: m(d, d),
            bv: Tensor::zeros(&[d]),
            wo: m(d, d),
            bo: Tensor::zeros(&[d]),
            ln2_gamma: Tensor::full(&[d], 1.0),
            ln2_beta: Tensor::zeros(&[d]),
            w1: m(d, hidden),
            b1: Tensor::zeros(&[hidden]),
            w2: m(hidden, d),
            b2: Tensor::zeros(&[d]),
        }
    }

    #[test]
    fn config_validation() {
        assert!(VitConfig::default().validate().is_ok());
        let bad = VitConfig {
            image_size: 30,
            ..VitConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = VitConfig {
            num_heads: 3,
            ..VitConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn patch_counts() {
        let p = patchify(&random_image(4, 1), 4).unwrap();
        assert_eq!(p.shape(), &[1, 48]);
        let cfg = VitConfig {
            image_size: 256,
            ..VitConfig::default()
        };
        assert_eq!(cfg.num_patches(), 4096);
        assert_eq!(cfg.patch_dim(), 48);
        assert!(patchify(&random_image(6, 1), 4).is_err());
    }

    #[test]
    fn first_patch_is_top_left_block() {
        let img = random_image(8, 2);
        let p = patchify(&img, 4).unwrap();
        assert_eq!(p.shape(), &[4, 48]);
        let mut expected = Vec::new();
        for r in 0..4 {
            for c in 0..4 {
                expected.extend_from_slice(&img.pixel(r, c));
            }
        }
        assert_eq!(&p.data()[..48], &expected[..]);
        // patch 1 is the top-right block
        assert_eq!(&p.data()[48..51], &img.pixel(0, 4));
        // patch 2 starts at row 4
        assert_eq!(&p.data()[96..99], &img.pixel(4, 0));
    }

    #[test]
    fn embed_of_zero_patches_is_token_plus_position() {
        let cfg = small_cfg(8, 1);
        let p = VitParams::init(&cfg, &mut rng(3)).unwrap();
        let zero = Tensor::zeros(&[4, 48]);
        let tokens = embed(&zero, &p.embed).unwrap();
        assert_eq!(tokens.shape(), &[5, 8]);
        let pos = &p.embed.pos_embedding;
        for j in 0..8 {
            let cls = p.embed.class_token.data()[j] + pos.at(&[0, j]);
            assert_eq!(tokens.at(&[0, j]), cls);
            for i in 1..5 {
                assert_eq!(tokens.at(&[i, j]), pos.at(&[i, j]));
            }
        }
    }

    #[test]
    fn embed_single_patch_shape_and_order_sensitivity() {
        let cfg = small_cfg(4, 1);
        let p = VitParams::init(&cfg, &mut rng(4)).unwrap();
        let t = embed(&patchify(&random_image(4, 5), 4).unwrap(), &p.embed).unwrap();
        assert_eq!(t.shape(), &[2, 8]);

        let cfg = small_cfg(8, 1);
        let p = VitParams::init(&cfg, &mut rng(6)).unwrap();
        let patches = patchify(&random_image(8, 7), 4).unwrap();
        let swapped = tensor::concat_rows(&[
            &tensor::slice_rows(&patches, 1, 1).unwrap(),
            &tensor::slice_rows(&patches, 0, 1).unwrap(),
            &tensor::slice_rows(&patches, 2, 2).unwrap(),
        ])
        .unwrap();
        let a = embed(&patches, &p.embed).unwrap();
        let b = embed(&swapped, &p.embed).unwrap();
        // Swapping patch rows is not the same as swapping token rows.
        let a_swapped = tensor::concat_rows(&[
            &tensor::slice_rows(&a, 0, 1).unwrap(),
            &tensor::slice_rows(&a, 2, 1).unwrap(),
            &tensor::slice_rows(&a, 1, 1).unwrap(),
            &tensor::slice_rows(&a, 3, 2).unwrap(),
        ])
        .unwrap();
        assert!(a_swapped.max_abs_diff(&b) > 0.0);
    }

    #[test]
    fn attention_single_token_returns_value_row() {
        let q = Tensor::from_rows(&[&[0.3, -2.0]]);
        let k = Tensor::from_rows(&[&[1.5, 0.2]]);
        let v = Tensor::from_rows(&[&[4.0, 5.0, 6.0]]);
        assert_eq!(attention(&q, &k, &v).unwrap(), v);
    }

    #[test]
    fn attention_with_zero_scores_averages_values() {
        let q = Tensor::zeros(&[3, 2]);
        let k = Tensor::uniform(&[4, 2], -1.0, 1.0, &mut rng(8));
        let v = Tensor::uniform(&[4, 3], -1.0, 1.0, &mut rng(9));
        let out = attention(&q, &k, &v).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mean: f32 = (0..4).map(|r| v.at(&[r, j])).sum::<f32>() / 4.0;
                assert!((out.at(&[i, j]) - mean).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn saturated_attention_selects_matching_value() {
        // Q = K = c·I₂ with c = 30: scores are c²/√2 on the diagonal, 0 off.
        let c = 30.0;
        let q = tensor::scale(&Tensor::eye(2), c);
        let v = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let out = attention(&q, &q, &v).unwrap();
        let off = (-(c * c) / 2f32.sqrt()).exp();
        assert!(off < 1e-30);
        assert!(out.max_abs_diff(&v) < 1e-6);
    }

    #[test]
    fn attention_shape_errors() {
        let q = Tensor::zeros(&[2, 3]);
        let k = Tensor::zeros(&[2, 4]);
        assert!(matches!(attention(&q, &k, &k), Err(Error::Dimension { .. })));
        let k = Tensor::zeros(&[2, 3]);
        let v = Tensor::zeros(&[3, 3]);
        assert!(attention(&q, &k, &v).is_err());
    }

    #[test]
    fn single_head_msa_is_attention_then_projection() {
        let layer = random_layer(4, 8, 10, 0.5);
        let z = Tensor::uniform(&[5, 4], -1.0, 1.0, &mut rng(11));
        let got = msa(&z, &layer, 1).unwrap();
        let q = tensor::linear(&z, &layer.wq, &layer.bq).unwrap();
        let k = tensor::linear(&z, &layer.wk, &layer.bk).unwrap();
        let v = tensor::linear(&z, &layer.wv, &layer.bv).unwrap();
        let a = attention(&q, &k, &v).unwrap();
        let want = tensor::linear(&a, &layer.wo, &layer.bo).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-6);
    }

    #[test]
    fn two_head_msa_matches_hand_sliced_heads() {
        let layer = random_layer(4, 8, 12, 0.5);
        let z = Tensor::uniform(&[3, 4], -1.0, 1.0, &mut rng(13));
        let got = msa(&z, &layer, 2).unwrap();

        // Oracle: explicit loops over the two d_k = 2 heads.
        let q = tensor::linear(&z, &layer.wq, &layer.bq).unwrap();
        let k = tensor::linear(&z, &layer.wk, &layer.bk).unwrap();
        let v = tensor::linear(&z, &layer.wv, &layer.bv).unwrap();
        let mut concat = vec![0.0f64; 3 * 4];
        for h in 0..2 {
            for i in 0..3 {
                let scores: Vec<f64> = (0..3)
                    .map(|j| {
                        (0..2)
                            .map(|c| q.at(&[i, h * 2 + c]) as f64 * k.at(&[j, h * 2 + c]) as f64)
                            .sum::<f64>()
                            / 2f64.sqrt()
                    })
                    .collect();
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
                let total: f64 = e.iter().sum();
                for c in 0..2 {
                    concat[i * 4 + h * 2 + c] = (0..3)
                        .map(|j| e[j] / total * v.at(&[j, h * 2 + c]) as f64)
                        .sum();
                }
            }
        }
        let concat = Tensor::new(vec![3, 4], concat.iter().map(|&x| x as f32).collect()).unwrap();
        let want = tensor::linear(&concat, &layer.wo, &layer.bo).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-5);
    }

    #[test]
    fn msa_preserves_shape_and_rejects_bad_heads() {
        let layer = random_layer(8, 8, 14, 0.3);
        let z = Tensor::uniform(&[7, 8], -1.0, 1.0, &mut rng(15));
        assert_eq!(msa(&z, &layer, 4).unwrap().shape(), &[7, 8]);
        assert!(matches!(msa(&z, &layer, 3), Err(Error::Config(_))));
    }

    #[test]
    fn zero_weight_block_is_identity() {
        let cfg = small_cfg(8, 1);
        let layer = random_layer(8, 16, 16, 0.0);
        let z = Tensor::uniform(&[5, 8], -3.0, 3.0, &mut rng(17));
        let out = encoder_block(&z, &layer, &cfg).unwrap();
        assert!(out.max_abs_diff(&z) <= 1e-6);
    }

    #[test]
    fn block_is_finite_on_large_inputs() {
        let cfg = small_cfg(8, 1);
        let layer = random_layer(8, 16, 18, 0.5);
        let z = Tensor::uniform(&[17, 8], -10.0, 10.0, &mut rng(19));
        assert!(encoder_block(&z, &layer, &cfg).unwrap().is_finite());
    }

    #[test]
    fn block_matches_step_by_step_composition() {
        let cfg = small_cfg(8, 1);
        let layer = random_layer(8, 16, 20, 0.4);
        let z = Tensor::uniform(&[5, 8], -1.0, 1.0, &mut rng(21));
        let got = encoder_block(&z, &layer, &cfg).unwrap();

        let eps = cfg.layer_norm_eps;
        let n1 = tensor::layer_norm(&z, &layer.ln1_gamma, &layer.ln1_beta, eps).unwrap();
        let z1 = tensor::add(&z, &msa(&n1, &layer, cfg.num_heads).unwrap()).unwrap();
        let n2 = tensor::layer_norm(&z1, &layer.ln2_gamma, &layer.ln2_beta, eps).unwrap();
        let h = tensor::gelu(&tensor::linear(&n2, &layer.w1, &layer.b1).unwrap());
        let want = tensor::add(&z1, &tensor::linear(&h, &layer.w2, &layer.b2).unwrap()).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn encode_is_deterministic_and_image_dependent() {
        let cfg = small_cfg(16, 2);
        let p = VitParams::init(&cfg, &mut rng(22)).unwrap();
        let a = random_image(16, 23);
        let f1 = encode(&a, &p, &cfg).unwrap();
        let f2 = encode(&a, &p, &cfg).unwrap();
        assert_eq!(f1, f2);
        assert_eq!(f1.shape(), &[8]);
        let f3 = encode(&random_image(16, 24), &p, &cfg).unwrap();
        assert!(f1.max_abs_diff(&f3) > 0.0);
        assert!(encode(&random_image(8, 1), &p, &cfg).is_err());
    }

    #[test]
    fn default_feature_length_is_projection_dim() {
        let cfg = VitConfig {
            num_layers: 1,
            ..VitConfig::default()
        };
        let p = VitParams::init(&cfg, &mut rng(25)).unwrap();
        assert_eq!(encode(&random_image(64, 26), &p, &cfg).unwrap().numel(), 64);
    }

    #[test]
    fn encode_depends_on_patch_order_through_positions() {
        let cfg = small_cfg(8, 1);
        let p = VitParams::init(&cfg, &mut rng(27)).unwrap();
        let img = random_image(8, 28);
        // Swap the top-left and top-right 4x4 quadrants.
        let mut swapped = img.clone();
        for r in 0..4 {
            for c in 0..4 {
                swapped.set_pixel(r, c, img.pixel(r, c + 4));
                swapped.set_pixel(r, c + 4, img.pixel(r, c));
            }
        }
        let a = encode(&img, &p, &cfg).unwrap();
        let b = encode(&swapped, &p, &cfg).unwrap();
        assert!(a.max_abs_diff(&b) > 1e-6);
    }

    #[test]
    fn msa_is_permutation_equivariant_without_positions() {
        let layer = random_layer(8, 8, 29, 0.5);
        let z = Tensor::uniform(&[5, 8], -1.0, 1.0, &mut rng(30));
        let perm = [3usize, 0, 4, 1, 2];
        let rows: Vec<Tensor> = perm.iter().map(|&i| tensor::slice_rows(&z, i, 1).unwrap()).collect();
        let zp = tensor::concat_rows(&rows.iter().collect::<Vec<_>>()).unwrap();
        let out = msa(&z, &layer, 2).unwrap();
        let out_p = msa(&zp, &layer, 2).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            let a = tensor::slice_rows(&out_p, new, 1).unwrap();
            let b = tensor::slice_rows(&out, old, 1).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-5);
        }
    }

    #[test]
    fn tape_and_eval_encode_agree() {
        let cfg = small_cfg(16, 2);
        let p = VitParams::init(&cfg, &mut rng(31)).unwrap();
        let img = random_image(16, 32);
        let mut tape = Tape::new();
        let bound = p.try_map("", &mut BindToTape(&mut tape)).unwrap();
        let out = encode_on(&mut tape, &img, &bound, &cfg).unwrap();
        let eval = encode(&img, &p, &cfg).unwrap();
        assert_eq!(tape.value(out).data(), eval.data());
    }

    #[test]
    fn encode_gradient_per_parameter_group() {
        let cfg = VitConfig {
            image_size: 16,
            patch_size: 4,
            projection_dim: 16,
            num_heads: 4,
            num_layers: 2,
            mlp_hidden: 32,
            layer_norm_eps: 1e-6,
        };
        let mut r = rng(33);
        let mut p = VitParams::init(&cfg, &mut r).unwrap();
        // Larger weights than init so that every path carries signal.
        p.visit_mut("", &mut |name, t| {
            if !name.contains("gamma") {
                *t = Tensor::uniform(t.shape(), -0.3, 0.3, &mut r);
            }
        });
        let img = random_image(16, 34);

        let mut names = Vec::new();
        p.visit("", &mut |name, _| names.push(name.to_string()));
        for (gi, name) in names.iter().enumerate() {
            let mut target = None;
            p.visit("", &mut |n, slot| {
                if n == name {
                    target = Some(match slot {
                        Slot::Weight(t) | Slot::Param(t) | Slot::Embedding(t) => t.clone(),
                    });
                }
            });
            let x = target.unwrap();
            let err = grad_check_sampled(
                |tape, v| {
                    let bound = p.try_map("", &mut BindToTape(tape))?;
                    let bound = bound.try_map("", &mut Substitute { name, var: v })?;
                    let feat = encode_on(tape, &img, &bound, &cfg)?;
                    Ok(tape.sum(feat))
                },
                &x,
                1e-3,
                12,
                gi as u64,
            )
            .unwrap();
            assert!(err < 1e-2, "{name}: {err}");
        }
    }
}

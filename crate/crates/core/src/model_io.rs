//! Binary model container (`GVSM`) and class-per-directory dataset loading.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "GVSM" | version u32 | header_len u64 | header | payload
//! header  = config_len u32, config (UTF-8 `key = value` lines)
//!           class_count u32, { name_len u32, name }
//!           tensor_count u32, { record }
//! record  = name_len u16, name, dtype u8 (0 f32, 1 i8), rank u8,
//!           dims u32 × rank, offset u64, byte_len u64,
//!           has_quant u8, [scale f32, zero_point i32]
//! payload = tensor bytes; offsets are relative to its start
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::{ColorType, ImageFormat, ImageReader};
use rayon::prelude::*;

use crate::backend::{Float, ParamKind, ParamMap, Slot};
use crate::chromatic::RgbImage;
use crate::config::{model_pairs, parse_pairs, set_model_key};
use crate::error::{Error, Result};
use crate::model::{FloatModel, Model, ModelConfig, ModelParams, Provenance, TrainingRecord};
use crate::quantize::{Quantized, QuantizedModel, QuantizedTensor};
use crate::tensor::Tensor;
use crate::training::{Dataset, ImageSource, Item};

pub const MAGIC: [u8; 4] = *b"GVSM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    I8,
}

impl DType {
    fn tag(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::I8 => 1,
        }
    }

    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::I8 => 1,
        }
    }
}

/// One manifest entry.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub byte_len: u64,
    /// `(scale, zero_point)` of int8 tensors.
    pub quant: Option<(f32, i32)>,
}

/// Parameter kinds that can be written to and read from a container.
pub trait Stored: ParamKind + Sized {
    fn slot_bytes(slot: Slot<'_, Self>) -> (DType, Vec<usize>, Vec<u8>, Option<(f32, i32)>);
    fn from_records(skeleton: &ModelParams<Float>, r: &mut Records<'_>) -> Result<ModelParams<Self>>;
}

fn f32_bytes(t: &Tensor) -> Vec<u8> {
    t.data().iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn float_slot(t: &Tensor) -> (DType, Vec<usize>, Vec<u8>, Option<(f32, i32)>) {
    (DType::F32, t.shape().to_vec(), f32_bytes(t), None)
}

fn int8_slot(q: &QuantizedTensor) -> (DType, Vec<usize>, Vec<u8>, Option<(f32, i32)>) {
    let bytes = q.data().iter().map(|&v| v as u8).collect();
    (DType::I8, q.shape().to_vec(), bytes, Some((q.scale(), q.zero_point())))
}

impl Stored for Float {
    fn slot_bytes(slot: Slot<'_, Float>) -> (DType, Vec<usize>, Vec<u8>, Option<(f32, i32)>) {
        match slot {
            Slot::Weight(t) | Slot::Param(t) | Slot::Embedding(t) => float_slot(t),
        }
    }

    fn from_records(skeleton: &ModelParams<Float>, r: &mut Records<'_>) -> Result<ModelParams<Float>> {
        skeleton.try_map(r)
    }
}

impl Stored for Quantized {
    fn slot_bytes(slot: Slot<'_, Quantized>) -> (DType, Vec<usize>, Vec<u8>, Option<(f32, i32)>) {
        match slot {
            Slot::Weight(q) | Slot::Embedding(q) => int8_slot(q),
            Slot::Param(t) => float_slot(t),
        }
    }

    fn from_records(
        skeleton: &ModelParams<Float>,
        r: &mut Records<'_>,
    ) -> Result<ModelParams<Quantized>> {
        skeleton.try_map(r)
    }
}

/// Validated manifest plus payload, from which typed tensors are built.
pub struct Records<'a> {
    by_name: HashMap<String, TensorRecord>,
    payload: &'a [u8],
}

impl Records<'_> {
    fn take(&mut self, name: &str, shape: &[usize], dtype: DType) -> Result<(TensorRecord, &[u8])> {
        let rec = self
            .by_name
            .remove(name)
            .ok_or_else(|| Error::CorruptContainer(format!("missing tensor `{name}`")))?;
        if rec.shape != shape {
            return Err(Error::CorruptContainer(format!(
                "tensor `{name}` has shape {:?}, config implies {shape:?}",
                rec.shape
            )));
        }
        if rec.dtype != dtype {
            return Err(Error::CorruptContainer(format!(
                "tensor `{name}` is {:?}, expected {dtype:?}",
                rec.dtype
            )));
        }
        let bytes = &self.payload[rec.offset as usize..(rec.offset + rec.byte_len) as usize];
        Ok((rec, bytes))
    }

    fn float(&mut self, name: &str, like: &Tensor) -> Result<Tensor> {
        let (_, bytes) = self.take(name, like.shape(), DType::F32)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::new(like.shape().to_vec(), data)
    }

    fn int8(&mut self, name: &str, like: &Tensor) -> Result<QuantizedTensor> {
        let (rec, bytes) = self.take(name, like.shape(), DType::I8)?;
        let (scale, zp) = rec
            .quant
            .ok_or_else(|| Error::CorruptContainer(format!("int8 tensor `{name}` has no scale")))?;
        let data = bytes.iter().map(|&b| b as i8).collect();
        QuantizedTensor::new(rec.shape, data, scale, zp)
            .map_err(|e| Error::CorruptContainer(format!("tensor `{name}`: {e}")))
    }
}

impl ParamMap<Float, Float> for Records<'_> {
    fn weight(&mut self, name: &str, w: &Tensor) -> Result<Tensor> {
        self.float(name, w)
    }
    fn param(&mut self, name: &str, p: &Tensor) -> Result<Tensor> {
        self.float(name, p)
    }
    fn embedding(&mut self, name: &str, e: &Tensor) -> Result<Tensor> {
        self.float(name, e)
    }
}

impl ParamMap<Float, Quantized> for Records<'_> {
    fn weight(&mut self, name: &str, w: &Tensor) -> Result<QuantizedTensor> {
        self.int8(name, w)
    }
    fn param(&mut self, name: &str, p: &Tensor) -> Result<Tensor> {
        self.float(name, p)
    }
    fn embedding(&mut self, name: &str, e: &Tensor) -> Result<QuantizedTensor> {
        self.int8(name, e)
    }
}

fn config_text<K: ParamKind>(m: &Model<K>) -> String {
    let mut pairs = model_pairs(&m.config);
    if let Some(t) = &m.training {
        pairs.push(("training.split_seed".into(), t.split_seed.to_string()));
        pairs.push(("training.split_ratio".into(), t.split_ratio.to_string()));
    }
    if let Some(p) = &m.provenance {
        pairs.push(("provenance.source_sha256".into(), p.source_sha256.clone()));
        pairs.push(("provenance.quantized_at".into(), p.quantized_at.to_string()));
    }
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Serializes a model to container bytes. Output depends only on the model.
pub fn encode_model<K: Stored>(m: &Model<K>) -> Result<Vec<u8>> {
    let mut records = Vec::new();
    let mut payload = Vec::new();
    m.params.visit(&mut |name, slot| {
        let (dtype, shape, bytes, quant) = K::slot_bytes(slot);
        records.push(TensorRecord {
            name: name.to_string(),
            dtype,
            shape,
            offset: payload.len() as u64,
            byte_len: bytes.len() as u64,
            quant,
        });
        payload.extend_from_slice(&bytes);
    });

    let mut header = Vec::new();
    let config = config_text(m);
    header.extend_from_slice(&(config.len() as u32).to_le_bytes());
    header.extend_from_slice(config.as_bytes());
    header.extend_from_slice(&(m.class_names.len() as u32).to_le_bytes());
    for name in &m.class_names {
        header.extend_from_slice(&(name.len() as u32).to_le_bytes());
        header.extend_from_slice(name.as_bytes());
    }
    header.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in &records {
        let name_len = u16::try_from(r.name.len())
            .map_err(|_| Error::Config(format!("tensor name `{}` too long", r.name)))?;
        header.extend_from_slice(&name_len.to_le_bytes());
        header.extend_from_slice(r.name.as_bytes());
        header.push(r.dtype.tag());
        header.push(r.shape.len() as u8);
        for &d in &r.shape {
            header.extend_from_slice(&(d as u32).to_le_bytes());
        }
        header.extend_from_slice(&r.offset.to_le_bytes());
        header.extend_from_slice(&r.byte_len.to_le_bytes());
        match r.quant {
            Some((scale, zp)) => {
                header.push(1);
                header.extend_from_slice(&scale.to_le_bytes());
                header.extend_from_slice(&zp.to_le_bytes());
            }
            None => header.push(0),
        }
    }

    let mut out = Vec::with_capacity(16 + header.len() + payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Writes the container and returns its size in bytes.
pub fn save_model<K: Stored>(m: &Model<K>, path: impl AsRef<Path>) -> Result<u64> {
    let path = path.as_ref();
    let bytes = encode_model(m)?;
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes.len() as u64)
}

#[derive(Debug, Clone)]
pub enum LoadedModel {
    Float(FloatModel),
    Quantized(QuantizedModel),
}

impl LoadedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            LoadedModel::Float(_) => "float",
            LoadedModel::Quantized(_) => "int8",
        }
    }

    pub fn into_float(self) -> Result<FloatModel> {
        match self {
            LoadedModel::Float(m) => Ok(m),
            LoadedModel::Quantized(_) => Err(Error::Config("expected a float model, got an int8 one".into())),
        }
    }

    pub fn into_quantized(self) -> Result<QuantizedModel> {
        match self {
            LoadedModel::Quantized(m) => Ok(m),
            LoadedModel::Float(_) => Err(Error::Config("expected an int8 model, got a float one".into())),
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::CorruptContainer(format!("truncated while reading {what}"))
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.bytes(N, what)?.try_into().unwrap())
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.array::<1>(what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }

    fn string(&mut self, n: usize, what: &str) -> Result<String> {
        String::from_utf8(self.bytes(n, what)?.to_vec())
            .map_err(|_| Error::CorruptContainer(format!("{what} is not UTF-8")))
    }
}

/// Parsed header: everything except tensor values.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub version: u32,
    pub config_text: String,
    pub class_names: Vec<String>,
    pub records: Vec<TensorRecord>,
    /// Absolute file offset of the payload.
    pub payload_start: usize,
}

/// Reads and checks the header: magic, version, record bounds and overlap.
pub fn read_manifest(bytes: &[u8]) -> Result<Manifest> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        let mut found = [0u8; 4];
        let n = bytes.len().min(4);
        found[..n].copy_from_slice(&bytes[..n]);
        return Err(Error::NotAContainer { found });
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: VERSION,
        });
    }
    let header_len = r.u64("header length")?;
    let payload_start = usize::try_from(header_len)
        .ok()
        .and_then(|h| h.checked_add(16))
        .filter(|&p| p <= bytes.len())
        .ok_or_else(|| Error::CorruptContainer("header runs past end of file".into()))?;
    let mut r = Reader {
        buf: &bytes[..payload_start],
        pos: 16,
    };
    let config_len = r.u32("config length")? as usize;
    let config_text = r.string(config_len, "config block")?;
    let class_count = r.u32("class count")? as usize;
    let mut class_names = Vec::new();
    for _ in 0..class_count {
        let n = r.u32("class name length")? as usize;
        class_names.push(r.string(n, "class name")?);
    }
    let tensor_count = r.u32("tensor count")? as usize;
    let mut records = Vec::new();
    for _ in 0..tensor_count {
        let n = r.u16("tensor name length")? as usize;
        let name = r.string(n, "tensor name")?;
        let dtype = match r.u8("dtype")? {
            0 => DType::F32,
            1 => DType::I8,
            t => return Err(Error::CorruptContainer(format!("tensor `{name}` has unknown dtype {t}"))),
        };
        let rank = r.u8("rank")? as usize;
        let shape = (0..rank)
            .map(|_| r.u32("dimension").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let offset = r.u64("offset")?;
        let byte_len = r.u64("byte length")?;
        let quant = match r.u8("quant flag")? {
            0 => None,
            1 => {
                let scale = f32::from_le_bytes(r.array("scale")?);
                let zp = i32::from_le_bytes(r.array("zero point")?);
                Some((scale, zp))
            }
            f => return Err(Error::CorruptContainer(format!("bad quant flag {f} on `{name}`"))),
        };
        records.push(TensorRecord {
            name,
            dtype,
            shape,
            offset,
            byte_len,
            quant,
        });
    }
    if r.pos != payload_start {
        return Err(Error::CorruptContainer(format!(
            "header length {header_len} disagrees with its contents"
        )));
    }

    let payload_len = (bytes.len() - payload_start) as u64;
    for rec in &records {
        let numel = rec.shape.iter().try_fold(1u64, |a, &d| a.checked_mul(d as u64));
        if numel.and_then(|n| n.checked_mul(rec.dtype.width() as u64)) != Some(rec.byte_len) {
            return Err(Error::CorruptContainer(format!(
                "tensor `{}` of shape {:?} cannot occupy {} bytes",
                rec.name, rec.shape, rec.byte_len
            )));
        }
        if rec.offset.checked_add(rec.byte_len).map_or(true, |end| end > payload_len) {
            return Err(Error::CorruptContainer(format!(
                "tensor `{}` extends past the end of the payload",
                rec.name
            )));
        }
    }
    let mut by_offset: Vec<&TensorRecord> = records.iter().filter(|r| r.byte_len > 0).collect();
    by_offset.sort_by_key(|r| r.offset);
    for pair in by_offset.windows(2) {
        if pair[0].offset + pair[0].byte_len > pair[1].offset {
            return Err(Error::OverlappingTensors {
                first: pair[0].name.clone(),
                second: pair[1].name.clone(),
            });
        }
    }
    Ok(Manifest {
        version,
        config_text,
        class_names,
        records,
        payload_start,
    })
}

fn parse_header(m: &Manifest) -> Result<(ModelConfig, Option<TrainingRecord>, Option<Provenance>)> {
    let corrupt = |e: Error| Error::CorruptContainer(format!("config block: {e}"));
    let mut cfg = ModelConfig::default();
    let (mut seed, mut ratio, mut sha, mut at) = (None, None, None, None);
    for (key, value) in parse_pairs(&m.config_text).map_err(corrupt)? {
        let num = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| Error::CorruptContainer(format!("`{key}` = `{v}` is not an integer")))
        };
        match key.as_str() {
            "training.split_seed" => seed = Some(num(&value)?),
            "training.split_ratio" => {
                ratio = Some(value.parse::<f64>().map_err(|_| {
                    Error::CorruptContainer(format!("`{key}` = `{value}` is not a number"))
                })?)
            }
            "provenance.source_sha256" => sha = Some(value),
            "provenance.quantized_at" => at = Some(num(&value)?),
            _ => {
                if !set_model_key(&mut cfg, &key, &value).map_err(corrupt)? {
                    return Err(Error::CorruptContainer(format!("unknown config key `{key}`")));
                }
            }
        }
    }
    cfg.validate().map_err(corrupt)?;
    if cfg.head.num_classes != m.class_names.len() {
        return Err(Error::CorruptContainer(format!(
            "{} class names for a {}-class head",
            m.class_names.len(),
            cfg.head.num_classes
        )));
    }
    let training = match (seed, ratio) {
        (Some(split_seed), Some(split_ratio)) => Some(TrainingRecord {
            split_seed,
            split_ratio,
        }),
        (None, None) => None,
        _ => return Err(Error::CorruptContainer("incomplete training record".into())),
    };
    let provenance = match (sha, at) {
        (Some(source_sha256), Some(quantized_at)) => Some(Provenance {
            source_sha256,
            quantized_at,
        }),
        (None, None) => None,
        _ => return Err(Error::CorruptContainer("incomplete provenance record".into())),
    };
    Ok((cfg, training, provenance))
}

/// Parses container bytes. Float or int8 is decided by the dtype tags.
pub fn decode_model(bytes: &[u8]) -> Result<LoadedModel> {
    let manifest = read_manifest(bytes)?;
    let (config, training, provenance) = parse_header(&manifest)?;
    let skeleton = ModelParams::zeros(&config)?;
    let expected = skeleton.names();
    if manifest.records.len() != expected.len() {
        return Err(Error::CorruptContainer(format!(
            "{} tensors, config implies {}",
            manifest.records.len(),
            expected.len()
        )));
    }
    let quantized = manifest.records.iter().any(|r| r.dtype == DType::I8);
    let mut records = Records {
        by_name: manifest
            .records
            .iter()
            .map(|r| (r.name.clone(), r.clone()))
            .collect(),
        payload: &bytes[manifest.payload_start..],
    };
    if records.by_name.len() != manifest.records.len() {
        return Err(Error::CorruptContainer("duplicate tensor names".into()));
    }
    let class_names = manifest.class_names;
    Ok(if quantized {
        LoadedModel::Quantized(Model {
            params: Quantized::from_records(&skeleton, &mut records)?,
            config,
            class_names,
            training,
            provenance,
        })
    } else {
        LoadedModel::Float(Model {
            params: Float::from_records(&skeleton, &mut records)?,
            config,
            class_names,
            training,
            provenance,
        })
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

fn image_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Opens an image whose content is PNG or JPEG. `Ok(None)` for anything
/// else.
fn open_raster(path: &Path) -> Result<Option<image::DynamicImage>> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Jpeg) => {}
        _ => return Ok(None),
    }
    reader.decode().map(Some).map_err(|e| image_error(path, e))
}

/// Decodes an image file at its own size, grayscale replicated to RGB and
/// samples scaled by 1/255.
pub fn decode_image_native(path: &Path) -> Result<RgbImage> {
    let img = open_raster(path)?
        .ok_or_else(|| image_error(path, "not a PNG or JPEG image"))?
        .to_rgb8();
    RgbImage::from_u8(img.height() as usize, img.width() as usize, img.as_raw())
}

/// Decodes and bilinearly resizes to `size × size`.
pub fn decode_image(path: &Path, size: usize) -> Result<RgbImage> {
    let img = open_raster(path)?
        .ok_or_else(|| image_error(path, "not a PNG or JPEG image"))?
        .to_rgb8();
    let img = if img.width() as usize == size && img.height() as usize == size {
        img
    } else {
        imageops::resize(&img, size as u32, size as u32, FilterType::Triangle)
    };
    RgbImage::from_u8(size, size, img.as_raw())
}

/// Bilinear resize of an in-memory image to `size × size`.
pub fn resize(img: &RgbImage, size: usize) -> Result<RgbImage> {
    let buf: image::Rgb32FImage =
        image::ImageBuffer::from_raw(img.width() as u32, img.height() as u32, img.pixels().to_vec())
            .expect("buffer length matches dimensions");
    let out = imageops::resize(&buf, size as u32, size as u32, FilterType::Triangle);
    RgbImage::new(
        size,
        size,
        out.into_raw().into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    )
}

/// Files skipped or adjusted while loading a dataset directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    /// Files whose content is not PNG or JPEG.
    pub non_image: Vec<PathBuf>,
    /// PNG or JPEG files that failed to decode.
    pub corrupt: Vec<PathBuf>,
    /// Single-channel images, used with the channel replicated.
    pub grayscale: Vec<PathBuf>,
}

impl IngestReport {
    pub fn is_clean(&self) -> bool {
        self.non_image.is_empty() && self.corrupt.is_empty() && self.grayscale.is_empty()
    }
}

enum Probe {
    Rgb,
    Gray,
    NonImage,
    Corrupt,
}

fn probe(path: &Path) -> Probe {
    match open_raster(path) {
        Ok(None) => Probe::NonImage,
        Err(_) => Probe::Corrupt,
        Ok(Some(img)) => match img.color() {
            ColorType::L8 | ColorType::La8 | ColorType::L16 | ColorType::La16 => Probe::Gray,
            _ => Probe::Rgb,
        },
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Loads `root/<class>/<image>`. Classes are the subdirectories in
/// lexicographic order. Every file is test-decoded once (in parallel) so
/// that unreadable files are skipped here rather than failing mid-training;
/// pixels are decoded again on demand.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<(Dataset, IngestReport)> {
    let root = root.as_ref();
    let mut class_names = Vec::new();
    let mut files = Vec::new();
    let mut report = IngestReport::default();
    for entry in sorted_entries(root)? {
        if entry.is_dir() {
            let label = class_names.len();
            class_names.push(entry.file_name().unwrap().to_string_lossy().into_owned());
            for file in sorted_entries(&entry)? {
                if file.is_file() {
                    files.push((file, label));
                }
            }
        } else {
            report.non_image.push(entry);
        }
    }
    if class_names.is_empty() {
        return Err(Error::Dataset(format!(
            "{} has no class subdirectories",
            root.display()
        )));
    }
    let probes: Vec<Probe> = files.par_iter().map(|(p, _)| probe(p)).collect();
    let mut items = Vec::new();
    for ((path, label), probe) in files.into_iter().zip(probes) {
        match probe {
            Probe::NonImage => report.non_image.push(path),
            Probe::Corrupt => report.corrupt.push(path),
            Probe::Gray | Probe::Rgb => {
                if matches!(probe, Probe::Gray) {
                    report.grayscale.push(path.clone());
                }
                items.push(Item {
                    source: ImageSource::Path(path),
                    label,
                });
            }
        }
    }
    let dataset = Dataset::new(items, class_names)
        .map_err(|e| Error::Dataset(format!("{}: {e}", root.display())))?;
    Ok((dataset, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::HeadConfig;
    use crate::quantize::quantize_model;
    use crate::vit::VitConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> FloatModel {
        let cfg = ModelConfig {
            vit: VitConfig {
                image_size: 8,
                patch_size: 4,
                projection_dim: 8,
                num_heads: 2,
                num_layers: 2,
                mlp_hidden: 16,
                layer_norm_eps: 1e-6,
            },
            head: HeadConfig {
                hidden: 6,
                num_classes: 2,
                ..HeadConfig::default()
            },
        };
        let mut m = Model::init(cfg, vec!["healthy".into(), "rust, late".into()], &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        m.training = Some(TrainingRecord {
            split_seed: 42,
            split_ratio: 0.8,
        });
        m
    }

    fn prov() -> Provenance {
        Provenance {
            source_sha256: "ab".repeat(32),
            quantized_at: 1_700_000_000,
        }
    }

    fn same_params(a: &FloatModel, b: &FloatModel) {
        a.params.visit(&mut |name, slot| {
            let (Slot::Weight(x) | Slot::Param(x) | Slot::Embedding(x)) = slot;
            let y = b.params.get(name).unwrap();
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(x), bits(&y), "{name}");
        });
    }

    #[test]
    fn float_round_trip_is_bit_exact() {
        let m = small();
        let bytes = encode_model(&m).unwrap();
        let back = decode_model(&bytes).unwrap().into_float().unwrap();
        assert_eq!(back.config, m.config);
        assert_eq!(back.class_names, m.class_names);
        assert_eq!(back.training, m.training);
        assert_eq!(back.provenance, None);
        same_params(&m, &back);
        assert_eq!(encode_model(&back).unwrap(), bytes);
    }

    #[test]
    fn quantized_round_trip_keeps_scales() {
        let qm = quantize_model(&small(), prov()).unwrap();
        let bytes = encode_model(&qm).unwrap();
        let back = decode_model(&bytes).unwrap().into_quantized().unwrap();
        assert_eq!(back.provenance, Some(prov()));
        let (a, b) = (&qm.params.vit.layers[1].wq, &back.params.vit.layers[1].wq);
        assert_eq!(a, b);
        assert_eq!(encode_model(&back).unwrap(), bytes);
        let mut float_names = Vec::new();
        qm.params.visit(&mut |n, slot| {
            if matches!(slot, Slot::Param(_)) {
                float_names.push(n.to_string());
            }
        });
        assert!(float_names.contains(&"vit.layers.0.bq".to_string()));
        let manifest = read_manifest(&bytes).unwrap();
        for r in &manifest.records {
            assert_eq!(r.dtype == DType::I8, !float_names.contains(&r.name), "{}", r.name);
            assert_eq!(r.quant.is_some(), r.dtype == DType::I8);
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        assert_eq!(encode_model(&small()).unwrap(), encode_model(&small()).unwrap());
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_model(&small()).unwrap();
        bytes[1] = b'X';
        assert!(matches!(decode_model(&bytes), Err(Error::NotAContainer { found }) if &found == b"GXSM"));
        assert!(matches!(decode_model(b"GV"), Err(Error::NotAContainer { .. })));
        let mut bytes = encode_model(&small()).unwrap();
        bytes[4] = 9;
        assert!(matches!(
            decode_model(&bytes),
            Err(Error::UnsupportedVersion { found: 9, supported: 1 })
        ));
    }

    #[test]
    fn every_truncation_is_a_clean_error() {
        let bytes = encode_model(&small()).unwrap();
        for len in 0..bytes.len() {
            match decode_model(&bytes[..len]) {
                Err(Error::CorruptContainer(_) | Error::NotAContainer { .. }) => {}
                other => panic!("length {len}: {other:?}"),
            }
        }
    }

    /// Byte position of the first tensor record's offset field.
    fn first_offset_pos(bytes: &[u8]) -> usize {
        let m = read_manifest(bytes).unwrap();
        let mut pos = 16 + 4 + m.config_text.len() + 4;
        for c in &m.class_names {
            pos += 4 + c.len();
        }
        let r = &m.records[0];
        pos + 4 + 2 + r.name.len() + 2 + 4 * r.shape.len()
    }

    #[test]
    fn overlapping_offsets_are_rejected() {
        let mut bytes = encode_model(&small()).unwrap();
        let pos = first_offset_pos(&bytes);
        // Point the first tensor into the middle of the second.
        let second = read_manifest(&bytes).unwrap().records[1].offset + 4;
        bytes[pos..pos + 8].copy_from_slice(&second.to_le_bytes());
        assert!(matches!(decode_model(&bytes), Err(Error::OverlappingTensors { .. })));
    }

    #[test]
    fn out_of_range_offset_is_corrupt() {
        let mut bytes = encode_model(&small()).unwrap();
        let pos = first_offset_pos(&bytes);
        bytes[pos..pos + 8].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode_model(&bytes), Err(Error::CorruptContainer(_))));
    }

    #[test]
    fn save_reports_written_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gvsm");
        let n = save_model(&small(), &path).unwrap();
        assert_eq!(n, fs::metadata(&path).unwrap().len());
        assert!(load_model(&path).unwrap().into_float().is_ok());
        assert!(matches!(load_model(dir.path().join("missing")), Err(Error::Io { .. })));
    }

    fn write_png(path: &Path, rgb: [u8; 3]) {
        image::RgbImage::from_pixel(6, 4, image::Rgb(rgb)).save(path).unwrap();
    }

    #[test]
    fn dataset_directory_loading() {
        let dir = tempfile::tempdir().unwrap();
        for class in ["b_rust", "a_healthy"] {
            fs::create_dir(dir.path().join(class)).unwrap();
            for i in 0..3 {
                write_png(&dir.path().join(class).join(format!("{i}.png")), [10, 200, 30]);
            }
        }
        fs::write(dir.path().join("a_healthy/notes.txt"), "hello").unwrap();
        fs::write(dir.path().join("b_rust/broken.png"), b"\x89PNG\r\n\x1a\nnope").unwrap();
        image::GrayImage::from_pixel(4, 4, image::Luma([128]))
            .save(dir.path().join("b_rust/gray.png"))
            .unwrap();

        let (ds, report) = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.class_names(), &["a_healthy".to_string(), "b_rust".to_string()]);
        assert_eq!(ds.len(), 7);
        assert_eq!(ds.class_counts(), vec![3, 4]);
        assert_eq!(report.non_image.len(), 1);
        assert_eq!(report.corrupt.len(), 1);
        assert_eq!(report.grayscale.len(), 1);

        let first = ds.image(0, 8).unwrap();
        assert_eq!((first.height(), first.width()), (8, 8));
        assert!((first.pixel(3, 3)[1] - 200.0 / 255.0).abs() < 1e-6);
        let gray_index = ds.items().iter().position(|i| matches!(&i.source, ImageSource::Path(p) if p.ends_with("gray.png"))).unwrap();
        let g = ds.image(gray_index, 4).unwrap();
        assert_eq!(g.pixel(0, 0), [128.0 / 255.0; 3]);

        let (again, _) = load_dataset(dir.path()).unwrap();
        assert_eq!(again.labels(), ds.labels());
    }

    #[test]
    fn empty_inputs_are_dataset_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Dataset(_))));
        fs::create_dir(dir.path().join("lonely")).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("lonely"), "{err}");
        assert!(matches!(load_dataset(dir.path().join("nope")), Err(Error::Io { .. })));
    }
}

//! Grayscale rasters, square resizing, normalization and the rotation/flip
//! augmentation set.
//!
//! Rotations are counter-clockwise. A horizontal flip mirrors columns
//! (left-right), a vertical flip mirrors rows (top-bottom).

use std::collections::BTreeSet;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default square side fed to the classifiers.
pub const DEFAULT_SIDE: usize = 224;

/// Row-major grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl RasterImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyImage);
        }
        if height.checked_mul(width) != Some(pixels.len()) {
            return Err(Error::DimensionMismatch {
                expected: height.saturating_mul(width),
                got: pixels.len(),
            });
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Validation(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self { height, width, pixels }
    }
}

fn truncated(what: &str) -> Error {
    Error::io("<image data>", io::Error::new(io::ErrorKind::UnexpectedEof, what.to_string()))
}

/// Decode binary PGM (P5, maxval ≤ 255).
pub fn decode_pgm(bytes: &[u8]) -> Result<RasterImage> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::UnsupportedFormat("not a binary PGM".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments before each header token
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(truncated("PGM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::UnsupportedFormat("malformed PGM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::UnsupportedFormat("PGM header value out of range".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!("PGM maxval {maxval} (8-bit only)")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        Some(_) => return Err(Error::UnsupportedFormat("malformed PGM header".into())),
        None => return Err(truncated("PGM header")),
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::UnsupportedFormat("PGM dimensions overflow".into()))?;
    if n == 0 {
        return Err(Error::EmptyImage);
    }
    let data = &bytes[pos..];
    if data.len() < n {
        return Err(truncated("PGM pixel data"));
    }
    let scale = maxval as f64;
    let pixels = data[..n].iter().map(|&b| (b as f64 / scale).min(1.0)).collect();
    RasterImage::new(height, width, pixels)
}

/// Encode as binary PGM with maxval 255.
pub fn encode_pgm(img: &RasterImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.pixels.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

/// Decoder allocation cap, enough for 4096x4096 RGBA.
const MAX_PNG_BYTES: u64 = 64 << 20;

fn decode_png(bytes: &[u8]) -> Result<RasterImage> {
    use image::{DynamicImage, ImageError};

    let mut reader = image::ImageReader::with_format(io::Cursor::new(bytes), image::ImageFormat::Png);
    let mut limits = image::Limits::default();
    limits.max_alloc = Some(MAX_PNG_BYTES);
    reader.limits(limits);
    let decoded = reader.decode().map_err(|e| match e {
        ImageError::IoError(io) => Error::io("<image data>", io),
        ImageError::Unsupported(u) => Error::UnsupportedFormat(u.to_string()),
        ImageError::Limits(l) => Error::UnsupportedFormat(format!("PNG too large: {l}")),
        other => Error::io("<image data>", io::Error::new(io::ErrorKind::InvalidData, other.to_string())),
    })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let pixels: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| channel_mean(&p.0)).collect(),
        DynamicImage::ImageRgba8(buf) => buf.pixels().map(|p| channel_mean(&p.0[..3])).collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG color type {:?} (8-bit gray or RGB only)",
                other.color()
            )))
        }
    };
    RasterImage::new(height, width, pixels)
}

// RGB collapses to the unweighted mean of the three channels.
fn channel_mean(rgb: &[u8]) -> f64 {
    rgb.iter().map(|&c| c as f64).sum::<f64>() / (3.0 * 255.0)
}

/// Decode PNG or binary PGM, chosen by magic bytes.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes)
    } else if PNG_MAGIC.starts_with(bytes) || bytes == b"P" {
        Err(truncated("image signature"))
    } else {
        Err(Error::UnsupportedFormat("expected PNG or binary PGM".into()))
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizeMode {
    /// Scale to fit, keep the aspect ratio, center, fill the margins.
    Pad,
    /// Scale each axis independently.
    Stretch,
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn bilinear_resize(img: &RasterImage, height: usize, width: usize) -> RasterImage {
    assert!(height > 0 && width > 0);
    if height == img.height && width == img.width {
        return img.clone();
    }
    let axis = |out: usize, len_in: usize, len_out: usize| {
        let s = ((out as f64 + 0.5) * len_in as f64 / len_out as f64 - 0.5).clamp(0.0, (len_in - 1) as f64);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(len_in - 1);
        (lo, hi, s - lo as f64)
    };
    let rows: Vec<_> = (0..height).map(|r| axis(r, img.height, height)).collect();
    let cols: Vec<_> = (0..width).map(|c| axis(c, img.width, width)).collect();
    RasterImage::from_fn(height, width, |r, c| {
        let (y0, y1, fy) = rows[r];
        let (x0, x1, fx) = cols[c];
        let top = img.get(y0, x0) * (1.0 - fx) + img.get(y0, x1) * fx;
        let bottom = img.get(y1, x0) * (1.0 - fx) + img.get(y1, x1) * fx;
        (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0)
    })
}

pub fn resize_square(img: &RasterImage, side: usize, mode: ResizeMode, fill: f64) -> Result<RasterImage> {
    if side == 0 {
        return Err(Error::EmptyImage);
    }
    if !(0.0..=1.0).contains(&fill) {
        return Err(Error::Validation(format!("fill {fill} outside [0, 1]")));
    }
    match mode {
        ResizeMode::Stretch => Ok(bilinear_resize(img, side, side)),
        ResizeMode::Pad => {
            let (h, w) = (img.height, img.width);
            let (new_h, new_w) = if h >= w {
                (side, ((w * side) as f64 / h as f64).round().max(1.0) as usize)
            } else {
                (((h * side) as f64 / w as f64).round().max(1.0) as usize, side)
            };
            let scaled = bilinear_resize(img, new_h, new_w);
            let (top, left) = ((side - new_h) / 2, (side - new_w) / 2);
            Ok(RasterImage::from_fn(side, side, |r, c| {
                if (top..top + new_h).contains(&r) && (left..left + new_w).contains(&c) {
                    scaled.get(r - top, c - left)
                } else {
                    fill
                }
            }))
        }
    }
}

/// Rotate counter-clockwise by `k` quarter turns. Negative `k` turns clockwise.
pub fn rotate90(img: &RasterImage, k: i32) -> RasterImage {
    let (h, w) = (img.height, img.width);
    match k.rem_euclid(4) {
        0 => img.clone(),
        1 => RasterImage::from_fn(w, h, |r, c| img.get(c, w - 1 - r)),
        2 => RasterImage::from_fn(h, w, |r, c| img.get(h - 1 - r, w - 1 - c)),
        _ => RasterImage::from_fn(w, h, |r, c| img.get(h - 1 - c, r)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipAxis {
    Horizontal,
    Vertical,
}

pub fn flip(img: &RasterImage, axis: FlipAxis) -> RasterImage {
    let (h, w) = (img.height, img.width);
    match axis {
        FlipAxis::Horizontal => RasterImage::from_fn(h, w, |r, c| img.get(r, w - 1 - c)),
        FlipAxis::Vertical => RasterImage::from_fn(h, w, |r, c| img.get(h - 1 - r, c)),
    }
}

/// Rescale to span [0, 1]. A constant image maps to all zeros.
pub fn min_max_normalize(img: &RasterImage) -> RasterImage {
    let (lo, hi) = img
        .pixels
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let pixels = if range > 0.0 {
        img.pixels.iter().map(|&v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; img.pixels.len()]
    };
    RasterImage {
        height: img.height,
        width: img.width,
        pixels,
    }
}

/// Which rotations and flips to generate for each training image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentPlan {
    /// Counter-clockwise quarter turns, always containing 0.
    rotations: BTreeSet<u8>,
    flips: BTreeSet<FlipAxis>,
    pub seed: u64,
}

impl AugmentPlan {
    pub fn new(rotations: impl IntoIterator<Item = u8>, flips: impl IntoIterator<Item = FlipAxis>, seed: u64) -> Result<Self> {
        let mut set: BTreeSet<u8> = BTreeSet::from([0]);
        for k in rotations {
            if k > 3 {
                return Err(Error::Validation(format!("rotation of {k} quarter turns (expected 0..=3)")));
            }
            set.insert(k);
        }
        Ok(Self {
            rotations: set,
            flips: flips.into_iter().collect(),
            seed,
        })
    }

    /// Identity only.
    pub fn none() -> Self {
        Self::new([], [], 0).expect("static plan")
    }

    /// All four quarter turns, each also mirrored horizontally.
    pub fn full() -> Self {
        Self::new([0, 1, 2, 3], [FlipAxis::Horizontal], 0).expect("static plan")
    }

    pub fn rotations(&self) -> impl Iterator<Item = u8> + '_ {
        self.rotations.iter().copied()
    }

    pub fn flips(&self) -> impl Iterator<Item = FlipAxis> + '_ {
        self.flips.iter().copied()
    }

    pub fn is_identity(&self) -> bool {
        self.rotations.len() == 1 && self.flips.is_empty()
    }

    /// Number of images `augment` yields per input.
    pub fn multiplicity(&self) -> usize {
        self.rotations.len() * (1 + self.flips.len())
    }
}

/// An augmented copy and the sample-id suffix that names it.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    /// Empty for the identity copy, else `#rot90x<k>` plus `#fliph`/`#flipv`.
    pub suffix: String,
    pub image: RasterImage,
}

fn flip_tag(axis: FlipAxis) -> &'static str {
    match axis {
        FlipAxis::Horizontal => "#fliph",
        FlipAxis::Vertical => "#flipv",
    }
}

/// Every variant in the plan: for each rotation (ascending), the rotated
/// image and then each of its flips. The identity copy comes first.
pub fn augment_variants(img: &RasterImage, plan: &AugmentPlan) -> Vec<Variant> {
    let mut out = Vec::with_capacity(plan.multiplicity());
    for k in plan.rotations() {
        let rotated = rotate90(img, k as i32);
        let tag = format!("#rot90x{k}");
        let flipped: Vec<Variant> = plan
            .flips()
            .map(|axis| Variant {
                suffix: format!("{tag}{}", flip_tag(axis)),
                image: flip(&rotated, axis),
            })
            .collect();
        out.push(Variant {
            suffix: if k == 0 { String::new() } else { tag },
            image: rotated,
        });
        out.extend(flipped);
    }
    out
}

pub fn augment(img: &RasterImage, plan: &AugmentPlan) -> Vec<RasterImage> {
    augment_variants(img, plan).into_iter().map(|v| v.image).collect()
}

/// One randomly chosen variant: a rotation drawn uniformly from the plan and
/// each flip applied with probability 1/2. Seeded by the plan seed and
/// `stream`, so distinct samples can draw independently.
pub fn random_variant(img: &RasterImage, plan: &AugmentPlan, stream: u64) -> Variant {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(stream);
    let rotations: Vec<u8> = plan.rotations().collect();
    let k = rotations[rng.gen_range(0..rotations.len())];
    let mut image = rotate90(img, k as i32);
    let mut suffix = if k == 0 { String::new() } else { format!("#rot90x{k}") };
    for axis in plan.flips() {
        if rng.gen_bool(0.5) {
            if suffix.is_empty() {
                suffix.push_str("#rot90x0");
            }
            image = flip(&image, axis);
            suffix.push_str(flip_tag(axis));
        }
    }
    Variant { suffix, image }
}

/// Whether a sample belongs to the training or the held-out partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Test,
}

/// Steps applied to every image, plus the augmentation applied to training
/// images only.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub side: usize,
    pub mode: ResizeMode,
    pub fill: f64,
    pub normalize: bool,
    pub plan: AugmentPlan,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self {
            side: DEFAULT_SIDE,
            mode: ResizeMode::Pad,
            fill: 0.0,
            normalize: true,
            plan: AugmentPlan::none(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineInput {
    pub sample_id: String,
    pub label: usize,
    pub partition: Partition,
    pub image: RasterImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub sample_id: String,
    /// Id of the manifest entry this sample was derived from.
    pub source_id: String,
    pub label: usize,
    pub partition: Partition,
    pub image: RasterImage,
}

impl Pipeline {
    fn prepare(&self, img: &RasterImage) -> Result<RasterImage> {
        let resized = resize_square(img, self.side, self.mode, self.fill)?;
        Ok(if self.normalize { min_max_normalize(&resized) } else { resized })
    }

    /// Process a batch. Output order follows input order; training inputs
    /// expand into their augmented variants, test inputs pass through as a
    /// single image under their original id.
    pub fn run(&self, inputs: &[PipelineInput]) -> Result<Vec<PreparedSample>> {
        let per_input: Vec<Vec<PreparedSample>> = inputs
            .par_iter()
            .map(|input| {
                let base = self.prepare(&input.image)?;
                let variants = match input.partition {
                    Partition::Train => augment_variants(&base, &self.plan),
                    Partition::Test => vec![Variant {
                        suffix: String::new(),
                        image: base,
                    }],
                };
                Ok(variants
                    .into_iter()
                    .map(|v| PreparedSample {
                        sample_id: format!("{}{}", input.sample_id, v.suffix),
                        source_id: input.sample_id.clone(),
                        label: input.label,
                        partition: input.partition,
                        image: v.image,
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(per_input.into_iter().flatten().collect())
    }
}

//! Image ingestion, model-space preprocessing, masking and blur primitives,
//! and heatmap overlays.

mod blur;
mod colormap;
pub mod export;
pub mod synthetic;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{resize_plane, Grid};

pub use blur::{gaussian_blur, gaussian_kernel, DEFAULT_BLUR_SIGMA};
pub use colormap::{colormap, COLORMAP_STOPS};

pub const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// An RGB image with every sample in `[0, 1]`, stored row-major as `H × W × 3`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::arg(format!("image dims must be positive, got {height}x{width}")));
        }
        if pixels.len() != height * width * 3 {
            return Err(Error::arg(format!(
                "{height}x{width} RGB image needs {} samples, got {}",
                height * width * 3,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::arg(format!("image sample {bad} outside [0, 1]")));
        }
        Ok(ImageTensor { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::from_fn(height, width, |_, _| rgb)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width * 3);
        for r in 0..height {
            for c in 0..width {
                pixels.extend_from_slice(&f(r, c));
            }
        }
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [f64; 3]) {
        let i = (row * self.width + col) * 3;
        for (dst, v) in self.pixels[i..i + 3].iter_mut().zip(rgb) {
            *dst = v.clamp(0.0, 1.0);
        }
    }

    /// One channel as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.pixels.iter().skip(c).step_by(3).copied().collect()
    }

    pub(crate) fn from_planes(height: usize, width: usize, planes: [Vec<f64>; 3]) -> Self {
        let mut pixels = Vec::with_capacity(height * width * 3);
        for i in 0..height * width {
            for plane in &planes {
                pixels.push(plane[i].clamp(0.0, 1.0));
            }
        }
        ImageTensor { height, width, pixels }
    }

    /// Bilinear resize (half-pixel centres, no antialiasing).
    pub fn resize(&self, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::arg(format!("target size must be positive, got {height}x{width}")));
        }
        if (height, width) == self.dims() {
            return Ok(self.clone());
        }
        let planes = [0, 1, 2].map(|c| resize_plane(&self.channel(c), self.height, self.width, height, width));
        Ok(Self::from_planes(height, width, planes))
    }

    /// Pointwise product with a single-channel map, broadcast over RGB.
    pub fn multiply(&self, map: &Grid) -> Result<Self> {
        check_dims(self.dims(), map.dims())?;
        let mut pixels = self.pixels.clone();
        for (px, &m) in pixels.chunks_exact_mut(3).zip(map.values()) {
            for v in px {
                *v = (*v * m).clamp(0.0, 1.0);
            }
        }
        Ok(ImageTensor { height: self.height, width: self.width, pixels })
    }

    /// Takes pixels from `other` wherever `mask` is set.
    pub fn splice(&self, other: &ImageTensor, mask: &BinaryMask) -> Result<Self> {
        check_dims(self.dims(), other.dims())?;
        check_dims(self.dims(), mask.dims())?;
        let mut out = self.clone();
        for (i, &bit) in mask.bits().iter().enumerate() {
            if bit {
                out.pixels[i * 3..i * 3 + 3].copy_from_slice(&other.pixels[i * 3..i * 3 + 3]);
            }
        }
        Ok(out)
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        let mut buf = Vec::with_capacity(self.pixels.len());
        buf.extend(self.pixels.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
        image::RgbImage::from_raw(self.width as u32, self.height as u32, buf).expect("buffer sized from dims")
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let pixels = img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
        ImageTensor { height: img.height() as usize, width: img.width() as usize, pixels }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_rgb8().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

pub(crate) fn check_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::arg(format!("dimension mismatch: {}x{} vs {}x{}", a.0, a.1, b.0, b.1)));
    }
    Ok(())
}

/// Per-channel mean/std used to map `[0, 1]` images into model space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for Preprocessing {
    fn default() -> Self {
        Preprocessing { mean: IMAGENET_MEAN, std: IMAGENET_STD }
    }
}

impl Preprocessing {
    pub fn new(mean: [f64; 3], std: [f64; 3]) -> Result<Self> {
        if std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::arg(format!("std must be strictly positive and finite, got {std:?}")));
        }
        Ok(Preprocessing { mean, std })
    }

    pub fn normalize(&self, image: &ImageTensor) -> NormalizedInput {
        let (h, w) = image.dims();
        let mut tensor = Vec::with_capacity(3 * h * w);
        for c in 0..3 {
            tensor.extend(image.pixels.iter().skip(c).step_by(3).map(|v| (v - self.mean[c]) / self.std[c]));
        }
        NormalizedInput { height: h, width: w, tensor, mean: self.mean, std: self.std }
    }
}

/// A model-space input tensor, channel-major `3 × H × W`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedInput {
    height: usize,
    width: usize,
    tensor: Vec<f64>,
    mean: [f64; 3],
    std: [f64; 3],
}

impl NormalizedInput {
    /// Wraps a raw model-space tensor; values are unbounded.
    pub fn from_tensor(height: usize, width: usize, tensor: Vec<f64>, preprocessing: Preprocessing) -> Result<Self> {
        if tensor.len() != 3 * height * width || height == 0 || width == 0 {
            return Err(Error::arg(format!("tensor of length {} is not 3x{height}x{width}", tensor.len())));
        }
        Ok(NormalizedInput { height, width, tensor, mean: preprocessing.mean, std: preprocessing.std })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn tensor(&self) -> &[f64] {
        &self.tensor
    }

    pub fn tensor_mut(&mut self) -> &mut [f64] {
        &mut self.tensor
    }

    pub fn preprocessing(&self) -> Preprocessing {
        Preprocessing { mean: self.mean, std: self.std }
    }

    /// Maps back to `[0, 1]` space. Values are not clamped.
    pub fn denormalize(&self) -> Vec<f64> {
        let plane = self.height * self.width;
        let mut pixels = vec![0.0; plane * 3];
        for c in 0..3 {
            for i in 0..plane {
                pixels[i * 3 + c] = self.tensor[c * plane + i] * self.std[c] + self.mean[c];
            }
        }
        pixels
    }
}

/// Result of reading an image from disk.
#[derive(Clone, Debug)]
pub struct LoadedImage {
    pub image: ImageTensor,
    pub input: NormalizedInput,
    /// Size of the file before resizing, `(height, width)`.
    pub original_size: (usize, usize),
    pub warnings: Vec<String>,
}

/// Decodes `path`, resizes it to `target_size` and normalizes it for the model.
pub fn load_and_preprocess(
    path: impl AsRef<Path>,
    target_size: (usize, usize),
    preprocessing: &Preprocessing,
) -> Result<LoadedImage> {
    let path = path.as_ref();
    let ingest = |reason: String| Error::Ingestion { path: path.to_path_buf(), reason };
    let decoded = image::ImageReader::open(path)
        .map_err(|e| ingest(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| ingest(e.to_string()))?
        .decode()
        .map_err(|e| ingest(e.to_string()))?;
    let mut warnings = Vec::new();
    if decoded.color() != image::ColorType::Rgb8 {
        let msg = format!("{}: converted {:?} to RGB", path.display(), decoded.color());
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let rgb = decoded.to_rgb8();
    let raw = ImageTensor::from_rgb8(&rgb);
    let original_size = raw.dims();
    let image = raw.resize(target_size.0, target_size.1)?;
    let input = preprocessing.normalize(&image);
    Ok(LoadedImage { image, input, original_size, warnings })
}

/// A binary pixel mask together with the fraction of pixels it covers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width || bits.is_empty() {
            return Err(Error::arg("mask size does not match dims"));
        }
        Ok(BinaryMask { height, width, bits })
    }

    /// Sets the first `count` pixels of `order`.
    pub(crate) fn from_order(height: usize, width: usize, order: &[usize], count: usize) -> Self {
        let mut bits = vec![false; height * width];
        for &i in &order[..count] {
            bits[i] = true;
        }
        BinaryMask { height, width, bits }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn covered_fraction(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    pub fn to_grid(&self) -> Grid {
        Grid::new(self.height, self.width, self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
            .expect("mask dims are positive")
    }
}

/// Number of pixels a top-`fraction` selection covers: `⌈fraction · n⌉`.
pub fn topk_count(fraction: f64, n: usize) -> usize {
    // Guard against 0.5 * 10 = 5.000000000000001 style rounding pushing the ceiling up.
    let raw = fraction * n as f64;
    let rounded = raw.round();
    let k = if (raw - rounded).abs() < 1e-9 { rounded } else { raw.ceil() };
    (k as usize).min(n)
}

/// Marks the `⌈fraction · H · W⌉` highest-valued pixels; ties go to the earlier pixel in scan order.
pub fn topk_mask(map: &Grid, fraction: f64) -> Result<BinaryMask> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::arg(format!("mask fraction must lie in (0, 1], got {fraction}")));
    }
    if !map.is_finite() {
        return Err(Error::Numeric { stage: "topk_mask".into() });
    }
    let k = topk_count(fraction, map.len());
    Ok(BinaryMask::from_order(map.height(), map.width(), &map.descending_order(), k))
}

/// Blends a heatmap over an image: `(1 − alpha) · image + alpha · colormap(map)`.
pub fn overlay(image: &ImageTensor, map: &Grid, alpha: f64) -> Result<ImageTensor> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::arg(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    check_dims(image.dims(), map.dims())?;
    let mut pixels = Vec::with_capacity(image.pixels.len());
    for (px, &m) in image.pixels.chunks_exact(3).zip(map.values()) {
        let color = colormap(m);
        for c in 0..3 {
            pixels.push(((1.0 - alpha) * px[c] + alpha * color[c]).clamp(0.0, 1.0));
        }
    }
    Ok(ImageTensor { height: image.height, width: image.width, pixels })
}

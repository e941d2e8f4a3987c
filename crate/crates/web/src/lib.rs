//! WebAssembly bindings for the in-browser saliency demo.
//!
//! All images cross the boundary as 32x32 RGBA byte buffers; the page resizes
//! uploads on a canvas before calling in.

use abscam::cam::{explain_class, ClassSelection, Method, MethodParams};
use abscam::imaging::synthetic::fixture_image;
use abscam::imaging::{colormap, overlay, topk_mask, DEFAULT_BLUR_SIGMA};
use abscam::metrics::{deletion_curve, insertion_curve, DeletionBaseline};
use abscam::{build_reference_cnn, ClassifierHandle, Grid, ImageTensor};
use wasm_bindgen::prelude::*;

pub const SIZE: usize = 32;
const OVERLAY_ALPHA: f64 = 0.5;

type Result<T> = std::result::Result<T, String>;

fn rgba_to_image(rgba: &[u8]) -> Result<ImageTensor> {
    if rgba.len() != SIZE * SIZE * 4 {
        return Err(format!("expected {} RGBA bytes, got {}", SIZE * SIZE * 4, rgba.len()));
    }
    ImageTensor::from_fn(SIZE, SIZE, |r, c| {
        let p = &rgba[(r * SIZE + c) * 4..];
        [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0]
    })
    .map_err(|e| e.to_string())
}

fn image_to_rgba(image: &ImageTensor) -> Vec<u8> {
    image
        .pixels()
        .chunks_exact(3)
        .flat_map(|p| [to_byte(p[0]), to_byte(p[1]), to_byte(p[2]), 255])
        .collect()
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[wasm_bindgen]
pub struct Explanation {
    class: usize,
    probability: f64,
    values: Vec<f64>,
    overlay: Vec<u8>,
    heatmap: Vec<u8>,
}

#[wasm_bindgen]
impl Explanation {
    pub fn class(&self) -> usize {
        self.class
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    /// Normalized saliency values in row-major order.
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn overlay(&self) -> Vec<u8> {
        self.overlay.clone()
    }

    pub fn heatmap(&self) -> Vec<u8> {
        self.heatmap.clone()
    }
}

#[wasm_bindgen]
pub struct Curves {
    deletion: Vec<f64>,
    insertion: Vec<f64>,
    deletion_auc: f64,
    insertion_auc: f64,
}

#[wasm_bindgen]
impl Curves {
    pub fn deletion(&self) -> Vec<f64> {
        self.deletion.clone()
    }

    pub fn insertion(&self) -> Vec<f64> {
        self.insertion.clone()
    }

    pub fn deletion_auc(&self) -> f64 {
        self.deletion_auc
    }

    pub fn insertion_auc(&self) -> f64 {
        self.insertion_auc
    }
}

#[wasm_bindgen]
pub struct Demo {
    handle: ClassifierHandle,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64) -> Demo {
        Demo { handle: build_reference_cnn(seed) }
    }

    pub fn size() -> usize {
        SIZE
    }

    pub fn class_count(&self) -> usize {
        self.handle.num_classes()
    }

    pub fn methods() -> Vec<String> {
        Method::ALL.iter().map(|m| m.id().to_owned()).collect()
    }

    /// One of the built-in synthetic test images.
    pub fn fixture(index: usize) -> Vec<u8> {
        image_to_rgba(&fixture_image(index, SIZE))
    }

    /// `class < 0` explains the predicted class.
    pub fn explain(&self, rgba: &[u8], method: &str, class: i32) -> std::result::Result<Explanation, JsError> {
        self.explain_rgba(rgba, method, class).map_err(|e| JsError::new(&e))
    }

    pub fn curves(&self, rgba: &[u8], method: &str, class: i32, steps: usize) -> std::result::Result<Curves, JsError> {
        self.curves_rgba(rgba, method, class, steps).map_err(|e| JsError::new(&e))
    }

    /// Keeps the top `fraction` of salient pixels and dims the rest.
    pub fn topk(&self, rgba: &[u8], method: &str, class: i32, fraction: f64) -> std::result::Result<Vec<u8>, JsError> {
        self.topk_rgba(rgba, method, class, fraction).map_err(|e| JsError::new(&e))
    }
}

impl Demo {
    fn map_for(&self, image: &ImageTensor, method: &str, class: i32) -> Result<(usize, Grid)> {
        let method: Method = method.parse().map_err(|e: abscam::Error| e.to_string())?;
        let selection = if class < 0 { ClassSelection::Auto } else { ClassSelection::Fixed(class as usize) };
        let params = MethodParams { class: selection, ..Default::default() };
        let layer = params.resolve_layer(&self.handle).map_err(|e| e.to_string())?;
        let class = params.resolve_class(&self.handle, image).map_err(|e| e.to_string())?;
        let map = explain_class(&self.handle, image, method, &layer, class, &params).map_err(|e| e.to_string())?;
        Ok((class, map.grid))
    }

    pub fn explain_rgba(&self, rgba: &[u8], method: &str, class: i32) -> Result<Explanation> {
        let image = rgba_to_image(rgba)?;
        let (class, map) = self.map_for(&image, method, class)?;
        let probability = self.handle.class_prob(&image, class).map_err(|e| e.to_string())?;
        let blended = overlay(&image, &map, OVERLAY_ALPHA).map_err(|e| e.to_string())?;
        let heatmap = map
            .values()
            .iter()
            .flat_map(|&v| {
                let [r, g, b] = colormap(v);
                [to_byte(r), to_byte(g), to_byte(b), 255]
            })
            .collect();
        Ok(Explanation { class, probability, values: map.into_values(), overlay: image_to_rgba(&blended), heatmap })
    }

    pub fn curves_rgba(&self, rgba: &[u8], method: &str, class: i32, steps: usize) -> Result<Curves> {
        let image = rgba_to_image(rgba)?;
        let (class, map) = self.map_for(&image, method, class)?;
        let del = deletion_curve(&self.handle, &image, &map, class, steps, DeletionBaseline::Zeros).map_err(|e| e.to_string())?;
        let ins = insertion_curve(&self.handle, &image, &map, class, steps, DEFAULT_BLUR_SIGMA).map_err(|e| e.to_string())?;
        Ok(Curves { deletion: del.probs(), insertion: ins.probs(), deletion_auc: del.auc, insertion_auc: ins.auc })
    }

    pub fn topk_rgba(&self, rgba: &[u8], method: &str, class: i32, fraction: f64) -> Result<Vec<u8>> {
        let image = rgba_to_image(rgba)?;
        let (_, map) = self.map_for(&image, method, class)?;
        let mask = topk_mask(&map, fraction).map_err(|e| e.to_string())?;
        let mut out = image_to_rgba(&image);
        for (px, keep) in out.chunks_exact_mut(4).zip(mask.bits()) {
            if !keep {
                for v in &mut px[..3] {
                    *v /= 4;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgba_round_trip() {
        let rgba = Demo::fixture(2);
        assert_eq!(rgba.len(), SIZE * SIZE * 4);
        assert_eq!(image_to_rgba(&rgba_to_image(&rgba).unwrap()), rgba);
    }
}

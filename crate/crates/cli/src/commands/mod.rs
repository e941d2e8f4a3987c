use std::collections::BTreeMap;

use abscam::cam::{upsample, ClassSelection};
use abscam::grid::Grid;
use abscam::imaging::ImageTensor;
use abscam::metrics::{parse_annotations, BBox};
use abscam::ClassifierHandle;
use anyhow::bail;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::dataset::{isolated, ImageEntry};
use crate::CliError;

pub mod evaluate;
pub mod explain;
pub mod pointing;
pub mod sanity;

/// Runs `f` once per image on the current pool, each worker with its own
/// handle clone. Results come back in input order.
pub fn per_image<T, F>(cfg: &RunConfig, entries: &[ImageEntry], f: F) -> Vec<anyhow::Result<T>>
where
    T: Send,
    F: Fn(&ClassifierHandle, &ImageEntry) -> anyhow::Result<T> + Sync,
{
    entries
        .par_iter()
        .map_init(|| cfg.handle.clone(), |h, e| isolated(|| f(h, e)))
        .collect()
}

pub fn resolve_class(cfg: &RunConfig, handle: &ClassifierHandle, image: &ImageTensor) -> anyhow::Result<usize> {
    Ok(match cfg.class {
        ClassSelection::Auto => handle.forward_image(image)?.predicted(),
        ClassSelection::Fixed(c) => c,
    })
}

/// Annotation boxes keyed by image id, then class label, in file order.
pub type BoxIndex = BTreeMap<String, BTreeMap<usize, Vec<BBox>>>;

pub fn load_annotations(cfg: &RunConfig) -> Result<(BoxIndex, Vec<String>), CliError> {
    let Some(path) = &cfg.annotations else {
        return Ok((BoxIndex::new(), Vec::new()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read annotations {}: {e}", path.display())))?;
    let boxes = parse_annotations(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let mut order = Vec::new();
    let mut index = BoxIndex::new();
    for b in boxes {
        if !index.contains_key(&b.image_id) {
            order.push(b.image_id.clone());
        }
        index.entry(b.image_id.clone()).or_default().entry(b.class_label).or_default().push(b);
    }
    Ok((index, order))
}

/// Upsamples `map` to the original image size and checks whether its argmax
/// (first in scan order) lies in any of `boxes`. Returns the point and the verdict.
pub fn point(map: &Grid, original: (usize, usize), boxes: &[BBox]) -> anyhow::Result<((usize, usize), bool)> {
    for b in boxes {
        if !b.fits(original.0, original.1) {
            bail!(
                "box ({}, {})-({}, {}) for class {} exceeds the {}x{} image",
                b.x0, b.y0, b.x1, b.y1, b.class_label, original.0, original.1
            );
        }
    }
    let full = if map.dims() == original { map.clone() } else { upsample(map, original)? };
    let (row, col) = full.argmax();
    Ok(((row, col), boxes.iter().any(|b| b.contains(row, col))))
}

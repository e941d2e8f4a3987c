//! Methods that score masked copies of the input: Abs-CAM phase 2 and Score-CAM.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::imaging::{ImageTensor, NormalizedInput};
use crate::model::{ClassifierHandle, FeatureStack, LayerRef};

use super::gradient::abs_grad_weights;
use super::ops::{in_stage, normalize, upsample};
use super::{ChannelSaliencySet, ChannelWeights, Execution, Method, SaliencyMap};

/// Phase 1 per channel: `M₀ᵏ = normalize(upsample(w_k · Aᵏ))`.
pub fn channel_saliency(features: &FeatureStack, weights: &ChannelWeights, target: (usize, usize)) -> Result<ChannelSaliencySet> {
    let k_count = features.channel_count();
    if weights.weights.len() != k_count {
        return Err(Error::arg(format!("{} weights for {k_count} channels", weights.weights.len())));
    }
    let (h, w) = features.spatial_dims();
    let maps = (0..k_count)
        .map(|k| {
            let wk = weights.weights[k];
            let scaled = Grid::new(h, w, features.channel(k).iter().map(|a| wk * a).collect())?;
            in_stage(normalize(&upsample(&scaled, target)?), || format!("phase 1, channel {k}"))
        })
        .collect::<Result<_>>()?;
    Ok(ChannelSaliencySet { maps })
}

/// Softmax probability of `class` for `image ⊙ mapᵏ`, one per map, in map order.
pub fn rescore_channels(
    handle: &ClassifierHandle,
    image: &ImageTensor,
    maps: &[Grid],
    class: usize,
    execution: Execution,
) -> Result<Vec<f64>> {
    let score = |handle: &ClassifierHandle, map: &Grid| -> Result<f64> {
        let masked = image.multiply(map)?;
        Ok(handle.forward_image(&masked)?.probs[class])
    };
    match execution {
        Execution::Sequential => maps.iter().map(|m| score(handle, m)).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            maps.par_iter().map_init(|| handle.clone(), |h, m| score(h, m)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel => maps.iter().map(|m| score(handle, m)).collect(),
    }
}

/// `normalize(relu(Σ_k s_k · mapᵏ))`, accumulated in channel order.
pub fn combine_scored(maps: &[Grid], scores: &[f64]) -> Result<Grid> {
    let first = maps.first().ok_or_else(|| Error::arg("no channel maps to combine"))?;
    if maps.len() != scores.len() {
        return Err(Error::arg(format!("{} scores for {} maps", scores.len(), maps.len())));
    }
    let mut acc = Grid::zeros(first.height(), first.width());
    for (map, &s) in maps.iter().zip(scores) {
        for (dst, v) in acc.values_mut().iter_mut().zip(map.values()) {
            *dst += s * v;
        }
    }
    let rectified = acc.map(|v| v.max(0.0));
    normalize(&rectified)
}

pub fn abs_cam(
    handle: &ClassifierHandle,
    image: &ImageTensor,
    input: &NormalizedInput,
    layer: &LayerRef,
    class: usize,
) -> Result<SaliencyMap> {
    abs_cam_with(handle, image, input, layer, class, Execution::default())
}

/// Abs-CAM: absolute-gradient channel maps rescored by the model on masked inputs.
pub fn abs_cam_with(
    handle: &ClassifierHandle,
    image: &ImageTensor,
    input: &NormalizedInput,
    layer: &LayerRef,
    class: usize,
    execution: Execution,
) -> Result<SaliencyMap> {
    crate::imaging::check_dims(image.dims(), input.dims())?;
    let (features, grads, _) = handle.features_and_gradient(input, layer, class)?;
    if features.channel_count() == 0 {
        return Err(Error::arg(format!("layer `{}` has no channels", layer.name)));
    }
    let weights = abs_grad_weights(&grads);
    let set = channel_saliency(&features, &weights, image.dims())?;
    let scores = rescore_channels(handle, image, &set.maps, class, execution)?;
    let grid = in_stage(combine_scored(&set.maps, &scores), || "abs-cam: phase 2 combination".into())?;
    SaliencyMap::new(grid, class, Method::AbsCam)
}

pub fn score_cam(
    handle: &ClassifierHandle,
    image: &ImageTensor,
    input: &NormalizedInput,
    layer: &LayerRef,
    class: usize,
) -> Result<SaliencyMap> {
    score_cam_with(handle, image, input, layer, class, Execution::default())
}

/// Score-CAM: each normalized upsampled activation map masks the input and is
/// weighted by the resulting class probability.
pub fn score_cam_with(
    handle: &ClassifierHandle,
    image: &ImageTensor,
    input: &NormalizedInput,
    layer: &LayerRef,
    class: usize,
    execution: Execution,
) -> Result<SaliencyMap> {
    crate::imaging::check_dims(image.dims(), input.dims())?;
    if class >= handle.num_classes() {
        return Err(Error::ClassOutOfRange { class, num_classes: handle.num_classes() });
    }
    let features = handle.feature_maps(input, layer)?;
    if features.channel_count() == 0 {
        return Err(Error::arg(format!("layer `{}` has no channels", layer.name)));
    }
    let unit = ChannelWeights { weights: vec![1.0; features.channel_count()], class };
    let set = channel_saliency(&features, &unit, image.dims())?;
    let scores = rescore_channels(handle, image, &set.maps, class, execution)?;
    let grid = in_stage(combine_scored(&set.maps, &scores), || "score-cam: combination".into())?;
    SaliencyMap::new(grid, class, Method::ScoreCam)
}

//! Class activation mapping methods.
//!
//! Abs-CAM runs in two phases. Phase 1 pools the absolute class-score
//! gradients of the target layer into one nonnegative weight per channel and
//! turns every weighted channel into an upsampled, min–max normalized map.
//! Phase 2 multiplies each of those maps into the input image, scores the
//! masked image with the model (softmax probability of the target class) and
//! combines the channel maps with those scores under a ReLU.
//!
//! `abs-cam-init` is the aggregated phase-1 map alone. Grad-CAM, Grad-CAM++,
//! Smooth Grad-CAM++ and Score-CAM are provided as baselines.

mod gradient;
pub mod ops;
mod rescore;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::imaging::ImageTensor;
use crate::model::{ClassifierHandle, LayerRef};

pub use gradient::{
    abs_cam_init, abs_cam_init_map, abs_grad_weights, gap_weights, grad_cam, grad_cam_map, grad_cam_pp,
    grad_cam_pp_raw, grad_cam_pp_weights, smooth_grad_cam_pp, weighted_cam,
};
pub use ops::{normalize, relu, upsample};
pub use rescore::{abs_cam, abs_cam_with, channel_saliency, combine_scored, rescore_channels, score_cam, score_cam_with};

/// One nonnegative (Abs-CAM) or signed (Grad-CAM) weight per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelWeights {
    pub weights: Vec<f64>,
    pub class: usize,
}

/// Per-channel phase-1 maps at input resolution, each in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSaliencySet {
    pub maps: Vec<Grid>,
}

/// A final attribution map at input resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    pub grid: Grid,
    pub class: usize,
    pub method_id: String,
}

impl SaliencyMap {
    pub(crate) fn new(grid: Grid, class: usize, method: Method) -> Result<Self> {
        if !grid.is_finite() {
            return Err(Error::Numeric { stage: format!("{method}: final map") });
        }
        Ok(SaliencyMap { grid, class, method_id: method.id().to_owned() })
    }
}

/// How phase-2 style rescoring forwards are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Fan channel forwards out over the rayon pool (falls back to sequential
    /// without the `parallel` feature). Reduction stays in channel order.
    #[default]
    Parallel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "abs-cam")]
    AbsCam,
    #[serde(rename = "abs-cam-init")]
    AbsCamInit,
    #[serde(rename = "grad-cam")]
    GradCam,
    #[serde(rename = "grad-cam++")]
    GradCamPlusPlus,
    #[serde(rename = "sg-cam++")]
    SmoothGradCamPlusPlus,
    #[serde(rename = "score-cam")]
    ScoreCam,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::AbsCam,
        Method::AbsCamInit,
        Method::GradCam,
        Method::GradCamPlusPlus,
        Method::SmoothGradCamPlusPlus,
        Method::ScoreCam,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::AbsCam => "abs-cam",
            Method::AbsCamInit => "abs-cam-init",
            Method::GradCam => "grad-cam",
            Method::GradCamPlusPlus => "grad-cam++",
            Method::SmoothGradCamPlusPlus => "sg-cam++",
            Method::ScoreCam => "score-cam",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_owned()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassSelection {
    /// Argmax of the softmax on the unmodified input.
    #[default]
    Auto,
    Fixed(usize),
}

impl FromStr for ClassSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(ClassSelection::Auto);
        }
        s.parse()
            .map(ClassSelection::Fixed)
            .map_err(|_| Error::arg(format!("class must be `auto` or a class index, got `{s}`")))
    }
}

impl fmt::Display for ClassSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassSelection::Auto => f.write_str("auto"),
            ClassSelection::Fixed(c) => write!(f, "{c}"),
        }
    }
}

/// Parameters shared by every registered method.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodParams {
    /// Target layer; `None` selects the model's default layer.
    pub layer: Option<String>,
    pub class: ClassSelection,
    pub seed: u64,
    /// Smooth Grad-CAM++ sample count.
    pub sg_samples: usize,
    /// Smooth Grad-CAM++ noise standard deviation, in model input space.
    pub sg_sigma: f64,
    pub execution: Execution,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams {
            layer: None,
            class: ClassSelection::Auto,
            seed: 0,
            sg_samples: 8,
            sg_sigma: 0.1,
            execution: Execution::Parallel,
        }
    }
}

impl MethodParams {
    pub fn resolve_layer(&self, handle: &ClassifierHandle) -> Result<LayerRef> {
        match &self.layer {
            Some(name) => handle.layer(name),
            None => Ok(handle.default_layer()),
        }
    }

    pub fn resolve_class(&self, handle: &ClassifierHandle, image: &ImageTensor) -> Result<usize> {
        match self.class {
            ClassSelection::Auto => Ok(handle.forward_image(image)?.predicted()),
            ClassSelection::Fixed(c) if c < handle.num_classes() => Ok(c),
            ClassSelection::Fixed(c) => Err(Error::ClassOutOfRange { class: c, num_classes: handle.num_classes() }),
        }
    }
}

/// Runs `method` through the registry on a `[0, 1]` image.
pub fn explain(handle: &ClassifierHandle, image: &ImageTensor, method: Method, params: &MethodParams) -> Result<SaliencyMap> {
    let layer = params.resolve_layer(handle)?;
    let class = params.resolve_class(handle, image)?;
    explain_class(handle, image, method, &layer, class, params)
}

/// Like [`explain`] with the layer and class already resolved.
pub fn explain_class(
    handle: &ClassifierHandle,
    image: &ImageTensor,
    method: Method,
    layer: &LayerRef,
    class: usize,
    params: &MethodParams,
) -> Result<SaliencyMap> {
    let input = handle.normalize(image);
    match method {
        Method::AbsCam => abs_cam_with(handle, image, &input, layer, class, params.execution),
        Method::AbsCamInit => abs_cam_init(handle, &input, layer, class),
        Method::GradCam => grad_cam(handle, &input, layer, class),
        Method::GradCamPlusPlus => grad_cam_pp(handle, &input, layer, class),
        Method::SmoothGradCamPlusPlus => {
            smooth_grad_cam_pp(handle, &input, layer, class, params.sg_samples, params.sg_sigma, params.seed)
        }
        Method::ScoreCam => score_cam_with(handle, image, &input, layer, class, params.execution),
    }
}

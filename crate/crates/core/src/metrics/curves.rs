use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::imaging::{check_dims, gaussian_blur, BinaryMask, ImageTensor};
use crate::model::ClassifierHandle;

/// Class probability sampled as a growing fraction of pixels is replaced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalCurve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl EvalCurve {
    /// Validates the fractions (strictly increasing from 0 to 1) and computes the AUC.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 || points[0].0 != 0.0 || points[points.len() - 1].0 != 1.0 {
            return Err(Error::arg("curve fractions must start at 0 and end at 1"));
        }
        if points.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(Error::arg("curve fractions must be strictly increasing"));
        }
        let auc = trapezoid_auc(&points);
        Ok(EvalCurve { points, auc })
    }

    pub fn probs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

pub fn trapezoid_auc(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|p| (p[1].0 - p[0].0) * (p[0].1 + p[1].1) / 2.0).sum()
}

/// Fill used for deleted pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeletionBaseline {
    /// Black pixels (zero in `[0, 1]` image space).
    Zeros,
    /// The image blurred with this sigma.
    Blur { sigma: f64 },
}

impl DeletionBaseline {
    pub fn render(&self, image: &ImageTensor) -> Result<ImageTensor> {
        match *self {
            DeletionBaseline::Zeros => ImageTensor::filled(image.height(), image.width(), [0.0; 3]),
            DeletionBaseline::Blur { sigma } => gaussian_blur(image, sigma),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DeletionBaseline::Zeros => "zeros",
            DeletionBaseline::Blur { .. } => "blur",
        }
    }
}

impl fmt::Display for DeletionBaseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeletionBaseline {
    type Err = Error;

    /// Parses `zeros` or `blur` (the latter with the default blur sigma).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeros" => Ok(DeletionBaseline::Zeros),
            "blur" => Ok(DeletionBaseline::Blur { sigma: crate::imaging::DEFAULT_BLUR_SIGMA }),
            other => Err(Error::arg(format!("baseline must be `zeros` or `blur`, got `{other}`"))),
        }
    }
}

/// Starts from `start` and, at step `t` of `steps`, copies the
/// `⌈t · H · W / steps⌉` most salient pixels (scan-order ties) from `fill`.
pub fn replacement_curve(
    handle: &ClassifierHandle,
    start: &ImageTensor,
    fill: &ImageTensor,
    map: &Grid,
    class: usize,
    steps: usize,
) -> Result<EvalCurve> {
    if steps == 0 {
        return Err(Error::arg("steps must be at least 1"));
    }
    check_dims(start.dims(), map.dims())?;
    check_dims(start.dims(), fill.dims())?;
    if class >= handle.num_classes() {
        return Err(Error::ClassOutOfRange { class, num_classes: handle.num_classes() });
    }
    if !map.is_finite() {
        return Err(Error::Numeric { stage: "saliency ranking".into() });
    }
    let (h, w) = map.dims();
    let n = h * w;
    let order = map.descending_order();
    let stage = |t: usize| -> Result<(f64, f64)> {
        let count = (t * n).div_ceil(steps);
        let mask = BinaryMask::from_order(h, w, &order, count);
        let img = start.splice(fill, &mask)?;
        let prob = handle.forward_image(&img)?.probs[class];
        Ok((t as f64 / steps as f64, prob))
    };
    #[cfg(feature = "parallel")]
    let points = {
        use rayon::prelude::*;
        (0..=steps).into_par_iter().map(stage).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let points = (0..=steps).map(stage).collect::<Result<Vec<_>>>()?;
    EvalCurve::new(points)
}

/// Progressively removes the most salient pixels, replacing them with `baseline`.
pub fn deletion_curve(
    handle: &ClassifierHandle,
    image: &ImageTensor,
    map: &Grid,
    class: usize,
    steps: usize,
    baseline: DeletionBaseline,
) -> Result<EvalCurve> {
    check_dims(image.dims(), map.dims())?;
    let fill = baseline.render(image)?;
    replacement_curve(handle, image, &fill, map, class, steps)
}

/// Starts from a blurred copy and progressively restores the most salient original pixels.
pub fn insertion_curve(
    handle: &ClassifierHandle,
    image: &ImageTensor,
    map: &Grid,
    class: usize,
    steps: usize,
    sigma: f64,
) -> Result<EvalCurve> {
    check_dims(image.dims(), map.dims())?;
    let blurred = gaussian_blur(image, sigma)?;
    replacement_curve(handle, &blurred, image, map, class, steps)
}

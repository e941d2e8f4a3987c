//! Gradient-weighted methods: Abs-CAM phase-1 aggregate, Grad-CAM,
//! Grad-CAM++ and Smooth Grad-CAM++.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::imaging::NormalizedInput;
use crate::model::{ClassifierHandle, FeatureStack, GradStack, LayerRef};

use super::ops::{in_stage, normalize, upsample};
use super::{ChannelWeights, Method, SaliencyMap};

/// `w_k = (1/Z) Σ_ij |∂_ij^k|`
pub fn abs_grad_weights(grads: &GradStack) -> ChannelWeights {
    let z = grads.pixels_per_channel() as f64;
    let weights = (0..grads.channel_count())
        .map(|k| grads.channel(k).iter().map(|g| g.abs()).sum::<f64>() / z)
        .collect();
    ChannelWeights { weights, class: grads.target_class() }
}

/// Global average of the signed gradients (Grad-CAM).
pub fn gap_weights(grads: &GradStack) -> ChannelWeights {
    let z = grads.pixels_per_channel() as f64;
    let weights = (0..grads.channel_count()).map(|k| grads.channel(k).iter().sum::<f64>() / z).collect();
    ChannelWeights { weights, class: grads.target_class() }
}

/// Grad-CAM++ weights: `w_k = Σ_ij α_ij^k · relu(g_ij^k)` with
/// `α = g² / (2g² + Σ_ab A_ab^k · g³)` and `α = 0` where the denominator vanishes.
pub fn grad_cam_pp_weights(features: &FeatureStack, grads: &GradStack) -> Result<ChannelWeights> {
    if !grads.matches(features) {
        return Err(Error::arg("gradient stack does not match feature stack shape"));
    }
    let weights = (0..grads.channel_count())
        .map(|k| {
            let act_sum: f64 = features.channel(k).iter().sum();
            grads
                .channel(k)
                .iter()
                .map(|&g| {
                    let g2 = g * g;
                    let denom = 2.0 * g2 + act_sum * g2 * g;
                    let alpha = if denom != 0.0 { g2 / denom } else { 0.0 };
                    alpha * g.max(0.0)
                })
                .sum()
        })
        .collect();
    Ok(ChannelWeights { weights, class: grads.target_class() })
}

/// `relu(Σ_k w_k A^k)` at feature resolution, accumulated in channel order.
pub fn weighted_cam(features: &FeatureStack, weights: &ChannelWeights) -> Result<Grid> {
    let k_count = features.channel_count();
    if weights.weights.len() != k_count {
        return Err(Error::arg(format!("{} weights for {k_count} channels", weights.weights.len())));
    }
    let (h, w) = features.spatial_dims();
    let mut acc = vec![0.0; h * w];
    for (k, &wk) in weights.weights.iter().enumerate() {
        for (dst, a) in acc.iter_mut().zip(features.channel(k)) {
            *dst += wk * a;
        }
    }
    acc.iter_mut().for_each(|v| *v = v.max(0.0));
    Grid::new(h, w, acc)
}

fn finish(raw: &Grid, target: (usize, usize), class: usize, method: Method) -> Result<SaliencyMap> {
    let up = upsample(raw, target)?;
    let grid = in_stage(normalize(&up), || format!("{method}: upsample/normalize"))?;
    SaliencyMap::new(grid, class, method)
}

/// Aggregated phase-1 map `normalize(upsample(relu(Σ_k w_k A^k)))`.
pub fn abs_cam_init_map(features: &FeatureStack, weights: &ChannelWeights, target: (usize, usize)) -> Result<SaliencyMap> {
    finish(&weighted_cam(features, weights)?, target, weights.class, Method::AbsCamInit)
}

pub fn grad_cam_map(features: &FeatureStack, grads: &GradStack, target: (usize, usize)) -> Result<SaliencyMap> {
    let weights = gap_weights(grads);
    finish(&weighted_cam(features, &weights)?, target, weights.class, Method::GradCam)
}

/// Unnormalized Grad-CAM++ map at feature resolution.
pub fn grad_cam_pp_raw(features: &FeatureStack, grads: &GradStack) -> Result<Grid> {
    weighted_cam(features, &grad_cam_pp_weights(features, grads)?)
}

pub fn abs_cam_init(handle: &ClassifierHandle, input: &NormalizedInput, layer: &LayerRef, class: usize) -> Result<SaliencyMap> {
    let (features, grads, _) = handle.features_and_gradient(input, layer, class)?;
    abs_cam_init_map(&features, &abs_grad_weights(&grads), input.dims())
}

pub fn grad_cam(handle: &ClassifierHandle, input: &NormalizedInput, layer: &LayerRef, class: usize) -> Result<SaliencyMap> {
    let (features, grads, _) = handle.features_and_gradient(input, layer, class)?;
    grad_cam_map(&features, &grads, input.dims())
}

pub fn grad_cam_pp(handle: &ClassifierHandle, input: &NormalizedInput, layer: &LayerRef, class: usize) -> Result<SaliencyMap> {
    let (features, grads, _) = handle.features_and_gradient(input, layer, class)?;
    finish(&grad_cam_pp_raw(&features, &grads)?, input.dims(), class, Method::GradCamPlusPlus)
}

/// Grad-CAM++ averaged over `samples` copies of the input perturbed with
/// `N(0, sigma²)` noise drawn from a ChaCha8 stream seeded by `seed`.
/// Raw maps are averaged at feature resolution before upsampling.
pub fn smooth_grad_cam_pp(
    handle: &ClassifierHandle,
    input: &NormalizedInput,
    layer: &LayerRef,
    class: usize,
    samples: usize,
    sigma: f64,
    seed: u64,
) -> Result<SaliencyMap> {
    if samples == 0 {
        return Err(Error::arg("smooth grad-cam++ needs at least one sample"));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::arg(format!("noise sigma must be nonnegative, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if sigma > 0.0 { Some(Normal::new(0.0, sigma).expect("valid sigma")) } else { None };
    let mut total: Option<Grid> = None;
    for _ in 0..samples {
        let mut noisy = input.clone();
        if let Some(dist) = &noise {
            for v in noisy.tensor_mut() {
                *v += dist.sample(&mut rng);
            }
        }
        let (features, grads, _) = handle.features_and_gradient(&noisy, layer, class)?;
        let raw = grad_cam_pp_raw(&features, &grads)?;
        match total.as_mut() {
            None => total = Some(raw),
            Some(acc) => acc.values_mut().iter_mut().zip(raw.values()).for_each(|(a, r)| *a += r),
        }
    }
    let n = samples as f64;
    let mean = total.expect("samples >= 1").map(|v| v / n);
    finish(&mean, input.dims(), class, Method::SmoothGradCamPlusPlus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack(k: usize, h: usize, w: usize, v: Vec<f64>) -> FeatureStack {
        FeatureStack::new(k, h, w, v).unwrap()
    }

    #[test]
    fn abs_weights_hand_example() {
        let g = GradStack::new(1, 2, 2, vec![1.0, -1.0, 2.0, -2.0], 0).unwrap();
        assert_eq!(abs_grad_weights(&g).weights, vec![1.5]);
    }

    #[test]
    fn zero_grads_give_zero_weights() {
        let g = GradStack::new(3, 2, 2, vec![0.0; 12], 1).unwrap();
        assert_eq!(abs_grad_weights(&g).weights, vec![0.0; 3]);
    }

    #[test]
    fn nonnegative_grads_match_gap() {
        let g = GradStack::new(2, 1, 3, vec![0.1, 0.0, 0.5, 2.0, 3.0, 0.25], 0).unwrap();
        assert_eq!(abs_grad_weights(&g), gap_weights(&g));
    }

    #[test]
    fn single_channel_unit_weight_reduces_to_relu_of_activation() {
        let a = stack(1, 2, 2, vec![0.0, 1.0, 3.0, 2.0]);
        let w = ChannelWeights { weights: vec![1.0], class: 0 };
        let got = abs_cam_init_map(&a, &w, (4, 4)).unwrap();
        let expected = normalize(&upsample(&Grid::from_rows(&[[0.0, 1.0], [3.0, 2.0]]), (4, 4)).unwrap()).unwrap();
        assert_eq!(got.grid, expected);
    }

    #[test]
    fn channel_mismatch_is_argument_error() {
        let a = stack(2, 1, 1, vec![1.0, 2.0]);
        let w = ChannelWeights { weights: vec![1.0], class: 0 };
        assert!(matches!(abs_cam_init_map(&a, &w, (2, 2)), Err(Error::Argument(_))));
    }

    #[test]
    fn nonpositive_grads_give_zero_grad_cam() {
        let a = stack(2, 2, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 0.5, 0.0, 1.0]);
        let g = GradStack::new(2, 2, 2, vec![-1.0, -0.5, 0.0, -2.0, -0.1, -0.1, -0.3, 0.0], 0).unwrap();
        let map = grad_cam_map(&a, &g, (4, 4)).unwrap();
        assert!(map.grid.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn grad_cam_pp_negative_partials_zero_weights() {
        let a = stack(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let g = GradStack::new(1, 2, 2, vec![-1.0, -2.0, -0.5, -3.0], 0).unwrap();
        assert_eq!(grad_cam_pp_weights(&a, &g).unwrap().weights, vec![0.0]);
    }

    #[test]
    fn grad_cam_pp_single_pixel_is_constant_zero_map() {
        let a = stack(1, 1, 1, vec![2.0]);
        let g = GradStack::new(1, 1, 1, vec![0.5], 0).unwrap();
        let w = grad_cam_pp_weights(&a, &g).unwrap();
        // alpha = g^2 / (2 g^2 + A g^3) = 0.25 / (0.5 + 0.25) = 1/3
        assert!((w.weights[0] - 0.5 / 3.0).abs() < 1e-15);
        let raw = grad_cam_pp_raw(&a, &g).unwrap();
        assert!(raw.values()[0] > 0.0);
        let map = finish(&raw, (3, 3), 0, Method::GradCamPlusPlus).unwrap();
        assert!(map.grid.values().iter().all(|v| *v == 0.0));
    }
}

use crate::error::{Error, Result};

use super::ImageTensor;

/// Blur strength used for the insertion baseline unless configured otherwise.
pub const DEFAULT_BLUR_SIGMA: f64 = 5.0;

/// Normalized 1D Gaussian taps over `[-r, r]` with `r = ⌈2σ⌉`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (2.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Mirror an out-of-range index back into `[0, n)` without repeating the edge sample.
pub(crate) fn reflect_index(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    (if m < n as i64 { m } else { period - m }) as usize
}

fn convolve_axis(src: &[f64], h: usize, w: usize, kernel: &[f64], horizontal: bool) -> Vec<f64> {
    let radius = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; src.len()];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (t, &k) in kernel.iter().enumerate() {
                let d = t as i64 - radius;
                let idx = if horizontal {
                    r * w + reflect_index(c as i64 + d, w)
                } else {
                    reflect_index(r as i64 + d, h) * w + c
                };
                acc += k * src[idx];
            }
            out[r * w + c] = acc;
        }
    }
    out
}

/// Channelwise separable Gaussian blur with reflect padding, clamped to `[0, 1]`.
pub fn gaussian_blur(image: &ImageTensor, sigma: f64) -> Result<ImageTensor> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::arg(format!("blur sigma must be positive, got {sigma}")));
    }
    let kernel = gaussian_kernel(sigma);
    let (h, w) = image.dims();
    let planes = [0, 1, 2].map(|c| {
        let rows = convolve_axis(&image.channel(c), h, w, &kernel, true);
        convolve_axis(&rows, h, w, &kernel, false)
    });
    Ok(ImageTensor::from_planes(h, w, planes))
}

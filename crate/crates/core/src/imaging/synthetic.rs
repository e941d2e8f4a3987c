//! Deterministic procedurally drawn scenes used as fixtures and demo inputs.

use super::ImageTensor;

/// Draws scene `index` at `size × size`: a smooth background gradient with a
/// disc and a rectangle whose colours and positions depend on the index.
pub fn fixture_image(index: usize, size: usize) -> ImageTensor {
    let s = size as f64;
    let phase = index as f64 * 0.618_033_988_75;
    let frac = |x: f64| x - x.floor();
    let disc_c = (s * (0.25 + 0.5 * frac(phase)), s * (0.25 + 0.5 * frac(phase * 2.0 + 0.3)));
    let disc_r = s * (0.12 + 0.08 * frac(phase * 3.0));
    let disc_rgb = [frac(phase + 0.1), frac(phase * 5.0 + 0.4), frac(phase * 7.0 + 0.8)];
    let rect_lo = (s * 0.1 * (1.0 + frac(phase * 11.0)), s * 0.55);
    let rect_hi = (rect_lo.0 + s * 0.3, s * 0.9);
    let rect_rgb = [1.0 - disc_rgb[0], frac(phase * 13.0), 0.5 * disc_rgb[2]];

    ImageTensor::from_fn(size, size, |r, c| {
        let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
        let dy = y - disc_c.0;
        let dx = x - disc_c.1;
        if dy * dy + dx * dx <= disc_r * disc_r {
            disc_rgb
        } else if y >= rect_lo.0 && y < rect_hi.0 && x >= rect_lo.1 && x < rect_hi.1 {
            rect_rgb
        } else {
            [0.3 + 0.4 * y / s, 0.5 * x / s + 0.2 * frac(phase), 0.6 - 0.3 * (x + y) / (2.0 * s)]
        }
    })
    .expect("fixture colours lie in [0, 1]")
}

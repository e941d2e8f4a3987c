/// Colour stops of the heatmap ramp, `(position, [r, g, b])`:
/// blue → cyan → green → yellow → red, linearly interpolated between stops.
pub const COLORMAP_STOPS: [(f64, [f64; 3]); 5] = [
    (0.0, [0.0, 0.0, 1.0]),
    (0.25, [0.0, 1.0, 1.0]),
    (0.5, [0.0, 1.0, 0.0]),
    (0.75, [1.0, 1.0, 0.0]),
    (1.0, [1.0, 0.0, 0.0]),
];

/// Maps a value in `[0, 1]` onto the ramp; inputs outside are clamped, NaN maps to the low end.
pub fn colormap(value: f64) -> [f64; 3] {
    let v = if value.is_nan() { 0.0 } else { value.clamp(0.0, 1.0) };
    for pair in COLORMAP_STOPS.windows(2) {
        let (p0, c0) = pair[0];
        let (p1, c1) = pair[1];
        if v <= p1 {
            let t = (v - p0) / (p1 - p0);
            return [0, 1, 2].map(|i| c0[i] + t * (c1[i] - c0[i]));
        }
    }
    COLORMAP_STOPS[4].1
}

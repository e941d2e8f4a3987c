use crate::error::{Error, Result};
use crate::grid::{resize_plane, Grid};

/// Min–max normalization to `[0, 1]`. A constant map becomes all zeros.
pub fn normalize(map: &Grid) -> Result<Grid> {
    if !map.is_finite() {
        return Err(Error::Numeric { stage: "normalize".into() });
    }
    let (lo, hi) = map.min_max();
    if hi == lo {
        return Ok(Grid::zeros(map.height(), map.width()));
    }
    let span = hi - lo;
    Ok(map.map(|v| (v - lo) / span))
}

/// Bilinear upsampling with half-pixel centres (no corner alignment).
pub fn upsample(map: &Grid, target: (usize, usize)) -> Result<Grid> {
    let (h, w) = target;
    if h == 0 || w == 0 {
        return Err(Error::arg(format!("upsample target must be positive, got {h}x{w}")));
    }
    Grid::new(h, w, resize_plane(map.values(), map.height(), map.width(), h, w))
}

pub fn relu(map: &Grid) -> Grid {
    map.map(|v| v.max(0.0))
}

/// Wraps a numeric error with the stage of the method that produced it.
pub(crate) fn in_stage<T>(result: Result<T>, stage: impl FnOnce() -> String) -> Result<T> {
    result.map_err(|e| match e {
        Error::Numeric { .. } => Error::Numeric { stage: stage() },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_hand_values() {
        let g = Grid::from_rows(&[[0.0, 2.0, 4.0]]);
        assert_eq!(normalize(&g).unwrap().values(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalize_constant_is_zero() {
        let g = Grid::filled(3, 3, 0.7);
        assert!(normalize(&g).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn normalize_idempotent_on_unit_range() {
        let g = Grid::from_rows(&[[0.0, 0.25], [1.0, 0.6]]);
        assert_eq!(normalize(&g).unwrap(), g);
    }

    #[test]
    fn normalize_rejects_nan() {
        let g = Grid::from_rows(&[[0.0, f64::NAN]]);
        assert!(matches!(normalize(&g), Err(Error::Numeric { .. })));
        let g = Grid::from_rows(&[[0.0, f64::INFINITY]]);
        assert!(normalize(&g).is_err());
    }

    #[test]
    fn upsample_constant_and_single_pixel() {
        let g = upsample(&Grid::filled(7, 7, 0.3), (224, 224)).unwrap();
        assert_eq!(g.dims(), (224, 224));
        assert!(g.values().iter().all(|v| (*v - 0.3).abs() < 1e-15));
        let g = upsample(&Grid::filled(1, 1, 2.5), (5, 3)).unwrap();
        assert!(g.values().iter().all(|v| *v == 2.5));
    }

    #[test]
    fn upsample_rejects_empty_target() {
        assert!(upsample(&Grid::zeros(2, 2), (0, 4)).is_err());
    }
}

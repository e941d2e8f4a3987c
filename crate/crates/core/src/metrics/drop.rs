use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::imaging::{check_dims, topk_mask, ImageTensor};
use crate::model::ClassifierHandle;

/// One image to score, with its saliency map and target class.
#[derive(Clone, Debug)]
pub struct DropCase<'a> {
    pub image: &'a ImageTensor,
    pub map: &'a Grid,
    pub class: usize,
}

/// Per-image outcome of keeping only the top of the saliency map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseDrop {
    pub original_prob: f64,
    pub masked_prob: f64,
    /// `100 · max(0, p_orig − p_mask) / p_orig`
    pub drop_percent: f64,
    pub increased: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropIncreaseResult {
    pub average_drop: f64,
    pub average_increase: f64,
    /// Cases that contributed (cases with zero original probability are excluded).
    pub n_images: usize,
    pub excluded: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Scores `image ⊙ topk_mask(map, fraction)`. Returns `None` when the original
/// probability is zero, since the relative drop is undefined there.
pub fn drop_case(handle: &ClassifierHandle, case: &DropCase<'_>, mask_fraction: f64) -> Result<Option<CaseDrop>> {
    check_dims(case.image.dims(), case.map.dims())?;
    let mask = topk_mask(case.map, mask_fraction)?;
    let original_prob = handle.class_prob(case.image, case.class)?;
    let masked = case.image.multiply(&mask.to_grid())?;
    let masked_prob = handle.class_prob(&masked, case.class)?;
    if original_prob == 0.0 {
        return Ok(None);
    }
    Ok(Some(CaseDrop {
        original_prob,
        masked_prob,
        drop_percent: 100.0 * (original_prob - masked_prob).max(0.0) / original_prob,
        increased: masked_prob > original_prob,
    }))
}

/// Average Drop and Average Increase (both in percent) over `cases`.
pub fn average_drop_increase(handle: &ClassifierHandle, cases: &[DropCase<'_>], mask_fraction: f64) -> Result<DropIncreaseResult> {
    if cases.is_empty() {
        return Err(Error::arg("average drop/increase needs at least one case"));
    }
    let mut drops = Vec::with_capacity(cases.len());
    let mut excluded = Vec::new();
    let mut warnings = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        match drop_case(handle, case, mask_fraction)? {
            Some(d) => drops.push(d),
            None => {
                let msg = format!("case {i}: original class probability is zero; excluded");
                log::warn!("{msg}");
                warnings.push(msg);
                excluded.push(i);
            }
        }
    }
    let n = drops.len();
    let (average_drop, average_increase) = if n == 0 {
        (0.0, 0.0)
    } else {
        (
            drops.iter().map(|d| d.drop_percent).sum::<f64>() / n as f64,
            100.0 * drops.iter().filter(|d| d.increased).count() as f64 / n as f64,
        )
    };
    Ok(DropIncreaseResult { average_drop, average_increase, n_images: n, excluded, warnings })
}

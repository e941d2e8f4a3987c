//! Quantitative evaluation of saliency maps.

mod curves;
mod drop;
mod pointing;
mod sanity;

pub use curves::{deletion_curve, insertion_curve, replacement_curve, trapezoid_auc, DeletionBaseline, EvalCurve};
pub use drop::{average_drop_increase, drop_case, CaseDrop, DropCase, DropIncreaseResult};
pub use pointing::{parse_annotations, pointing_game, BBox, PointingRecord, PointingResult, ANNOTATION_HEADER};
pub use sanity::{monotone_fraction, sanity_check, spearman, LayerSimilarity, SanityReport};

/// Default number of deletion/insertion steps.
pub const DEFAULT_STEPS: usize = 100;
/// Default Average Drop / Increase mask coverage.
pub const DEFAULT_MASK_FRACTION: f64 = 0.5;

//! Class activation mapping toolkit centred on Abs-CAM.
//!
//! * [`imaging`]: image ingestion, preprocessing, masks, blur, overlays and map file formats.
//! * [`model`]: a differentiable classifier adapter and a seeded reference CNN.
//! * [`cam`]: Abs-CAM, Abs-CAM (init), Grad-CAM, Grad-CAM++, Smooth Grad-CAM++, Score-CAM.
//! * [`metrics`]: Average Drop/Increase, Deletion/Insertion, Pointing Game, sanity checks.

pub mod cam;
pub mod error;
pub mod grid;
pub mod imaging;
pub mod metrics;
pub mod model;

pub use cam::{explain, Method, MethodParams, SaliencyMap};
pub use error::{Error, Result};
pub use grid::Grid;
pub use imaging::{ImageTensor, NormalizedInput, Preprocessing};
pub use model::{build_reference_cnn, ClassifierHandle, LayerRef};

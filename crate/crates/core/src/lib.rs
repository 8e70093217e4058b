//! Cross-validated ridge encoding models for multichannel response
//! recordings, with residual ablations, inter-subject noise ceilings and
//! group-level contrast statistics.
//!
//! The building blocks, bottom-up:
//!
//! - [`matrixio`]: the `.eamx` matrix format, manifests and ROI atlases
//! - [`ridge`]: SVD-path ridge regression
//! - [`stats`]: Pearson correlation, t-tests and FDR control
//! - [`crossval`]: contiguous-fold cross-validated encoding with nested
//!   per-voxel λ selection
//! - [`residual`]: cross-validated removal of one representation from another
//! - [`ceiling`]: leave-one-subject-out noise ceilings
//! - [`contrast`]: connection and interaction contrasts across subjects
//! - [`trmap`]: stimulus-to-TR alignment
//! - [`synth`]: synthetic data with planted ground truth

pub mod ceiling;
pub mod contrast;
pub mod crossval;
pub mod error;
pub mod matrixio;
pub mod par;
pub mod residual;
pub mod ridge;
pub mod stats;
pub mod synth;
pub mod trmap;

pub use error::{Error, Result};

//! Deterministic diagnostic indicators for cervical-spine sagittal MRI.
//!
//! Input is a labeled segmentation (vertebrae, discs, spinal cord, CSF) plus
//! the T2 intensity image. The crate derives instance labels, posterior disc
//! herniations, pathology heatmaps, cord compression (MSCC), the modified
//! K-line, Cobb angles, T2 hyperintensity indices and Kang grades, and
//! provides the matching loss functions and evaluation metrics.

pub mod error;
pub mod evaluation;
pub mod frame;
pub mod geometry;
pub mod grid;
pub mod heatmap;
pub mod herniation;
pub mod io;
pub mod kang;
pub mod labeling;
pub mod objectives;
pub mod phantom;
pub mod pipeline;
pub mod raster;
pub mod rect;
pub mod report;
pub mod signal;
pub mod types;

pub use error::{Error, Result};
pub use grid::Grid;
pub use types::*;

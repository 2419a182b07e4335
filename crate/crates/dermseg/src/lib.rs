//! Skin lesion segmentation for dermoscopic images.
//!
//! The pipeline has two phases. Preprocessing downscales large photos,
//! corrects uneven illumination with CLAHE on the L channel, and removes
//! hairs detected by a 2D Frangi vesselness filter. Segmentation clusters
//! the pixel colors with k-means, keeps the clusters that match a lesion
//! color model learned from training masks, and grows the final mask with
//! dual-seed flood fill plus connected-component post-processing.
//!
//! The crate is organized along those stages:
//!
//! - [`imgcore`]: image buffers, color conversion, scaling, file I/O
//! - [`preprocess`]: CLAHE, Hessian/Frangi filtering, hair removal
//! - [`colormodel`]: lesion color histograms and range queries
//! - [`cluster`]: k-means over pixel colors and cluster selection
//! - [`segment`]: seeds, flood fill, connected components, final mask
//! - [`eval`]: confusion counts and challenge-style metrics
//! - [`pipeline`]: configuration bundle and stage composition
//!
//! All operations are pure functions of their inputs; images and results
//! can be shared freely across threads.

pub mod cluster;
pub mod colormodel;
mod error;
pub mod eval;
pub mod imgcore;
pub mod pipeline;
pub mod preprocess;
pub mod segment;

pub use error::{Error, Result};

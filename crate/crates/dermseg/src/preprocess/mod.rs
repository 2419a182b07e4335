//! Preprocessing: illumination correction and hair removal.

mod clahe;
mod frangi;
mod hair;

pub use clahe::{clahe_l_channel, clahe_plane, ClaheParams};
pub use frangi::{frangi_vesselness, hessian2d, FrangiParams, HessianField};
pub use hair::{detect_hair, remove_hair, HairRemovalParams};

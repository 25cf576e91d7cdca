//! Core of the `dvp` video precoding toolkit.
//!
//! Everything here is pure computation over in-memory frames and needs only
//! `alloc`: planar frames and GOP segmentation, rational scale factors, the
//! linear resamplers, the multi-scale precoding network, its training loss,
//! the rate-distortion pruning rules used for per-GOP mode selection, and
//! PSNR/Bjontegaard metrics. File formats, codecs and the CLI live in the
//! `dvp` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

mod error;
pub mod frame;
pub mod loss;
pub mod metrics;
pub mod mode;
pub mod net;
pub mod resample;
pub mod scale;

pub use error::Error;
pub use frame::{footprint, segment_gops, FootprintView, FrameRate, GopSegment, PixelRange, PlanarFrame, Plane};
pub use net::{NetworkWeights, PrecodeOptions};
pub use resample::{FilterKind, Precision};
pub use scale::ScaleFactor;

//! Server-side video precoding pipeline.
//!
//! Reads Y4M sources, precodes each GOP into several resolutions with the
//! network in [`dvp_core`], picks one resolution per GOP and bitrate by
//! measuring real encodes, and writes the chosen encodes plus a JSON
//! manifest. Codecs are external programs driven through command
//! templates; [`mock::MockCodec`] stands in for them in tests.

pub mod cache;
pub mod codec;
pub mod config;
pub mod curves;
pub mod dvpw;
pub mod mock;
pub mod pipeline;
pub mod select;
pub mod vmaf;
pub mod y4m;

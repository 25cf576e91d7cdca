//! Per-GOP precoding mode selection against a real (or mock) codec.
//!
//! Step 1 encodes the footprinted GOP once per scale with the production
//! VBV settings and measures one (rate, MSE) point per scale. Step 2 prunes
//! those points (monotonicity, then lower convex hull). Step 3 re-encodes
//! the survivors in CBR at their mean rate and keeps the lowest distortion.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use dvp_core::metrics::sequence_mse;
use dvp_core::mode::{self, ModeDecision, RdPoint};
use dvp_core::net::precode_frame;
use dvp_core::resample::{downscale_frame, upscale_frame};
use dvp_core::{footprint, FilterKind, FrameRate, GopSegment, NetworkWeights, PlanarFrame, PrecodeOptions, ScaleFactor};
use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{Codec, CodecError, CodecName, EncodeJob, EncodeResult, RateControl};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("no scales to evaluate")]
    NoScales,
    #[error("precoding failed: {0}")]
    Precode(#[source] dvp_core::Error),
    #[error("scale {scale}: {source}")]
    Codec {
        scale: ScaleFactor,
        #[source]
        source: CodecError,
    },
    #[error("scale {scale}: {source}")]
    Measure {
        scale: ScaleFactor,
        #[source]
        source: dvp_core::Error,
    },
    #[error(transparent)]
    Core(#[from] dvp_core::Error),
}

impl SelectError {
    /// Scale whose evaluation failed, when the failure is tied to one.
    pub fn scale(&self) -> Option<ScaleFactor> {
        match self {
            SelectError::Codec { scale, .. } | SelectError::Measure { scale, .. } => Some(*scale),
            _ => None,
        }
    }
}

/// Precoded frames of one scale.
pub type Handle = Arc<Vec<PlanarFrame>>;

/// How GOPs are brought down to each scale.
#[derive(Debug, Clone)]
pub enum Downscaler {
    Network {
        weights: Arc<NetworkWeights>,
        opts: PrecodeOptions,
    },
    Linear {
        luma: FilterKind,
        chroma: FilterKind,
    },
}

impl Downscaler {
    pub fn network(weights: NetworkWeights) -> Self {
        Downscaler::Network {
            weights: Arc::new(weights),
            opts: PrecodeOptions::default(),
        }
    }

    /// Every requested scale of every frame, frames in parallel.
    pub fn precode(&self, frames: &[PlanarFrame], scales: &[ScaleFactor]) -> Result<BTreeMap<ScaleFactor, Vec<PlanarFrame>>, dvp_core::Error> {
        let per_frame: Vec<BTreeMap<ScaleFactor, PlanarFrame>> = frames
            .par_iter()
            .map(|f| match self {
                Downscaler::Network { weights, opts } => precode_frame(f, weights, scales, opts).map(|o| o.frames),
                Downscaler::Linear { luma, chroma } => scales
                    .iter()
                    .map(|&s| downscale_frame(f, s, *luma, *chroma).map(|d| (s, d)))
                    .collect(),
            })
            .collect::<Result<_, _>>()?;
        let mut out: BTreeMap<ScaleFactor, Vec<PlanarFrame>> = scales.iter().map(|&s| (s, Vec::with_capacity(frames.len()))).collect();
        for mut m in per_frame {
            for (s, v) in out.iter_mut() {
                v.push(m.remove(s).expect("precoder returns every requested scale"));
            }
        }
        Ok(out)
    }
}

/// Unique file names for intermediate bitstreams.
#[derive(Debug)]
pub struct Scratch {
    dir: PathBuf,
    next: AtomicU64,
}

impl Scratch {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Scratch {
            dir,
            next: AtomicU64::new(0),
        })
    }

    pub fn path(&self, stem: &str, codec: CodecName) -> PathBuf {
        let n = self.next.fetch_add(1, Ordering::Relaxed);
        self.dir.join(format!("{stem}-{n}.{}", bitstream_ext(codec)))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

pub fn bitstream_ext(codec: CodecName) -> &'static str {
    match codec {
        CodecName::H264 => "264",
        CodecName::Hevc => "265",
        CodecName::Vp9 => "ivf",
        CodecName::Mock => "bin",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectConfig {
    pub scales: Vec<ScaleFactor>,
    /// Rung bitrate, bits/s.
    pub target_rate: u64,
    pub footprint_n: usize,
    pub upscaler: FilterKind,
    /// Remap survivors on the whole GOP instead of the footprint.
    pub full_remap: bool,
}

/// Encode, decode, upscale to `native` and compare against `reference`.
/// Returns the encode and its distortion (MSE, equal weight per plane).
pub fn encode_and_measure(
    codec: &dyn Codec,
    scratch: &Scratch,
    frames: &[PlanarFrame],
    reference: &[PlanarFrame],
    fps: FrameRate,
    rc: RateControl,
    scale: ScaleFactor,
    upscaler: FilterKind,
) -> Result<(EncodeResult, f64), SelectError> {
    let codec_err = |source| SelectError::Codec { scale, source };
    let job = EncodeJob { frames, fps, rc, scale };
    let out = scratch.path(&format!("s{}-{}", scale.num(), scale.den()), codec.profile().name);
    let result = codec.encode(&job, &out).map_err(codec_err)?;
    let decoded = codec.decode(&result).map_err(codec_err)?;
    let (nw, nh) = reference[0].dims();
    let upscaled = decoded
        .iter()
        .map(|f| upscale_frame(f, nw, nh, upscaler))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| SelectError::Measure { scale, source })?;
    let d = sequence_mse(reference, &upscaled).map_err(|source| SelectError::Measure { scale, source })?;
    if result.bitstream == out {
        let _ = fs::remove_file(&out);
        let mut side = out.into_os_string();
        side.push(".src.y4m");
        let _ = fs::remove_file(side);
    }
    Ok((result, d))
}

fn footprinted(gop: &GopSegment, n: usize) -> Result<GopSegment, SelectError> {
    Ok(footprint(gop, n)?.to_segment())
}

/// Step 1: one VBV point per scale on the footprinted GOP.
pub fn extract_rd_points(
    gop: &GopSegment,
    cfg: &SelectConfig,
    down: &Downscaler,
    codec: &dyn Codec,
    scratch: &Scratch,
) -> Result<Vec<RdPoint<Handle>>, SelectError> {
    if cfg.scales.is_empty() {
        return Err(SelectError::NoScales);
    }
    let fp = footprinted(gop, cfg.footprint_n)?;
    points_on(&fp, cfg, down, codec, scratch)
}

fn points_on(
    fp: &GopSegment,
    cfg: &SelectConfig,
    down: &Downscaler,
    codec: &dyn Codec,
    scratch: &Scratch,
) -> Result<Vec<RdPoint<Handle>>, SelectError> {
    let precoded = down.precode(&fp.frames, &cfg.scales).map_err(SelectError::Precode)?;
    let precoded: Vec<(ScaleFactor, Handle)> = precoded.into_iter().map(|(s, v)| (s, Arc::new(v))).collect();
    precoded
        .par_iter()
        .map(|(s, h)| {
            let rc = codec
                .profile()
                .vbv(*s, cfg.target_rate)
                .map_err(|source| SelectError::Codec { scale: *s, source })?;
            let (res, d) = encode_and_measure(codec, scratch, h, &fp.frames, fp.fps, rc, *s, cfg.upscaler)?;
            Ok(RdPoint {
                rate: res.measured_rate,
                distortion: d,
                handle: Arc::clone(h),
                scale: *s,
            })
        })
        .collect()
}

/// Step 3: re-encode the survivors at their mean rate in CBR, re-measure
/// against `reference`, and keep the lowest distortion (larger scale on
/// ties). `log` is the stage log from pruning and gets the remapped points.
pub fn cbr_remap_and_select(
    survivors: Vec<RdPoint<Handle>>,
    mut log: mode::StageLog,
    reference: &GopSegment,
    codec: &dyn Codec,
    upscaler: FilterKind,
    scratch: &Scratch,
) -> Result<ModeDecision<Handle>, SelectError> {
    let cbr = mode::cbr_rate(&survivors)?;
    log.cbr_rate = cbr;
    let rc = RateControl::Cbr {
        bitrate: (cbr.round() as u64).max(1),
    };
    let remapped: Vec<RdPoint<Handle>> = survivors
        .into_par_iter()
        .map(|p| {
            let (res, d) = encode_and_measure(codec, scratch, &p.handle, &reference.frames, reference.fps, rc, p.scale, upscaler)?;
            Ok(RdPoint {
                rate: res.measured_rate,
                distortion: d,
                ..p
            })
        })
        .collect::<Result<_, SelectError>>()?;
    log.remapped_points = remapped.iter().map(RdPoint::summary).collect();
    let best = mode::argmin_distortion(&remapped).ok_or(dvp_core::Error::EmptyInput)?;
    let chosen = remapped.into_iter().nth(best).expect("argmin index in range");
    Ok(ModeDecision {
        selected: chosen.scale,
        selected_handle: chosen.handle,
        stage_log: log,
    })
}

/// Full selection for one GOP and rung.
pub fn select_mode(
    gop: &GopSegment,
    cfg: &SelectConfig,
    down: &Downscaler,
    codec: &dyn Codec,
    scratch: &Scratch,
) -> Result<ModeDecision<Handle>, SelectError> {
    let points = extract_rd_points(gop, cfg, down, codec, scratch)?;
    let (survivors, log) = mode::prune(points)?;
    if cfg.full_remap {
        let scales: Vec<ScaleFactor> = survivors.iter().map(|p| p.scale).collect();
        let mut full = down.precode(&gop.frames, &scales).map_err(SelectError::Precode)?;
        let survivors = survivors
            .into_iter()
            .map(|p| RdPoint {
                handle: Arc::new(full.remove(&p.scale).expect("precoded survivor")),
                ..p
            })
            .collect();
        cbr_remap_and_select(survivors, log, gop, codec, cfg.upscaler, scratch)
    } else {
        let fp = footprinted(gop, cfg.footprint_n)?;
        cbr_remap_and_select(survivors, log, &fp, codec, cfg.upscaler, scratch)
    }
}

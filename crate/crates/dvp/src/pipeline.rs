//! Bitrate ladder: mode selection for every (GOP, rung) cell, the
//! production encode at the chosen scale, manifest and quality report.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dvp_core::metrics::{sequence_quality, QualityReport};
use dvp_core::mode::{RdSummary, StageLog};
use dvp_core::resample::upscale_frame;
use dvp_core::{segment_gops, FilterKind, FrameRate, GopSegment, PlanarFrame, ScaleFactor};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::codec::{Codec, CodecError, EncodeJob};
use crate::select::{select_mode, Downscaler, Scratch, SelectConfig, SelectError};
use crate::vmaf::{VmafStatus, VmafTool};
use crate::y4m::{self, Y4mError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid ladder configuration: {0}")]
    Config(String),
    #[error("cannot read source: {0}")]
    Source(#[from] Y4mError),
    #[error(transparent)]
    Core(#[from] dvp_core::Error),
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Failure of one cell; other cells still run.
#[derive(Debug, Error)]
pub enum CellError {
    #[error("mode selection: {0}")]
    Select(#[from] SelectError),
    #[error("production encode at {scale}: {source}")]
    Encode {
        scale: ScaleFactor,
        #[source]
        source: CodecError,
    },
    #[error("{0}")]
    Core(#[from] dvp_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct LadderConfig {
    /// Bits/s, strictly increasing.
    pub bitrates: Vec<u64>,
    pub scales: Vec<ScaleFactor>,
    pub gop_len: usize,
    pub footprint_n: usize,
    pub upscaler: FilterKind,
    pub full_remap: bool,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/manifest.json`.
    pub manifest_path: Option<PathBuf>,
    /// Worker threads; 0 picks the number of CPUs.
    pub jobs: usize,
    pub vmaf: Option<VmafTool>,
}

impl LadderConfig {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        LadderConfig {
            bitrates: vec![500_000, 1_500_000, 5_000_000],
            scales: dvp_core::scale::ALL_MODES.to_vec(),
            gop_len: 90,
            footprint_n: 5,
            upscaler: FilterKind::Bilinear,
            full_remap: false,
            output_dir: output_dir.into(),
            manifest_path: None,
            jobs: 0,
            vmaf: None,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.bitrates.is_empty() || self.bitrates.contains(&0) {
            return bad("bitrates must be non-empty and positive");
        }
        if self.bitrates.windows(2).any(|w| w[1] <= w[0]) {
            return bad("bitrates must be strictly increasing");
        }
        if self.scales.is_empty() {
            return bad("no scales");
        }
        if self.scales.iter().any(|&s| s < ScaleFactor::ONE) {
            return bad("scales must be >= 1");
        }
        if self.gop_len == 0 || self.footprint_n == 0 {
            return bad("gop length and footprint stride must be >= 1");
        }
        Ok(())
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest_path.clone().unwrap_or_else(|| self.output_dir.join("manifest.json"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub gop_index: usize,
    pub start_frame: usize,
    pub frame_count: usize,
    pub bitrate: u64,
    pub scale: String,
    pub encoded_width: usize,
    pub encoded_height: usize,
    pub segment_uri: String,
    pub codec: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestError {
    pub gop_index: usize,
    pub start_frame: usize,
    pub frame_count: usize,
    pub bitrate: u64,
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_scale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum ManifestRecord {
    Entry(ManifestEntry),
    Error(ManifestError),
}

impl ManifestRecord {
    pub fn key(&self) -> (usize, u64) {
        match self {
            ManifestRecord::Entry(e) => (e.gop_index, e.bitrate),
            ManifestRecord::Error(e) => (e.gop_index, e.bitrate),
        }
    }

    pub fn entry(&self) -> Option<&ManifestEntry> {
        match self {
            ManifestRecord::Entry(e) => Some(e),
            ManifestRecord::Error(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointJson {
    pub scale: String,
    pub rate: f64,
    pub distortion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StagesJson {
    pub all_points: Vec<PointJson>,
    pub after_monotone: Vec<PointJson>,
    pub after_hull: Vec<PointJson>,
    pub cbr_rate: f64,
    pub remapped_points: Vec<PointJson>,
}

impl From<&StageLog> for StagesJson {
    fn from(l: &StageLog) -> Self {
        let conv = |v: &[RdSummary]| {
            v.iter()
                .map(|p| PointJson {
                    scale: p.scale.to_string(),
                    rate: p.rate,
                    distortion: p.distortion,
                })
                .collect()
        };
        StagesJson {
            all_points: conv(&l.all_points),
            after_monotone: conv(&l.after_monotone),
            after_hull: conv(&l.after_hull),
            cbr_rate: l.cbr_rate,
            remapped_points: conv(&l.remapped_points),
        }
    }
}

/// Quality of one production encode, measured after decode and upscale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellQuality {
    pub gop_index: usize,
    pub bitrate: u64,
    pub scale: String,
    pub measured_rate: f64,
    pub sequence_psnr: f64,
    pub sequence_mse: f64,
    pub per_frame_psnr: Vec<f64>,
    pub sequence_vmaf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vmaf_unavailable: Option<String>,
    pub stages: StagesJson,
}

#[derive(Debug, Clone)]
pub struct LadderOutput {
    /// Sorted by GOP index, then bitrate.
    pub records: Vec<ManifestRecord>,
    pub quality: Vec<CellQuality>,
    pub manifest_path: PathBuf,
    pub quality_path: PathBuf,
}

/// Read a Y4M file, or raw yuv420p when `raw` gives `(width, height, fps)`.
pub fn load_source(path: &Path, raw: Option<(usize, usize, FrameRate)>) -> Result<(Vec<PlanarFrame>, FrameRate), PipelineError> {
    let file = fs::File::open(path)?;
    match raw {
        Some((w, h, fps)) => Ok((y4m::read_raw_yuv(file, w, h)?, fps)),
        None => {
            let (hdr, frames) = y4m::read_y4m(file)?;
            Ok((frames, hdr.fps))
        }
    }
}

pub fn run_ladder_frames(
    frames: Vec<PlanarFrame>,
    fps: FrameRate,
    cfg: &LadderConfig,
    down: &Downscaler,
    codec: &dyn Codec,
) -> Result<LadderOutput, PipelineError> {
    let gops = segment_gops(frames, cfg.gop_len, fps)?;
    run_ladder(&gops, cfg, down, codec)
}

pub fn run_ladder(gops: &[GopSegment], cfg: &LadderConfig, down: &Downscaler, codec: &dyn Codec) -> Result<LadderOutput, PipelineError> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out.join("segments"))?;
    let scratch = Scratch::new(out.join("work"))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build()?;

    let cells: Vec<(&GopSegment, u64)> = gops.iter().flat_map(|g| cfg.bitrates.iter().map(move |&b| (g, b))).collect();
    let results: Vec<(ManifestRecord, Option<CellQuality>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(gop, bitrate)| match run_cell(gop, bitrate, cfg, down, codec, &scratch) {
                Ok((entry, q)) => (ManifestRecord::Entry(entry), Some(q)),
                Err(e) => {
                    log::warn!("GOP {} at {} bit/s failed: {e}", gop.index, bitrate);
                    let failed_scale = match &e {
                        CellError::Select(s) => s.scale(),
                        CellError::Encode { scale, .. } => Some(*scale),
                        _ => None,
                    };
                    (
                        ManifestRecord::Error(ManifestError {
                            gop_index: gop.index,
                            start_frame: gop.start_frame,
                            frame_count: gop.len(),
                            bitrate,
                            error: e.to_string(),
                            failed_scale: failed_scale.map(|s| s.to_string()),
                        }),
                        None,
                    )
                }
            })
            .collect()
    });

    let mut records = Vec::with_capacity(results.len());
    let mut quality = Vec::new();
    for (r, q) in results {
        records.push(r);
        quality.extend(q);
    }
    records.sort_by_key(ManifestRecord::key);
    quality.sort_by_key(|q| (q.gop_index, q.bitrate));

    let manifest_path = cfg.manifest_path();
    if let Some(parent) = manifest_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&manifest_path, serde_json::to_string_pretty(&records)? + "\n")?;
    let quality_path = out.join("quality.json");
    fs::write(&quality_path, serde_json::to_string_pretty(&quality)? + "\n")?;
    Ok(LadderOutput {
        records,
        quality,
        manifest_path,
        quality_path,
    })
}

fn run_cell(
    gop: &GopSegment,
    bitrate: u64,
    cfg: &LadderConfig,
    down: &Downscaler,
    codec: &dyn Codec,
    scratch: &Scratch,
) -> Result<(ManifestEntry, CellQuality), CellError> {
    let sel = SelectConfig {
        scales: cfg.scales.clone(),
        target_rate: bitrate,
        footprint_n: cfg.footprint_n,
        upscaler: cfg.upscaler,
        full_remap: cfg.full_remap,
    };
    let decision = select_mode(gop, &sel, down, codec, scratch)?;
    let s = decision.selected;
    log::info!("GOP {} at {} bit/s: s* = {}", gop.index, bitrate, s);

    let frames: Arc<Vec<PlanarFrame>> = if decision.selected_handle.len() == gop.len() {
        decision.selected_handle
    } else {
        let mut m = down.precode(&gop.frames, &[s]).map_err(SelectError::Precode)?;
        Arc::new(m.remove(&s).expect("precoded scale"))
    };
    let enc_err = |source| CellError::Encode { scale: s, source };
    let rc = codec.profile().vbv(s, bitrate).map_err(enc_err)?;
    let job = EncodeJob {
        frames: &frames,
        fps: gop.fps,
        rc,
        scale: s,
    };
    let codec_name = codec.profile().name;
    let result = codec.encode(&job, &scratch.path("final", codec_name)).map_err(enc_err)?;
    let decoded = codec.decode(&result).map_err(enc_err)?;
    let (nw, nh) = gop.dims();
    let upscaled = decoded.iter().map(|f| upscale_frame(f, nw, nh, cfg.upscaler)).collect::<Result<Vec<_>, _>>()?;
    let report: QualityReport = sequence_quality(&gop.frames, &upscaled)?;
    let mse = report.per_frame.iter().map(|q| q.mse_avg()).sum::<f64>() / report.per_frame.len() as f64;

    let ext = crate::select::bitstream_ext(codec_name);
    let name = format!("g{:05}_b{}_s{}-{}.{ext}", gop.index, bitrate, s.num(), s.den());
    let seg_rel = format!("segments/{name}");
    let seg_abs = cfg.output_dir.join(&seg_rel);
    fs::copy(&result.bitstream, &seg_abs)?;
    let mut side = result.bitstream.clone().into_os_string();
    side.push(".src.y4m");
    if Path::new(&side).exists() {
        let mut dst = seg_abs.clone().into_os_string();
        dst.push(".src.y4m");
        fs::copy(&side, dst)?;
    }
    if result.bitstream.starts_with(scratch.dir()) {
        let _ = fs::remove_file(&result.bitstream);
        let _ = fs::remove_file(&side);
    }

    let (mut vmaf, mut vmaf_unavailable) = (None, None);
    if let Some(tool) = &cfg.vmaf {
        let stem = scratch.path(&format!("vmaf-g{}-b{}", gop.index, bitrate), codec_name);
        let (r, d, o) = (stem.with_extension("ref.yuv"), stem.with_extension("dis.yuv"), stem.with_extension("json"));
        y4m::write_raw_yuv(fs::File::create(&r)?, &gop.frames).map_err(|e| std::io::Error::other(e.to_string()))?;
        y4m::write_raw_yuv(fs::File::create(&d)?, &upscaled).map_err(|e| std::io::Error::other(e.to_string()))?;
        match tool.status(&r, &d, nw, nh, &o) {
            Ok(VmafStatus::Score(v)) => vmaf = Some(v),
            Ok(VmafStatus::Unavailable(why)) => vmaf_unavailable = Some(why),
            Err(e) => vmaf_unavailable = Some(e.to_string()),
        }
        for p in [r, d, o] {
            let _ = fs::remove_file(p);
        }
    }

    let (ew, eh) = result.dims();
    let entry = ManifestEntry {
        gop_index: gop.index,
        start_frame: gop.start_frame,
        frame_count: gop.len(),
        bitrate,
        scale: s.to_string(),
        encoded_width: ew,
        encoded_height: eh,
        segment_uri: seg_rel,
        codec: codec_name.to_string(),
    };
    let quality = CellQuality {
        gop_index: gop.index,
        bitrate,
        scale: s.to_string(),
        measured_rate: result.measured_rate,
        sequence_psnr: report.sequence_psnr,
        sequence_mse: mse,
        per_frame_psnr: report.per_frame.iter().map(|q| q.psnr_avg).collect(),
        sequence_vmaf: vmaf,
        vmaf_unavailable,
        stages: StagesJson::from(&decision.stage_log),
    };
    Ok((entry, quality))
}

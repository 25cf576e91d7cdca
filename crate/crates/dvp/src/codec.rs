//! Encoder/decoder drivers.
//!
//! External encoders are plain command templates run as subprocesses: the
//! encoder reads Y4M on stdin and writes the bitstream to `{OUT}`, the
//! decoder reads `{IN}` and writes Y4M to stdout.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use dvp_core::scale::ALL_MODES;
use dvp_core::{FrameRate, PlanarFrame, ScaleFactor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::y4m::{self, Y4mError, Y4mHeader};

pub const TIMEOUT_ENV: &str = "DVP_CODEC_TIMEOUT_SECS";
const DEFAULT_TIMEOUT_SECS: u64 = 3600;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("unknown codec {0:?}")]
    UnknownCodec(String),
    #[error("no crf configured for scale {0}")]
    NoCrf(ScaleFactor),
    #[error("template {template:?} leaves placeholder {{{name}}} unresolved")]
    UnresolvedPlaceholder { template: String, name: String },
    #[error("template {0:?} could not be parsed")]
    BadTemplate(String),
    #[error("empty frame list")]
    NoFrames,
    #[error("frames do not share one geometry")]
    MixedGeometry,
    #[error("cannot start `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("`{program}` exited with {status}: {stderr}")]
    ProcessFailed {
        program: String,
        status: String,
        stderr: String,
    },
    #[error("`{program}` did not finish within {secs} s")]
    Timeout { program: String, secs: u64 },
    #[error("decoded {found} frames, encoded {expected}")]
    FrameCountMismatch { expected: usize, found: usize },
    #[error("decoded geometry {found:?}, encoded {expected:?}")]
    GeometryMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("malformed bitstream: {0}")]
    Bitstream(String),
    #[error(transparent)]
    Y4m(#[from] Y4mError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecName {
    H264,
    Hevc,
    Vp9,
    Mock,
}

impl CodecName {
    pub fn as_str(self) -> &'static str {
        match self {
            CodecName::H264 => "h264",
            CodecName::Hevc => "hevc",
            CodecName::Vp9 => "vp9",
            CodecName::Mock => "mock",
        }
    }
}

impl fmt::Display for CodecName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CodecName {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "h264" | "avc" | "x264" | "libx264" => Ok(CodecName::H264),
            "hevc" | "h265" | "x265" | "libx265" => Ok(CodecName::Hevc),
            "vp9" | "libvpx-vp9" => Ok(CodecName::Vp9),
            "mock" => Ok(CodecName::Mock),
            _ => Err(CodecError::UnknownCodec(s.to_string())),
        }
    }
}

/// Rate control of one encode. Rates in bits per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RateControl {
    Vbv { crf: u32, maxrate: u64, bufsize: u64 },
    Cbr { bitrate: u64 },
}

impl RateControl {
    /// Rate cap of the job.
    pub fn target(&self) -> u64 {
        match *self {
            RateControl::Vbv { maxrate, .. } => maxrate,
            RateControl::Cbr { bitrate } => bitrate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub encode_vbv: String,
    pub encode_cbr: String,
    pub decode: String,
}

const FFMPEG_IN: &str = "ffmpeg -hide_banner -loglevel error -nostdin -y -f yuv4mpegpipe -i pipe:0";
const FFMPEG_DECODE: &str = "ffmpeg -hide_banner -loglevel error -nostdin -i {IN} -f yuv4mpegpipe -pix_fmt yuv420p pipe:1";

impl Templates {
    pub fn ffmpeg(name: CodecName) -> Self {
        let (vbv, cbr) = match name {
            CodecName::H264 => (
                "-c:v libx264 -preset {PRESET} -crf {CRF} -maxrate {MAXRATE} -bufsize {BUFSIZE} -f h264 {OUT}",
                "-c:v libx264 -preset {PRESET} -b:v {BITRATE} -minrate {BITRATE} -maxrate {BITRATE} -bufsize {BITRATE} -x264-params nal-hrd=cbr -f h264 {OUT}",
            ),
            CodecName::Hevc => (
                "-c:v libx265 -preset {PRESET} -crf {CRF} -maxrate {MAXRATE} -bufsize {BUFSIZE} -x265-params log-level=error -f hevc {OUT}",
                "-c:v libx265 -preset {PRESET} -b:v {BITRATE} -maxrate {BITRATE} -bufsize {BITRATE} -x265-params log-level=error -f hevc {OUT}",
            ),
            CodecName::Vp9 => (
                "-c:v libvpx-vp9 -speed {SPEED} -b:v {MAXRATE} -minrate {MINRATE} -maxrate {MAXRATE} -bufsize {BUFSIZE} -f ivf {OUT}",
                "-c:v libvpx-vp9 -speed {SPEED} -b:v {BITRATE} -minrate {BITRATE} -maxrate {BITRATE} -f ivf {OUT}",
            ),
            CodecName::Mock => ("", ""),
        };
        Templates {
            encode_vbv: format!("{FFMPEG_IN} {vbv}"),
            encode_cbr: format!("{FFMPEG_IN} {cbr}"),
            decode: FFMPEG_DECODE.to_string(),
        }
    }
}

/// Encoder configuration of one codec.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecProfile {
    pub name: CodecName,
    pub preset: String,
    pub crf_by_scale: BTreeMap<ScaleFactor, u32>,
    /// libvpx `-speed` per scale; empty for other codecs.
    pub speed_by_scale: BTreeMap<ScaleFactor, u32>,
    /// vp9 only: `maxrate / minrate`.
    pub vp9_rate_spread: f64,
    pub templates: Templates,
}

fn table(v: impl Fn(ScaleFactor) -> u32) -> BTreeMap<ScaleFactor, u32> {
    ALL_MODES.iter().map(|&s| (s, v(s))).collect()
}

impl CodecProfile {
    /// Defaults: crf 23 up to s = 3/2 and 18 from s = 2; vp9 speed 1 on
    /// downscaled encodes and 2 at native resolution.
    pub fn default_for(name: CodecName) -> Self {
        let two = ScaleFactor::new(2, 1).unwrap();
        let crf = table(|s| if s >= two { 18 } else { 23 });
        let speed_by_scale = if name == CodecName::Vp9 {
            table(|s| if s.is_native() { 2 } else { 1 })
        } else {
            BTreeMap::new()
        };
        CodecProfile {
            name,
            preset: match name {
                CodecName::H264 | CodecName::Hevc => "slower".to_string(),
                _ => String::new(),
            },
            crf_by_scale: crf,
            speed_by_scale,
            vp9_rate_spread: 1.45,
            templates: Templates::ffmpeg(name),
        }
    }

    /// Scales the profile is meant to be searched over by default. hevc and
    /// vp9 have no entries below 4/3 in the reference CRF table.
    pub fn default_scales(&self) -> Vec<ScaleFactor> {
        match self.name {
            CodecName::Hevc | CodecName::Vp9 => {
                ALL_MODES.iter().copied().filter(|&s| s >= ScaleFactor::new(4, 3).unwrap()).collect()
            }
            _ => ALL_MODES.to_vec(),
        }
    }

    pub fn crf_for(&self, s: ScaleFactor) -> Result<u32, CodecError> {
        self.crf_by_scale.get(&s).copied().ok_or(CodecError::NoCrf(s))
    }

    /// Production rate control: crf from the table, maxrate = bufsize = target.
    pub fn vbv(&self, s: ScaleFactor, target: u64) -> Result<RateControl, CodecError> {
        Ok(RateControl::Vbv {
            crf: self.crf_for(s)?,
            maxrate: target,
            bufsize: target,
        })
    }

    /// Placeholder values of one job.
    pub fn placeholders(&self, job: &EncodeJob<'_>, out: &Path) -> Result<BTreeMap<&'static str, String>, CodecError> {
        let (w, h) = job.dims()?;
        let mut v = BTreeMap::new();
        v.insert("W", w.to_string());
        v.insert("H", h.to_string());
        v.insert("FPS", format!("{}/{}", job.fps.num, job.fps.den));
        v.insert("OUT", out.display().to_string());
        v.insert("PRESET", self.preset.clone());
        if let Some(sp) = self.speed_by_scale.get(&job.scale) {
            v.insert("SPEED", sp.to_string());
        }
        match job.rc {
            RateControl::Vbv { crf, maxrate, bufsize } => {
                v.insert("CRF", crf.to_string());
                v.insert("MAXRATE", maxrate.to_string());
                v.insert("BUFSIZE", bufsize.to_string());
                v.insert("MINRATE", ((maxrate as f64 / self.vp9_rate_spread).round() as u64).to_string());
            }
            RateControl::Cbr { bitrate } => {
                v.insert("BITRATE", bitrate.to_string());
            }
        }
        Ok(v)
    }
}

/// Split a template into argv and substitute `{NAME}` placeholders. Any
/// brace pair left over is an error.
pub fn render_template(template: &str, values: &BTreeMap<&'static str, String>) -> Result<Vec<String>, CodecError> {
    let words = shell_words::split(template).map_err(|_| CodecError::BadTemplate(template.to_string()))?;
    if words.is_empty() {
        return Err(CodecError::BadTemplate(template.to_string()));
    }
    words
        .into_iter()
        .map(|word| {
            let mut out = String::with_capacity(word.len());
            let mut rest = word.as_str();
            while let Some(open) = rest.find('{') {
                out.push_str(&rest[..open]);
                let after = &rest[open + 1..];
                let close = after.find('}').ok_or_else(|| CodecError::BadTemplate(template.to_string()))?;
                let name = &after[..close];
                match values.get(name) {
                    Some(val) => out.push_str(val),
                    None => {
                        return Err(CodecError::UnresolvedPlaceholder {
                            template: template.to_string(),
                            name: name.to_string(),
                        })
                    }
                }
                rest = &after[close + 1..];
            }
            out.push_str(rest);
            Ok(out)
        })
        .collect()
}

/// Frames to encode plus their rate control.
#[derive(Debug, Clone, Copy)]
pub struct EncodeJob<'a> {
    pub frames: &'a [PlanarFrame],
    pub fps: FrameRate,
    pub rc: RateControl,
    /// Precoding mode the frames were produced with.
    pub scale: ScaleFactor,
}

impl EncodeJob<'_> {
    pub fn dims(&self) -> Result<(usize, usize), CodecError> {
        let first = self.frames.first().ok_or(CodecError::NoFrames)?;
        if self.frames.iter().any(|f| f.dims() != first.dims()) {
            return Err(CodecError::MixedGeometry);
        }
        Ok(first.dims())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeResult {
    pub bitstream: PathBuf,
    pub bytes: u64,
    /// `8 · bytes · fps / frame_count`.
    pub measured_rate: f64,
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
    pub fps: FrameRate,
}

impl EncodeResult {
    pub fn from_file(bitstream: PathBuf, frame_count: usize, dims: (usize, usize), fps: FrameRate) -> Result<Self, CodecError> {
        let bytes = std::fs::metadata(&bitstream)?.len();
        Ok(EncodeResult {
            measured_rate: measured_rate(bytes, fps, frame_count),
            bitstream,
            bytes,
            frame_count,
            width: dims.0,
            height: dims.1,
            fps,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Decoded output must match the encoded frame count and geometry.
    pub fn check_decoded(&self, frames: &[PlanarFrame]) -> Result<(), CodecError> {
        if frames.len() != self.frame_count {
            return Err(CodecError::FrameCountMismatch {
                expected: self.frame_count,
                found: frames.len(),
            });
        }
        if let Some(f) = frames.iter().find(|f| f.dims() != self.dims()) {
            return Err(CodecError::GeometryMismatch {
                expected: self.dims(),
                found: f.dims(),
            });
        }
        Ok(())
    }
}

pub fn measured_rate(bytes: u64, fps: FrameRate, frame_count: usize) -> f64 {
    8.0 * bytes as f64 * fps.as_f64() / frame_count as f64
}

pub trait Codec: Send + Sync {
    fn profile(&self) -> &CodecProfile;

    /// Encode `job` into the file `out`.
    fn encode(&self, job: &EncodeJob<'_>, out: &Path) -> Result<EncodeResult, CodecError>;

    fn decode(&self, result: &EncodeResult) -> Result<Vec<PlanarFrame>, CodecError>;
}

impl<C: Codec + ?Sized> Codec for std::sync::Arc<C> {
    fn profile(&self) -> &CodecProfile {
        (**self).profile()
    }

    fn encode(&self, job: &EncodeJob<'_>, out: &Path) -> Result<EncodeResult, CodecError> {
        (**self).encode(job, out)
    }

    fn decode(&self, result: &EncodeResult) -> Result<Vec<PlanarFrame>, CodecError> {
        (**self).decode(result)
    }
}

impl<C: Codec + ?Sized> Codec for Box<C> {
    fn profile(&self) -> &CodecProfile {
        (**self).profile()
    }

    fn encode(&self, job: &EncodeJob<'_>, out: &Path) -> Result<EncodeResult, CodecError> {
        (**self).encode(job, out)
    }

    fn decode(&self, result: &EncodeResult) -> Result<Vec<PlanarFrame>, CodecError> {
        (**self).decode(result)
    }
}

/// Subprocess codec driven by the profile's templates.
#[derive(Debug, Clone)]
pub struct TemplateCodec {
    pub profile: CodecProfile,
    pub timeout: Duration,
}

impl TemplateCodec {
    pub fn new(profile: CodecProfile) -> Self {
        let secs = std::env::var(TIMEOUT_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u64>().ok())
            .unwrap_or(DEFAULT_TIMEOUT_SECS);
        TemplateCodec {
            profile,
            timeout: Duration::from_secs(secs),
        }
    }
}

impl Codec for TemplateCodec {
    fn profile(&self) -> &CodecProfile {
        &self.profile
    }

    fn encode(&self, job: &EncodeJob<'_>, out: &Path) -> Result<EncodeResult, CodecError> {
        let dims = job.dims()?;
        let template = match job.rc {
            RateControl::Vbv { .. } => &self.profile.templates.encode_vbv,
            RateControl::Cbr { .. } => &self.profile.templates.encode_cbr,
        };
        let argv = render_template(template, &self.profile.placeholders(job, out)?)?;
        let mut stdin = Vec::with_capacity(job.frames.iter().map(|f| f.byte_len() + 6).sum::<usize>() + 64);
        y4m::write_y4m(&mut stdin, &Y4mHeader::new(dims.0, dims.1, job.fps), job.frames)?;
        run(&argv, stdin, self.timeout)?;
        EncodeResult::from_file(out.to_path_buf(), job.frames.len(), dims, job.fps)
    }

    fn decode(&self, result: &EncodeResult) -> Result<Vec<PlanarFrame>, CodecError> {
        let mut values = BTreeMap::new();
        values.insert("IN", result.bitstream.display().to_string());
        values.insert("W", result.width.to_string());
        values.insert("H", result.height.to_string());
        values.insert("FPS", format!("{}/{}", result.fps.num, result.fps.den));
        let argv = render_template(&self.profile.templates.decode, &values)?;
        let stdout = run(&argv, Vec::new(), self.timeout)?;
        let (_, frames) = y4m::read_y4m(&stdout[..])?;
        result.check_decoded(&frames)?;
        Ok(frames)
    }
}

/// Run `argv`, feeding `stdin` and collecting stdout, with a wall-clock limit.
pub fn run(argv: &[String], stdin: Vec<u8>, timeout: Duration) -> Result<Vec<u8>, CodecError> {
    let program = argv[0].clone();
    log::debug!("running {}", shell_words::join(argv));
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| CodecError::Spawn {
            program: program.clone(),
            source,
        })?;
    let mut child_in = child.stdin.take().unwrap();
    let writer = thread::spawn(move || {
        // A child that exits early closes the pipe; its exit status reports why.
        let _ = child_in.write_all(&stdin);
    });
    let mut out_pipe = child.stdout.take().unwrap();
    let reader = thread::spawn(move || {
        let mut buf = Vec::new();
        out_pipe.read_to_end(&mut buf).map(|_| buf)
    });
    let mut err_pipe = child.stderr.take().unwrap();
    let err_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = err_pipe.read_to_end(&mut buf);
        buf
    });
    let start = Instant::now();
    let status = loop {
        if let Some(st) = child.try_wait()? {
            break st;
        }
        if start.elapsed() > timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(CodecError::Timeout {
                program,
                secs: timeout.as_secs(),
            });
        }
        thread::sleep(Duration::from_millis(5));
    };
    let _ = writer.join();
    let stdout = reader.join().expect("stdout reader panicked")?;
    let stderr = err_reader.join().expect("stderr reader panicked");
    if !status.success() {
        let text = String::from_utf8_lossy(&stderr);
        let tail: String = text.chars().rev().take(2000).collect::<Vec<_>>().into_iter().rev().collect();
        return Err(CodecError::ProcessFailed {
            program,
            status: status.to_string(),
            stderr: tail.trim().to_string(),
        });
    }
    Ok(stdout)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: u32, d: u32) -> ScaleFactor {
        ScaleFactor::new(n, d).unwrap()
    }

    #[test]
    fn crf_table() {
        let p = CodecProfile::default_for(CodecName::H264);
        assert_eq!(p.crf_for(s(2, 1)).unwrap(), 18);
        assert_eq!(p.crf_for(s(5, 4)).unwrap(), 23);
        for m in ALL_MODES {
            let want = if m >= s(2, 1) { 18 } else { 23 };
            assert_eq!(p.crf_for(m).unwrap(), want, "{m}");
            assert_eq!(CodecProfile::default_for(CodecName::Hevc).crf_for(m).unwrap(), want);
        }
        let vp9 = CodecProfile::default_for(CodecName::Vp9);
        assert_eq!(vp9.speed_by_scale[&s(3, 2)], 1);
        assert_eq!(vp9.speed_by_scale[&ScaleFactor::ONE], 2);
        assert_eq!(vp9.default_scales().len(), 7);
        assert_eq!(
            p.vbv(s(3, 1), 500_000).unwrap(),
            RateControl::Vbv {
                crf: 18,
                maxrate: 500_000,
                bufsize: 500_000
            }
        );
    }

    #[test]
    fn template_rendering() {
        let mut v = BTreeMap::new();
        v.insert("W", "64".to_string());
        v.insert("OUT", "/tmp/a b.bin".to_string());
        let argv = render_template("enc -s {W}x{W} -o {OUT} 'x y'", &v).unwrap();
        assert_eq!(argv, ["enc", "-s", "64x64", "-o", "/tmp/a b.bin", "x y"]);
        assert!(matches!(
            render_template("enc {CRF}", &v),
            Err(CodecError::UnresolvedPlaceholder { name, .. }) if name == "CRF"
        ));
        assert!(render_template("enc {W", &v).is_err());
        assert!(render_template("", &v).is_err());
    }

    #[test]
    fn vp9_minrate_spread() {
        let p = CodecProfile::default_for(CodecName::Vp9);
        let frames = [PlanarFrame::filled(8, 8, 16, 128)];
        let job = EncodeJob {
            frames: &frames,
            fps: FrameRate::default(),
            rc: p.vbv(s(2, 1), 1_450_000).unwrap(),
            scale: s(2, 1),
        };
        let v = p.placeholders(&job, Path::new("o.ivf")).unwrap();
        assert_eq!(v["MINRATE"], "1000000");
        let argv = render_template(&p.templates.encode_vbv, &v).unwrap();
        assert!(argv.windows(2).any(|w| w == ["-speed", "1"]));
    }

    #[test]
    fn measured_rate_formula() {
        assert_eq!(measured_rate(1000, FrameRate::new(30, 1), 6), 40_000.0);
    }
}

//! Deterministic stand-in codec.
//!
//! Rate model: a VBV encode spends the smaller of its `maxrate` and a
//! crf-driven "natural" rate of `crf_bpp · 2^((23 − crf)/6)` bits per pixel;
//! a CBR encode spends exactly its bitrate. The bitstream is that many bytes
//! (header plus zero padding, at most the raw frame size), and decoding adds
//! Gaussian noise of variance `V · 2^(−2·R / (P · pixels · fps))` where `R`
//! is the measured rate. A stream whose size reaches the raw payload decodes
//! losslessly. The noise seed is a hash of the content and the rate, so
//! repeated runs are identical.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use dvp_core::{FrameRate, PlanarFrame};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::codec::{Codec, CodecError, CodecName, CodecProfile, EncodeJob, EncodeResult, RateControl};
use crate::y4m::{self, Y4mHeader};

const MAGIC: &[u8; 8] = b"DVPMOCK1";
pub const HEADER_BYTES: usize = 8 + 4 * 5 + 8 + 32;

/// Per-sequence model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockKnee {
    /// Noise variance at zero rate.
    pub variance: f64,
    /// Spending this many bits per pixel divides the variance by four.
    pub bits_per_pixel: f64,
    /// Natural rate at crf 23, bits per pixel.
    pub crf_bpp: f64,
}

impl Default for MockKnee {
    fn default() -> Self {
        MockKnee {
            variance: 400.0,
            bits_per_pixel: 0.25,
            crf_bpp: 0.15,
        }
    }
}

impl MockKnee {
    /// Per-pixel noise variance at `rate` bits/s for `pixels` per frame.
    pub fn variance_at(&self, rate: f64, pixels: usize, fps: f64) -> f64 {
        self.variance * (-2.0 * rate / (self.bits_per_pixel * pixels as f64 * fps)).exp2()
    }

    pub fn natural_rate(&self, crf: u32, pixels: usize, fps: f64) -> f64 {
        self.crf_bpp * ((23.0 - crf as f64) / 6.0).exp2() * pixels as f64 * fps
    }
}

#[derive(Debug)]
pub struct MockCodec {
    pub profile: CodecProfile,
    pub knee: MockKnee,
    encodes: AtomicUsize,
    decodes: AtomicUsize,
}

impl MockCodec {
    pub fn new(knee: MockKnee) -> Self {
        MockCodec {
            profile: CodecProfile::default_for(CodecName::Mock),
            knee,
            encodes: AtomicUsize::new(0),
            decodes: AtomicUsize::new(0),
        }
    }

    pub fn encode_calls(&self) -> usize {
        self.encodes.load(Ordering::SeqCst)
    }

    pub fn decode_calls(&self) -> usize {
        self.decodes.load(Ordering::SeqCst)
    }

    /// Bits per second the model spends on `job`.
    pub fn model_rate(&self, job: &EncodeJob<'_>) -> Result<f64, CodecError> {
        let (w, h) = job.dims()?;
        let fps = job.fps.as_f64();
        Ok(match job.rc {
            RateControl::Vbv { crf, maxrate, .. } => self.knee.natural_rate(crf, w * h, fps).min(maxrate as f64),
            RateControl::Cbr { bitrate } => bitrate as f64,
        })
    }
}

fn sidecar(bitstream: &Path) -> PathBuf {
    let mut s = bitstream.as_os_str().to_owned();
    s.push(".src.y4m");
    PathBuf::from(s)
}

struct Header {
    frames: u32,
    width: u32,
    height: u32,
    fps: FrameRate,
    lossless: bool,
    rate: f64,
    seed: [u8; 32],
}

impl Header {
    fn write(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(HEADER_BYTES);
        v.extend_from_slice(MAGIC);
        for x in [self.frames, self.width, self.height, self.fps.num, self.fps.den] {
            v.extend_from_slice(&x.to_le_bytes());
        }
        let rate = if self.lossless { f64::INFINITY } else { self.rate };
        v.extend_from_slice(&rate.to_le_bytes());
        v.extend_from_slice(&self.seed);
        v
    }

    fn read(b: &[u8]) -> Result<Self, CodecError> {
        if b.len() < HEADER_BYTES || &b[..8] != MAGIC {
            return Err(CodecError::Bitstream("not a mock bitstream".into()));
        }
        let u = |i: usize| u32::from_le_bytes(b[8 + 4 * i..12 + 4 * i].try_into().unwrap());
        let rate = f64::from_le_bytes(b[28..36].try_into().unwrap());
        Ok(Header {
            frames: u(0),
            width: u(1),
            height: u(2),
            fps: FrameRate::new(u(3), u(4)),
            lossless: rate.is_infinite(),
            rate,
            seed: b[36..68].try_into().unwrap(),
        })
    }
}

impl Codec for MockCodec {
    fn profile(&self) -> &CodecProfile {
        &self.profile
    }

    fn encode(&self, job: &EncodeJob<'_>, out: &Path) -> Result<EncodeResult, CodecError> {
        self.encodes.fetch_add(1, Ordering::SeqCst);
        let dims = job.dims()?;
        let n = job.frames.len();
        let fps = job.fps.as_f64();
        let raw: usize = job.frames.iter().map(PlanarFrame::byte_len).sum();
        let wanted = (self.model_rate(job)? * n as f64 / (8.0 * fps)).round();
        let bytes = wanted.clamp(HEADER_BYTES as f64, (HEADER_BYTES + raw) as f64) as usize;
        let lossless = bytes == HEADER_BYTES + raw;

        let mut hasher = Sha256::new();
        for f in job.frames {
            for p in f.planes() {
                hasher.update(&p.data);
            }
        }
        hasher.update(bytes.to_le_bytes());
        let header = Header {
            frames: n as u32,
            width: dims.0 as u32,
            height: dims.1 as u32,
            fps: job.fps,
            lossless,
            rate: crate::codec::measured_rate(bytes as u64, job.fps, n),
            seed: hasher.finalize().into(),
        };
        let mut stream = header.write();
        stream.resize(bytes, 0);
        fs::write(out, &stream)?;
        let mut src = Vec::with_capacity(raw + 64);
        y4m::write_y4m(&mut src, &Y4mHeader::new(dims.0, dims.1, job.fps), job.frames)?;
        fs::write(sidecar(out), src)?;
        EncodeResult::from_file(out.to_path_buf(), n, dims, job.fps)
    }

    fn decode(&self, result: &EncodeResult) -> Result<Vec<PlanarFrame>, CodecError> {
        self.decodes.fetch_add(1, Ordering::SeqCst);
        let stream = fs::read(&result.bitstream)?;
        let header = Header::read(&stream)?;
        let (_, mut frames) = y4m::read_y4m(fs::File::open(sidecar(&result.bitstream))?)?;
        if frames.len() != header.frames as usize {
            return Err(CodecError::Bitstream("sidecar frame count differs from header".into()));
        }
        if !header.lossless {
            let pixels = (header.width * header.height) as usize;
            let var = self.knee.variance_at(header.rate, pixels, header.fps.as_f64());
            let normal = Normal::new(0.0, var.sqrt()).map_err(|e| CodecError::Bitstream(e.to_string()))?;
            let mut rng = ChaCha8Rng::from_seed(header.seed);
            for f in &mut frames {
                for p in f.planes_mut() {
                    for v in &mut p.data {
                        let x: f64 = normal.sample(&mut rng);
                        *v = (*v as f64 + x).round().clamp(0.0, 255.0) as u8;
                    }
                }
            }
        }
        result.check_decoded(&frames)?;
        Ok(frames)
    }
}

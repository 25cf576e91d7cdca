//! Content-addressed encode cache.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dvp_core::{FrameRate, PlanarFrame};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{Codec, CodecError, CodecProfile, EncodeJob, EncodeResult, RateControl};

/// SHA-256 of frame geometry and samples.
pub fn content_hash(frames: &[PlanarFrame]) -> String {
    let mut h = Sha256::new();
    h.update((frames.len() as u64).to_le_bytes());
    for f in frames {
        h.update((f.width as u64).to_le_bytes());
        h.update((f.height as u64).to_le_bytes());
        for p in f.planes() {
            h.update(&p.data);
        }
    }
    hex::encode(h.finalize())
}

/// Stable key over named fields. Fields are sorted before hashing, so the
/// order they are supplied in does not matter.
pub fn cache_key<K: AsRef<str>, V: AsRef<str>>(fields: impl IntoIterator<Item = (K, V)>) -> String {
    let sorted: BTreeMap<String, String> = fields
        .into_iter()
        .map(|(k, v)| (k.as_ref().to_string(), v.as_ref().to_string()))
        .collect();
    let mut h = Sha256::new();
    for (k, v) in &sorted {
        // length-prefixed so "ab"+"c" and "a"+"bc" differ
        for part in [k, v] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn rc_fields(rc: &RateControl) -> Vec<(&'static str, String)> {
    match *rc {
        RateControl::Vbv { crf, maxrate, bufsize } => vec![
            ("rc", "vbv".into()),
            ("crf", crf.to_string()),
            ("maxrate", maxrate.to_string()),
            ("bufsize", bufsize.to_string()),
        ],
        RateControl::Cbr { bitrate } => vec![("rc", "cbr".into()), ("bitrate", bitrate.to_string())],
    }
}

/// Key of one encode: content, scale, codec configuration and rate control.
pub fn job_key(job: &EncodeJob<'_>, profile: &CodecProfile, salt: &str) -> String {
    let mut fields = vec![
        ("content", content_hash(job.frames)),
        ("scale", job.scale.to_string()),
        ("fps", format!("{}/{}", job.fps.num, job.fps.den)),
        ("codec", profile.name.to_string()),
        ("preset", profile.preset.clone()),
        ("speed", profile.speed_by_scale.get(&job.scale).map(|s| s.to_string()).unwrap_or_default()),
        ("template.vbv", profile.templates.encode_vbv.clone()),
        ("template.cbr", profile.templates.encode_cbr.clone()),
        ("salt", salt.to_string()),
    ];
    fields.extend(rc_fields(&job.rc));
    cache_key(fields)
}

#[derive(Serialize, Deserialize)]
struct Meta {
    key: String,
    bytes: u64,
    frame_count: usize,
    width: usize,
    height: usize,
    fps_num: u32,
    fps_den: u32,
}

/// Wraps a codec so identical encodes are served from `dir`. Bitstreams
/// live in the cache directory; the `out` path passed to `encode` is only
/// used for its extension.
pub struct CachingCodec<C> {
    inner: C,
    dir: PathBuf,
    salt: String,
}

impl<C: Codec> CachingCodec<C> {
    pub fn new(inner: C, dir: impl Into<PathBuf>) -> Result<Self, CodecError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(CachingCodec {
            inner,
            dir,
            salt: String::new(),
        })
    }

    /// Extra key material, e.g. parameters of the wrapped codec that the
    /// profile does not capture.
    pub fn with_salt(mut self, salt: impl Into<String>) -> Self {
        self.salt = salt.into();
        self
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn lookup(&self, key: &str, bitstream: &Path) -> Option<EncodeResult> {
        let meta: Meta = serde_json::from_slice(&fs::read(self.dir.join(format!("{key}.json"))).ok()?).ok()?;
        let len = fs::metadata(bitstream).ok()?.len();
        if meta.key != key || len != meta.bytes {
            return None;
        }
        EncodeResult::from_file(
            bitstream.to_path_buf(),
            meta.frame_count,
            (meta.width, meta.height),
            FrameRate::new(meta.fps_num, meta.fps_den),
        )
        .ok()
    }
}

impl<C: Codec> Codec for CachingCodec<C> {
    fn profile(&self) -> &CodecProfile {
        self.inner.profile()
    }

    fn encode(&self, job: &EncodeJob<'_>, out: &Path) -> Result<EncodeResult, CodecError> {
        let key = job_key(job, self.inner.profile(), &self.salt);
        let ext = out.extension().and_then(|e| e.to_str()).unwrap_or("bin");
        let bitstream = self.dir.join(format!("{key}.{ext}"));
        if let Some(hit) = self.lookup(&key, &bitstream) {
            log::debug!("cache hit {key}");
            return Ok(hit);
        }
        let result = self.inner.encode(job, &bitstream)?;
        let meta = Meta {
            key: key.clone(),
            bytes: result.bytes,
            frame_count: result.frame_count,
            width: result.width,
            height: result.height,
            fps_num: result.fps.num,
            fps_den: result.fps.den,
        };
        let tmp = self.dir.join(format!("{key}.json.tmp"));
        fs::write(&tmp, serde_json::to_vec(&meta).expect("meta serialises"))?;
        fs::rename(&tmp, self.dir.join(format!("{key}.json")))?;
        Ok(result)
    }

    fn decode(&self, result: &EncodeResult) -> Result<Vec<PlanarFrame>, CodecError> {
        self.inner.decode(result)
    }
}

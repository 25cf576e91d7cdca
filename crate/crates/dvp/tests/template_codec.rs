use std::time::{Duration, Instant};

use dvp::codec::{run, Codec, CodecError, CodecName, CodecProfile, EncodeJob, RateControl, TemplateCodec};
use dvp_core::{FrameRate, PlanarFrame, ScaleFactor};

fn frames(n: usize, w: usize, h: usize) -> Vec<PlanarFrame> {
    (0..n)
        .map(|i| {
            let mut f = PlanarFrame::filled(w, h, 60, 128);
            for (k, v) in f.y.data.iter_mut().enumerate() {
                *v = (16 + (k * 7 + i * 13) % 219) as u8;
            }
            f
        })
        .collect()
}

/// Stores the Y4M it is fed and plays it back: a lossless "codec" made of `sh` and `cat`.
fn copy_codec() -> TemplateCodec {
    let mut p = CodecProfile::default_for(CodecName::H264);
    p.templates.encode_vbv = r#"sh -c 'cat > "$1"' enc {OUT}"#.into();
    p.templates.encode_cbr = r#"sh -c 'cat > "$1"; test {BITRATE} -gt 0' enc {OUT}"#.into();
    p.templates.decode = "cat {IN}".into();
    TemplateCodec::new(p)
}

#[test]
fn round_trip_through_subprocesses() {
    let dir = tempfile::tempdir().unwrap();
    let codec = copy_codec();
    let src = frames(4, 20, 14);
    let fps = FrameRate::new(25, 1);
    for rc in [codec.profile().vbv(ScaleFactor::ONE, 400_000).unwrap(), RateControl::Cbr { bitrate: 300_000 }] {
        let out = dir.path().join("a.264");
        let job = EncodeJob {
            frames: &src,
            fps,
            rc,
            scale: ScaleFactor::ONE,
        };
        let res = codec.encode(&job, &out).unwrap();
        assert_eq!(res.frame_count, 4);
        assert_eq!(res.dims(), (20, 14));
        let size = std::fs::metadata(&out).unwrap().len();
        assert_eq!(res.bytes, size);
        assert!((res.measured_rate - 8.0 * size as f64 * 25.0 / 4.0).abs() < 1e-9);
        assert_eq!(codec.decode(&res).unwrap(), src);
    }
}

#[test]
fn failing_encoder_reports_status_and_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let mut codec = copy_codec();
    codec.profile.templates.encode_vbv = "sh -c 'echo broken >&2; exit 3'".into();
    let src = frames(1, 8, 8);
    let job = EncodeJob {
        frames: &src,
        fps: FrameRate::new(30, 1),
        rc: codec.profile.vbv(ScaleFactor::ONE, 1000).unwrap(),
        scale: ScaleFactor::ONE,
    };
    match codec.encode(&job, &dir.path().join("x.264")) {
        Err(CodecError::ProcessFailed { stderr, .. }) => assert!(stderr.contains("broken")),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn decoder_frame_count_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let mut codec = copy_codec();
    let src = frames(3, 8, 8);
    let job = EncodeJob {
        frames: &src,
        fps: FrameRate::new(30, 1),
        rc: codec.profile.vbv(ScaleFactor::ONE, 1000).unwrap(),
        scale: ScaleFactor::ONE,
    };
    let mut res = codec.encode(&job, &dir.path().join("x.264")).unwrap();
    res.frame_count = 5;
    assert!(matches!(codec.decode(&res), Err(CodecError::FrameCountMismatch { expected: 5, found: 3 })));
    codec.profile.templates.decode = "cat {IN} {NOPE}".into();
    assert!(matches!(codec.decode(&res), Err(CodecError::UnresolvedPlaceholder { .. })));
}

#[test]
fn missing_program_is_a_spawn_error() {
    let argv = vec!["dvp-no-such-encoder".to_string()];
    assert!(matches!(run(&argv, Vec::new(), Duration::from_secs(5)), Err(CodecError::Spawn { .. })));
}

#[test]
fn hung_encoder_times_out() {
    let argv = vec!["sleep".to_string(), "30".to_string()];
    let t = Instant::now();
    assert!(matches!(run(&argv, Vec::new(), Duration::from_millis(300)), Err(CodecError::Timeout { .. })));
    assert!(t.elapsed() < Duration::from_secs(10));
}

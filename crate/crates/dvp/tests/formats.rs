use dvp::dvpw::{decode_weights, encode_weights};
use dvp::y4m::{read_raw_yuv, read_y4m, write_raw_yuv, write_y4m, Y4mError, Y4mHeader};
use dvp_core::{FrameRate, NetworkWeights, PlanarFrame, Plane};
use proptest::prelude::*;

fn frame(w: usize, h: usize, bytes: &[u8]) -> PlanarFrame {
    let (cw, ch) = (w.div_ceil(2), h.div_ceil(2));
    let mut it = bytes.iter().copied().cycle();
    let mut plane = |pw: usize, ph: usize| Plane::new(pw, ph, (0..pw * ph).map(|_| it.next().unwrap()).collect()).unwrap();
    let y = plane(w, h);
    let cb = plane(cw, ch);
    let cr = plane(cw, ch);
    PlanarFrame::from_planes(y, cb, cr, Default::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn y4m_round_trip(w in 1usize..24, h in 1usize..24, n in 1usize..4, fps in 1u32..61,
                      bytes in proptest::collection::vec(any::<u8>(), 1..64)) {
        let frames: Vec<PlanarFrame> = (0..n).map(|i| frame(w, h, &bytes[i % bytes.len()..])).collect();
        let mut buf = Vec::new();
        write_y4m(&mut buf, &Y4mHeader::new(w, h, FrameRate::new(fps, 1)), &frames).unwrap();
        let (hdr, back) = read_y4m(&buf[..]).unwrap();
        prop_assert_eq!((hdr.width, hdr.height, hdr.fps), (w, h, FrameRate::new(fps, 1)));
        prop_assert_eq!(&back, &frames);

        let mut raw = Vec::new();
        write_raw_yuv(&mut raw, &frames).unwrap();
        prop_assert_eq!(read_raw_yuv(&raw[..], w, h).unwrap(), frames);
    }

    #[test]
    fn dvpw_round_trip(seed in any::<u64>()) {
        let w = NetworkWeights::xavier(seed);
        let bytes = encode_weights(&w);
        let back = decode_weights(&bytes).unwrap();
        prop_assert_eq!(encode_weights(&back), bytes);
    }
}

#[test]
fn truncated_y4m_reports_the_frame() {
    let frames = vec![PlanarFrame::filled(8, 6, 10, 20); 2];
    let mut buf = Vec::new();
    write_y4m(&mut buf, &Y4mHeader::new(8, 6, FrameRate::new(30, 1)), &frames).unwrap();
    buf.truncate(buf.len() - 5);
    assert!(matches!(read_y4m(&buf[..]), Err(Y4mError::TruncatedFrame { index: 1, .. })));
}

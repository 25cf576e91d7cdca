//! Planar 8-bit 4:2:0 frames, GOP segmentation and footprint subsampling.

use alloc::vec;
use alloc::vec::Vec;

use crate::Error;

/// Nominal sample range of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PixelRange {
    #[default]
    Limited,
    Full,
}

impl PixelRange {
    pub fn luma_bounds(self) -> (u8, u8) {
        match self {
            PixelRange::Limited => (16, 235),
            PixelRange::Full => (0, 255),
        }
    }

    pub fn chroma_bounds(self) -> (u8, u8) {
        match self {
            PixelRange::Limited => (16, 240),
            PixelRange::Full => (0, 255),
        }
    }
}

/// One 8-bit sample plane, row-major, no padding.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, Error> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch("plane length != width * height"));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn clamp_in_place(&mut self, lo: u8, hi: u8) {
        for v in &mut self.data {
            *v = (*v).clamp(lo, hi);
        }
    }
}

/// Chroma plane size for a 4:2:0 luma size (ceiling division).
pub fn chroma_dims(width: usize, height: usize) -> (usize, usize) {
    (width.div_ceil(2), height.div_ceil(2))
}

/// One video frame in 8-bit 4:2:0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlanarFrame {
    pub width: usize,
    pub height: usize,
    pub y: Plane,
    pub cb: Plane,
    pub cr: Plane,
    pub range: PixelRange,
}

impl PlanarFrame {
    pub fn from_planes(y: Plane, cb: Plane, cr: Plane, range: PixelRange) -> Result<Self, Error> {
        let (cw, ch) = chroma_dims(y.width, y.height);
        for c in [&cb, &cr] {
            if c.dims() != (cw, ch) {
                return Err(Error::GeometryMismatch {
                    expected: (cw, ch),
                    found: c.dims(),
                });
            }
        }
        Ok(PlanarFrame {
            width: y.width,
            height: y.height,
            y,
            cb,
            cr,
            range,
        })
    }

    /// Uniform frame; handy in tests and as a black/grey filler.
    pub fn filled(width: usize, height: usize, luma: u8, chroma: u8) -> Self {
        let (cw, ch) = chroma_dims(width, height);
        PlanarFrame {
            width,
            height,
            y: Plane::filled(width, height, luma),
            cb: Plane::filled(cw, ch, chroma),
            cr: Plane::filled(cw, ch, chroma),
            range: PixelRange::Limited,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn planes(&self) -> [&Plane; 3] {
        [&self.y, &self.cb, &self.cr]
    }

    pub fn planes_mut(&mut self) -> [&mut Plane; 3] {
        [&mut self.y, &mut self.cb, &mut self.cr]
    }

    /// Payload size in bytes (all three planes).
    pub fn byte_len(&self) -> usize {
        self.y.data.len() + self.cb.data.len() + self.cr.data.len()
    }

    /// Clamp to the nominal range of `self.range`.
    pub fn clip_to_range(&mut self) {
        let (ylo, yhi) = self.range.luma_bounds();
        let (clo, chi) = self.range.chroma_bounds();
        self.y.clamp_in_place(ylo, yhi);
        self.cb.clamp_in_place(clo, chi);
        self.cr.clamp_in_place(clo, chi);
    }
}

/// Frames per second as an exact ratio (Y4M `F30000:1001` style).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub const fn new(num: u32, den: u32) -> Self {
        FrameRate { num, den }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

impl Default for FrameRate {
    fn default() -> Self {
        FrameRate::new(30, 1)
    }
}

/// A group of pictures: the unit of mode selection.
#[derive(Debug, Clone, PartialEq)]
pub struct GopSegment {
    pub index: usize,
    pub start_frame: usize,
    pub frames: Vec<PlanarFrame>,
    pub fps: FrameRate,
}

impl GopSegment {
    pub fn new(
        index: usize,
        start_frame: usize,
        frames: Vec<PlanarFrame>,
        fps: FrameRate,
    ) -> Result<Self, Error> {
        let first = frames.first().ok_or(Error::EmptyInput)?;
        let dims = first.dims();
        if let Some(f) = frames.iter().find(|f| f.dims() != dims) {
            return Err(Error::GeometryMismatch {
                expected: dims,
                found: f.dims(),
            });
        }
        Ok(GopSegment {
            index,
            start_frame,
            frames,
            fps,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}

/// Split a frame sequence into consecutive fixed-length GOPs; the last one
/// may be shorter.
pub fn segment_gops(
    frames: Vec<PlanarFrame>,
    gop_len: usize,
    fps: FrameRate,
) -> Result<Vec<GopSegment>, Error> {
    if gop_len == 0 {
        return Err(Error::InvalidArgument("gop_len must be >= 1"));
    }
    if frames.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = Vec::with_capacity(frames.len().div_ceil(gop_len));
    let mut rest = frames.into_iter().peekable();
    let mut start = 0;
    while rest.peek().is_some() {
        let chunk: Vec<PlanarFrame> = rest.by_ref().take(gop_len).collect();
        let n = chunk.len();
        out.push(GopSegment::new(out.len(), start, chunk, fps)?);
        start += n;
    }
    Ok(out)
}

/// Every `stride`-th frame of a GOP, starting at frame 0.
#[derive(Debug, Clone)]
pub struct FootprintView<'a> {
    pub parent: &'a GopSegment,
    pub stride: usize,
    pub frames: Vec<&'a PlanarFrame>,
}

impl FootprintView<'_> {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Owned copy of the retained frames as a GOP with the same index,
    /// start frame and frame rate.
    pub fn to_segment(&self) -> GopSegment {
        GopSegment {
            index: self.parent.index,
            start_frame: self.parent.start_frame,
            frames: self.frames.iter().map(|f| (*f).clone()).collect(),
            fps: self.parent.fps,
        }
    }
}

pub fn footprint(gop: &GopSegment, stride: usize) -> Result<FootprintView<'_>, Error> {
    if stride == 0 {
        return Err(Error::InvalidArgument("footprint stride must be >= 1"));
    }
    Ok(FootprintView {
        parent: gop,
        stride,
        frames: gop.frames.iter().step_by(stride).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numbered(n: usize) -> Vec<PlanarFrame> {
        (0..n).map(|i| PlanarFrame::filled(4, 4, i as u8, 128)).collect()
    }

    #[test]
    fn gop_segmentation() {
        let fps = FrameRate::default();
        let g = segment_gops(numbered(270), 90, fps).unwrap();
        assert_eq!(g.iter().map(GopSegment::len).collect::<Vec<_>>(), [90, 90, 90]);
        let g = segment_gops(numbered(100), 90, fps).unwrap();
        assert_eq!(g.iter().map(GopSegment::len).collect::<Vec<_>>(), [90, 10]);
        assert_eq!(g[1].start_frame, 90);
        assert_eq!(g[1].index, 1);
        let g = segment_gops(numbered(30), 30, fps).unwrap();
        assert_eq!(g.len(), 1);
        assert!(segment_gops(Vec::new(), 30, fps).is_err());
        assert!(segment_gops(numbered(3), 0, fps).is_err());
    }

    #[test]
    fn mixed_geometry_rejected() {
        let mut frames = numbered(2);
        frames.push(PlanarFrame::filled(6, 4, 0, 0));
        assert!(GopSegment::new(0, 0, frames, FrameRate::default()).is_err());
    }

    #[test]
    fn footprint_counts() {
        let gop = GopSegment::new(0, 0, numbered(90), FrameRate::default()).unwrap();
        assert_eq!(footprint(&gop, 5).unwrap().len(), 18);
        assert_eq!(footprint(&gop, 1).unwrap().len(), 90);
        let gop = GopSegment::new(0, 0, numbered(7), FrameRate::default()).unwrap();
        let v = footprint(&gop, 3).unwrap();
        let kept: Vec<u8> = v.frames.iter().map(|f| f.y.data[0]).collect();
        assert_eq!(kept, [0, 3, 6]);
        assert!(footprint(&gop, 0).is_err());
    }

    #[test]
    fn odd_dims_use_ceiling_chroma() {
        let f = PlanarFrame::filled(121, 97, 16, 128);
        assert_eq!(f.cb.dims(), (61, 49));
    }
}

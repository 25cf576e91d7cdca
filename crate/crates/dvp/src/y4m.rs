//! YUV4MPEG2 and raw yuv420p streams (8-bit 4:2:0 only).

use std::io::{self, BufRead, BufReader, Read, Write};

use dvp_core::frame::chroma_dims;
use dvp_core::{FrameRate, PixelRange, PlanarFrame, Plane};
use thiserror::Error;

const SIGNATURE: &str = "YUV4MPEG2";

#[derive(Debug, Error)]
pub enum Y4mError {
    #[error("missing YUV4MPEG2 signature")]
    MissingSignature,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported colorspace {0:?} (only 8-bit 4:2:0 is accepted)")]
    UnsupportedColorspace(String),
    #[error("malformed frame marker before frame {0}")]
    BadFrameMarker(usize),
    #[error("frame {index} truncated: expected {expected} bytes, got {got}")]
    TruncatedFrame {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("frame geometry {found:?} differs from stream geometry {expected:?}")]
    Geometry {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Stream header. Tokens other than `W`, `H`, `F`, `C` and
/// `XCOLORRANGE` are kept verbatim and re-emitted by the writer.
#[derive(Debug, Clone, PartialEq)]
pub struct Y4mHeader {
    pub width: usize,
    pub height: usize,
    pub fps: FrameRate,
    pub colorspace: String,
    pub range: PixelRange,
    pub extra: Vec<String>,
}

impl Y4mHeader {
    pub fn new(width: usize, height: usize, fps: FrameRate) -> Self {
        Y4mHeader {
            width,
            height,
            fps,
            colorspace: String::from("420jpeg"),
            range: PixelRange::Limited,
            extra: vec![String::from("Ip"), String::from("A1:1")],
        }
    }

    pub fn frame_bytes(&self) -> usize {
        let (cw, ch) = chroma_dims(self.width, self.height);
        self.width * self.height + 2 * cw * ch
    }

    fn parse(line: &str) -> Result<Self, Y4mError> {
        let mut tokens = line.split_ascii_whitespace();
        if tokens.next() != Some(SIGNATURE) {
            return Err(Y4mError::MissingSignature);
        }
        let mut width = None;
        let mut height = None;
        let mut fps = None;
        let mut colorspace = String::from("420jpeg");
        let mut range = PixelRange::Limited;
        let mut extra = Vec::new();
        for tok in tokens {
            let (tag, val) = tok.split_at(1);
            match tag {
                "W" => width = Some(parse_dim(val, "W")?),
                "H" => height = Some(parse_dim(val, "H")?),
                "F" => {
                    let (n, d) = val
                        .split_once(':')
                        .ok_or_else(|| Y4mError::MalformedHeader(format!("frame rate {val:?}")))?;
                    let num = n.parse::<u32>().ok();
                    let den = d.parse::<u32>().ok();
                    match (num, den) {
                        (Some(num), Some(den)) if num > 0 && den > 0 => fps = Some(FrameRate::new(num, den)),
                        _ => return Err(Y4mError::MalformedHeader(format!("frame rate {val:?}"))),
                    }
                }
                "C" => colorspace = val.to_string(),
                "X" if val.starts_with("COLORRANGE=") => {
                    range = match &val["COLORRANGE=".len()..] {
                        "FULL" => PixelRange::Full,
                        "LIMITED" => PixelRange::Limited,
                        other => return Err(Y4mError::MalformedHeader(format!("color range {other:?}"))),
                    }
                }
                _ => extra.push(tok.to_string()),
            }
        }
        if !matches!(colorspace.as_str(), "420" | "420jpeg" | "420paldv" | "420mpeg2") {
            return Err(Y4mError::UnsupportedColorspace(colorspace));
        }
        Ok(Y4mHeader {
            width: width.ok_or_else(|| Y4mError::MalformedHeader("missing W".into()))?,
            height: height.ok_or_else(|| Y4mError::MalformedHeader("missing H".into()))?,
            fps: fps.ok_or_else(|| Y4mError::MalformedHeader("missing F".into()))?,
            colorspace,
            range,
            extra,
        })
    }

    fn to_line(&self) -> String {
        let mut s = format!(
            "{SIGNATURE} W{} H{} F{}:{}",
            self.width, self.height, self.fps.num, self.fps.den
        );
        for e in &self.extra {
            s.push(' ');
            s.push_str(e);
        }
        s.push_str(" C");
        s.push_str(&self.colorspace);
        if self.range == PixelRange::Full {
            s.push_str(" XCOLORRANGE=FULL");
        }
        s.push('\n');
        s
    }
}

fn parse_dim(v: &str, what: &str) -> Result<usize, Y4mError> {
    match v.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(Y4mError::MalformedHeader(format!("{what}{v}"))),
    }
}

/// Streaming frame reader.
pub struct Y4mReader<R> {
    inner: BufReader<R>,
    header: Y4mHeader,
    index: usize,
}

impl<R: Read> Y4mReader<R> {
    pub fn new(reader: R) -> Result<Self, Y4mError> {
        let mut inner = BufReader::new(reader);
        let mut line = Vec::new();
        inner.read_until(b'\n', &mut line)?;
        if line.last() != Some(&b'\n') {
            return Err(if line.starts_with(SIGNATURE.as_bytes()) {
                Y4mError::MalformedHeader("header line not terminated".into())
            } else {
                Y4mError::MissingSignature
            });
        }
        let text = std::str::from_utf8(&line).map_err(|_| Y4mError::MalformedHeader("not UTF-8".into()))?;
        let header = Y4mHeader::parse(text.trim_end())?;
        Ok(Y4mReader {
            inner,
            header,
            index: 0,
        })
    }

    pub fn header(&self) -> &Y4mHeader {
        &self.header
    }

    /// Next frame, or `None` at a clean end of stream.
    pub fn read_frame(&mut self) -> Result<Option<PlanarFrame>, Y4mError> {
        let mut marker = Vec::new();
        self.inner.read_until(b'\n', &mut marker)?;
        if marker.is_empty() {
            return Ok(None);
        }
        if !marker.starts_with(b"FRAME") || marker.last() != Some(&b'\n') {
            return Err(Y4mError::BadFrameMarker(self.index));
        }
        let expected = self.header.frame_bytes();
        let mut buf = vec![0u8; expected];
        let got = read_fully(&mut self.inner, &mut buf)?;
        if got < expected {
            return Err(Y4mError::TruncatedFrame {
                index: self.index,
                expected,
                got,
            });
        }
        self.index += 1;
        Ok(Some(split_planes(buf, self.header.width, self.header.height, self.header.range)))
    }
}

impl<R: Read> Iterator for Y4mReader<R> {
    type Item = Result<PlanarFrame, Y4mError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_frame().transpose()
    }
}

fn read_fully(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

fn split_planes(mut buf: Vec<u8>, width: usize, height: usize, range: PixelRange) -> PlanarFrame {
    let (cw, ch) = chroma_dims(width, height);
    let luma = width * height;
    let cr = buf.split_off(luma + cw * ch);
    let cb = buf.split_off(luma);
    PlanarFrame {
        width,
        height,
        y: Plane {
            width,
            height,
            data: buf,
        },
        cb: Plane {
            width: cw,
            height: ch,
            data: cb,
        },
        cr: Plane {
            width: cw,
            height: ch,
            data: cr,
        },
        range,
    }
}

/// Read a whole Y4M stream.
pub fn read_y4m<R: Read>(reader: R) -> Result<(Y4mHeader, Vec<PlanarFrame>), Y4mError> {
    let mut r = Y4mReader::new(reader)?;
    let mut frames = Vec::new();
    while let Some(f) = r.read_frame()? {
        frames.push(f);
    }
    Ok((r.header, frames))
}

pub fn write_y4m<W: Write>(mut out: W, header: &Y4mHeader, frames: &[PlanarFrame]) -> Result<(), Y4mError> {
    out.write_all(header.to_line().as_bytes())?;
    for f in frames {
        write_frame(&mut out, header, f)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_frame<W: Write>(out: &mut W, header: &Y4mHeader, frame: &PlanarFrame) -> Result<(), Y4mError> {
    if frame.dims() != (header.width, header.height) {
        return Err(Y4mError::Geometry {
            expected: (header.width, header.height),
            found: frame.dims(),
        });
    }
    out.write_all(b"FRAME\n")?;
    for p in frame.planes() {
        out.write_all(&p.data)?;
    }
    Ok(())
}

/// Headerless yuv420p: consecutive frames of `width × height` luma followed
/// by both quarter-size chroma planes.
pub fn read_raw_yuv<R: Read>(reader: R, width: usize, height: usize) -> Result<Vec<PlanarFrame>, Y4mError> {
    if width == 0 || height == 0 {
        return Err(Y4mError::MalformedHeader("raw input needs non-zero dimensions".into()));
    }
    let mut r = BufReader::new(reader);
    let (cw, ch) = chroma_dims(width, height);
    let expected = width * height + 2 * cw * ch;
    let mut frames = Vec::new();
    loop {
        let mut buf = vec![0u8; expected];
        let got = read_fully(&mut r, &mut buf)?;
        if got == 0 {
            break;
        }
        if got < expected {
            return Err(Y4mError::TruncatedFrame {
                index: frames.len(),
                expected,
                got,
            });
        }
        frames.push(split_planes(buf, width, height, PixelRange::Limited));
    }
    Ok(frames)
}

pub fn write_raw_yuv<W: Write>(mut out: W, frames: &[PlanarFrame]) -> Result<(), Y4mError> {
    for f in frames {
        for p in f.planes() {
            out.write_all(&p.data)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(header: &str, payloads: &[Vec<u8>]) -> Vec<u8> {
        let mut v = header.as_bytes().to_vec();
        for p in payloads {
            v.extend_from_slice(b"FRAME\n");
            v.extend_from_slice(p);
        }
        v
    }

    #[test]
    fn reads_two_small_frames() {
        let data = stream("YUV4MPEG2 W4 H4 F30:1 Ip A1:1 C420\n", &[vec![7; 24], vec![9; 24]]);
        let (h, frames) = read_y4m(&data[..]).unwrap();
        assert_eq!((h.width, h.height), (4, 4));
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].y.dims(), (4, 4));
        assert_eq!(frames[0].cb.dims(), (2, 2));
        assert_eq!(frames[1].cr.data, [9; 4]);
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let data = stream("YUV4MPEG2 W4 H4 F30:1 C420\n", &[vec![7; 20]]);
        assert!(matches!(read_y4m(&data[..]), Err(Y4mError::TruncatedFrame { got: 20, .. })));
    }

    #[test]
    fn rejects_other_sampling() {
        for cs in ["C444", "C422", "C420p10", "Cmono"] {
            let data = stream(&format!("YUV4MPEG2 W4 H4 F30:1 {cs}\n"), &[]);
            assert!(matches!(read_y4m(&data[..]), Err(Y4mError::UnsupportedColorspace(_))));
        }
        assert!(matches!(read_y4m(&b"RIFF...."[..]), Err(Y4mError::MissingSignature)));
        assert!(matches!(read_y4m(&b"YUV4MPEG2 W4 F30:1\n"[..]), Err(Y4mError::MalformedHeader(_))));
    }

    #[test]
    fn fhd_luma_count() {
        let payload = vec![16u8; 1920 * 1080 * 3 / 2];
        let data = stream("YUV4MPEG2 W1920 H1080 F25:1 C420jpeg\n", &[payload.clone(), payload]);
        let (_, frames) = read_y4m(&data[..]).unwrap();
        assert_eq!(frames.len(), 2);
        assert!(frames.iter().all(|f| f.y.data.len() == 2_073_600));
    }

    #[test]
    fn full_range_flag_survives() {
        let data = stream("YUV4MPEG2 W2 H2 F1:1 C420jpeg XCOLORRANGE=FULL\n", &[vec![0; 6]]);
        let (h, frames) = read_y4m(&data[..]).unwrap();
        assert_eq!(frames[0].range, PixelRange::Full);
        let mut out = Vec::new();
        write_y4m(&mut out, &h, &frames).unwrap();
        assert_eq!(read_y4m(&out[..]).unwrap().0, h);
    }

    #[test]
    fn raw_round_trip_and_truncation() {
        let frames: Vec<PlanarFrame> = (0..3).map(|i| PlanarFrame::filled(5, 3, i * 10, 128)).collect();
        let mut raw = Vec::new();
        write_raw_yuv(&mut raw, &frames).unwrap();
        assert_eq!(raw.len(), 3 * (15 + 2 * 6));
        assert_eq!(read_raw_yuv(&raw[..], 5, 3).unwrap(), frames);
        assert!(read_raw_yuv(&raw[..raw.len() - 1], 5, 3).is_err());
    }
}

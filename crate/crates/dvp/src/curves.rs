//! CSV for RD curves and hull studies.
//!
//! Curves: `rate,quality` rows (bits/s, dB or VMAF). Hull points:
//! `rate,distortion,scale` rows with scale written as `num/den`.

use std::io::{Read, Write};

use dvp_core::metrics::{CurvePoint, QualityKind, RdCurve};
use dvp_core::mode::{RdPoint, RdSummary, StageLog};
use dvp_core::ScaleFactor;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    rate: f64,
    quality: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PointRow {
    rate: f64,
    distortion: f64,
    scale: String,
}

pub fn read_curve<R: Read>(r: R, kind: QualityKind) -> Result<RdCurve, CsvError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut points = Vec::new();
    for row in rd.deserialize() {
        let row: CurveRow = row?;
        points.push(CurvePoint {
            rate: row.rate,
            quality: row.quality,
        });
    }
    points.sort_by(|a, b| a.rate.total_cmp(&b.rate));
    Ok(RdCurve::new(points, kind))
}

pub fn write_curve<W: Write>(w: W, curve: &RdCurve) -> Result<(), CsvError> {
    let mut wr = csv::Writer::from_writer(w);
    for p in &curve.points {
        wr.serialize(CurveRow {
            rate: p.rate,
            quality: p.quality,
        })?;
    }
    wr.flush()?;
    Ok(())
}

/// Points for offline pruning; the handle is the row index.
pub fn read_points<R: Read>(r: R) -> Result<Vec<RdPoint<usize>>, CsvError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for (i, row) in rd.deserialize().enumerate() {
        let row: PointRow = row?;
        let scale: ScaleFactor = row.scale.parse().map_err(|_| CsvError::Row {
            row: i + 1,
            msg: format!("bad scale {:?}", row.scale),
        })?;
        if !(row.rate > 0.0) || !(row.distortion >= 0.0) {
            return Err(CsvError::Row {
                row: i + 1,
                msg: "rate must be > 0 and distortion >= 0".into(),
            });
        }
        out.push(RdPoint {
            rate: row.rate,
            distortion: row.distortion,
            handle: i,
            scale,
        });
    }
    Ok(out)
}

pub fn write_points<W: Write>(w: W, points: &[RdSummary]) -> Result<(), CsvError> {
    let mut wr = csv::Writer::from_writer(w);
    for p in points {
        wr.serialize(PointRow {
            rate: p.rate,
            distortion: p.distortion,
            scale: p.scale.to_string(),
        })?;
    }
    wr.flush()?;
    Ok(())
}

/// Human-readable stage listing as printed by `dvp hull`.
pub fn format_stages(log: &StageLog) -> String {
    let mut s = String::new();
    let mut section = |title: &str, pts: &[RdSummary]| {
        s.push_str(&format!("{title} ({})\n", pts.len()));
        for p in pts {
            s.push_str(&format!("  {:>6}  rate {:>14.3}  distortion {:>12.6}\n", p.scale.to_string(), p.rate, p.distortion));
        }
    };
    section("all points", &log.all_points);
    section("after monotonicity", &log.after_monotone);
    section("after convex hull", &log.after_hull);
    if !log.remapped_points.is_empty() {
        section("after CBR remap", &log.remapped_points);
    }
    s.push_str(&format!("cbr rate {:.3}\n", log.cbr_rate));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_round_trip() {
        let text = "rate,distortion,scale\n300,9,2\n100, 10 ,3/2\n";
        let pts = read_points(text.as_bytes()).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].scale, ScaleFactor::new(3, 2).unwrap());
        let mut out = Vec::new();
        write_points(&mut out, &pts.iter().map(RdPoint::summary).collect::<Vec<_>>()).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "rate,distortion,scale\n300.0,9.0,2/1\n100.0,10.0,3/2\n");
        assert!(read_points("rate,distortion,scale\n1,1,0\n".as_bytes()).is_err());
        assert!(read_points("rate,distortion,scale\n-1,1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn curve_is_sorted_by_rate() {
        let c = read_curve("rate,quality\n200,35\n100,30\n".as_bytes(), QualityKind::Psnr).unwrap();
        assert_eq!(c.points[0].rate, 100.0);
        let mut out = Vec::new();
        write_curve(&mut out, &c).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("rate,quality\n100.0,30.0\n"));
    }
}

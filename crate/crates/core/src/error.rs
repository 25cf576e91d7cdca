use core::fmt;

use crate::scale::ScaleFactor;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidScale,
    UnsupportedScale(ScaleFactor),
    EmptyInput,
    ZeroSizedTarget,
    InvalidArgument(&'static str),
    GeometryMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    ShapeMismatch(&'static str),
    TooFewPoints { needed: usize, found: usize },
    RatesNotIncreasing,
    NoOverlap,
    Degenerate,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidScale => write!(f, "scale factor must be a positive rational num/den"),
            Error::UnsupportedScale(s) => write!(f, "scale factor {s} is not in the canonical set"),
            Error::EmptyInput => write!(f, "empty input"),
            Error::ZeroSizedTarget => write!(f, "target dimensions must be at least 1x1"),
            Error::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
            Error::GeometryMismatch { expected, found } => write!(
                f,
                "geometry mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::ShapeMismatch(what) => write!(f, "shape mismatch: {what}"),
            Error::TooFewPoints { needed, found } => {
                write!(f, "curve needs at least {needed} points, found {found}")
            }
            Error::RatesNotIncreasing => write!(f, "curve rates must be strictly increasing"),
            Error::NoOverlap => write!(f, "curves do not overlap"),
            Error::Degenerate => write!(f, "degenerate curve fit"),
        }
    }
}

impl core::error::Error for Error {}

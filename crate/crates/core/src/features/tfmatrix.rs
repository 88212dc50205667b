use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TfKind {
    Cqt,
    Mel,
    Stft,
    Lfcc,
    Mfcc,
    Cqcc,
}

impl TfKind {
    pub const ALL: [TfKind; 6] = [
        TfKind::Mel,
        TfKind::Stft,
        TfKind::Lfcc,
        TfKind::Mfcc,
        TfKind::Cqcc,
        TfKind::Cqt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TfKind::Cqt => "cqt",
            TfKind::Mel => "mel",
            TfKind::Stft => "stft",
            TfKind::Lfcc => "lfcc",
            TfKind::Mfcc => "mfcc",
            TfKind::Cqcc => "cqcc",
        }
    }

    fn code(self) -> u8 {
        match self {
            TfKind::Cqt => 0,
            TfKind::Mel => 1,
            TfKind::Stft => 2,
            TfKind::Lfcc => 3,
            TfKind::Mfcc => 4,
            TfKind::Cqcc => 5,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == c)
    }
}

impl fmt::Display for TfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TfKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown representation `{s}`")))
    }
}

/// What the numbers in a [`TfMatrix`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TfScale {
    Magnitude,
    Decibel,
    Normalized,
    Cepstral,
}

impl TfScale {
    fn code(self) -> u8 {
        match self {
            TfScale::Magnitude => 0,
            TfScale::Decibel => 1,
            TfScale::Normalized => 2,
            TfScale::Cepstral => 3,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        [TfScale::Magnitude, TfScale::Decibel, TfScale::Normalized, TfScale::Cepstral]
            .into_iter()
            .find(|s| s.code() == c)
    }
}

/// Real time-frequency matrix: rows are bins (low to high), columns frames.
///
/// Values are stored as `f32`, matching the on-disk format, so a matrix
/// written and read back is bit-identical to the in-memory one.
#[derive(Debug, Clone, PartialEq)]
pub struct TfMatrix {
    pub kind: TfKind,
    pub scale: TfScale,
    pub values: Array2<f32>,
    /// Hz per row for spectral kinds; coefficient index for cepstra.
    pub freq_axis: Vec<f64>,
    /// Frames per second.
    pub frame_rate: f64,
}

const MAGIC: &[u8; 4] = b"TFMX";
const VERSION: u8 = 1;

impl TfMatrix {
    pub fn new(
        kind: TfKind,
        scale: TfScale,
        values: Array2<f32>,
        freq_axis: Vec<f64>,
        frame_rate: f64,
    ) -> Result<Self> {
        if freq_axis.len() != values.nrows() {
            return Err(Error::Shape(format!(
                "frequency axis has {} entries for {} rows",
                freq_axis.len(),
                values.nrows()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("time-frequency matrix contains non-finite values"));
        }
        Ok(Self {
            kind,
            scale,
            values,
            freq_axis,
            frame_rate,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }

    /// Layout: `TFMX`, version, kind, scale, reserved byte, rows u32,
    /// cols u32, frame_rate f64, `rows` f64 axis values, then `rows*cols`
    /// f32 values row-major. All little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (rows, cols) = self.values.dim();
        let mut out = Vec::with_capacity(24 + 8 * rows + 4 * rows * cols);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[VERSION, self.kind.code(), self.scale.code(), 0]);
        out.extend_from_slice(&(rows as u32).to_le_bytes());
        out.extend_from_slice(&(cols as u32).to_le_bytes());
        out.extend_from_slice(&self.frame_rate.to_le_bytes());
        for f in &self.freq_axis {
            out.extend_from_slice(&f.to_le_bytes());
        }
        for v in self.values.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("tf matrix: {m}"));
        if b.len() < 24 || &b[0..4] != MAGIC {
            return Err(bad("missing TFMX magic"));
        }
        if b[4] != VERSION {
            return Err(bad(&format!("unsupported version {}", b[4])));
        }
        let kind = TfKind::from_code(b[5]).ok_or_else(|| bad("unknown kind code"))?;
        let scale = TfScale::from_code(b[6]).ok_or_else(|| bad("unknown scale code"))?;
        let rows = u32::from_le_bytes(b[8..12].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(b[12..16].try_into().unwrap()) as usize;
        let frame_rate = f64::from_le_bytes(b[16..24].try_into().unwrap());
        let expected = 24 + 8 * rows + 4 * rows * cols;
        if b.len() != expected {
            return Err(bad(&format!("expected {expected} bytes, found {}", b.len())));
        }
        let mut pos = 24;
        let freq_axis = (0..rows)
            .map(|_| {
                let v = f64::from_le_bytes(b[pos..pos + 8].try_into().unwrap());
                pos += 8;
                v
            })
            .collect();
        let values: Vec<f32> = (0..rows * cols)
            .map(|_| {
                let v = f32::from_le_bytes(b[pos..pos + 4].try_into().unwrap());
                pos += 4;
                v
            })
            .collect();
        let values = Array2::from_shape_vec((rows, cols), values).map_err(|e| bad(&e.to_string()))?;
        Self::new(kind, scale, values, freq_axis, frame_rate)
    }

    /// One row per bin: the axis value followed by the frame values.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "{}", if self.scale == TfScale::Cepstral { "coeff" } else { "freq_hz" })?;
        for t in 0..self.n_frames() {
            write!(w, ",t{:.4}", t as f64 / self.frame_rate)?;
        }
        writeln!(w)?;
        for (row, f) in self.values.rows().into_iter().zip(&self.freq_axis) {
            write!(w, "{f}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn binary_round_trip(rows in 1usize..6, cols in 1usize..7, seed in any::<u32>()) {
            let values = Array2::from_shape_fn((rows, cols), |(r, c)| {
                ((r * 31 + c * 7) as f32 + seed as f32 * 1e-3).sin()
            });
            let axis = (0..rows).map(|r| 10.0 * r as f64 + 0.5).collect();
            let m = TfMatrix::new(TfKind::Cqcc, TfScale::Cepstral, values, axis, 100.0).unwrap();
            let back = TfMatrix::from_bytes(&m.to_bytes()).unwrap();
            prop_assert_eq!(back, m);
        }
    }

    #[test]
    fn rejects_bad_blobs() {
        assert!(TfMatrix::from_bytes(b"nope").is_err());
        let m = TfMatrix::new(TfKind::Mel, TfScale::Decibel, Array2::zeros((2, 2)), vec![1.0, 2.0], 50.0).unwrap();
        let mut b = m.to_bytes();
        b.pop();
        assert!(TfMatrix::from_bytes(&b).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = TfMatrix::new(TfKind::Stft, TfScale::Decibel, Array2::from_elem((2, 3), -1.5), vec![0.0, 31.25], 100.0).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "freq_hz,t0.0000,t0.0100,t0.0200");
        assert_eq!(lines[2], "31.25,-1.5,-1.5,-1.5");
    }

    #[test]
    fn kind_parsing() {
        for k in TfKind::ALL {
            assert_eq!(k.as_str().parse::<TfKind>().unwrap(), k);
        }
        assert!("wavelet".parse::<TfKind>().is_err());
    }
}

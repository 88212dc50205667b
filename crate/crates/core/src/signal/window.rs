use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Periodic Hann window: `w[n] = 0.5 (1 - cos(2 pi n / len))`.
pub fn hann_window(length: usize) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(Error::invalid("window length must be at least 1"));
    }
    let n = length as f64;
    Ok((0..length)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n).cos()))
        .collect())
}

/// Hann analysis window with a hop size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct WindowSpec {
    pub length: usize,
    pub hop: usize,
}

impl WindowSpec {
    pub fn new(length: usize, hop: usize) -> Result<Self> {
        let spec = Self { length, hop };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.length {
            return Err(Error::invalid(format!(
                "window hop {} must satisfy 0 < hop <= length {}",
                self.hop, self.length
            )));
        }
        Ok(())
    }
}

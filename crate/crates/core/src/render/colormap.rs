use serde::{Deserialize, Serialize};

use super::viridis::VIRIDIS;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Colormap {
    #[default]
    Viridis,
    Gray,
}

impl Colormap {
    pub fn entry(self, index: u8) -> [u8; 3] {
        match self {
            Colormap::Viridis => VIRIDIS[index as usize],
            Colormap::Gray => [index; 3],
        }
    }

    /// Lookup index for a value in `[0, 1]`: `round(v * 255)`.
    pub fn index(value: f32) -> u8 {
        (value.clamp(0.0, 1.0) * 255.0).round() as u8
    }
}

impl std::str::FromStr for Colormap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "viridis" => Ok(Colormap::Viridis),
            "gray" | "grey" => Ok(Colormap::Gray),
            other => Err(Error::invalid(format!("unknown colormap `{other}` (viridis, gray)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn viridis_is_dark_to_bright() {
        let luma = |c: [u8; 3]| 0.2126 * c[0] as f64 + 0.7152 * c[1] as f64 + 0.0722 * c[2] as f64;
        for i in 1..=255u8 {
            assert!(luma(Colormap::Viridis.entry(i)) >= luma(Colormap::Viridis.entry(i - 1)) - 0.5);
        }
        assert_eq!(Colormap::Viridis.entry(0), [68, 1, 84]);
        assert_eq!(Colormap::Viridis.entry(255), [253, 231, 37]);
    }

    #[test]
    fn index_endpoints() {
        assert_eq!(Colormap::index(0.0), 0);
        assert_eq!(Colormap::index(1.0), 255);
        assert_eq!(Colormap::index(0.5), 128);
    }
}

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Colormap;
use crate::error::{Error, Result};
use crate::features::TfMatrix;

/// RGB8 row-major image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl EvidenceImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Renders a `[0, 1]` matrix: time runs left to right, the lowest bin sits
/// on the bottom row, and the matrix is resized by nearest neighbour.
pub fn render_pseudocolor(
    tf: &TfMatrix,
    width: usize,
    height: usize,
    colormap: Colormap,
) -> Result<EvidenceImage> {
    let (rows, cols) = tf.values.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("cannot render an empty matrix"));
    }
    if width == 0 || height == 0 {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    if let Some(v) = tf.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!(
            "render expects values in [0, 1] (normalize first), found {v}"
        )));
    }
    let mut pixels = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        let bin = rows - 1 - y * rows / height;
        for x in 0..width {
            let frame = x * cols / width;
            pixels.extend_from_slice(&colormap.entry(Colormap::index(tf.values[[bin, frame]])));
        }
    }
    EvidenceImage::new(width, height, pixels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    #[default]
    Ppm,
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Ppm => "ppm",
            ImageFormat::Png => "png",
        }
    }
}

impl FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ppm" => Ok(ImageFormat::Ppm),
            "png" => Ok(ImageFormat::Png),
            other => Err(Error::invalid(format!("unsupported image format `{other}`"))),
        }
    }
}

/// Binary PPM: `P6\n<w> <h>\n255\n` followed by the raw RGB bytes.
pub fn encode_ppm(image: &EvidenceImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<EvidenceImage> {
    let bad = |m: &str| Error::Format(format!("ppm: {m}"));
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P6" {
        return Err(bad("only binary P6 is supported"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad header number `{s}`")));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    // exactly one whitespace byte separates the header from the raster
    let data = bytes.get(pos + 1..).ok_or_else(|| bad("missing raster"))?;
    EvidenceImage::new(w, h, data.to_vec())
}

fn encode_png(image: &EvidenceImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width as u32, image.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Format(format!("png: {e}")))?;
        writer
            .write_image_data(&image.pixels)
            .map_err(|e| Error::Format(format!("png: {e}")))?;
    }
    Ok(out)
}

fn decode_png(bytes: &[u8]) -> Result<EvidenceImage> {
    let bad = |e: png::DecodingError| Error::Format(format!("png: {e}"));
    let mut reader = png::Decoder::new(std::io::Cursor::new(bytes)).read_info().map_err(bad)?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(bad)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format("png: only 8-bit RGB is supported".into()));
    }
    buf.truncate(info.buffer_size());
    EvidenceImage::new(info.width as usize, info.height as usize, buf)
}

pub fn encode_image_file(image: &EvidenceImage, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        ImageFormat::Ppm => encode_ppm(image),
        ImageFormat::Png => encode_png(image)?,
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a PPM or PNG image, chosen by the file's magic bytes.
pub fn decode_image_file(path: impl AsRef<Path>) -> Result<EvidenceImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)
    } else {
        decode_ppm(&bytes)
    }
}

//! Evidence construction: pseudo-color rendering of normalized
//! time-frequency matrices, image files, training samples and manifests.

mod colormap;
mod image;
mod manifest;
mod sample;
#[rustfmt::skip]
mod viridis;

pub use colormap::Colormap;
pub use image::{
    decode_image_file, decode_ppm, encode_image_file, encode_ppm, render_pseudocolor, EvidenceImage, ImageFormat,
};
pub use manifest::{read_manifest, read_manifest_from, write_manifest, write_manifest_to};
pub use sample::{build_sample, evidence_image, Label, RenderConfig, Sample, Split};

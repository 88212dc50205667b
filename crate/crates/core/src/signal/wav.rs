//! Minimal RIFF/WAVE reader and writer for 16-bit PCM.
//!
//! Stereo (or wider) input is downmixed by averaging channels. Samples are
//! scaled by `1/32768` on read; writing rounds `x * 32768` and saturates to
//! the i16 range.

use std::fs;
use std::path::Path;

use super::Waveform;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 {
        return Err(Error::Wav("file shorter than the 12-byte RIFF header".into()));
    }
    match &bytes[0..4] {
        b"RIFF" => {}
        b"RIFX" | b"RF64" => {
            return Err(Error::Wav(format!(
                "unsupported container `{}`",
                String::from_utf8_lossy(&bytes[0..4])
            )))
        }
        _ => return Err(Error::Wav("malformed header: missing RIFF magic".into())),
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::Wav("malformed header: form type is not WAVE".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                Error::Wav(format!(
                    "malformed header: chunk `{}` size {size} runs past end of file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::Wav("malformed header: fmt chunk shorter than 16 bytes".into()));
                }
                fmt = Some((u16_at(body, 0), u16_at(body, 2), u32_at(body, 4), u16_at(body, 14)));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }

    let (format, channels, sample_rate, bits) =
        fmt.ok_or_else(|| Error::Wav("malformed header: no fmt chunk".into()))?;
    if format != FORMAT_PCM {
        return Err(Error::Wav(format!("unsupported codec: audio_format = {format} (only PCM = 1)")));
    }
    if bits != 16 {
        return Err(Error::Wav(format!("unsupported bit depth: bits_per_sample = {bits} (only 16)")));
    }
    if channels == 0 {
        return Err(Error::Wav("malformed header: num_channels = 0".into()));
    }
    if sample_rate == 0 {
        return Err(Error::Wav("malformed header: sample_rate = 0".into()));
    }
    let data = data.ok_or_else(|| Error::Wav("malformed header: no data chunk".into()))?;
    let frame_bytes = 2 * channels as usize;
    let n_frames = data.len() / frame_bytes;
    if n_frames == 0 {
        return Err(Error::Wav("data chunk holds no complete sample frames".into()));
    }
    let samples = (0..n_frames)
        .map(|f| {
            let base = f * frame_bytes;
            let sum: f64 = (0..channels as usize)
                .map(|c| i16::from_le_bytes([data[base + 2 * c], data[base + 2 * c + 1]]) as f64 / 32768.0)
                .sum();
            sum / channels as f64
        })
        .collect();
    Waveform::new(samples, sample_rate)
}

pub fn encode_wav(waveform: &Waveform) -> Vec<u8> {
    let n = waveform.len();
    let data_len = (2 * n) as u32;
    let mut out = Vec::with_capacity(44 + 2 * n);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&waveform.sample_rate().to_le_bytes());
    out.extend_from_slice(&(waveform.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in waveform.samples() {
        let q = (s * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes).map_err(|e| match e {
        Error::Wav(msg) => Error::Wav(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_wav(path: impl AsRef<Path>, waveform: &Waveform) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(waveform)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pcm16_file(channels: u16, rate: u32, values: &[i16]) -> Vec<u8> {
        let mut out = Vec::new();
        let data_len = (values.len() * 2) as u32;
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_len).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 2 * channels as u32).to_le_bytes());
        out.extend_from_slice(&(2 * channels).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&data_len.to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    #[test]
    fn scales_by_32768() {
        let w = decode_wav(&pcm16_file(1, 16_000, &[32767, 0, -32768, 0])).unwrap();
        assert_eq!(w.samples(), &[32767.0 / 32768.0, 0.0, -1.0, 0.0]);
        assert_eq!(w.sample_rate(), 16_000);
    }

    #[test]
    fn stereo_is_averaged() {
        let w = decode_wav(&pcm16_file(2, 8_000, &[16384, 0, -16384, -16384])).unwrap();
        assert_eq!(w.samples(), &[0.25, -0.5]);
    }

    #[test]
    fn rejects_rifx_and_other_codecs() {
        let mut b = pcm16_file(1, 16_000, &[1, 2]);
        b[0..4].copy_from_slice(b"RIFX");
        let err = decode_wav(&b).unwrap_err().to_string();
        assert!(err.contains("unsupported container"), "{err}");

        let mut b = pcm16_file(1, 16_000, &[1, 2]);
        b[20..22].copy_from_slice(&3u16.to_le_bytes());
        assert!(decode_wav(&b).unwrap_err().to_string().contains("audio_format"));

        let mut b = pcm16_file(1, 16_000, &[1, 2]);
        b[34..36].copy_from_slice(&24u16.to_le_bytes());
        assert!(decode_wav(&b).unwrap_err().to_string().contains("bits_per_sample"));

        let b = pcm16_file(1, 16_000, &[1, 2]);
        assert!(decode_wav(&b[..30]).is_err());
    }

    #[test]
    fn skips_unknown_chunks() {
        let plain = pcm16_file(1, 16_000, &[100, -100]);
        let mut b = plain[..12].to_vec();
        b.extend_from_slice(b"LIST");
        b.extend_from_slice(&3u32.to_le_bytes());
        b.extend_from_slice(&[1, 2, 3, 0]);
        b.extend_from_slice(&plain[12..]);
        assert_eq!(decode_wav(&b).unwrap(), decode_wav(&plain).unwrap());
    }

    proptest! {
        #[test]
        fn round_trip_within_quantization(values in prop::collection::vec(-1.0f64..=1.0, 1..300)) {
            let w = Waveform::new(values, 22_050).unwrap();
            let back = decode_wav(&encode_wav(&w)).unwrap();
            prop_assert_eq!(back.sample_rate(), 22_050);
            for (a, b) in w.samples().iter().zip(back.samples()) {
                prop_assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }
    }
}

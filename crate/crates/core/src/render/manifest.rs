//! JSON-lines manifests: one object per sample with keys `audio_path`,
//! `image_path`, `label`, `split` and `domain`. Unknown keys are ignored.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde_json::Value;

use super::{Label, Sample, Split};
use crate::error::{Error, Result};

const REQUIRED: [&str; 5] = ["audio_path", "image_path", "label", "split", "domain"];

fn parse_line(line: &str, line_no: usize) -> Result<Sample> {
    let err = |message: String| Error::Manifest { line: line_no, message };
    let value: Value = serde_json::from_str(line).map_err(|e| err(format!("invalid JSON: {e}")))?;
    let obj = value.as_object().ok_or_else(|| err("expected a JSON object".into()))?;
    let mut fields = [""; 5];
    for (slot, key) in fields.iter_mut().zip(REQUIRED) {
        *slot = obj
            .get(key)
            .ok_or_else(|| err(format!("missing required key `{key}`")))?
            .as_str()
            .ok_or_else(|| err(format!("key `{key}` must be a string")))?;
    }
    let label: Label = fields[2]
        .parse()
        .map_err(|_| err(format!("invalid label `{}`", fields[2])))?;
    let split: Split = fields[3]
        .parse()
        .map_err(|_| err(format!("invalid split `{}`", fields[3])))?;
    Ok(Sample {
        audio_path: fields[0].into(),
        image_path: fields[1].into(),
        label,
        split,
        domain: fields[4].to_string(),
    })
}

pub fn read_manifest_from<R: Read>(reader: R) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::Manifest { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(&line, i + 1)?);
    }
    Ok(out)
}

/// Reads a manifest file. Relative audio and image paths are taken
/// relative to the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut samples = read_manifest_from(f)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for s in &mut samples {
        if s.audio_path.is_relative() {
            s.audio_path = base.join(&s.audio_path);
        }
        if s.image_path.is_relative() {
            s.image_path = base.join(&s.image_path);
        }
    }
    Ok(samples)
}

pub fn write_manifest_to<W: Write>(mut w: W, samples: &[Sample]) -> std::io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_manifest(path: impl AsRef<Path>, samples: &[Sample]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_manifest_to(&mut buf, samples).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_line_one_sample_and_unknown_keys() {
        let text = r#"{"audio_path":"a.wav","image_path":"a.ppm","label":"real","split":"train","domain":"A","extra":3}"#;
        let s = read_manifest_from(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].label, Label::Real);
        assert_eq!(s[0].audio_path, Path::new("a.wav"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let good = r#"{"audio_path":"a.wav","image_path":"a.ppm","label":"real","split":"train","domain":"A"}"#;
        let bad_label = good.replace("\"real\"", "\"bonafide\"");
        let text = format!("{good}\n{bad_label}\n");
        let err = read_manifest_from(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("invalid label"), "{err}");

        let missing = r#"{"audio_path":"a.wav","label":"real","split":"train","domain":"A"}"#;
        let err = read_manifest_from(missing.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 1") && err.contains("image_path"), "{err}");
    }

    fn arb_sample() -> impl Strategy<Value = Sample> {
        ("[a-z0-9_/]{1,20}", "[a-z0-9_/ ]{1,20}", any::<bool>(), 0u8..3, "\\PC{0,8}").prop_map(
            |(a, i, fake, split, domain)| Sample {
                audio_path: format!("{a}.wav").into(),
                image_path: format!("{i}.ppm").into(),
                label: if fake { Label::Fake } else { Label::Real },
                split: [Split::Train, Split::Dev, Split::Eval][split as usize],
                domain,
            },
        )
    }

    proptest! {
        #[test]
        fn write_then_read_is_identity(samples in prop::collection::vec(arb_sample(), 0..100)) {
            let mut buf = Vec::new();
            write_manifest_to(&mut buf, &samples).unwrap();
            prop_assert_eq!(read_manifest_from(buf.as_slice()).unwrap(), samples);
        }
    }
}

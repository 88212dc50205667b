//! ASVspoof-style countermeasure protocols:
//! `speaker utterance field3 system key`, one utterance per line.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::render::{Label, Sample, Split};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolRecord {
    pub speaker_id: String,
    pub utterance_id: String,
    /// Third column; kept but unused.
    pub field3: String,
    /// Attack system id, `-` for bona fide speech.
    pub system_id: String,
    pub label: Label,
}

pub fn parse_protocol_line(line: &str, line_no: usize) -> Result<ProtocolRecord> {
    let err = |message: String| Error::Protocol { line: line_no, message };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(err(format!("expected 5 fields at line {line_no}, found {}", fields.len())));
    }
    let label = match fields[4] {
        "bonafide" => Label::Real,
        "spoof" => Label::Fake,
        other => return Err(err(format!("unknown key `{other}` at line {line_no}"))),
    };
    Ok(ProtocolRecord {
        speaker_id: fields[0].into(),
        utterance_id: fields[1].into(),
        field3: fields[2].into(),
        system_id: fields[3].into(),
        label,
    })
}

/// Parses every non-blank line.
pub fn parse_protocol_str(text: &str) -> Result<Vec<ProtocolRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_protocol_line(l, i + 1))
        .collect()
}

/// Split from the utterance prefix (`LA_T_`, `LA_D_`, `LA_E_`); eval otherwise.
pub fn split_for_utterance(utt: &str) -> Split {
    match utt.get(..5) {
        Some("LA_T_") => Split::Train,
        Some("LA_D_") => Split::Dev,
        _ => Split::Eval,
    }
}

/// First of `<root>/<utt>.flac`, `<root>/<utt>.wav` that exists; the `.wav`
/// path when neither does.
pub fn resolve_audio_path(audio_root: &Path, utt: &str) -> PathBuf {
    let flac = audio_root.join(format!("{utt}.flac"));
    if flac.exists() {
        return flac;
    }
    audio_root.join(format!("{utt}.wav"))
}

/// One sample per protocol line. The evidence image sits next to the audio
/// with the `ppm` extension; the domain is the protocol's file stem.
pub fn parse_protocol(path: impl AsRef<Path>, audio_root: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let domain = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let root = audio_root.as_ref();
    Ok(parse_protocol_str(&text)?
        .into_iter()
        .map(|r| {
            let audio_path = resolve_audio_path(root, &r.utterance_id);
            Sample {
                image_path: audio_path.with_extension("ppm"),
                audio_path,
                label: r.label,
                split: split_for_utterance(&r.utterance_id),
                domain: domain.clone(),
            }
        })
        .collect())
}

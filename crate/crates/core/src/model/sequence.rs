//! Interleaved multimodal token sequences.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::frontend::{audio_features, image_patches, project_audio, visual_from_patches};
use super::tokenizer::{tokenize_text, FAKE, REAL};
use super::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::render::{EvidenceImage, Label};
use crate::signal::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sys,
    Aud,
    Pre,
    Vis,
    Post,
    Answer,
}

impl Role {
    pub const ALL: [Role; 6] = [Role::Sys, Role::Aud, Role::Pre, Role::Vis, Role::Post, Role::Answer];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Sys => "sys",
            Role::Aud => "aud",
            Role::Pre => "pre",
            Role::Vis => "vis",
            Role::Post => "post",
            Role::Answer => "answer",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which modalities reach the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    AudioOnly,
    AcousticOnly,
    Fused,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::AudioOnly, Setting::AcousticOnly, Setting::Fused];

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::AudioOnly => "audio_only",
            Setting::AcousticOnly => "acoustic_only",
            Setting::Fused => "fused",
        }
    }

    /// Prompt roles in order, without the answer.
    pub fn roles(self) -> &'static [Role] {
        match self {
            Setting::Fused => &[Role::Sys, Role::Aud, Role::Pre, Role::Vis, Role::Post],
            Setting::AudioOnly => &[Role::Sys, Role::Aud, Role::Pre],
            Setting::AcousticOnly => &[Role::Sys, Role::Pre, Role::Vis, Role::Post],
        }
    }

    pub fn uses_audio(self) -> bool {
        self != Setting::AcousticOnly
    }

    pub fn uses_image(self) -> bool {
        self != Setting::AudioOnly
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown setting `{s}` (audio_only, acoustic_only, fused)")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Prompts {
    pub system: String,
    pub pre: String,
    pub post: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Self {
            system: "You are a speech forensics assistant.".into(),
            pre: "Could you verify whether this audio is real or fake?".into(),
            post: "Here is its CQT-spectrogram. Please analyze both the audio and its spectrogram.".into(),
        }
    }
}

/// Raw inputs of one segment. Audio and visual segments keep frontend
/// features so that embeddings can be recomputed under new parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentContent {
    Text(Vec<u32>),
    /// Pooled log-mel features, one row per audio token.
    Audio(Array2<f64>),
    /// Flattened patches, one row per visual token.
    Visual(Array2<f64>),
}

impl SegmentContent {
    pub fn len(&self) -> usize {
        match self {
            SegmentContent::Text(ids) => ids.len(),
            SegmentContent::Audio(m) | SegmentContent::Visual(m) => m.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Zero-based `[start, start + len)` range of one role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub role: Role,
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    /// Inclusive one-based token range, as used when reporting positions.
    pub fn one_based(&self) -> (usize, usize) {
        (self.start + 1, self.start + self.len)
    }

    pub fn contains(&self, pos: usize) -> bool {
        (self.start..self.end()).contains(&pos)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    segments: Vec<(Role, SegmentContent)>,
    spans: Vec<Span>,
}

impl TokenSequence {
    /// Builds a sequence from explicit segments. Roles must appear in the
    /// canonical order, each at most once; a segment's content kind must
    /// match its role.
    pub fn from_segments(segments: Vec<(Role, SegmentContent)>) -> Result<Self> {
        let mut spans = Vec::with_capacity(segments.len());
        let mut start = 0;
        for (i, (role, content)) in segments.iter().enumerate() {
            if i > 0 && segments[i - 1].0 >= *role {
                return Err(Error::invalid(format!(
                    "segment `{role}` cannot follow `{}`",
                    segments[i - 1].0
                )));
            }
            let kind_ok = match role {
                Role::Aud => matches!(content, SegmentContent::Audio(_)),
                Role::Vis => matches!(content, SegmentContent::Visual(_)),
                _ => matches!(content, SegmentContent::Text(_)),
            };
            if !kind_ok {
                return Err(Error::invalid(format!("segment `{role}` has the wrong content kind")));
            }
            spans.push(Span {
                role: *role,
                start,
                len: content.len(),
            });
            start += content.len();
        }
        if start == 0 {
            return Err(Error::invalid("empty token sequence"));
        }
        Ok(Self { segments, spans })
    }

    pub fn len(&self) -> usize {
        self.spans.last().map_or(0, Span::end)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn segments(&self) -> &[(Role, SegmentContent)] {
        &self.segments
    }

    pub fn span(&self, role: Role) -> Option<Span> {
        self.spans.iter().copied().find(|s| s.role == role)
    }

    pub fn roles(&self) -> Vec<Role> {
        self.spans.iter().map(|s| s.role).collect()
    }

    /// Role of every position.
    pub fn role_at(&self) -> Vec<Role> {
        self.spans
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.role, s.len))
            .collect()
    }

    /// The setting whose role layout this sequence follows, if any.
    pub fn setting(&self) -> Option<Setting> {
        let roles: Vec<Role> = self.roles().into_iter().filter(|&r| r != Role::Answer).collect();
        Setting::ALL.into_iter().find(|s| s.roles() == roles.as_slice())
    }

    /// Causal mask: entry `(i, j)` is true when position `i` may attend to `j`.
    pub fn attention_mask(&self) -> Array2<bool> {
        let n = self.len();
        Array2::from_shape_fn((n, n), |(i, j)| j <= i)
    }

    /// Appends the label completion as a one-token answer span.
    pub fn with_answer(&self, label: Label) -> Result<Self> {
        if self.span(Role::Answer).is_some() {
            return Err(Error::invalid("sequence already has an answer"));
        }
        let mut segments = self.segments.clone();
        segments.push((Role::Answer, SegmentContent::Text(vec![label_token(label)])));
        Self::from_segments(segments)
    }

    /// Same sequence without its answer span.
    pub fn prompt(&self) -> Self {
        let segments: Vec<_> = self.segments.iter().filter(|(r, _)| *r != Role::Answer).cloned().collect();
        Self::from_segments(segments).expect("prompt of a valid sequence is valid")
    }

    /// Row whose next-token distribution predicts the answer: the last
    /// prompt position.
    pub fn query_position(&self) -> usize {
        self.span(Role::Answer).map_or(self.len(), |s| s.start) - 1
    }

    /// Input embeddings (`L x d`) before position encoding.
    pub fn embeddings(&self, params: &ModelParams) -> Result<Array2<f64>> {
        let d = params.config.d_model;
        let tok = &params.tensor("tok_emb")?.value;
        let mut out = Array2::zeros((self.len(), d));
        for ((_, content), span) in self.segments.iter().zip(&self.spans) {
            let block = match content {
                SegmentContent::Text(ids) => {
                    let mut m = Array2::zeros((ids.len(), d));
                    for (r, &id) in ids.iter().enumerate() {
                        let row = tok.row(id as usize);
                        m.row_mut(r).assign(&row);
                    }
                    m
                }
                SegmentContent::Audio(f) => project_audio(f, params)?,
                SegmentContent::Visual(p) => visual_from_patches(p, params)?,
            };
            out.slice_mut(ndarray::s![span.start..span.end(), ..]).assign(&block);
        }
        Ok(out)
    }
}

pub fn label_token(label: Label) -> u32 {
    match label {
        Label::Real => REAL,
        Label::Fake => FAKE,
    }
}

/// Interleaves prompts with modality tokens in the order of `setting`.
/// Modalities the setting does not use are ignored.
pub fn assemble_sequence(
    setting: Setting,
    waveform: Option<&Waveform>,
    image: Option<&EvidenceImage>,
    prompts: &Prompts,
    config: &ModelConfig,
) -> Result<TokenSequence> {
    let audio = match (setting.uses_audio(), waveform) {
        (true, Some(w)) => Some(audio_features(w, config)?),
        (true, None) => return Err(Error::invalid(format!("setting {setting} needs a waveform"))),
        (false, _) => None,
    };
    let patches = match (setting.uses_image(), image) {
        (true, Some(img)) => Some(image_patches(img, config)?),
        (true, None) => return Err(Error::invalid(format!("setting {setting} needs an evidence image"))),
        (false, _) => None,
    };
    assemble_from_features(setting, audio, patches, prompts)
}

/// Like [`assemble_sequence`] with precomputed frontend features.
pub fn assemble_from_features(
    setting: Setting,
    audio: Option<Array2<f64>>,
    patches: Option<Array2<f64>>,
    prompts: &Prompts,
) -> Result<TokenSequence> {
    let mut audio = audio;
    let mut patches = patches;
    let mut segments = Vec::new();
    for &role in setting.roles() {
        let content = match role {
            Role::Sys => SegmentContent::Text(tokenize_text(&prompts.system)),
            Role::Pre => SegmentContent::Text(tokenize_text(&prompts.pre)),
            Role::Post => SegmentContent::Text(tokenize_text(&prompts.post)),
            Role::Aud => SegmentContent::Audio(
                audio
                    .take()
                    .ok_or_else(|| Error::invalid(format!("setting {setting} needs audio features")))?,
            ),
            Role::Vis => SegmentContent::Visual(
                patches
                    .take()
                    .ok_or_else(|| Error::invalid(format!("setting {setting} needs image patches")))?,
            ),
            Role::Answer => unreachable!("settings list prompt roles only"),
        };
        segments.push((role, content));
    }
    TokenSequence::from_segments(segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(n: usize) -> SegmentContent {
        SegmentContent::Text(vec![b'a' as u32; n])
    }

    #[test]
    fn figure_boundaries() {
        let seq = TokenSequence::from_segments(vec![
            (Role::Sys, text(316)),
            (Role::Aud, SegmentContent::Audio(Array2::zeros((85, 4)))),
            (Role::Pre, text(13)),
            (Role::Vis, SegmentContent::Visual(Array2::zeros((36, 4)))),
            (Role::Post, text(20)),
        ])
        .unwrap();
        let b: Vec<_> = seq.spans().iter().map(Span::one_based).collect();
        assert_eq!(b, vec![(1, 316), (317, 401), (402, 414), (415, 450), (451, 470)]);
        assert_eq!(seq.setting(), Some(Setting::Fused));
    }

    #[test]
    fn order_and_kind_are_enforced() {
        assert!(TokenSequence::from_segments(vec![(Role::Pre, text(2)), (Role::Sys, text(2))]).is_err());
        assert!(TokenSequence::from_segments(vec![(Role::Sys, text(2)), (Role::Sys, text(2))]).is_err());
        assert!(TokenSequence::from_segments(vec![(Role::Aud, text(2))]).is_err());
        assert!(TokenSequence::from_segments(vec![]).is_err());
    }

    #[test]
    fn settings_drop_the_right_segments() {
        let p = Prompts::default();
        let a = Some(Array2::zeros((3, 4)));
        let v = Some(Array2::zeros((2, 4)));
        let s = assemble_from_features(Setting::AudioOnly, a.clone(), None, &p).unwrap();
        assert_eq!(s.roles(), vec![Role::Sys, Role::Aud, Role::Pre]);
        let s = assemble_from_features(Setting::AcousticOnly, None, v.clone(), &p).unwrap();
        assert_eq!(s.roles(), vec![Role::Sys, Role::Pre, Role::Vis, Role::Post]);
        assert!(assemble_from_features(Setting::Fused, a, None, &p).is_err());
    }

    #[test]
    fn answer_span_and_query_position() {
        let seq = TokenSequence::from_segments(vec![(Role::Sys, text(5)), (Role::Pre, text(3))]).unwrap();
        assert_eq!(seq.query_position(), 7);
        let full = seq.with_answer(Label::Fake).unwrap();
        assert_eq!(full.len(), 9);
        assert_eq!(full.query_position(), 7);
        assert_eq!(full.span(Role::Answer).unwrap().one_based(), (9, 9));
        assert_eq!(full.prompt(), seq);
        assert!(full.with_answer(Label::Real).is_err());
    }

    #[test]
    fn setting_names_round_trip() {
        for s in Setting::ALL {
            assert_eq!(s.as_str().parse::<Setting>().unwrap(), s);
        }
        assert!("both".parse::<Setting>().is_err());
    }
}

//! Dataset ingestion: ASVspoof-style protocol files and the synthetic
//! two-domain corpus.

mod protocol;
mod synth;

pub use protocol::{parse_protocol, parse_protocol_line, parse_protocol_str, resolve_audio_path, split_for_utterance, ProtocolRecord};
pub use synth::{
    label_for_index, synth_dataset, synth_split, synth_utterance, utterance_id, ArtifactKinds, CorpusConfig, Domain, NOTCH_DEPTH_DB,
    DomainProfile, SynthConfig, NOTCH_HI_HZ, NOTCH_LO_HZ, PHASE_RESET_SECS, SMOOTH_BLOCK,
};

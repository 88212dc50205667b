//! Byte-level text vocabulary with five special tokens.

pub const BOS: u32 = 256;
pub const EOS: u32 = 257;
pub const REAL: u32 = 258;
pub const FAKE: u32 = 259;
pub const IMG: u32 = 260;
pub const VOCAB_SIZE: usize = 261;

pub fn tokenize_text(text: &str) -> Vec<u32> {
    text.bytes().map(u32::from).collect()
}

/// Inverse of [`tokenize_text`]. Special tokens render as `<bos>`, `<eos>`,
/// `<real>`, `<fake>` and `<image>`.
pub fn detokenize(ids: &[u32]) -> String {
    let mut bytes = Vec::with_capacity(ids.len());
    for &id in ids {
        match id {
            0..=255 => bytes.push(id as u8),
            BOS => bytes.extend_from_slice(b"<bos>"),
            EOS => bytes.extend_from_slice(b"<eos>"),
            REAL => bytes.extend_from_slice(b"<real>"),
            FAKE => bytes.extend_from_slice(b"<fake>"),
            IMG => bytes.extend_from_slice(b"<image>"),
            _ => bytes.extend_from_slice(b"<unk>"),
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use super::ModelError;
use crate::distmath::TokenId;

pub const BYTE_BOS: TokenId = TokenId(256);
pub const BYTE_EOS: TokenId = TokenId(257);
pub const BYTE_VOCAB_SIZE: usize = 258;

const WORD_RESERVED: [&str; 3] = ["<bos>", "<eos>", "<unk>"];

/// Text <-> token conversion.
///
/// `Byte` maps each UTF-8 byte to its value and reserves 256/257 for BOS/EOS.
/// `Word` splits on whitespace against a vocabulary list (one word per line
/// on disk). `Ids` reads and writes whitespace-separated decimal token ids,
/// for synthetic models without a text vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub enum Tokenizer {
    Byte,
    Word { words: Vec<String>, index: HashMap<String, u32> },
    Ids { vocab_size: usize },
}

impl Tokenizer {
    /// Word vocabulary from every distinct whitespace-separated word in `text`,
    /// sorted, after the reserved `<bos>`, `<eos>`, `<unk>` entries.
    pub fn word_from_corpus(text: &str) -> Self {
        let distinct: BTreeSet<&str> =
            text.split_whitespace().filter(|w| !WORD_RESERVED.contains(w)).collect();
        let words = WORD_RESERVED.iter().copied().chain(distinct).map(str::to_owned).collect();
        Self::word_from_list(words)
    }

    pub fn word_from_list(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Tokenizer::Word { words, index }
    }

    pub fn load_word_vocab(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path)?;
        let words: Vec<String> = text.lines().map(str::to_owned).filter(|w| !w.is_empty()).collect();
        if words.is_empty() {
            return Err(ModelError::Malformed(format!("empty vocabulary file {}", path.display())));
        }
        Ok(Self::word_from_list(words))
    }

    pub fn save_word_vocab(&self, path: &Path) -> Result<(), ModelError> {
        match self {
            Tokenizer::Word { words, .. } => {
                let mut out = words.join("\n");
                out.push('\n');
                fs::write(path, out)?;
                Ok(())
            }
            _ => Err(ModelError::InvalidParameter("only word tokenizers have a vocab file".into())),
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            Tokenizer::Byte => BYTE_VOCAB_SIZE,
            Tokenizer::Word { words, .. } => words.len(),
            Tokenizer::Ids { vocab_size } => *vocab_size,
        }
    }

    pub fn bos(&self) -> Option<TokenId> {
        match self {
            Tokenizer::Byte => Some(BYTE_BOS),
            Tokenizer::Word { index, .. } => index.get("<bos>").map(|&i| TokenId(i)),
            Tokenizer::Ids { .. } => None,
        }
    }

    pub fn eos(&self) -> Option<TokenId> {
        match self {
            Tokenizer::Byte => Some(BYTE_EOS),
            Tokenizer::Word { index, .. } => index.get("<eos>").map(|&i| TokenId(i)),
            Tokenizer::Ids { .. } => None,
        }
    }

    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>, ModelError> {
        match self {
            Tokenizer::Byte => Ok(text.bytes().map(|b| TokenId(b as u32)).collect()),
            Tokenizer::Word { index, .. } => text
                .split_whitespace()
                .map(|w| {
                    index
                        .get(w)
                        .or_else(|| index.get("<unk>"))
                        .map(|&i| TokenId(i))
                        .ok_or_else(|| ModelError::UnknownWord(w.to_owned()))
                })
                .collect(),
            Tokenizer::Ids { vocab_size } => text
                .split_whitespace()
                .map(|w| {
                    let id: u32 = w
                        .parse()
                        .map_err(|_| ModelError::InvalidParameter(format!("not a token id: {w:?}")))?;
                    if id as usize >= *vocab_size {
                        return Err(ModelError::TokenOutOfRange { token: id, vocab_size: *vocab_size });
                    }
                    Ok(TokenId(id))
                })
                .collect(),
        }
    }

    pub fn decode(&self, tokens: &[TokenId]) -> String {
        match self {
            Tokenizer::Byte => {
                let bytes: Vec<u8> = tokens.iter().filter(|t| t.0 < 256).map(|t| t.0 as u8).collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
            Tokenizer::Word { .. } | Tokenizer::Ids { .. } => {
                tokens.iter().map(|&t| self.token_text(t)).collect::<Vec<_>>().join(" ")
            }
        }
    }

    /// Display form of a single token, used by traces.
    pub fn token_text(&self, token: TokenId) -> String {
        match self {
            Tokenizer::Byte => match token {
                BYTE_BOS => "<bos>".into(),
                BYTE_EOS => "<eos>".into(),
                TokenId(b) if b < 128 && (b as u8 == b' ' || (b as u8).is_ascii_graphic()) => {
                    (b as u8 as char).to_string()
                }
                TokenId(b) if b == b'\n' as u32 => "\\n".into(),
                TokenId(b) if b < 256 => format!("\\x{b:02x}"),
                TokenId(b) => format!("<{b}>"),
            },
            Tokenizer::Word { words, .. } => {
                words.get(token.index()).cloned().unwrap_or_else(|| format!("<{}>", token.0))
            }
            Tokenizer::Ids { .. } => token.0.to_string(),
        }
    }

    /// Separator printed between tokens when rendering traces.
    pub fn joiner(&self) -> &'static str {
        match self {
            Tokenizer::Byte => "",
            _ => " ",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn word_round_trip_and_unknown() {
        let t = Tokenizer::word_from_corpus("the cat sat on the mat");
        assert_eq!(t.vocab_size(), 3 + 5);
        let ids = t.encode("the mat").unwrap();
        assert_eq!(t.decode(&ids), "the mat");
        let unk = t.encode("dog").unwrap();
        assert_eq!(t.token_text(unk[0]), "<unk>");
        assert_eq!(t.bos(), Some(TokenId(0)));
    }

    #[test]
    fn word_vocab_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        let t = Tokenizer::word_from_corpus("b a c a");
        t.save_word_vocab(&path).unwrap();
        assert_eq!(Tokenizer::load_word_vocab(&path).unwrap(), t);
    }

    #[test]
    fn ids_mode() {
        let t = Tokenizer::Ids { vocab_size: 4 };
        assert_eq!(t.encode("1 3").unwrap(), vec![TokenId(1), TokenId(3)]);
        assert!(t.encode("4").is_err());
        assert_eq!(t.decode(&[TokenId(2), TokenId(0)]), "2 0");
    }

    proptest! {
        #[test]
        fn byte_round_trip(text in ".*") {
            let t = Tokenizer::Byte;
            prop_assert_eq!(t.decode(&t.encode(&text).unwrap()), text);
        }
    }
}

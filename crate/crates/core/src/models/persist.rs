//! Binary n-gram model files.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic        4 bytes  "SDNG"
//! version      u16
//! order        u32
//! smoothing    f64
//! vocab_size   u32
//! n_contexts   u64
//! n_contexts × record:
//!     record_len  u32   byte length of the rest of the record
//!     context     (order - 1) × u32
//!     n_entries   u32
//!     n_entries × (token u32, count u64)
//! crc32        u32      IEEE CRC of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use super::ngram::{ContextCounts, NGramModel};
use super::ModelError;

pub const MODEL_MAGIC: &[u8; 4] = b"SDNG";
pub const MODEL_FORMAT_VERSION: u16 = 1;

pub fn save_model(model: &NGramModel, path: &Path) -> Result<(), ModelError> {
    fs::write(path, encode(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<NGramModel, ModelError> {
    decode(&fs::read(path)?)
}

pub(crate) fn encode(model: &NGramModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.order() as u32).to_le_bytes());
    out.extend_from_slice(&model.smoothing().to_le_bytes());
    out.extend_from_slice(&(crate::models::LanguageModel::vocab_size(model) as u32).to_le_bytes());
    out.extend_from_slice(&(model.counts.len() as u64).to_le_bytes());
    for (ctx, counts) in &model.counts {
        let body_len = 4 * ctx.len() + 4 + 12 * counts.next.len();
        out.extend_from_slice(&(body_len as u32).to_le_bytes());
        for t in ctx {
            out.extend_from_slice(&t.to_le_bytes());
        }
        out.extend_from_slice(&(counts.next.len() as u32).to_le_bytes());
        for (tok, n) in &counts.next {
            out.extend_from_slice(&tok.to_le_bytes());
            out.extend_from_slice(&n.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            ModelError::Malformed(format!("unexpected end of data at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<NGramModel, ModelError> {
    if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
        return Err(ModelError::BadMagic);
    }
    if bytes.len() < 6 {
        return Err(ModelError::ChecksumMismatch);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MODEL_FORMAT_VERSION {
        return Err(ModelError::VersionMismatch { found: version, expected: MODEL_FORMAT_VERSION });
    }
    if bytes.len() < 10 {
        return Err(ModelError::ChecksumMismatch);
    }
    let (body, crc) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().unwrap()) {
        return Err(ModelError::ChecksumMismatch);
    }

    let mut cur = Cursor { buf: body, pos: 6 };
    let order = cur.u32()? as usize;
    let smoothing = cur.f64()?;
    let vocab_size = cur.u32()? as usize;
    let n_contexts = cur.u64()?;
    let mut model = NGramModel::empty(order, smoothing, vocab_size)?;
    for _ in 0..n_contexts {
        let record_len = cur.u32()? as usize;
        let record_start = cur.pos;
        let ctx = (0..order - 1).map(|_| cur.u32()).collect::<Result<Vec<_>, _>>()?;
        let n_entries = cur.u32()?;
        let mut counts = ContextCounts::default();
        for _ in 0..n_entries {
            let tok = cur.u32()?;
            let n = cur.u64()?;
            if tok as usize >= vocab_size {
                return Err(ModelError::TokenOutOfRange { token: tok, vocab_size });
            }
            counts.total += n;
            counts.next.insert(tok, n);
        }
        if cur.pos - record_start != record_len {
            return Err(ModelError::Malformed(format!(
                "record length {record_len} does not match contents"
            )));
        }
        model.counts.insert(ctx, counts);
    }
    if cur.pos != body.len() {
        return Err(ModelError::Malformed("trailing bytes after count table".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmath::TokenId;
    use crate::models::{train_ngram, LanguageModel};
    use crate::rng::Stream;

    fn sample_model() -> NGramModel {
        let mut rng = Stream::new(8);
        let corpus: Vec<TokenId> = (0..300).map(|_| TokenId(rng.below(7) as u32)).collect();
        train_ngram(&corpus, 3, 0.05, 7).unwrap()
    }

    fn all_prefixes(vocab: u32, max_len: usize) -> Vec<Vec<TokenId>> {
        let mut out = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for p in &frontier {
                for t in 0..vocab {
                    let mut q: Vec<TokenId> = p.clone();
                    q.push(TokenId(t));
                    next.push(q);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.sdng");
        let m = sample_model();
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, m);
        for prefix in all_prefixes(7, 3) {
            let a = m.evaluate(&prefix);
            let b = back.evaluate(&prefix);
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode(&sample_model());
        assert!(matches!(decode(&bytes[..bytes.len() - 7]), Err(ModelError::ChecksumMismatch)));
        assert!(matches!(decode(&bytes[..5]), Err(ModelError::ChecksumMismatch)));
        let mut flipped = bytes.clone();
        flipped[30] ^= 0x40;
        assert!(matches!(decode(&flipped), Err(ModelError::ChecksumMismatch)));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(decode(&magic), Err(ModelError::BadMagic)));
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(matches!(decode(&version), Err(ModelError::VersionMismatch { found: 9, .. })));
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample_model());
        assert_eq!(&bytes[..4], b"SDNG");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(bytes[10..18].try_into().unwrap()), 0.05);
        assert_eq!(u32::from_le_bytes(bytes[18..22].try_into().unwrap()), 7);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_model(Path::new("/nonexistent/m.sdng")), Err(ModelError::Io(_))));
    }
}

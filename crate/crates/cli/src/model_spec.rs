//! Model arguments: a model file path or one of the built-in models.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use specdec::distmath::Distribution;
use specdec::models::{
    load_model, random_model, CopyModel, LanguageModel, NGramModel, StatelessModel, Tokenizer,
    BYTE_VOCAB_SIZE,
};
use specdec::Stream;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSpec {
    /// A trained model file.
    File(PathBuf),
    /// The target model itself (draft only).
    Same,
    Uniform,
    Copy { min_match: usize, copy_mass: f64 },
    Stateless(Vec<f64>),
    RandomNgram { seed: u64, vocab: usize, order: usize },
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let fields: Vec<&str> = if rest.is_empty() { Vec::new() } else { rest.split(':').collect() };
        let num = |i: usize, what: &str| -> Result<&str, String> {
            fields.get(i).copied().ok_or_else(|| format!("{head}: missing {what}"))
        };
        match head {
            "same" => Ok(ModelSpec::Same),
            "uniform" => Ok(ModelSpec::Uniform),
            "copy" => {
                let min_match = match fields.first() {
                    Some(v) => v.parse().map_err(|_| format!("copy: bad min match {v:?}"))?,
                    None => CopyModel::DEFAULT_MIN_MATCH,
                };
                let copy_mass = match fields.get(1) {
                    Some(v) => v.parse().map_err(|_| format!("copy: bad mass {v:?}"))?,
                    None => CopyModel::DEFAULT_COPY_MASS,
                };
                Ok(ModelSpec::Copy { min_match, copy_mass })
            }
            "stateless" => {
                let probs = num(0, "probabilities")?
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|_| format!("stateless: bad probability {v:?}")))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(ModelSpec::Stateless(probs))
            }
            "random-ngram" => {
                let seed = num(0, "seed")?.parse().map_err(|_| "random-ngram: bad seed".to_string())?;
                let vocab = num(1, "vocab size")?.parse().map_err(|_| "random-ngram: bad vocab".to_string())?;
                let order = match fields.get(2) {
                    Some(v) => v.parse().map_err(|_| "random-ngram: bad order".to_string())?,
                    None => 2,
                };
                Ok(ModelSpec::RandomNgram { seed, vocab, order })
            }
            _ if s.is_empty() => Err("empty model argument".into()),
            _ => Ok(ModelSpec::File(PathBuf::from(s))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenizerMode {
    /// Word vocabulary when `<model>.vocab` exists, bytes for a 258-token vocabulary, ids otherwise.
    Auto,
    Byte,
    Word,
    Ids,
}

pub fn vocab_path(model_path: &Path) -> PathBuf {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".vocab");
    PathBuf::from(s)
}

fn random_ngram(seed: u64, vocab: usize, order: usize) -> Result<NGramModel> {
    let mut rng = Stream::new(seed);
    Ok(NGramModel::random(order, vocab, 0.05, 2.0, &mut rng)?)
}

/// Builds a target model. `same` is not allowed here.
pub fn build_target(spec: &ModelSpec) -> Result<Box<dyn LanguageModel>> {
    let model: Box<dyn LanguageModel> = match spec {
        ModelSpec::File(path) => {
            Box::new(load_model(path).with_context(|| format!("loading model {}", path.display()))?)
        }
        ModelSpec::Same => bail!("\"same\" can only be used for the draft model"),
        ModelSpec::Uniform | ModelSpec::Copy { .. } => {
            bail!("built-in {spec:?} needs a vocabulary size; use it as a draft model")
        }
        ModelSpec::Stateless(probs) => Box::new(StatelessModel::new(Distribution::new(probs.clone())?)),
        ModelSpec::RandomNgram { seed, vocab, order } => Box::new(random_ngram(*seed, *vocab, *order)?),
    };
    Ok(model)
}

/// Builds a draft model sized to `vocab`. Returns `None` for `same`.
pub fn build_draft(spec: &ModelSpec, vocab: usize) -> Result<Option<Box<dyn LanguageModel>>> {
    let model: Box<dyn LanguageModel> = match spec {
        ModelSpec::Same => return Ok(None),
        ModelSpec::Uniform => Box::new(random_model(vocab)),
        ModelSpec::Copy { min_match, copy_mass } => Box::new(CopyModel::new(vocab, *min_match, *copy_mass)?),
        other => build_target(other)?,
    };
    Ok(Some(model))
}

pub fn resolve_tokenizer(mode: TokenizerMode, target: &ModelSpec, vocab: usize) -> Result<Tokenizer> {
    let sibling = match target {
        ModelSpec::File(path) => Some(vocab_path(path)),
        _ => None,
    };
    let tokenizer = match mode {
        TokenizerMode::Byte => Tokenizer::Byte,
        TokenizerMode::Ids => Tokenizer::Ids { vocab_size: vocab },
        TokenizerMode::Word => {
            let path = sibling.ok_or_else(|| anyhow!("word tokenizer needs a model file with a .vocab file"))?;
            Tokenizer::load_word_vocab(&path).with_context(|| format!("loading {}", path.display()))?
        }
        TokenizerMode::Auto => match sibling.filter(|p| p.exists()) {
            Some(path) => Tokenizer::load_word_vocab(&path)?,
            None if vocab == BYTE_VOCAB_SIZE => Tokenizer::Byte,
            None => Tokenizer::Ids { vocab_size: vocab },
        },
    };
    if tokenizer.vocab_size() != vocab {
        bail!("tokenizer has {} tokens but the model has {vocab}", tokenizer.vocab_size());
    }
    Ok(tokenizer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_builtins() {
        assert_eq!("same".parse::<ModelSpec>().unwrap(), ModelSpec::Same);
        assert_eq!(
            "copy".parse::<ModelSpec>().unwrap(),
            ModelSpec::Copy { min_match: 2, copy_mass: 0.9 }
        );
        assert_eq!(
            "copy:3:0.5".parse::<ModelSpec>().unwrap(),
            ModelSpec::Copy { min_match: 3, copy_mass: 0.5 }
        );
        assert_eq!(
            "stateless:0.8,0.2".parse::<ModelSpec>().unwrap(),
            ModelSpec::Stateless(vec![0.8, 0.2])
        );
        assert_eq!(
            "random-ngram:4:12".parse::<ModelSpec>().unwrap(),
            ModelSpec::RandomNgram { seed: 4, vocab: 12, order: 2 }
        );
        assert_eq!(
            "models/en.sdng".parse::<ModelSpec>().unwrap(),
            ModelSpec::File(PathBuf::from("models/en.sdng"))
        );
        assert!("stateless:0.5,x".parse::<ModelSpec>().is_err());
        assert!("random-ngram:1".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn same_is_draft_only() {
        assert!(build_target(&ModelSpec::Same).is_err());
        assert!(build_draft(&ModelSpec::Same, 4).unwrap().is_none());
        assert_eq!(build_draft(&ModelSpec::Uniform, 7).unwrap().unwrap().vocab_size(), 7);
    }

    #[test]
    fn auto_tokenizer() {
        let spec = ModelSpec::RandomNgram { seed: 1, vocab: 258, order: 2 };
        assert_eq!(resolve_tokenizer(TokenizerMode::Auto, &spec, 258).unwrap(), Tokenizer::Byte);
        assert_eq!(
            resolve_tokenizer(TokenizerMode::Auto, &spec, 9).unwrap(),
            Tokenizer::Ids { vocab_size: 9 }
        );
        assert!(resolve_tokenizer(TokenizerMode::Byte, &spec, 9).is_err());
    }
}

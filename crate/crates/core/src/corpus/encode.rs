use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::labels::SenseLabel;
use super::vocab::{self, Vocabulary, PAD_ID, UNK_ID};

pub const DEFAULT_MAX_LEN: usize = 256;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    /// Keep the last `max_len` tokens.
    #[default]
    KeepLast,
    KeepFirst,
}

impl std::str::FromStr for Truncation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "keep-last" => Ok(Self::KeepLast),
            "keep-first" => Ok(Self::KeepFirst),
            other => Err(format!("unknown truncation `{other}` (keep-last | keep-first)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeConfig {
    pub max_len: usize,
    pub truncation: Truncation,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        Self {
            max_len: DEFAULT_MAX_LEN,
            truncation: Truncation::KeepLast,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleKind {
    Pair,
    Arg1Only,
    Arg2Only,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedSample {
    /// Left-padded with PAD to the fixed length.
    pub ids: Vec<u32>,
    pub mask: Vec<bool>,
    pub label: SenseLabel,
    pub gold: Vec<SenseLabel>,
    pub kind: SampleKind,
    pub split: Split,
    /// Position of the source relation in its split.
    pub relation: usize,
}

impl EncodedSample {
    pub fn is_correct(&self, predicted: SenseLabel) -> bool {
        self.gold.contains(&predicted)
    }

    pub fn valid_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Wraps each present argument in its markers, Arg1 first, no separator.
/// Argument tokens may not themselves be markers.
pub fn insert_markers(arg1: Option<&[String]>, arg2: Option<&[String]>) -> Result<Vec<String>> {
    if arg1.is_none() && arg2.is_none() {
        return Err(Error::contract("insert_markers", "both arguments absent"));
    }
    let mut out = Vec::new();
    for (arg, open, close) in [
        (arg1, vocab::ARG1_OPEN, vocab::ARG1_CLOSE),
        (arg2, vocab::ARG2_OPEN, vocab::ARG2_CLOSE),
    ] {
        if let Some(tokens) = arg {
            if let Some(t) = tokens.iter().find(|t| vocab::is_marker(t)) {
                return Err(Error::contract(
                    "insert_markers",
                    format!("argument contains marker token {t}"),
                ));
            }
            out.push(open.to_string());
            out.extend(tokens.iter().cloned());
            out.push(close.to_string());
        }
    }
    Ok(out)
}

/// Maps tokens to ids (UNK when unknown), truncates to `max_len`, and
/// left-pads with PAD. Returns the ids and the validity mask.
pub fn encode(tokens: &[String], vocab: &Vocabulary, config: &EncodeConfig) -> Result<(Vec<u32>, Vec<bool>)> {
    if tokens.is_empty() {
        return Err(Error::contract("encode", "empty token sequence"));
    }
    if config.max_len == 0 {
        return Err(Error::contract("encode", "max_len is zero"));
    }
    let kept = if tokens.len() > config.max_len {
        match config.truncation {
            Truncation::KeepLast => &tokens[tokens.len() - config.max_len..],
            Truncation::KeepFirst => &tokens[..config.max_len],
        }
    } else {
        tokens
    };
    let pad = config.max_len - kept.len();
    let mut ids = vec![PAD_ID; pad];
    let mut mask = vec![false; pad];
    for t in kept {
        let id = match vocab.id(t) {
            Some(PAD_ID) | None => UNK_ID,
            Some(id) => id,
        };
        ids.push(id);
        mask.push(true);
    }
    Ok((ids, mask))
}

/// Tokens at valid positions.
pub fn decode(ids: &[u32], mask: &[bool], vocab: &Vocabulary) -> Vec<String> {
    ids.iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&id, _)| vocab.token(id).unwrap_or(vocab::UNK).to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn markers_wrap_both_arguments() {
        let out = insert_markers(Some(&s(&["甲"])), Some(&s(&["乙"]))).unwrap();
        assert_eq!(out, s(&["<ARG1>", "甲", "</ARG1>", "<ARG2>", "乙", "</ARG2>"]));
    }

    #[test]
    fn markers_single_argument() {
        let out = insert_markers(None, Some(&s(&["乙"]))).unwrap();
        assert_eq!(out, s(&["<ARG2>", "乙", "</ARG2>"]));
        assert!(insert_markers(None, None).is_err());
        assert!(insert_markers(Some(&s(&["a", "</ARG1>"])), None).is_err());
    }

    #[test]
    fn short_sequences_are_left_padded() {
        let toks = s(&["a", "b", "c", "d", "e", "f"]);
        let v = Vocabulary::build(toks.iter().map(String::as_str), [], |_| false);
        let cfg = EncodeConfig { max_len: 8, ..EncodeConfig::default() };
        let (ids, mask) = encode(&toks, &v, &cfg).unwrap();
        assert_eq!(ids, vec![0, 0, 6, 7, 8, 9, 10, 11]);
        assert_eq!(mask, vec![false, false, true, true, true, true, true, true]);
    }

    #[test]
    fn long_sequences_keep_the_tail() {
        let toks: Vec<String> = (0..300).map(|i| format!("t{i}")).collect();
        let v = Vocabulary::build(toks.iter().map(String::as_str), [], |_| false);
        let (ids, mask) = encode(&toks, &v, &EncodeConfig::default()).unwrap();
        assert_eq!(ids.len(), 256);
        assert!(mask.iter().all(|&m| m));
        assert_eq!(decode(&ids, &mask, &v), toks[44..].to_vec());
        let first = EncodeConfig { truncation: Truncation::KeepFirst, ..EncodeConfig::default() };
        let (ids, mask) = encode(&toks, &v, &first).unwrap();
        assert_eq!(decode(&ids, &mask, &v), toks[..256].to_vec());
    }

    #[test]
    fn unknown_tokens_become_unk() {
        let v = Vocabulary::new();
        let (ids, _) = encode(&s(&["zzz", "<PAD>", "<ARG1>"]), &v, &EncodeConfig { max_len: 3, ..Default::default() }).unwrap();
        assert_eq!(ids, vec![UNK_ID, UNK_ID, 2]);
        assert!(encode(&[], &v, &EncodeConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn marker_length_and_round_trip(
            a1 in prop::option::of(prop::collection::vec("[a-z]{1,3}", 1..10)),
            a2 in prop::collection::vec("[a-z]{1,3}", 1..10),
            max_len in 1usize..40,
        ) {
            let out = insert_markers(a1.as_deref(), Some(&a2)).unwrap();
            let present = 1 + usize::from(a1.is_some());
            prop_assert_eq!(out.len(), a1.as_ref().map_or(0, Vec::len) + a2.len() + 2 * present);

            let v = Vocabulary::build(out.iter().map(String::as_str), [], |_| false);
            let cfg = EncodeConfig { max_len, truncation: Truncation::KeepLast };
            let (ids, mask) = encode(&out, &v, &cfg).unwrap();
            prop_assert_eq!(ids.len(), max_len);
            // padding is a contiguous prefix and matches PAD ids
            let first_valid = mask.iter().position(|&m| m).unwrap();
            prop_assert!(mask[first_valid..].iter().all(|&m| m));
            for (id, m) in ids.iter().zip(&mask) {
                prop_assert_eq!(*m, *id != PAD_ID);
            }
            if out.len() <= max_len {
                prop_assert_eq!(decode(&ids, &mask, &v), out);
            }
        }
    }
}

//! Partial argument sampling and deterministic mini-batching.
//!
//! In training and development data each relation `(a1, a2, y)` becomes
//! `pair_duplication` copies of the joint pair plus `(a1, y)` and `(a2, y)`.
//! Test relations always yield exactly one pair sample.

use serde::{Deserialize, Serialize};

use crate::corpus::{encode, insert_markers, EncodeConfig, EncodedSample, LabeledRelation, SampleKind, Split, Vocabulary};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub partial_sampling: bool,
    pub pair_duplication: usize,
    pub batch_size: usize,
    /// Seeds the data order only; initialization has its own seed.
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            partial_sampling: true,
            pair_duplication: 2,
            batch_size: 80,
            seed: 1,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pair_duplication == 0 || self.batch_size == 0 {
            return Err(Error::contract(
                "SamplingConfig",
                "pair_duplication and batch_size must be at least 1",
            ));
        }
        Ok(())
    }
}

fn sample(
    r: &LabeledRelation,
    index: usize,
    kind: SampleKind,
    split: Split,
    vocab: &Vocabulary,
    enc: &EncodeConfig,
) -> Result<EncodedSample> {
    let (a1, a2) = match kind {
        SampleKind::Pair => (Some(&r.relation.arg1[..]), Some(&r.relation.arg2[..])),
        SampleKind::Arg1Only => (Some(&r.relation.arg1[..]), None),
        SampleKind::Arg2Only => (None, Some(&r.relation.arg2[..])),
    };
    let tokens = insert_markers(a1, a2)?;
    let (ids, mask) = encode(&tokens, vocab, enc)?;
    Ok(EncodedSample {
        ids,
        mask,
        label: r.label,
        gold: r.gold.clone(),
        kind,
        split,
        relation: index,
    })
}

/// Sample kinds produced for one relation of `split`.
pub fn expansion(split: Split, config: &SamplingConfig) -> Vec<SampleKind> {
    if !config.partial_sampling || split == Split::Test {
        return vec![SampleKind::Pair];
    }
    let mut kinds = vec![SampleKind::Pair; config.pair_duplication];
    kinds.extend([SampleKind::Arg1Only, SampleKind::Arg2Only]);
    kinds
}

pub fn expand_partial(
    relations: &[LabeledRelation],
    split: Split,
    vocab: &Vocabulary,
    config: &SamplingConfig,
    enc: &EncodeConfig,
) -> Result<Vec<EncodedSample>> {
    config.validate()?;
    let kinds = expansion(split, config);
    let mut out = Vec::with_capacity(relations.len() * kinds.len());
    for (i, r) in relations.iter().enumerate() {
        for &kind in &kinds {
            out.push(sample(r, i, kind, split, vocab, enc)?);
        }
    }
    Ok(out)
}

/// One sample of the given kind per relation (e.g. an Arg1-only probe set).
pub fn encode_kind(
    relations: &[LabeledRelation],
    kind: SampleKind,
    split: Split,
    vocab: &Vocabulary,
    enc: &EncodeConfig,
) -> Result<Vec<EncodedSample>> {
    relations
        .iter()
        .enumerate()
        .map(|(i, r)| sample(r, i, kind, split, vocab, enc))
        .collect()
}

/// A permutation of `0..n` fixed by `(seed, epoch)`, cut into batches. The
/// last batch may be short.
pub fn shuffle_batches(n: usize, config: &SamplingConfig, epoch: usize) -> Result<Vec<Vec<usize>>> {
    config.validate()?;
    if n == 0 {
        return Err(Error::contract("shuffle_batches", "no samples"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::from_coords(config.seed, &[0x5348_5546, epoch as u64]).shuffle(&mut order);
    Ok(order.chunks(config.batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{vocab, RawRelation, RelationType, SenseLabel};

    fn relation(a1: &[&str], a2: &[&str]) -> LabeledRelation {
        LabeledRelation {
            relation: RawRelation {
                doc_id: "d".into(),
                relation_type: RelationType::Implicit,
                arg1: a1.iter().map(|s| s.to_string()).collect(),
                arg2: a2.iter().map(|s| s.to_string()).collect(),
                senses: vec!["Causation".into()],
            },
            label: SenseLabel::Causation,
            gold: vec![SenseLabel::Causation],
        }
    }

    fn markers(s: &EncodedSample) -> usize {
        s.ids.iter().filter(|&&id| (2..6).contains(&id)).count()
    }

    #[test]
    fn one_training_relation_yields_four_samples() {
        let rels = vec![relation(&["a", "b"], &["c"])];
        let v = Vocabulary::build(["a", "b", "c"], [], |_| false);
        let enc = EncodeConfig { max_len: 10, ..EncodeConfig::default() };
        let out = expand_partial(&rels, Split::Train, &v, &SamplingConfig::default(), &enc).unwrap();
        let kinds: Vec<_> = out.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, vec![SampleKind::Pair, SampleKind::Pair, SampleKind::Arg1Only, SampleKind::Arg2Only]);
        assert_eq!(out[0], out[1]);
        assert_eq!(markers(&out[0]), 4);
        assert_eq!(markers(&out[2]), 2);
        assert_eq!(markers(&out[3]), 2);
        assert_eq!(
            vocab_tokens(&out[3], &v),
            vec![vocab::ARG2_OPEN, "c", vocab::ARG2_CLOSE]
        );
    }

    fn vocab_tokens(s: &EncodedSample, v: &Vocabulary) -> Vec<String> {
        crate::corpus::decode(&s.ids, &s.mask, v)
    }

    #[test]
    fn counts_per_split_and_switch() {
        let rels: Vec<_> = (0..25).map(|_| relation(&["a"], &["b"])).collect();
        let v = Vocabulary::build(["a", "b"], [], |_| false);
        let enc = EncodeConfig { max_len: 8, ..EncodeConfig::default() };
        let on = SamplingConfig::default();
        let off = SamplingConfig { partial_sampling: false, ..on.clone() };
        for (split, cfg, expect) in [
            (Split::Train, &on, 100),
            (Split::Dev, &on, 100),
            (Split::Test, &on, 25),
            (Split::Train, &off, 25),
            (Split::Dev, &off, 25),
        ] {
            let out = expand_partial(&rels, split, &v, cfg, &enc).unwrap();
            assert_eq!(out.len(), expect, "{split:?}");
            if split == Split::Test || !cfg.partial_sampling {
                assert!(out.iter().all(|s| s.kind == SampleKind::Pair));
            } else {
                let pairs = out.iter().filter(|s| s.kind == SampleKind::Pair).count();
                assert_eq!(pairs, out.len() - pairs);
            }
        }
    }

    #[test]
    fn batches_cover_every_sample_once() {
        let cfg = SamplingConfig { batch_size: 80, seed: 3, ..SamplingConfig::default() };
        let batches = shuffle_batches(161, &cfg, 0).unwrap();
        assert_eq!(batches.iter().map(Vec::len).collect::<Vec<_>>(), vec![80, 80, 1]);
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        assert_eq!(all, (0..161).collect::<Vec<_>>());
        assert_eq!(batches, shuffle_batches(161, &cfg, 0).unwrap());
        assert_ne!(batches, shuffle_batches(161, &cfg, 1).unwrap());
        assert!(shuffle_batches(0, &cfg, 0).is_err());
        let bad = SamplingConfig { batch_size: 0, ..cfg };
        assert!(shuffle_batches(5, &bad, 0).is_err());
    }
}

//! Relation files in, fixed-length labeled id sequences out.

mod conll;
mod embeddings;
mod encode;
mod labels;
pub mod vocab;

use std::path::Path;

use crate::error::Result;

pub use conll::{
    filter_implicit, label_all, label_of, parse_relations, read_relations, sense_counts, LabeledRelation,
    ParseIndex, RawRelation, RelationType,
};
pub use embeddings::{embedding_table, load_embeddings, LoadedEmbeddings, PretrainedVectors};
pub use encode::{
    decode, encode, insert_markers, EncodeConfig, EncodedSample, SampleKind, Split, Truncation, DEFAULT_MAX_LEN,
};
pub use labels::{SenseLabel, NUM_CLASSES};
pub use vocab::Vocabulary;

/// Reads, filters to implicit + EntRel, and labels one split.
pub fn load_split(path: &Path) -> Result<Vec<LabeledRelation>> {
    label_all(filter_implicit(read_relations(path)?))
}

fn tokens_of(relations: &[LabeledRelation]) -> impl Iterator<Item = &str> {
    relations
        .iter()
        .flat_map(|r| r.relation.arg1.iter().chain(&r.relation.arg2))
        .map(String::as_str)
}

/// Vocabulary over the training tokens, plus held-out tokens that have a
/// pretrained vector. Without vectors only training tokens are admitted.
pub fn build_vocabulary(
    train: &[LabeledRelation],
    held_out: &[&[LabeledRelation]],
    pretrained: Option<&PretrainedVectors>,
) -> Vocabulary {
    let extra = held_out.iter().flat_map(|split| tokens_of(split));
    Vocabulary::build(tokens_of(train), extra, |t| pretrained.is_some_and(|p| p.contains(t)))
}

/// Every distinct token in the given splits (used to filter a vector file).
pub fn token_set(splits: &[&[LabeledRelation]]) -> std::collections::HashSet<String> {
    splits
        .iter()
        .flat_map(|s| tokens_of(s))
        .map(str::to_string)
        .collect()
}

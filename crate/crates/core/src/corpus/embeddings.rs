//! word2vec-style text vectors: `token v1 v2 ... vd` per line, with an
//! optional `count dim` header line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::layers::{EmbeddingTable, INIT_SCALE};
use crate::rng::Rng;
use crate::tensor::Matrix;

use super::vocab::{Vocabulary, RESERVED};

#[derive(Clone, Debug, Default)]
pub struct PretrainedVectors {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f32>>,
}

impl PretrainedVectors {
    /// Parses vectors, keeping only tokens for which `keep` holds. The
    /// dimension comes from `expected_dim`, else the header, else the first entry.
    pub fn parse(
        reader: impl BufRead,
        expected_dim: Option<usize>,
        keep: impl Fn(&str) -> bool,
    ) -> Result<Self> {
        let mut dim = expected_dim;
        let mut vectors = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse { line: line_no, detail: e.to_string() })?;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let rest: Vec<&str> = fields.collect();
            if i == 0 && rest.len() == 1 {
                if let (Ok(_), Ok(d)) = (token.parse::<usize>(), rest[0].parse::<usize>()) {
                    match dim {
                        Some(e) if e != d => {
                            return Err(Error::Parse {
                                line: 1,
                                detail: format!("header declares dimension {d}, expected {e}"),
                            })
                        }
                        _ => dim = Some(d),
                    }
                    continue;
                }
            }
            let d = *dim.get_or_insert(rest.len());
            if rest.len() != d {
                return Err(Error::Parse {
                    line: line_no,
                    detail: format!("{} values for `{token}`, expected {d}", rest.len()),
                });
            }
            if !keep(token) {
                continue;
            }
            let values = rest
                .iter()
                .map(|x| x.parse::<f32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line: line_no, detail: format!("bad number: {e}") })?;
            vectors.entry(token.to_string()).or_insert(values);
        }
        Ok(Self {
            dim: dim.unwrap_or(0),
            vectors,
        })
    }

    pub fn read(path: &Path, expected_dim: Option<usize>, keep: impl Fn(&str) -> bool) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(file), expected_dim, keep)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }
}

/// Embedding table plus the share of ordinary vocabulary tokens that had a vector.
pub struct LoadedEmbeddings {
    pub table: EmbeddingTable<f32>,
    pub coverage: f64,
    pub found: usize,
}

/// Rows with a pretrained vector are copied verbatim; the rest (markers,
/// UNK, uncovered tokens) are drawn uniformly. PAD stays zero.
pub fn embedding_table(
    vocab: &Vocabulary,
    pretrained: &PretrainedVectors,
    dim: usize,
    rng: &mut Rng,
) -> Result<LoadedEmbeddings> {
    if !pretrained.vectors.is_empty() && pretrained.dim != dim {
        return Err(Error::contract(
            "load_embeddings",
            format!("vectors have dimension {}, model expects {dim}", pretrained.dim),
        ));
    }
    let mut weights = Matrix::zeros(vocab.len(), dim);
    let mut found = 0;
    for (id, token) in vocab.tokens().iter().enumerate() {
        let row = weights.row_mut(id);
        match pretrained.vectors.get(token) {
            Some(v) if id >= RESERVED.len() => {
                row.copy_from_slice(v);
                found += 1;
            }
            _ => {
                for x in row.iter_mut() {
                    *x = rng.uniform(-INIT_SCALE, INIT_SCALE) as f32;
                }
            }
        }
    }
    let ordinary = vocab.len() - RESERVED.len();
    let coverage = if ordinary == 0 { 0.0 } else { found as f64 / ordinary as f64 };
    Ok(LoadedEmbeddings {
        table: EmbeddingTable::new(weights),
        coverage,
        found,
    })
}

pub fn load_embeddings(path: &Path, vocab: &Vocabulary, dim: usize, rng: &mut Rng) -> Result<LoadedEmbeddings> {
    let pretrained = PretrainedVectors::read(path, Some(dim), |t| vocab.id(t).is_some())?;
    embedding_table(vocab, &pretrained, dim, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "4 3\nb 0.5 -1 2\nzz 1 1 1\nd 0.25 0.25 0.25\ne 9 8 7\n";

    fn vocab() -> Vocabulary {
        Vocabulary::build(["a", "b", "c", "d", "e"], [], |_| false)
    }

    #[test]
    fn coverage_and_exact_copies() {
        let pre = PretrainedVectors::parse(FIXTURE.as_bytes(), Some(3), |_| true).unwrap();
        assert_eq!(pre.vectors.len(), 4);
        let v = vocab();
        let out = embedding_table(&v, &pre, 3, &mut Rng::new(1)).unwrap();
        // b, d, e of {a, b, c, d, e}
        assert_eq!(out.found, 3);
        assert!((out.coverage - 0.6).abs() < 1e-12);
        assert_eq!(out.table.weights.row(v.id("b").unwrap() as usize), &[0.5, -1.0, 2.0]);
        assert_eq!(out.table.weights.row(v.id("e").unwrap() as usize), &[9.0, 8.0, 7.0]);
        assert!(out.table.weights.row(0).iter().all(|&x| x == 0.0));
        let a = out.table.weights.row(v.id("a").unwrap() as usize);
        assert!(a.iter().all(|x| x.abs() <= INIT_SCALE as f32 && *x != 0.0));
    }

    #[test]
    fn no_overlap_means_random_rows() {
        let pre = PretrainedVectors::parse("x 1 2\ny 3 4\n".as_bytes(), None, |_| true).unwrap();
        assert_eq!(pre.dim, 2);
        let out = embedding_table(&vocab(), &pre, 2, &mut Rng::new(2)).unwrap();
        assert_eq!(out.found, 0);
        assert_eq!(out.coverage, 0.0);
        for id in 1..vocab().len() {
            assert!(out.table.weights.row(id).iter().any(|&x| x != 0.0));
        }
    }

    #[test]
    fn dimension_mismatch_names_line() {
        let err = PretrainedVectors::parse("a 1 2 3\nb 1 2\n".as_bytes(), None, |_| true).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = PretrainedVectors::parse("2 5\na 1 2 3\n".as_bytes(), None, |_| true).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = PretrainedVectors::parse("2 5\n".as_bytes(), Some(3), |_| true).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn load_from_file_filters_to_vocab() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        std::fs::write(&path, FIXTURE).unwrap();
        let out = load_embeddings(&path, &vocab(), 3, &mut Rng::new(3)).unwrap();
        assert_eq!(out.found, 3);
        assert!(load_embeddings(&dir.path().join("missing"), &vocab(), 3, &mut Rng::new(3)).is_err());
    }
}

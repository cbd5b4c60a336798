use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{add_into, Matrix, Real};

/// Vocabulary id reserved for padding. Its row is pinned at zero.
pub const PAD_ID: u32 = 0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable<T> {
    pub weights: Matrix<T>,
}

impl<T: Real> EmbeddingTable<T> {
    pub fn new(weights: Matrix<T>) -> Self {
        let mut table = Self { weights };
        table.zero_pad_row();
        table
    }

    pub fn vocab_size(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn zero_pad_row(&mut self) {
        if self.weights.rows() > 0 {
            self.weights
                .row_mut(PAD_ID as usize)
                .fill(T::zero());
        }
    }

    /// Row lookup, one vector per id. PAD maps to the zero vector whatever its row holds.
    pub fn forward(&self, ids: &[u32]) -> Result<Vec<Vec<T>>> {
        ids.iter()
            .map(|&id| {
                if id as usize >= self.vocab_size() {
                    Err(Error::contract(
                        "embed_forward",
                        format!("id {id} >= vocab size {}", self.vocab_size()),
                    ))
                } else if id == PAD_ID {
                    Ok(vec![T::zero(); self.dim()])
                } else {
                    Ok(self.weights.row(id as usize).to_vec())
                }
            })
            .collect()
    }

    /// Scatters per-position gradients into sparse row gradients. PAD is skipped.
    pub fn backward(ids: &[u32], grads: &[Vec<T>], into: &mut BTreeMap<u32, Vec<T>>) {
        for (&id, g) in ids.iter().zip(grads) {
            if id == PAD_ID {
                continue;
            }
            match into.get_mut(&id) {
                Some(row) => add_into(row, g),
                None => {
                    into.insert(id, g.clone());
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn table(vocab: usize, dim: usize) -> EmbeddingTable<f64> {
        let mut rng = Rng::new(4);
        let data = (0..vocab * dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        EmbeddingTable::new(Matrix::from_vec(vocab, dim, data).unwrap())
    }

    #[test]
    fn pad_ids_give_zero_vectors() {
        let t = table(8, 4);
        let out = t.forward(&[0, 0, 5]).unwrap();
        assert!(out[0].iter().all(|&x| x == 0.0));
        assert!(out[1].iter().all(|&x| x == 0.0));
        assert_eq!(out[2], t.weights.row(5));
    }

    #[test]
    fn lookup_equals_one_hot_product() {
        let t = table(10, 6);
        let ids = [3u32, 7, 0, 3, 9];
        let looked_up = t.forward(&ids).unwrap();
        let mut one_hot = Matrix::zeros(ids.len(), 10);
        for (i, &id) in ids.iter().enumerate() {
            one_hot[(i, id as usize)] = 1.0;
        }
        let product = one_hot.matmul(&t.weights).unwrap();
        for (i, v) in looked_up.iter().enumerate() {
            assert_eq!(v.as_slice(), product.row(i));
        }
    }

    #[test]
    fn out_of_range_id() {
        assert!(table(4, 2).forward(&[1, 4]).is_err());
    }

    #[test]
    fn gradient_only_touches_looked_up_rows() {
        let ids = [0u32, 2, 5, 2];
        let grads = vec![vec![1.0, 1.0]; 4];
        let mut rows = BTreeMap::new();
        EmbeddingTable::<f64>::backward(&ids, &grads, &mut rows);
        assert_eq!(rows.keys().copied().collect::<Vec<_>>(), vec![2, 5]);
        assert_eq!(rows[&2], vec![2.0, 2.0]);
    }
}

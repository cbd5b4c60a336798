//! The network: embedding → dropout → BiLSTM (⊕-merged) → attention or
//! final-hidden readout → dropout → affine → softmax.

pub mod attention;
pub mod dropout;
pub mod embedding;
pub mod lstm;
mod model;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::{add_into, Matrix, Real};

pub use attention::{attention_backward, attention_forward, AttentionTrace};
pub use dropout::dropout;
pub use embedding::{EmbeddingTable, PAD_ID};
pub use lstm::{bilstm_backward, bilstm_forward, lstm_step, lstm_step_backward, BiLstmTrace, LstmParams, LstmStep};
pub use model::{no_attention_readout, ForwardTrace, Model};

/// Scale of the uniform initializer for every non-pretrained weight.
pub const INIT_SCALE: f64 = 0.08;
pub const FORGET_BIAS_INIT: f64 = 1.0;

/// How the position-wise states are reduced to one vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutMode {
    /// Attention-weighted sum of the merged states.
    #[default]
    Attention,
    /// `h'_last + h''_first` over the valid span (the attention ablation).
    FinalHidden,
}

impl std::str::FromStr for ReadoutMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "attention" => Ok(Self::Attention),
            "final-hidden" => Ok(Self::FinalHidden),
            other => Err(format!("unknown readout mode `{other}` (attention | final-hidden)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub mode: ReadoutMode,
    pub dropout: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputParams<T> {
    /// `hidden × num_classes`
    pub w: Matrix<T>,
    pub b: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParamGroup {
    Embedding,
    ForwardW,
    ForwardU,
    ForwardB,
    BackwardW,
    BackwardU,
    BackwardB,
    Attention,
    OutputW,
    OutputB,
}

impl ParamGroup {
    /// Canonical order, used for flattening and checkpoint blobs.
    pub const ALL: [ParamGroup; 10] = [
        ParamGroup::Embedding,
        ParamGroup::ForwardW,
        ParamGroup::ForwardU,
        ParamGroup::ForwardB,
        ParamGroup::BackwardW,
        ParamGroup::BackwardU,
        ParamGroup::BackwardB,
        ParamGroup::Attention,
        ParamGroup::OutputW,
        ParamGroup::OutputB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Embedding => "embedding",
            ParamGroup::ForwardW => "lstm_fwd.W",
            ParamGroup::ForwardU => "lstm_fwd.U",
            ParamGroup::ForwardB => "lstm_fwd.b",
            ParamGroup::BackwardW => "lstm_bwd.W",
            ParamGroup::BackwardU => "lstm_bwd.U",
            ParamGroup::BackwardB => "lstm_bwd.b",
            ParamGroup::Attention => "attention.w",
            ParamGroup::OutputW => "output.W",
            ParamGroup::OutputB => "output.b",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == name)
    }

    /// The LSTM input→gate matrices.
    pub fn is_lstm_input(self) -> bool {
        matches!(self, ParamGroup::ForwardW | ParamGroup::BackwardW)
    }

    pub fn is_lstm(self) -> bool {
        matches!(
            self,
            ParamGroup::ForwardW
                | ParamGroup::ForwardU
                | ParamGroup::ForwardB
                | ParamGroup::BackwardW
                | ParamGroup::BackwardU
                | ParamGroup::BackwardB
        )
    }
}

/// All trainable state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub embedding: EmbeddingTable<T>,
    pub forward: LstmParams<T>,
    pub backward: LstmParams<T>,
    /// Attention vector `w`, one entry per hidden unit.
    pub attention: Vec<T>,
    pub output: OutputParams<T>,
}

impl<T: Real> ModelParams<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self {
            embedding: EmbeddingTable::new(Matrix::zeros(cfg.vocab_size, cfg.embed_dim)),
            forward: LstmParams::zeros(cfg.embed_dim, cfg.hidden_dim),
            backward: LstmParams::zeros(cfg.embed_dim, cfg.hidden_dim),
            attention: vec![T::zero(); cfg.hidden_dim],
            output: OutputParams {
                w: Matrix::zeros(cfg.hidden_dim, cfg.num_classes),
                b: vec![T::zero(); cfg.num_classes],
            },
        }
    }

    /// Uniform(±[`INIT_SCALE`]) weights, zero biases except the forget gate.
    /// The PAD embedding row stays zero.
    pub fn init(cfg: &ModelConfig, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(cfg);
        let mut fill = |xs: &mut [T]| {
            for x in xs {
                *x = T::lit(rng.uniform(-INIT_SCALE, INIT_SCALE));
            }
        };
        fill(p.embedding.weights.as_mut_slice());
        for lstm in [&mut p.forward, &mut p.backward] {
            fill(lstm.w.as_mut_slice());
            fill(lstm.u.as_mut_slice());
            let h = cfg.hidden_dim;
            lstm.b[h..2 * h].fill(T::lit(FORGET_BIAS_INIT));
        }
        fill(&mut p.attention);
        fill(p.output.w.as_mut_slice());
        p.embedding.zero_pad_row();
        p
    }

    pub fn group(&self, g: ParamGroup) -> &[T] {
        match g {
            ParamGroup::Embedding => self.embedding.weights.as_slice(),
            ParamGroup::ForwardW => self.forward.w.as_slice(),
            ParamGroup::ForwardU => self.forward.u.as_slice(),
            ParamGroup::ForwardB => &self.forward.b,
            ParamGroup::BackwardW => self.backward.w.as_slice(),
            ParamGroup::BackwardU => self.backward.u.as_slice(),
            ParamGroup::BackwardB => &self.backward.b,
            ParamGroup::Attention => &self.attention,
            ParamGroup::OutputW => self.output.w.as_slice(),
            ParamGroup::OutputB => &self.output.b,
        }
    }

    pub fn group_mut(&mut self, g: ParamGroup) -> &mut [T] {
        match g {
            ParamGroup::Embedding => self.embedding.weights.as_mut_slice(),
            ParamGroup::ForwardW => self.forward.w.as_mut_slice(),
            ParamGroup::ForwardU => self.forward.u.as_mut_slice(),
            ParamGroup::ForwardB => &mut self.forward.b,
            ParamGroup::BackwardW => self.backward.w.as_mut_slice(),
            ParamGroup::BackwardU => self.backward.u.as_mut_slice(),
            ParamGroup::BackwardB => &mut self.backward.b,
            ParamGroup::Attention => &mut self.attention,
            ParamGroup::OutputW => self.output.w.as_mut_slice(),
            ParamGroup::OutputB => &mut self.output.b,
        }
    }

    /// `(rows, cols)` of each group as stored; vectors are `(1, n)`.
    pub fn group_shape(&self, g: ParamGroup) -> (usize, usize) {
        match g {
            ParamGroup::Embedding => self.embedding.weights.shape(),
            ParamGroup::ForwardW => self.forward.w.shape(),
            ParamGroup::ForwardU => self.forward.u.shape(),
            ParamGroup::BackwardW => self.backward.w.shape(),
            ParamGroup::BackwardU => self.backward.u.shape(),
            ParamGroup::OutputW => self.output.w.shape(),
            other => (1, self.group(other).len()),
        }
    }

    pub fn first_non_finite(&self) -> Option<(ParamGroup, usize)> {
        ParamGroup::ALL.into_iter().find_map(|g| {
            self.group(g)
                .iter()
                .position(|x| !x.is_finite())
                .map(|i| (g, i))
        })
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let v = |xs: &[T]| xs.iter().map(|&x| U::lit(x.as_f64())).collect::<Vec<U>>();
        let lstm = |p: &LstmParams<T>| LstmParams {
            w: p.w.cast(),
            u: p.u.cast(),
            b: v(&p.b),
        };
        ModelParams {
            embedding: EmbeddingTable::new(self.embedding.weights.cast()),
            forward: lstm(&self.forward),
            backward: lstm(&self.backward),
            attention: v(&self.attention),
            output: OutputParams {
                w: self.output.w.cast(),
                b: v(&self.output.b),
            },
        }
    }
}

/// Parameter gradients. Embedding rows are sparse: only ids that occurred
/// in the batch are present, and PAD never is.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub embedding: BTreeMap<u32, Vec<T>>,
    pub forward: LstmParams<T>,
    pub backward: LstmParams<T>,
    pub attention: Vec<T>,
    pub output: OutputParams<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let dense = ModelParams::<T>::zeros(&ModelConfig {
            vocab_size: 0,
            ..cfg.clone()
        });
        Self {
            embedding: BTreeMap::new(),
            forward: dense.forward,
            backward: dense.backward,
            attention: dense.attention,
            output: dense.output,
        }
    }

    /// Dense view of a non-embedding group.
    pub fn dense(&self, g: ParamGroup) -> Option<&[T]> {
        Some(match g {
            ParamGroup::Embedding => return None,
            ParamGroup::ForwardW => self.forward.w.as_slice(),
            ParamGroup::ForwardU => self.forward.u.as_slice(),
            ParamGroup::ForwardB => &self.forward.b,
            ParamGroup::BackwardW => self.backward.w.as_slice(),
            ParamGroup::BackwardU => self.backward.u.as_slice(),
            ParamGroup::BackwardB => &self.backward.b,
            ParamGroup::Attention => &self.attention,
            ParamGroup::OutputW => self.output.w.as_slice(),
            ParamGroup::OutputB => &self.output.b,
        })
    }

    pub fn dense_mut(&mut self, g: ParamGroup) -> Option<&mut [T]> {
        Some(match g {
            ParamGroup::Embedding => return None,
            ParamGroup::ForwardW => self.forward.w.as_mut_slice(),
            ParamGroup::ForwardU => self.forward.u.as_mut_slice(),
            ParamGroup::ForwardB => &mut self.forward.b,
            ParamGroup::BackwardW => self.backward.w.as_mut_slice(),
            ParamGroup::BackwardU => self.backward.u.as_mut_slice(),
            ParamGroup::BackwardB => &mut self.backward.b,
            ParamGroup::Attention => &mut self.attention,
            ParamGroup::OutputW => self.output.w.as_mut_slice(),
            ParamGroup::OutputB => &mut self.output.b,
        })
    }

    /// Adds `other` into `self`. Callers reduce in a fixed order so sums are reproducible.
    pub fn accumulate(&mut self, other: &Gradients<T>) {
        for (id, row) in &other.embedding {
            match self.embedding.get_mut(id) {
                Some(acc) => add_into(acc, row),
                None => {
                    self.embedding.insert(*id, row.clone());
                }
            }
        }
        for g in &ParamGroup::ALL[1..] {
            let src = other.dense(*g).expect("dense group");
            add_into(self.dense_mut(*g).expect("dense group"), src);
        }
    }

    pub fn scale(&mut self, s: T) {
        for row in self.embedding.values_mut() {
            row.iter_mut().for_each(|x| *x *= s);
        }
        for g in &ParamGroup::ALL[1..] {
            self.dense_mut(*g)
                .expect("dense group")
                .iter_mut()
                .for_each(|x| *x *= s);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        let rows = self.embedding.values().flatten();
        let dense = ParamGroup::ALL[1..]
            .iter()
            .flat_map(|g| self.dense(*g).expect("dense group"));
        rows.chain(dense)
            .map(|x| x.as_f64() * x.as_f64())
            .sum::<f64>()
            .sqrt()
    }

    pub fn first_non_finite(&self) -> Option<(ParamGroup, usize)> {
        for (id, row) in &self.embedding {
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Some((ParamGroup::Embedding, *id as usize * row.len() + j));
            }
        }
        ParamGroup::ALL[1..].iter().find_map(|g| {
            self.dense(*g)
                .expect("dense group")
                .iter()
                .position(|x| !x.is_finite())
                .map(|i| (*g, i))
        })
    }

    /// Full-size gradient for a group, zero-filled where sparse.
    pub fn to_dense_group(&self, g: ParamGroup, like: &ModelParams<T>) -> Vec<T> {
        match self.dense(g) {
            Some(xs) => xs.to_vec(),
            None => {
                let mut out = vec![T::zero(); like.group(g).len()];
                let dim = like.embedding.dim();
                for (&id, row) in &self.embedding {
                    let start = id as usize * dim;
                    out[start..start + dim].copy_from_slice(row);
                }
                out
            }
        }
    }
}

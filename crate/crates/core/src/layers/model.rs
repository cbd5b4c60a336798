use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{add_into, cross_entropy, softmax, Matrix, Real};

use super::attention::{attention_backward, attention_forward, AttentionTrace};
use super::dropout::dropout;
use super::embedding::EmbeddingTable;
use super::lstm::{bilstm_backward, bilstm_forward, BiLstmTrace};
use super::{Gradients, ModelConfig, ModelParams, ReadoutMode};

/// Everything the backward pass needs from one forward evaluation.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    pub ids: Vec<u32>,
    pub mask: Vec<bool>,
    /// Embeddings after dropout, i.e. the LSTM inputs.
    pub inputs: Vec<Vec<T>>,
    pub embed_scale: Option<Vec<Vec<T>>>,
    pub bilstm: BiLstmTrace<T>,
    /// Present in attention mode only.
    pub attention: Option<AttentionTrace<T>>,
    /// Readout before dropout.
    pub readout: Vec<T>,
    pub readout_scale: Option<Vec<T>>,
    pub readout_dropped: Vec<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
    pub mode: ReadoutMode,
}

impl<T: Real> ForwardTrace<T> {
    pub fn first_valid(&self) -> usize {
        self.mask.iter().position(|&m| m).expect("validated nonempty mask")
    }

    pub fn last_valid(&self) -> usize {
        self.mask.iter().rposition(|&m| m).expect("validated nonempty mask")
    }

    pub fn loss(&self, gold: usize) -> Result<T> {
        cross_entropy(&self.probs, gold)
    }

    /// Attention weights at valid positions, in order.
    pub fn valid_alpha(&self) -> Option<Vec<T>> {
        let a = self.attention.as_ref()?;
        Some(
            a.alpha
                .iter()
                .zip(&self.mask)
                .filter(|(_, &m)| m)
                .map(|(&x, _)| x)
                .collect(),
        )
    }
}

/// `h'_last + h''_first` over the valid span.
pub fn no_attention_readout<T: Real>(trace: &BiLstmTrace<T>, mask: &[bool]) -> Result<Vec<T>> {
    let first = mask.iter().position(|&m| m);
    let last = mask.iter().rposition(|&m| m);
    match (first, last) {
        (Some(first), Some(last)) if mask.len() == trace.forward.len() => {
            let mut r = trace.forward[last].h.clone();
            add_into(&mut r, &trace.backward[first].h);
            Ok(r)
        }
        _ => Err(Error::contract(
            "no_attention_readout",
            "mask empty or inconsistent with trace",
        )),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ModelParams<T>,
}

impl<T: Real> Model<T> {
    pub fn new(config: ModelConfig, params: ModelParams<T>) -> Self {
        Self { config, params }
    }

    pub fn init(config: ModelConfig, rng: &mut Rng) -> Self {
        let params = ModelParams::init(&config, rng);
        Self { config, params }
    }

    pub fn forward(
        &self,
        ids: &[u32],
        mask: &[bool],
        training: bool,
        rng: &mut Rng,
    ) -> Result<ForwardTrace<T>> {
        if ids.is_empty() || ids.len() != mask.len() {
            return Err(Error::contract(
                "model_forward",
                format!("{} ids with {} mask flags", ids.len(), mask.len()),
            ));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::contract("model_forward", "no valid positions"));
        }
        let rate = self.config.dropout;
        let p = &self.params;

        let embedded = p.embedding.forward(ids)?;
        let mut inputs = Vec::with_capacity(embedded.len());
        let mut scales = Vec::with_capacity(embedded.len());
        for e in &embedded {
            let (x, s) = dropout(e, rate, rng, training)?;
            inputs.push(x);
            scales.push(s);
        }
        let embed_scale = scales.into_iter().collect::<Option<Vec<_>>>();

        let bilstm = bilstm_forward(&inputs, &p.forward, &p.backward)?;
        let (attention, readout) = match self.config.mode {
            ReadoutMode::Attention => {
                let a = attention_forward(&bilstm.merged, &p.attention, mask)?;
                let r = a.r.clone();
                (Some(a), r)
            }
            ReadoutMode::FinalHidden => (None, no_attention_readout(&bilstm, mask)?),
        };
        let (readout_dropped, readout_scale) = dropout(&readout, rate, rng, training)?;

        let mut logits = p.output.b.clone();
        p.output.w.accumulate_tmul(&readout_dropped, &mut logits);
        let probs = softmax(&logits)?;

        Ok(ForwardTrace {
            ids: ids.to_vec(),
            mask: mask.to_vec(),
            inputs,
            embed_scale,
            bilstm,
            attention,
            readout,
            readout_scale,
            readout_dropped,
            logits,
            probs,
            mode: self.config.mode,
        })
    }

    /// Inference-mode class probabilities.
    pub fn predict(&self, ids: &[u32], mask: &[bool]) -> Result<ForwardTrace<T>> {
        // Dropout is off, so the generator is never drawn from.
        self.forward(ids, mask, false, &mut Rng::new(0))
    }

    /// Gradients of `−ln probs[gold]` with respect to every parameter.
    pub fn backward(&self, trace: &ForwardTrace<T>, gold: usize) -> Result<Gradients<T>> {
        let cfg = &self.config;
        let k = trace.ids.len();
        if trace.probs.len() != cfg.num_classes
            || gold >= cfg.num_classes
            || trace.mode != cfg.mode
            || trace.inputs.len() != k
            || trace.bilstm.merged.shape() != (k, cfg.hidden_dim)
        {
            return Err(Error::contract("model_backward", "trace does not match this model"));
        }
        let p = &self.params;
        let mut grads = Gradients::zeros(cfg);

        let mut dlogits = trace.probs.clone();
        dlogits[gold] -= T::one();
        grads.output.w.add_outer(&trace.readout_dropped, &dlogits);
        add_into(&mut grads.output.b, &dlogits);
        let mut dr = vec![T::zero(); cfg.hidden_dim];
        p.output.w.accumulate_mul(&dlogits, &mut dr);
        if let Some(scale) = &trace.readout_scale {
            dr.iter_mut().zip(scale).for_each(|(d, &s)| *d *= s);
        }

        let (dh_fwd, dh_bwd) = match (&trace.mode, &trace.attention) {
            (ReadoutMode::Attention, Some(a)) => {
                let dh = attention_backward(&trace.bilstm.merged, &p.attention, a, &dr, &mut grads.attention);
                (dh.clone(), dh)
            }
            (ReadoutMode::FinalHidden, None) => {
                let mut dfwd = Matrix::zeros(k, cfg.hidden_dim);
                let mut dbwd = Matrix::zeros(k, cfg.hidden_dim);
                dfwd.row_mut(trace.last_valid()).copy_from_slice(&dr);
                dbwd.row_mut(trace.first_valid()).copy_from_slice(&dr);
                (dfwd, dbwd)
            }
            _ => return Err(Error::contract("model_backward", "readout trace missing")),
        };

        let mut dxs = bilstm_backward(
            &trace.inputs,
            &trace.bilstm,
            &dh_fwd,
            &dh_bwd,
            &p.forward,
            &p.backward,
            &mut grads.forward,
            &mut grads.backward,
        );
        if let Some(scales) = &trace.embed_scale {
            for (dx, s) in dxs.iter_mut().zip(scales) {
                dx.iter_mut().zip(s).for_each(|(d, &m)| *d *= m);
            }
        }
        EmbeddingTable::backward(&trace.ids, &dxs, &mut grads.embedding);
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::super::ParamGroup;
    use super::*;
    use crate::gradcheck::grad_check;

    fn toy_config(mode: ReadoutMode) -> ModelConfig {
        ModelConfig {
            vocab_size: 12,
            embed_dim: 5,
            hidden_dim: 4,
            num_classes: 9,
            mode,
            dropout: 0.0,
        }
    }

    fn toy_model(mode: ReadoutMode, seed: u64) -> Model<f64> {
        let cfg = toy_config(mode);
        let mut rng = Rng::new(seed);
        let mut params = ModelParams::<f64>::init(&cfg, &mut rng);
        // Larger weights than the default init make the check more discriminating.
        for g in ParamGroup::ALL {
            for x in params.group_mut(g) {
                *x = rng.uniform(-0.5, 0.5);
            }
        }
        params.embedding.zero_pad_row();
        Model::new(cfg, params)
    }

    fn check_all_groups(model: &Model<f64>, ids: &[u32], mask: &[bool], gold: usize, seed: u64) {
        let train = model.config.dropout > 0.0;
        let trace = model.forward(ids, mask, train, &mut Rng::new(seed)).unwrap();
        let grads = model.backward(&trace, gold).unwrap();
        for g in ParamGroup::ALL {
            let theta = model.params.group(g).to_vec();
            let analytic = grads.to_dense_group(g, &model.params);
            let report = grad_check(
                |t| {
                    let mut m = model.clone();
                    m.params.group_mut(g).copy_from_slice(t);
                    let tr = m.forward(ids, mask, train, &mut Rng::new(seed)).unwrap();
                    tr.loss(gold).unwrap()
                },
                &theta,
                &analytic,
                1e-5,
            )
            .unwrap();
            assert!(report.max_rel_error <= 1e-4, "{} {report:?}", g.name());
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let m = toy_model(ReadoutMode::Attention, 1);
        let t = m.predict(&[0, 0, 3, 7, 2], &[false, false, true, true, true]).unwrap();
        assert!((t.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_parameters_predict_uniform() {
        let cfg = toy_config(ReadoutMode::Attention);
        let m = Model::new(cfg.clone(), ModelParams::<f64>::zeros(&cfg));
        let t = m.predict(&[4, 5, 6], &[true; 3]).unwrap();
        for p in t.probs {
            assert!((p - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn full_model_gradcheck_attention() {
        let m = toy_model(ReadoutMode::Attention, 3);
        check_all_groups(&m, &[0, 0, 2, 5, 11, 3], &[false, false, true, true, true, true], 4, 0);
    }

    #[test]
    fn full_model_gradcheck_final_hidden() {
        let m = toy_model(ReadoutMode::FinalHidden, 4);
        check_all_groups(&m, &[0, 2, 5, 5, 9, 3], &[false, true, true, true, true, true], 1, 0);
    }

    #[test]
    fn gradcheck_with_fixed_dropout_masks() {
        let mut m = toy_model(ReadoutMode::Attention, 5);
        m.config.dropout = 0.5;
        check_all_groups(&m, &[7, 2, 5, 1, 9, 3], &[true; 6], 7, 42);
    }

    #[test]
    fn final_hidden_readout_shape_and_length_one() {
        let m = toy_model(ReadoutMode::FinalHidden, 6);
        let t = m.predict(&[5], &[true]).unwrap();
        assert_eq!(t.readout.len(), m.config.hidden_dim);
        let expect: Vec<f64> = t.bilstm.forward[0]
            .h
            .iter()
            .zip(&t.bilstm.backward[0].h)
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(t.readout, expect);
    }

    #[test]
    fn final_hidden_ignores_pad_states() {
        let m = toy_model(ReadoutMode::FinalHidden, 7);
        let t = m.predict(&[0, 0, 4, 8], &[false, false, true, true]).unwrap();
        let mut expect = t.bilstm.forward[3].h.clone();
        add_into(&mut expect, &t.bilstm.backward[2].h);
        assert_eq!(t.readout, expect);
    }

    #[test]
    fn pad_and_unused_rows_get_no_gradient() {
        let mut m = toy_model(ReadoutMode::Attention, 8);
        m.config.dropout = 0.5;
        let ids = [0, 0, 3, 9, 3];
        let t = m.forward(&ids, &[false, false, true, true, true], true, &mut Rng::new(1)).unwrap();
        let g = m.backward(&t, 2).unwrap();
        assert_eq!(g.embedding.keys().copied().collect::<Vec<_>>(), vec![3, 9]);
        let dense = g.to_dense_group(ParamGroup::Embedding, &m.params);
        let dim = m.config.embed_dim;
        assert!(dense[..dim].iter().all(|&x| x == 0.0));
        assert!(dense[dim..3 * dim].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn inference_is_deterministic() {
        let m = toy_model(ReadoutMode::Attention, 9);
        let a = m.predict(&[1, 2, 3], &[true; 3]).unwrap().probs;
        let b = m.predict(&[1, 2, 3], &[true; 3]).unwrap().probs;
        assert_eq!(a, b);
    }

    #[test]
    fn backward_rejects_foreign_trace() {
        let m = toy_model(ReadoutMode::Attention, 10);
        let other = toy_model(ReadoutMode::FinalHidden, 10);
        let t = other.predict(&[1, 2], &[true; 2]).unwrap();
        assert!(m.backward(&t, 0).is_err());
        let t = m.predict(&[1, 2], &[true; 2]).unwrap();
        assert!(m.backward(&t, 9).is_err());
    }

    #[test]
    fn masked_attention_positions_are_exactly_zero() {
        let m = toy_model(ReadoutMode::Attention, 11);
        let t = m.predict(&[0, 0, 0, 4, 5], &[false, false, false, true, true]).unwrap();
        let alpha = &t.attention.as_ref().unwrap().alpha;
        assert_eq!(&alpha[..3], &[0.0; 3]);
        assert_eq!(t.valid_alpha().unwrap().len(), 2);
    }
}

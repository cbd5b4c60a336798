//! Adam with bias correction, plus L2 weight decay on the LSTM input matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{Gradients, ModelParams, ParamGroup};
use crate::tensor::{axpy, Real};

/// Which parameter groups receive weight decay.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayScope {
    /// Input→gate matrices `W` of both directions.
    #[default]
    LstmInput,
    /// Every LSTM parameter (`W`, `U`, `b`).
    AllLstm,
}

impl DecayScope {
    pub fn applies_to(self, g: ParamGroup) -> bool {
        match self {
            DecayScope::LstmInput => g.is_lstm_input(),
            DecayScope::AllLstm => g.is_lstm(),
        }
    }
}

impl std::str::FromStr for DecayScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lstm-input" => Ok(Self::LstmInput),
            "all-lstm" => Ok(Self::AllLstm),
            other => Err(format!("unknown decay scope `{other}` (lstm-input | all-lstm)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub decay_scope: DecayScope,
    /// Global gradient-norm clip. Off unless set.
    pub max_grad_norm: Option<f64>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 2.5e-6,
            decay_scope: DecayScope::LstmInput,
            max_grad_norm: None,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && self.beta1 > 0.0
            && (0.0..1.0).contains(&self.beta2)
            && self.beta2 > 0.0
            && self.epsilon > 0.0
            && self.weight_decay >= 0.0
            && self.max_grad_norm.is_none_or(|n| n > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::contract("OptimConfig", format!("invalid settings {self:?}")))
        }
    }
}

/// `grad += λ·param` on the groups selected by the decay scope.
pub fn apply_weight_decay<T: Real>(grads: &mut Gradients<T>, params: &ModelParams<T>, config: &OptimConfig) {
    if config.weight_decay == 0.0 {
        return;
    }
    let lambda = T::lit(config.weight_decay);
    for g in ParamGroup::ALL {
        if config.decay_scope.applies_to(g) {
            if let Some(dst) = grads.dense_mut(g) {
                axpy(lambda, params.group(g), dst);
            }
        }
    }
}

/// One bias-corrected Adam update of a flat slice. `t` is the already
/// incremented step count (first step is 1).
pub fn adam_update<T: Real>(
    theta: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u64,
    config: &OptimConfig,
) {
    let (b1, b2) = (T::lit(config.beta1), T::lit(config.beta2));
    let one = T::one();
    let c1 = one - b1.powi(t as i32);
    let c2 = one - b2.powi(t as i32);
    let lr = T::lit(config.learning_rate);
    let eps = T::lit(config.epsilon);
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// First and second moments for every parameter, plus the step count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub m: ModelParams<T>,
    pub v: ModelParams<T>,
    pub t: u64,
}

#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: OptimConfig,
    pub state: AdamState<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: OptimConfig, params: &ModelParams<T>) -> Result<Self> {
        config.validate()?;
        let mut zeros = params.clone();
        for g in ParamGroup::ALL {
            zeros.group_mut(g).fill(T::zero());
        }
        Ok(Self {
            config,
            state: AdamState {
                m: zeros.clone(),
                v: zeros,
                t: 0,
            },
        })
    }

    /// Weight decay, optional clipping, then one Adam step. `grads` must
    /// already be the batch mean. The PAD embedding row is re-zeroed.
    pub fn step(&mut self, params: &mut ModelParams<T>, grads: &mut Gradients<T>) -> Result<()> {
        if let Some((g, i)) = grads.first_non_finite() {
            return Err(Error::NonFinite {
                what: format!("gradient {}", g.name()),
                index: i,
            });
        }
        apply_weight_decay(grads, params, &self.config);
        if let Some(max) = self.config.max_grad_norm {
            let norm = grads.l2_norm();
            if norm > max {
                log::warn!("clipping gradient norm {norm:.4} to {max}");
                grads.scale(T::lit(max / norm));
            }
        }

        self.state.t += 1;
        let t = self.state.t;
        let AdamState { m, v, .. } = &mut self.state;
        for g in ParamGroup::ALL {
            let dense = grads.to_dense_group(g, params);
            adam_update(params.group_mut(g), &dense, m.group_mut(g), v.group_mut(g), t, &self.config);
        }
        params.embedding.zero_pad_row();

        if let Some((g, i)) = params.first_non_finite() {
            return Err(Error::NonFinite {
                what: format!("parameter {} after Adam step {t}", g.name()),
                index: i,
            });
        }
        Ok(())
    }
}

//! Central finite-difference gradient checking in `f64`.

use crate::error::{Error, Result};
use crate::layers::{Model, ParamGroup};
use crate::rng::Rng;

pub const DEFAULT_EPS: f64 = 1e-5;

/// Floor on the denominator of the relative error.
const REL_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate where the worst error occurred.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares `analytic` against `(f(θ+εeᵢ) − f(θ−εeᵢ)) / 2ε` for every coordinate.
///
/// The relative error per coordinate is `|Δ| / max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(mut f: F, theta: &[f64], analytic: &[f64], eps: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    if theta.len() != analytic.len() {
        return Err(Error::contract(
            "grad_check",
            format!("{} parameters but {} gradients", theta.len(), analytic.len()),
        ));
    }
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + eps;
        let plus = f(&probe);
        probe[i] = theta[i] - eps;
        let minus = f(&probe);
        probe[i] = theta[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite {
                what: "grad_check objective".into(),
                index: i,
            });
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        if i == 0 || rel > report.max_rel_error {
            report = GradCheckReport {
                max_rel_error: rel,
                worst_index: i,
                analytic: a,
                numeric,
            };
        }
    }
    Ok(report)
}

/// Checks every parameter group of `model` on one sample. With `dropout_seed`
/// set, dropout is active and every evaluation reuses the same masks.
pub fn model_grad_check(
    model: &Model<f64>,
    ids: &[u32],
    mask: &[bool],
    gold: usize,
    dropout_seed: Option<u64>,
    eps: f64,
) -> Result<Vec<(ParamGroup, GradCheckReport)>> {
    let training = dropout_seed.is_some();
    let seed = dropout_seed.unwrap_or(0);
    let trace = model.forward(ids, mask, training, &mut Rng::new(seed))?;
    let grads = model.backward(&trace, gold)?;
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(ParamGroup::ALL.len());
    for g in ParamGroup::ALL {
        let theta = model.params.group(g).to_vec();
        let analytic = grads.to_dense_group(g, &model.params);
        let mut failure = None;
        let report = grad_check(
            |t| {
                probe.params.group_mut(g).copy_from_slice(t);
                match probe
                    .forward(ids, mask, training, &mut Rng::new(seed))
                    .and_then(|tr| tr.loss(gold))
                {
                    Ok(l) => l,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            },
            &theta,
            &analytic,
            eps,
        );
        probe.params.group_mut(g).copy_from_slice(&theta);
        if let Some(e) = failure {
            return Err(e);
        }
        out.push((g, report?));
    }
    Ok(out)
}

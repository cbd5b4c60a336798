//! Forget-gate LSTM without peepholes, and the bidirectional wrapper that sums
//! the two directions position by position.
//!
//! Gate pre-activations are `a = Wᵀx + Uᵀh + b`, laid out as four blocks of
//! `hidden` entries in the order input, forget, cell candidate, output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{add_into, sigmoid, Matrix, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams<T> {
    /// input → gates, `input_dim × 4·hidden`. The weight-decayed matrix.
    pub w: Matrix<T>,
    /// hidden → gates, `hidden × 4·hidden`.
    pub u: Matrix<T>,
    pub b: Vec<T>,
}

impl<T: Real> LstmParams<T> {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w: Matrix::zeros(input_dim, 4 * hidden),
            u: Matrix::zeros(hidden, 4 * hidden),
            b: vec![T::zero(); 4 * hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden();
        if self.u.cols() != 4 * h || self.w.cols() != 4 * h || self.b.len() != 4 * h {
            return Err(Error::contract(
                "lstm",
                format!(
                    "inconsistent shapes W {:?} U {:?} b {}",
                    self.w.shape(),
                    self.u.shape(),
                    self.b.len()
                ),
            ));
        }
        Ok(())
    }
}

/// Activations of one step, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LstmStep<T> {
    /// `[i, f, g, o]` after their nonlinearities.
    pub gates: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
    pub h: Vec<T>,
}

pub fn lstm_step<T: Real>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    p: &LstmParams<T>,
) -> Result<LstmStep<T>> {
    p.check()?;
    let hd = p.hidden();
    if x.len() != p.input_dim() || h_prev.len() != hd || c_prev.len() != hd {
        return Err(Error::contract(
            "lstm_step",
            format!(
                "x {} h {} c {} for input {} hidden {hd}",
                x.len(),
                h_prev.len(),
                c_prev.len(),
                p.input_dim()
            ),
        ));
    }
    let mut gates = p.b.clone();
    p.w.accumulate_tmul(x, &mut gates);
    p.u.accumulate_tmul(h_prev, &mut gates);
    for (j, a) in gates.iter_mut().enumerate() {
        *a = if (2 * hd..3 * hd).contains(&j) {
            a.tanh()
        } else {
            sigmoid(*a)
        };
    }
    let mut c = vec![T::zero(); hd];
    let mut tanh_c = vec![T::zero(); hd];
    let mut h = vec![T::zero(); hd];
    for j in 0..hd {
        let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
        c[j] = f * c_prev[j] + i * g;
        tanh_c[j] = c[j].tanh();
        h[j] = o * tanh_c[j];
    }
    if let Some(idx) = h.iter().chain(&c).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "lstm_step output".into(),
            index: idx,
        });
    }
    Ok(LstmStep { gates, c, tanh_c, h })
}

/// Gradients flowing out of one step.
pub struct StepGrads<T> {
    pub dx: Vec<T>,
    pub dh_prev: Vec<T>,
    pub dc_prev: Vec<T>,
}

/// Backward through one step. `dh` and `dc` are the total gradients arriving
/// at this step's `h` and `c`. Parameter gradients accumulate into `grads`.
#[allow(clippy::too_many_arguments)]
pub fn lstm_step_backward<T: Real>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    step: &LstmStep<T>,
    dh: &[T],
    dc: &[T],
    p: &LstmParams<T>,
    grads: &mut LstmParams<T>,
) -> StepGrads<T> {
    let hd = p.hidden();
    let one = T::one();
    let g = &step.gates;
    let mut da = vec![T::zero(); 4 * hd];
    let mut dc_prev = vec![T::zero(); hd];
    for j in 0..hd {
        let (i, f, gg, o) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
        let tc = step.tanh_c[j];
        let d_o = dh[j] * tc;
        let dc_total = dc[j] + dh[j] * o * (one - tc * tc);
        let d_i = dc_total * gg;
        let d_g = dc_total * i;
        let d_f = dc_total * c_prev[j];
        dc_prev[j] = dc_total * f;
        da[j] = d_i * i * (one - i);
        da[hd + j] = d_f * f * (one - f);
        da[2 * hd + j] = d_g * (one - gg * gg);
        da[3 * hd + j] = d_o * o * (one - o);
    }
    grads.w.add_outer(x, &da);
    grads.u.add_outer(h_prev, &da);
    add_into(&mut grads.b, &da);
    let mut dx = vec![T::zero(); x.len()];
    p.w.accumulate_mul(&da, &mut dx);
    let mut dh_prev = vec![T::zero(); hd];
    p.u.accumulate_mul(&da, &mut dh_prev);
    StepGrads {
        dx,
        dh_prev,
        dc_prev,
    }
}

/// Runs one direction over `xs` in the given position order from a zero state.
/// The returned steps are indexed by position, not by processing order.
fn scan<T: Real>(
    xs: &[Vec<T>],
    order: impl Iterator<Item = usize>,
    p: &LstmParams<T>,
) -> Result<Vec<LstmStep<T>>> {
    let hd = p.hidden();
    let zero = vec![T::zero(); hd];
    let mut slots: Vec<Option<LstmStep<T>>> = (0..xs.len()).map(|_| None).collect();
    let mut prev: Option<usize> = None;
    for pos in order {
        let (h_prev, c_prev) = match prev {
            Some(q) => {
                let s = slots[q].as_ref().expect("previous step computed");
                (s.h.as_slice(), s.c.as_slice())
            }
            None => (zero.as_slice(), zero.as_slice()),
        };
        let step = lstm_step(&xs[pos], h_prev, c_prev, p)?;
        slots[pos] = Some(step);
        prev = Some(pos);
    }
    Ok(slots.into_iter().map(|s| s.expect("every position visited")).collect())
}

#[derive(Clone, Debug)]
pub struct BiLstmTrace<T> {
    /// Forward direction, scanned left to right.
    pub forward: Vec<LstmStep<T>>,
    /// Backward direction, scanned right to left, indexed by position.
    pub backward: Vec<LstmStep<T>>,
    /// `h_i = h'_i + h''_i`, one row per position.
    pub merged: Matrix<T>,
}

pub fn bilstm_forward<T: Real>(
    xs: &[Vec<T>],
    fwd: &LstmParams<T>,
    bwd: &LstmParams<T>,
) -> Result<BiLstmTrace<T>> {
    if xs.is_empty() {
        return Err(Error::contract("bilstm_forward", "empty sequence"));
    }
    if fwd.hidden() != bwd.hidden() {
        return Err(Error::contract("bilstm_forward", "direction hidden sizes differ"));
    }
    let k = xs.len();
    let forward = scan(xs, 0..k, fwd)?;
    let backward = scan(xs, (0..k).rev(), bwd)?;
    let mut merged = Matrix::zeros(k, fwd.hidden());
    for pos in 0..k {
        for ((m, &f), &b) in merged.row_mut(pos).iter_mut().zip(&forward[pos].h).zip(&backward[pos].h) {
            *m = f + b;
        }
    }
    Ok(BiLstmTrace {
        forward,
        backward,
        merged,
    })
}

/// Backpropagation through time for one direction. `dh_out[pos]` is the
/// gradient reaching `h` at `pos` from above; input gradients are added to `dxs`.
fn scan_backward<T: Real>(
    xs: &[Vec<T>],
    steps: &[LstmStep<T>],
    order: &[usize],
    dh_out: &Matrix<T>,
    p: &LstmParams<T>,
    grads: &mut LstmParams<T>,
    dxs: &mut [Vec<T>],
) {
    let hd = p.hidden();
    let zero = vec![T::zero(); hd];
    let mut dh_carry = vec![T::zero(); hd];
    let mut dc_carry = vec![T::zero(); hd];
    for (n, &pos) in order.iter().enumerate().rev() {
        let (h_prev, c_prev) = if n == 0 {
            (zero.as_slice(), zero.as_slice())
        } else {
            let q = order[n - 1];
            (steps[q].h.as_slice(), steps[q].c.as_slice())
        };
        let mut dh = dh_out.row(pos).to_vec();
        add_into(&mut dh, &dh_carry);
        let sg = lstm_step_backward(&xs[pos], h_prev, c_prev, &steps[pos], &dh, &dc_carry, p, grads);
        add_into(&mut dxs[pos], &sg.dx);
        dh_carry = sg.dh_prev;
        dc_carry = sg.dc_prev;
    }
}

/// Backward through both directions. `dh_fwd` / `dh_bwd` hold the gradients on
/// each direction's hidden states (`k × hidden`); returns gradients on the inputs.
#[allow(clippy::too_many_arguments)]
pub fn bilstm_backward<T: Real>(
    xs: &[Vec<T>],
    trace: &BiLstmTrace<T>,
    dh_fwd: &Matrix<T>,
    dh_bwd: &Matrix<T>,
    fwd: &LstmParams<T>,
    bwd: &LstmParams<T>,
    g_fwd: &mut LstmParams<T>,
    g_bwd: &mut LstmParams<T>,
) -> Vec<Vec<T>> {
    let k = xs.len();
    let mut dxs = vec![vec![T::zero(); fwd.input_dim()]; k];
    let order: Vec<usize> = (0..k).collect();
    scan_backward(xs, &trace.forward, &order, dh_fwd, fwd, g_fwd, &mut dxs);
    let order: Vec<usize> = (0..k).rev().collect();
    scan_backward(xs, &trace.backward, &order, dh_bwd, bwd, g_bwd, &mut dxs);
    dxs
}

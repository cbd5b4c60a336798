//! Attention readout: `α = softmax(wᵀ tanh(H))`, `r = H αᵀ`.
//!
//! `H` is stored with one row per position (`k × hidden`). Masked positions
//! get score `−∞` and therefore weight exactly zero.

use crate::error::{Error, Result};
use crate::tensor::{axpy, dot, softmax, Matrix, Real};

#[derive(Clone, Debug)]
pub struct AttentionTrace<T> {
    pub tanh_h: Matrix<T>,
    /// `wᵀ tanh(h_i)`; `−∞` at masked positions.
    pub scores: Vec<T>,
    pub alpha: Vec<T>,
    pub r: Vec<T>,
}

pub fn attention_forward<T: Real>(h: &Matrix<T>, w: &[T], mask: &[bool]) -> Result<AttentionTrace<T>> {
    let (k, hd) = h.shape();
    if mask.len() != k || w.len() != hd {
        return Err(Error::contract(
            "attention_forward",
            format!("H {k}x{hd}, mask {}, w {}", mask.len(), w.len()),
        ));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::contract("attention_forward", "every position is masked"));
    }
    let tanh_h = h.map(T::tanh);
    let scores: Vec<T> = (0..k)
        .map(|i| {
            if mask[i] {
                dot(w, tanh_h.row(i))
            } else {
                T::neg_infinity()
            }
        })
        .collect();
    let alpha = softmax(&scores)?;
    let mut r = vec![T::zero(); hd];
    for (i, &a) in alpha.iter().enumerate() {
        if mask[i] {
            axpy(a, h.row(i), &mut r);
        }
    }
    Ok(AttentionTrace {
        tanh_h,
        scores,
        alpha,
        r,
    })
}

/// Given `dr`, returns `dH` (same layout as `H`) and accumulates `dw`.
pub fn attention_backward<T: Real>(
    h: &Matrix<T>,
    w: &[T],
    trace: &AttentionTrace<T>,
    dr: &[T],
    dw: &mut [T],
) -> Matrix<T> {
    let (k, hd) = h.shape();
    let alpha = &trace.alpha;
    let mut dh = Matrix::zeros(k, hd);
    // dα_i = h_i · dr ; ds_i = α_i (dα_i − Σ_j α_j dα_j)
    let dalpha: Vec<T> = (0..k).map(|i| dot(h.row(i), dr)).collect();
    let mean: T = alpha.iter().zip(&dalpha).map(|(&a, &d)| a * d).sum();
    for i in 0..k {
        let a = alpha[i];
        if a == T::zero() {
            continue;
        }
        let ds = a * (dalpha[i] - mean);
        let th = trace.tanh_h.row(i);
        axpy(ds, th, dw);
        let row = dh.row_mut(i);
        for j in 0..hd {
            row[j] = a * dr[j] + ds * w[j] * (T::one() - th[j] * th[j]);
        }
    }
    dh
}

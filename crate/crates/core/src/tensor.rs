//! Dense row-major matrices and the handful of vector kernels the model needs.
//!
//! Everything is generic over [`Real`] so the same layer code trains in `f32`
//! and runs the finite-difference checks in `f64`.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floating point storage type for parameters and activations.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal fits the float type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::contract(
                "Matrix::from_vec",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::contract("Matrix::from_rows", "ragged rows"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != other.rows {
            return Err(Error::contract(
                "matmul",
                format!(
                    "{}x{} times {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != T::zero() {
                    axpy(a, other.row(k), out_row);
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        self.zip_with("add", other, |a, b| a + b)
    }

    pub fn hadamard(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        self.zip_with("hadamard", other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Matrix<T> {
        self.map(|x| x * s)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    fn zip_with(
        &self,
        op: &'static str,
        other: &Matrix<T>,
        f: impl Fn(T, T) -> T,
    ) -> Result<Matrix<T>> {
        if self.shape() != other.shape() {
            return Err(Error::contract(
                op,
                format!("shape {:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `out += selfᵀ · x`, i.e. `out[j] += Σ_i x[i]·self[i][j]`.
    pub fn accumulate_tmul(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi != T::zero() {
                axpy(xi, self.row(i), out);
            }
        }
    }

    /// `out[i] += Σ_j self[i][j]·y[j]`.
    pub fn accumulate_mul(&self, y: &[T], out: &mut [T]) {
        debug_assert_eq!(y.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o += dot(row, y);
        }
    }

    /// Rank-one update `self += x ⊗ y`.
    pub fn add_outer(&mut self, x: &[T], y: &[T]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        let cols = self.cols;
        for (&xi, row) in x.iter().zip(self.data.chunks_exact_mut(cols)) {
            if xi != T::zero() {
                axpy(xi, y, row);
            }
        }
    }

    /// First non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|x| !x.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::lit(x.as_f64())).collect(),
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `y += a·x`
pub fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn add_into<T: Real>(acc: &mut [T], x: &[T]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

pub fn sigmoid<T: Real>(x: T) -> T {
    // Split on sign so exp never overflows.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn tanh<T: Real>(x: T) -> T {
    x.tanh()
}

/// Numerically stable softmax (max subtraction).
pub fn softmax<T: Real>(v: &[T]) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::contract("softmax", "empty input"));
    }
    if let Some(i) = v.iter().position(|x| x.is_nan() || *x == T::infinity()) {
        return Err(Error::NonFinite {
            what: "softmax input".into(),
            index: i,
        });
    }
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return Err(Error::contract("softmax", "every entry is -inf"));
    }
    let mut out: Vec<T> = v.iter().map(|&x| (x - max).exp()).collect();
    let total: T = out.iter().copied().sum();
    for p in &mut out {
        *p = *p / total;
    }
    Ok(out)
}

pub const PROB_FLOOR: f64 = 1e-12;

/// `−ln p[gold]` with the probability floored at [`PROB_FLOOR`].
pub fn cross_entropy<T: Real>(probs: &[T], gold: usize) -> Result<T> {
    let p = probs.get(gold).ok_or_else(|| {
        Error::contract(
            "cross_entropy",
            format!("gold index {gold} out of range for {} classes", probs.len()),
        )
    })?;
    Ok(-(p.max(T::lit(PROB_FLOOR))).ln())
}

pub fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::grad_check;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix<f64> {
        let data = (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn naive_matmul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    #[test]
    fn identity_is_neutral() {
        let mut rng = Rng::new(1);
        let a = random_matrix(&mut rng, 3, 4);
        assert_eq!(Matrix::identity(3).matmul(&a).unwrap(), a);
    }

    #[test]
    fn hand_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = Rng::new(7);
        let a = random_matrix(&mut rng, 7, 5);
        let b = random_matrix(&mut rng, 5, 3);
        let fast = a.matmul(&b).unwrap();
        let slow = naive_matmul(&a, &b);
        for (x, y) in fast.as_slice().iter().zip(slow.as_slice()) {
            assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = Matrix::<f32>::zeros(2, 3);
        let err = a.matmul(&Matrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::Contract { op: "matmul", .. }));
    }

    #[test]
    fn matmul_associative() {
        let mut rng = Rng::new(11);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 4, 6);
            let b = random_matrix(&mut rng, 6, 3);
            let c = random_matrix(&mut rng, 3, 5);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (x, y) in left.as_slice().iter().zip(right.as_slice()) {
                assert!((x - y).abs() <= 1e-10);
            }
            let (a32, b32, c32) = (a.cast::<f32>(), b.cast::<f32>(), c.cast::<f32>());
            let left = a32.matmul(&b32).unwrap().matmul(&c32).unwrap();
            let right = a32.matmul(&b32.matmul(&c32).unwrap()).unwrap();
            for (x, y) in left.as_slice().iter().zip(right.as_slice()) {
                assert!((x - y).abs() <= 1e-4);
            }
        }
    }

    #[test]
    fn transpose_and_elementwise() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let t = a.transpose();
        assert_eq!(t.shape(), (3, 2));
        assert_eq!(t[(2, 1)], 6.0);
        assert_eq!(a.add(&a).unwrap(), a.scale(2.0));
        assert_eq!(a.hadamard(&a).unwrap()[(1, 2)], 36.0);
        assert!(a.add(&t).is_err());
    }

    #[test]
    fn softmax_uniform() {
        let p = softmax(&[0.0f64, 0.0, 0.0]).unwrap();
        for x in p {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_no_overflow() {
        let p = softmax(&[1000.0f32, 0.0, -1000.0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-6);
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn softmax_matches_direct_f64() {
        let p = softmax(&[1.0f32, 2.0, 3.0]).unwrap();
        let z: f64 = [1.0f64, 2.0, 3.0].iter().map(|x| x.exp()).sum();
        for (i, x) in [1.0f64, 2.0, 3.0].iter().enumerate() {
            assert!((p[i] as f64 - x.exp() / z).abs() < 1e-7);
        }
    }

    #[test]
    fn softmax_rejects_empty() {
        assert!(softmax::<f64>(&[]).is_err());
    }

    #[test]
    fn cross_entropy_values() {
        let mut one_hot = vec![0.0f64; 9];
        one_hot[0] = 1.0;
        assert_eq!(cross_entropy(&one_hot, 0).unwrap(), 0.0);
        let uniform = vec![1.0 / 9.0; 9];
        assert!((cross_entropy(&uniform, 4).unwrap() - 9f64.ln()).abs() < 1e-12);
        assert!((cross_entropy(&[0.7, 0.3], 1).unwrap() - 1.203_972_804_326).abs() < 1e-9);
        // floor keeps the loss finite
        assert!((cross_entropy(&[1.0, 0.0], 1).unwrap() - 1e12f64.ln()).abs() < 1e-9);
        assert!(cross_entropy(&[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn elementwise_ops_pass_gradcheck() {
        let mut rng = Rng::new(3);
        let theta: Vec<f64> = (0..8).map(|_| rng.uniform(-2.0, 2.0)).collect();

        // f = Σ tanh(θ)
        let grad: Vec<f64> = theta.iter().map(|x| 1.0 - x.tanh().powi(2)).collect();
        let r = grad_check(|t| t.iter().map(|x| tanh(*x)).sum(), &theta, &grad, 1e-5).unwrap();
        assert!(r.max_rel_error <= 1e-7, "{r:?}");

        // f = Σ sigmoid(θ)
        let grad: Vec<f64> = theta
            .iter()
            .map(|&x| sigmoid(x) * (1.0 - sigmoid(x)))
            .collect();
        let r = grad_check(|t| t.iter().map(|x| sigmoid(*x)).sum(), &theta, &grad, 1e-5).unwrap();
        assert!(r.max_rel_error <= 1e-7, "{r:?}");

        // f = −ln softmax(θ)[2], gradient p − onehot
        let p = softmax(&theta).unwrap();
        let mut grad = p.clone();
        grad[2] -= 1.0;
        let r = grad_check(
            |t| cross_entropy(&softmax(t).unwrap(), 2).unwrap(),
            &theta,
            &grad,
            1e-5,
        )
        .unwrap();
        assert!(r.max_rel_error <= 1e-7, "{r:?}");

        // f = Σ (A·x)_i·c_i, gradient Aᵀc, exercises matmul/transpose/hadamard
        let a = random_matrix(&mut rng, 3, 8);
        let c: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut grad = vec![0.0; 8];
        a.accumulate_tmul(&c, &mut grad);
        let f = |t: &[f64]| {
            let x = Matrix::from_vec(8, 1, t.to_vec()).unwrap();
            let y = a.matmul(&x).unwrap();
            let cm = Matrix::from_vec(3, 1, c.clone()).unwrap();
            y.hadamard(&cm).unwrap().as_slice().iter().sum()
        };
        let r = grad_check(f, &theta, &grad, 1e-5).unwrap();
        assert!(r.max_rel_error <= 1e-7, "{r:?}");
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            v in prop::collection::vec(-50.0f64..50.0, 1..40),
            shift in -100.0f64..100.0,
        ) {
            let p = softmax(&v).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
            prop_assert!(p.iter().all(|&x| x > 0.0));
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }
    }
}

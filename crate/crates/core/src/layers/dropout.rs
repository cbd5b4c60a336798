use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Real;

/// Inverted dropout. Returns the output and the per-entry scale that was
/// applied (`0` or `1/(1−rate)`), which the backward pass multiplies by.
/// Outside training it is the identity and no scale is returned.
pub fn dropout<T: Real>(
    x: &[T],
    rate: f64,
    rng: &mut Rng,
    training: bool,
) -> Result<(Vec<T>, Option<Vec<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::contract("dropout", format!("rate {rate} not in [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok((x.to_vec(), None));
    }
    let keep = T::lit(1.0 / (1.0 - rate));
    let scale: Vec<T> = x
        .iter()
        .map(|_| if rng.bernoulli(rate) { T::zero() } else { keep })
        .collect();
    let out = x.iter().zip(&scale).map(|(&v, &s)| v * s).collect();
    Ok((out, Some(scale)))
}

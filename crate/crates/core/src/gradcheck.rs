//! Central-difference verification of [`Graph`] gradients.
//!
//! `f` must be deterministic and differentiable near `x`. Relu kinks break
//! the finite-difference estimate, so callers keep pre-activations away
//! from zero (random points do this with probability ~1).

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Scalar function of one tensor input, expressed on a graph.
pub trait ScalarFn: Fn(&mut Graph, Var) -> Result<Var> {}
impl<F: Fn(&mut Graph, Var) -> Result<Var>> ScalarFn for F {}

/// Value of `f(x)` with `x` entered as a constant.
pub fn evaluate<F: ScalarFn>(f: &F, x: &Tensor) -> Result<f64> {
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let y = f(&mut g, xv)?;
    g.value(y).item()
}

/// Reverse-mode gradient of `f` at `x`.
pub fn autodiff_gradient<F: ScalarFn>(f: &F, x: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let xv = g.param(x.clone());
    let y = f(&mut g, xv)?;
    g.backward(y)?;
    match g.grad(xv) {
        Some(t) => Ok(t),
        None => Tensor::zeros(x.shape().to_vec()),
    }
}

/// Central difference `(f(x + eps·e_i) − f(x − eps·e_i)) / 2eps`.
pub fn central_difference<F: ScalarFn>(f: &F, x: &Tensor, i: usize, eps: f64) -> Result<f64> {
    let mut plus = x.clone();
    plus.data_mut()[i] += eps;
    let mut minus = x.clone();
    minus.data_mut()[i] -= eps;
    Ok((evaluate(f, &plus)? - evaluate(f, &minus)?) / (2.0 * eps))
}

/// Max over all coordinates of `|autodiff − fd| / max(1, |fd|)`.
pub fn grad_check<F: ScalarFn>(f: F, x: &Tensor, eps: f64) -> Result<f64> {
    let coords: Vec<usize> = (0..x.numel()).collect();
    grad_check_coords(f, x, eps, &coords)
}

/// [`grad_check`] restricted to the listed coordinates.
pub fn grad_check_coords<F: ScalarFn>(f: F, x: &Tensor, eps: f64, coords: &[usize]) -> Result<f64> {
    if let Some(&bad) = coords.iter().find(|&&i| i >= x.numel()) {
        return Err(Error::contract(format!(
            "coordinate {bad} out of range for {} elements",
            x.numel()
        )));
    }
    let analytic = autodiff_gradient(&f, x)?;
    let mut worst = 0.0f64;
    for &i in coords {
        let fd = central_difference(&f, x, i, eps)?;
        let err = (analytic.data()[i] - fd).abs() / fd.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

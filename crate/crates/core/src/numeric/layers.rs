use super::matrix::{matmul, matmul_nt, matmul_tn, Matrix};
use crate::error::{Error, Result};

/// Gradients of an affine layer with respect to its input, weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineGrads {
    pub x: Matrix,
    pub w: Matrix,
    pub bias: Vec<f64>,
}

/// `x · w + bias`, with `bias` broadcast over rows.
pub fn affine_forward(x: &Matrix, w: &Matrix, bias: &[f64]) -> Result<Matrix> {
    if bias.len() != w.cols() {
        return Err(Error::shape(
            "affine_forward",
            format!("weights {}", w.shape_str()),
            format!("bias of length {}", bias.len()),
        ));
    }
    let mut out = matmul(x, w)?;
    for r in 0..out.rows() {
        for (o, b) in out.row_mut(r).iter_mut().zip(bias) {
            *o += b;
        }
    }
    Ok(out)
}

pub fn affine_backward(x: &Matrix, w: &Matrix, grad_out: &Matrix) -> Result<AffineGrads> {
    if x.cols() != w.rows() {
        return Err(Error::shape("affine_backward", x.shape_str(), w.shape_str()));
    }
    if grad_out.rows() != x.rows() || grad_out.cols() != w.cols() {
        return Err(Error::shape(
            "affine_backward",
            format!("output {}x{}", x.rows(), w.cols()),
            format!("grad_out {}", grad_out.shape_str()),
        ));
    }
    Ok(AffineGrads {
        x: matmul_nt(grad_out, w)?,
        w: matmul_tn(x, grad_out)?,
        bias: grad_out.column_sums(),
    })
}

pub fn relu(x: &Matrix) -> Matrix {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

/// Passes `grad_out` where `x > 0`; the subgradient at exactly 0 is 0.
pub fn relu_backward(x: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
    if x.shape() != grad_out.shape() {
        return Err(Error::shape("relu_backward", x.shape_str(), grad_out.shape_str()));
    }
    let mut g = grad_out.clone();
    for (gv, xv) in g.data_mut().iter_mut().zip(x.data()) {
        if *xv <= 0.0 {
            *gv = 0.0;
        }
    }
    Ok(g)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic loss of `logit` against a (possibly soft) target in `[0, 1]`.
///
/// Returns `(loss, dloss/dlogit)`.
pub fn bce_with_logits(logit: f64, target: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Domain(format!(
            "logistic loss target must lie in [0, 1], got {target}"
        )));
    }
    let loss = logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p();
    Ok((loss, sigmoid(logit) - target))
}

/// Squared error. Returns `(loss, dloss/dpred)`.
pub fn mse(pred: f64, target: f64) -> (f64, f64) {
    let d = pred - target;
    (d * d, 2.0 * d)
}

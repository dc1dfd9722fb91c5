use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::error::{shape_err, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moment accumulators for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    first: DenseMatrix,
    second: DenseMatrix,
    step: u64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            first: DenseMatrix::zeros(rows, cols),
            second: DenseMatrix::zeros(rows, cols),
            step: 0,
        }
    }

    pub fn for_param(param: &DenseMatrix) -> Self {
        Self::new(param.rows(), param.cols())
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &DenseMatrix {
        &self.first
    }

    pub fn second_moment(&self) -> &DenseMatrix {
        &self.second
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step(
    param: &mut DenseMatrix,
    grad: &DenseMatrix,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != state.first.shape() {
        return Err(shape_err!(
            "adam: param {:?}, grad {:?}, state {:?}",
            param.shape(),
            grad.shape(),
            state.first.shape()
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let m = state.first.as_mut_slice();
    let v = state.second.as_mut_slice();
    for (((p, &g), m), v) in param
        .as_mut_slice()
        .iter_mut()
        .zip(grad.as_slice())
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}

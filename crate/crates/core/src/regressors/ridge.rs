use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};

use super::{Predictor, RegressionAlgorithm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeParams {
    pub lambda: f64,
}

impl RidgeParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("ridge penalty must be positive, got {lambda}")));
        }
        Ok(Self { lambda })
    }
}

/// Ridge regression without intercept, on the `1/n`-scaled objective
/// `(1/n)·Σ(y_i − x_iᵀθ)² + λ‖θ‖²`.
#[derive(Debug, Clone, Copy)]
pub struct Ridge {
    pub params: RidgeParams,
}

impl Ridge {
    pub fn new(params: RidgeParams) -> Self {
        Self { params }
    }
}

impl RegressionAlgorithm for Ridge {
    fn name(&self) -> String {
        format!("ridge(lambda={})", self.params.lambda)
    }

    fn fit(&self, train: &Dataset) -> Result<Predictor> {
        fit_ridge(train, self.params)
    }
}

/// Fitted coefficients `θ = (Σ̂ + λI)⁻¹ Ŝ` with `Σ̂ = XᵀX/n`, `Ŝ = Xᵀy/n`.
pub fn ridge_coefficients(train: &Dataset, params: RidgeParams) -> Result<Vec<f64>> {
    let n = train.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let d = train.dim();
    let canon = train.canonical();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for (x, y) in canon.iter() {
        for a in 0..d {
            rhs[a] += x[a] * y;
            for b in 0..=a {
                gram[(a, b)] += x[a] * x[b];
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for a in 0..d {
        rhs[a] *= inv_n;
        for b in 0..=a {
            let v = gram[(a, b)] * inv_n;
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
        gram[(a, a)] += params.lambda;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("ridge normal equations are not positive definite".into()))?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

pub fn fit_ridge(train: &Dataset, params: RidgeParams) -> Result<Predictor> {
    let theta = ridge_coefficients(train, params)?;
    let name = format!("ridge(lambda={})", params.lambda);
    let model = move |x: &[f64]| -> f64 { theta.iter().zip(x).map(|(t, v)| t * v).sum() };
    Ok(Predictor::new(model, train.len(), name))
}

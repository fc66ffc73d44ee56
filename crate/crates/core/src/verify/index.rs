use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibers::{FoldProblem, Form};
use crate::linalg::{self, Lu};
use crate::spectral;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub u: Vec<f64>,
    pub lambda_value: f64,
    pub index: i8,
    /// Negative eigenvalues of `DF(u)` (m-form) or real eigenvalues of
    /// `J(Tu) T` above one (r-form).
    pub parity_count: usize,
    /// Sign of `det DF(u)`.
    pub det_sign: f64,
    /// `index = sgn λ` and the determinant sign agree with the count.
    pub consistent: bool,
}

/// Local degree at a regular point.
pub fn index_at(prob: &FoldProblem, u: &[f64], tol: f64) -> Result<IndexReport> {
    let (lambda, _) = prob.lambda(u, None)?;
    if lambda.abs() <= tol {
        return Err(Error::CriticalPoint(lambda));
    }
    let df = prob.jacobian(u);
    let det_sign = Lu::factor(&df, 0.0).map(|lu| lu.det_sign()).unwrap_or(0.0);
    let parity_count = match prob.form {
        Form::MForm => {
            let eig = spectral::symmetric_eigendecompose(&df.symmetrized(), 1e-15)?;
            eig.eigenvalues.iter().filter(|&&x| x < 0.0).count()
        }
        Form::RForm => eigenvalues_above_one(&prob.compact_part(u))?,
    };
    let index = if parity_count % 2 == 0 { 1 } else { -1 };
    let det_parity = if det_sign > 0.0 { 1 } else { -1 };
    let consistent = index == if lambda > 0.0 { 1 } else { -1 } && det_parity == index;
    Ok(IndexReport {
        u: u.to_vec(),
        lambda_value: lambda,
        index,
        parity_count,
        det_sign,
        consistent,
    })
}

/// Real eigenvalues above one among the two largest in modulus, by power
/// iteration and deflation.
pub fn eigenvalues_above_one(k: &crate::linalg::DenseOperator) -> Result<usize> {
    let n = k.dim();
    let scale = k.inf_norm().max(1e-300);
    let start: Vec<f64> = (0..n).map(spectral::generic_start_entry).collect();
    let right = spectral::power_iterate(|x| k.matvec(x), &start, 1e-13 * scale, 200_000)?;
    if right.value <= 1.0 {
        return Ok(0);
    }
    let left = spectral::power_iterate(|x| k.matvec_t(x), &start, 1e-13 * scale, 200_000)?;
    if linalg::dot(&left.vector, &right.vector).abs() < 1e-12 {
        return Ok(1);
    }
    let second = spectral::deflated_second(k, right.value, &right.vector, &left.vector);
    Ok(match second.value {
        Some(v) if v > 1.0 => 2,
        _ => 1,
    })
}

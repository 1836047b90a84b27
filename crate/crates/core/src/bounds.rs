//! A-priori error bounds for the extracted eigenvalues and the error metrics
//! reported next to them.
//!
//! For an orthonormal `Q` whose largest principal angle to the leading
//! invariant subspace has sine `eps`:
//!
//! * RR (and therefore SVD-extract) errors are at most `C_RR eps^2 lambda_1`
//!   with `C_RR = 2 + eps^2 + lambda_{k+1}/lambda_1 <= 4`;
//! * SVD-extract errors are at most `min(C_SVD_i, C_RR) eps^2 lambda_1`;
//! * Nyström errors are at most
//!   `C_Nys_i (eps^2 lambda_{k+1} + eps^4 (lambda_1 - lambda_{k+1}))` whenever
//!   `alpha_i > 0`.
//!
//! Indices in this module are 0-based: `idx = 0` is the largest eigenvalue.

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::extract::EigenpairApprox;

/// Which end of the spectrum an approximation is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMode {
    /// value `i` pairs with `lambda_i`.
    Leading,
    /// value `i` pairs with `lambda_{n-k+i}`.
    Trailing,
}

impl ErrorMode {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMode::Leading => "leading",
            ErrorMode::Trailing => "trailing",
        }
    }

    /// Index into the full spectrum matched with approximation `idx` out of `k`.
    pub fn target_index(self, idx: usize, k: usize, n: usize) -> usize {
        match self {
            ErrorMode::Leading => idx,
            ErrorMode::Trailing => n - k + idx,
        }
    }
}

/// Per-index bounds and constants for one `(spectrum, k, eps)` triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub eps: f64,
    pub k: usize,
    pub c_rr: f64,
    /// Shared by every index.
    pub bound_rr: f64,
    pub alpha: Vec<f64>,
    pub c_nys: Vec<Option<f64>>,
    pub bound_nys: Vec<Option<f64>>,
    /// `None` where the SVD denominator is nonpositive and the RR bound is used.
    pub c_svd: Vec<Option<f64>>,
    pub bound_svd: Vec<f64>,
}

fn check_args(lambda: &[f64], k: usize, eps: f64) -> Result<()> {
    if k == 0 || k >= lambda.len() {
        return Err(Error::Index {
            index: k,
            size: lambda.len(),
        });
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Domain(format!("eps must lie in [0, 1), got {eps}")));
    }
    if lambda[0] <= 0.0 {
        return Err(Error::Domain("lambda_1 must be positive".into()));
    }
    Ok(())
}

fn check_idx(idx: usize, k: usize) -> Result<()> {
    if idx >= k {
        return Err(Error::Index {
            index: idx,
            size: k,
        });
    }
    Ok(())
}

/// `(C_RR, C_RR eps^2 lambda_1)`.
pub fn rr_bound(lambda: &[f64], k: usize, eps: f64) -> Result<(f64, f64)> {
    check_args(lambda, k, eps)?;
    let l1 = lambda[0];
    let c_rr = 2.0 + eps * eps + lambda[k] / l1;
    Ok((c_rr, c_rr * eps * eps * l1))
}

/// `alpha_i = 1 - (3 lambda_{k+1} + 3 eps^2 (lambda_1 - lambda_{k+1})) / lambda_i`.
pub fn alpha(lambda: &[f64], k: usize, eps: f64, idx: usize) -> Result<f64> {
    check_args(lambda, k, eps)?;
    check_idx(idx, k)?;
    let (l1, lk1, li) = (lambda[0], lambda[k], lambda[idx]);
    if li <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(1.0 - (3.0 * lk1 + 3.0 * eps * eps * (l1 - lk1)) / li)
}

/// Nyström bound at `idx`, as `(alpha_i, C_Nys_i, bound)`; `None` when
/// `alpha_i <= 0`.
pub fn nystrom_bound(
    lambda: &[f64],
    k: usize,
    eps: f64,
    idx: usize,
) -> Result<Option<(f64, f64, f64)>> {
    let a = alpha(lambda, k, eps, idx)?;
    if a <= 0.0 {
        return Ok(None);
    }
    let (l1, lk1, li) = (lambda[0], lambda[k], lambda[idx]);
    let e2 = eps * eps;
    let numerator = l1 * (1.0 + e2) + lk1 * (1.0 + e2 / (1.0 + (1.0 - e2).sqrt()));
    let c_nys = (numerator / (a * li)).powi(2);
    let bound = c_nys * (e2 * lk1 + e2 * e2 * (l1 - lk1));
    Ok(Some((a, c_nys, bound)))
}

/// `C_SVD_i = C_RR lambda_1 / (2 (lambda_i - 2 eps^2 lambda_1))`, or `None`
/// when the denominator is not positive.
pub fn svd_constant(lambda: &[f64], k: usize, eps: f64, idx: usize) -> Result<Option<f64>> {
    let (c_rr, _) = rr_bound(lambda, k, eps)?;
    check_idx(idx, k)?;
    let l1 = lambda[0];
    let denom = lambda[idx] - 2.0 * eps * eps * l1;
    if denom <= 0.0 {
        return Ok(None);
    }
    Ok(Some(c_rr * l1 / (2.0 * denom)))
}

/// `min(C_SVD_i, C_RR) eps^2 lambda_1`, falling back to the RR bound when
/// `lambda_i <= 2 eps^2 lambda_1`.
pub fn svd_bound(lambda: &[f64], k: usize, eps: f64, idx: usize) -> Result<f64> {
    let (c_rr, rr) = rr_bound(lambda, k, eps)?;
    match svd_constant(lambda, k, eps, idx)? {
        Some(c_svd) => Ok(c_svd.min(c_rr) * eps * eps * lambda[0]),
        None => Ok(rr),
    }
}

/// All bounds for indices `0..k`.
pub fn bound_set(lambda: &[f64], k: usize, eps: f64) -> Result<BoundSet> {
    let (c_rr, bound_rr) = rr_bound(lambda, k, eps)?;
    let mut set = BoundSet {
        eps,
        k,
        c_rr,
        bound_rr,
        alpha: Vec::with_capacity(k),
        c_nys: Vec::with_capacity(k),
        bound_nys: Vec::with_capacity(k),
        c_svd: Vec::with_capacity(k),
        bound_svd: Vec::with_capacity(k),
    };
    for idx in 0..k {
        set.alpha.push(alpha(lambda, k, eps, idx)?);
        let nys = nystrom_bound(lambda, k, eps, idx)?;
        set.c_nys.push(nys.map(|(_, c, _)| c));
        set.bound_nys.push(nys.map(|(_, _, b)| b));
        set.c_svd.push(svd_constant(lambda, k, eps, idx)?);
        set.bound_svd.push(svd_bound(lambda, k, eps, idx)?);
    }
    Ok(set)
}

/// `|lambda_target(i) - value_i|` for every extracted value.
pub fn eigen_errors(lambda: &[f64], approx: &EigenpairApprox, mode: ErrorMode) -> Result<Vec<f64>> {
    value_errors(lambda, &approx.values, mode)
}

/// [`eigen_errors`] on a bare value list.
pub fn value_errors(lambda: &[f64], values: &[f64], mode: ErrorMode) -> Result<Vec<f64>> {
    let (n, k) = (lambda.len(), values.len());
    if k > n {
        return Err(Error::Dimension(format!(
            "{k} approximate values for a spectrum of length {n}"
        )));
    }
    Ok(values
        .iter()
        .enumerate()
        .map(|(i, v)| (lambda[mode.target_index(i, k, n)] - v).abs())
        .collect())
}

/// `sin angle(u_target(i), v_i)` for every approximate vector, sign-insensitive.
///
/// `exact` holds all `n` eigenvectors as columns, in descending eigenvalue
/// order. The sine is computed as `||v - (u^T v) u||` which equals
/// `sqrt(1 - (u^T v)^2)` for unit vectors but keeps full relative accuracy for
/// small angles.
pub fn vector_angle_errors(
    exact: &DenseMatrix,
    approx: &EigenpairApprox,
    mode: ErrorMode,
) -> Result<Vec<f64>> {
    let (n, k) = (exact.ncols(), approx.vectors.ncols());
    if exact.nrows() != approx.vectors.nrows() || k > n {
        return Err(Error::Dimension(format!(
            "exact vectors are {}x{}, approximations {}x{}",
            exact.nrows(),
            n,
            approx.vectors.nrows(),
            k
        )));
    }
    Ok((0..k)
        .map(|i| {
            let u = exact.column(mode.target_index(i, k, n));
            let v = approx.vectors.column(i);
            let v = v / v.norm();
            let c = u.dot(&v).clamp(-1.0, 1.0);
            (v - u * c).norm().clamp(0.0, 1.0)
        })
        .collect())
}

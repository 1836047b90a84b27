//! Eigenpair extraction from a subspace: Rayleigh-Ritz, SVD-extract and
//! Nyström, plus the shift-and-flip variant for trailing eigenpairs.
//!
//! Every extractor costs one block product `A Q` plus `O(n k^2)` dense work.
//! For any orthonormal `Q` the extracted values satisfy
//!
//! ```text
//! lambda_i(A) >= nys_i >= svd_i >= rr_i
//! ```
//!
//! so for the leading eigenvalues Nyström is the most accurate of the three.

use serde::{Deserialize, Serialize};

use crate::dense::{self, DenseMatrix};
use crate::error::{Error, Result};
use crate::model::{DenseOperator, PsdOperator, SymmetricOperator};
use crate::random;
use crate::subspaces::OrthonormalBasis;

/// Default relative truncation tolerance for the Nyström core factorization.
pub const DEFAULT_CHOL_TOL: f64 = f64::EPSILON;

/// Largest dimension accepted by [`nystrom_approximation_dense`].
pub const DENSE_ORACLE_MAX_N: usize = 500;

/// Power iterations used when the shift is estimated automatically.
pub const AUTO_SHIFT_ITERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "RR")]
    Rr,
    #[serde(rename = "SVD_QV")]
    SvdQv,
    #[serde(rename = "SVD_U")]
    SvdU,
    #[serde(rename = "NYS")]
    Nys,
    #[serde(rename = "RR_SHIFTED")]
    RrShifted,
    #[serde(rename = "SVD_SHIFTED")]
    SvdShifted,
    #[serde(rename = "NYS_SHIFTED")]
    NysShifted,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Rr => "RR",
            Method::SvdQv => "SVD_QV",
            Method::SvdU => "SVD_U",
            Method::Nys => "NYS",
            Method::RrShifted => "RR_SHIFTED",
            Method::SvdShifted => "SVD_SHIFTED",
            Method::NysShifted => "NYS_SHIFTED",
        }
    }

    pub fn is_shifted(self) -> bool {
        matches!(
            self,
            Method::RrShifted | Method::SvdShifted | Method::NysShifted
        )
    }

    fn shifted(self) -> Method {
        match self {
            Method::Rr | Method::RrShifted => Method::RrShifted,
            Method::SvdQv | Method::SvdU | Method::SvdShifted => Method::SvdShifted,
            Method::Nys | Method::NysShifted => Method::NysShifted,
        }
    }
}

/// Which singular vectors SVD-extract returns as eigenvector approximations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SvdVariant {
    /// `Q V`: vectors from `span(Q)`.
    Qv,
    /// `U`: vectors from `span(AQ)`.
    U,
}

/// Approximate eigenpairs: values descending, vectors orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenpairApprox {
    pub method: Method,
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
    pub shift_gamma: Option<f64>,
    /// Retained rank of the Nyström core; `k` for the other methods.
    pub core_rank: usize,
    /// Smallest value before negative roundoff was clamped to zero, if any was.
    pub pre_clamp_min: Option<f64>,
    /// A back-converted shifted value came out negative (`gamma` too small).
    pub negative_after_shift: bool,
}

impl EigenpairApprox {
    fn new(method: Method, values: Vec<f64>, vectors: DenseMatrix, core_rank: usize) -> Self {
        EigenpairApprox {
            method,
            values,
            vectors,
            shift_gamma: None,
            core_rank,
            pre_clamp_min: None,
            negative_after_shift: false,
        }
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// `||A V - V diag(values)||_2`.
    pub fn residual_norm<A: SymmetricOperator + ?Sized>(&self, a: &A) -> Result<f64> {
        let mut r = a.apply_block(&self.vectors)?;
        for (j, v) in self.values.iter().enumerate() {
            r.column_mut(j).axpy(-v, &self.vectors.column(j), 1.0);
        }
        Ok(dense::spectral_norm(&r))
    }
}

fn products<A: SymmetricOperator + ?Sized>(a: &A, q: &OrthonormalBasis) -> Result<DenseMatrix> {
    if q.n() != a.dim() {
        return Err(Error::Dimension(format!(
            "basis has {} rows, operator is {n}x{n}",
            q.n(),
            n = a.dim()
        )));
    }
    a.apply_block(q.matrix())
}

/// Rayleigh-Ritz: eigenpairs of `Q^T A Q`, lifted back by `Q`.
pub fn rayleigh_ritz<A: SymmetricOperator + ?Sized>(
    a: &A,
    q: &OrthonormalBasis,
) -> Result<EigenpairApprox> {
    let y = products(a, q)?;
    let w = dense::symmetrize(&q.matrix().tr_mul(&y));
    let (values, omega) = dense::sym_eig(&w)?;
    let vectors = q.matrix() * omega;
    let k = q.k();
    Ok(EigenpairApprox::new(Method::Rr, values, vectors, k))
}

/// SVD-extract: singular values of `A Q`; vectors `Q V` or `U` per `variant`.
pub fn svd_extract<A: SymmetricOperator + ?Sized>(
    a: &A,
    q: &OrthonormalBasis,
    variant: SvdVariant,
) -> Result<EigenpairApprox> {
    let y = products(a, q)?;
    let (u, s, v) = dense::svd_thin(&y)?;
    let (method, vectors) = match variant {
        SvdVariant::Qv => (Method::SvdQv, q.matrix() * v),
        SvdVariant::U => (Method::SvdU, u),
    };
    Ok(EigenpairApprox::new(method, s, vectors, q.k()))
}

/// Nyström: eigenpairs of `A<Q> = AQ (Q^T A Q)^+ (AQ)^T`, computed without
/// forming any `n x n` matrix.
///
/// With `AQ = Q~ R~` and `Q^T A Q = L L^T` (truncated at `chol_tol`), the
/// values are the squared singular values of `Z = R~ L^-T` and the vectors are
/// `Q~` times its left singular vectors. If the core is truncated to rank `r`,
/// the last `k - r` values are zero and their vectors complete `span(Q~)`.
pub fn nystrom_extract<A: SymmetricOperator + ?Sized>(
    a: &A,
    q: &OrthonormalBasis,
    chol_tol: f64,
) -> Result<EigenpairApprox> {
    let y = products(a, q)?;
    nystrom_from_product(q.matrix(), &y, chol_tol)
}

fn nystrom_from_product(
    q: &DenseMatrix,
    y: &DenseMatrix,
    chol_tol: f64,
) -> Result<EigenpairApprox> {
    let k = q.ncols();
    let (q_tilde, r_tilde) = dense::thin_qr(y)?;
    let w = dense::symmetrize(&q.tr_mul(y));
    let factor = dense::chol_trunc(&w, effective_chol_tol(&w, y, chol_tol))?;
    let r = factor.rank;

    let mut z = DenseMatrix::zeros(k, k);
    if r > 0 {
        // Z L^T = R~(:, 1..r)  <=>  L Z^T = R~(:, 1..r)^T
        let rhs = r_tilde.columns(0, r).transpose();
        let zt = factor
            .matrix
            .solve_lower_triangular(&rhs)
            .ok_or_else(|| Error::Rank("singular truncated Cholesky factor".into()))?;
        z.columns_mut(0, r).copy_from(&zt.transpose());
    }
    let (u_hat, sigma, _) = dense::svd_thin(&z)?;
    let mut values: Vec<f64> = sigma
        .iter()
        .enumerate()
        .map(|(i, s)| if i < r { s * s } else { 0.0 })
        .collect();
    let pre_clamp_min = clamp_negative(&mut values);
    let vectors = q_tilde * u_hat;
    let mut out = EigenpairApprox::new(Method::Nys, values, vectors, r);
    out.pre_clamp_min = pre_clamp_min;
    Ok(out)
}

/// `chol_tol` raised to the rounding level of `W = Q^T Y`, which carries
/// absolute errors of order `k u ||Y||_F` independent of `trace(W)`.
pub fn effective_chol_tol(w: &DenseMatrix, y: &DenseMatrix, chol_tol: f64) -> f64 {
    let trace = w.trace();
    if trace <= 0.0 {
        return chol_tol;
    }
    let floor = w.nrows() as f64 * f64::EPSILON * y.norm();
    chol_tol.max(floor / trace)
}

fn clamp_negative(values: &mut [f64]) -> Option<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        for v in values.iter_mut() {
            *v = v.max(0.0);
        }
        Some(min)
    } else {
        None
    }
}

/// Run one of the unshifted extractors by tag. Shifted tags are rejected.
pub fn extract<A: SymmetricOperator + ?Sized>(
    a: &A,
    q: &OrthonormalBasis,
    method: Method,
    chol_tol: f64,
) -> Result<EigenpairApprox> {
    match method {
        Method::Rr => rayleigh_ritz(a, q),
        Method::SvdQv => svd_extract(a, q, SvdVariant::Qv),
        Method::SvdU => svd_extract(a, q, SvdVariant::U),
        Method::Nys => nystrom_extract(a, q, chol_tol),
        other => Err(Error::Domain(format!(
            "{} is a shifted method; use shifted_trailing_extract",
            other.tag()
        ))),
    }
}

/// Explicit `n x n` Nyström approximation `AQ pinv(Q^T A Q) (AQ)^T`, with the
/// pseudoinverse cut at `1e-12 * sigma_1`. Oracle use only (`n <= 500`).
pub fn nystrom_approximation_dense(a: &DenseMatrix, q: &OrthonormalBasis) -> Result<DenseMatrix> {
    let n = a.nrows();
    if n > DENSE_ORACLE_MAX_N {
        return Err(Error::Refused(format!(
            "dense Nyström oracle limited to n <= {DENSE_ORACLE_MAX_N}, got {n}"
        )));
    }
    if !a.is_square() || q.n() != n {
        return Err(Error::Dimension(format!(
            "matrix is {}x{}, basis has {} rows",
            a.nrows(),
            a.ncols(),
            q.n()
        )));
    }
    let y = a * q.matrix();
    let w = dense::symmetrize(&q.matrix().tr_mul(&y));
    let (u, s, v) = dense::svd_thin(&w)?;
    let cutoff = 1e-12 * s.first().copied().unwrap_or(0.0);
    let inv: Vec<f64> = s
        .iter()
        .map(|&x| if x > cutoff && x > 0.0 { 1.0 / x } else { 0.0 })
        .collect();
    let pinv = v * dense::diag(&inv) * u.transpose();
    Ok(dense::symmetrize(&(&y * pinv * y.transpose())))
}

/// Power-iteration estimate of an upper bound on `lambda_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaMaxEstimate {
    /// `rayleigh + residual`.
    pub gamma: f64,
    /// Final Rayleigh quotient.
    pub rayleigh: f64,
    /// `||A u - rayleigh u||_2` for the final unit iterate `u`.
    pub residual: f64,
}

/// Power iteration from a seeded Gaussian start. A zero start vector is
/// redrawn once before giving up.
pub fn estimate_lambda_max_upper<A: SymmetricOperator + ?Sized>(
    a: &A,
    iters: usize,
    seed: u64,
) -> Result<LambdaMaxEstimate> {
    let n = a.dim();
    let mut start = random::gaussian_matrix(n, 1, seed);
    if start.norm() == 0.0 {
        start = random::gaussian_matrix(n, 1, random::derive_seed(seed, 1));
        if start.norm() == 0.0 {
            return Err(Error::Rank("power iteration start vector is zero".into()));
        }
    }
    power_upper_bound_from(a, &start, iters)
}

/// Power iteration from an explicit start vector (`n x 1`).
pub fn power_upper_bound_from<A: SymmetricOperator + ?Sized>(
    a: &A,
    start: &DenseMatrix,
    iters: usize,
) -> Result<LambdaMaxEstimate> {
    if iters == 0 {
        return Err(Error::Domain("power iteration needs iters >= 1".into()));
    }
    if start.shape() != (a.dim(), 1) {
        return Err(Error::Dimension("start vector must be n x 1".into()));
    }
    let norm = start.norm();
    if norm == 0.0 {
        return Err(Error::Rank("power iteration start vector is zero".into()));
    }
    let mut x = start / norm;
    for _ in 0..iters {
        let y = a.apply_block(&x)?;
        let ny = y.norm();
        if ny == 0.0 {
            break;
        }
        x = y / ny;
    }
    let ax = a.apply_block(&x)?;
    let rayleigh = x.dot(&ax);
    let residual = (ax - &x * rayleigh).norm();
    Ok(LambdaMaxEstimate {
        gamma: rayleigh + residual,
        rayleigh,
        residual,
    })
}

fn default_shift_seed(seed: u64) -> u64 {
    random::derive_seed(seed, 0x53_4849_4654)
}

/// Trailing eigenpairs of `A` from the leading eigenpairs of `gamma I - A`.
///
/// `method` picks the extractor (`Rr`, `SvdQv`, `SvdU` or `Nys`). When `gamma`
/// is `None` it is estimated with [`estimate_lambda_max_upper`]. The shift is
/// applied exactly in the eigenvalue space of `a`. Values are returned
/// descending and pair with `lambda_{n-k+i}`. A `gamma` below `lambda_1`
/// makes `gamma I - A` indefinite; negative back-converted values are then
/// flagged in [`EigenpairApprox::negative_after_shift`].
pub fn shifted_trailing_extract(
    a: &PsdOperator,
    q: &OrthonormalBasis,
    method: Method,
    gamma: Option<f64>,
    chol_tol: f64,
) -> Result<EigenpairApprox> {
    let gamma = match gamma {
        Some(g) => g,
        None => estimate_lambda_max_upper(a, AUTO_SHIFT_ITERS, default_shift_seed(a.seed()))?.gamma,
    };
    if !gamma.is_finite() {
        return Err(Error::Domain("shift must be finite".into()));
    }
    let flipped = SpectralOperator {
        u: a.eigenvectors(),
        mu: a.eigenvalues().iter().map(|l| gamma - l).collect(),
    };
    run_shifted(&flipped, q, method, gamma, chol_tol)
}

/// `U diag(mu) U^T` for orthogonal `U` and `mu` of either sign.
struct SpectralOperator<'a> {
    u: &'a DenseMatrix,
    mu: Vec<f64>,
}

impl SymmetricOperator for SpectralOperator<'_> {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn apply_block(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.nrows() != self.dim() {
            return Err(Error::Dimension(format!(
                "block has {} rows, operator is {n}x{n}",
                x.nrows(),
                n = self.dim()
            )));
        }
        let mut c = self.u.tr_mul(x);
        for (i, m) in self.mu.iter().enumerate() {
            c.row_mut(i).scale_mut(*m);
        }
        Ok(self.u * c)
    }
}

/// Same as [`shifted_trailing_extract`] for an explicitly stored matrix:
/// `gamma I - A` is materialized.
pub fn shifted_trailing_extract_dense(
    a: &DenseOperator,
    q: &OrthonormalBasis,
    method: Method,
    gamma: Option<f64>,
    chol_tol: f64,
) -> Result<EigenpairApprox> {
    let gamma = match gamma {
        Some(g) => g,
        None => estimate_lambda_max_upper(a, AUTO_SHIFT_ITERS, default_shift_seed(0))?.gamma,
    };
    if !gamma.is_finite() {
        return Err(Error::Domain("shift must be finite".into()));
    }
    let n = a.matrix().nrows();
    let flipped = DenseOperator::new(DenseMatrix::identity(n, n) * gamma - a.matrix())?;
    run_shifted(&flipped, q, method, gamma, chol_tol)
}

fn run_shifted<A: SymmetricOperator + ?Sized>(
    flipped: &A,
    q: &OrthonormalBasis,
    method: Method,
    gamma: f64,
    chol_tol: f64,
) -> Result<EigenpairApprox> {
    let base = match method {
        Method::RrShifted => Method::Rr,
        Method::NysShifted => Method::Nys,
        Method::SvdShifted => Method::SvdQv,
        m => m,
    };
    let inner = extract(flipped, q, base, chol_tol)?;
    let k = inner.k();
    // gamma - mu is ascending; reverse to report descending
    let mut values = Vec::with_capacity(k);
    let mut vectors = DenseMatrix::zeros(inner.vectors.nrows(), k);
    for (dst, src) in (0..k).rev().enumerate() {
        values.push(gamma - inner.values[src]);
        vectors.set_column(dst, &inner.vectors.column(src));
    }
    let negative = values.iter().any(|v| *v < 0.0);
    Ok(EigenpairApprox {
        method: base.shifted(),
        values,
        vectors,
        shift_gamma: Some(gamma),
        core_rank: inner.core_rank,
        pre_clamp_min: inner.pre_clamp_min,
        negative_after_shift: negative,
    })
}

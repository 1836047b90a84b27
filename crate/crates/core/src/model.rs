//! Synthetic PSD test matrices with prescribed spectra.
//!
//! A [`PsdOperator`] is stored as its eigendecomposition `A = U diag(lambda) U^T`
//! with a Haar-random orthogonal `U`, so the exact reference eigenpairs are
//! always available and block products never form `A`.

use serde::{Deserialize, Serialize};

use crate::dense::{self, DenseMatrix};
use crate::error::{Error, Result};
use crate::random;

/// Above this dimension [`PsdOperator::dense`] refuses to materialize `A`.
pub const DENSE_THRESHOLD: usize = 2000;

/// Anything that can multiply a block of vectors by a symmetric matrix.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply_block(&self, x: &DenseMatrix) -> Result<DenseMatrix>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Exponential,
    Algebraic,
    Linear,
    Explicit,
}

impl SpectrumKind {
    pub fn name(self) -> &'static str {
        match self {
            SpectrumKind::Exponential => "exponential",
            SpectrumKind::Algebraic => "algebraic",
            SpectrumKind::Linear => "linear",
            SpectrumKind::Explicit => "explicit",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            SpectrumKind::Exponential => 0,
            SpectrumKind::Algebraic => 1,
            SpectrumKind::Linear => 2,
            SpectrumKind::Explicit => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(SpectrumKind::Exponential),
            1 => Some(SpectrumKind::Algebraic),
            2 => Some(SpectrumKind::Linear),
            3 => Some(SpectrumKind::Explicit),
            _ => None,
        }
    }
}

impl std::str::FromStr for SpectrumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(SpectrumKind::Exponential),
            "algebraic" | "alg" => Ok(SpectrumKind::Algebraic),
            "linear" | "lin" => Ok(SpectrumKind::Linear),
            "explicit" => Ok(SpectrumKind::Explicit),
            other => Err(Error::Spectrum(format!("unknown spectrum kind '{other}'"))),
        }
    }
}

/// Eigenvalue profile of a synthetic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub n: usize,
    pub kind: SpectrumKind,
    pub lambda_max: f64,
    pub lambda_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_values: Option<Vec<f64>>,
}

impl SpectrumSpec {
    pub fn new(n: usize, kind: SpectrumKind, lambda_max: f64, lambda_min: f64) -> Self {
        SpectrumSpec {
            n,
            kind,
            lambda_max,
            lambda_min,
            explicit_values: None,
        }
    }

    pub fn exponential(n: usize, lambda_max: f64, lambda_min: f64) -> Self {
        Self::new(n, SpectrumKind::Exponential, lambda_max, lambda_min)
    }

    pub fn algebraic(n: usize, lambda_max: f64, lambda_min: f64) -> Self {
        Self::new(n, SpectrumKind::Algebraic, lambda_max, lambda_min)
    }

    pub fn linear(n: usize, lambda_max: f64, lambda_min: f64) -> Self {
        Self::new(n, SpectrumKind::Linear, lambda_max, lambda_min)
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        let n = values.len();
        let lambda_max = values.first().copied().unwrap_or(0.0);
        let lambda_min = values.last().copied().unwrap_or(0.0);
        SpectrumSpec {
            n,
            kind: SpectrumKind::Explicit,
            lambda_max,
            lambda_min,
            explicit_values: Some(values),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Spectrum("dimension must be positive".into()));
        }
        if self.kind == SpectrumKind::Explicit {
            let v = self
                .explicit_values
                .as_ref()
                .ok_or_else(|| Error::Spectrum("explicit kind needs a value list".into()))?;
            if v.len() != self.n {
                return Err(Error::Spectrum(format!(
                    "explicit list has {} values, expected {}",
                    v.len(),
                    self.n
                )));
            }
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::Spectrum(
                    "explicit values must be finite and >= 0".into(),
                ));
            }
            if v.windows(2).any(|w| w[0] < w[1]) {
                return Err(Error::Spectrum("explicit values must be descending".into()));
            }
            return Ok(());
        }
        if !(self.lambda_max.is_finite() && self.lambda_max > 0.0) {
            return Err(Error::Spectrum(format!(
                "lambda_max must be finite and > 0, got {}",
                self.lambda_max
            )));
        }
        if !(self.lambda_min >= 0.0 && self.lambda_min <= self.lambda_max) {
            return Err(Error::Spectrum(format!(
                "need lambda_max >= lambda_min >= 0, got {} and {}",
                self.lambda_max, self.lambda_min
            )));
        }
        Ok(())
    }
}

/// Descending eigenvalue list described by `spec`.
pub fn spectrum(spec: &SpectrumSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.n;
    let (hi, lo) = (spec.lambda_max, spec.lambda_min);
    // position in [0, 1] of index j (0-based)
    let t = |j: usize| {
        if n == 1 {
            0.0
        } else {
            j as f64 / (n - 1) as f64
        }
    };
    let values = match spec.kind {
        SpectrumKind::Explicit => spec.explicit_values.clone().unwrap_or_default(),
        SpectrumKind::Exponential => {
            if lo == 0.0 {
                return Err(Error::Spectrum(
                    "exponential decay needs lambda_min > 0".into(),
                ));
            }
            let ratio = lo / hi;
            (0..n).map(|j| hi * ratio.powf(t(j))).collect()
        }
        SpectrumKind::Algebraic => {
            if lo == 0.0 {
                return Err(Error::Spectrum(
                    "algebraic decay needs lambda_min > 0".into(),
                ));
            }
            if n == 1 {
                vec![hi]
            } else {
                let p = (hi / lo).ln() / (n as f64).ln();
                (0..n).map(|j| hi * ((j + 1) as f64).powf(-p)).collect()
            }
        }
        SpectrumKind::Linear => (0..n).map(|j| (1.0 - t(j)) * hi + t(j) * lo).collect(),
    };
    Ok(values)
}

/// PSD matrix held as `U diag(lambda) U^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdOperator {
    u: DenseMatrix,
    lambda: Vec<f64>,
    seed: u64,
    kind: Option<SpectrumKind>,
}

impl PsdOperator {
    /// Build from an orthogonal `u` and a descending nonnegative `lambda`.
    pub fn from_parts(
        u: DenseMatrix,
        lambda: Vec<f64>,
        seed: u64,
        kind: Option<SpectrumKind>,
    ) -> Result<Self> {
        let n = lambda.len();
        if u.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "eigenvector matrix is {}x{}, expected {n}x{n}",
                u.nrows(),
                u.ncols()
            )));
        }
        if lambda.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Spectrum(
                "eigenvalues must be finite and >= 0".into(),
            ));
        }
        if lambda.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Spectrum("eigenvalues must be descending".into()));
        }
        let defect = dense::orthonormality_defect(&u);
        let tolerance = 1e-10 * (n.max(1) as f64).sqrt();
        if defect > tolerance {
            return Err(Error::NotOrthonormal { defect, tolerance });
        }
        Ok(PsdOperator {
            u,
            lambda,
            seed,
            kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    pub fn eigenvectors(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> Option<SpectrumKind> {
        self.kind
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda.first().copied().unwrap_or(0.0)
    }

    /// `U_1`: the leading `k` eigenvectors.
    pub fn leading_vectors(&self, k: usize) -> DenseMatrix {
        self.u.columns(0, k).into_owned()
    }

    /// The last `k` eigenvectors, spanning the trailing invariant subspace.
    pub fn trailing_vectors(&self, k: usize) -> DenseMatrix {
        let n = self.dim();
        self.u.columns(n - k, k).into_owned()
    }

    /// `[u_{k+1}, ..., u_n]`, the orthogonal complement of the leading `k`.
    pub fn complement_vectors(&self, k: usize) -> DenseMatrix {
        let n = self.dim();
        self.u.columns(k, n - k).into_owned()
    }

    /// Materialize `A`. Refused above [`DENSE_THRESHOLD`].
    pub fn dense(&self) -> Result<DenseMatrix> {
        let n = self.dim();
        if n > DENSE_THRESHOLD {
            return Err(Error::Refused(format!(
                "dense materialization of n = {n} exceeds {DENSE_THRESHOLD}"
            )));
        }
        let mut scaled = self.u.clone();
        for (j, l) in self.lambda.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*l);
        }
        Ok(dense::symmetrize(&(scaled * self.u.transpose())))
    }

    /// `U (Lambda (U^T x))`.
    pub fn apply_block(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.nrows() != self.dim() {
            return Err(Error::Dimension(format!(
                "operator is {n}x{n} but block has {} rows",
                x.nrows(),
                n = self.dim()
            )));
        }
        let mut coeffs = self.u.tr_mul(x);
        for (i, l) in self.lambda.iter().enumerate() {
            coeffs.row_mut(i).scale_mut(*l);
        }
        Ok(&self.u * coeffs)
    }

    /// Same eigenvectors with eigenvalues mapped by `f`, re-sorted descending.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<PsdOperator> {
        let mapped: Vec<f64> = self.lambda.iter().map(|&l| f(l)).collect();
        let mut order: Vec<usize> = (0..mapped.len()).collect();
        order.sort_by(|&a, &b| mapped[b].total_cmp(&mapped[a]));
        let mut u = DenseMatrix::zeros(self.dim(), self.dim());
        for (dst, &src) in order.iter().enumerate() {
            u.set_column(dst, &self.u.column(src));
        }
        let lambda = order.iter().map(|&i| mapped[i]).collect();
        PsdOperator::from_parts(u, lambda, self.seed, None)
    }
}

impl SymmetricOperator for PsdOperator {
    fn dim(&self) -> usize {
        PsdOperator::dim(self)
    }

    fn apply_block(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        PsdOperator::apply_block(self, x)
    }
}

/// An explicitly stored symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: DenseMatrix,
}

impl DenseOperator {
    /// Wraps `m` after symmetrizing it. `m` must be square and symmetric to
    /// within `1e-12 * ||m||_2`.
    pub fn new(m: DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "dense operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let asym = (&m - m.transpose()).norm();
        let scale = dense::spectral_norm(&m);
        if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) * 2.0 {
            return Err(Error::Domain(format!(
                "matrix is not symmetric (||m - m^T||_F = {asym:e})"
            )));
        }
        Ok(DenseOperator {
            matrix: dense::symmetrize(&m),
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }
}

impl SymmetricOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply_block(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.nrows() != self.matrix.ncols() {
            return Err(Error::Dimension(format!(
                "operator is {n}x{n} but block has {} rows",
                x.nrows(),
                n = self.matrix.ncols()
            )));
        }
        Ok(&self.matrix * x)
    }
}

/// Random PSD matrix with eigenvalues `spectrum(spec)` and Haar-distributed
/// eigenvectors (QR of a seeded Gaussian matrix).
pub fn make_psd(spec: &SpectrumSpec, seed: u64) -> Result<PsdOperator> {
    let lambda = spectrum(spec)?;
    let n = spec.n;
    let g = random::gaussian_matrix(n, n, seed);
    let (u, _) = dense::thin_qr(&g)?;
    PsdOperator::from_parts(u, lambda, seed, Some(spec.kind))
}

/// `A^p` with the same eigenvectors. Negative powers need a positive spectrum.
pub fn operator_power(a: &PsdOperator, p: f64) -> Result<PsdOperator> {
    if !p.is_finite() {
        return Err(Error::Domain(format!("power must be finite, got {p}")));
    }
    if p < 0.0 && a.eigenvalues().contains(&0.0) {
        return Err(Error::Domain(
            "negative power of an operator with a zero eigenvalue".into(),
        ));
    }
    if p == 1.0 {
        return Ok(a.clone());
    }
    let mut out = a.map_spectrum(|l| if p == 0.0 { 1.0 } else { l.powf(p) })?;
    out.kind = a.kind;
    Ok(out)
}

//! Orthonormal subspace bases handed to the extractors, and principal angles.
//!
//! Three generators cover the experiments: the randomized rangefinder, an
//! exactly controlled epsilon-aligned basis for the leading invariant subspace,
//! and a Gaussian perturbation of the trailing invariant subspace.

use serde::{Deserialize, Serialize};

use crate::dense::{self, DenseMatrix};
use crate::error::{Error, Result};
use crate::model::PsdOperator;
use crate::random;

/// Orthonormality tolerance for bases entering the crate from outside.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Rangefinder,
    EpsilonAligned,
    PerturbedTrailing,
    Canonical,
    External,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Rangefinder => "rangefinder",
            Provenance::EpsilonAligned => "epsilon_aligned",
            Provenance::PerturbedTrailing => "perturbed_trailing",
            Provenance::Canonical => "canonical",
            Provenance::External => "external",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Provenance::Rangefinder => 0,
            Provenance::EpsilonAligned => 1,
            Provenance::PerturbedTrailing => 2,
            Provenance::Canonical => 3,
            Provenance::External => 4,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Provenance::Rangefinder,
            1 => Provenance::EpsilonAligned,
            2 => Provenance::PerturbedTrailing,
            3 => Provenance::Canonical,
            4 => Provenance::External,
            _ => return None,
        })
    }
}

/// Which end of the spectrum a canonical basis spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Leading,
    Trailing,
}

/// `n x k` matrix with orthonormal columns plus where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    q: DenseMatrix,
    pub provenance: Provenance,
    pub seed: u64,
    /// Target subspace error, when the generator controls one.
    pub eps: Option<f64>,
    /// `||M||_2` and `||N||_2` of the realized `Q = U_1 + eps^2 U_1 M + eps U_2 N`.
    pub realized_m_norm: Option<f64>,
    pub realized_n_norm: Option<f64>,
}

impl OrthonormalBasis {
    fn generated(q: DenseMatrix, provenance: Provenance, seed: u64, eps: Option<f64>) -> Self {
        OrthonormalBasis {
            q,
            provenance,
            seed,
            eps,
            realized_m_norm: None,
            realized_n_norm: None,
        }
    }

    /// Wrap a user-supplied matrix after checking `q^T q = I` to `1e-10`.
    pub fn external(q: DenseMatrix) -> Result<Self> {
        check_orthonormal(&q)?;
        if q.ncols() > q.nrows() {
            return Err(Error::Dimension(format!(
                "basis has more columns ({}) than rows ({})",
                q.ncols(),
                q.nrows()
            )));
        }
        Ok(Self::generated(q, Provenance::External, 0, None))
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.q
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn k(&self) -> usize {
        self.q.ncols()
    }

    /// Same span, different basis: `Q * rotation`.
    pub fn rotated(&self, rotation: &DenseMatrix) -> Result<Self> {
        if rotation.shape() != (self.k(), self.k()) {
            return Err(Error::Dimension("rotation must be k x k".into()));
        }
        check_orthonormal(rotation)?;
        let mut out = self.clone();
        out.q = &self.q * rotation;
        Ok(out)
    }
}

fn check_orthonormal(q: &DenseMatrix) -> Result<()> {
    let defect = dense::orthonormality_defect(q);
    if defect > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal {
            defect,
            tolerance: ORTHONORMAL_TOL,
        });
    }
    Ok(())
}

fn check_k(k: usize, n: usize, strict: bool) -> Result<()> {
    let ok = k >= 1 && if strict { k < n } else { k <= n };
    if !ok {
        let bound = if strict { "1 <= k < n" } else { "1 <= k <= n" };
        return Err(Error::Dimension(format!(
            "need {bound}, got k = {k}, n = {n}"
        )));
    }
    Ok(())
}

/// Randomized rangefinder: `Q = qr(A^(q+1) Omega)` for a seeded Gaussian
/// `Omega`, re-orthonormalizing between the `power_iters` extra products.
pub fn randomized_rangefinder(
    a: &PsdOperator,
    k: usize,
    seed: u64,
    power_iters: usize,
) -> Result<OrthonormalBasis> {
    let n = a.dim();
    check_k(k, n, false)?;
    let omega = random::gaussian_matrix(n, k, seed);
    let mut y = a.apply_block(&omega)?;
    for _ in 0..power_iters {
        let (q, _) = dense::thin_qr(&y)?;
        y = a.apply_block(&q)?;
    }
    if y.iter().all(|x| *x == 0.0) {
        return Err(Error::Rank("sketch A * Omega is identically zero".into()));
    }
    let (q, r) = dense::thin_qr(&y)?;
    if (0..k).any(|i| r[(i, i)] == 0.0) {
        return Err(Error::Rank(
            "sketch A * Omega is exactly rank deficient".into(),
        ));
    }
    Ok(OrthonormalBasis::generated(
        q,
        Provenance::Rangefinder,
        seed,
        None,
    ))
}

/// Orthonormal basis whose largest principal angle to `span(U_1)` has sine
/// exactly `eps`.
///
/// Built as `Q = U_1 cos(Theta) + U_2 Z sin(Theta)` with `Z` a seeded random
/// orthonormal `(n-k) x k` matrix. One angle equals `asin(eps)`; the others are
/// uniform on `[0, asin(eps)]`. When `n - k < k` only `n - k` angles can be
/// nonzero and the rest are zero.
pub fn epsilon_aligned_basis(
    a: &PsdOperator,
    k: usize,
    eps: f64,
    seed: u64,
) -> Result<OrthonormalBasis> {
    use rand::Rng;

    let n = a.dim();
    check_k(k, n, true)?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Domain(format!("eps must lie in [0, 1), got {eps}")));
    }
    let u1 = a.leading_vectors(k);
    let u2 = a.complement_vectors(k);
    let active = k.min(n - k);

    let theta_max = eps.asin();
    let mut rng = random::rng(seed);
    let pinned = rng.random_range(0..active);
    let mut theta = vec![0.0; k];
    for (j, t) in theta.iter_mut().enumerate().take(active) {
        *t = if j == pinned {
            theta_max
        } else {
            theta_max * rng.random::<f64>()
        };
    }

    let g = random::gaussian_matrix(n - k, active, random::derive_seed(seed, 1));
    let (z_active, _) = dense::thin_qr(&g)?;
    let mut z_sin = DenseMatrix::zeros(n - k, k);
    for (j, t) in theta.iter().enumerate().take(active) {
        z_sin.set_column(j, &(z_active.column(j) * t.sin()));
    }
    let mut q = &u2 * &z_sin;
    for (j, t) in theta.iter().enumerate() {
        q.column_mut(j).axpy(t.cos(), &u1.column(j), 1.0);
    }

    let mut basis = OrthonormalBasis::generated(q, Provenance::EpsilonAligned, seed, Some(eps));
    if eps > 0.0 {
        let e2 = eps * eps;
        basis.realized_m_norm = Some(
            theta
                .iter()
                .map(|t| (1.0 - t.cos()) / e2)
                .fold(0.0, f64::max),
        );
        basis.realized_n_norm = Some(theta.iter().map(|t| t.sin() / eps).fold(0.0, f64::max));
    }
    Ok(basis)
}

/// `qr(U_trail + eps G)` where `U_trail` holds the last `k` eigenvectors and
/// `G` has i.i.d. `N(0, 1/n)` entries.
pub fn perturbed_trailing_basis(
    a: &PsdOperator,
    k: usize,
    eps: f64,
    seed: u64,
) -> Result<OrthonormalBasis> {
    let n = a.dim();
    check_k(k, n, true)?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!(
            "eps must be finite and >= 0, got {eps}"
        )));
    }
    let scale = eps / (n as f64).sqrt();
    let g = random::gaussian_matrix(n, k, seed);
    let perturbed = a.trailing_vectors(k) + g * scale;
    let (q, _) = dense::thin_qr(&perturbed)?;
    Ok(OrthonormalBasis::generated(
        q,
        Provenance::PerturbedTrailing,
        seed,
        Some(eps),
    ))
}

/// The exact leading or trailing `k` eigenvectors.
pub fn canonical_basis(a: &PsdOperator, k: usize, side: Side) -> Result<OrthonormalBasis> {
    check_k(k, a.dim(), false)?;
    let q = match side {
        Side::Leading => a.leading_vectors(k),
        Side::Trailing => a.trailing_vectors(k),
    };
    let eps = match side {
        Side::Leading => Some(0.0),
        Side::Trailing => None,
    };
    Ok(OrthonormalBasis::generated(
        q,
        Provenance::Canonical,
        0,
        eps,
    ))
}

/// Sines of the principal angles between `span(x)` and `span(y)`, descending,
/// `min(k, m)` of them.
///
/// Cosines are the singular values of `x^T y`. Angles whose cosine exceeds
/// `1/sqrt(2)` take their sine from the singular values of the projection
/// residual instead, since `sqrt(1 - c^2)` loses all digits for small angles.
pub fn principal_angles(x: &DenseMatrix, y: &DenseMatrix) -> Result<Vec<f64>> {
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "bases live in R^{} and R^{}",
            x.nrows(),
            y.nrows()
        )));
    }
    check_orthonormal(x)?;
    check_orthonormal(y)?;
    let p = x.ncols().min(y.ncols());
    if p == 0 {
        return Ok(Vec::new());
    }
    let cos: Vec<f64> = dense::singular_values(&x.tr_mul(y))
        .into_iter()
        .take(p)
        .map(|c| c.clamp(0.0, 1.0))
        .collect();
    // residual of the smaller basis after projecting onto the larger one
    let residual = if x.ncols() >= y.ncols() {
        y - x * x.tr_mul(y)
    } else {
        x - y * y.tr_mul(x)
    };
    let mut sin_small_first = dense::singular_values(&residual);
    sin_small_first.truncate(p);
    sin_small_first.reverse();
    let mut sines: Vec<f64> = cos
        .iter()
        .zip(sin_small_first.iter())
        .map(|(&c, &s)| {
            if c * c >= 0.5 {
                s.clamp(0.0, 1.0)
            } else {
                (1.0 - c * c).sqrt()
            }
        })
        .collect();
    sines.sort_by(|a, b| b.total_cmp(a));
    Ok(sines)
}

/// Largest principal-angle sine, i.e. `||sin Theta(span x, span y)||_2`.
pub fn subspace_distance(x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    Ok(principal_angles(x, y)?.first().copied().unwrap_or(0.0))
}

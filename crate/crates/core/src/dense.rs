//! Dense factorization kernels.
//!
//! Thin wrappers over nalgebra's Householder QR, symmetric QR-iteration and
//! Golub-Kahan SVD that pin down the output conventions the rest of the crate
//! relies on: descending order, nonnegative `R` diagonal and a fixed sign for
//! every eigen/singular vector (largest-magnitude entry positive). The
//! truncated Cholesky factorization is implemented here directly.
//!
//! All matrices are nalgebra `DMatrix<f64>`, i.e. column-major storage.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// General dense matrix used throughout the crate (column-major).
pub type DenseMatrix = DMatrix<f64>;

/// Which triangle of a [`TriangularFactor`] carries the entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Triangle {
    Lower,
    Upper,
}

/// Output of [`chol_trunc`]: `matrix` is `rank x rank` lower triangular with
/// strictly positive diagonal, and `matrix * matrix^T` reproduces the leading
/// `rank x rank` block of the factored matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularFactor {
    pub matrix: DenseMatrix,
    pub triangle: Triangle,
    pub rank: usize,
    /// Size of the matrix that was factored.
    pub order: usize,
}

impl TriangularFactor {
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.order
    }
}

/// Symmetric eigendecomposition, eigenvalues descending.
pub fn sym_eig(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "sym_eig needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), DenseMatrix::zeros(0, 0)));
    }
    let sym = symmetrize(m);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let order = descending_order(eig.eigenvalues.as_slice());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    fix_column_signs(&mut vectors, None);
    Ok((values, vectors))
}

/// Thin Householder QR of a tall matrix; the diagonal of `r` is nonnegative.
pub fn thin_qr(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if m.nrows() < m.ncols() {
        return Err(Error::Dimension(format!(
            "thin_qr needs rows >= cols, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let qr = nalgebra::QR::new(m.clone());
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows() {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    Ok((q, r))
}

/// Thin SVD `m = u * diag(s) * v^T` with `s` descending.
///
/// Each singular pair is sign-fixed jointly so that the largest-magnitude
/// entry of the left vector is positive.
pub fn svd_thin(m: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    let (rows, cols) = m.shape();
    let p = rows.min(cols);
    if p == 0 {
        return Ok((
            DenseMatrix::zeros(rows, 0),
            Vec::new(),
            DenseMatrix::zeros(cols, 0),
        ));
    }
    let svd = nalgebra::SVD::new(m.clone(), true, true);
    let u_raw = svd.u.expect("left singular vectors requested");
    let vt_raw = svd.v_t.expect("right singular vectors requested");
    let order = descending_order(svd.singular_values.as_slice());
    let s: Vec<f64> = order
        .iter()
        .map(|&i| svd.singular_values[i].max(0.0))
        .collect();
    let mut u = DenseMatrix::zeros(rows, p);
    let mut v = DenseMatrix::zeros(cols, p);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &u_raw.column(src));
        v.set_column(dst, &vt_raw.row(src).transpose());
    }
    fix_column_signs(&mut u, Some(&mut v));
    Ok((u, s, v))
}

/// Singular values only, descending.
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    if m.nrows().min(m.ncols()) == 0 {
        return Vec::new();
    }
    let s = nalgebra::SVD::new(m.clone(), false, false).singular_values;
    let mut out: Vec<f64> = s.iter().map(|x| x.max(0.0)).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DenseMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Cholesky factorization `w = L L^T` that stops at the first pivot below
/// `tol * trace(w)`.
///
/// Pivots are taken in natural order (no reordering). A pivot more negative
/// than `-tol * trace(w)` is reported as [`Error::NotPsd`].
pub fn chol_trunc(w: &DenseMatrix, tol: f64) -> Result<TriangularFactor> {
    if !w.is_square() {
        return Err(Error::Dimension(format!(
            "chol_trunc needs a square matrix, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::Domain(format!(
            "truncation tolerance must be >= 0, got {tol}"
        )));
    }
    let k = w.nrows();
    let w = symmetrize(w);
    let threshold = tol * w.trace().max(0.0);
    let mut l = DenseMatrix::zeros(k, k);
    let mut rank = 0;
    for j in 0..k {
        let mut pivot = w[(j, j)];
        for p in 0..j {
            pivot -= l[(j, p)] * l[(j, p)];
        }
        if pivot < -threshold {
            return Err(Error::NotPsd {
                index: j,
                pivot,
                threshold,
            });
        }
        if pivot <= threshold {
            break;
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..k {
            let mut acc = w[(i, j)];
            for p in 0..j {
                acc -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = acc / d;
        }
        rank += 1;
    }
    Ok(TriangularFactor {
        matrix: l.view((0, 0), (rank, rank)).into_owned(),
        triangle: Triangle::Lower,
        rank,
        order: k,
    })
}

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    (m + m.transpose()) * 0.5
}

/// Frobenius norm of `q^T q - I`.
pub fn orthonormality_defect(q: &DenseMatrix) -> f64 {
    let g = q.tr_mul(q);
    let k = g.nrows();
    (g - DenseMatrix::identity(k, k)).norm()
}

/// Square diagonal matrix from a slice.
pub fn diag(values: &[f64]) -> DenseMatrix {
    DenseMatrix::from_diagonal(&DVector::from_column_slice(values))
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps ties in the backend's order, which is deterministic
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// Flip each column of `primary` (and the matching column of `partner`) so
/// its largest-magnitude entry is positive. Ties go to the lowest row index.
fn fix_column_signs(primary: &mut DenseMatrix, mut partner: Option<&mut DenseMatrix>) {
    for j in 0..primary.ncols() {
        let col = primary.column(j);
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            primary.column_mut(j).neg_mut();
            if let Some(p) = partner.as_deref_mut() {
                p.column_mut(j).neg_mut();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn sym_eig_diagonal_input() {
        let (vals, vecs) = sym_eig(&diag(&[1.0, 4.0, 0.25])).unwrap();
        assert_eq!(vals, vec![4.0, 1.0, 0.25]);
        let expected = dmatrix![0.0, 1.0, 0.0; 1.0, 0.0, 0.0; 0.0, 0.0, 1.0];
        assert_abs_diff_eq!(vecs, expected, epsilon = 1e-15);
    }

    #[test]
    fn sym_eig_identity() {
        let (vals, _) = sym_eig(&DenseMatrix::identity(3, 3)).unwrap();
        assert_eq!(vals, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn sym_eig_two_by_two() {
        let (vals, vecs) = sym_eig(&dmatrix![2.0, 1.0; 1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(vals[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // (1,-1)/sqrt2 has two entries of equal magnitude; the first wins the tie
        assert_abs_diff_eq!(vecs, dmatrix![h, h; h, -h], epsilon = 1e-14);
    }

    #[test]
    fn sym_eig_rejects_rectangular() {
        assert!(matches!(
            sym_eig(&DenseMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn qr_examples() {
        let (q, r) = thin_qr(&dmatrix![1.0; 0.0; 0.0]).unwrap();
        assert_abs_diff_eq!(q, dmatrix![1.0; 0.0; 0.0], epsilon = 1e-15);
        assert_abs_diff_eq!(r, dmatrix![1.0], epsilon = 1e-15);

        let (q, r) = thin_qr(&dmatrix![3.0; 4.0]).unwrap();
        assert_abs_diff_eq!(q, dmatrix![0.6; 0.8], epsilon = 1e-15);
        assert_abs_diff_eq!(r, dmatrix![5.0], epsilon = 1e-14);
    }

    #[test]
    fn qr_random_reconstructs() {
        let m = gaussian(6, 3, 7);
        let (q, r) = thin_qr(&m).unwrap();
        assert_eq!(q.shape(), (6, 3));
        assert_eq!(r.shape(), (3, 3));
        assert!((&q * &r - &m).norm() <= 1e-12 * spectral_norm(&m));
        assert!(orthonormality_defect(&q) <= 1e-12);
        for i in 0..3 {
            assert!(r[(i, i)] >= 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn qr_rejects_wide() {
        assert!(matches!(
            thin_qr(&DenseMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn svd_examples() {
        let (_, s, _) = svd_thin(&diag(&[4.0, 1.0])).unwrap();
        assert_eq!(s, vec![4.0, 1.0]);

        let (u, s, v) = svd_thin(&dmatrix![3.2; 0.6]).unwrap();
        assert_abs_diff_eq!(s[0], 10.6f64.sqrt(), epsilon = 1e-14);
        assert!(u[(0, 0)] > 0.0);
        assert_abs_diff_eq!(v[(0, 0)].abs(), 1.0, epsilon = 1e-15);

        let (_, s, _) = svd_thin(&DenseMatrix::zeros(3, 2)).unwrap();
        assert_eq!(s, vec![0.0, 0.0]);
    }

    #[test]
    fn svd_wide_matrix_reconstructs() {
        let m = gaussian(3, 7, 11);
        let (u, s, v) = svd_thin(&m).unwrap();
        assert_eq!(u.shape(), (3, 3));
        assert_eq!(v.shape(), (7, 3));
        let rebuilt = &u * diag(&s) * v.transpose();
        assert!((rebuilt - &m).norm() <= 1e-12 * s[0]);
    }

    #[test]
    fn chol_examples() {
        let f = chol_trunc(&DenseMatrix::identity(3, 3), 0.0).unwrap();
        assert_eq!(f.rank, 3);
        assert_eq!(f.matrix, DenseMatrix::identity(3, 3));

        let f = chol_trunc(&diag(&[1.0, 1e-30]), 1e-16).unwrap();
        assert_eq!(f.rank, 1);
        assert_eq!(f.matrix, dmatrix![1.0]);
        assert!(!f.is_full_rank());

        let f = chol_trunc(&dmatrix![4.0, 2.0; 2.0, 2.0], f64::EPSILON).unwrap();
        assert_eq!(f.rank, 2);
        assert_abs_diff_eq!(f.matrix, dmatrix![2.0, 0.0; 1.0, 1.0], epsilon = 1e-15);
        assert_eq!(f.triangle, Triangle::Lower);
    }

    #[test]
    fn chol_flags_indefinite() {
        let err = chol_trunc(&dmatrix![1.0, 2.0; 2.0, 1.0], 1e-12).unwrap_err();
        assert!(matches!(err, Error::NotPsd { index: 1, .. }));
    }

    #[test]
    fn chol_tiny_negative_pivot_truncates() {
        // second pivot is -1e-20, inside the tolerance band
        let w = dmatrix![1.0, 0.0; 0.0, -1e-20];
        let f = chol_trunc(&w, 1e-16).unwrap();
        assert_eq!(f.rank, 1);
    }

    #[test]
    fn chol_zero_matrix_has_rank_zero() {
        let f = chol_trunc(&DenseMatrix::zeros(3, 3), f64::EPSILON).unwrap();
        assert_eq!(f.rank, 0);
        assert_eq!(f.matrix.shape(), (0, 0));
    }

    #[test]
    fn factorizations_are_deterministic() {
        let m = gaussian(9, 5, 3);
        let a = svd_thin(&m).unwrap();
        let b = svd_thin(&m).unwrap();
        assert_eq!(a, b);
        let s = &m * m.transpose();
        assert_eq!(sym_eig(&s).unwrap(), sym_eig(&s).unwrap());
        assert_eq!(thin_qr(&m).unwrap(), thin_qr(&m).unwrap());
    }
}

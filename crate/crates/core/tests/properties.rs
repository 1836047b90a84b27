use approx::assert_relative_eq;
use proptest::prelude::*;

use psd_extract::extract::{self, DEFAULT_CHOL_TOL};
use psd_extract::model::{operator_power, spectrum};
use psd_extract::{
    dense, make_psd, random, subspaces, DenseMatrix, Method, OrthonormalBasis, SpectrumKind,
    SpectrumSpec,
};

fn kind_strategy() -> impl Strategy<Value = SpectrumKind> {
    prop_oneof![
        Just(SpectrumKind::Exponential),
        Just(SpectrumKind::Algebraic),
        Just(SpectrumKind::Linear),
    ]
}

fn random_basis(n: usize, k: usize, seed: u64) -> OrthonormalBasis {
    let (q, _) = dense::thin_qr(&random::gaussian_matrix(n, k, seed)).unwrap();
    OrthonormalBasis::external(q).unwrap()
}

fn values(a: &psd_extract::PsdOperator, q: &OrthonormalBasis, m: Method) -> Vec<f64> {
    extract::extract(a, q, m, DEFAULT_CHOL_TOL).unwrap().values
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 100,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn cholesky_factor_reconstructs_full_rank_matrix(n in 1usize..50, seed in any::<u64>()) {
        let g = random::gaussian_matrix(n, n, seed);
        let w = &g * g.transpose() + DenseMatrix::identity(n, n);
        let f = dense::chol_trunc(&w, DEFAULT_CHOL_TOL).unwrap();
        prop_assert!(f.is_full_rank());
        let back = &f.matrix * f.matrix.transpose();
        prop_assert!((back - &w).norm() <= 1e-12 * w.norm());
        for i in 0..n {
            prop_assert!(f.matrix[(i, i)] > 0.0);
            for j in (i + 1)..n {
                prop_assert_eq!(f.matrix[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn cholesky_stops_at_rank(n in 2usize..40, r in 1usize..20, seed in any::<u64>()) {
        let r = r.min(n - 1);
        let mut b = DenseMatrix::zeros(n, r);
        b.view_mut((0, 0), (r, r)).fill_with_identity();
        b.view_mut((r, 0), (n - r, r)).copy_from(&random::gaussian_matrix(n - r, r, seed));
        let w = &b * b.transpose();
        let f = dense::chol_trunc(&w, 1e-10).unwrap();
        prop_assert_eq!(f.rank, r);
        let back = &f.matrix * f.matrix.transpose();
        let block = w.view((0, 0), (r, r));
        prop_assert!((back - block).norm() <= 1e-12 * w.norm());
    }

    #[test]
    fn spectra_are_descending_with_given_ends(
        kind in kind_strategy(),
        n in 2usize..300,
        exp in 1i32..20,
    ) {
        let lo = 10f64.powi(-exp);
        let v = spectrum(&SpectrumSpec::new(n, kind, 1.0, lo)).unwrap();
        prop_assert_eq!(v.len(), n);
        prop_assert_eq!(v[0], 1.0);
        prop_assert!((v[n - 1] - lo).abs() <= 1e-12 * lo.max(1e-300) + 1e-300);
        prop_assert!(v.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn generated_operator_is_symmetric_psd_with_its_spectrum(
        kind in kind_strategy(),
        n in 2usize..40,
        seed in any::<u64>(),
    ) {
        let a = make_psd(&SpectrumSpec::new(n, kind, 1.0, 1e-6), seed).unwrap();
        let m = a.dense().unwrap();
        prop_assert!((&m - m.transpose()).norm() <= 1e-14);
        let (ev, _) = dense::sym_eig(&m).unwrap();
        for (x, y) in ev.iter().zip(a.eigenvalues()) {
            prop_assert!((x - y).abs() <= 1e-13);
        }
    }

    #[test]
    fn square_root_squared_recovers_operator(n in 2usize..30, seed in any::<u64>()) {
        let a = make_psd(&SpectrumSpec::exponential(n, 1.0, 1e-10), seed).unwrap();
        let root = operator_power(&a, 0.5).unwrap().dense().unwrap();
        let root2 = operator_power(&operator_power(&a, 0.25).unwrap(), 2.0).unwrap().dense().unwrap();
        prop_assert!((&root * &root - a.dense().unwrap()).norm() <= 1e-13);
        prop_assert!((root - root2).norm() <= 1e-13);
    }

    #[test]
    fn chain_and_floor_hold_for_random_bases(
        kind in kind_strategy(),
        n in 6usize..60,
        kf in 0.1f64..0.8,
        seed in any::<u64>(),
    ) {
        let k = ((n as f64 * kf) as usize).clamp(1, n - 1);
        let a = make_psd(&SpectrumSpec::new(n, kind, 1.0, 1e-12), seed).unwrap();
        let q = random_basis(n, k, random::derive_seed(seed, 1));
        let rr = values(&a, &q, Method::Rr);
        let sv = values(&a, &q, Method::SvdQv);
        let ny = values(&a, &q, Method::Nys);
        let lam = a.eigenvalues();
        for i in 0..k {
            prop_assert!(lam[i] + 1e-10 >= ny[i]);
            prop_assert!(ny[i] + 1e-10 >= sv[i]);
            prop_assert!(sv[i] + 1e-10 >= rr[i]);
            prop_assert!(rr[i] + 1e-10 >= lam[n - k + i]);
        }
    }

    #[test]
    fn rotating_the_basis_keeps_values(n in 6usize..50, seed in any::<u64>()) {
        let k = n / 3;
        let a = make_psd(&SpectrumSpec::algebraic(n, 1.0, 1e-8), seed).unwrap();
        let q = random_basis(n, k, random::derive_seed(seed, 1));
        let (rot, _) = dense::thin_qr(&random::gaussian_matrix(k, k, random::derive_seed(seed, 2))).unwrap();
        let qr = q.rotated(&rot).unwrap();
        for m in [Method::Rr, Method::SvdQv, Method::SvdU, Method::Nys] {
            for (x, y) in values(&a, &q, m).iter().zip(values(&a, &qr, m)) {
                prop_assert!((x - y).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn single_vector_worked_example() {
    let a =
        psd_extract::PsdOperator::from_parts(DenseMatrix::identity(2, 2), vec![4.0, 1.0], 0, None)
            .unwrap();
    let q = OrthonormalBasis::external(DenseMatrix::from_column_slice(2, 1, &[0.8, 0.6])).unwrap();
    assert_relative_eq!(values(&a, &q, Method::Rr)[0], 2.92, epsilon = 1e-14);
    assert_relative_eq!(
        values(&a, &q, Method::SvdQv)[0],
        10.6f64.sqrt(),
        epsilon = 1e-14
    );
    assert_relative_eq!(
        values(&a, &q, Method::Nys)[0],
        265.0 / 73.0,
        epsilon = 1e-14
    );
}

#[test]
fn power_estimate_brackets_lambda_max() {
    for seed in 0..50 {
        let a = make_psd(&SpectrumSpec::exponential(100, 1.0, 1e-20), seed).unwrap();
        let est = extract::estimate_lambda_max_upper(&a, 20, random::derive_seed(seed, 5)).unwrap();
        let l1 = a.lambda_max();
        assert!(
            est.gamma >= l1 && est.gamma <= 1.1 * l1,
            "seed {seed}: gamma {}",
            est.gamma
        );
    }
}

#[test]
fn invariant_subspace_gives_exact_values() {
    let a = make_psd(&SpectrumSpec::exponential(40, 1.0, 1e-10), 8).unwrap();
    let q = subspaces::canonical_basis(&a, 6, psd_extract::Side::Leading).unwrap();
    for m in [Method::Rr, Method::SvdQv, Method::Nys] {
        for (x, y) in values(&a, &q, m).iter().zip(a.eigenvalues()) {
            assert!((x - y).abs() <= 1e-13, "{m:?}");
        }
    }
}

#[test]
fn principal_angle_of_rotated_vector() {
    let theta: f64 = 0.3;
    let x = DenseMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
    let y = DenseMatrix::from_column_slice(3, 1, &[theta.cos(), theta.sin(), 0.0]);
    let s = subspaces::principal_angles(&x, &y).unwrap();
    assert_relative_eq!(s[0], theta.sin(), epsilon = 1e-15);
}

#[test]
fn epsilon_aligned_basis_has_requested_angle() {
    let a = make_psd(&SpectrumSpec::linear(80, 1.0, 1e-3), 2).unwrap();
    for eps in [0.5, 0.1, 1e-3, 1e-6] {
        let q = subspaces::epsilon_aligned_basis(&a, 10, eps, 4).unwrap();
        let s = subspaces::principal_angles(q.matrix(), &a.leading_vectors(10)).unwrap();
        assert_relative_eq!(s[0], eps, epsilon = 1e-12);
        assert!(dense::orthonormality_defect(q.matrix()) <= 1e-12);
    }
}

mod common;

use common::{expm_neg, random_design, solve};
use kgd_core::kernels::gram_matrix;
use kgd_core::spectral::{apply_phi_t, eig_sym_psd, matrix_exp_neg, phi, ridge_resolvent_apply};
use kgd_core::{KernelFamily, KernelSpec, SeededStream};
use nalgebra::{DMatrix, DVector};

fn kernel_for(seed: u64, family: KernelFamily, sigma: f64, n: usize) -> DMatrix<f64> {
    let data = random_design(seed, n, 2, 1);
    gram_matrix(&data.x, &KernelSpec::new(family, sigma).unwrap()).unwrap()
}

fn as_rows(k: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..k.nrows()).map(|i| k.row(i).iter().copied().collect()).collect()
}

#[test]
fn exponential_matches_taylor_oracle() {
    for (i, family) in KernelFamily::ALL.into_iter().enumerate() {
        for &t in &[0.1, 1.0, 5.0] {
            let k = kernel_for(i as u64, family, 0.6, 12);
            let got = matrix_exp_neg(&eig_sym_psd(&k).unwrap(), t).unwrap();
            let want = expm_neg(&as_rows(&k), t);
            for r in 0..12 {
                for c in 0..12 {
                    assert!((got[(r, c)] - want[r][c]).abs() < 1e-10, "{family} t={t}");
                }
            }
        }
    }
}

#[test]
fn phi_times_kernel_is_one_minus_exponential() {
    for (i, family) in KernelFamily::ALL.into_iter().enumerate() {
        let n = 15;
        let k = kernel_for(10 + i as u64, family, 2.0, n);
        let d = eig_sym_psd(&k).unwrap();
        for &t in &[0.01, 1.0, 30.0] {
            let lhs = apply_phi_t(&d, t).unwrap() * &k;
            let rhs = DMatrix::identity(n, n) - matrix_exp_neg(&d, t).unwrap();
            assert!((lhs - rhs).amax() <= 1e-8 * n as f64, "{family} t={t}");
        }
    }
}

#[test]
fn phi_eigenvalues_respect_min_bound() {
    let k = kernel_for(3, KernelFamily::Cauchy, 0.4, 20);
    let d = eig_sym_psd(&k).unwrap();
    for &t in &[0.5, 4.0, 100.0] {
        let m = apply_phi_t(&d, t).unwrap();
        let top = nalgebra::SymmetricEigen::new(m).eigenvalues.max();
        let cap = if d.s_min() > 0.0 { t.min(1.0 / d.s_min()) } else { t };
        assert!(top <= cap * (1.0 + 1e-10), "t={t}: {top} > {cap}");
        for &s in d.eigenvalues().iter() {
            let c = if s > 0.0 { t.min(1.0 / s) } else { t };
            assert!(phi(s, t) <= c * (1.0 + 1e-15));
        }
    }
    let mut s = SeededStream::new(5);
    for _ in 0..100_000 {
        let (a, t) = (100.0 * (1.0 - s.uniform()), 100.0 * (1.0 - s.uniform()));
        assert!(phi(a, t) <= t.min(1.0 / a) * (1.0 + 1e-15));
    }
}

#[test]
fn resolvent_matches_dense_solve_and_norm() {
    let n = 10;
    let k = kernel_for(7, KernelFamily::Matern52, 0.5, n);
    let d = eig_sym_psd(&k).unwrap();
    let lambda = 0.3;
    let v = DVector::from_fn(n, |i, _| (i as f64 * 0.7).cos());
    let got = ridge_resolvent_apply(&d, lambda, &v).unwrap();
    let mut a = as_rows(&k);
    for (i, r) in a.iter_mut().enumerate() {
        r[i] += lambda;
    }
    let want = solve(&a, v.as_slice());
    for i in 0..n {
        assert!((got[i] - want[i]).abs() < 1e-10);
    }
    // operator norm from columns of the resolvent
    let inv = DMatrix::from_fn(n, n, |r, c| {
        let e = DVector::from_fn(n, |i, _| if i == c { 1.0 } else { 0.0 });
        ridge_resolvent_apply(&d, lambda, &e).unwrap()[r]
    });
    let norm = nalgebra::SymmetricEigen::new(inv).eigenvalues.max();
    assert!((norm - 1.0 / (d.s_min() + lambda)).abs() < 1e-10);
}

#[test]
fn singular_kernel_uses_phi_limit() {
    // two coincident rows make K singular; φ_t(0) = t keeps the flow finite
    let k = DMatrix::from_element(2, 2, 1.0f64);
    let d = eig_sym_psd(&k).unwrap();
    assert!(d.s_min().abs() < 1e-15);
    let m = apply_phi_t(&d, 3.0).unwrap();
    let want = 3.0 / 2.0 + (1.0 - (-6.0f64).exp()) / 4.0;
    assert!((m[(0, 0)] - want).abs() < 1e-12);
}

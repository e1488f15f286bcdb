//! Symmetric eigendecomposition and the matrix functions built on it.
//!
//! One factorization `K = QΛQᵀ` yields `exp(−tK)`, the ridge resolvent
//! `(K + λI)⁻¹` and `(I − exp(−tK))K⁻¹`, the last one well defined for
//! singular `K` through the scalar limit `φ_t(0) = t`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, KgdError, Result};
use crate::scalar::Real;

/// Relative tolerance (to `s_max`) below which negative eigenvalues are rounding noise.
pub const PSD_TOLERANCE: f64 = 1e-8;
const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// `K = Q·diag(s)·Qᵀ` with eigenvalues ascending and clamped to be non-negative.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition<T: Real> {
    eigenvalues: DVector<T>,
    eigenvectors: DMatrix<T>,
}

impl<T: Real> SpectralDecomposition<T> {
    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<T> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn s_min(&self) -> T {
        self.eigenvalues[0]
    }

    pub fn s_max(&self) -> T {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `Qᵀv`.
    pub fn to_eigenbasis(&self, v: &DVector<T>) -> DVector<T> {
        self.eigenvectors.tr_mul(v)
    }

    /// `Qc`.
    pub fn from_eigenbasis(&self, c: &DVector<T>) -> DVector<T> {
        &self.eigenvectors * c
    }

    /// `Q·diag(f(s))·Qᵀ`.
    pub fn map_matrix(&self, f: impl Fn(T) -> T) -> DMatrix<T> {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, &s) in self.eigenvalues.iter().enumerate() {
            let w = f(s);
            scaled.column_mut(j).scale_mut(w);
        }
        scaled * q.transpose()
    }

    /// `Q·diag(f(s))·Qᵀ·v` without forming the matrix.
    pub fn map_vector(&self, f: impl Fn(T) -> T, v: &DVector<T>) -> DVector<T> {
        let mut c = self.to_eigenbasis(v);
        for (ci, &s) in c.iter_mut().zip(self.eigenvalues.iter()) {
            *ci *= f(s);
        }
        self.from_eigenbasis(&c)
    }

    /// `QΛQᵀ`.
    pub fn reconstruct(&self) -> DMatrix<T> {
        self.map_matrix(|s| s)
    }
}

/// Eigendecomposition of a symmetric positive semi-definite matrix.
pub fn eig_sym_psd<T: Real>(k: &DMatrix<T>) -> Result<SpectralDecomposition<T>> {
    if !k.is_square() || k.nrows() == 0 {
        return invalid("expected a non-empty square matrix");
    }
    if k.iter().any(|v| !v.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    let scale = k.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = T::of(SYMMETRY_TOLERANCE) * scale.max(T::one());
    let n = k.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (k[(i, j)] - k[(j, i)]).abs() > tol {
                return invalid(format!("matrix is not symmetric at ({i}, {j})"));
            }
        }
    }

    let eig = SymmetricEigen::new(k.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite eigenvalues"));
    let mut values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

    let s_max = values[n - 1].max(T::zero());
    let rel = T::of(PSD_TOLERANCE).max(T::of(10.0) * T::of_usize(n) * T::eps());
    let threshold = -rel * s_max;
    if values[0] < threshold {
        return Err(KgdError::NotPsd { min_eigenvalue: values[0].as_f64(), tolerance: threshold.as_f64() });
    }
    for v in values.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    Ok(SpectralDecomposition { eigenvalues: values, eigenvectors: vectors })
}

/// `φ_t(s) = (1 − e^{−ts})/s`, with `φ_t(0) = t`.
#[inline]
pub fn phi<T: Real>(s: T, t: T) -> T {
    let x = t * s;
    if x < T::of(1e-12) {
        t
    } else {
        -(-x).exp_m1() / s
    }
}

fn check_positive<T: Real>(v: T, name: &str) -> Result<()> {
    if !(v.is_finite() && v > T::zero()) {
        return invalid(format!("{name} must be positive and finite, got {v}"));
    }
    Ok(())
}

/// `(I − exp(−tK))K⁻¹`, defined through `φ_t` so singular `K` is allowed.
pub fn apply_phi_t<T: Real>(decomp: &SpectralDecomposition<T>, t: T) -> Result<DMatrix<T>> {
    check_positive(t, "t")?;
    Ok(decomp.map_matrix(|s| phi(s, t)))
}

/// `(I − exp(−tK))K⁻¹ v`.
pub fn apply_phi_t_vec<T: Real>(decomp: &SpectralDecomposition<T>, t: T, v: &DVector<T>) -> Result<DVector<T>> {
    check_positive(t, "t")?;
    Ok(decomp.map_vector(|s| phi(s, t), v))
}

/// `(K + λI)⁻¹ v`.
pub fn ridge_resolvent_apply<T: Real>(
    decomp: &SpectralDecomposition<T>,
    lambda: T,
    v: &DVector<T>,
) -> Result<DVector<T>> {
    check_positive(lambda, "lambda")?;
    if v.len() != decomp.dim() {
        return invalid("vector length does not match the decomposition");
    }
    Ok(decomp.map_vector(|s| T::one() / (s + lambda), v))
}

/// `exp(−tK)`.
pub fn matrix_exp_neg<T: Real>(decomp: &SpectralDecomposition<T>, t: T) -> Result<DMatrix<T>> {
    check_positive(t, "t")?;
    Ok(decomp.map_matrix(|s| (-t * s).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n + 2, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose()
    }

    #[test]
    fn eigen_examples() {
        let d = eig_sym_psd(&DMatrix::<f64>::identity(2, 2)).unwrap();
        assert_eq!(d.eigenvalues().as_slice(), &[1.0, 1.0]);

        let d = eig_sym_psd(&DMatrix::from_element(2, 2, 1.0f64)).unwrap();
        assert!(d.eigenvalues()[0].abs() < 1e-15);
        assert_relative_eq!(d.eigenvalues()[1], 2.0, max_relative = 1e-14);

        let d = eig_sym_psd(&diag(&[5.0, 3.0])).unwrap();
        assert_eq!(d.eigenvalues().as_slice(), &[3.0, 5.0]);
        let q = d.eigenvectors();
        assert!((q[(1, 0)].abs() - 1.0).abs() < 1e-15 && q[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn eigen_errors() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(eig_sym_psd(&asym), Err(KgdError::InvalidArgument(_))));
        let indefinite = diag(&[1.0, -0.5]);
        assert!(matches!(eig_sym_psd(&indefinite), Err(KgdError::NotPsd { .. })));
        let tiny_negative = diag(&[1.0, -1e-12]);
        let d = eig_sym_psd(&tiny_negative).unwrap();
        assert_eq!(d.eigenvalues()[0], 0.0);
    }

    #[test]
    fn reconstruction_and_orthogonality() {
        for (seed, n) in [(1u64, 5usize), (2, 30), (3, 80)] {
            let k = random_psd(n, seed);
            let d = eig_sym_psd(&k).unwrap();
            let err = (d.reconstruct() - &k).norm();
            assert!(err <= 1e-8 * k.norm().max(1.0));
            let q = d.eigenvectors();
            let ortho = (q.transpose() * q - DMatrix::identity(n, n)).norm();
            assert!(ortho <= 1e-10 * n as f64);
            assert!(d.eigenvalues().iter().zip(d.eigenvalues().iter().skip(1)).all(|(a, b)| a <= b));
        }
    }

    #[test]
    fn phi_examples() {
        let d = eig_sym_psd(&diag(&[0.0, 2.0])).unwrap();
        let m = apply_phi_t(&d, 1.0).unwrap();
        assert_relative_eq!(m[(0, 0)], 1.0, max_relative = 1e-15);
        assert_relative_eq!(m[(1, 1)], (1.0 - (-2.0f64).exp()) / 2.0, max_relative = 1e-14);
        assert_relative_eq!(m[(1, 1)], 0.432_332_358_381_693_6, max_relative = 1e-12);
        assert_eq!(m[(0, 1)], 0.0);

        let d = eig_sym_psd(&DMatrix::<f64>::identity(3, 3)).unwrap();
        for t in [0.1, 1.0, 7.5] {
            let m = apply_phi_t(&d, t).unwrap();
            assert_relative_eq!(m, DMatrix::identity(3, 3) * (1.0 - (-t).exp()), max_relative = 1e-13);
        }

        let k = random_psd(6, 9);
        let d = eig_sym_psd(&k).unwrap();
        let t = 1e-8;
        let m = apply_phi_t(&d, t).unwrap();
        assert!((m - DMatrix::identity(6, 6) * t).amax() <= 1e-12);

        assert!(apply_phi_t(&d, 0.0).is_err());
        assert!(apply_phi_t(&d, -1.0).is_err());
    }

    #[test]
    fn resolvent_examples() {
        let d = eig_sym_psd(&DMatrix::<f64>::identity(3, 3)).unwrap();
        let y = DVector::from_row_slice(&[1.0, -2.0, 4.0]);
        assert_relative_eq!(ridge_resolvent_apply(&d, 1.0, &y).unwrap(), &y / 2.0, max_relative = 1e-15);

        let d = eig_sym_psd(&diag(&[0.0, 2.0])).unwrap();
        let r = ridge_resolvent_apply(&d, 1.0, &DVector::from_row_slice(&[1.0, 1.0])).unwrap();
        assert_relative_eq!(r[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(r[1], 1.0 / 3.0, max_relative = 1e-15);

        let k = random_psd(5, 4);
        let d = eig_sym_psd(&k).unwrap();
        let v = DVector::from_row_slice(&[1.0, 2.0, -1.0, 0.5, 3.0]);
        let lam = 1e8;
        let r = ridge_resolvent_apply(&d, lam, &v).unwrap();
        assert_relative_eq!(r, &v / lam, max_relative = 1e-6);
        assert!(ridge_resolvent_apply(&d, 0.0, &v).is_err());
    }

    #[test]
    fn resolvent_operator_norm() {
        let k = random_psd(8, 12);
        let d = eig_sym_psd(&k).unwrap();
        let lam = 0.3;
        let m = d.map_matrix(|s| 1.0 / (s + lam));
        let norm = m.singular_values().max();
        assert_relative_eq!(norm, 1.0 / (d.s_min() + lam), max_relative = 1e-10);
    }

    #[test]
    fn exp_examples() {
        let d = eig_sym_psd(&DMatrix::<f64>::zeros(3, 3)).unwrap();
        assert_eq!(matrix_exp_neg(&d, 2.0).unwrap(), DMatrix::identity(3, 3));
        let d = eig_sym_psd(&diag(&[1.0])).unwrap();
        assert_relative_eq!(matrix_exp_neg(&d, 2f64.ln()).unwrap()[(0, 0)], 0.5, max_relative = 1e-15);
        let d = eig_sym_psd(&random_psd(7, 3)).unwrap();
        for t in [0.01, 1.0, 10.0] {
            let e = matrix_exp_neg(&d, t).unwrap();
            assert!(e.singular_values().max() <= 1.0 + 1e-12);
        }
        assert!(matrix_exp_neg(&d, 0.0).is_err());
    }

    #[test]
    fn phi_times_k_is_one_minus_exp() {
        for (seed, n) in [(5u64, 4usize), (6, 20), (7, 50)] {
            let k = random_psd(n, seed) / n as f64;
            let d = eig_sym_psd(&k).unwrap();
            for t in [0.1, 2.0, 30.0] {
                let lhs = apply_phi_t(&d, t).unwrap() * &k;
                let rhs = DMatrix::identity(n, n) - matrix_exp_neg(&d, t).unwrap();
                assert!((lhs - rhs).amax() <= 1e-8 * n as f64);
            }
        }
    }

    #[test]
    fn phi_bound_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100_000 {
            let s: f64 = rng.gen_range(1e-9..100.0);
            let t: f64 = rng.gen_range(1e-9..100.0);
            assert!(phi(s, t) <= t.min(1.0 / s) * (1.0 + 1e-15));
        }
    }

    proptest! {
        #[test]
        fn phi_eigenvalues_bounded(seed in 0u64..1000, t in 0.01f64..50.0) {
            let d = eig_sym_psd(&random_psd(6, seed)).unwrap();
            for &s in d.eigenvalues().iter() {
                let v = phi(s, t);
                let cap = if s > 0.0 { t.min(1.0 / s) } else { t };
                prop_assert!(v <= cap * (1.0 + 1e-15));
            }
        }
    }
}

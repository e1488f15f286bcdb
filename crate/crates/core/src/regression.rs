//! Closed-form kernel ridge regression and kernel gradient flow.
//!
//! Both estimators fit the prior-shifted response `y_μ = y − μ(X)` and add
//! the prior back on return:
//!
//! * KRR: `f̂_μ = K(K+λI)⁻¹y_μ`, `f̂*_μ = K*(K+λI)⁻¹y_μ`
//! * KGF: `f̂_μ = (I − e^{−tK})y_μ`, `f̂*_μ = K*·φ_t(K)·y_μ`
//!
//! One eigendecomposition of `K` serves every `λ` and `t`; see [`KernelSystem`].

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::kernels::{gram_matrix, kernel_matrix, KernelSpec};
use crate::scalar::Real;
use crate::spectral::{eig_sym_psd, phi, SpectralDecomposition};

type PriorFn<T> = dyn Fn(&[T]) -> T + Send + Sync;

/// Prior mean function `μ(x)`; the zero function unless stated otherwise.
#[derive(Clone)]
pub struct Prior<T: Real> {
    mu: Option<Arc<PriorFn<T>>>,
}

impl<T: Real> Default for Prior<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> fmt::Debug for Prior<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mu {
            None => f.write_str("Prior(zero)"),
            Some(_) => f.write_str("Prior(fn)"),
        }
    }
}

impl<T: Real> Prior<T> {
    pub fn zero() -> Self {
        Self { mu: None }
    }

    pub fn constant(c: T) -> Self {
        Self::from_fn(move |_| c)
    }

    pub fn from_fn(f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self { mu: Some(Arc::new(f)) }
    }

    pub fn is_zero(&self) -> bool {
        self.mu.is_none()
    }

    pub fn eval(&self, row: &[T]) -> T {
        match &self.mu {
            None => T::zero(),
            Some(f) => f(row),
        }
    }

    /// `μ` evaluated on every row of `x`.
    pub fn eval_rows(&self, x: &DMatrix<T>) -> Result<DVector<T>> {
        let mut out = DVector::zeros(x.nrows());
        if let Some(f) = &self.mu {
            let mut buf = vec![T::zero(); x.ncols()];
            for i in 0..x.nrows() {
                for (c, b) in buf.iter_mut().enumerate() {
                    *b = x[(i, c)];
                }
                out[i] = f(&buf);
            }
            if out.iter().any(|v| !v.is_finite()) {
                return invalid("prior is not finite on every row");
            }
        }
        Ok(out)
    }
}

/// Which closed form (or iteration) produced a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator<T: Real> {
    Krr {
        lambda: T,
    },
    Kgf {
        t: T,
    },
    /// Kernel gradient descent stopped at time `t` with final bandwidth `sigma`.
    Kgd {
        t: T,
        sigma: T,
    },
}

/// Prior-restored predictions on the training rows and on `X*`.
#[derive(Debug, Clone)]
pub struct FitResult<T: Real> {
    pub f_train: DVector<T>,
    pub f_test: DVector<T>,
    pub estimator: Estimator<T>,
    pub spec: KernelSpec<T>,
}

/// Kernel matrices and the eigendecomposition of `K` for one `(X, X*, spec)`,
/// plus the prior evaluated on both sets of rows.
#[derive(Debug, Clone)]
pub struct KernelSystem<T: Real> {
    pub spec: KernelSpec<T>,
    pub k: DMatrix<T>,
    pub k_star: DMatrix<T>,
    pub decomp: SpectralDecomposition<T>,
    pub y_mu: DVector<T>,
    pub mu_train: DVector<T>,
    pub mu_test: DVector<T>,
}

impl<T: Real> KernelSystem<T> {
    pub fn new(data: &Dataset<T>, spec: &KernelSpec<T>, prior: &Prior<T>) -> Result<Self> {
        data.validate()?;
        let x_star = data.x_star();
        let k = gram_matrix(&data.x, spec)?;
        let k_star = kernel_matrix(&x_star, &data.x, spec)?;
        let decomp = eig_sym_psd(&k)?;
        let mu_train = prior.eval_rows(&data.x)?;
        let mu_test = prior.eval_rows(&x_star)?;
        Ok(Self { spec: spec.clone(), y_mu: &data.y - &mu_train, k, k_star, decomp, mu_train, mu_test })
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    fn finish(&self, f_train_mu: DVector<T>, coef: DVector<T>, estimator: Estimator<T>) -> FitResult<T> {
        let f_test_mu = &self.k_star * coef;
        FitResult {
            f_train: f_train_mu + &self.mu_train,
            f_test: f_test_mu + &self.mu_test,
            estimator,
            spec: self.spec.clone(),
        }
    }

    /// Ridge coefficients `(K+λI)⁻¹y_μ`.
    pub fn krr_coefficients(&self, lambda: T) -> Result<DVector<T>> {
        check_lambda(lambda)?;
        Ok(self.decomp.map_vector(|s| T::one() / (s + lambda), &self.y_mu))
    }

    pub fn krr(&self, lambda: T) -> Result<FitResult<T>> {
        let coef = self.krr_coefficients(lambda)?;
        let f_train = self.decomp.map_vector(|s| s / (s + lambda), &self.y_mu);
        Ok(self.finish(f_train, coef, Estimator::Krr { lambda }))
    }

    /// Flow coefficients `φ_t(K)·y_μ`.
    pub fn kgf_coefficients(&self, t: T) -> Result<DVector<T>> {
        check_time(t)?;
        Ok(self.decomp.map_vector(|s| phi(s, t), &self.y_mu))
    }

    pub fn kgf(&self, t: T) -> Result<FitResult<T>> {
        let coef = self.kgf_coefficients(t)?;
        let f_train = self.decomp.map_vector(|s| -(-(t * s)).exp_m1(), &self.y_mu);
        Ok(self.finish(f_train, coef, Estimator::Kgf { t }))
    }
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if !(lambda.is_finite() && lambda > T::zero()) {
        return invalid(format!("lambda must be positive and finite, got {lambda}"));
    }
    Ok(())
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if !(t.is_finite() && t > T::zero()) {
        return invalid(format!("t must be positive and finite, got {t}"));
    }
    Ok(())
}

pub fn krr_fit<T: Real>(data: &Dataset<T>, spec: &KernelSpec<T>, lambda: T, prior: &Prior<T>) -> Result<FitResult<T>> {
    check_lambda(lambda)?;
    KernelSystem::new(data, spec, prior)?.krr(lambda)
}

pub fn kgf_fit<T: Real>(data: &Dataset<T>, spec: &KernelSpec<T>, t: T, prior: &Prior<T>) -> Result<FitResult<T>> {
    check_time(t)?;
    KernelSystem::new(data, spec, prior)?.kgf(t)
}

/// Prediction at one point next to its norm bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointBound<T: Real> {
    /// Prior-restored prediction.
    pub prediction: T,
    /// Prediction in shifted coordinates, `f̂_μ(x*)`.
    pub prediction_mu: T,
    pub bound: T,
}

impl<T: Real> PointBound<T> {
    pub fn holds(&self, slack: T) -> bool {
        self.prediction_mu.abs() <= self.bound * slack
    }
}

fn single_point<T: Real>(data: &Dataset<T>, x_star: &[T]) -> Result<Dataset<T>> {
    if x_star.len() != data.p() {
        return invalid(format!("x* has {} coordinates, X has {} columns", x_star.len(), data.p()));
    }
    Ok(Dataset {
        x: data.x.clone(),
        y: data.y.clone(),
        x_test: Some(DMatrix::from_row_slice(1, x_star.len(), x_star)),
        y_test: None,
    })
}

/// KGF prediction at `x*` and `‖k*‖₂·min(t, 1/s_min)·‖y_μ‖₂`.
pub fn kgf_single_bound<T: Real>(
    data: &Dataset<T>,
    spec: &KernelSpec<T>,
    t: T,
    prior: &Prior<T>,
    x_star: &[T],
) -> Result<PointBound<T>> {
    check_time(t)?;
    let sys = KernelSystem::new(&single_point(data, x_star)?, spec, prior)?;
    let fit = sys.kgf(t)?;
    let s_min = sys.decomp.s_min();
    let time_factor = if s_min > T::zero() { t.min(T::one() / s_min) } else { t };
    Ok(PointBound {
        prediction: fit.f_test[0],
        prediction_mu: fit.f_test[0] - sys.mu_test[0],
        bound: sys.k_star.row(0).norm() * time_factor * sys.y_mu.norm(),
    })
}

/// KRR prediction at `x*` and `‖k*‖₂·‖y_μ‖₂/(s_min+λ)`.
pub fn krr_single_bound<T: Real>(
    data: &Dataset<T>,
    spec: &KernelSpec<T>,
    lambda: T,
    prior: &Prior<T>,
    x_star: &[T],
) -> Result<PointBound<T>> {
    check_lambda(lambda)?;
    let sys = KernelSystem::new(&single_point(data, x_star)?, spec, prior)?;
    let fit = sys.krr(lambda)?;
    Ok(PointBound {
        prediction: fit.f_test[0],
        prediction_mu: fit.f_test[0] - sys.mu_test[0],
        bound: sys.k_star.row(0).norm() * sys.y_mu.norm() / (sys.decomp.s_min() + lambda),
    })
}

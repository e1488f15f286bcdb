//! Translation-invariant kernels and kernel-matrix assembly.
//!
//! Every family is evaluated as a function of the (metric-weighted) distance
//! `d = ‖x − x′‖_Θ` and a bandwidth `σ > 0`:
//!
//! | id         | k(d, σ)                                              |
//! |------------|------------------------------------------------------|
//! | `laplace`  | `exp(−d/σ)`                                          |
//! | `matern32` | `(1 + √3·d/σ)·exp(−√3·d/σ)`                          |
//! | `matern52` | `(1 + √5·d/σ + 5d²/(3σ²))·exp(−√5·d/σ)`              |
//! | `gaussian` | `exp(−d²/(2σ))`                                      |
//! | `cauchy`   | `(1 + d²/σ²)⁻¹`                                      |
//!
//! The Gaussian entry takes `σ` (not `σ²`) in the denominator, so its
//! effective length scale is `√σ`; see [`KernelFamily::length_scale`].
//! The Matérn 5/2 quadratic term uses the textbook `5d²/(3σ²)`: the variant
//! `5d²/σ` exceeds `k(0) = 1` and increases near the origin for `σ > 1/2`,
//! so it is neither monotone nor positive semi-definite.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, KgdError, Result};
use crate::scalar::Real;

/// Distances below this value are treated as exactly zero.
pub const ZERO_DISTANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// Matérn ν = 1/2.
    Laplace,
    Matern32,
    Matern52,
    /// Matérn ν = ∞.
    Gaussian,
    Cauchy,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 5] = [
        KernelFamily::Laplace,
        KernelFamily::Matern32,
        KernelFamily::Matern52,
        KernelFamily::Gaussian,
        KernelFamily::Cauchy,
    ];

    pub fn id(self) -> &'static str {
        match self {
            KernelFamily::Laplace => "laplace",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Matern52 => "matern52",
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Cauchy => "cauchy",
        }
    }

    /// Length scale `ℓ(σ)` such that `k(d, σ) = g(d/ℓ(σ))` for the family's
    /// standardized profile `g`. Equal to `σ` except for the Gaussian, whose
    /// bandwidth enters as a variance.
    pub fn length_scale<T: Real>(self, sigma: T) -> T {
        match self {
            KernelFamily::Gaussian => sigma.sqrt(),
            _ => sigma,
        }
    }

    /// Inverse of [`KernelFamily::length_scale`].
    pub fn bandwidth_for_length<T: Real>(self, ell: T) -> T {
        match self {
            KernelFamily::Gaussian => ell * ell,
            _ => ell,
        }
    }

    /// Bandwidth at which the kernel falls to one half at distance `h`.
    pub fn half_height_bandwidth<T: Real>(self, h: T) -> T {
        // g is strictly decreasing, so bisection on [0, 10] is enough
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.profile(mid) > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.bandwidth_for_length(h / T::of(0.5 * (lo + hi)))
    }

    /// Standardized profile `g(u)` with `u = d/ℓ(σ)`.
    pub fn profile<T: Real>(self, u: T) -> T {
        let one = T::one();
        match self {
            KernelFamily::Laplace => (-u).exp(),
            KernelFamily::Matern32 => {
                let a = T::of(3.0).sqrt() * u;
                (one + a) * (-a).exp()
            }
            KernelFamily::Matern52 => {
                let a = T::of(5.0).sqrt() * u;
                (one + a + a * a / T::of(3.0)) * (-a).exp()
            }
            KernelFamily::Gaussian => (-(u * u) / T::of(2.0)).exp(),
            KernelFamily::Cauchy => one / (one + u * u),
        }
    }

    /// Analytic derivative `g′(u)` of the standardized profile for `u ≥ 0`
    /// (right derivative at `u = 0` for the Laplace kernel).
    pub fn profile_derivative<T: Real>(self, u: T) -> T {
        let one = T::one();
        match self {
            KernelFamily::Laplace => -(-u).exp(),
            KernelFamily::Matern32 => {
                let s3 = T::of(3.0).sqrt();
                -T::of(3.0) * u * (-s3 * u).exp()
            }
            KernelFamily::Matern52 => {
                let s5 = T::of(5.0).sqrt();
                -T::of(5.0) / T::of(3.0) * u * (one + s5 * u) * (-s5 * u).exp()
            }
            KernelFamily::Gaussian => -u * (-(u * u) / T::of(2.0)).exp(),
            KernelFamily::Cauchy => {
                let q = one + u * u;
                -T::of(2.0) * u / (q * q)
            }
        }
    }

    /// `max_u |g′(u)|` over `u ≥ 0`.
    ///
    /// Closed forms: Laplace 1 (at u = 0); Matérn 3/2 `√3/e` (at u = 1/√3);
    /// Matérn 5/2 `(5/3)·u(1+√5u)e^{−√5u}` at `u = (√5+5)/10`; Gaussian
    /// `e^{−1/2}` (at u = 1); Cauchy `9/(8√3)` (at u = 1/√3). The unit tests
    /// re-derive each value by dense maximization over `u ∈ [0, 100]`.
    pub fn k_prime_max(self) -> f64 {
        match self {
            KernelFamily::Laplace => 1.0,
            KernelFamily::Matern32 => 0.637_185_883_168_984,
            KernelFamily::Matern52 => 0.626_070_780_725_518_8,
            KernelFamily::Gaussian => 0.606_530_659_712_633_4,
            KernelFamily::Cauchy => 0.649_519_052_838_329,
        }
    }

    /// Kernel value at distance `d` for bandwidth `sigma`, without validation.
    #[inline]
    pub fn eval<T: Real>(self, d: T, sigma: T) -> T {
        let one = T::one();
        match self {
            KernelFamily::Laplace => (-d / sigma).exp(),
            KernelFamily::Matern32 => {
                let a = T::of(3.0).sqrt() * d / sigma;
                (a.ln_1p() - a).exp()
            }
            KernelFamily::Matern52 => {
                let a = T::of(5.0).sqrt() * d / sigma;
                ((a + a * a / T::of(3.0)).ln_1p() - a).exp()
            }
            KernelFamily::Gaussian => (-(d * d) / (T::of(2.0) * sigma)).exp(),
            KernelFamily::Cauchy => {
                let r = d / sigma;
                one / (one + r * r)
            }
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for KernelFamily {
    type Err = KgdError;

    fn from_str(s: &str) -> Result<Self> {
        KernelFamily::ALL.iter().copied().find(|k| k.id() == s.trim().to_ascii_lowercase()).ok_or_else(|| {
            KgdError::InvalidArgument(format!(
                "unknown kernel '{s}' (expected one of laplace, matern32, matern52, gaussian, cauchy)"
            ))
        })
    }
}

/// Symmetric positive-definite metric `Θ` together with its square root.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric<T: Real> {
    theta: DMatrix<T>,
    sqrt: DMatrix<T>,
    spectral_norm: T,
}

impl<T: Real> Metric<T> {
    pub fn new(theta: DMatrix<T>) -> Result<Self> {
        if !theta.is_square() || theta.nrows() == 0 {
            return invalid("metric must be a non-empty square matrix");
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return invalid("metric has non-finite entries");
        }
        let scale = theta.iter().fold(T::one(), |m, v| m.max(v.abs()));
        let tol = T::of(1e-10) * scale;
        if (&theta - theta.transpose()).iter().any(|v| v.abs() > tol) {
            return invalid("metric must be symmetric");
        }
        let eig = SymmetricEigen::new(theta.clone());
        if eig.eigenvalues.iter().any(|&s| s <= T::zero()) {
            return invalid("metric must be positive definite");
        }
        let root = eig.eigenvalues.map(|s| s.sqrt());
        let q = &eig.eigenvectors;
        let sqrt = q * DMatrix::from_diagonal(&root) * q.transpose();
        let spectral_norm = eig.eigenvalues.iter().fold(T::zero(), |m, &s| m.max(s));
        Ok(Self { theta, sqrt, spectral_norm })
    }

    pub fn theta(&self) -> &DMatrix<T> {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    /// `‖Θ‖₂`.
    pub fn spectral_norm(&self) -> T {
        self.spectral_norm
    }

    /// Rows of `x` mapped by `√Θ`, so Euclidean distances of the result equal
    /// Θ-weighted distances of the input.
    pub fn transform(&self, x: &DMatrix<T>) -> DMatrix<T> {
        x * &self.sqrt
    }
}

/// Kernel family, bandwidth and optional metric (identity when absent).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec<T: Real> {
    family: KernelFamily,
    sigma: T,
    metric: Option<Metric<T>>,
}

impl<T: Real> KernelSpec<T> {
    pub fn new(family: KernelFamily, sigma: T) -> Result<Self> {
        validate_sigma(sigma)?;
        Ok(Self { family, sigma, metric: None })
    }

    pub fn with_metric(mut self, metric: Metric<T>) -> Self {
        self.metric = Some(metric);
        self
    }

    /// Same family and metric with a different bandwidth.
    pub fn with_sigma(&self, sigma: T) -> Result<Self> {
        validate_sigma(sigma)?;
        Ok(Self { family: self.family, sigma, metric: self.metric.clone() })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn metric(&self) -> Option<&Metric<T>> {
        self.metric.as_ref()
    }

    /// `‖Θ‖₂`, which is 1 for the identity metric.
    pub fn metric_norm(&self) -> T {
        self.metric.as_ref().map_or(T::one(), Metric::spectral_norm)
    }

    fn check_dim(&self, p: usize) -> Result<()> {
        match &self.metric {
            Some(m) if m.dim() != p => {
                invalid(format!("covariate dimension {p} does not match metric dimension {}", m.dim()))
            }
            _ => Ok(()),
        }
    }
}

fn validate_sigma<T: Real>(sigma: T) -> Result<()> {
    if !(sigma.is_finite() && sigma > T::zero()) {
        return invalid(format!("bandwidth must be positive and finite, got {sigma}"));
    }
    Ok(())
}

/// `k(d, σ)` for a validated spec and a finite, non-negative distance.
pub fn kernel_value<T: Real>(spec: &KernelSpec<T>, d: T) -> Result<T> {
    if !d.is_finite() || d < T::zero() {
        return invalid(format!("distance must be finite and non-negative, got {d}"));
    }
    validate_sigma(spec.sigma)?;
    let d = if d < T::of(ZERO_DISTANCE) { T::zero() } else { d };
    Ok(spec.family.eval(d, spec.sigma))
}

fn check_finite<T: Real>(m: &DMatrix<T>, name: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return invalid(format!("{name} has non-finite entries"));
    }
    Ok(())
}

fn mapped<'a, T: Real>(x: &'a DMatrix<T>, metric: Option<&Metric<T>>) -> std::borrow::Cow<'a, DMatrix<T>> {
    match metric {
        Some(m) => std::borrow::Cow::Owned(m.transform(x)),
        None => std::borrow::Cow::Borrowed(x),
    }
}

#[inline]
fn row_distance<T: Real>(a: &DMatrix<T>, i: usize, b: &DMatrix<T>, j: usize) -> T {
    let mut acc = T::zero();
    for c in 0..a.ncols() {
        let diff = a[(i, c)] - b[(j, c)];
        acc += diff * diff;
    }
    let d = acc.sqrt();
    if d < T::of(ZERO_DISTANCE) {
        T::zero()
    } else {
        d
    }
}

/// Θ-weighted distances between the rows of `x` and the rows of `z`.
pub fn pairwise_distances<T: Real>(x: &DMatrix<T>, z: &DMatrix<T>, metric: Option<&Metric<T>>) -> Result<DMatrix<T>> {
    if x.ncols() != z.ncols() {
        return invalid(format!("column counts differ: {} vs {}", x.ncols(), z.ncols()));
    }
    if let Some(m) = metric {
        if m.dim() != x.ncols() {
            return invalid(format!("covariate dimension {} does not match metric dimension {}", x.ncols(), m.dim()));
        }
    }
    check_finite(x, "X")?;
    check_finite(z, "Z")?;
    let xm = mapped(x, metric);
    let zm = mapped(z, metric);
    Ok(DMatrix::from_fn(x.nrows(), z.nrows(), |i, j| row_distance(&xm, i, &zm, j)))
}

/// Symmetric distance matrix of the rows of `x` (exactly zero diagonal).
pub fn self_distances<T: Real>(x: &DMatrix<T>, metric: Option<&Metric<T>>) -> Result<DMatrix<T>> {
    if let Some(m) = metric {
        if m.dim() != x.ncols() {
            return invalid(format!("covariate dimension {} does not match metric dimension {}", x.ncols(), m.dim()));
        }
    }
    check_finite(x, "X")?;
    let xm = mapped(x, metric);
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = row_distance(&xm, i, &xm, j);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

/// Elementwise kernel of a precomputed distance matrix.
pub fn kernel_from_distances<T: Real>(dist: &DMatrix<T>, family: KernelFamily, sigma: T) -> DMatrix<T> {
    dist.map(|d| family.eval(d, sigma))
}

/// `K_ij = k(‖X_i − Z_j‖_Θ)`.
pub fn kernel_matrix<T: Real>(x: &DMatrix<T>, z: &DMatrix<T>, spec: &KernelSpec<T>) -> Result<DMatrix<T>> {
    spec.check_dim(x.ncols())?;
    let dist =
        if std::ptr::eq(x, z) { self_distances(x, spec.metric())? } else { pairwise_distances(x, z, spec.metric())? };
    Ok(kernel_from_distances(&dist, spec.family, spec.sigma))
}

/// Symmetric kernel matrix of the rows of `x` with unit diagonal.
pub fn gram_matrix<T: Real>(x: &DMatrix<T>, spec: &KernelSpec<T>) -> Result<DMatrix<T>> {
    kernel_matrix(x, x, spec)
}

/// Largest Θ-weighted distance between two rows of `x`.
pub fn max_pairwise_distance<T: Real>(x: &DMatrix<T>, metric: Option<&Metric<T>>) -> Result<T> {
    if x.nrows() < 2 {
        return invalid("at least two rows are required for a pairwise distance");
    }
    let d = self_distances(x, metric)?;
    Ok(d.iter().fold(T::zero(), |m, &v| m.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(family: KernelFamily, sigma: f64) -> KernelSpec<f64> {
        KernelSpec::new(family, sigma).unwrap()
    }

    #[test]
    fn documented_values() {
        assert_eq!(kernel_value(&spec(KernelFamily::Laplace, 1.0), 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            kernel_value(&spec(KernelFamily::Gaussian, 2.0), 1.0).unwrap(),
            (-0.25f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            kernel_value(&spec(KernelFamily::Gaussian, 2.0), 1.0).unwrap(),
            0.778_800_783_071_404_9,
            max_relative = 1e-12
        );
        assert_eq!(kernel_value(&spec(KernelFamily::Cauchy, 1.0), 1.0).unwrap(), 0.5);
        assert!(kernel_value(&spec(KernelFamily::Matern32, 1.0), 1e8).unwrap() < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = spec(KernelFamily::Laplace, 1.0);
        assert!(kernel_value(&s, f64::NAN).is_err());
        assert!(kernel_value(&s, f64::INFINITY).is_err());
        assert!(kernel_value(&s, -1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Laplace, 0.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Laplace, -2.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Laplace, f64::NAN).is_err());
    }

    #[test]
    fn unit_at_origin_and_zero_at_infinity() {
        for family in KernelFamily::ALL {
            for sigma in [1e-3, 0.5, 1.0, 7.0, 1e3] {
                let s = spec(family, sigma);
                assert_eq!(kernel_value(&s, 0.0).unwrap(), 1.0);
                assert!(kernel_value(&s, 1e12).unwrap() < 1e-9, "{family} σ={sigma}");
            }
        }
    }

    #[test]
    fn matrix_examples() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let k = gram_matrix(&x, &spec(KernelFamily::Laplace, 1.0)).unwrap();
        let e = (-1.0f64).exp();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[1.0, e, e, 1.0]));

        let one = DMatrix::from_row_slice(1, 1, &[3.5]);
        assert_eq!(gram_matrix(&one, &spec(KernelFamily::Gaussian, 1.0)).unwrap(), DMatrix::from_element(1, 1, 1.0));

        let x = DMatrix::from_row_slice(1, 1, &[0.0]);
        let z = DMatrix::from_row_slice(2, 1, &[0.0, 3.0]);
        let k = kernel_matrix(&x, &z, &spec(KernelFamily::Cauchy, 1.0)).unwrap();
        assert_eq!(k.shape(), (1, 2));
        assert_eq!(k[(0, 0)], 1.0);
        assert_relative_eq!(k[(0, 1)], 0.1, max_relative = 1e-15);
    }

    #[test]
    fn matrix_dimension_mismatch() {
        let x = DMatrix::<f64>::zeros(3, 2);
        let z = DMatrix::<f64>::zeros(3, 1);
        assert!(kernel_matrix(&x, &z, &spec(KernelFamily::Laplace, 1.0)).is_err());
        let m = Metric::new(DMatrix::<f64>::identity(3, 3)).unwrap();
        let s = spec(KernelFamily::Laplace, 1.0).with_metric(m);
        assert!(gram_matrix(&x, &s).is_err());
    }

    #[test]
    fn max_distance_examples() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 4.0]);
        assert_eq!(max_pairwise_distance(&x, None).unwrap(), 4.0);
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 4.0]);
        assert_eq!(max_pairwise_distance(&x, None).unwrap(), 5.0);
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let m = Metric::new(DMatrix::from_row_slice(1, 1, &[4.0])).unwrap();
        assert_relative_eq!(max_pairwise_distance(&x, Some(&m)).unwrap(), 4.0, max_relative = 1e-14);
        assert!(max_pairwise_distance(&DMatrix::<f64>::zeros(1, 2), None).is_err());
    }

    #[test]
    fn metric_validation() {
        assert!(Metric::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
        assert!(Metric::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
        let m = Metric::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let expected = 1.5 + (0.25f64 + 0.25).sqrt();
        assert_relative_eq!(m.spectral_norm(), expected, max_relative = 1e-12);
    }

    #[test]
    fn family_ids_round_trip() {
        for family in KernelFamily::ALL {
            assert_eq!(family.id().parse::<KernelFamily>().unwrap(), family);
        }
        assert!("rbf".parse::<KernelFamily>().is_err());
    }

    #[test]
    fn profile_matches_eval() {
        for family in KernelFamily::ALL {
            for &sigma in &[0.3, 1.0, 4.0] {
                for k in 0..50 {
                    let d = 0.1 * k as f64;
                    let direct = family.eval(d, sigma);
                    let via = family.profile(d / family.length_scale(sigma));
                    assert_relative_eq!(direct, via, max_relative = 1e-12, epsilon = 1e-300);
                }
            }
        }
    }

    #[test]
    fn k_prime_max_matches_dense_maximization() {
        for family in KernelFamily::ALL {
            let mut best = 0.0f64;
            let steps = 1_000_000;
            for k in 0..=steps {
                let u = 100.0 * k as f64 / steps as f64;
                best = best.max(family.profile_derivative(u).abs());
            }
            assert!(
                (best - family.k_prime_max()).abs() < 1e-8,
                "{family}: dense max {best} vs constant {}",
                family.k_prime_max()
            );
        }
    }

    #[test]
    fn analytic_derivative_matches_finite_differences() {
        let h = 1e-6;
        for family in KernelFamily::ALL {
            for k in 1..400 {
                let u = 0.025 * k as f64;
                let fd = (family.profile(u + h) - family.profile(u - h)) / (2.0 * h);
                assert!((fd - family.profile_derivative(u)).abs() < 1e-7, "{family} u={u}");
                assert!(fd.abs() <= family.k_prime_max() + 1e-6);
            }
        }
    }

    #[test]
    fn monotone_in_distance() {
        for family in KernelFamily::ALL {
            for sigma in [0.05, 1.0, 20.0] {
                let s = spec(family, sigma);
                let mut prev = 1.0;
                for k in 0..5000 {
                    let d = 0.01 * k as f64;
                    let v = kernel_value(&s, d).unwrap();
                    assert!(v <= prev && (0.0..=1.0).contains(&v), "{family} σ={sigma} d={d}");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn bandwidth_limits() {
        for family in KernelFamily::ALL {
            assert!((kernel_value(&spec(family, 1e12), 1.0).unwrap() - 1.0).abs() < 1e-5);
            assert!(kernel_value(&spec(family, 1e-12), 1.0).unwrap() < 1e-12);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let s = KernelSpec::new(KernelFamily::Gaussian, 2.0f32).unwrap();
        let v = kernel_value(&s, 1.0f32).unwrap();
        assert!((v - (-0.25f32).exp()).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn gram_is_symmetric_with_unit_diagonal(
            pts in proptest::collection::vec(-3.0f64..3.0, 2..24),
            sigma in 0.05f64..5.0,
            fam in 0usize..5,
        ) {
            let n = pts.len() / 2;
            prop_assume!(n >= 1);
            let x = DMatrix::from_row_slice(n, 2, &pts[..2 * n]);
            let k = gram_matrix(&x, &spec(KernelFamily::ALL[fam], sigma)).unwrap();
            for i in 0..n {
                prop_assert_eq!(k[(i, i)], 1.0);
                for j in 0..n {
                    prop_assert_eq!(k[(i, j)], k[(j, i)]);
                }
            }
        }

        #[test]
        fn gram_is_psd_up_to_rounding(
            pts in proptest::collection::vec(-3.0f64..3.0, 4..60),
            sigma in 0.05f64..5.0,
            fam in 0usize..5,
        ) {
            let n = pts.len() / 2;
            let x = DMatrix::from_row_slice(n, 2, &pts[..2 * n]);
            let k = gram_matrix(&x, &spec(KernelFamily::ALL[fam], sigma)).unwrap();
            let eig = SymmetricEigen::new(k).eigenvalues;
            let smax = eig.iter().cloned().fold(f64::MIN, f64::max);
            let smin = eig.iter().cloned().fold(f64::MAX, f64::min);
            prop_assert!(smin >= -1e-8 * smax, "smin {} smax {}", smin, smax);
        }
    }
}

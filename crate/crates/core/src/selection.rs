//! Hyper-parameter selection for constant-bandwidth kernel ridge regression.
//!
//! * GCV: `(‖(I−H)y‖²/n) / (tr(I−H)/n)²` with `H = K(K+λI)⁻¹`, minimized over
//!   a log-spaced `(λ, σ)` grid.
//! * MML: the Gaussian-process evidence with noise variance `λ`,
//!   `−½yᵀ(K+λI)⁻¹y − ½log det(K+λI) − (n/2)log 2π`, maximized by Nelder–Mead
//!   in `(log λ, log σ)` from several starting points.
//!
//! Both are computed from one eigendecomposition of `K` per bandwidth.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use nalgebra::DVector;

use crate::data::Dataset;
use crate::error::{invalid, KgdError, Result};
use crate::kernels::{gram_matrix, max_pairwise_distance, KernelFamily, KernelSpec, Metric};
use crate::scalar::Real;
use crate::spectral::{eig_sym_psd, SpectralDecomposition};

/// `count` values from `lo` to `hi` (inclusive), equally spaced in logarithm.
pub fn log_space<T: Real>(lo: T, hi: T, count: usize) -> Result<Vec<T>> {
    if !(lo > T::zero() && hi >= lo && lo.is_finite() && hi.is_finite()) {
        return invalid(format!("log-spaced range needs 0 < lo ≤ hi, got [{lo}, {hi}]"));
    }
    if count == 0 {
        return invalid("log-spaced range needs at least one value");
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / T::of_usize(count - 1);
    Ok((0..count)
        .map(|i| match i {
            0 => lo,
            _ if i + 1 == count => hi,
            _ => (a + step * T::of_usize(i)).exp(),
        })
        .collect())
}

/// Default ranges `λ ∈ [1e−4, 1e2]` and `σ ∈ [1e−2·D, D]`, `D` the largest pairwise distance.
pub fn default_ranges<T: Real>(x: &nalgebra::DMatrix<T>, metric: Option<&Metric<T>>) -> Result<((T, T), (T, T))> {
    let d = max_pairwise_distance(x, metric)?;
    if !(d > T::zero()) {
        return invalid("all rows coincide; bandwidth range is undefined");
    }
    Ok(((T::of(1e-4), T::of(1e2)), (T::of(1e-2) * d, d)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid<T: Real> {
    pub lambdas: Vec<T>,
    pub sigmas: Vec<T>,
}

impl<T: Real> HyperGrid<T> {
    pub fn log_spaced(lambda_range: (T, T), n_lambda: usize, sigma_range: (T, T), n_sigma: usize) -> Result<Self> {
        Ok(Self {
            lambdas: log_space(lambda_range.0, lambda_range.1, n_lambda)?,
            sigmas: log_space(sigma_range.0, sigma_range.1, n_sigma)?,
        })
    }

    /// 30 × 30 grid over [`default_ranges`].
    pub fn default_for(data: &Dataset<T>, metric: Option<&Metric<T>>) -> Result<Self> {
        let (l, s) = default_ranges(&data.x, metric)?;
        Self::log_spaced(l, 30, s, 30)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    Gcv,
    Mml,
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMethod::Gcv => "gcv",
            SelectionMethod::Mml => "mml",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionResult<T: Real> {
    pub method: SelectionMethod,
    pub lambda: T,
    pub sigma: T,
    /// GCV value (lower is better) or log marginal likelihood (higher is better).
    pub score: T,
}

/// Writes `method,lambda,sigma,score` rows.
pub fn write_selection_csv<T: Real, W: Write>(results: &[SelectionResult<T>], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["method", "lambda", "sigma", "score"])?;
    for r in results {
        wr.write_record([r.method.to_string(), r.lambda.to_string(), r.sigma.to_string(), r.score.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if !(lambda.is_finite() && lambda > T::zero()) {
        return invalid(format!("lambda must be positive and finite, got {lambda}"));
    }
    Ok(())
}

/// GCV score from a decomposition of `K` and the projected response `c = Qᵀy`.
pub fn gcv_from_spectrum<T: Real>(decomp: &SpectralDecomposition<T>, c: &DVector<T>, lambda: T) -> T {
    let n = T::of_usize(c.len());
    let mut rss = T::zero();
    let mut trace = T::zero();
    for (&s, &ci) in decomp.eigenvalues().iter().zip(c.iter()) {
        let shrink = lambda / (s + lambda);
        rss += shrink * shrink * ci * ci;
        trace += shrink;
    }
    let denom = trace / n;
    (rss / n) / (denom * denom)
}

/// Log evidence from a decomposition of `K` and `c = Qᵀy`.
pub fn lml_from_spectrum<T: Real>(decomp: &SpectralDecomposition<T>, c: &DVector<T>, lambda: T) -> T {
    let n = T::of_usize(c.len());
    let mut quad = T::zero();
    let mut logdet = T::zero();
    for (&s, &ci) in decomp.eigenvalues().iter().zip(c.iter()) {
        quad += ci * ci / (s + lambda);
        logdet += (s + lambda).ln();
    }
    -(quad + logdet + n * T::of(2.0 * PI).ln()) / T::of(2.0)
}

pub fn gcv_score<T: Real>(data: &Dataset<T>, spec: &KernelSpec<T>, lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    let decomp = eig_sym_psd(&gram_matrix(&data.x, spec)?)?;
    let c = decomp.to_eigenbasis(&data.y);
    Ok(gcv_from_spectrum(&decomp, &c, lambda))
}

pub fn log_marginal_likelihood<T: Real>(data: &Dataset<T>, spec: &KernelSpec<T>, lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    let decomp = eig_sym_psd(&gram_matrix(&data.x, spec)?)?;
    let c = decomp.to_eigenbasis(&data.y);
    Ok(lml_from_spectrum(&decomp, &c, lambda))
}

fn spec_for<T: Real>(family: KernelFamily, sigma: T, metric: Option<&Metric<T>>) -> Result<KernelSpec<T>> {
    let s = KernelSpec::new(family, sigma)?;
    Ok(match metric {
        Some(m) => s.with_metric(m.clone()),
        None => s,
    })
}

/// Grid minimizer of the GCV score; ties go to the larger `λ`, then the larger `σ`.
pub fn gcv_select<T: Real>(
    data: &Dataset<T>,
    family: KernelFamily,
    grid: &HyperGrid<T>,
    metric: Option<&Metric<T>>,
) -> Result<SelectionResult<T>> {
    if grid.lambdas.is_empty() || grid.sigmas.is_empty() {
        return invalid("grid is empty");
    }
    let mut best: Option<SelectionResult<T>> = None;
    for &sigma in &grid.sigmas {
        let decomp = eig_sym_psd(&gram_matrix(&data.x, &spec_for(family, sigma, metric)?)?)?;
        let c = decomp.to_eigenbasis(&data.y);
        for &lambda in &grid.lambdas {
            check_lambda(lambda)?;
            let score = gcv_from_spectrum(&decomp, &c, lambda);
            if !score.is_finite() {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => {
                    score < b.score
                        || (score == b.score && (lambda > b.lambda || (lambda == b.lambda && sigma > b.sigma)))
                }
            };
            if better {
                best = Some(SelectionResult { method: SelectionMethod::Gcv, lambda, sigma, score });
            }
        }
    }
    best.ok_or_else(|| KgdError::SelectionFailed("every GCV score is non-finite".into()))
}

/// Settings for [`mml_select`]. Searches stay inside the box
/// `[lambda_bounds] × [sigma_bounds]`.
#[derive(Debug, Clone)]
pub struct MmlOptions<T: Real> {
    pub seeds: Vec<(T, T)>,
    pub lambda_bounds: (T, T),
    pub sigma_bounds: (T, T),
    pub max_iter: usize,
    pub tol: T,
}

impl<T: Real> MmlOptions<T> {
    /// 3 × 3 log-spaced seeds spanning the given box.
    pub fn grid_seeds(lambda_bounds: (T, T), sigma_bounds: (T, T)) -> Result<Self> {
        let ls = log_space(lambda_bounds.0, lambda_bounds.1, 3)?;
        let ss = log_space(sigma_bounds.0, sigma_bounds.1, 3)?;
        let seeds = ls.iter().flat_map(|&l| ss.iter().map(move |&s| (l, s))).collect();
        Ok(Self { seeds, lambda_bounds, sigma_bounds, max_iter: 500, tol: T::of(1e-6) })
    }

    pub fn default_for(data: &Dataset<T>, metric: Option<&Metric<T>>) -> Result<Self> {
        let (l, s) = default_ranges(&data.x, metric)?;
        Self::grid_seeds(l, s)
    }
}

/// Outcome of one Nelder–Mead minimization.
#[derive(Debug, Clone)]
pub struct NelderMeadResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead minimization of `f` over the box `[lower, upper]`; trial
/// points are projected onto the box. Stops when every vertex lies within
/// `tol` (max-norm) of the best one, or after `max_iter` iterations.
pub fn nelder_mead<T: Real>(
    mut f: impl FnMut(&[T]) -> T,
    start: &[T],
    step: T,
    lower: &[T],
    upper: &[T],
    max_iter: usize,
    tol: T,
) -> NelderMeadResult<T> {
    let dim = start.len();
    let clamp = |p: &mut Vec<T>| {
        for ((v, &lo), &hi) in p.iter_mut().zip(lower).zip(upper) {
            *v = v.max(lo).min(hi);
        }
    };
    let mut eval = |p: &[T]| {
        let v = f(p);
        if v.is_finite() {
            v
        } else {
            T::max_value().unwrap_or(T::of(f64::MAX))
        }
    };
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(dim + 1);
    let mut p0 = start.to_vec();
    clamp(&mut p0);
    let v0 = eval(&p0);
    simplex.push((p0.clone(), v0));
    for i in 0..dim {
        let mut p = p0.clone();
        p[i] += step;
        if p[i] > upper[i] {
            p[i] = p0[i] - step;
        }
        clamp(&mut p);
        let v = eval(&p);
        simplex.push((p, v));
    }

    let half = T::of(0.5);
    let two = T::of(2.0);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let spread = simplex[1..]
            .iter()
            .flat_map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), |m, v| m.max(v));
        if spread < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<T> =
            (0..dim).map(|j| simplex[..dim].iter().map(|(p, _)| p[j]).sum::<T>() / T::of_usize(dim)).collect();
        let along = |c: T| {
            let mut p: Vec<T> = (0..dim).map(|j| centroid[j] + c * (simplex[dim].0[j] - centroid[j])).collect();
            clamp(&mut p);
            p
        };
        let reflected = along(-T::one());
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(-two);
            let fe = eval(&expanded);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < simplex[dim].1 {
                let p = along(-half);
                let v = eval(&p);
                (p, v)
            } else {
                let p = along(half);
                let v = eval(&p);
                (p, v)
            };
            if fc < simplex[dim].1.min(fr) {
                simplex[dim] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let mut p: Vec<T> = vertex.0.iter().zip(&best).map(|(v, b)| *b + half * (*v - *b)).collect();
                    clamp(&mut p);
                    let v = eval(&p);
                    *vertex = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, value) = simplex.swap_remove(0);
    NelderMeadResult { x, value, iterations, converged }
}

/// Log evidence as a function of `(log λ, log σ)`.
fn lml_at<T: Real>(data: &Dataset<T>, family: KernelFamily, metric: Option<&Metric<T>>, p: &[T]) -> Option<T> {
    let (lambda, sigma) = (p[0].exp(), p[1].exp());
    let spec = spec_for(family, sigma, metric).ok()?;
    let decomp = eig_sym_psd(&gram_matrix(&data.x, &spec).ok()?).ok()?;
    let c = decomp.to_eigenbasis(&data.y);
    let v = lml_from_spectrum(&decomp, &c, lambda);
    v.is_finite().then_some(v)
}

/// Best terminal point of Nelder–Mead runs on the negative log evidence.
pub fn mml_select<T: Real>(
    data: &Dataset<T>,
    family: KernelFamily,
    opts: &MmlOptions<T>,
    metric: Option<&Metric<T>>,
) -> Result<SelectionResult<T>> {
    if opts.seeds.is_empty() {
        return invalid("at least one optimization seed is required");
    }
    let (lb, sb) = (opts.lambda_bounds, opts.sigma_bounds);
    if !(lb.0 > T::zero() && lb.1 >= lb.0 && sb.0 > T::zero() && sb.1 >= sb.0) {
        return invalid("MML bounds must be positive intervals");
    }
    let lower = [lb.0.ln(), sb.0.ln()];
    let upper = [lb.1.ln(), sb.1.ln()];
    let mut best: Option<SelectionResult<T>> = None;
    for &(l0, s0) in &opts.seeds {
        if !(l0 > T::zero() && s0 > T::zero()) {
            return invalid("seeds must be positive");
        }
        let res = nelder_mead(
            |p| lml_at(data, family, metric, p).map_or(T::of(f64::INFINITY), |v| -v),
            &[l0.ln(), s0.ln()],
            T::of(0.5),
            &lower,
            &upper,
            opts.max_iter,
            opts.tol,
        );
        let Some(score) = lml_at(data, family, metric, &res.x) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(SelectionResult {
                method: SelectionMethod::Mml,
                lambda: res.x[0].exp(),
                sigma: res.x[1].exp(),
                score,
            });
        }
    }
    best.ok_or_else(|| KgdError::SelectionFailed("no optimization run produced a finite evidence".into()))
}

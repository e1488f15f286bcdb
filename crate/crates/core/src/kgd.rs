//! Kernel gradient descent, optionally with a decreasing bandwidth.
//!
//! The Euler update `f ← f + Δt·K(y−f)`, `f* ← f* + Δt·K*(y−f)` is run in the
//! eigenbasis of the current kernel matrix: with `b = Qᵀ(y−f)` one step is
//! `b ← (1 − Δt·s)∘b`, which costs `O(n)`. Test predictions are accumulated
//! through the per-bandwidth coefficient `A = Δt·Σ(y−f)` and materialized
//! only when the bandwidth changes, so long runs at a fixed bandwidth stay
//! cheap. A full eigendecomposition happens once per bandwidth change.
//!
//! With a decreasing bandwidth, whenever the training-R² speed
//! `2(y−f)ᵀK(y−f)/‖y−ȳ‖²` drops below `v_r2`, the bandwidth is multiplied by
//! `decay` (and `K` rebuilt) until the speed recovers or `σ_m` is reached.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{invalid, KgdError, Result};
use crate::kernels::{
    kernel_from_distances, max_pairwise_distance, pairwise_distances, self_distances, KernelFamily, KernelSpec, Metric,
};
use crate::regression::{Estimator, FitResult, Prior};
use crate::scalar::Real;
use crate::spectral::{eig_sym_psd, SpectralDecomposition};

/// Inner bandwidth-decrease iterations allowed per step.
pub const MAX_BANDWIDTH_ITERATIONS: usize = 10_000;

/// When no `σ_m` is given, the floor is the bandwidth whose kernel falls to
/// one half at this fraction of the largest pairwise distance. Matching the
/// half-height distance rather than `σ` keeps the floor comparable across
/// families with very different tails.
pub const DEFAULT_MIN_HALF_HEIGHT: f64 = 0.015;

#[derive(Debug, Clone)]
pub struct KgdConfig<T: Real> {
    pub dt: T,
    /// Minimum training-R² speed; `0` disables the bandwidth decrease.
    pub v_r2: T,
    /// Initial bandwidth; `None` means the largest pairwise distance in `X`.
    pub sigma0: Option<T>,
    /// Smallest allowed bandwidth; `None` applies [`DEFAULT_MIN_HALF_HEIGHT`],
    /// capped at `σ₀`.
    pub sigma_min: Option<T>,
    pub r2_max: T,
    pub t_max: T,
    pub decay: T,
    pub metric: Option<Metric<T>>,
    /// Keep per-step records; when false only the final state is kept.
    pub record: bool,
}

impl<T: Real> Default for KgdConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::of(0.01),
            v_r2: T::of(0.05),
            sigma0: None,
            sigma_min: None,
            r2_max: T::of(0.99),
            t_max: T::of(1e4),
            decay: T::of(0.99),
            metric: None,
            record: true,
        }
    }
}

impl<T: Real> KgdConfig<T> {
    fn validate(&self) -> Result<()> {
        let pos = |v: T| v.is_finite() && v > T::zero();
        if !pos(self.dt) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.v_r2.is_finite() && self.v_r2 >= T::zero()) {
            return invalid(format!("v_r2 must be non-negative, got {}", self.v_r2));
        }
        if !(self.decay > T::zero() && self.decay < T::one()) {
            return invalid(format!("decay must lie in (0, 1), got {}", self.decay));
        }
        if !(self.r2_max > T::zero() && self.r2_max <= T::one()) {
            return invalid(format!("r2_max must lie in (0, 1], got {}", self.r2_max));
        }
        if !pos(self.t_max) {
            return invalid(format!("t_max must be positive, got {}", self.t_max));
        }
        for (name, v) in [("sigma0", self.sigma0), ("sigma_min", self.sigma_min)] {
            if let Some(v) = v {
                if !pos(v) {
                    return invalid(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if let (Some(s0), Some(sm)) = (self.sigma0, self.sigma_min) {
            if sm > s0 {
                return invalid(format!("sigma_min {sm} exceeds sigma0 {s0}"));
            }
        }
        Ok(())
    }
}

/// A stretch of the run at one bandwidth.
#[derive(Debug, Clone)]
pub struct Segment<T: Real> {
    /// Index of the first record using this bandwidth.
    pub start: usize,
    pub sigma: T,
    pub s_min: T,
    pub s_max: T,
    /// `‖k(x*_j, X)‖₂` for each prediction row.
    pub kstar_norms: DVector<T>,
    /// `Δt·Σ(y−f)` over the steps taken at this bandwidth.
    pub coef: DVector<T>,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    R2Reached,
    TimeLimit,
}

/// Per-step records of a run plus its final predictions.
///
/// Record `i` holds the state at `t_i = i·Δt`: the residual and R² of
/// `f(t_i)`, and the bandwidth, R² speed and `s_min` used for the step that
/// starts there (after any bandwidth decrease at `t_i`).
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub dt: T,
    pub times: Vec<T>,
    pub sigmas: Vec<T>,
    pub residual_norms: Vec<T>,
    pub r2s: Vec<T>,
    pub r2_rates: Vec<T>,
    pub smins: Vec<T>,
    pub segments: Vec<Segment<T>>,
    pub final_fit: FitResult<T>,
    pub stop: StopReason,
    /// `‖y_μ‖₂`.
    pub y_mu_norm: T,
    pub y_mu: DVector<T>,
    pub mu_test: DVector<T>,
    pub x_train: DMatrix<T>,
    pub family: KernelFamily,
    pub metric: Option<Metric<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_final(&self) -> T {
        match self.final_fit.estimator {
            Estimator::Kgd { t, .. } => t,
            _ => unreachable!("trajectory fits are gradient descent fits"),
        }
    }

    pub fn sigma_final(&self) -> T {
        self.segments.last().map(|s| s.sigma).unwrap_or_else(T::zero)
    }

    pub fn sigma0(&self) -> T {
        self.segments[0].sigma
    }

    pub fn final_r2(&self) -> T {
        *self.r2s.last().expect("non-empty trajectory")
    }

    /// Final shifted prediction `f̂*_μ` at prediction row `j`.
    pub fn test_prediction_mu(&self, j: usize) -> T {
        self.final_fit.f_test[j] - self.mu_test[j]
    }

    pub fn n_test(&self) -> usize {
        self.mu_test.len()
    }

    /// Segment in force at record `i`.
    pub fn segment_at(&self, i: usize) -> &Segment<T> {
        let k = self.segments.partition_point(|s| s.start <= i);
        &self.segments[k.max(1) - 1]
    }

    /// `‖k*(x*_j, X, σ(t_i))‖₂` for every record `i`.
    pub fn kstar_norm_series(&self, j: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        for (k, seg) in self.segments.iter().enumerate() {
            let end = self.segments.get(k + 1).map_or(self.len(), |s| s.start);
            out.extend(std::iter::repeat_n(seg.kstar_norms[j], end.saturating_sub(seg.start)));
        }
        out
    }

    /// Shifted predictor of the final model, `f̂_μ(x) = Σ_s k(x, X, σ_s)ᵀA_s`,
    /// evaluated at every row of `x`.
    pub fn predict_mu(&self, x: &DMatrix<T>) -> Result<DVector<T>> {
        let dist = pairwise_distances(x, &self.x_train, self.metric.as_ref())?;
        let mut out = DVector::zeros(x.nrows());
        for seg in &self.segments {
            out += kernel_from_distances(&dist, self.family, seg.sigma) * &seg.coef;
        }
        Ok(out)
    }

    /// Writes `step,t,sigma,r2,dr2dt,residual_norm,smin` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["step", "t", "sigma", "r2", "dr2dt", "residual_norm", "smin"])?;
        for i in 0..self.len() {
            wr.write_record([
                i.to_string(),
                self.times[i].to_string(),
                self.sigmas[i].to_string(),
                self.r2s[i].to_string(),
                self.r2_rates[i].to_string(),
                self.residual_norms[i].to_string(),
                self.smins[i].to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// One explicit Euler step on training and test predictions.
pub fn kgd_step<T: Real>(
    f_train: &DVector<T>,
    f_test: &DVector<T>,
    k: &DMatrix<T>,
    k_star: &DMatrix<T>,
    y: &DVector<T>,
    dt: T,
) -> Result<(DVector<T>, DVector<T>)> {
    let n = y.len();
    if f_train.len() != n || k.shape() != (n, n) || k_star.ncols() != n || k_star.nrows() != f_test.len() {
        return invalid("inconsistent dimensions in gradient step");
    }
    if !(dt > T::zero()) {
        return invalid("dt must be positive");
    }
    let r = y - f_train;
    Ok((f_train + k * &r * dt, f_test + k_star * &r * dt))
}

fn total_sum_of_squares<T: Real>(y: &DVector<T>) -> Result<T> {
    let mean = y.mean();
    let sst: T = y.iter().map(|&v| (v - mean) * (v - mean)).sum();
    if !(sst > T::zero()) {
        return Err(KgdError::DegenerateResponse);
    }
    Ok(sst)
}

/// Training `R² = 1 − ‖y−f‖²/‖y−ȳ‖²`.
pub fn r2<T: Real>(y: &DVector<T>, f: &DVector<T>) -> Result<T> {
    if y.len() != f.len() {
        return invalid("y and f differ in length");
    }
    let sst = total_sum_of_squares(y)?;
    Ok(T::one() - (y - f).norm_squared() / sst)
}

/// `∂R²/∂t = 2·(y−f)ᵀK(y−f)/‖y−ȳ‖²` under the gradient flow.
pub fn r2_rate<T: Real>(y: &DVector<T>, f: &DVector<T>, k: &DMatrix<T>) -> Result<T> {
    if y.len() != f.len() || k.shape() != (y.len(), y.len()) {
        return invalid("inconsistent dimensions");
    }
    let sst = total_sum_of_squares(y)?;
    let r = y - f;
    Ok(T::of(2.0) * r.dot(&(k * &r)) / sst)
}

/// Out-of-sample `R²` against held-out targets.
pub fn test_r2<T: Real>(y_test: &DVector<T>, f_test: &DVector<T>) -> Result<T> {
    r2(y_test, f_test)
}

struct Run<T: Real> {
    dist: DMatrix<T>,
    dist_star: DMatrix<T>,
    y_mu: DVector<T>,
    sst: T,
}

impl<T: Real> Run<T> {
    fn rate(&self, k: &DMatrix<T>, r: &DVector<T>) -> T {
        T::of(2.0) * r.dot(&(k * r)) / self.sst
    }

    fn eigen_rate(&self, decomp: &SpectralDecomposition<T>, b: &DVector<T>) -> T {
        let acc: T = decomp.eigenvalues().iter().zip(b.iter()).map(|(&s, &v)| s * v * v).sum();
        T::of(2.0) * acc / self.sst
    }
}

fn run<T: Real>(
    data: &Dataset<T>,
    family: KernelFamily,
    cfg: &KgdConfig<T>,
    prior: &Prior<T>,
    decreasing: bool,
    r2_stop: bool,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    data.validate()?;
    let metric = cfg.metric.clone();
    let x_star = data.x_star();
    let mu_train = prior.eval_rows(&data.x)?;
    let mu_test = prior.eval_rows(&x_star)?;
    let y_mu = &data.y - &mu_train;
    let sst = total_sum_of_squares(&data.y)?;

    let needs_d = cfg.sigma0.is_none() || cfg.sigma_min.is_none();
    let d = if needs_d { max_pairwise_distance(&data.x, metric.as_ref())? } else { T::zero() };
    let sigma0 = match cfg.sigma0 {
        Some(s) => s,
        None if d > T::zero() => d,
        None => return invalid("all training rows coincide; pass sigma0 explicitly"),
    };
    let sigma_min = match cfg.sigma_min {
        Some(s) => s,
        None if d > T::zero() => family.half_height_bandwidth(d * T::of(DEFAULT_MIN_HALF_HEIGHT)).min(sigma0),
        None => sigma0,
    };
    if sigma_min > sigma0 {
        return invalid(format!("sigma_min {sigma_min} exceeds sigma0 {sigma0}"));
    }

    let r = Run {
        dist: self_distances(&data.x, metric.as_ref())?,
        dist_star: pairwise_distances(&x_star, &data.x, metric.as_ref())?,
        y_mu,
        sst,
    };
    let n = data.n();
    let dt = cfg.dt;
    let ratio = cfg.t_max / dt;
    let n_steps = (ratio - T::of(1e-9) * ratio.max(T::one())).ceil().as_f64().max(1.0) as usize;
    let can_decrease = decreasing && cfg.v_r2 > T::zero();

    let mut sigma = sigma0;
    let mut k = kernel_from_distances(&r.dist, family, sigma);
    let mut decomp = eig_sym_psd(&k)?;
    let mut k_star = kernel_from_distances(&r.dist_star, family, sigma);
    let mut b = decomp.to_eigenbasis(&r.y_mu);
    let mut g = DVector::<T>::zeros(n);
    let mut f_star_mu = DVector::<T>::zeros(x_star.nrows());
    let mut segments: Vec<Segment<T>> = Vec::new();
    let new_segment = |start: usize, sigma: T, decomp: &SpectralDecomposition<T>, k_star: &DMatrix<T>| Segment {
        start,
        sigma,
        s_min: decomp.s_min(),
        s_max: decomp.s_max(),
        kstar_norms: DVector::from_fn(k_star.nrows(), |j, _| k_star.row(j).norm()),
        coef: DVector::zeros(n),
    };
    segments.push(new_segment(0, sigma, &decomp, &k_star));

    let mut tr = Recorder::new(cfg.record);
    let mut step = 0usize;
    let stop;
    loop {
        let rn2 = b.norm_squared();
        let rsq = T::one() - rn2 / sst;
        let t = T::of_usize(step) * dt;
        if !rn2.is_finite() {
            return Err(KgdError::Divergence { step, t: t.as_f64() });
        }
        let mut rate = r.eigen_rate(&decomp, &b);
        let done = if r2_stop && rsq >= cfg.r2_max {
            Some(StopReason::R2Reached)
        } else if step >= n_steps {
            Some(StopReason::TimeLimit)
        } else {
            None
        };

        if done.is_none() && can_decrease && rate < cfg.v_r2 && sigma > sigma_min {
            // close the current segment
            let seg = segments.last_mut().expect("segment");
            seg.coef = decomp.from_eigenbasis(&g);
            f_star_mu += &k_star * &seg.coef;
            let resid = decomp.from_eigenbasis(&b);
            let mut iterations = 0;
            loop {
                iterations += 1;
                if iterations > MAX_BANDWIDTH_ITERATIONS {
                    return Err(KgdError::BandwidthLoop { step, iterations: MAX_BANDWIDTH_ITERATIONS });
                }
                sigma *= cfg.decay;
                if sigma <= sigma_min {
                    sigma = sigma_min;
                    k = kernel_from_distances(&r.dist, family, sigma);
                    break;
                }
                k = kernel_from_distances(&r.dist, family, sigma);
                if r.rate(&k, &resid) >= cfg.v_r2 {
                    break;
                }
            }
            decomp = eig_sym_psd(&k)?;
            k_star = kernel_from_distances(&r.dist_star, family, sigma);
            b = decomp.to_eigenbasis(&resid);
            g.fill(T::zero());
            rate = r.eigen_rate(&decomp, &b);
            segments.push(new_segment(step, sigma, &decomp, &k_star));
        }

        tr.push(t, sigma, rn2.sqrt(), rsq, rate, decomp.s_min());
        if let Some(reason) = done {
            stop = reason;
            break;
        }

        for ((bi, gi), &s) in b.iter_mut().zip(g.iter_mut()).zip(decomp.eigenvalues().iter()) {
            *gi += dt * *bi;
            *bi *= T::one() - dt * s;
        }
        step += 1;
    }

    let seg = segments.last_mut().expect("segment");
    seg.coef = decomp.from_eigenbasis(&g);
    f_star_mu += &k_star * &seg.coef;
    let f_train_mu = &r.y_mu - decomp.from_eigenbasis(&b);
    if f_train_mu.iter().chain(f_star_mu.iter()).any(|v| !v.is_finite()) {
        return Err(KgdError::Divergence { step, t: (T::of_usize(step) * dt).as_f64() });
    }
    let t_end = T::of_usize(step) * dt;
    let y_mu_norm = r.y_mu.norm();
    Ok(Trajectory {
        dt,
        times: tr.times,
        sigmas: tr.sigmas,
        residual_norms: tr.residual_norms,
        r2s: tr.r2s,
        r2_rates: tr.r2_rates,
        smins: tr.smins,
        segments,
        final_fit: FitResult {
            f_train: f_train_mu + mu_train,
            f_test: f_star_mu + &mu_test,
            estimator: Estimator::Kgd { t: t_end, sigma },
            spec: {
                let spec = KernelSpec::new(family, sigma)?;
                match &metric {
                    Some(m) => spec.with_metric(m.clone()),
                    None => spec,
                }
            },
        },
        stop,
        y_mu_norm,
        y_mu: r.y_mu,
        mu_test,
        x_train: data.x.clone(),
        family,
        metric,
    })
}

struct Recorder<T> {
    keep_all: bool,
    times: Vec<T>,
    sigmas: Vec<T>,
    residual_norms: Vec<T>,
    r2s: Vec<T>,
    r2_rates: Vec<T>,
    smins: Vec<T>,
}

impl<T: Copy> Recorder<T> {
    fn new(keep_all: bool) -> Self {
        Self {
            keep_all,
            times: Vec::new(),
            sigmas: Vec::new(),
            residual_norms: Vec::new(),
            r2s: Vec::new(),
            r2_rates: Vec::new(),
            smins: Vec::new(),
        }
    }

    fn push(&mut self, t: T, sigma: T, rn: T, r2: T, rate: T, smin: T) {
        if !self.keep_all && !self.times.is_empty() {
            self.times.clear();
            self.sigmas.clear();
            self.residual_norms.clear();
            self.r2s.clear();
            self.r2_rates.clear();
            self.smins.clear();
        }
        self.times.push(t);
        self.sigmas.push(sigma);
        self.residual_norms.push(rn);
        self.r2s.push(r2);
        self.r2_rates.push(rate);
        self.smins.push(smin);
    }
}

/// Gradient descent with the bandwidth schedule described in the module docs.
pub fn kgd_decreasing_bandwidth<T: Real>(
    data: &Dataset<T>,
    family: KernelFamily,
    cfg: &KgdConfig<T>,
    prior: &Prior<T>,
) -> Result<Trajectory<T>> {
    run(data, family, cfg, prior, true, true)
}

/// Plain gradient descent at a fixed kernel up to `t_end`.
pub fn kgd_constant<T: Real>(
    data: &Dataset<T>,
    spec: &KernelSpec<T>,
    dt: T,
    t_end: T,
    prior: &Prior<T>,
) -> Result<Trajectory<T>> {
    let cfg = KgdConfig {
        dt,
        v_r2: T::zero(),
        sigma0: Some(spec.sigma()),
        sigma_min: Some(spec.sigma()),
        r2_max: T::one(),
        t_max: t_end,
        metric: spec.metric().cloned(),
        ..KgdConfig::default()
    };
    run(data, spec.family(), &cfg, prior, false, false)
}

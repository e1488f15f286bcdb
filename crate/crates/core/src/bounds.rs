//! Numerical checks of the prediction, gradient and residual bounds for
//! kernel gradient flow and descent, and randomized suites that drive them.
//!
//! Trajectory integrals use the trapezoidal rule over the recorded time grid.
//! The bounds are statements about the continuous flow, so checks on
//! discrete trajectories carry a small multiplicative slack.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::data::{derive_seed, standardize, Dataset, SeededStream};
use crate::error::{invalid, KgdError, Result};
use crate::kernels::{max_pairwise_distance, KernelFamily, KernelSpec};
use crate::kgd::{kgd_constant, kgd_decreasing_bandwidth, KgdConfig, Trajectory};
use crate::regression::{kgf_single_bound, krr_single_bound, KernelSystem, Prior};
use crate::scalar::Real;
use crate::spectral::phi;

/// Multiplicative slack for trajectory-based bound checks.
pub const BOUND_SLACK: f64 = 1e-4;
/// Multiplicative slack for closed-form checks.
pub const CLOSED_FORM_SLACK: f64 = 1e-10;
/// Tolerance of the bandwidth-limit identities.
pub const LIMIT_TOLERANCE: f64 = 1e-4;

fn trapezoid<T: Real>(times: &[T], values: impl Iterator<Item = T>) -> T {
    let mut acc = T::zero();
    let mut prev: Option<(T, T)> = None;
    for (&t, v) in times.iter().zip(values) {
        if let Some((t0, v0)) = prev {
            acc += (t - t0) * (v0 + v) / T::of(2.0);
        }
        prev = Some((t, v));
    }
    acc
}

/// Weights `c` with `Σ cᵢvᵢ` equal to the trapezoidal integral of `v`.
fn trapezoid_weights<T: Real>(times: &[T]) -> Vec<T> {
    let mut c = vec![T::zero(); times.len()];
    for i in 1..times.len() {
        let h = (times[i] - times[i - 1]) / T::of(2.0);
        c[i - 1] += h;
        c[i] += h;
    }
    c
}

/// Cumulative trapezoidal integral at each recorded time.
fn cumulative_trapezoid<T: Real>(times: &[T], values: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = T::zero();
    for i in 0..times.len() {
        if i > 0 {
            acc += (times[i] - times[i - 1]) * (values[i - 1] + values[i]) / T::of(2.0);
        }
        out.push(acc);
    }
    out
}

/// `min(t, 1/s̄)`, with `1/0 = ∞`.
pub fn time_factor<T: Real>(t: T, s_bar: T) -> T {
    if s_bar > T::zero() {
        t.min(T::one() / s_bar)
    } else {
        t
    }
}

/// Residual-weighted and time averages along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryAverages<T: Real> {
    /// Weighted average of `‖k*(τ)‖₂`.
    pub kstar_bar: T,
    /// Time average of `s_min(K(τ))`.
    pub smin_bar: T,
    /// Weighted average of `1/σ(τ)`.
    pub inv_sigma_bar: T,
    /// Weighted average of the inverse length scale `1/ℓ(σ(τ))`; equals
    /// `inv_sigma_bar` except for the Gaussian, where `ℓ = √σ`.
    pub inv_length_bar: T,
    /// `∫‖y−f(τ)‖₂dτ`.
    pub residual_integral: T,
    pub t: T,
}

/// Averages for prediction row `j` (`None` skips the `k*` average).
pub fn trajectory_averages<T: Real>(traj: &Trajectory<T>, j: Option<usize>) -> Result<TrajectoryAverages<T>> {
    if traj.len() < 2 {
        return invalid("trajectory needs at least two records");
    }
    if let Some(j) = j {
        if j >= traj.n_test() {
            return invalid(format!("prediction row {j} out of range"));
        }
    }
    let times = &traj.times;
    let w = &traj.residual_norms;
    let wint = trapezoid(times, w.iter().copied());
    if !(wint > T::zero()) {
        return Err(KgdError::DegenerateTrajectory);
    }
    let kstar_bar = match j {
        Some(j) => {
            let ks = traj.kstar_norm_series(j);
            trapezoid(times, ks.iter().zip(w).map(|(&k, &r)| k * r)) / wint
        }
        None => T::zero(),
    };
    let family = traj.family;
    let inv_sigma_bar = trapezoid(times, traj.sigmas.iter().zip(w).map(|(&s, &r)| r / s)) / wint;
    let inv_length_bar = trapezoid(times, traj.sigmas.iter().zip(w).map(|(&s, &r)| r / family.length_scale(s))) / wint;
    let t = *times.last().expect("non-empty");
    let smin_bar = trapezoid(times, traj.smins.iter().copied()) / t;
    Ok(TrajectoryAverages { kstar_bar, smin_bar, inv_sigma_bar, inv_length_bar, residual_integral: wint, t })
}

/// Outcome of one inequality check `lhs ≤ rhs·slack`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck<T: Real> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
}

impl<T: Real> BoundCheck<T> {
    fn new(lhs: T, rhs: T, slack: f64) -> Self {
        Self { lhs, rhs, holds: lhs <= rhs * T::of(1.0 + slack) }
    }

    /// `lhs/rhs`, `0` when both vanish.
    pub fn ratio(&self) -> T {
        if self.rhs > T::zero() {
            self.lhs / self.rhs
        } else if self.lhs > T::zero() {
            T::of(f64::INFINITY)
        } else {
            T::zero()
        }
    }
}

/// `|f̂*_μ(x*_j)| ≤ k̄*₂·min(t, 1/s̄_min)·‖y_μ‖₂` for prediction row `j`.
pub fn check_prop2_bound<T: Real>(traj: &Trajectory<T>, j: usize) -> Result<BoundCheck<T>> {
    let lhs = traj.test_prediction_mu(j).abs();
    if traj.y_mu_norm == T::zero() {
        return Ok(BoundCheck::new(lhs, T::zero(), BOUND_SLACK));
    }
    let avg = trajectory_averages(traj, Some(j))?;
    let rhs = avg.kstar_bar * time_factor(avg.t, avg.smin_bar) * traj.y_mu_norm;
    Ok(BoundCheck::new(lhs, rhs, BOUND_SLACK))
}

/// Gradient and location bounds at one prediction point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop4Check<T: Real> {
    pub grad_norm: T,
    pub grad_bound: T,
    pub pred_abs: T,
    pub pred_bound: T,
    /// The Laplace kernel is not differentiable where `x*` meets a training row.
    pub skipped: bool,
    pub holds: bool,
}

/// Central finite-difference gradient of the final predictor at `x_star`,
/// compared with `σ̄⁻¹·min(t, 1/s̄_min)·‖y_μ‖₂·k′_max·√(n‖Θ‖₂)`, and
/// `|f̂*_μ(x*)|` compared with that bound times `‖x* − x_m‖₂`.
///
/// The inverse bandwidth is averaged as the inverse length scale of the
/// family, which is what the kernel derivative scales with.
pub fn check_prop4_bounds<T: Real>(traj: &Trajectory<T>, x_star: &[T]) -> Result<Prop4Check<T>> {
    let x = &traj.x_train;
    let p = x.ncols();
    if x_star.len() != p {
        return invalid(format!("x* has {} coordinates, X has {p} columns", x_star.len()));
    }
    let h = T::of(1e-5) * traj.sigma_final();
    let point = DMatrix::from_row_slice(1, p, x_star);
    let pred = traj.predict_mu(&point)?[0];
    let mut xm_dist = T::zero();
    let mut nearest = T::of(f64::INFINITY);
    for i in 0..x.nrows() {
        let d = (0..p).map(|c| (x[(i, c)] - x_star[c]).powi(2)).sum::<T>().sqrt();
        xm_dist = xm_dist.max(d);
        nearest = nearest.min(d);
    }
    let skipped = traj.family == KernelFamily::Laplace && nearest < T::of(10.0) * h;

    let mut probes = DMatrix::zeros(2 * p, p);
    for k in 0..p {
        for c in 0..p {
            probes[(2 * k, c)] = x_star[c];
            probes[(2 * k + 1, c)] = x_star[c];
        }
        probes[(2 * k, k)] += h;
        probes[(2 * k + 1, k)] -= h;
    }
    let vals = traj.predict_mu(&probes)?;
    let grad = DVector::from_fn(p, |k, _| (vals[2 * k] - vals[2 * k + 1]) / (T::of(2.0) * h));
    let grad_norm = grad.norm();

    let n = T::of_usize(x.nrows());
    let theta_norm = traj.metric.as_ref().map_or(T::one(), |m| m.spectral_norm());
    let scale = T::of(traj.family.k_prime_max()) * (n * theta_norm).sqrt() * traj.y_mu_norm;
    let (grad_bound, pred_bound) = if traj.y_mu_norm == T::zero() {
        (T::zero(), T::zero())
    } else {
        let avg = trajectory_averages(traj, None)?;
        let g = avg.inv_length_bar * time_factor(avg.t, avg.smin_bar) * scale;
        (g, g * xm_dist)
    };
    let slack = T::of(1.0 + BOUND_SLACK);
    // finite-difference rounding: O(eps·|f|/h)
    let fd_tol = T::of(1e-6) * (T::one() + grad_bound) + T::of(1e3) * T::eps() * (T::one() + pred.abs()) / h;
    let pred_abs = pred.abs();
    let holds = skipped || (grad_norm <= grad_bound * slack + fd_tol && pred_abs <= pred_bound * slack);
    Ok(Prop4Check { grad_norm, grad_bound, pred_abs, pred_bound, skipped, holds })
}

/// `‖y − f̂(t_i)‖₂ ≤ exp(−∫₀^{t_i} s_min)·‖y_μ‖₂` at every record; returns
/// the record with the largest ratio.
pub fn check_lemma8_contraction<T: Real>(traj: &Trajectory<T>, slack: f64) -> BoundCheck<T> {
    let integral = cumulative_trapezoid(&traj.times, &traj.smins);
    let mut worst = BoundCheck::new(T::zero(), T::zero(), slack);
    let mut worst_ratio = T::of(-1.0);
    for (i, &rn) in traj.residual_norms.iter().enumerate() {
        let c = BoundCheck::new(rn, (-integral[i]).exp() * traj.y_mu_norm, slack);
        let r = c.ratio();
        if (!c.holds && worst.holds) || (c.holds == worst.holds && r > worst_ratio) {
            worst = c;
            worst_ratio = r;
        }
    }
    worst
}

/// Largest deviations from the bandwidth-limit identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitReport<T: Real> {
    /// Flow at infinite bandwidth: `(1 − e^{−tn})·ȳ_μ` everywhere.
    pub flow_infinite: T,
    /// Ridge at infinite bandwidth: `n/(n+λ)·ȳ_μ` everywhere.
    pub ridge_infinite: T,
    /// Flow at zero bandwidth: `(1 − e^{−t})·y_μ,i` on `X`, `0` elsewhere.
    pub flow_zero: T,
    /// Ridge at zero bandwidth: `y_μ,i/(1+λ)` on `X`, `0` elsewhere.
    pub ridge_zero: T,
}

impl<T: Real> LimitReport<T> {
    pub fn max_deviation(&self) -> T {
        self.flow_infinite.max(self.ridge_infinite).max(self.flow_zero).max(self.ridge_zero)
    }

    pub fn holds(&self) -> bool {
        self.max_deviation() <= T::of(LIMIT_TOLERANCE)
    }
}

/// Bandwidth whose length scale is `scale`.
fn sigma_for_length<T: Real>(family: KernelFamily, scale: T) -> T {
    match family {
        KernelFamily::Gaussian => scale * scale,
        _ => scale,
    }
}

/// Evaluates the four limit identities at length scales `1e8·D` and `1e−8·D`.
/// Prediction rows must not coincide with training rows.
pub fn check_limits_prop3<T: Real>(
    data: &Dataset<T>,
    family: KernelFamily,
    t: T,
    lambda: T,
    prior: &Prior<T>,
) -> Result<LimitReport<T>> {
    let d = max_pairwise_distance(&data.x, None)?;
    let n = data.n();
    let big = KernelSpec::new(family, sigma_for_length(family, T::of(1e8) * d))?;
    let small = KernelSpec::new(family, sigma_for_length(family, T::of(1e-8) * d))?;

    let dev = |f: &DVector<T>, mu: &DVector<T>, target: &dyn Fn(usize) -> T| {
        (0..f.len()).fold(T::zero(), |m, i| m.max((f[i] - mu[i] - target(i)).abs()))
    };

    let sys = KernelSystem::new(data, &big, prior)?;
    let ybar = sys.y_mu.mean();
    let nf = T::of_usize(n);
    let flow = sys.kgf(t)?;
    let ridge = sys.krr(lambda)?;
    let flow_target = -(-(t * nf)).exp_m1() * ybar;
    let ridge_target = nf / (nf + lambda) * ybar;
    let flow_infinite =
        dev(&flow.f_train, &sys.mu_train, &|_| flow_target).max(dev(&flow.f_test, &sys.mu_test, &|_| flow_target));
    let ridge_infinite =
        dev(&ridge.f_train, &sys.mu_train, &|_| ridge_target).max(dev(&ridge.f_test, &sys.mu_test, &|_| ridge_target));

    let sys = KernelSystem::new(data, &small, prior)?;
    let flow = sys.kgf(t)?;
    let ridge = sys.krr(lambda)?;
    let shrink_t = -(-t).exp_m1();
    let y_mu = sys.y_mu.clone();
    let flow_zero =
        dev(&flow.f_train, &sys.mu_train, &|i| shrink_t * y_mu[i]).max(dev(&flow.f_test, &sys.mu_test, &|_| T::zero()));
    let ridge_zero = dev(&ridge.f_train, &sys.mu_train, &|i| y_mu[i] / (T::one() + lambda)).max(dev(
        &ridge.f_test,
        &sys.mu_test,
        &|_| T::zero(),
    ));
    Ok(LimitReport { flow_infinite, ridge_infinite, flow_zero, ridge_zero })
}

/// Which element of each minimum in the combined bound is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Eq9Branch {
    /// `σ̄⁻¹·C₁` (true) or `k̄*₂` (false).
    pub inv_sigma: bool,
    /// `t` (true) or `1/s̄_min` (false).
    pub time: bool,
}

impl fmt::Display for Eq9Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*{}", if self.inv_sigma { "inv_sigma" } else { "kstar" }, if self.time { "t" } else { "inv_smin" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eq9Point<T: Real> {
    pub bound: T,
    pub branch: Eq9Branch,
}

/// Residual-weighted averages of `‖k*‖₂` for every prediction row, in one
/// pass over the records. `‖k*‖₂` is constant within a segment, so only the
/// per-segment weight sums are needed.
pub fn kstar_bars<T: Real>(traj: &Trajectory<T>) -> Result<Vec<T>> {
    if traj.len() < 2 {
        return invalid("trajectory needs at least two records");
    }
    let c = trapezoid_weights(&traj.times);
    let mut out = vec![T::zero(); traj.n_test()];
    let mut wint = T::zero();
    for (k, seg) in traj.segments.iter().enumerate() {
        let end = traj.segments.get(k + 1).map_or(traj.len(), |s| s.start).min(traj.len());
        let m: T = (seg.start.min(end)..end).map(|i| c[i] * traj.residual_norms[i]).sum();
        wint += m;
        for (o, &kn) in out.iter_mut().zip(seg.kstar_norms.iter()) {
            *o += kn * m;
        }
    }
    if !(wint > T::zero()) {
        return Err(KgdError::DegenerateTrajectory);
    }
    Ok(out.into_iter().map(|v| v / wint).collect())
}

/// `min(σ̄⁻¹·C₁, k̄*₂)·min(t, 1/s̄_min)·C₂` at prediction row `j` with
/// coordinates `x_star`, where `C₁ = k′_max·√(n‖Θ‖₂)·‖x* − x_m‖₂` and
/// `C₂ = ‖y_μ‖₂`.
pub fn eq9_point<T: Real>(traj: &Trajectory<T>, j: usize, x_star: &[T]) -> Result<Eq9Point<T>> {
    let avg = trajectory_averages(traj, Some(j))?;
    Ok(eq9_from_averages(traj, &avg, avg.kstar_bar, x_star))
}

fn eq9_from_averages<T: Real>(
    traj: &Trajectory<T>,
    avg: &TrajectoryAverages<T>,
    kstar_bar: T,
    x_star: &[T],
) -> Eq9Point<T> {
    let x = &traj.x_train;
    let xm = (0..x.nrows())
        .map(|i| (0..x.ncols()).map(|c| (x[(i, c)] - x_star[c]).powi(2)).sum::<T>().sqrt())
        .fold(T::zero(), |m, d| m.max(d));
    let n = T::of_usize(x.nrows());
    let theta = traj.metric.as_ref().map_or(T::one(), |m| m.spectral_norm());
    let c1 = T::of(traj.family.k_prime_max()) * (n * theta).sqrt() * xm;
    let a = avg.inv_length_bar * c1;
    let inv_smin = if avg.smin_bar > T::zero() { T::one() / avg.smin_bar } else { T::of(f64::INFINITY) };
    let branch = Eq9Branch { inv_sigma: a <= kstar_bar, time: avg.t <= inv_smin };
    Eq9Point { bound: a.min(kstar_bar) * avg.t.min(inv_smin) * traj.y_mu_norm, branch }
}

/// One row of the combined-bound curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eq9Row<T: Real> {
    pub sigma_m: T,
    /// Median over prediction rows.
    pub bound: T,
    /// Most frequent active branch over prediction rows.
    pub branch: Eq9Branch,
}

/// Curve over a sweep of minimum bandwidths, one trajectory per `σ_m`, all
/// sharing the prediction rows `x_star`.
pub fn eq9_bound_curve<T: Real>(runs: &[(T, &Trajectory<T>)], x_star: &DMatrix<T>) -> Result<Vec<Eq9Row<T>>> {
    let mut rows = Vec::with_capacity(runs.len());
    for &(sigma_m, traj) in runs {
        if traj.n_test() != x_star.nrows() {
            return invalid("trajectory prediction rows do not match x*");
        }
        let avg = trajectory_averages(traj, None)?;
        let kbars = kstar_bars(traj)?;
        let mut bounds = Vec::with_capacity(x_star.nrows());
        let mut votes = [0usize; 4];
        for (j, &kbar) in kbars.iter().enumerate() {
            let row: Vec<T> = x_star.row(j).iter().copied().collect();
            let pt = eq9_from_averages(traj, &avg, kbar, &row);
            bounds.push(pt.bound.as_f64());
            votes[usize::from(pt.branch.inv_sigma) * 2 + usize::from(pt.branch.time)] += 1;
        }
        let best = (0..4).max_by_key(|&k| (votes[k], std::cmp::Reverse(k))).unwrap_or(0);
        let bound = crate::stats::quantile(&bounds, 0.5)?;
        rows.push(Eq9Row {
            sigma_m,
            bound: T::of(bound),
            branch: Eq9Branch { inv_sigma: best >= 2, time: best % 2 == 1 },
        });
    }
    Ok(rows)
}

/// Randomized verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lemma1,
    Prop2,
    Prop3,
    Prop4,
    Lemma5,
    Lemma7,
    Lemma8,
    Eq9,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Lemma1,
        Suite::Prop2,
        Suite::Prop3,
        Suite::Prop4,
        Suite::Lemma5,
        Suite::Lemma7,
        Suite::Lemma8,
        Suite::Eq9,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Prop2 => "prop2",
            Suite::Prop3 => "prop3",
            Suite::Prop4 => "prop4",
            Suite::Lemma5 => "lemma5",
            Suite::Lemma7 => "lemma7",
            Suite::Lemma8 => "lemma8",
            Suite::Eq9 => "eq9",
        }
    }

    /// Trial count used when none is requested.
    pub fn default_trials(self) -> usize {
        match self {
            Suite::Lemma7 => 100_000,
            Suite::Prop3 => 10,
            Suite::Lemma5 => 50,
            Suite::Eq9 => 3,
            _ => 100,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Suite {
    type Err = KgdError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .iter()
            .copied()
            .find(|k| k.id() == s)
            .ok_or_else(|| KgdError::InvalidArgument(format!("unknown suite '{s}'")))
    }
}

/// One verified inequality: `check` holds when `lhs ≤ rhs` up to the check's slack.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRecord {
    pub check: String,
    pub seed: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl VerificationRecord {
    fn from_check<T: Real>(check: &str, seed: u64, c: BoundCheck<T>) -> Self {
        Self { check: check.to_string(), seed, lhs: c.lhs.as_f64(), rhs: c.rhs.as_f64(), holds: c.holds }
    }
}

/// Keeps the worst (largest `lhs/rhs`, violations first) of several checks.
fn worst<T: Real>(checks: impl IntoIterator<Item = BoundCheck<T>>) -> Option<BoundCheck<T>> {
    checks.into_iter().fold(None, |acc, c| match acc {
        None => Some(c),
        Some(a) => {
            let key = |x: &BoundCheck<T>| (!x.holds, x.ratio());
            let (ka, kc) = (key(&a), key(&c));
            if (kc.0 && !ka.0) || (kc.0 == ka.0 && kc.1 > ka.1) {
                Some(c)
            } else {
                Some(a)
            }
        }
    })
}

/// Random design: `n ∈ [5, 30]` rows in one or two dimensions with at least
/// `1e−3` between any two rows, a smooth noisy response, and five
/// prediction rows kept `1e−3` away from the training rows.
pub fn random_instance(seed: u64) -> (Dataset<f64>, KernelFamily) {
    let mut s = SeededStream::new(seed);
    let n = 5 + s.below(26);
    let p = 1 + s.below(2);
    let family = KernelFamily::ALL[s.below(5)];
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let far = |rows: &[Vec<f64>], r: &[f64]| {
        rows.iter().all(|q| q.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() > 1e-3)
    };
    while rows.len() < n + 5 {
        let r: Vec<f64> =
            (0..p).map(|_| if rows.len() < n { s.uniform_in(-1.0, 1.0) } else { s.uniform_in(-1.5, 1.5) }).collect();
        if far(&rows, &r) {
            rows.push(r);
        }
    }
    let x = DMatrix::from_fn(n, p, |i, c| rows[i][c]);
    let xs = DMatrix::from_fn(5, p, |i, c| rows[n + i][c]);
    let freq = s.uniform_in(1.0, 4.0);
    let y = DVector::from_fn(n, |i, _| {
        let v = (freq * x[(i, 0)]).sin() + if p > 1 { 0.5 * (2.0 * x[(i, 1)]).cos() } else { 0.3 };
        v + 0.2 * s.normal()
    });
    let data = Dataset::new(x, y).and_then(|d| d.with_test(xs, None)).expect("generated data is valid");
    (data, family)
}

fn log_uniform(s: &mut SeededStream, lo: f64, hi: f64) -> f64 {
    (s.uniform_in(lo.ln(), hi.ln())).exp()
}

/// Short decreasing-bandwidth run on a random instance.
fn random_run(seed: u64, family: Option<KernelFamily>, center: bool) -> Result<(Trajectory<f64>, Dataset<f64>)> {
    let (mut data, fam) = random_instance(seed);
    if center {
        data = standardize(&data, false).0;
    }
    let mut s = SeededStream::new(derive_seed(seed, 7));
    let d = max_pairwise_distance(&data.x, None)?;
    let cfg = KgdConfig {
        v_r2: log_uniform(&mut s, 0.01, 0.5),
        sigma_min: Some(d * log_uniform(&mut s, 1e-3, 0.5)),
        t_max: log_uniform(&mut s, 1.0, 50.0),
        ..KgdConfig::default()
    };
    let traj = kgd_decreasing_bandwidth(&data, family.unwrap_or(fam), &cfg, &Prior::zero())?;
    Ok((traj, data))
}

fn lemma1_trial(seed: u64) -> Result<Vec<VerificationRecord>> {
    let (data, family) = random_instance(seed);
    let mut s = SeededStream::new(derive_seed(seed, 1));
    let spec = KernelSpec::new(family, log_uniform(&mut s, 0.05, 3.0))?;
    let t = log_uniform(&mut s, 0.1, 100.0);
    let lambda = log_uniform(&mut s, 1e-3, 10.0);
    let xs = data.x_star();
    let mut flow = Vec::new();
    let mut ridge = Vec::new();
    for j in 0..xs.nrows() {
        let row: Vec<f64> = xs.row(j).iter().copied().collect();
        let b = kgf_single_bound(&data, &spec, t, &Prior::zero(), &row)?;
        flow.push(BoundCheck::new(b.prediction_mu.abs(), b.bound, CLOSED_FORM_SLACK));
        let b = krr_single_bound(&data, &spec, lambda, &Prior::zero(), &row)?;
        ridge.push(BoundCheck::new(b.prediction_mu.abs(), b.bound, CLOSED_FORM_SLACK));
    }
    Ok(vec![
        VerificationRecord::from_check("lemma1_flow", seed, worst(flow).expect("rows")),
        VerificationRecord::from_check("lemma1_ridge", seed, worst(ridge).expect("rows")),
    ])
}

fn prop2_trial(seed: u64) -> Result<Vec<VerificationRecord>> {
    let (traj, _) = random_run(seed, None, false)?;
    let checks = (0..traj.n_test()).map(|j| check_prop2_bound(&traj, j)).collect::<Result<Vec<_>>>()?;
    Ok(vec![VerificationRecord::from_check("prop2", seed, worst(checks).expect("rows"))])
}

fn prop3_trial(seed: u64) -> Result<Vec<VerificationRecord>> {
    let (data, family) = random_instance(seed);
    let mut s = SeededStream::new(derive_seed(seed, 3));
    let t = log_uniform(&mut s, 0.1, 10.0);
    let lambda = log_uniform(&mut s, 0.01, 10.0);
    let (a, b) = (s.uniform_in(-1.0, 1.0), s.uniform_in(-1.0, 1.0));
    let prior = Prior::from_fn(move |x: &[f64]| a * x[0] + b);
    let rep = check_limits_prop3(&data, family, t, lambda, &prior)?;
    Ok(vec![VerificationRecord {
        check: "prop3".into(),
        seed,
        lhs: rep.max_deviation(),
        rhs: LIMIT_TOLERANCE,
        holds: rep.holds(),
    }])
}

fn prop4_trial(seed: u64) -> Result<Vec<VerificationRecord>> {
    let (traj, data) = random_run(seed, Some(KernelFamily::Gaussian), true)?;
    let xs = data.x_star();
    let mut grad = Vec::new();
    let mut loc = Vec::new();
    for j in 0..xs.nrows() {
        let row: Vec<f64> = xs.row(j).iter().copied().collect();
        let c = check_prop4_bounds(&traj, &row)?;
        let fd_ok = c.holds || c.pred_abs > c.pred_bound * (1.0 + BOUND_SLACK);
        grad.push(BoundCheck { lhs: c.grad_norm, rhs: c.grad_bound, holds: fd_ok });
        loc.push(BoundCheck::new(c.pred_abs, c.pred_bound, BOUND_SLACK));
    }
    Ok(vec![
        VerificationRecord::from_check("prop4_gradient", seed, worst(grad).expect("rows")),
        VerificationRecord::from_check("prop4_location", seed, worst(loc).expect("rows")),
    ])
}

fn lemma5_trial(seed: u64) -> Result<Vec<VerificationRecord>> {
    let (traj, data) = random_run(seed, None, false)?;
    let tol = 1e-10;
    // monotone R²
    let drop = traj.r2s.windows(2).map(|w| w[0] - w[1]).fold(0.0f64, f64::max);
    let mut out =
        vec![VerificationRecord { check: "lemma5_monotone".into(), seed, lhs: drop, rhs: tol, holds: drop <= tol }];
    // Rayleigh-quotient sandwich
    let mut excess = 0.0f64;
    for i in 0..traj.len() {
        if traj.r2s[i] >= 1.0 {
            continue;
        }
        let q = traj.r2_rates[i] / (2.0 * (1.0 - traj.r2s[i]));
        let seg = traj.segment_at(i);
        let scale = 1e-10 * seg.s_max.max(1.0);
        excess = excess.max(seg.s_min - q - scale).max(q - seg.s_max - scale);
    }
    out.push(VerificationRecord {
        check: "lemma5_sandwich".into(),
        seed,
        lhs: excess.max(0.0),
        rhs: 0.0,
        holds: excess <= 0.0,
    });
    // concavity at a constant kernel
    let spec = KernelSpec::new(traj.family, traj.sigma0())?;
    let flat = kgd_constant(&data, &spec, 0.01, 5.0, &Prior::zero())?;
    let curvature = flat.r2s.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).fold(f64::NEG_INFINITY, f64::max);
    out.push(VerificationRecord {
        check: "lemma5_concave".into(),
        seed,
        lhs: curvature,
        rhs: tol,
        holds: curvature <= tol,
    });
    Ok(out)
}

fn lemma7_trial(seed: u64) -> VerificationRecord {
    let mut s = SeededStream::new(seed);
    let st = 100.0 * (1.0 - s.uniform());
    let t = 100.0 * (1.0 - s.uniform());
    let lhs = phi(st, t);
    let rhs = t.min(1.0 / st);
    VerificationRecord { check: "lemma7".into(), seed, lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-15) }
}

fn lemma8_trial(seed: u64) -> Result<Vec<VerificationRecord>> {
    let (traj, _) = random_run(seed, None, false)?;
    Ok(vec![VerificationRecord::from_check("lemma8", seed, check_lemma8_contraction(&traj, BOUND_SLACK))])
}

/// Sweep of `σ_m` on a double-descent sample: the bound at an intermediate
/// `σ_m` must exceed the bound at both ends of the sweep.
fn eq9_trial(seed: u64) -> Result<Vec<VerificationRecord>> {
    let data = crate::data::Synthetic::DdSine.train_test::<f64>(0.2, 5, seed)?;
    let data = standardize(&data, false).0;
    let d = max_pairwise_distance(&data.x, None)?;
    let sweep = crate::selection::log_space(1e-4, d, 12)?;
    let mut trajs = Vec::new();
    for &sm in &sweep {
        let cfg = KgdConfig { sigma_min: Some(sm), r2_max: 1.0, t_max: 100.0, ..KgdConfig::default() };
        trajs.push(kgd_decreasing_bandwidth(&data, KernelFamily::Gaussian, &cfg, &Prior::zero())?);
    }
    let runs: Vec<(f64, &Trajectory<f64>)> = sweep.iter().copied().zip(trajs.iter()).collect();
    let rows = eq9_bound_curve(&runs, &data.x_star())?;
    let peak = rows[1..rows.len() - 1].iter().map(|r| r.bound).fold(0.0, f64::max);
    let ends = rows[0].bound.max(rows[rows.len() - 1].bound);
    Ok(vec![VerificationRecord { check: "eq9_interior_peak".into(), seed, lhs: ends, rhs: peak, holds: peak > ends }])
}

/// Runs `trials` instances of `suite`, instance `i` seeded by `derive_seed(seed, i)`.
pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<Vec<VerificationRecord>> {
    let mut out = Vec::new();
    for i in 0..trials {
        out.extend(run_trial(suite, derive_seed(seed, i as u64))?);
    }
    Ok(out)
}

/// One instance of `suite`.
pub fn run_trial(suite: Suite, seed: u64) -> Result<Vec<VerificationRecord>> {
    match suite {
        Suite::Lemma1 => lemma1_trial(seed),
        Suite::Prop2 => prop2_trial(seed),
        Suite::Prop3 => prop3_trial(seed),
        Suite::Prop4 => prop4_trial(seed),
        Suite::Lemma5 => lemma5_trial(seed),
        Suite::Lemma7 => Ok(vec![lemma7_trial(seed)]),
        Suite::Lemma8 => lemma8_trial(seed),
        Suite::Eq9 => eq9_trial(seed),
    }
}

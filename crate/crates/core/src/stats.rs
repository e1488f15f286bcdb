//! Wilcoxon signed-rank test and type-7 quantiles.

use std::fmt;

use crate::error::{invalid, KgdError, Result};

/// Largest tie-free sample for which the null distribution is enumerated exactly.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    /// `median(a − b) > 0`.
    Greater,
    Less,
    TwoSided,
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alternative::Greater => "greater",
            Alternative::Less => "less",
            Alternative::TwoSided => "two-sided",
        })
    }
}

impl std::str::FromStr for Alternative {
    type Err = KgdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            "two-sided" | "two_sided" => Ok(Alternative::TwoSided),
            _ => invalid(format!("unknown alternative '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of the ranks of the positive differences.
    pub statistic: f64,
    pub p_value: f64,
    /// Number of non-zero differences.
    pub n_effective: usize,
    pub alternative: Alternative,
    pub method: WilcoxonMethod,
}

/// Average ranks (1-based) of `v` and the sizes of the tied groups.
fn average_ranks(v: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        if j - i > 1 {
            tie_sizes.push(j - i);
        }
        i = j;
    }
    (ranks, tie_sizes)
}

/// Number of subsets of `{1, …, n}` with each possible sum `0..=n(n+1)/2`.
fn subset_sum_counts(n: usize) -> Vec<u64> {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    for k in 1..=n {
        for w in (k..=max).rev() {
            counts[w] += counts[w - k];
        }
    }
    counts
}

/// `Φ(x)` for the standard normal.
fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Paired signed-rank test of `a` against `b`.
///
/// Zero differences are dropped and tied magnitudes get average ranks. The
/// null distribution is enumerated exactly when at most [`EXACT_LIMIT`]
/// differences remain and none are tied; otherwise the normal approximation
/// with tie-corrected variance and a continuity correction of ½ is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alternative: Alternative) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return invalid(format!("paired samples differ in length: {} vs {}", a.len(), b.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return invalid("paired samples must be finite");
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|&v| v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Err(KgdError::DegenerateTest);
    }
    let mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = average_ranks(&mags);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();

    if ties.is_empty() && n <= EXACT_LIMIT {
        let counts = subset_sum_counts(n);
        let total = 2f64.powi(n as i32);
        let w = w_plus.round() as usize;
        let upper: u64 = counts[w..].iter().sum();
        let lower: u64 = counts[..=w].iter().sum();
        let p_greater = upper as f64 / total;
        let p_less = lower as f64 / total;
        let p_value = match alternative {
            Alternative::Greater => p_greater,
            Alternative::Less => p_less,
            Alternative::TwoSided => (2.0 * p_greater.min(p_less)).min(1.0),
        };
        return Ok(WilcoxonResult {
            statistic: w_plus,
            p_value,
            n_effective: n,
            alternative,
            method: WilcoxonMethod::Exact,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let sd = var.sqrt();
    let p_value = match alternative {
        Alternative::Greater => normal_cdf(-((w_plus - mean - 0.5) / sd)),
        Alternative::Less => normal_cdf((w_plus - mean + 0.5) / sd),
        Alternative::TwoSided => {
            let z = ((w_plus - mean).abs() - 0.5).max(0.0) / sd;
            (2.0 * normal_cdf(-z)).min(1.0)
        }
    };
    Ok(WilcoxonResult { statistic: w_plus, p_value, n_effective: n, alternative, method: WilcoxonMethod::NormalApprox })
}

/// Type-7 (linear interpolation) sample quantile, `p ∈ [0, 1]`.
pub fn quantile(v: &[f64], p: f64) -> Result<f64> {
    if v.is_empty() {
        return invalid("quantile of an empty sample");
    }
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("quantile level must be in [0, 1], got {p}"));
    }
    if v.iter().any(|x| x.is_nan()) {
        return invalid("sample contains NaN");
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&s, p))
}

fn sorted_quantile(s: &[f64], p: f64) -> f64 {
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// `(Q1, median, Q3)`.
pub fn quartiles(v: &[f64]) -> Result<(f64, f64, f64)> {
    quantile(v, 0.5)?;
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Ok((sorted_quantile(&s, 0.25), sorted_quantile(&s, 0.5), sorted_quantile(&s, 0.75)))
}

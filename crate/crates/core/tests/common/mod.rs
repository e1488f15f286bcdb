//! Test-side oracles written without the library's linear algebra.
#![allow(dead_code)]

use kgd_core::{Dataset64, KernelFamily, SeededStream};
use nalgebra::{DMatrix, DVector};

/// Kernel value straight from the closed forms.
pub fn kernel_formula(family: KernelFamily, d: f64, sigma: f64) -> f64 {
    match family {
        KernelFamily::Laplace => (-d / sigma).exp(),
        KernelFamily::Matern32 => (1.0 + 3f64.sqrt() * d / sigma) * (-3f64.sqrt() * d / sigma).exp(),
        KernelFamily::Matern52 => {
            (1.0 + 5f64.sqrt() * d / sigma + 5.0 * d * d / (3.0 * sigma * sigma)) * (-5f64.sqrt() * d / sigma).exp()
        }
        KernelFamily::Gaussian => (-d * d / (2.0 * sigma)).exp(),
        KernelFamily::Cauchy => 1.0 / (1.0 + d * d / (sigma * sigma)),
    }
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}

/// `k(a_i, b_j)` by double loop.
pub fn kernel_oracle(family: KernelFamily, sigma: f64, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let (ra, rb) = (rows(a), rows(b));
    ra.iter().map(|p| rb.iter().map(|q| kernel_formula(family, euclid(p, q), sigma)).collect()).collect()
}

pub fn matvec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = b[0].len();
    a.iter().map(|r| (0..m).map(|j| r.iter().zip(b).map(|(x, row)| x * row[j]).sum()).collect()).collect()
}

pub fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &v)| r.iter().copied().chain([v]).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// `exp(−tK)` by scaling and squaring of a truncated Taylor series.
pub fn expm_neg(k: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = k.len();
    let norm: f64 = k.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max) * t;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = t / 2f64.powi(squarings as i32);
    let a: Vec<Vec<f64>> = k.iter().map(|r| r.iter().map(|v| -v * scale).collect()).collect();
    let mut sum = identity(n);
    let mut term = identity(n);
    for i in 1..30 {
        term = matmul(&term, &a);
        for r in term.iter_mut() {
            for v in r.iter_mut() {
                *v /= i as f64;
            }
        }
        for (sr, tr) in sum.iter_mut().zip(&term) {
            for (s, t) in sr.iter_mut().zip(tr) {
                *s += t;
            }
        }
    }
    for _ in 0..squarings {
        sum = matmul(&sum, &sum);
    }
    sum
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Small random design with well-separated rows and a few prediction rows.
pub fn random_design(seed: u64, n: usize, p: usize, n_test: usize) -> Dataset64 {
    let mut s = SeededStream::new(seed);
    let mut pts: Vec<Vec<f64>> = Vec::new();
    while pts.len() < n + n_test {
        let r: Vec<f64> = (0..p).map(|_| s.uniform_in(-1.0, 1.0)).collect();
        if pts.iter().all(|q| euclid(q, &r) > 1e-2) {
            pts.push(r);
        }
    }
    let x = DMatrix::from_fn(n, p, |i, c| pts[i][c]);
    let xs = DMatrix::from_fn(n_test, p, |i, c| pts[n + i][c]);
    let y = DVector::from_fn(n, |i, _| (3.0 * x[(i, 0)]).sin() + 0.3 * s.normal());
    Dataset64::new(x, y).unwrap().with_test(xs, None).unwrap()
}

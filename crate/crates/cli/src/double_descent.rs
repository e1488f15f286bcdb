use anyhow::Result;
use rayon::prelude::*;

use kgd_core::bounds::{eq9_bound_curve, Eq9Branch};
use kgd_core::kernels::max_pairwise_distance;
use kgd_core::kgd::{r2, test_r2};
use kgd_core::selection::log_space;
use kgd_core::stats::quartiles;
use kgd_core::{kgd_decreasing_bandwidth, krr_fit, Dataset64, KernelFamily, KernelSpec, KgdConfig64, Prior};

use crate::output::{num, Csv};
use crate::{Cli, DoubleDescentArgs, UsageError};

/// Default sweep floor relative to the largest pairwise distance.
pub const DEFAULT_SIGMA_LO_RATIO: f64 = 1e-4;

/// Errors (as `1 − R²`) and bound for one realization at one `σ_m`.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub train_const: f64,
    pub test_const: f64,
    pub train_dec: f64,
    pub test_dec: f64,
    pub bound: f64,
    pub branch: Eq9Branch,
}

/// Ridge regression at the fixed bandwidth `σ_m` and decreasing-bandwidth
/// descent with floor `σ_m` run to `t = 1/λ`.
pub fn sweep_point(
    data: &Dataset64,
    family: KernelFamily,
    sigma_m: f64,
    lambda: f64,
    dt: f64,
    v_r2: f64,
) -> kgd_core::Result<Point> {
    let yt = data.y_test.as_ref().expect("test targets");
    let prior = Prior::zero();
    let ridge = krr_fit(data, &KernelSpec::new(family, sigma_m)?, lambda, &prior)?;
    let d = max_pairwise_distance(&data.x, None)?;
    // whole steps only, so a horizon shorter than dt needs a shorter step
    let cfg = KgdConfig64 {
        dt: dt.min(1.0 / lambda),
        v_r2,
        sigma0: Some(d.max(sigma_m)),
        sigma_min: Some(sigma_m),
        r2_max: 1.0,
        t_max: 1.0 / lambda,
        ..Default::default()
    };
    let traj = kgd_decreasing_bandwidth(data, family, &cfg, &prior)?;
    let row = eq9_bound_curve(&[(sigma_m, &traj)], &data.x_star())?[0];
    Ok(Point {
        train_const: 1.0 - r2(&data.y, &ridge.f_train)?,
        test_const: 1.0 - test_r2(yt, &ridge.f_test)?,
        train_dec: 1.0 - r2(&data.y, &traj.final_fit.f_train)?,
        test_dec: 1.0 - test_r2(yt, &traj.final_fit.f_test)?,
        bound: row.bound,
        branch: row.branch,
    })
}

/// Complexity coordinate used on the horizontal axis.
pub fn complexity(sigma_m: f64) -> f64 {
    1.0 / (sigma_m + 0.1)
}

pub fn cmd_double_descent(cli: &Cli, a: &DoubleDescentArgs) -> Result<()> {
    if a.reps == 0 || a.n_sigma == 0 {
        return Err(UsageError("--reps and --n-sigma must be at least 1".into()).into());
    }
    if !(a.lambda > 0.0 && a.lambda.is_finite()) {
        return Err(UsageError("--lambda must be positive".into()).into());
    }
    let kernels = cli.kernels(&[KernelFamily::Gaussian]);
    let [family] = kernels[..] else {
        return Err(UsageError("double-descent takes exactly one --kernel".into()).into());
    };
    let reals = a.data.realizations(a.reps, cli.seed, false)?;
    if reals.iter().any(|r| r.data.y_test.is_none()) {
        return Err(UsageError("double-descent needs test targets".into()).into());
    }
    let d = max_pairwise_distance(&reals[0].data.x, None)?;
    let hi = a.sigma_hi.unwrap_or(d);
    let lo = a.sigma_lo.unwrap_or(DEFAULT_SIGMA_LO_RATIO * d);
    let sweep = if a.n_sigma == 1 { vec![lo] } else { log_space(lo, hi, a.n_sigma)? };

    let jobs: Vec<(usize, usize)> = (0..sweep.len()).flat_map(|s| (0..reals.len()).map(move |r| (s, r))).collect();
    let points: Vec<kgd_core::Result<Point>> =
        jobs.par_iter().map(|&(s, r)| sweep_point(&reals[r].data, family, sweep[s], a.lambda, a.dt, a.v_r2)).collect();

    let stats = ["train_err_const", "test_err_const", "train_err_dec", "test_err_dec", "bound"];
    let mut header = vec!["sigma_m".to_string(), "complexity".to_string()];
    header.extend(stats.iter().map(|s| s.to_string()));
    header.push("branch".into());
    for s in stats {
        header.push(format!("{s}_q1"));
        header.push(format!("{s}_q3"));
    }
    header.push("failed".into());
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());

    for (s, &sigma_m) in sweep.iter().enumerate() {
        let ok: Vec<&Point> =
            points[s * reals.len()..(s + 1) * reals.len()].iter().filter_map(|p| p.as_ref().ok()).collect();
        let failed = reals.len() - ok.len();
        let cols: [Vec<f64>; 5] = [
            ok.iter().map(|p| p.train_const).collect(),
            ok.iter().map(|p| p.test_const).collect(),
            ok.iter().map(|p| p.train_dec).collect(),
            ok.iter().map(|p| p.test_dec).collect(),
            ok.iter().map(|p| p.bound).collect(),
        ];
        let q: Vec<Option<(f64, f64, f64)>> = cols.iter().map(|c| quartiles(c).ok()).collect();
        let cell = |v: Option<f64>| v.map_or(String::new(), num);
        let mut row = vec![num(sigma_m), num(complexity(sigma_m))];
        row.extend(q.iter().map(|q| cell(q.map(|q| q.1))));
        row.push(majority(ok.iter().map(|p| p.branch)).map_or(String::new(), |b| b.to_string()));
        for q in &q {
            row.push(cell(q.map(|q| q.0)));
            row.push(cell(q.map(|q| q.2)));
        }
        row.push(failed.to_string());
        csv.row(row);
    }
    let failed = points.iter().filter(|p| p.is_err()).count();
    if failed > 0 {
        let first = points.iter().find_map(|p| p.as_ref().err()).expect("counted");
        eprintln!("{failed} of {} runs failed; first error: {first}", points.len());
    }
    csv.write_to(cli.seed, cli.out.as_deref())
}

/// Most frequent branch; ties go to the first seen.
fn majority(branches: impl Iterator<Item = Eq9Branch>) -> Option<Eq9Branch> {
    let mut counts: Vec<(Eq9Branch, usize)> = Vec::new();
    for b in branches {
        match counts.iter_mut().find(|(c, _)| *c == b) {
            Some((_, n)) => *n += 1,
            None => counts.push((b, 1)),
        }
    }
    let best = counts.iter().map(|c| c.1).max()?;
    counts.into_iter().find(|c| c.1 == best).map(|c| c.0)
}

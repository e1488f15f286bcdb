use anyhow::Result;
use rayon::prelude::*;

use kgd_core::kgd::test_r2;
use kgd_core::stats::quartiles;
use kgd_core::{
    gcv_select, kgd_decreasing_bandwidth, krr_fit, mml_select, wilcoxon_signed_rank, Dataset64, HyperGrid,
    KernelFamily, KernelSpec, KgdConfig64, MmlOptions, Prior,
};

use crate::output::{num, Csv};
use crate::{Cli, CompareArgs, UsageError};

/// Paired samples below this size get no p-value.
pub const MIN_PAIRS: usize = 5;

pub const METHODS: [&str; 3] = ["KGD", "GCV", "MML"];

/// Test R² of the three methods on one realization; `Err` holds the failure message.
pub type Scores = [std::result::Result<f64, String>; 3];

fn kgd_r2(data: &Dataset64, family: KernelFamily, cfg: &KgdConfig64) -> kgd_core::Result<f64> {
    let traj = kgd_decreasing_bandwidth(data, family, cfg, &Prior::zero())?;
    test_r2(data.y_test.as_ref().expect("test targets"), &traj.final_fit.f_test)
}

fn ridge_r2(data: &Dataset64, family: KernelFamily, lambda: f64, sigma: f64) -> kgd_core::Result<f64> {
    let fit = krr_fit(data, &KernelSpec::new(family, sigma)?, lambda, &Prior::zero())?;
    test_r2(data.y_test.as_ref().expect("test targets"), &fit.f_test)
}

/// Runs KGD with a decreasing bandwidth, GCV-tuned and evidence-tuned ridge
/// regression on one train/test realization.
pub fn score_realization(data: &Dataset64, family: KernelFamily, cfg: &KgdConfig64) -> Scores {
    let gcv = HyperGrid::default_for(data, None)
        .and_then(|g| gcv_select(data, family, &g, None))
        .and_then(|s| ridge_r2(data, family, s.lambda, s.sigma));
    let mml = MmlOptions::default_for(data, None)
        .and_then(|o| mml_select(data, family, &o, None))
        .and_then(|s| ridge_r2(data, family, s.lambda, s.sigma));
    [kgd_r2(data, family, cfg), gcv, mml].map(|r| r.map_err(|e| e.to_string()))
}

pub fn cmd_compare(cli: &Cli, a: &CompareArgs) -> Result<()> {
    if a.reps == 0 {
        return Err(UsageError("--reps must be at least 1".into()).into());
    }
    let kernels = cli.kernels(&KernelFamily::ALL);
    let reals = a.data.realizations(a.reps, cli.seed, true)?;
    if reals.iter().any(|r| r.data.y_test.is_none()) {
        return Err(UsageError("compare needs test targets".into()).into());
    }
    let cfg = a.descent.config();
    let jobs: Vec<(usize, usize)> = (0..kernels.len()).flat_map(|k| (0..reals.len()).map(move |r| (k, r))).collect();
    let scores: Vec<Scores> =
        jobs.par_iter().map(|&(k, r)| score_realization(&reals[r].data, kernels[k], &cfg)).collect();

    let mut groups: Vec<&str> = Vec::new();
    for r in &reals {
        if !groups.contains(&r.label.as_str()) {
            groups.push(&r.label);
        }
    }

    let mut table = Csv::new(&["group", "kernel", "method", "q2", "q1", "q3", "p_value", "n"]);
    let mut raw = Csv::new(&["group", "kernel", "realization", "method", "test_r2", "status"]);
    for (k, family) in kernels.iter().enumerate() {
        for g in &groups {
            let idx: Vec<usize> = (0..reals.len()).filter(|&r| reals[r].label == *g).collect();
            let cell = |r: usize| &scores[k * reals.len() + r];
            for (i, &r) in idx.iter().enumerate() {
                for (m, name) in METHODS.iter().enumerate() {
                    let (v, status) = match &cell(r)[m] {
                        Ok(v) => (num(*v), "ok".to_string()),
                        Err(e) => (String::new(), format!("failed: {}", e.replace([',', '\n'], ";"))),
                    };
                    raw.row([g.to_string(), family.to_string(), i.to_string(), name.to_string(), v, status]);
                }
            }
            for (m, name) in METHODS.iter().enumerate() {
                let vals: Vec<f64> = idx.iter().filter_map(|&r| cell(r)[m].as_ref().ok().copied()).collect();
                let (q1, q2, q3) = match quartiles(&vals) {
                    Ok(q) => (num(q.0), num(q.1), num(q.2)),
                    Err(_) => Default::default(),
                };
                let (p, n) = if m == 0 {
                    ("-".to_string(), vals.len())
                } else {
                    // pairs where both methods produced a score
                    let (kgd, base): (Vec<f64>, Vec<f64>) = idx
                        .iter()
                        .filter_map(|&r| match (&cell(r)[0], &cell(r)[m]) {
                            (Ok(x), Ok(y)) => Some((*x, *y)),
                            _ => None,
                        })
                        .unzip();
                    (p_value(&kgd, &base, a.alternative), kgd.len())
                };
                table.row([g.to_string(), family.to_string(), name.to_string(), q2, q1, q3, p, n.to_string()]);
            }
        }
    }
    table.write_to(cli.seed, cli.out.as_deref())?;
    if let Some(path) = &a.raw {
        raw.write_to(cli.seed, Some(path))?;
    }
    Ok(())
}

fn p_value(a: &[f64], b: &[f64], alt: kgd_core::Alternative) -> String {
    match wilcoxon_signed_rank(a, b, alt) {
        Ok(w) if w.n_effective >= MIN_PAIRS => num(w.p_value),
        _ => "insufficient-n".into(),
    }
}

use anyhow::Result;
use rayon::prelude::*;

use kgd_core::bounds::{random_instance, run_trial, Suite, VerificationRecord};
use kgd_core::derive_seed;

use crate::output::{num, Csv};
use crate::{Cli, VerificationFailed, VerifyArgs};

/// Records of `trials` instances of `suite`, in trial order.
pub fn verify_suite(suite: Suite, trials: usize, seed: u64) -> kgd_core::Result<Vec<VerificationRecord>> {
    let per_trial: Vec<kgd_core::Result<Vec<VerificationRecord>>> =
        (0..trials).into_par_iter().map(|i| run_trial(suite, derive_seed(seed, i as u64))).collect();
    let mut out = Vec::new();
    for r in per_trial {
        out.extend(r?);
    }
    Ok(out)
}

pub fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> Result<()> {
    let suites = if a.suite.is_empty() { Suite::ALL.to_vec() } else { a.suite.clone() };
    let mut csv = Csv::new(&["check", "seed", "lhs", "rhs", "holds"]);
    let mut violations = Vec::new();
    for suite in suites {
        let trials = a.trials.unwrap_or(suite.default_trials());
        for r in verify_suite(suite, trials, cli.seed)? {
            csv.row([r.check.clone(), r.seed.to_string(), num(r.lhs), num(r.rhs), r.holds.to_string()]);
            if !r.holds {
                violations.push((suite, r));
            }
        }
    }
    csv.write_to(cli.seed, cli.out.as_deref())?;
    for (suite, r) in &violations {
        eprintln!("violated: {} seed={} lhs={:e} rhs={:e}", r.check, r.seed, r.lhs, r.rhs);
        if !matches!(suite, Suite::Lemma7 | Suite::Eq9) {
            dump_instance(r.seed);
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(VerificationFailed(violations.len()).into())
    }
}

fn dump_instance(seed: u64) {
    let (data, family) = random_instance(seed);
    eprintln!("  kernel={family} n={} p={}", data.n(), data.p());
    for i in 0..data.n() {
        let x: Vec<String> = data.x.row(i).iter().map(|v| format!("{v:e}")).collect();
        eprintln!("  x=[{}] y={:e}", x.join(" "), data.y[i]);
    }
    let xs = data.x_star();
    for j in 0..data.n_test() {
        let x: Vec<String> = xs.row(j).iter().map(|v| format!("{v:e}")).collect();
        eprintln!("  x*=[{}]", x.join(" "));
    }
}

mod common;

use common::random_design;
use kgd_core::bounds::{
    check_limits_prop3, check_prop2_bound, check_prop4_bounds, eq9_bound_curve, eq9_point, kstar_bars, run_suite,
    trajectory_averages, Suite,
};
use kgd_core::data::standardize;
use kgd_core::kernels::max_pairwise_distance;
use kgd_core::selection::log_space;
use kgd_core::{kgd_decreasing_bandwidth, KernelFamily, KgdConfig64, Prior, Synthetic, Trajectory64};

fn failures(suite: Suite, trials: usize, seed: u64) -> Vec<String> {
    run_suite(suite, trials, seed)
        .unwrap()
        .into_iter()
        .filter(|r| !r.holds)
        .map(|r| format!("{} seed={} lhs={} rhs={}", r.check, r.seed, r.lhs, r.rhs))
        .collect()
}

#[test]
fn randomized_suites_hold() {
    for (suite, trials) in [
        (Suite::Lemma1, 30),
        (Suite::Prop2, 20),
        (Suite::Prop3, 10),
        (Suite::Prop4, 20),
        (Suite::Lemma5, 10),
        (Suite::Lemma7, 10_000),
        (Suite::Lemma8, 20),
    ] {
        let f = failures(suite, trials, 99);
        assert!(f.is_empty(), "{suite}: {f:?}");
    }
}

#[test]
fn suite_names_round_trip() {
    for s in Suite::ALL {
        assert_eq!(s.id().parse::<Suite>().unwrap(), s);
    }
    assert!("lemma9".parse::<Suite>().is_err());
}

fn sample_run(seed: u64, family: KernelFamily) -> (Trajectory64, kgd_core::Dataset64) {
    let data = standardize(&random_design(seed, 20, 1, 5), false).0;
    let d = max_pairwise_distance(&data.x, None).unwrap();
    let cfg = KgdConfig64 { sigma_min: Some(0.01 * d), t_max: 30.0, ..Default::default() };
    (kgd_decreasing_bandwidth(&data, family, &cfg, &Prior::zero()).unwrap(), data)
}

#[test]
fn trajectory_averages_stay_in_range() {
    for (i, family) in KernelFamily::ALL.into_iter().enumerate() {
        let (traj, data) = sample_run(2200 + i as u64, family);
        let s_max = traj.segments.iter().map(|s| s.s_max).fold(0.0, f64::max);
        for j in 0..traj.n_test() {
            let a = trajectory_averages(&traj, Some(j)).unwrap();
            assert!(a.kstar_bar >= 0.0 && a.kstar_bar <= (data.n() as f64).sqrt() + 1e-9);
            assert!(a.smin_bar >= 0.0 && a.smin_bar <= s_max);
            let sig = (traj.sigma_final(), traj.sigma0());
            assert!(a.inv_sigma_bar >= 1.0 / sig.1 - 1e-12 && a.inv_sigma_bar <= 1.0 / sig.0 + 1e-12);
            assert!(check_prop2_bound(&traj, j).unwrap().holds);
        }
    }
}

#[test]
fn batched_kernel_norm_averages_match_per_row() {
    for (i, family) in KernelFamily::ALL.into_iter().enumerate() {
        let (traj, data) = sample_run(2250 + i as u64, family);
        let all = kstar_bars(&traj).unwrap();
        let rows = eq9_bound_curve(&[(traj.sigma_final(), &traj)], &data.x_star()).unwrap();
        let mut per_row = Vec::new();
        for (j, &kb) in all.iter().enumerate() {
            let one = trajectory_averages(&traj, Some(j)).unwrap().kstar_bar;
            assert!((kb - one).abs() <= 1e-12 * one.max(1.0), "{family} row {j}: {kb} vs {one}");
            let x: Vec<f64> = data.x_star().row(j).iter().copied().collect();
            per_row.push(eq9_point(&traj, j, &x).unwrap().bound);
        }
        per_row.sort_by(f64::total_cmp);
        let median = kgd_core::stats::quantile(&per_row, 0.5).unwrap();
        assert!((rows[0].bound - median).abs() <= 1e-10 * median.max(1.0));
    }
}

#[test]
fn constant_bandwidth_average_is_the_inverse_bandwidth() {
    let data = random_design(2300, 15, 1, 2);
    let spec = kgd_core::KernelSpec::new(KernelFamily::Cauchy, 0.4).unwrap();
    let traj = kgd_core::kgd_constant(&data, &spec, 0.01, 3.0, &Prior::zero()).unwrap();
    let a = trajectory_averages(&traj, Some(0)).unwrap();
    assert!((a.inv_sigma_bar - 2.5).abs() < 1e-12);
    assert!((a.smin_bar - traj.smins[0]).abs() < 1e-12);
}

#[test]
fn short_trajectories_are_rejected() {
    let data = random_design(2400, 10, 1, 1);
    let spec = kgd_core::KernelSpec::new(KernelFamily::Cauchy, 0.4).unwrap();
    let traj = kgd_core::kgd_constant(&data, &spec, 0.01, 0.01, &Prior::zero()).unwrap();
    assert_eq!(traj.len(), 2);
    assert!(trajectory_averages(&traj, Some(0)).is_ok());
    let mut one = traj.clone();
    one.times.truncate(1);
    assert!(trajectory_averages(&one, Some(0)).is_err());
}

#[test]
fn gradient_bound_holds_for_every_family() {
    for (i, family) in KernelFamily::ALL.into_iter().enumerate() {
        let (traj, data) = sample_run(2500 + i as u64, family);
        for r in 0..data.n_test() {
            let x: Vec<f64> = data.x_star().row(r).iter().copied().collect();
            let c = check_prop4_bounds(&traj, &x).unwrap();
            assert!(c.grad_norm <= c.grad_bound * (1.0 + 1e-4) + 1e-6, "{family}: {c:?}");
        }
    }
}

#[test]
fn limit_identities_hold_with_a_prior() {
    let data = random_design(2600, 12, 2, 4);
    let prior = Prior::from_fn(|x: &[f64]| x[0] - 0.5 * x[1]);
    for family in KernelFamily::ALL {
        let rep = check_limits_prop3(&data, family, 2.0, 0.5, &prior).unwrap();
        assert!(rep.holds(), "{family}: {rep:?}");
    }
}

#[test]
fn combined_bound_has_an_interior_peak_and_switches_branch() {
    let data = standardize(&Synthetic::DdSine.train_test::<f64>(0.2, 5, 3).unwrap(), false).0;
    let d = max_pairwise_distance(&data.x, None).unwrap();
    let sweep = log_space(1e-4, d, 12).unwrap();
    let trajs: Vec<Trajectory64> = sweep
        .iter()
        .map(|&sm| {
            let cfg = KgdConfig64 { sigma_min: Some(sm), r2_max: 1.0, t_max: 100.0, ..Default::default() };
            kgd_decreasing_bandwidth(&data, KernelFamily::Gaussian, &cfg, &Prior::zero()).unwrap()
        })
        .collect();
    let runs: Vec<(f64, &Trajectory64)> = sweep.iter().copied().zip(trajs.iter()).collect();
    let rows = eq9_bound_curve(&runs, &data.x_star()).unwrap();
    let peak = rows[1..rows.len() - 1].iter().map(|r| r.bound).fold(0.0, f64::max);
    assert!(peak > rows[0].bound && peak > rows[rows.len() - 1].bound, "{rows:?}");
    let big = rows.last().unwrap().branch;
    assert!(big.inv_sigma, "largest σ_m: {big}");
    let small = rows[0].branch;
    assert!(!small.inv_sigma && !small.time, "smallest σ_m: {small}");
}

mod common;

use common::{kernel_oracle, matvec, random_design, to_vec};
use kgd_core::bounds::check_lemma8_contraction;
use kgd_core::kernels::max_pairwise_distance;
use kgd_core::{
    kgd_constant, kgd_decreasing_bandwidth, kgf_fit, KernelFamily, KernelSpec, KgdConfig64, Prior, StopReason,
};

/// Decreasing-bandwidth descent written out step by step with dense
/// kernel matrices.
fn naive_run(data: &kgd_core::Dataset64, family: KernelFamily, cfg: &KgdConfig64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let y = to_vec(&data.y);
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let xs = data.x_star();
    let mut sigma = cfg.sigma0.unwrap();
    let sigma_min = cfg.sigma_min.unwrap();
    let mut f = vec![0.0; n];
    let mut fs = vec![0.0; xs.nrows()];
    let mut sigmas = Vec::new();
    let rate = |k: &[Vec<f64>], r: &[f64]| 2.0 * r.iter().zip(matvec(k, r)).map(|(a, b)| a * b).sum::<f64>() / sst;
    let mut k = kernel_oracle(family, sigma, &data.x, &data.x);
    let steps = (cfg.t_max / cfg.dt).round() as usize;
    for _ in 0..steps {
        let r: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
        let r2 = 1.0 - r.iter().map(|v| v * v).sum::<f64>() / sst;
        if r2 >= cfg.r2_max {
            break;
        }
        if rate(&k, &r) < cfg.v_r2 && sigma > sigma_min {
            loop {
                sigma *= cfg.decay;
                if sigma <= sigma_min {
                    sigma = sigma_min;
                    k = kernel_oracle(family, sigma, &data.x, &data.x);
                    break;
                }
                k = kernel_oracle(family, sigma, &data.x, &data.x);
                if rate(&k, &r) >= cfg.v_r2 {
                    break;
                }
            }
        }
        sigmas.push(sigma);
        let ks = kernel_oracle(family, sigma, &xs, &data.x);
        let kr = matvec(&k, &r);
        let ksr = matvec(&ks, &r);
        for (fi, d) in f.iter_mut().zip(kr) {
            *fi += cfg.dt * d;
        }
        for (fi, d) in fs.iter_mut().zip(ksr) {
            *fi += cfg.dt * d;
        }
    }
    (f, fs, sigmas)
}

#[test]
fn eigenbasis_run_matches_naive_algorithm() {
    for (i, family) in KernelFamily::ALL.into_iter().enumerate() {
        let data = random_design(800 + i as u64, 12, 1, 4);
        let d = max_pairwise_distance(&data.x, None).unwrap();
        let cfg = KgdConfig64 {
            sigma0: Some(d),
            sigma_min: Some(0.05 * d),
            t_max: 3.0,
            r2_max: 0.97,
            decay: 0.95,
            ..Default::default()
        };
        let traj = kgd_decreasing_bandwidth(&data, family, &cfg, &Prior::zero()).unwrap();
        let (f, fs, sigmas) = naive_run(&data, family, &cfg);
        let got: Vec<f64> = traj.sigmas[..sigmas.len()].to_vec();
        assert_eq!(got, sigmas, "{family}: bandwidth schedules differ");
        let ft = to_vec(&traj.final_fit.f_train);
        let fst = to_vec(&traj.final_fit.f_test);
        for (a, b) in ft.iter().zip(&f).chain(fst.iter().zip(&fs)) {
            assert!((a - b).abs() < 1e-9, "{family}: {a} vs {b}");
        }
    }
}

#[test]
fn constant_descent_converges_to_flow_at_first_order() {
    for (i, family) in KernelFamily::ALL.into_iter().enumerate() {
        let data = random_design(900 + i as u64, 20, 2, 5);
        let spec = KernelSpec::new(family, 0.5).unwrap();
        let t = 2.0;
        let flow = kgf_fit(&data, &spec, t, &Prior::zero()).unwrap();
        let mut errs = Vec::new();
        for dt in [0.04, 0.02, 0.01] {
            let run = kgd_constant(&data, &spec, dt, t, &Prior::zero()).unwrap();
            let e = (&run.final_fit.f_train - &flow.f_train).amax().max((&run.final_fit.f_test - &flow.f_test).amax());
            errs.push(e);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.7..2.3).contains(&ratio), "{family}: error ratio {ratio} ({errs:?})");
        }
        assert!(errs[2] <= 0.01 * data.y.norm());
    }
}

#[test]
fn r2_is_monotone_and_schedule_is_non_increasing() {
    for seed in 0..20u64 {
        let family = KernelFamily::ALL[seed as usize % 5];
        let data = random_design(1000 + seed, 25, 1, 3);
        let d = max_pairwise_distance(&data.x, None).unwrap();
        let cfg = KgdConfig64 { sigma_min: Some(1e-3 * d), t_max: 20.0, ..Default::default() };
        let traj = kgd_decreasing_bandwidth(&data, family, &cfg, &Prior::zero()).unwrap();
        for (i, w) in traj.r2s.windows(2).enumerate() {
            if cfg.dt < 1.0 / traj.segment_at(i).s_max {
                assert!(w[1] >= w[0] - 1e-10, "seed {seed}: R² fell at record {i}");
            }
        }
        for w in traj.sigmas.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(traj.sigmas.iter().all(|&s| s >= 1e-3 * d));
        assert!(traj.final_r2() >= 0.99 || traj.stop == StopReason::TimeLimit);
        let c = check_lemma8_contraction(&traj, 1e-6);
        assert!(c.holds, "seed {seed}: {c:?}");
    }
}

#[test]
fn constant_kernel_r2_is_concave() {
    for (i, family) in KernelFamily::ALL.into_iter().enumerate() {
        let data = random_design(1100 + i as u64, 20, 2, 1);
        let spec = KernelSpec::new(family, 0.8).unwrap();
        let run = kgd_constant(&data, &spec, 0.005, 10.0, &Prior::zero()).unwrap();
        for w in run.r2s.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-10, "{family}");
        }
        assert!(run.sigmas.iter().all(|&s| s == 0.8));
    }
}

#[test]
fn trajectory_csv_has_one_row_per_record() {
    let data = random_design(1200, 15, 1, 2);
    let traj = kgd_decreasing_bandwidth(
        &data,
        KernelFamily::Cauchy,
        &KgdConfig64 { t_max: 1.0, ..Default::default() },
        &Prior::zero(),
    )
    .unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "step,t,sigma,r2,dr2dt,residual_norm,smin");
    assert_eq!(lines.count(), traj.len());
}

#[test]
fn predictor_reproduces_final_test_predictions() {
    let data = random_design(1300, 18, 2, 6);
    let traj =
        kgd_decreasing_bandwidth(&data, KernelFamily::Matern52, &KgdConfig64::default(), &Prior::zero()).unwrap();
    let p = traj.predict_mu(&data.x_star()).unwrap();
    assert!((p - &traj.final_fit.f_test).amax() < 1e-10);
    let p = traj.predict_mu(&data.x).unwrap();
    assert!((p - &traj.final_fit.f_train).amax() < 1e-8);
}

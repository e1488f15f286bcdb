use std::path::PathBuf;

use anyhow::{Context, Result};
use kgd_core::kgd::{r2, test_r2};
use kgd_core::{
    kgd_constant, kgd_decreasing_bandwidth, kgf_fit, krr_fit, Dataset64, FitResult64, KernelFamily, KernelSpec, Prior,
    Trajectory64,
};

use crate::output::{num, Csv};
use crate::{Cli, FitArgs, Method, UsageError};

fn required(method: Method) -> &'static [&'static str] {
    match method {
        Method::KgdDec => &[],
        Method::KgdConst => &["--sigma", "--t"],
        Method::Krr => &["--lambda", "--sigma"],
        Method::Kgf => &["--sigma", "--t"],
    }
}

fn check_flags(a: &FitArgs) -> Result<(), UsageError> {
    let given = |flag: &str| match flag {
        "--sigma" => a.sigma.is_some(),
        "--t" => a.t.is_some(),
        "--lambda" => a.lambda.is_some(),
        _ => unreachable!(),
    };
    let need = required(a.method);
    let missing: Vec<&str> = need.iter().copied().filter(|f| !given(f)).collect();
    if missing.is_empty() {
        return Ok(());
    }
    let name = clap::ValueEnum::to_possible_value(&a.method).expect("no skipped variants");
    Err(UsageError(format!(
        "--method {} requires {} (missing {})",
        name.get_name(),
        need.join(", "),
        missing.join(", ")
    )))
}

pub fn cmd_fit(cli: &Cli, a: &FitArgs) -> Result<()> {
    check_flags(a)?;
    let kernels = cli.kernels(&[KernelFamily::Gaussian]);
    let [family] = kernels[..] else {
        return Err(UsageError("fit takes exactly one --kernel".into()).into());
    };
    let data = a.data.single(cli.seed)?;
    let prior = Prior::zero();
    let spec = |s: f64| KernelSpec::new(family, s);

    let (fit, traj): (FitResult64, Option<Trajectory64>) = match a.method {
        Method::KgdDec => {
            let t = kgd_decreasing_bandwidth(&data, family, &a.descent.config(), &prior)?;
            (t.final_fit.clone(), Some(t))
        }
        Method::KgdConst => {
            let t = kgd_constant(&data, &spec(a.sigma.unwrap())?, a.descent.dt, a.t.unwrap(), &prior)?;
            (t.final_fit.clone(), Some(t))
        }
        Method::Krr => (krr_fit(&data, &spec(a.sigma.unwrap())?, a.lambda.unwrap(), &prior)?, None),
        Method::Kgf => (kgf_fit(&data, &spec(a.sigma.unwrap())?, a.t.unwrap(), &prior)?, None),
    };

    predictions_csv(&data, &fit).write_to(cli.seed, cli.out.as_deref())?;
    if let Some(traj) = traj {
        let path = a.trajectory.clone().or_else(|| cli.out.as_ref().map(|o| trajectory_path(o)));
        if let Some(path) = path {
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)?;
            Csv::raw(String::from_utf8(buf)?)
                .write_to(cli.seed, Some(&path))
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }

    let train = r2(&data.y, &fit.f_train)?;
    match &data.y_test {
        Some(yt) => eprintln!("train_r2={train} test_r2={}", test_r2(yt, &fit.f_test)?),
        None => eprintln!("train_r2={train}"),
    }
    Ok(())
}

fn trajectory_path(out: &std::path::Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".trajectory.csv");
    PathBuf::from(s)
}

fn predictions_csv(data: &Dataset64, fit: &FitResult64) -> Csv {
    let mut header = vec!["set".to_string(), "row".to_string()];
    header.extend((1..=data.p()).map(|c| format!("x{c}")));
    header.extend(["y".to_string(), "prediction".to_string()]);
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    let mut emit =
        |set: &str, x: &nalgebra::DMatrix<f64>, y: Option<&nalgebra::DVector<f64>>, f: &nalgebra::DVector<f64>| {
            for i in 0..x.nrows() {
                let mut cells = vec![set.to_string(), i.to_string()];
                cells.extend(x.row(i).iter().map(|&v| num(v)));
                cells.push(y.map_or(String::new(), |y| num(y[i])));
                cells.push(num(f[i]));
                csv.row(cells);
            }
        };
    emit("train", &data.x, Some(&data.y), &fit.f_train);
    if let Some(xt) = &data.x_test {
        emit("test", xt, data.y_test.as_ref(), &fit.f_test);
    }
    csv
}

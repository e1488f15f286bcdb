//! `--data` URIs: `gen:<name>[?noise=..&test=..]` or `csv:<path>?x=a,b&y=c[&group=col]`.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Result;
use kgd_core::data::{kfold_split, load_csv, standardize, DEFAULT_NOISE_SD};
use kgd_core::{Dataset64, Synthetic};

use crate::UsageError;

/// Folds used when a CSV file has to be split into train and test rows.
pub const CSV_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Generated {
        design: Synthetic,
        noise: f64,
        /// Test set size as a multiple of the training size.
        test_scale: usize,
    },
    Csv {
        path: PathBuf,
        x: Vec<String>,
        y: String,
        group: Option<String>,
    },
}

/// One train/test realization together with the group it belongs to.
pub struct Realization {
    pub label: String,
    pub data: Dataset64,
}

impl FromStr for DataSource {
    type Err = UsageError;

    fn from_str(s: &str) -> std::result::Result<Self, UsageError> {
        let bad = |m: String| UsageError(format!("--data {s}: {m}"));
        let (scheme, rest) = s.split_once(':').ok_or_else(|| bad("expected gen:<name> or csv:<path>".into()))?;
        let (body, query) = rest.split_once('?').unwrap_or((rest, ""));
        let mut params = Vec::new();
        for kv in query.split('&').filter(|p| !p.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("malformed parameter '{kv}'")))?;
            params.push((k, v));
        }
        match scheme {
            "gen" => {
                let design = Synthetic::parse(body)
                    .ok_or_else(|| bad(format!("unknown design '{body}' (linear-sine, two-freq, dd-sine)")))?;
                let (mut noise, mut test_scale) = (DEFAULT_NOISE_SD, 5);
                for (k, v) in params {
                    match k {
                        "noise" => noise = v.parse().map_err(|_| bad(format!("noise '{v}' is not a number")))?,
                        "test" => test_scale = v.parse().map_err(|_| bad(format!("test '{v}' is not an integer")))?,
                        _ => return Err(bad(format!("unknown parameter '{k}'"))),
                    }
                }
                if !(noise >= 0.0 && noise.is_finite()) || test_scale == 0 {
                    return Err(bad("noise must be non-negative and test positive".into()));
                }
                Ok(DataSource::Generated { design, noise, test_scale })
            }
            "csv" => {
                if body.is_empty() {
                    return Err(bad("missing path".into()));
                }
                let (mut x, mut y, mut group) = (Vec::new(), None, None);
                for (k, v) in params {
                    match k {
                        "x" => x = v.split(',').filter(|c| !c.is_empty()).map(String::from).collect(),
                        "y" => y = Some(v.to_string()),
                        "group" => group = Some(v.to_string()),
                        _ => return Err(bad(format!("unknown parameter '{k}'"))),
                    }
                }
                let y = y.ok_or_else(|| bad("missing y=<column>".into()))?;
                if x.is_empty() {
                    return Err(bad("missing x=<col,...>".into()));
                }
                Ok(DataSource::Csv { path: body.into(), x, y, group })
            }
            _ => Err(bad(format!("unknown scheme '{scheme}'"))),
        }
    }
}

impl DataSource {
    pub fn is_generated(&self) -> bool {
        matches!(self, DataSource::Generated { .. })
    }

    /// A single train/test pair: the first realization of the first group.
    pub fn single(&self, seed: u64) -> Result<Dataset64> {
        Ok(self.realizations(1, seed, false)?.swap_remove(0).data)
    }

    /// `reps` independent draws for generated data. For CSV data, every fold
    /// of every group, or only the first fold when `every_fold` is false;
    /// responses are then centered at the training mean.
    pub fn realizations(&self, reps: usize, seed: u64, every_fold: bool) -> Result<Vec<Realization>> {
        match self {
            DataSource::Generated { design, noise, test_scale } => (0..reps)
                .map(|r| {
                    let data = design.train_test(*noise, *test_scale, kgd_core::derive_seed(seed, r as u64))?;
                    Ok(Realization { label: "all".into(), data })
                })
                .collect(),
            DataSource::Csv { .. } => {
                let mut out = Vec::new();
                for (label, data) in self.load_groups()? {
                    let splits = kfold_split(&data, CSV_FOLDS, seed)?;
                    let take = if every_fold { splits.len() } else { 1 };
                    for split in splits.into_iter().take(take) {
                        let data = standardize(&split.combined(), false).0;
                        out.push(Realization { label: label.clone(), data });
                    }
                }
                Ok(out)
            }
        }
    }

    /// CSV rows, partitioned by the group column in order of first appearance.
    fn load_groups(&self) -> Result<Vec<(String, Dataset64)>> {
        let DataSource::Csv { path, x, y, group } = self else { unreachable!("only called for CSV sources") };
        let xs: Vec<&str> = x.iter().map(String::as_str).collect();
        let keep: Vec<&str> = group.iter().map(String::as_str).collect();
        let loaded = load_csv::<f64>(path, &xs, y, &keep)?;
        if loaded.dropped > 0 {
            eprintln!("{}: skipped {} rows with an empty '{y}'", path.display(), loaded.dropped);
        }
        let Some(g) = group else {
            return Ok(vec![("all".into(), loaded.data)]);
        };
        let labels = &loaded.extra[g];
        let mut order: Vec<&String> = Vec::new();
        for l in labels {
            if !order.contains(&l) {
                order.push(l);
            }
        }
        Ok(order
            .into_iter()
            .map(|l| {
                let idx: Vec<usize> = (0..labels.len()).filter(|&i| &labels[i] == l).collect();
                (l.clone(), loaded.data.subset(&idx))
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_uris() {
        let g: DataSource = "gen:two-freq?noise=0".parse().unwrap();
        assert_eq!(g, DataSource::Generated { design: Synthetic::TwoFreq, noise: 0.0, test_scale: 5 });
        let c: DataSource = "csv:t.csv?x=east,north&y=temp&group=day".parse().unwrap();
        assert!(
            matches!(c, DataSource::Csv { ref x, ref group, .. } if x.len() == 2 && group.as_deref() == Some("day"))
        );
        for bad in ["gen:sine", "csv:t.csv?x=a", "csv:t.csv?y=a", "ftp:x", "gen:dd-sine?noise=-1", "gen:dd-sine?foo=1"]
        {
            assert!(bad.parse::<DataSource>().is_err(), "{bad}");
        }
    }
}

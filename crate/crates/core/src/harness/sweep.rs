use std::fmt::Write as _;

use super::{train, TrainConfig, TrainOutputs};
use crate::data::Corpus;
use crate::error::{Error, Result};
use crate::model::Variant;

pub const SWEEP_CSV_HEADER: &str = "setting,mean_top1,std_top1,runs";

/// One training run: `fraction` is `None` for the vanilla baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRun {
    pub fraction: Option<f64>,
    pub seed: u64,
    pub top1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub fraction: Option<f64>,
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub std: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub runs: Vec<SweepRun>,
    pub summary: Vec<SweepSummary>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl SweepTable {
    /// Summarizes `runs` per setting, in order of first appearance.
    pub fn from_runs(runs: Vec<SweepRun>) -> Self {
        let mut settings: Vec<Option<f64>> = Vec::new();
        for r in &runs {
            if !settings.contains(&r.fraction) {
                settings.push(r.fraction);
            }
        }
        let summary = settings
            .into_iter()
            .map(|fraction| {
                let xs: Vec<f64> = runs
                    .iter()
                    .filter(|r| r.fraction == fraction)
                    .map(|r| r.top1)
                    .collect();
                let (mean, std) = mean_std(&xs);
                SweepSummary {
                    fraction,
                    mean,
                    std,
                    runs: xs.len(),
                }
            })
            .collect();
        Self { runs, summary }
    }

    pub fn get(&self, fraction: Option<f64>) -> Option<&SweepSummary> {
        self.summary.iter().find(|s| s.fraction == fraction)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{SWEEP_CSV_HEADER}\n");
        for s in &self.summary {
            let setting = s
                .fraction
                .map_or("vanilla".to_string(), |f| format!("{f:.2}"));
            let _ = writeln!(out, "{setting},{:.6},{:.6},{}", s.mean, s.std, s.runs);
        }
        out
    }
}

/// Trains GoCNN for every `(fraction, seed)` pair plus a vanilla twin per
/// seed. Images stay fixed: only which training samples keep their masks
/// changes, chosen per class with `seed`. Each run reports the validation
/// main-head top-1 of its best checkpoint.
pub fn sweep_privileged(
    base: &TrainConfig,
    train_set: &Corpus,
    val_set: &Corpus,
    fractions: &[f64],
    seeds: &[u64],
) -> Result<SweepTable> {
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::Config(format!(
            "privileged fraction {f} is outside [0,1]"
        )));
    }
    let mut runs = Vec::new();
    for &seed in seeds {
        for &fraction in fractions {
            let corpus = train_set.with_privileged_fraction(fraction, seed)?;
            let mut config = base.clone();
            config.seed = seed;
            config.model.variant = Variant::Full;
            let outcome = train(&config, &corpus, val_set, &TrainOutputs::default())?;
            runs.push(SweepRun {
                fraction: Some(fraction),
                seed,
                top1: outcome.best_val.top1_main,
            });
        }
        let mut config = base.clone();
        config.seed = seed;
        config.model.variant = Variant::Vanilla;
        let outcome = train(&config, train_set, val_set, &TrainOutputs::default())?;
        runs.push(SweepRun {
            fraction: None,
            seed,
            top1: outcome.best_val.top1_main,
        });
    }

    Ok(SweepTable::from_runs(runs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }
}

//! Training loop, evaluation, experiment protocols and exports.

mod sweep;
mod train;
pub mod visualize;

use std::fmt;
use std::path::Path;

pub use sweep::{mean_std, sweep_privileged, SweepRun, SweepSummary, SweepTable, SWEEP_CSV_HEADER};
pub use train::{
    evaluate, train, train_model, Evaluation, PlateauSchedule, TrainOutcome, TrainOutputs,
};
pub use visualize::{visualize_groups, Heatmap};

use crate::error::{Error, Result};
use crate::model::{parse_key_values, GoCnnConfig};
use crate::optim::SgdConfig;

pub const METRICS_CSV_HEADER: &str =
    "epoch,split,head,top1,loss_main,loss_fg,loss_bg,loss_sup_fg,loss_sup_bg,zeta,zeta_group,seconds";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: GoCnnConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Epochs without a `min_delta` gain in validation top-1 before the
    /// learning rate is divided by 10.
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
    /// Record wall time in the metrics. Off gives byte-identical CSVs.
    pub timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: GoCnnConfig::default(),
            epochs: 20,
            batch_size: 32,
            lr: 0.05,
            momentum: 0.9,
            weight_decay: 1e-4,
            patience: 5,
            min_delta: 0.002,
            seed: 0,
            timing: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        self.sgd().validate()
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
        }
    }

    /// Sets one `key = value` option.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            value
                .parse()
                .map_err(|e| Error::Config(format!("`{key} = {value}`: {e}")))
        }
        let m = &mut self.model;
        match key {
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" | "batch" => self.batch_size = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "momentum" => self.momentum = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "min_delta" => self.min_delta = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "timing" => self.timing = num(key, value)?,
            "mode" => m.variant = value.parse()?,
            "classes" => m.classes = num(key, value)?,
            "architecture" => m.architecture = value.parse()?,
            "classification" => m.classification = value.parse()?,
            "suppression" => m.suppression = num(key, value)?,
            "w_main" => m.weights.main = num(key, value)?,
            "w_fg" => m.weights.fg = num(key, value)?,
            "w_bg" => m.weights.bg = num(key, value)?,
            "w_sup" => m.weights.suppression = num(key, value)?,
            "group_ratio" => {
                let (a, b) = value
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("group_ratio `{value}` is not a:b")))?;
                m.group_ratio = (num(key, a.trim())?, num(key, b.trim())?);
            }
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every line of a `key = value` file.
    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (k, v) in parse_key_values(&text)? {
            self.apply(&k, &v)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Head {
    Main,
    Fg,
    Bg,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::Main, Head::Fg, Head::Bg];
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Head::Main => "main",
            Head::Fg => "fg",
            Head::Bg => "bg",
        })
    }
}

/// A reported number, or an explicit marker for a head the model lacks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    Value(f64),
    Absent,
}

impl Metric {
    pub fn value(self) -> Option<f64> {
        match self {
            Metric::Value(v) => Some(v),
            Metric::Absent => None,
        }
    }

    pub fn is_absent(self) -> bool {
        self == Metric::Absent
    }
}

impl From<Option<f64>> for Metric {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Metric::Absent, Metric::Value)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Value(v) => write!(f, "{v:.6}"),
            Metric::Absent => f.write_str("absent"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub split: Split,
    pub head: Head,
    pub top1: Metric,
    pub loss_main: f64,
    pub loss_fg: Metric,
    pub loss_bg: Metric,
    pub loss_sup_fg: Metric,
    pub loss_sup_bg: Metric,
    pub zeta: Metric,
    pub zeta_group: Metric,
    pub seconds: f64,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{},{},{},{},{},{},{:.3}",
            self.epoch,
            self.split,
            self.head,
            self.top1,
            self.loss_main,
            self.loss_fg,
            self.loss_bg,
            self.loss_sup_fg,
            self.loss_sup_bg,
            self.zeta,
            self.zeta_group,
            self.seconds
        )
    }
}

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;

    #[test]
    fn config_keys_apply() {
        let mut c = TrainConfig::default();
        c.apply("mode", "only_bg").unwrap();
        c.apply("lr", "0.5").unwrap();
        c.apply("group_ratio", "1:1").unwrap();
        assert_eq!(c.model.variant, Variant::OnlyBg);
        assert_eq!(c.lr, 0.5);
        assert_eq!(c.model.group_ratio, (1, 1));
        assert!(matches!(c.apply("bogus", "1"), Err(Error::Config(_))));
        assert!(matches!(c.apply("epochs", "x"), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                lr: -1.0,
                ..TrainConfig::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn absent_is_not_zero() {
        assert_eq!(Metric::Absent.to_string(), "absent");
        assert_eq!(Metric::Value(0.0).to_string(), "0.000000");
    }
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;

use super::{Head, Metric, MetricsRow, Split, TrainConfig, METRICS_CSV_HEADER};
use crate::data::{rng_for, stack_images, Batch, Corpus};
use crate::diversity::{ActivationSample, DiversityReport};
use crate::error::{Error, Result};
use crate::losses::MaskPair;
use crate::model::{GoCnnModel, LossBundle, TrainPass, Variant};
use crate::optim::Sgd;
use crate::tensor::{kernels, Tensor};

/// Divides the learning rate by 10 once validation accuracy has not improved
/// by `min_delta` for `patience` consecutive epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauSchedule {
    pub patience: usize,
    pub min_delta: f64,
    best: f64,
    wait: usize,
}

impl PlateauSchedule {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best: f64::NEG_INFINITY,
            wait: 0,
        }
    }

    /// Feeds one epoch's accuracy; returns true when the rate should drop.
    pub fn observe(&mut self, accuracy: f64) -> bool {
        if accuracy > self.best + self.min_delta {
            self.best = accuracy;
            self.wait = 0;
            return false;
        }
        self.wait += 1;
        if self.patience > 0 && self.wait >= self.patience {
            self.wait = 0;
            return true;
        }
        false
    }
}

/// Where `train` writes its artifacts. Both are optional.
#[derive(Clone, Debug, Default)]
pub struct TrainOutputs {
    pub metrics: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

/// Per-head accuracy, mean losses and final-layer diversity on one split.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub samples: usize,
    pub top1_main: f64,
    pub top1_fg: Metric,
    pub top1_bg: Metric,
    pub losses: LossBundle,
    pub zeta: Metric,
    pub zeta_group: Metric,
}

impl Evaluation {
    pub fn top1(&self, head: Head) -> Metric {
        match head {
            Head::Main => Metric::Value(self.top1_main),
            Head::Fg => self.top1_fg,
            Head::Bg => self.top1_bg,
        }
    }

    pub fn rows(&self, epoch: usize, split: Split, seconds: f64) -> Vec<MetricsRow> {
        Head::ALL
            .iter()
            .map(|&head| MetricsRow {
                epoch,
                split,
                head,
                top1: self.top1(head),
                loss_main: self.losses.main,
                loss_fg: self.losses.fg_cls.into(),
                loss_bg: self.losses.bg_cls.into(),
                loss_sup_fg: self.losses.sup_fg.into(),
                loss_sup_bg: self.losses.sup_bg.into(),
                zeta: self.zeta,
                zeta_group: self.zeta_group,
                seconds,
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the best validation main-head top-1.
    pub best: GoCnnModel,
    pub best_epoch: usize,
    pub best_val: Evaluation,
    /// Parameters after the last epoch.
    pub last: GoCnnModel,
    pub rows: Vec<MetricsRow>,
    pub final_lr: f64,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn correct(logits: &Tensor, labels: &[usize]) -> usize {
    let k = logits.dim(1);
    logits
        .data()
        .chunks(k)
        .zip(labels)
        .filter(|(row, &label)| argmax(row) == label)
        .count()
}

/// Running sums over the batches of one pass through a split.
struct Accumulator {
    samples: usize,
    main: usize,
    fg: Option<usize>,
    bg: Option<usize>,
    loss: [f64; 5],
    present: [bool; 5],
    pooled: Vec<f64>,
    channels: usize,
}

impl Accumulator {
    fn new(model: &GoCnnModel) -> Self {
        let variant = model.variant();
        let fg = matches!(variant, Variant::Full | Variant::OnlyFg);
        let bg = matches!(variant, Variant::Full | Variant::OnlyBg);
        Self {
            samples: 0,
            main: 0,
            fg: fg.then_some(0),
            bg: bg.then_some(0),
            loss: [0.0; 5],
            present: [true, false, false, false, false],
            pooled: Vec::new(),
            channels: model.config().final_channels(),
        }
    }

    fn add(&mut self, pass: &TrainPass, labels: &[usize]) -> Result<()> {
        let n = labels.len();
        let tape = &pass.tape;
        let main = correct(tape.value(pass.main_logits), labels);
        self.main += main;
        // Without a dedicated head, a group's classifier is the main one.
        let fg = pass
            .fg_logits
            .map_or(main, |v| correct(tape.value(v), labels));
        let bg = pass
            .bg_logits
            .map_or(main, |v| correct(tape.value(v), labels));
        if let Some(c) = self.fg.as_mut() {
            *c += fg;
        }
        if let Some(c) = self.bg.as_mut() {
            *c += bg;
        }
        let l = pass.losses;
        for (i, v) in [Some(l.main), l.fg_cls, l.bg_cls, l.sup_fg, l.sup_bg]
            .into_iter()
            .enumerate()
        {
            if let Some(v) = v {
                self.loss[i] += v * n as f64;
                self.present[i] = true;
            }
        }
        let pooled = kernels::global_avg_pool(tape.value(pass.features))?;
        self.pooled.extend_from_slice(pooled.data());
        self.samples += n;
        Ok(())
    }

    fn finish(self, model: &GoCnnModel) -> Result<Evaluation> {
        let n = self.samples.max(1) as f64;
        let mean = |i: usize| self.present[i].then(|| self.loss[i] / n);
        let losses = LossBundle {
            main: self.loss[0] / n,
            fg_cls: mean(1),
            bg_cls: mean(2),
            sup_fg: mean(3),
            sup_bg: mean(4),
            total: 0.0,
        };
        let w = model.config().weights;
        let total = w.main * losses.main
            + w.fg * losses.fg_cls.filter(|_| model.has_fg_head()).unwrap_or(0.0)
            + w.bg * losses.bg_cls.filter(|_| model.has_bg_head()).unwrap_or(0.0)
            + w.suppression * (losses.sup_fg.unwrap_or(0.0) + losses.sup_bg.unwrap_or(0.0));
        let (zeta, zeta_group) = if self.samples >= 2 {
            let responses =
                ActivationSample::new(Tensor::new(&[self.samples, self.channels], self.pooled)?)?;
            let layer = model.config().architecture.conv_layers();
            let report = DiversityReport::from_responses(layer, &responses, model.partition())?;
            (Metric::Value(report.zeta), Metric::Value(report.zeta_group))
        } else {
            (Metric::Absent, Metric::Absent)
        };
        let frac = |c: usize| c as f64 / n;
        Ok(Evaluation {
            samples: self.samples,
            top1_main: frac(self.main),
            top1_fg: self.fg.map(frac).into(),
            top1_bg: self.bg.map(frac).into(),
            losses: LossBundle { total, ..losses },
            zeta,
            zeta_group,
        })
    }
}

fn check_compatible(model: &GoCnnModel, corpus: &Corpus) -> Result<(usize, usize)> {
    if corpus.classes != model.config().classes {
        return Err(Error::Data(format!(
            "corpus has {} classes but the model expects {}",
            corpus.classes,
            model.config().classes
        )));
    }
    if corpus.records.is_empty() {
        return Err(Error::Data("corpus is empty".into()));
    }
    let shape = model.feature_shape(corpus.height, corpus.width)?;
    Ok((shape.height, shape.width))
}

fn feature_masks(corpus: &Corpus, hw: (usize, usize)) -> Result<Vec<MaskPair>> {
    corpus
        .records
        .iter()
        .map(|r| r.feature_masks(hw.0, hw.1))
        .collect()
}

fn make_batch(corpus: &Corpus, masks: &[MaskPair], indices: &[usize]) -> Result<Batch> {
    Ok(Batch {
        images: stack_images(indices.iter().map(|&i| &corpus.records[i]))?,
        labels: indices.iter().map(|&i| corpus.records[i].label).collect(),
        masks: indices.iter().map(|&i| masks[i].clone()).collect(),
    })
}

fn evaluate_with_masks(
    model: &GoCnnModel,
    corpus: &Corpus,
    masks: &[MaskPair],
    batch_size: usize,
) -> Result<Evaluation> {
    let mut acc = Accumulator::new(model);
    let indices: Vec<usize> = (0..corpus.records.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let batch = make_batch(corpus, masks, chunk)?;
        let pass = model.forward_train(&batch)?;
        acc.add(&pass, &batch.labels)?;
    }
    acc.finish(model)
}

/// Single-crop evaluation of every head on `corpus`. Loss terms use the
/// corpus masks; accuracy never does.
pub fn evaluate(model: &GoCnnModel, corpus: &Corpus, batch_size: usize) -> Result<Evaluation> {
    let hw = check_compatible(model, corpus)?;
    let masks = feature_masks(corpus, hw)?;
    evaluate_with_masks(model, corpus, &masks, batch_size)
}

fn all_finite(ts: &[Tensor]) -> bool {
    ts.iter().all(Tensor::is_finite)
}

struct MetricsSink(Option<BufWriter<File>>);

impl MetricsSink {
    fn open(path: Option<&PathBuf>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self(None));
        };
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{METRICS_CSV_HEADER}")?;
        w.flush()?;
        Ok(Self(Some(w)))
    }

    fn write(&mut self, rows: &[MetricsRow]) -> Result<()> {
        if let Some(w) = self.0.as_mut() {
            for r in rows {
                writeln!(w, "{}", r.to_csv())?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

/// Trains a freshly built model on `train_set`, selecting on `val_set`.
/// Everything is a function of the config seed. A non-finite loss, gradient or
/// parameter aborts with `Error::Numeric` after the rows of finished epochs
/// have been written.
pub fn train(
    config: &TrainConfig,
    train_set: &Corpus,
    val_set: &Corpus,
    outputs: &TrainOutputs,
) -> Result<TrainOutcome> {
    config.validate()?;
    let model = GoCnnModel::build(config.model.clone(), config.seed)?;
    train_model(config, model, train_set, val_set, outputs)
}

/// As [`train`], starting from the given parameters.
pub fn train_model(
    config: &TrainConfig,
    mut model: GoCnnModel,
    train_set: &Corpus,
    val_set: &Corpus,
    outputs: &TrainOutputs,
) -> Result<TrainOutcome> {
    config.validate()?;
    let hw = check_compatible(&model, train_set)?;
    check_compatible(&model, val_set)?;
    let train_masks = feature_masks(train_set, hw)?;
    let val_masks = feature_masks(val_set, hw)?;

    let mut sink = MetricsSink::open(outputs.metrics.as_ref())?;
    let mut sgd = Sgd::new(config.sgd())?;
    let mut lr = config.lr;
    let mut schedule = PlateauSchedule::new(config.patience, config.min_delta);
    let mut rows = Vec::new();
    let mut best: Option<(GoCnnModel, usize, Evaluation)> = None;
    let mut order: Vec<usize> = (0..train_set.records.len()).collect();

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let mut rng = rng_for(config.seed, 0x5EED_0000 + epoch as u64);
        order.shuffle(&mut rng);
        let mut acc = Accumulator::new(&model);
        for chunk in order.chunks(config.batch_size) {
            let batch = make_batch(train_set, &train_masks, chunk)?;
            let (losses, grads, pass) = model.loss_and_grads(&batch)?;
            if !losses.total.is_finite() || !all_finite(&grads) {
                return Err(Error::Numeric(format!(
                    "non-finite loss or gradient in epoch {epoch} (total loss {})",
                    losses.total
                )));
            }
            acc.add(&pass, &batch.labels)?;
            sgd.step(model.params_mut(), &grads)?;
            if !all_finite(model.params()) {
                return Err(Error::Numeric(format!(
                    "parameters became non-finite in epoch {epoch}"
                )));
            }
        }
        let train_eval = acc.finish(&model)?;
        let val_eval = evaluate_with_masks(&model, val_set, &val_masks, config.batch_size)?;
        let seconds = if config.timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };

        let mut epoch_rows = train_eval.rows(epoch, Split::Train, seconds);
        epoch_rows.extend(val_eval.rows(epoch, Split::Val, seconds));
        sink.write(&epoch_rows)?;
        rows.extend(epoch_rows);

        if schedule.observe(val_eval.top1_main) {
            lr /= 10.0;
            sgd.set_lr(lr);
        }
        let improved = best
            .as_ref()
            .is_none_or(|(_, _, b)| val_eval.top1_main > b.top1_main);
        if improved {
            best = Some((model.clone(), epoch, val_eval));
        }
    }

    let (best_model, best_epoch, best_val) = best.expect("at least one epoch");
    if let Some(path) = &outputs.checkpoint {
        best_model.save(path, config.seed)?;
    }
    Ok(TrainOutcome {
        best: best_model,
        best_epoch,
        best_val,
        last: model,
        rows,
        final_lr: lr,
    })
}

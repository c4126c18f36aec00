//! End-to-end acceptance run. Prints one PASS/FAIL line per check and exits
//! non-zero if any check fails.
//!
//! The training checks share one set of runs: five seeds of GoCNN, its vanilla
//! twin, both single-group ablations and two reduced privileged fractions, all
//! on the same 8-class corpus (200 train and 100 validation images per class).

mod common;

use std::time::{Duration, Instant};

use common::{naive_conv, naive_fc, naive_max_pool, naive_pool, random};
use gocnn::autograd::Tape;
use gocnn::data::{
    decode_corpus, encode_corpus, generate, read_corpus, write_corpus, BackgroundMode, Batch,
    Corpus, CorpusSpec,
};
use gocnn::diversity::{
    group_diversity, model_diversity, pearson_corr, ActivationSample, GroupPartition,
};
use gocnn::harness::visualize::parse_pgm;
use gocnn::harness::{
    evaluate, mean_std, metrics_to_csv, train, visualize_groups, SweepTable, TrainConfig,
    TrainOutcome, TrainOutputs, METRICS_CSV_HEADER, SWEEP_CSV_HEADER,
};
use gocnn::losses::{extract, stack_masks, Mask, MaskPair, Polarity, Resolution};
use gocnn::model::{GoCnnConfig, GoCnnModel, Variant};
use gocnn::optim::Sgd;
use gocnn::tensor::kernels::{avg_pool2d, conv2d, fully_connected, max_pool2d};
use gocnn::{Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    let c = Check { name, pass, detail };
    println!(
        "{} {}: {}",
        if c.pass { "PASS" } else { "FAIL" },
        c.name,
        c.detail
    );
    c
}

fn failed(name: &'static str, err: &gocnn::Error) -> Check {
    check(name, false, format!("error: {err}"))
}

fn run(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => check(name, pass, detail),
        Err(e) => failed(name, &e),
    }
}

fn main() {
    let mut checks = vec![
        run("gradient_check", gradient_check),
        run("extractor_algebra", extractor_algebra),
        run("zero_mask_equivalence", zero_mask_equivalence),
        run("test_train_consistency", test_train_consistency),
        run("diversity_metrics", diversity_metrics),
        run("kernel_oracles", kernel_oracles),
    ];
    match Experiments::run() {
        Ok(ex) => {
            checks.push(ex.main_result());
            checks.push(ex.ablation_ordering());
            checks.push(ex.privileged_sweep());
            checks.push(run("decorrelation", || ex.decorrelation()));
        }
        Err(e) => {
            for name in [
                "main_result",
                "ablation_ordering",
                "privileged_sweep",
                "decorrelation",
            ] {
                checks.push(failed(name, &e));
            }
        }
    }
    checks.push(run("noise_background_control", noise_background_control));
    checks.push(run("formats", formats));

    let failures: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    println!(
        "{}/{} checks passed",
        checks.len() - failures.len(),
        checks.len()
    );
    if !failures.is_empty() {
        println!("failed: {}", failures.join(", "));
        std::process::exit(1);
    }
}

fn tiny_corpus(per_class: usize, size: usize, privileged: f64, seed: u64) -> Result<Corpus> {
    generate(&CorpusSpec {
        per_class,
        image_size: size,
        privileged_fraction: privileged,
        seed,
        ..CorpusSpec::default()
    })
}

fn batch_of(model: &GoCnnModel, records: &Corpus) -> Result<Batch> {
    let fs = model.feature_shape(records.height, records.width)?;
    Batch::from_records(records.records.iter(), (fs.height, fs.width))
}

/// TinyNet-GoCNN with every head active; two privileged and two sentinel samples.
fn gradient_check() -> Result<(bool, String)> {
    let start = Instant::now();
    let mut model = GoCnnModel::build(GoCnnConfig::default(), 17)?;
    let mut corpus = tiny_corpus(1, 16, 1.0, 5)?;
    corpus.records.truncate(4);
    for r in &mut corpus.records[2..] {
        *r = r.clone().without_privileged();
    }
    let batch = batch_of(&model, &corpus)?;
    let (losses, grads, _) = model.loss_and_grads(&batch)?;
    let all_heads = [losses.fg_cls, losses.bg_cls, losses.sup_fg, losses.sup_bg]
        .iter()
        .all(|l| l.is_some_and(|v| v > 0.0));

    let h = 1e-5;
    // Central differences on a loss of order 1 resolve gradients to about
    // 1e-10; the floor keeps entries below that from being judged on noise.
    let floor = 1e-6;
    let mut worst = (0.0f64, String::new());
    let mut checked = 0;
    for p in 0..grads.len() {
        for i in 0..grads[p].numel() {
            let orig = model.params()[p].data()[i];
            model.params_mut()[p].data_mut()[i] = orig + h;
            let up = model.forward_train(&batch)?.losses.total;
            model.params_mut()[p].data_mut()[i] = orig - h;
            let down = model.forward_train(&batch)?.losses.total;
            model.params_mut()[p].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[p].data()[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
            if rel > worst.0 {
                worst = (rel, format!("{}[{i}]", model.param_names()[p]));
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    Ok((
        all_heads && worst.0 < 1e-4 && elapsed < Duration::from_secs(120),
        format!(
            "{checked} parameters, worst relative error {:.2e} at {}, five heads active: {all_heads}, {:.1}s",
            worst.0,
            worst.1,
            elapsed.as_secs_f64()
        ),
    ))
}

fn random_mask(h: usize, w: usize, p: f64, rng: &mut ChaCha8Rng) -> Mask {
    let bits: Vec<bool> = (0..h * w).map(|_| rng.random_bool(p)).collect();
    Mask::from_fn(h, w, Polarity::Foreground, Resolution::Feature, |r, c| {
        bits[r * w + c]
    })
}

fn extractor_algebra() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut bad = Vec::new();
    for case in 0..1000 {
        let (b, c, h, w) = (
            rng.random_range(1..4),
            rng.random_range(1..5),
            rng.random_range(1..7),
            rng.random_range(1..7),
        );
        let p = rng.random::<f64>();
        let f = random(&[b, c, h, w], &mut rng).map(|v| 10.0 * v);
        let m = random_mask(h, w, p, &mut rng);
        let ones = Mask::from_fn(h, w, Polarity::Foreground, Resolution::Feature, |_, _| true);
        let zeros = Mask::sentinel(h, w, Polarity::Foreground, Resolution::Feature);

        let inside = extract(&f, &m)?;
        let outside = extract(&f, &m.complement())?;
        let mut sum = inside.clone();
        sum.add_scaled(&outside, 1.0)?;
        let identity = extract(&f, &ones)? == f;
        let zero = extract(&f, &zeros)?.data().iter().all(|&v| v == 0.0);
        let complement = sum == f
            && inside
                .data()
                .iter()
                .zip(outside.data())
                .all(|(a, o)| *a == 0.0 || *o == 0.0);

        let masks: Vec<Mask> = (0..b).map(|_| random_mask(h, w, p, &mut rng)).collect();
        let gate = stack_masks(&masks)?;
        let mut tape = Tape::new();
        let x = tape.param(0, f.clone());
        let gated = tape.gate(x, gate.clone())?;
        let loss = tape.mean_square(gated);
        let grads = tape.backward(loss)?;
        let g = grads.wrt(x).expect("gradient for the input");
        let plane = h * w;
        let exact_zero =
            g.data().iter().enumerate().all(|(i, &gv)| {
                gate.data()[(i / (c * plane)) * plane + i % plane] != 0.0 || gv == 0.0
            });

        if !(identity && zero && complement && exact_zero) {
            bad.push(case);
        }
    }
    Ok((
        bad.is_empty(),
        format!(
            "1000 cases, {} violations {:?}",
            bad.len(),
            &bad[..bad.len().min(5)]
        ),
    ))
}

/// Sentinel masks against a model built without suppression terms: same
/// batches, same optimizer, 50 steps.
fn zero_mask_equivalence() -> Result<(bool, String)> {
    let corpus = tiny_corpus(10, 16, 0.0, 3)?;
    let with = GoCnnConfig::default();
    let without = GoCnnConfig {
        suppression: false,
        ..GoCnnConfig::default()
    };
    let mut a = GoCnnModel::build(with, 4)?;
    let mut b = GoCnnModel::build(without, 4)?;
    let sgd = TrainConfig::default().sgd();
    let (mut opt_a, mut opt_b) = (Sgd::new(sgd)?, Sgd::new(sgd)?);
    let mut sup_zero = true;
    for step in 0..50 {
        let lo = (step * 8) % corpus.records.len();
        let chunk = Corpus {
            records: corpus.records[lo..lo + 8].to_vec(),
            ..corpus.clone()
        };
        let batch = batch_of(&a, &chunk)?;
        let (la, ga, _) = a.loss_and_grads(&batch)?;
        let (lb, gb, _) = b.loss_and_grads(&batch)?;
        sup_zero &= la.sup_fg == Some(0.0) && la.sup_bg == Some(0.0) && lb.sup_fg.is_none();
        opt_a.step(a.params_mut(), &ga)?;
        opt_b.step(b.params_mut(), &gb)?;
    }
    let mut diff = 0.0f64;
    for (x, y) in a.params().iter().zip(b.params()) {
        diff = diff.max(x.max_abs_diff(y)?);
    }
    Ok((
        sup_zero && diff <= 1e-12,
        format!("max parameter difference after 50 steps {diff:.3e}, suppression terms zero: {sup_zero}"),
    ))
}

fn test_train_consistency() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst = 0.0f64;
    for variant in Variant::ALL {
        let config = GoCnnConfig {
            variant,
            ..GoCnnConfig::default()
        };
        let model = GoCnnModel::build(config, 9)?;
        let fs = model.feature_shape(32, 32)?;
        for _ in 0..4 {
            let images = Tensor::from_fn(&[25, 3, 32, 32], |_| rng.random());
            let batch = Batch {
                images: images.clone(),
                labels: (0..25).map(|i| i % 8).collect(),
                masks: vec![MaskPair::sentinel(fs.height, fs.width, Resolution::Feature); 25],
            };
            let pass = model.forward_train(&batch)?;
            let test = model.forward_test(&images)?;
            worst = worst.max(pass.tape.value(pass.main_logits).max_abs_diff(&test)?);
        }
    }
    let full = GoCnnModel::build(GoCnnConfig::default(), 0)?;
    let twin = full.ablation_mode(Variant::Vanilla, 0)?;
    let (deployed, vanilla) = (full.test_param_count(), twin.param_count());
    Ok((
        worst <= 1e-12 && deployed == vanilla,
        format!(
            "100 inputs per variant, max logit difference {worst:.3e}; deployed parameters {deployed} vs vanilla twin {vanilla}"
        ),
    ))
}

fn random_corr(c: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let mut t = Tensor::zeros(&[c, c]);
    for i in 0..c {
        t.data_mut()[i * c + i] = 1.0;
        for j in i + 1..c {
            let v = rng.random_range(-1.0..=1.0);
            t.data_mut()[i * c + j] = v;
            t.data_mut()[j * c + i] = v;
        }
    }
    t
}

fn diversity_metrics() -> Result<(bool, String)> {
    let two = Tensor::new(&[2, 2], vec![1.0, 0.5, 0.5, 1.0])?;
    let three = Tensor::new(&[3, 3], vec![1.0, 0.3, 0.2, 0.3, 1.0, 0.4, 0.2, 0.4, 1.0])?;
    let split = GroupPartition::new(vec![vec![0, 1], vec![2]], vec!["a".into(), "b".into()])?;
    let zeta = model_diversity(&two)?;
    let zeta_g = group_diversity(&three, &split)?;
    let worked = (zeta - 0.25).abs() <= 1e-12 && (zeta_g - 0.7).abs() <= 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let mut out_of_bounds = 0;
    for case in 0..10_000 {
        let c = rng.random_range(2..12);
        let corr = if case % 2 == 0 {
            random_corr(c, &mut rng)
        } else {
            let s = rng.random_range(3..30);
            let r = Tensor::from_fn(&[s, c], |_| rng.random_range(-1.0..1.0));
            pearson_corr(&ActivationSample::new(r)?)
        };
        let fg = rng.random_range(1..c);
        let z = model_diversity(&corr)?;
        let zg = group_diversity(&corr, &GroupPartition::foreground_background(c, fg)?)?;
        let upper = 1.0 - 1.0 / c as f64;
        if !((-1e-12..=upper + 1e-12).contains(&z) && (-1e-12..=1.0 + 1e-12).contains(&zg)) {
            out_of_bounds += 1;
        }
    }
    Ok((
        worked && out_of_bounds == 0,
        format!("worked examples {zeta:.12} and {zeta_g:.12}; {out_of_bounds} of 10000 matrices out of bounds"),
    ))
}

fn kernel_oracles() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let (n, c, o) = (
            rng.random_range(1..3),
            rng.random_range(1..4),
            rng.random_range(1..4),
        );
        let (h, w) = (rng.random_range(5..10), rng.random_range(5..10));
        let k = [1, 3, 5][rng.random_range(0..3)];
        let (stride, pad) = (rng.random_range(1..3), rng.random_range(0..3));
        let x = random(&[n, c, h, w], &mut rng);
        let wt = random(&[o, c, k, k], &mut rng);
        let b = random(&[o], &mut rng);
        worst = worst.max(
            conv2d(&x, &wt, &b, stride, pad)?
                .max_abs_diff(&naive_conv(&x, &wt, &b, stride, pad))?,
        );

        let s = rng.random_range(1..4);
        worst = worst.max(avg_pool2d(&x, s)?.max_abs_diff(&naive_pool(&x, s))?);
        worst = worst.max(max_pool2d(&x, s)?.0.max_abs_diff(&naive_max_pool(&x, s))?);

        let d = rng.random_range(1..20);
        let (fx, fw, fb) = (
            random(&[n, d], &mut rng),
            random(&[o, d], &mut rng),
            random(&[o], &mut rng),
        );
        worst = worst.max(fully_connected(&fx, &fw, &fb)?.max_abs_diff(&naive_fc(&fx, &fw, &fb))?);
    }
    Ok((
        worst <= 1e-10,
        format!("300 random shapes, max difference {worst:.3e}"),
    ))
}

/// Best validation result of one training run.
struct RunResult {
    top1: f64,
    zeta_group: Option<f64>,
    outcome: TrainOutcome,
}

struct Experiments {
    full: Vec<RunResult>,
    vanilla: Vec<RunResult>,
    only_fg: Vec<RunResult>,
    only_bg: Vec<RunResult>,
    sweep: SweepTable,
    vals: Vec<Corpus>,
    main_elapsed: Duration,
}

fn experiment_config(variant: Variant, seed: u64) -> TrainConfig {
    let mut config = TrainConfig {
        epochs: 30,
        seed,
        ..TrainConfig::default()
    };
    config.model.variant = variant;
    config
}

fn experiment_corpus(seed: u64, background: BackgroundMode) -> Result<(Corpus, Corpus)> {
    let corpus = generate(&CorpusSpec {
        per_class: 300,
        background,
        seed,
        ..CorpusSpec::default()
    })?;
    Ok(corpus.holdout(1.0 / 3.0))
}

fn train_one(variant: Variant, seed: u64, tr: &Corpus, va: &Corpus) -> Result<RunResult> {
    let start = Instant::now();
    let outcome = train(
        &experiment_config(variant, seed),
        tr,
        va,
        &TrainOutputs::default(),
    )?;
    let r = RunResult {
        top1: outcome.best_val.top1_main,
        zeta_group: outcome.best_val.zeta_group.value(),
        outcome,
    };
    eprintln!(
        "  seed {seed} {variant:<8} top1 {:.4} (epoch {}) {:.0}s",
        r.top1,
        r.outcome.best_epoch,
        start.elapsed().as_secs_f64()
    );
    Ok(r)
}

fn mean(xs: &[f64]) -> f64 {
    mean_std(xs).0
}

fn top1s(runs: &[RunResult]) -> Vec<f64> {
    runs.iter().map(|r| r.top1).collect()
}

fn pooled_std(a: &[f64], b: &[f64]) -> f64 {
    ((mean_std(a).1.powi(2) + mean_std(b).1.powi(2)) / 2.0).sqrt()
}

impl Experiments {
    fn run() -> Result<Self> {
        let mut splits = Vec::new();
        for seed in SEEDS {
            splits.push(experiment_corpus(seed, BackgroundMode::Informative)?);
        }
        let start = Instant::now();
        let (mut full, mut vanilla) = (Vec::new(), Vec::new());
        for (&seed, (tr, va)) in SEEDS.iter().zip(&splits) {
            full.push(train_one(Variant::Full, seed, tr, va)?);
            vanilla.push(train_one(Variant::Vanilla, seed, tr, va)?);
        }
        let main_elapsed = start.elapsed();

        let (mut only_fg, mut only_bg) = (Vec::new(), Vec::new());
        for (&seed, (tr, va)) in SEEDS.iter().zip(&splits) {
            only_fg.push(train_one(Variant::OnlyFg, seed, tr, va)?);
            only_bg.push(train_one(Variant::OnlyBg, seed, tr, va)?);
        }

        let mut runs = Vec::new();
        for (i, (&seed, (tr, va))) in SEEDS.iter().zip(&splits).enumerate() {
            runs.push(gocnn::harness::SweepRun {
                fraction: Some(1.0),
                seed,
                top1: full[i].top1,
            });
            for fraction in [0.2, 0.0] {
                let flagged = tr.with_privileged_fraction(fraction, seed)?;
                let r = train_one(Variant::Full, seed, &flagged, va)?;
                runs.push(gocnn::harness::SweepRun {
                    fraction: Some(fraction),
                    seed,
                    top1: r.top1,
                });
            }
        }
        let sweep = SweepTable::from_runs(runs);
        let vals = splits.into_iter().map(|(_, va)| va).collect();
        Ok(Self {
            full,
            vanilla,
            only_fg,
            only_bg,
            sweep,
            vals,
            main_elapsed,
        })
    }

    fn main_result(&self) -> Check {
        let diffs: Vec<f64> = self
            .full
            .iter()
            .zip(&self.vanilla)
            .map(|(g, v)| g.top1 - v.top1)
            .collect();
        let wins = diffs.iter().filter(|&&d| d > 0.0).count();
        let gain = 100.0 * mean(&diffs);
        let minutes = self.main_elapsed.as_secs_f64() / 60.0;
        check(
            "main_result",
            wins >= 4 && gain >= 2.0 && minutes < 30.0,
            format!(
                "GoCNN {:.4} vs vanilla {:.4}; wins {wins}/5, mean gain {gain:.2} points, {minutes:.1} min",
                mean(&top1s(&self.full)),
                mean(&top1s(&self.vanilla))
            ),
        )
    }

    fn ablation_ordering(&self) -> Check {
        let (f, g, b) = (
            mean(&top1s(&self.full)),
            mean(&top1s(&self.only_fg)),
            mean(&top1s(&self.only_bg)),
        );
        check(
            "ablation_ordering",
            f >= g - 0.005 && g >= b - 0.005,
            format!("full {f:.4}, only_fg {g:.4}, only_bg {b:.4}"),
        )
    }

    fn privileged_sweep(&self) -> Check {
        let at = |p: f64| -> Vec<f64> {
            self.sweep
                .runs
                .iter()
                .filter(|r| r.fraction == Some(p))
                .map(|r| r.top1)
                .collect()
        };
        let (p10, p02, p00) = (at(1.0), at(0.2), at(0.0));
        let hi = mean(&p10) - mean(&p02) >= -0.5 * pooled_std(&p10, &p02);
        let lo = mean(&p02) - mean(&p00) > -0.5 * pooled_std(&p02, &p00);
        check(
            "privileged_sweep",
            hi && lo,
            format!(
                "p=1.0 {:.4}, p=0.2 {:.4}, p=0.0 {:.4}; tolerances {:.4} and {:.4}",
                mean(&p10),
                mean(&p02),
                mean(&p00),
                0.5 * pooled_std(&p10, &p02),
                0.5 * pooled_std(&p02, &p00)
            ),
        )
    }

    fn decorrelation(&self) -> Result<(bool, String)> {
        let mut wins = 0;
        let mut ratios = Vec::new();
        for ((g, v), va) in self.full.iter().zip(&self.vanilla).zip(&self.vals) {
            if g.zeta_group.unwrap_or(f64::NAN) > v.zeta_group.unwrap_or(f64::NAN) {
                wins += 1;
            }
            ratios.push(background_energy_ratio(&g.outcome.best, va)?);
        }
        let worst = ratios.iter().copied().fold(0.0, f64::max);
        Ok((
            wins >= 4 && worst <= 0.1,
            format!(
                "zeta_g wins {wins}/5 (GoCNN {:.4} vs vanilla {:.4}); fg-group background/foreground energy ratios {}",
                mean(&self.full.iter().filter_map(|r| r.zeta_group).collect::<Vec<_>>()),
                mean(&self.vanilla.iter().filter_map(|r| r.zeta_group).collect::<Vec<_>>()),
                ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(" ")
            ),
        ))
    }
}

/// Mean squared foreground-group activation on background cells over its mean
/// on foreground cells, on privileged samples.
fn background_energy_ratio(model: &GoCnnModel, corpus: &Corpus) -> Result<f64> {
    let fg = model.config().fg_channels();
    let fs = model.feature_shape(corpus.height, corpus.width)?;
    let (h, w) = (fs.height, fs.width);
    let (mut on_bg, mut n_bg, mut on_fg, mut n_fg) = (0.0, 0usize, 0.0, 0usize);
    let privileged: Vec<_> = corpus
        .records
        .iter()
        .filter(|r| r.has_privileged)
        .cloned()
        .collect();
    for chunk in privileged.chunks(64) {
        let images = gocnn::data::stack_images(chunk.iter())?;
        let features = model.final_features(&images)?;
        let c = features.dim(1);
        for (s, r) in chunk.iter().enumerate() {
            let masks = r.feature_masks(h, w)?;
            for ch in 0..fg {
                let plane = &features.data()[(s * c + ch) * h * w..(s * c + ch + 1) * h * w];
                for (cell, v) in plane.iter().enumerate() {
                    if masks.fg.data().data()[cell] == 1.0 {
                        on_fg += v * v;
                        n_fg += 1;
                    } else {
                        on_bg += v * v;
                        n_bg += 1;
                    }
                }
            }
        }
    }
    Ok((on_bg / n_bg as f64) / (on_fg / n_fg as f64))
}

/// The background head is judged only on runs whose main head learned the
/// objects; a network stuck at chance says nothing about leakage.
fn noise_background_control() -> Result<(bool, String)> {
    let chance = 1.0 / 8.0;
    let mut learned = 0;
    let mut within = 0;
    let mut lines = Vec::new();
    let mut band = 0.0;
    for seed in SEEDS {
        let (tr, va) = experiment_corpus(seed, BackgroundMode::Noise)?;
        let r = train_one(Variant::Full, seed, &tr, &va)?;
        let bg = r.outcome.best_val.top1_bg.value().unwrap_or(f64::NAN);
        band = 3.0 * (chance * (1.0 - chance) / va.records.len() as f64).sqrt();
        if r.top1 >= 0.5 {
            learned += 1;
            if (bg - chance).abs() <= band {
                within += 1;
            }
        }
        lines.push(format!("main {:.3}/bg {bg:.3}", r.top1));
    }
    Ok((
        learned > 0 && within == learned,
        format!(
            "chance {chance:.3} ± {band:.3}; {within} of {learned} learned runs have bg head at chance [{}]",
            lines.join(", ")
        ),
    ))
}

fn formats() -> Result<(bool, String)> {
    let dir = tempfile::tempdir()?;
    let corpus = tiny_corpus(4, 16, 0.5, 12)?;
    let bytes = encode_corpus(&corpus)?;
    let path = dir.path().join("corpus.bin");
    write_corpus(&corpus, &path)?;
    let corpus_ok = decode_corpus(&bytes)? == corpus
        && encode_corpus(&decode_corpus(&bytes)?)? == bytes
        && read_corpus(&path)? == corpus
        && std::fs::read(&path)? == bytes;

    let model = GoCnnModel::build(GoCnnConfig::default(), 21)?;
    let ckpt = dir.path().join("model.ckpt");
    model.save(&ckpt, 21)?;
    let (loaded, manifest) = GoCnnModel::load(&ckpt)?;
    let again = dir.path().join("again.ckpt");
    loaded.save(&again, manifest.seed)?;
    let bit_exact = loaded.params().iter().zip(model.params()).all(|(a, b)| {
        a.data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits())
    });
    let checkpoint_ok = bit_exact && std::fs::read(&ckpt)? == std::fs::read(&again)?;

    let files = visualize_groups(&model, &corpus.records[..3], dir.path().join("vis"))?;
    let mut pgm_ok = !files.is_empty();
    for f in files
        .iter()
        .filter(|f| f.extension().is_some_and(|e| e == "pgm"))
    {
        let raw = std::fs::read(f)?;
        let (w, h, px) = parse_pgm(&raw)?;
        let header = format!("P5\n{w} {h}\n255\n");
        pgm_ok &= raw.starts_with(header.as_bytes())
            && raw.len() == header.len() + w * h
            && px.len() == w * h;
    }

    let (tr, va) = corpus.holdout(0.25);
    let config = TrainConfig {
        epochs: 2,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let mut texts = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let outputs = TrainOutputs {
            metrics: Some(dir.path().join(name)),
            checkpoint: None,
        };
        let out = train(&config, &tr, &va, &outputs)?;
        let text = std::fs::read_to_string(dir.path().join(name))?;
        let matches_rows = text == metrics_to_csv(&out.rows);
        texts.push((text, matches_rows));
    }
    let columns = METRICS_CSV_HEADER.split(',').count();
    let eval_rows = evaluate(&model, &va, 8)?.rows(0, gocnn::harness::Split::Val, 0.0);
    let csv_ok = texts[0] == texts[1]
        && texts[0].1
        && texts[0].0.lines().next() == Some(METRICS_CSV_HEADER)
        && texts[0].0.lines().all(|l| l.split(',').count() == columns)
        && eval_rows
            .iter()
            .all(|r| r.to_csv().split(',').count() == columns)
        && SweepTable::from_runs(Vec::new())
            .to_csv()
            .starts_with(SWEEP_CSV_HEADER);

    Ok((
        corpus_ok && checkpoint_ok && pgm_ok && csv_ok,
        format!("corpus {corpus_ok}, checkpoint {checkpoint_ok}, pgm {pgm_ok}, csv {csv_ok}"),
    ))
}

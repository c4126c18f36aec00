//! Trains GoCNN and its vanilla twin on the same split and compares the main
//! head. Pass an epoch count to train longer.

use gocnn::data::{generate, CorpusSpec};
use gocnn::harness::{train, TrainConfig, TrainOutputs};
use gocnn::model::Variant;

fn main() -> gocnn::Result<()> {
    let epochs = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(15);
    let corpus = generate(&CorpusSpec {
        per_class: 120,
        seed: 7,
        ..CorpusSpec::default()
    })?;
    let (tr, va) = corpus.holdout(1.0 / 3.0);

    for variant in [Variant::Full, Variant::Vanilla] {
        let mut config = TrainConfig {
            epochs,
            seed: 7,
            ..TrainConfig::default()
        };
        config.model.variant = variant;
        let out = train(&config, &tr, &va, &TrainOutputs::default())?;
        let e = &out.best_val;
        println!(
            "{variant:<8} main {:.3}  fg {}  bg {}  zeta_g {}  (best epoch {})",
            e.top1_main, e.top1_fg, e.top1_bg, e.zeta_group, out.best_epoch
        );
    }
    Ok(())
}

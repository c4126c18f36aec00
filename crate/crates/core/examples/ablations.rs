//! Full GoCNN against the two single-group ablations.

use gocnn::data::{generate, CorpusSpec};
use gocnn::harness::{train, TrainConfig, TrainOutputs};
use gocnn::model::Variant;

fn main() -> gocnn::Result<()> {
    let corpus = generate(&CorpusSpec {
        per_class: 120,
        seed: 2,
        ..CorpusSpec::default()
    })?;
    let (tr, va) = corpus.holdout(1.0 / 3.0);
    for variant in [Variant::Full, Variant::OnlyFg, Variant::OnlyBg] {
        let mut config = TrainConfig {
            epochs: 8,
            seed: 2,
            ..TrainConfig::default()
        };
        config.model.variant = variant;
        let out = train(&config, &tr, &va, &TrainOutputs::default())?;
        println!("{variant:<8} main top1 {:.3}", out.best_val.top1_main);
    }
    Ok(())
}

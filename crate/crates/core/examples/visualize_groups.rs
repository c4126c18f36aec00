//! Writes foreground/background heatmaps (PGM and CSV) for a few validation
//! images after a short training run.
//!
//! cargo run --example visualize_groups -- [out_dir]

use gocnn::data::{generate, CorpusSpec};
use gocnn::harness::{train, visualize_groups, TrainConfig, TrainOutputs};

fn main() -> gocnn::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "heatmaps".into());
    let corpus = generate(&CorpusSpec {
        per_class: 80,
        seed: 6,
        ..CorpusSpec::default()
    })?;
    let (tr, va) = corpus.holdout(0.25);
    let config = TrainConfig {
        epochs: 5,
        seed: 6,
        ..TrainConfig::default()
    };
    let model = train(&config, &tr, &va, &TrainOutputs::default())?.best;
    let files = visualize_groups(&model, &va.records[..4], &out)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

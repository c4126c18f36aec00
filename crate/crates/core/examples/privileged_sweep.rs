//! How much of the training set needs masks: sweeps the privileged fraction
//! over two seeds and prints the summary CSV.

use gocnn::data::{generate, CorpusSpec};
use gocnn::harness::{sweep_privileged, TrainConfig};

fn main() -> gocnn::Result<()> {
    let corpus = generate(&CorpusSpec {
        per_class: 100,
        seed: 4,
        ..CorpusSpec::default()
    })?;
    let (tr, va) = corpus.holdout(1.0 / 3.0);
    let base = TrainConfig {
        epochs: 12,
        ..TrainConfig::default()
    };

    let table = sweep_privileged(&base, &tr, &va, &[0.0, 0.5, 1.0], &[0, 1])?;
    print!("{}", table.to_csv());
    Ok(())
}

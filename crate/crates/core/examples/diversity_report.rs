//! Per-layer diversity of a briefly trained GoCNN next to an untrained one.

use gocnn::data::{generate, CorpusSpec};
use gocnn::diversity::{layer_report, reports_to_csv};
use gocnn::harness::{train, TrainConfig, TrainOutputs};
use gocnn::model::GoCnnModel;

fn main() -> gocnn::Result<()> {
    let corpus = generate(&CorpusSpec {
        per_class: 80,
        seed: 5,
        ..CorpusSpec::default()
    })?;
    let (tr, va) = corpus.holdout(0.25);
    let config = TrainConfig {
        epochs: 5,
        seed: 5,
        ..TrainConfig::default()
    };
    let untrained = GoCnnModel::build(config.model.clone(), config.seed)?;
    let trained = train(&config, &tr, &va, &TrainOutputs::default())?.best;

    for (name, model) in [("untrained", &untrained), ("trained", &trained)] {
        let reports = (1..=model.config().architecture.conv_layers())
            .map(|k| layer_report(model, k, &va.records))
            .collect::<gocnn::Result<Vec<_>>>()?;
        println!("# {name}");
        print!("{}", reports_to_csv(&reports));
    }
    Ok(())
}

//! Central differences against the tape's gradients for every parameter of a
//! small GoCNN, with two masked and two unmasked samples in the batch.

use gocnn::data::{generate, Batch, CorpusSpec};
use gocnn::model::{Architecture, GoCnnConfig, GoCnnModel};

fn main() -> gocnn::Result<()> {
    let config = GoCnnConfig {
        architecture: Architecture::tiny_net(16),
        ..GoCnnConfig::default()
    };
    let mut model = GoCnnModel::build(config, 3)?;
    let mut corpus = generate(&CorpusSpec {
        per_class: 1,
        image_size: 16,
        ..CorpusSpec::default()
    })?;
    corpus.records.truncate(4);
    for r in &mut corpus.records[2..] {
        *r = r.clone().without_privileged();
    }
    let fs = model.feature_shape(16, 16)?;
    let batch = Batch::from_records(corpus.records.iter(), (fs.height, fs.width))?;
    let (losses, grads, _) = model.loss_and_grads(&batch)?;
    println!("{losses:?}");

    let h = 1e-5;
    for p in 0..grads.len() {
        let mut worst = 0.0f64;
        for i in 0..grads[p].numel() {
            let orig = model.params()[p].data()[i];
            model.params_mut()[p].data_mut()[i] = orig + h;
            let up = model.forward_train(&batch)?.losses.total;
            model.params_mut()[p].data_mut()[i] = orig - h;
            let down = model.forward_train(&batch)?.losses.total;
            model.params_mut()[p].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = grads[p].data()[i];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
        println!(
            "{:<14} {:>6} entries  max rel err {worst:.2e}",
            model.param_names()[p],
            grads[p].numel()
        );
    }
    Ok(())
}

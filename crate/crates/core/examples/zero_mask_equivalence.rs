//! Samples without masks carry all-zero sentinels, which make the suppression
//! terms vanish exactly. Training on such data matches a model with
//! suppression switched off, step for step.

use gocnn::data::{generate, Batch, CorpusSpec};
use gocnn::harness::TrainConfig;
use gocnn::model::{GoCnnConfig, GoCnnModel};
use gocnn::optim::Sgd;

fn main() -> gocnn::Result<()> {
    let corpus = generate(&CorpusSpec {
        per_class: 8,
        image_size: 16,
        privileged_fraction: 0.0,
        ..CorpusSpec::default()
    })?;
    let mut with = GoCnnModel::build(GoCnnConfig::default(), 1)?;
    let mut without = GoCnnModel::build(
        GoCnnConfig {
            suppression: false,
            ..GoCnnConfig::default()
        },
        1,
    )?;
    let sgd = TrainConfig::default().sgd();
    let (mut a, mut b) = (Sgd::new(sgd)?, Sgd::new(sgd)?);
    let fs = with.feature_shape(16, 16)?;

    for (step, chunk) in corpus.records.chunks(8).cycle().take(50).enumerate() {
        let batch = Batch::from_records(chunk.iter(), (fs.height, fs.width))?;
        let (la, ga, _) = with.loss_and_grads(&batch)?;
        let (_, gb, _) = without.loss_and_grads(&batch)?;
        a.step(with.params_mut(), &ga)?;
        b.step(without.params_mut(), &gb)?;
        let mut diff = 0.0f64;
        for (x, y) in with.params().iter().zip(without.params()) {
            diff = diff.max(x.max_abs_diff(y)?);
        }
        if step % 10 == 9 {
            println!(
                "step {:>2}: loss {:.4}, sup {:?}/{:?}, max param diff {diff:e}",
                step + 1,
                la.total,
                la.sup_fg,
                la.sup_bg
            );
        }
    }
    Ok(())
}

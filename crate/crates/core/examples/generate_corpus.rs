//! Writes a small synthetic corpus and reads it back.
//!
//! cargo run --example generate_corpus -- [out.bin]

use gocnn::data::{generate, read_corpus, write_corpus, BackgroundMode, CorpusSpec};

fn main() -> gocnn::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "corpus.bin".into());
    let spec = CorpusSpec {
        per_class: 50,
        privileged_fraction: 0.5,
        background: BackgroundMode::Informative,
        seed: 1,
        ..CorpusSpec::default()
    };
    let corpus = generate(&spec)?;
    write_corpus(&corpus, &out)?;

    let back = read_corpus(&out)?;
    assert_eq!(back, corpus);
    println!(
        "{out}: {} images of {}x{} in {} classes, {} with masks",
        back.records.len(),
        back.height,
        back.width,
        back.classes,
        back.privileged_count()
    );
    if let Some(r) = back.records.iter().find(|r| r.has_privileged) {
        println!(
            "first masked sample: label {}, {} object pixels",
            r.label,
            r.mask_fg.count_ones()
        );
    }
    Ok(())
}

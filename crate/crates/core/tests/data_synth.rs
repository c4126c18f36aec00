use gocnn::data::{
    decode_corpus, downsample_mask, encode_corpus, generate, read_corpus, record_len,
    shape_instance, write_corpus, BackgroundMode, CorpusSpec, ShapeInstance, ShapeKind,
    CORPUS_HEADER_LEN,
};
use gocnn::losses::{Mask, Polarity, Resolution};
use gocnn::{Error, LayerShape};

fn small(per_class: usize, privileged: f64, seed: u64) -> CorpusSpec {
    CorpusSpec {
        per_class,
        image_size: 16,
        privileged_fraction: privileged,
        seed,
        ..CorpusSpec::default()
    }
}

/// Membership written out independently of the generator, in polar or
/// half-plane form where the generator uses boxes and norms.
fn oracle_inside(s: &ShapeInstance, row: usize, col: usize) -> bool {
    let x = col as f64 + 0.5 - s.center_x;
    let y = row as f64 + 0.5 - s.center_y;
    let r = s.radius;
    let dist = x.hypot(y);
    let in_box = |hx: f64, hy: f64| -hx <= x && x <= hx && -hy <= y && y <= hy;
    match s.kind {
        ShapeKind::Disk => dist <= r,
        ShapeKind::Ring => dist <= r && dist * dist >= 0.3 * r * r,
        ShapeKind::Square => in_box(0.8 * r, 0.8 * r),
        ShapeKind::Bar => in_box(r, 0.35 * r),
        ShapeKind::Cross => in_box(r / 3.0, r) || in_box(r, r / 3.0),
        ShapeKind::Diamond => {
            // Intersection of four half-planes.
            [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
                .iter()
                .all(|(a, b)| a * x + b * y <= r)
        }
        ShapeKind::Triangle => {
            // Apex at (0,-r), base from (-r,r) to (r,r).
            y <= r && 2.0 * x - y <= r && -2.0 * x - y <= r
        }
        ShapeKind::LShape => {
            let stem = x >= -r && x <= -r / 3.0 && y >= -r && y <= r;
            let foot = y >= r / 3.0 && y <= r && x >= -r && x <= r;
            stem || foot
        }
    }
}

#[test]
fn masks_match_independent_rasterization() {
    for background in [BackgroundMode::Informative, BackgroundMode::Noise] {
        let spec = CorpusSpec {
            per_class: 12,
            background,
            seed: 31,
            ..CorpusSpec::default()
        };
        let corpus = generate(&spec).unwrap();
        for (i, rec) in corpus.records.iter().enumerate() {
            let shape = shape_instance(&spec, i);
            let n = spec.image_size;
            let mut pixels = Vec::new();
            for row in 0..n {
                for col in 0..n {
                    let inside = oracle_inside(&shape, row, col);
                    assert_eq!(
                        rec.mask_fg.data().data()[row * n + col] == 1.0,
                        inside,
                        "record {i} pixel ({row},{col})"
                    );
                    if inside {
                        pixels.push(
                            (0..3)
                                .map(|ch| rec.image.data()[(ch * n + row) * n + col])
                                .collect::<Vec<_>>(),
                        );
                    }
                }
            }
            assert!(!pixels.is_empty(), "record {i} has an empty shape");
            // The object is painted in one flat colour before the ±0.04 jitter.
            for ch in 0..3 {
                let lo = pixels.iter().map(|p| p[ch]).fold(f64::INFINITY, f64::min);
                let hi = pixels
                    .iter()
                    .map(|p| p[ch])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    hi - lo <= 0.08 + 2.0 / 255.0,
                    "record {i} channel {ch}: {lo}..{hi}"
                );
            }
        }
    }
}

#[test]
fn privileged_extremes_and_stratification() {
    let all = generate(&small(10, 1.0, 1)).unwrap();
    assert!(all
        .records
        .iter()
        .all(|r| r.has_privileged && !r.mask_fg.is_sentinel()));
    let none = generate(&small(10, 0.0, 1)).unwrap();
    assert!(none
        .records
        .iter()
        .all(|r| !r.has_privileged && r.mask_fg.is_sentinel()));

    for p in [0.1, 0.25, 0.5, 0.77] {
        let c = generate(&small(13, p, 4)).unwrap();
        for class in 0..c.classes {
            let members: Vec<_> = c.records.iter().filter(|r| r.label == class).collect();
            assert_eq!(members.len(), 13);
            let kept = members.iter().filter(|r| r.has_privileged).count() as f64;
            assert!(
                (kept - p * 13.0).abs() <= 1.0,
                "class {class} p {p}: {kept}"
            );
        }
    }
}

#[test]
fn images_do_not_depend_on_privileged_fraction() {
    let a = generate(&small(5, 1.0, 9)).unwrap();
    let b = generate(&small(5, 0.3, 9)).unwrap();
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.image, y.image);
        assert_eq!(x.label, y.label);
    }
}

#[test]
fn reflagging_gives_nested_sets() {
    let base = generate(&small(20, 1.0, 2)).unwrap();
    let lo = base.with_privileged_fraction(0.2, 5).unwrap();
    let hi = base.with_privileged_fraction(0.6, 5).unwrap();
    for (l, h) in lo.records.iter().zip(&hi.records) {
        assert!(!l.has_privileged || h.has_privileged);
    }
    assert_eq!(lo.privileged_count(), 8 * 4);
}

#[test]
fn generation_is_deterministic() {
    assert_eq!(
        generate(&small(4, 0.5, 3)).unwrap(),
        generate(&small(4, 0.5, 3)).unwrap()
    );
    assert_ne!(
        generate(&small(4, 0.5, 3)).unwrap(),
        generate(&small(4, 0.5, 4)).unwrap()
    );
}

#[test]
fn too_many_classes_rejected() {
    let spec = CorpusSpec {
        classes: 9,
        ..CorpusSpec::default()
    };
    assert!(matches!(generate(&spec), Err(Error::Config(_))));
}

#[test]
fn file_size_is_exact() {
    let spec = CorpusSpec {
        classes: 4,
        per_class: 25,
        image_size: 12,
        ..CorpusSpec::default()
    };
    let corpus = generate(&spec).unwrap();
    assert_eq!(corpus.records.len(), 100);
    let bytes = encode_corpus(&corpus).unwrap();
    assert_eq!(bytes.len(), CORPUS_HEADER_LEN + 100 * record_len(12, 12));
    assert_eq!(
        CORPUS_HEADER_LEN + 100 * (4 + 1 + 3 * 144 + 144 + 4),
        bytes.len()
    );
}

#[test]
fn round_trip_and_corruption() {
    let corpus = generate(&small(3, 0.5, 6)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.bin");
    write_corpus(&corpus, &path).unwrap();
    assert_eq!(read_corpus(&path).unwrap(), corpus);

    let bytes = encode_corpus(&corpus).unwrap();
    assert!(matches!(
        decode_corpus(&bytes[..bytes.len() - 3]),
        Err(Error::Truncated(_))
    ));
    assert!(matches!(
        decode_corpus(&bytes[..10]),
        Err(Error::MalformedHeader(_))
    ));

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(
        decode_corpus(&bad_magic),
        Err(Error::MalformedHeader(_))
    ));

    let mut flipped = bytes.clone();
    let pixel = CORPUS_HEADER_LEN + record_len(16, 16) + 4 + 1 + 7;
    flipped[pixel] ^= 0x01;
    match decode_corpus(&flipped) {
        Err(Error::Checksum { record, .. }) => assert_eq!(record, 1),
        other => panic!("expected checksum error, got {other:?}"),
    }
}

#[test]
fn downsampling_rules() {
    let ones = Mask::from_fn(32, 32, Polarity::Foreground, Resolution::Image, |_, _| true);
    let target = LayerShape::new(1, 8, 8, 3).unwrap();
    assert_eq!(downsample_mask(&ones, target).unwrap().count_ones(), 64);

    let sentinel = Mask::sentinel(32, 32, Polarity::Foreground, Resolution::Image);
    assert!(downsample_mask(&sentinel, target).unwrap().is_sentinel());

    let quadrant = Mask::from_fn(4, 4, Polarity::Foreground, Resolution::Image, |r, c| {
        r < 2 && c >= 2
    });
    let down = downsample_mask(&quadrant, LayerShape::new(1, 2, 2, 1).unwrap()).unwrap();
    assert_eq!(down.data().data(), &[0.0, 1.0, 0.0, 0.0]);

    let up = LayerShape::new(1, 64, 64, 0).unwrap();
    assert!(downsample_mask(&ones, up).is_err());
}

#[test]
fn feature_masks_are_complementary() {
    let corpus = generate(&small(4, 0.5, 12)).unwrap();
    for r in &corpus.records {
        let pair = r.feature_masks(4, 4).unwrap();
        if r.has_privileged {
            for (f, b) in pair.fg.data().data().iter().zip(pair.bg.data().data()) {
                assert_eq!(f + b, 1.0);
            }
        } else {
            assert!(pair.is_sentinel());
        }
    }
}

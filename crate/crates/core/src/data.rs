//! Synthetic labelled shapes over textured backgrounds, with exact
//! foreground masks, a controllable privileged fraction and a binary corpus
//! format.
//!
//! Sample `i` belongs to class `i % K` and draws all of its randomness from a
//! generator seeded with `hash(seed, i)`, so any sample can be regenerated in
//! isolation.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Error, Result};
use crate::losses::{Mask, MaskPair, Polarity, Resolution};
use crate::tensor::{LayerShape, Tensor};

/// SplitMix64 finalizer, used to derive independent per-sample seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, stream))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Disk,
    Square,
    Triangle,
    Cross,
    Ring,
    Bar,
    LShape,
    Diamond,
}

pub const SHAPES: [ShapeKind; 8] = [
    ShapeKind::Disk,
    ShapeKind::Square,
    ShapeKind::Triangle,
    ShapeKind::Cross,
    ShapeKind::Ring,
    ShapeKind::Bar,
    ShapeKind::LShape,
    ShapeKind::Diamond,
];

impl ShapeKind {
    /// Membership of the offset `(dx, dy)` from the shape centre, for a shape
    /// of half-extent `r`. `dy` grows downwards.
    pub fn contains(self, dx: f64, dy: f64, r: f64) -> bool {
        let (ax, ay) = (dx.abs(), dy.abs());
        match self {
            ShapeKind::Disk => dx * dx + dy * dy <= r * r,
            ShapeKind::Square => ax <= 0.8 * r && ay <= 0.8 * r,
            ShapeKind::Triangle => ay <= r && ax <= 0.5 * (dy + r),
            ShapeKind::Cross => (ax <= r / 3.0 && ay <= r) || (ay <= r / 3.0 && ax <= r),
            ShapeKind::Ring => {
                let d2 = dx * dx + dy * dy;
                d2 <= r * r && d2 >= 0.3 * r * r
            }
            ShapeKind::Bar => ax <= r && ay <= 0.35 * r,
            ShapeKind::LShape => {
                let vertical = (-r..=-r / 3.0).contains(&dx) && ay <= r;
                let horizontal = (r / 3.0..=r).contains(&dy) && ax <= r;
                vertical || horizontal
            }
            ShapeKind::Diamond => ax + ay <= r,
        }
    }
}

/// One rendered object: kind, centre, half-extent and colour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeInstance {
    pub kind: ShapeKind,
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub color: [f64; 3],
}

impl ShapeInstance {
    /// Whether the centre of pixel `(row, col)` lies inside the shape.
    pub fn covers(&self, row: usize, col: usize) -> bool {
        let dx = col as f64 + 0.5 - self.center_x;
        let dy = row as f64 + 0.5 - self.center_y;
        self.kind.contains(dx, dy, self.radius)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TextureKind {
    HorizontalStripes,
    VerticalStripes,
    DiagonalStripes,
    AntiDiagonalStripes,
    Checker,
    Dots,
    Rings,
    Plaid,
}

pub const TEXTURES: [TextureKind; 8] = [
    TextureKind::HorizontalStripes,
    TextureKind::VerticalStripes,
    TextureKind::DiagonalStripes,
    TextureKind::AntiDiagonalStripes,
    TextureKind::Checker,
    TextureKind::Dots,
    TextureKind::Rings,
    TextureKind::Plaid,
];

impl TextureKind {
    /// Two-tone pattern value at pixel `(row, col)`: `true` selects the second colour.
    fn pattern(self, row: f64, col: f64, period: f64, phase: f64, origin: (f64, f64)) -> bool {
        let band = |v: f64| ((v + phase) / period).rem_euclid(2.0) >= 1.0;
        match self {
            TextureKind::HorizontalStripes => band(row),
            TextureKind::VerticalStripes => band(col),
            TextureKind::DiagonalStripes => band((row + col) / std::f64::consts::SQRT_2),
            TextureKind::AntiDiagonalStripes => band((row - col) / std::f64::consts::SQRT_2),
            TextureKind::Checker => band(row) ^ band(col),
            TextureKind::Dots => {
                let fy = ((row + phase) / period).rem_euclid(1.0) - 0.5;
                let fx = ((col + phase) / period).rem_euclid(1.0) - 0.5;
                fx * fx + fy * fy <= 0.09
            }
            TextureKind::Rings => {
                let d = ((row - origin.0).powi(2) + (col - origin.1).powi(2)).sqrt();
                band(d)
            }
            TextureKind::Plaid => {
                let fy = ((row + phase) / period).rem_euclid(1.0);
                let fx = ((col + phase) / period).rem_euclid(1.0);
                fy < 0.3 || fx < 0.3
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BackgroundMode {
    /// Texture family drawn from a class-conditional distribution.
    Informative,
    /// Independent per-pixel noise, carrying no class signal.
    Noise,
}

impl std::str::FromStr for BackgroundMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "informative" => Ok(Self::Informative),
            "noise" => Ok(Self::Noise),
            other => Err(Error::Config(format!("unknown background mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for BackgroundMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Informative => "informative",
            Self::Noise => "noise",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub classes: usize,
    pub per_class: usize,
    pub image_size: usize,
    pub privileged_fraction: f64,
    pub background: BackgroundMode,
    /// Probability that a background texture is drawn uniformly instead of
    /// from the sample's class family.
    pub texture_mixing: f64,
    pub seed: u64,
    /// Seed for choosing which samples keep their masks; defaults to `seed`.
    pub flag_seed: Option<u64>,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            classes: 8,
            per_class: 200,
            image_size: 32,
            privileged_fraction: 1.0,
            background: BackgroundMode::Informative,
            texture_mixing: 0.5,
            seed: 0,
            flag_seed: None,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.classes > SHAPES.len() {
            return Err(Error::Config(format!(
                "classes must be in 1..={}, got {}",
                SHAPES.len(),
                self.classes
            )));
        }
        if self.per_class == 0 {
            return Err(Error::Config("per_class must be >= 1".into()));
        }
        if self.image_size < 8 {
            return Err(Error::Config(format!(
                "image size must be >= 8, got {}",
                self.image_size
            )));
        }
        if !(0.0..=1.0).contains(&self.privileged_fraction) {
            return Err(Error::Config(format!(
                "privileged fraction must be in [0,1], got {}",
                self.privileged_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.texture_mixing) {
            return Err(Error::Config(format!(
                "texture mixing must be in [0,1], got {}",
                self.texture_mixing
            )));
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.classes * self.per_class
    }
}

/// One labelled image. `mask_fg` is the all-zeros sentinel exactly when
/// `has_privileged` is false.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub image: Tensor,
    pub label: usize,
    pub mask_fg: Mask,
    pub has_privileged: bool,
}

impl SampleRecord {
    pub fn height(&self) -> usize {
        self.image.dim(1)
    }

    pub fn width(&self) -> usize {
        self.image.dim(2)
    }

    /// Foreground/background masks at feature resolution `(h, w)`.
    pub fn feature_masks(&self, h: usize, w: usize) -> Result<MaskPair> {
        if !self.has_privileged {
            return Ok(MaskPair::sentinel(h, w, Resolution::Feature));
        }
        let target = LayerShape::new(1, h, w, 0)?;
        MaskPair::from_foreground(downsample_mask(&self.mask_fg, target)?)
    }

    /// Drops the annotation, leaving the sentinel mask.
    pub fn without_privileged(mut self) -> Self {
        self.mask_fg = Mask::sentinel(
            self.height(),
            self.width(),
            Polarity::Foreground,
            Resolution::Image,
        );
        self.has_privileged = false;
        self
    }
}

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn color_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Shape of sample `index`. `generate` paints exactly this geometry; the colour
/// may be redrawn for contrast with the background.
pub fn shape_instance(spec: &CorpusSpec, index: usize) -> ShapeInstance {
    let mut rng = rng_for(spec.seed, index as u64);
    draw_shape(spec, index % spec.classes, &mut rng)
}

fn draw_shape(spec: &CorpusSpec, label: usize, rng: &mut ChaCha8Rng) -> ShapeInstance {
    let size = spec.image_size as f64;
    let radius = size * rng.random_range(0.2..0.32);
    let center_x = rng.random_range(radius..size - radius);
    let center_y = rng.random_range(radius..size - radius);
    ShapeInstance {
        kind: SHAPES[label],
        center_x,
        center_y,
        radius,
        color: random_color(rng),
    }
}

fn render(spec: &CorpusSpec, index: usize) -> (Tensor, Mask) {
    let label = index % spec.classes;
    let mut rng = rng_for(spec.seed, index as u64);
    let mut shape = draw_shape(spec, label, &mut rng);
    let n = spec.image_size;
    let mut image = vec![0.0; 3 * n * n];

    match spec.background {
        BackgroundMode::Informative => {
            let family = if rng.random::<f64>() < spec.texture_mixing {
                TEXTURES[rng.random_range(0..TEXTURES.len())]
            } else {
                TEXTURES[label % TEXTURES.len()]
            };
            let period = rng.random_range(3.0..6.0);
            let phase = rng.random_range(0.0..2.0 * period);
            let origin = (
                rng.random_range(0.0..n as f64),
                rng.random_range(0.0..n as f64),
            );
            let a = random_color(&mut rng);
            let mut b = random_color(&mut rng);
            for _ in 0..16 {
                if color_distance(a, b) >= 0.35 {
                    break;
                }
                b = random_color(&mut rng);
            }
            for row in 0..n {
                for col in 0..n {
                    let second = family.pattern(row as f64, col as f64, period, phase, origin);
                    let color = if second { b } else { a };
                    for ch in 0..3 {
                        image[(ch * n + row) * n + col] = color[ch];
                    }
                }
            }
            for _ in 0..16 {
                if color_distance(shape.color, a).min(color_distance(shape.color, b)) >= 0.3 {
                    break;
                }
                shape.color = random_color(&mut rng);
            }
        }
        BackgroundMode::Noise => {
            for v in image.iter_mut() {
                *v = rng.random();
            }
        }
    }

    let mask = Mask::from_fn(n, n, Polarity::Foreground, Resolution::Image, |r, c| {
        shape.covers(r, c)
    });
    for row in 0..n {
        for col in 0..n {
            if mask.data().data()[row * n + col] == 1.0 {
                for ch in 0..3 {
                    image[(ch * n + row) * n + col] = shape.color[ch];
                }
            }
        }
    }
    for v in image.iter_mut() {
        let jitter: f64 = rng.random_range(-0.04..0.04);
        *v = quantize(*v + jitter);
    }
    (Tensor::new(&[3, n, n], image).expect("image shape"), mask)
}

/// Which samples of each class keep their annotation: for every class, a
/// seeded permutation of its members, of which the first `round(p·n)` are
/// privileged. Lower fractions select subsets of higher ones.
pub fn privileged_flags(
    labels: &[usize],
    classes: usize,
    fraction: f64,
    flag_seed: u64,
) -> Vec<bool> {
    let mut flags = vec![false; labels.len()];
    for class in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng_for(flag_seed, 0xF1A6_0000 + class as u64));
        let keep = (fraction * members.len() as f64).round() as usize;
        for &i in members.iter().take(keep) {
            flags[i] = true;
        }
    }
    flags
}

pub fn generate(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let labels: Vec<usize> = (0..spec.count()).map(|i| i % spec.classes).collect();
    let flags = privileged_flags(
        &labels,
        spec.classes,
        spec.privileged_fraction,
        spec.flag_seed.unwrap_or(spec.seed),
    );
    let records = (0..spec.count())
        .map(|i| {
            let (image, mask) = render(spec, i);
            let record = SampleRecord {
                image,
                label: labels[i],
                mask_fg: mask,
                has_privileged: true,
            };
            if flags[i] {
                record
            } else {
                record.without_privileged()
            }
        })
        .collect();
    Ok(Corpus {
        classes: spec.classes,
        height: spec.image_size,
        width: spec.image_size,
        records,
    })
}

/// Block-averages a mask onto `target`'s grid and thresholds at 0.5.
pub fn downsample_mask(mask: &Mask, target: LayerShape) -> Result<Mask> {
    let (h_in, w_in) = (mask.height(), mask.width());
    let (h, w) = (target.height, target.width);
    if h > h_in || w > w_in {
        return Err(Error::InvalidArgument(format!(
            "cannot upsample a {h_in}x{w_in} mask to {h}x{w}"
        )));
    }
    let src = mask.data().data();
    let data = Tensor::from_fn(&[h, w], |i| {
        let (r, c) = (i / w, i % w);
        let (r0, r1) = (r * h_in / h, (r + 1) * h_in / h);
        let (c0, c1) = (c * w_in / w, (c + 1) * w_in / w);
        let mut sum = 0.0;
        for y in r0..r1 {
            sum += src[y * w_in + c0..y * w_in + c1].iter().sum::<f64>();
        }
        let mean = sum / ((r1 - r0) * (c1 - c0)) as f64;
        if mean >= 0.5 {
            1.0
        } else {
            0.0
        }
    });
    Mask::new(data, mask.polarity(), Resolution::Feature)
}

/// `[B,3,H,W]` stack of record images.
pub fn stack_images<'a>(records: impl IntoIterator<Item = &'a SampleRecord>) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut shape: Option<Vec<usize>> = None;
    let mut count = 0;
    for r in records {
        match &shape {
            None => shape = Some(r.image.shape().to_vec()),
            Some(s) if s.as_slice() != r.image.shape() => {
                return Err(shape_err!(
                    "images differ in shape: {s:?} vs {:?}",
                    r.image.shape()
                ));
            }
            _ => {}
        }
        data.extend_from_slice(r.image.data());
        count += 1;
    }
    let mut dims = shape.ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    dims.insert(0, count);
    Tensor::new(&dims, data)
}

/// Images, labels and feature-resolution masks for one step.
#[derive(Clone, Debug)]
pub struct Batch {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub masks: Vec<MaskPair>,
}

impl Batch {
    pub fn from_records<'a>(
        records: impl IntoIterator<Item = &'a SampleRecord> + Clone,
        feature_hw: (usize, usize),
    ) -> Result<Self> {
        let images = stack_images(records.clone())?;
        let mut labels = Vec::new();
        let mut masks = Vec::new();
        for r in records {
            labels.push(r.label);
            masks.push(r.feature_masks(feature_hw.0, feature_hw.1)?);
        }
        Ok(Self {
            images,
            labels,
            masks,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A labelled set of same-sized images.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub records: Vec<SampleRecord>,
}

impl Corpus {
    /// Same images with the annotation kept on a stratified `fraction` of each
    /// class, chosen by `flag_seed`. Only samples that currently carry masks
    /// can stay privileged.
    pub fn with_privileged_fraction(&self, fraction: f64, flag_seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Config(format!(
                "privileged fraction must be in [0,1], got {fraction}"
            )));
        }
        let labels: Vec<usize> = self.records.iter().map(|r| r.label).collect();
        let flags = privileged_flags(&labels, self.classes, fraction, flag_seed);
        let records = self
            .records
            .iter()
            .zip(flags)
            .map(|(r, keep)| {
                if keep && r.has_privileged {
                    r.clone()
                } else {
                    r.clone().without_privileged()
                }
            })
            .collect();
        Ok(Self {
            records,
            ..self.clone()
        })
    }

    /// Splits off the last `ceil(fraction·n)` members of every class.
    pub fn holdout(&self, fraction: f64) -> (Self, Self) {
        let mut counts = vec![0usize; self.classes];
        for r in &self.records {
            counts[r.label] += 1;
        }
        let held: Vec<usize> = counts
            .iter()
            .map(|&n| ((fraction * n as f64).ceil() as usize).min(n))
            .collect();
        let mut seen = vec![0usize; self.classes];
        let (mut train, mut val) = (Vec::new(), Vec::new());
        for r in &self.records {
            seen[r.label] += 1;
            if seen[r.label] > counts[r.label] - held[r.label] {
                val.push(r.clone());
            } else {
                train.push(r.clone());
            }
        }
        let make = |records| Self {
            classes: self.classes,
            height: self.height,
            width: self.width,
            records,
        };
        (make(train), make(val))
    }

    pub fn privileged_count(&self) -> usize {
        self.records.iter().filter(|r| r.has_privileged).count()
    }
}

pub const CORPUS_MAGIC: &[u8; 6] = b"GOSYN1";
pub const CORPUS_VERSION: u32 = 1;
pub const CORPUS_HEADER_LEN: usize = 6 + 5 * 4;

/// Bytes per record: label, flag, interleaved RGB, mask, CRC32.
pub fn record_len(height: usize, width: usize) -> usize {
    4 + 1 + 3 * height * width + height * width + 4
}

pub fn encode_corpus(corpus: &Corpus) -> Result<Vec<u8>> {
    let (h, w) = (corpus.height, corpus.width);
    let mut out = Vec::with_capacity(CORPUS_HEADER_LEN + corpus.records.len() * record_len(h, w));
    out.extend_from_slice(CORPUS_MAGIC);
    for v in [
        CORPUS_VERSION,
        corpus.classes as u32,
        corpus.records.len() as u32,
        h as u32,
        w as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (i, r) in corpus.records.iter().enumerate() {
        if r.image.shape() != [3, h, w] || (r.mask_fg.height(), r.mask_fg.width()) != (h, w) {
            return Err(shape_err!(
                "record {i} does not match the {h}x{w} corpus geometry"
            ));
        }
        let start = out.len();
        out.extend_from_slice(&(r.label as u32).to_le_bytes());
        out.push(r.has_privileged as u8);
        let img = r.image.data();
        for p in 0..h * w {
            for ch in 0..3 {
                out.push((255.0 * img[ch * h * w + p]).round().clamp(0.0, 255.0) as u8);
            }
        }
        out.extend(r.mask_fg.data().data().iter().map(|&m| m as u8));
        let crc = crc32fast::hash(&out[start..]);
        out.extend_from_slice(&crc.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_corpus(bytes: &[u8]) -> Result<Corpus> {
    if bytes.len() < CORPUS_HEADER_LEN {
        return Err(Error::MalformedHeader(format!(
            "corpus header needs {CORPUS_HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    if &bytes[..6] != CORPUS_MAGIC {
        return Err(Error::MalformedHeader("missing GOSYN1 magic".into()));
    }
    let field = |i: usize| u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().unwrap());
    let (version, classes, count, h, w) = (
        field(0),
        field(1) as usize,
        field(2) as usize,
        field(3) as usize,
        field(4) as usize,
    );
    if version != CORPUS_VERSION {
        return Err(Error::MalformedHeader(format!(
            "unsupported corpus version {version}"
        )));
    }
    if classes == 0 || h == 0 || w == 0 {
        return Err(Error::MalformedHeader(format!(
            "degenerate geometry: K={classes}, {h}x{w}"
        )));
    }
    let rec = record_len(h, w);
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let start = CORPUS_HEADER_LEN + i * rec;
        let Some(raw) = bytes.get(start..start + rec) else {
            return Err(Error::Truncated(format!(
                "record {i} of {count} needs bytes {start}..{} but the file has {}",
                start + rec,
                bytes.len()
            )));
        };
        let (payload, crc_bytes) = raw.split_at(rec - 4);
        let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(Error::Checksum {
                record: i,
                stored,
                computed,
            });
        }
        let label = u32::from_le_bytes(payload[..4].try_into().unwrap()) as usize;
        if label >= classes {
            return Err(Error::Data(format!(
                "record {i}: label {label} >= K={classes}"
            )));
        }
        let has_privileged = match payload[4] {
            0 => false,
            1 => true,
            other => return Err(Error::Data(format!("record {i}: privileged flag {other}"))),
        };
        let pixels = &payload[5..5 + 3 * h * w];
        let mut image = vec![0.0; 3 * h * w];
        for (p, rgb) in pixels.chunks_exact(3).enumerate() {
            for ch in 0..3 {
                image[ch * h * w + p] = rgb[ch] as f64 / 255.0;
            }
        }
        let mask_bytes = &payload[5 + 3 * h * w..];
        if let Some(bad) = mask_bytes.iter().find(|&&m| m > 1) {
            return Err(Error::Data(format!("record {i}: mask byte {bad}")));
        }
        let mask = Tensor::new(&[h, w], mask_bytes.iter().map(|&m| m as f64).collect())?;
        let mask_fg = Mask::new(mask, Polarity::Foreground, Resolution::Image)?;
        if !has_privileged && !mask_fg.is_sentinel() {
            return Err(Error::Data(format!(
                "record {i}: mask present on a non-privileged sample"
            )));
        }
        records.push(SampleRecord {
            image: Tensor::new(&[3, h, w], image)?,
            label,
            mask_fg,
            has_privileged,
        });
    }
    let expected = CORPUS_HEADER_LEN + count * rec;
    if bytes.len() != expected {
        return Err(Error::MalformedHeader(format!(
            "header promises {count} records ({expected} bytes), file has {} bytes",
            bytes.len()
        )));
    }
    Ok(Corpus {
        classes,
        height: h,
        width: w,
        records,
    })
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_corpus(corpus)?)?;
    Ok(())
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    decode_corpus(&fs::read(path)?)
}

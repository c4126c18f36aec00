//! Representation diversity of a convolution layer.
//!
//! Each convolutional function is reduced to one scalar per sample (the
//! spatial mean of its feature map); correlations are Pearson correlations of
//! those scalars across samples. Model diversity averages `|corr|` over all
//! ordered pairs including `i == j`; group-wise diversity averages it over
//! cross-group pairs only.

use std::fmt::Write as _;
use std::ops::Range;

use crate::data::SampleRecord;
use crate::error::{shape_err, Error, Result};
use crate::model::GoCnnModel;
use crate::tensor::Tensor;

/// Disjoint channel groups covering `0..channels`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    names: Vec<String>,
    channels: usize,
}

impl GroupPartition {
    pub fn new(groups: Vec<Vec<usize>>, names: Vec<String>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidArgument(
                "partition needs at least one group".into(),
            ));
        }
        if names.len() != groups.len() {
            return Err(Error::InvalidArgument(format!(
                "{} groups but {} names",
                groups.len(),
                names.len()
            )));
        }
        let channels: usize = groups.iter().map(Vec::len).sum();
        let mut seen = vec![false; channels];
        for &i in groups.iter().flatten() {
            if i >= channels {
                return Err(Error::InvalidArgument(format!(
                    "channel {i} outside 0..{channels}: partition is incomplete"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!(
                    "channel {i} appears in two groups"
                )));
            }
        }
        Ok(Self {
            groups,
            names,
            channels,
        })
    }

    /// Two contiguous groups: `foreground = 0..fg`, `background = fg..channels`.
    pub fn foreground_background(channels: usize, fg: usize) -> Result<Self> {
        if fg == 0 || fg >= channels {
            return Err(Error::InvalidArgument(format!(
                "foreground size {fg} must be in 1..{channels}"
            )));
        }
        Self::new(
            vec![(0..fg).collect(), (fg..channels).collect()],
            vec!["foreground".into(), "background".into()],
        )
    }

    /// The 3:1 foreground/background split of `channels` (rounded down for the
    /// foreground when `channels` is not a multiple of 4).
    pub fn three_to_one(channels: usize) -> Result<Self> {
        Self::foreground_background(channels, (3 * channels / 4).max(1))
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Contiguous range of a group, if it is one.
    pub fn range(&self, group: usize) -> Option<Range<usize>> {
        let g = self.groups.get(group)?;
        let (&first, &last) = (g.first()?, g.last()?);
        g.windows(2)
            .all(|w| w[1] == w[0] + 1)
            .then_some(first..last + 1)
    }

    /// `Z = Σ_{s≠t} |G_s|·|G_t|` over ordered pairs.
    pub fn normalizer(&self) -> usize {
        let total = self.channels * self.channels;
        total - self.groups.iter().map(|g| g.len() * g.len()).sum::<usize>()
    }

    fn group_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.channels];
        for (gi, g) in self.groups.iter().enumerate() {
            for &i in g {
                out[i] = gi;
            }
        }
        out
    }
}

/// Per-function scalar responses, `[S, c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationSample {
    responses: Tensor,
}

impl ActivationSample {
    pub fn new(responses: Tensor) -> Result<Self> {
        if responses.rank() != 2 {
            return Err(shape_err!(
                "responses must be [S,c], got {:?}",
                responses.shape()
            ));
        }
        if responses.dim(0) < 2 {
            return Err(Error::InvalidArgument(
                "correlation needs at least two samples".into(),
            ));
        }
        Ok(Self { responses })
    }

    pub fn responses(&self) -> &Tensor {
        &self.responses
    }

    pub fn samples(&self) -> usize {
        self.responses.dim(0)
    }

    pub fn functions(&self) -> usize {
        self.responses.dim(1)
    }

    fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let c = self.functions();
        self.responses.data().iter().skip(j).step_by(c).copied()
    }
}

/// Spatial means of every function at conv layer `layer_index` (1-based) over
/// `samples`.
pub fn response_matrix(
    model: &GoCnnModel,
    layer_index: usize,
    samples: &[SampleRecord],
) -> Result<ActivationSample> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "response_matrix needs samples".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut width = 0;
    for chunk in samples.chunks(64) {
        let images = crate::data::stack_images(chunk.iter())?;
        let maps = model.layer_output(&images, layer_index)?;
        let pooled = crate::tensor::kernels::global_avg_pool(&maps)?;
        width = pooled.dim(1);
        rows.extend_from_slice(pooled.data());
    }
    ActivationSample::new(Tensor::new(&[samples.len(), width], rows)?)
}

/// Pearson correlation matrix. Columns with zero variance correlate 0 with
/// everything, including themselves.
pub fn pearson_corr(responses: &ActivationSample) -> Tensor {
    let (s, c) = (responses.samples(), responses.functions());
    let mut centered = Vec::with_capacity(c);
    let mut norms = Vec::with_capacity(c);
    for j in 0..c {
        let col: Vec<f64> = responses.column(j).collect();
        let constant = col.iter().all(|&v| v == col[0]);
        let mean = col.iter().sum::<f64>() / s as f64;
        let dev: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let norm = dev.iter().map(|d| d * d).sum::<f64>().sqrt();
        norms.push(if constant { 0.0 } else { norm });
        centered.push(dev);
    }
    let mut corr = Tensor::zeros(&[c, c]);
    for i in 0..c {
        for j in i..c {
            let value = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else if i == j {
                1.0
            } else {
                let dot: f64 = centered[i]
                    .iter()
                    .zip(&centered[j])
                    .map(|(a, b)| a * b)
                    .sum();
                (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            };
            corr.data_mut()[i * c + j] = value;
            corr.data_mut()[j * c + i] = value;
        }
    }
    corr
}

fn square_dim(corr: &Tensor) -> Result<usize> {
    match *corr.shape() {
        [a, b] if a == b && a > 0 => Ok(a),
        _ => Err(shape_err!(
            "correlation matrix must be square, got {:?}",
            corr.shape()
        )),
    }
}

/// `ζ = 1 − (1/c²) Σ_{i,j} |corr_ij|`, diagonal included.
pub fn model_diversity(corr: &Tensor) -> Result<f64> {
    let c = square_dim(corr)?;
    let total: f64 = corr.data().iter().map(|v| v.abs()).sum();
    Ok(1.0 - total / (c * c) as f64)
}

/// `ζ` with the diagonal excluded: `1 − mean_{i≠j} |corr_ij|`.
pub fn model_diversity_off_diagonal(corr: &Tensor) -> Result<f64> {
    let c = square_dim(corr)?;
    if c < 2 {
        return Ok(1.0);
    }
    let total: f64 = (0..c * c)
        .filter(|idx| idx / c != idx % c)
        .map(|idx| corr.data()[idx].abs())
        .sum();
    Ok(1.0 - total / (c * (c - 1)) as f64)
}

/// `ζ_g = 1 − (1/Z) Σ_{s≠t} Σ_{i∈G_s, j∈G_t} |corr_ij|`. A single-group
/// partition has no cross pairs and scores 1.
pub fn group_diversity(corr: &Tensor, partition: &GroupPartition) -> Result<f64> {
    Ok(1.0 - mean_abs_cross(corr, partition)?)
}

fn mean_abs_cross(corr: &Tensor, partition: &GroupPartition) -> Result<f64> {
    let c = square_dim(corr)?;
    if c != partition.channels() {
        return Err(Error::InvalidArgument(format!(
            "partition covers {} channels, correlation matrix has {c}",
            partition.channels()
        )));
    }
    let z = partition.normalizer();
    if z == 0 {
        return Ok(0.0);
    }
    let group = partition.group_of();
    let total: f64 = (0..c * c)
        .filter(|idx| group[idx / c] != group[idx % c])
        .map(|idx| corr.data()[idx].abs())
        .sum();
    Ok(total / z as f64)
}

fn mean_abs_within(corr: &Tensor, partition: &GroupPartition) -> Result<f64> {
    let c = square_dim(corr)?;
    let group = partition.group_of();
    let (total, count) = (0..c * c)
        .filter(|idx| idx / c != idx % c && group[idx / c] == group[idx % c])
        .fold((0.0, 0usize), |(s, n), idx| {
            (s + corr.data()[idx].abs(), n + 1)
        });
    Ok(if count == 0 {
        0.0
    } else {
        total / count as f64
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiversityReport {
    pub layer_index: usize,
    pub zeta: f64,
    pub zeta_off_diagonal: f64,
    pub zeta_group: f64,
    pub mean_abs_cross_corr: f64,
    pub mean_abs_within_corr: f64,
    pub correlation_matrix: Tensor,
    pub partition: GroupPartition,
}

impl DiversityReport {
    pub fn from_responses(
        layer_index: usize,
        responses: &ActivationSample,
        partition: GroupPartition,
    ) -> Result<Self> {
        let corr = pearson_corr(responses);
        Self::from_correlation(layer_index, corr, partition)
    }

    pub fn from_correlation(
        layer_index: usize,
        corr: Tensor,
        partition: GroupPartition,
    ) -> Result<Self> {
        let cross = mean_abs_cross(&corr, &partition)?;
        Ok(Self {
            layer_index,
            zeta: model_diversity(&corr)?,
            zeta_off_diagonal: model_diversity_off_diagonal(&corr)?,
            zeta_group: 1.0 - cross,
            mean_abs_cross_corr: cross,
            mean_abs_within_corr: mean_abs_within(&corr, &partition)?,
            correlation_matrix: corr,
            partition,
        })
    }
}

/// Report for conv layer `layer_index` of `model`. The final layer uses the
/// model's foreground/background partition; earlier layers are split in the
/// same proportion.
pub fn layer_report(
    model: &GoCnnModel,
    layer_index: usize,
    samples: &[SampleRecord],
) -> Result<DiversityReport> {
    let responses = response_matrix(model, layer_index, samples)?;
    let config = model.config();
    let partition = if layer_index == config.architecture.conv_layers() {
        model.partition()
    } else {
        let c = responses.functions();
        let (a, b) = config.group_ratio;
        GroupPartition::foreground_background(c, (c * a / (a + b)).max(1))?
    };
    DiversityReport::from_responses(layer_index, &responses, partition)
}

pub const REPORT_CSV_HEADER: &str =
    "layer,zeta,zeta_group,mean_abs_cross_corr,mean_abs_within_corr,zeta_off_diagonal";

pub fn reports_to_csv(reports: &[DiversityReport]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.layer_index,
            r.zeta,
            r.zeta_group,
            r.mean_abs_cross_corr,
            r.mean_abs_within_corr,
            r.zeta_off_diagonal
        );
    }
    out
}

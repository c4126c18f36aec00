//! Channel-max heatmaps of the final layer, as binary PGM and CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::SampleRecord;
use crate::error::{Error, Result};
use crate::model::{GoCnnModel, Variant};
use crate::tensor::Tensor;

/// A single-channel map; `values` is row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub name: String,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    /// Max over `channels` of sample `n` in an NCHW feature tensor.
    pub fn channel_max(
        name: &str,
        features: &Tensor,
        n: usize,
        channels: std::ops::Range<usize>,
    ) -> Self {
        let (c, h, w) = (features.dim(1), features.dim(2), features.dim(3));
        let plane = h * w;
        let base = n * c * plane;
        let data = features.data();
        let values = (0..plane)
            .map(|p| {
                channels
                    .clone()
                    .map(|ch| data[base + ch * plane + p])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        Self {
            name: name.to_string(),
            height: h,
            width: w,
            values,
        }
    }

    /// Min-max scaled to [0,1]. A flat or non-finite map becomes all zeros.
    pub fn normalized(&self) -> Vec<f64> {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if !(range.is_finite() && range > 0.0) {
            return vec![0.0; self.values.len()];
        }
        self.values.iter().map(|v| (v - lo) / range).collect()
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.normalized().iter().map(|v| (v * 255.0).round() as u8));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.width) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Parses a binary PGM with maxval below 256: `(width, height, pixels)`.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let bad = |m: &str| Error::Data(format!("not a P5 PGM: {m}"));
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("header ends early"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(bad("magic"));
    }
    let mut num = || -> Result<usize> { token()?.parse().map_err(|_| bad("dimension")) };
    let (width, height, maxval) = (num()?, num()?, num()?);
    if maxval == 0 || maxval > 255 {
        return Err(bad("maxval"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let raster = pos + 1;
    if bytes.len() != raster + width * height {
        return Err(bad("raster length"));
    }
    Ok((width, height, bytes[raster..].to_vec()))
}

/// Heatmaps for one image: foreground and background group maxima for a
/// grouped model, one whole-layer map for a vanilla one.
pub fn sample_heatmaps(model: &GoCnnModel, features: &Tensor, n: usize) -> Vec<Heatmap> {
    let c = model.config().final_channels();
    if model.variant() == Variant::Vanilla {
        return vec![Heatmap::channel_max("layer", features, n, 0..c)];
    }
    let fg = model.config().fg_channels();
    vec![
        Heatmap::channel_max("fg", features, n, 0..fg),
        Heatmap::channel_max("bg", features, n, fg..c),
    ]
}

/// Writes `sampleNNN_<group>.pgm` and `.csv` for each record; returns the paths.
pub fn visualize_groups(
    model: &GoCnnModel,
    records: &[SampleRecord],
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (i, record) in records.iter().enumerate() {
        let images = crate::data::stack_images([record])?;
        let features = model.final_features(&images)?;
        for map in sample_heatmaps(model, &features, 0) {
            let stem = format!("sample{i:03}_{}", map.name);
            let pgm = out_dir.join(format!("{stem}.pgm"));
            let csv = out_dir.join(format!("{stem}.csv"));
            std::fs::write(&pgm, map.to_pgm())?;
            std::fs::write(&csv, map.to_csv())?;
            written.push(pgm);
            written.push(csv);
        }
    }
    Ok(written)
}

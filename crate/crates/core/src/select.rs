//! Gradient-based sharpness scoring and lucky-frame selection.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Frame, FrameSequence};

/// Default share of frames kept by [`select_frames`].
pub const DEFAULT_FRACTION: f64 = 0.5;

/// Mean Sobel gradient magnitude over interior pixels.
///
/// Uses the unnormalized 3x3 Sobel kernels; the one-pixel border is
/// excluded rather than padded.
pub fn sharpness(frame: &Frame) -> Result<f64> {
    let (w, h) = frame.dims();
    if w < 3 || h < 3 {
        return Err(Error::TooSmall {
            what: "sharpness",
            width: w,
            height: h,
            min_width: 3,
            min_height: 3,
        });
    }
    let p = frame.as_plane();
    let mut total = 0.0;
    for y in 1..h - 1 {
        let (up, mid, down) = (p.row(y - 1), p.row(y), p.row(y + 1));
        for x in 1..w - 1 {
            let gx = (up[x + 1] + 2.0 * mid[x + 1] + down[x + 1])
                - (up[x - 1] + 2.0 * mid[x - 1] + down[x - 1]);
            let gy = (down[x - 1] + 2.0 * down[x] + down[x + 1])
                - (up[x - 1] + 2.0 * up[x] + up[x + 1]);
            total += (gx * gx + gy * gy).sqrt();
        }
    }
    Ok(total / ((w - 2) * (h - 2)) as f64)
}

/// Per-frame sharpness and its sequence-max normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessSeries {
    pub frame_ids: Vec<String>,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl SharpnessSeries {
    pub fn from_raw(frame_ids: Vec<String>, raw: Vec<f64>) -> Result<Self> {
        if frame_ids.len() != raw.len() {
            return Err(Error::InvalidData(format!(
                "{} ids for {} scores",
                frame_ids.len(),
                raw.len()
            )));
        }
        let max = raw.iter().copied().fold(0.0_f64, f64::max);
        let normalized = if max > 0.0 {
            raw.iter().map(|v| v / max).collect()
        } else {
            vec![0.0; raw.len()]
        };
        Ok(SharpnessSeries {
            frame_ids,
            raw,
            normalized,
        })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Standard deviation over mean of the raw scores (population form).
    pub fn coefficient_of_variation(&self) -> f64 {
        let n = self.raw.len() as f64;
        let mean = self.raw.iter().sum::<f64>() / n;
        if mean == 0.0 {
            return 0.0;
        }
        let var = self.raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        var.sqrt() / mean
    }
}

pub fn sharpness_series(seq: &FrameSequence) -> Result<SharpnessSeries> {
    let raw = seq
        .frames()
        .par_iter()
        .map(sharpness)
        .collect::<Result<Vec<_>>>()?;
    SharpnessSeries::from_raw(seq.source_ids().to_vec(), raw)
}

/// Number of frames kept for a fraction of `n`: `ceil(fraction * n)`, at
/// least one.
pub fn selection_count(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "select fraction {fraction} outside (0, 1]"
        )));
    }
    // absorb representation error such as 0.07 * 100 = 7.000000000000001
    let k = (fraction * n as f64 - 1e-9).ceil() as usize;
    Ok(k.clamp(1, n))
}

/// Indices of the `k` highest scores, ties to the earlier index, returned
/// in ascending (temporal) order.
pub fn top_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Keep the sharpest `ceil(fraction * N)` frames in their original order.
pub fn select_frames(seq: &FrameSequence, fraction: f64) -> Result<FrameSequence> {
    let k = selection_count(seq.len(), fraction)?;
    if k == seq.len() {
        return Ok(seq.clone());
    }
    let series = sharpness_series(seq)?;
    seq.subset(&top_indices(&series.raw, k))
}

#[derive(Serialize, Deserialize)]
struct SeriesRow {
    frame_id: String,
    raw: f64,
    normalized: f64,
}

/// Write `frame_id,raw,normalized`, one row per frame.
pub fn export_series_csv(series: &SharpnessSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for ((id, raw), norm) in series.frame_ids.iter().zip(&series.raw).zip(&series.normalized) {
        w.serialize(SeriesRow {
            frame_id: id.clone(),
            raw: *raw,
            normalized: *norm,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_series_csv(path: impl AsRef<Path>) -> Result<SharpnessSeries> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let mut ids = Vec::new();
    let mut raw = Vec::new();
    let mut normalized = Vec::new();
    for row in r.deserialize() {
        let row: SeriesRow = row?;
        ids.push(row.frame_id);
        raw.push(row.raw);
        normalized.push(row.normalized);
    }
    Ok(SharpnessSeries {
        frame_ids: ids,
        raw,
        normalized,
    })
}

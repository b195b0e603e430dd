//! Fusion of a registered sequence in the DT-CWT domain.
//!
//! Every mode averages the lowpass residuals. Subbands are combined by a
//! [`FusionRule`] chosen by name from a [`Registry`]: `pixel_max` keeps the
//! largest-magnitude coefficient at each position, `region` segments the
//! mean activity of each level and lets one frame supply every orientation
//! inside each region.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use image::{ImageBuffer, Luma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtcwt::{self, DtcwtPyramid, FilterBank, Level, ORIENTATIONS};
use crate::error::{Error, Result};
use crate::image::{Frame, FrameSequence, Plane};
use crate::registry::Registry;

pub const PIXEL_MAX: &str = "pixel_max";
pub const REGION: &str = "region";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Registered rule name.
    pub mode: String,
    pub levels: usize,
    /// Feature pixels exceed `mean + threshold_k * stddev`.
    pub threshold_k: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            mode: REGION.into(),
            levels: dtcwt::DEFAULT_LEVELS,
            threshold_k: 1.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=dtcwt::MAX_LEVELS).contains(&self.levels) {
            return Err(Error::invalid(format!(
                "fusion levels must be in [1, {}], got {}",
                dtcwt::MAX_LEVELS,
                self.levels
            )));
        }
        if !(self.threshold_k > 0.0) || !self.threshold_k.is_finite() {
            return Err(Error::invalid(format!(
                "region threshold k must be > 0, got {}",
                self.threshold_k
            )));
        }
        fusion_rules().get(&self.mode)?;
        Ok(())
    }
}

/// Orientation-summed coefficient magnitude, one map per level.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityMap {
    pub levels: Vec<Plane>,
}

pub fn activity(pyr: &DtcwtPyramid) -> ActivityMap {
    ActivityMap {
        levels: pyr.levels.iter().map(level_activity).collect(),
    }
}

fn level_activity(level: &Level) -> Plane {
    let (w, h) = level.dims();
    let mut out = Plane::zeros(w, h);
    for band in &level.bands {
        for (i, a) in out.data_mut().iter_mut().enumerate() {
            *a += band.magnitude_at(i);
        }
    }
    out
}

/// Connected-component labels of one level; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub region_count: usize,
}

impl LabelImage {
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMap {
    /// Finest level first.
    pub levels: Vec<LabelImage>,
}

impl RegionMap {
    /// Write `regions_level{l}.png`, 16-bit grayscale whose values are the
    /// labels.
    pub fn dump(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, l) in self.levels.iter().enumerate() {
            let path = dir.join(format!("regions_level{}.png", i + 1));
            let data = l.labels.iter().map(|&v| v.min(u16::MAX as u32) as u16).collect();
            let img: ImageBuffer<Luma<u16>, Vec<u16>> =
                ImageBuffer::from_raw(l.width as u32, l.height as u32, data)
                    .expect("label buffer matches dims");
            img.save(&path).map_err(|e| Error::Encode {
                path: path.clone(),
                message: e.to_string(),
            })?;
        }
        Ok(())
    }
}

/// Label 8-connected pixels above `mean + k * stddev` in raster discovery
/// order.
pub fn segment_level(map: &Plane, threshold_k: f64) -> LabelImage {
    let (w, h) = map.dims();
    let n = map.len() as f64;
    let mean = map.mean();
    let var = map.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let t = mean + threshold_k * var.sqrt();

    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if labels[start] != 0 || !(map.data()[start] > t) {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if labels[j] == 0 && map.data()[j] > t {
                        labels[j] = next;
                        stack.push(j);
                    }
                }
            }
        }
    }
    LabelImage {
        width: w,
        height: h,
        labels,
        region_count: next as usize,
    }
}

/// Segment each level of a mean-activity stack.
pub fn segment(mean_activity: &[Plane], threshold_k: f64) -> RegionMap {
    RegionMap {
        levels: mean_activity
            .iter()
            .map(|m| segment_level(m, threshold_k))
            .collect(),
    }
}

/// How subband coefficients from several frames are merged.
pub trait FusionRule: Send + Sync {
    /// Fill `out`'s subbands (already zeroed, same shape as every input)
    /// from `pyrs`. Returns the region map if the rule computes one.
    fn fuse_subbands(
        &self,
        pyrs: &[DtcwtPyramid],
        config: &FusionConfig,
        out: &mut DtcwtPyramid,
    ) -> Result<Option<RegionMap>>;
}

/// Largest magnitude wins, independently per orientation and position;
/// ties go to the lowest frame index.
pub struct PixelMax;

/// Index of the frame with the largest coefficient magnitude in band `o`
/// at position `i` of level `l`.
fn argmax_magnitude(pyrs: &[DtcwtPyramid], l: usize, o: usize, i: usize) -> usize {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (k, p) in pyrs.iter().enumerate() {
        let b = &p.levels[l].bands[o];
        let (re, im) = (b.re.data()[i], b.im.data()[i]);
        let mag = re * re + im * im;
        if mag > best_mag {
            best = k;
            best_mag = mag;
        }
    }
    best
}

fn copy_coefficient(from: &DtcwtPyramid, to: &mut DtcwtPyramid, l: usize, o: usize, i: usize) {
    let src = &from.levels[l].bands[o];
    let (re, im) = (src.re.data()[i], src.im.data()[i]);
    let dst = &mut to.levels[l].bands[o];
    dst.re.data_mut()[i] = re;
    dst.im.data_mut()[i] = im;
}

impl FusionRule for PixelMax {
    fn fuse_subbands(
        &self,
        pyrs: &[DtcwtPyramid],
        _config: &FusionConfig,
        out: &mut DtcwtPyramid,
    ) -> Result<Option<RegionMap>> {
        for l in 0..out.levels.len() {
            let n = out.levels[l].coefficients_per_band();
            for o in 0..ORIENTATIONS {
                for i in 0..n {
                    let k = argmax_magnitude(pyrs, l, o, i);
                    copy_coefficient(&pyrs[k], out, l, o, i);
                }
            }
        }
        Ok(None)
    }
}

/// Region-based selection on the mean activity; background falls back to
/// [`PixelMax`].
pub struct RegionBased;

impl FusionRule for RegionBased {
    fn fuse_subbands(
        &self,
        pyrs: &[DtcwtPyramid],
        config: &FusionConfig,
        out: &mut DtcwtPyramid,
    ) -> Result<Option<RegionMap>> {
        let activities: Vec<ActivityMap> = pyrs.par_iter().map(activity).collect();
        let nframes = pyrs.len() as f64;
        let mean: Vec<Plane> = (0..out.levels.len())
            .map(|l| {
                let (w, h) = out.levels[l].dims();
                let mut m = Plane::zeros(w, h);
                for a in &activities {
                    for (acc, v) in m.data_mut().iter_mut().zip(a.levels[l].data()) {
                        *acc += v;
                    }
                }
                m.data_mut().iter_mut().for_each(|v| *v /= nframes);
                m
            })
            .collect();
        let regions = segment(&mean, config.threshold_k);

        for (l, labels) in regions.levels.iter().enumerate() {
            // per region, summed activity of each frame; the region mean
            // ordering is the same since every frame shares the region area
            let r = labels.region_count;
            let mut totals = vec![vec![0.0; pyrs.len()]; r + 1];
            for (k, a) in activities.iter().enumerate() {
                for (i, &lab) in labels.labels.iter().enumerate() {
                    totals[lab as usize][k] += a.levels[l].data()[i];
                }
            }
            let winners: Vec<usize> = totals
                .iter()
                .map(|t| {
                    let mut best = 0;
                    for (k, &v) in t.iter().enumerate() {
                        if v > t[best] {
                            best = k;
                        }
                    }
                    best
                })
                .collect();
            for (i, &lab) in labels.labels.iter().enumerate() {
                for o in 0..ORIENTATIONS {
                    let k = if lab == 0 {
                        argmax_magnitude(pyrs, l, o, i)
                    } else {
                        winners[lab as usize]
                    };
                    copy_coefficient(&pyrs[k], out, l, o, i);
                }
            }
        }
        Ok(Some(regions))
    }
}

/// Registry holding the built-in rules under [`PIXEL_MAX`] and [`REGION`].
pub fn fusion_rules() -> Registry<dyn FusionRule> {
    let mut r: Registry<dyn FusionRule> = Registry::new("fusion mode");
    r.register(PIXEL_MAX, Arc::new(PixelMax));
    r.register(REGION, Arc::new(RegionBased));
    r
}

/// Fused pyramid plus the region map when the rule produced one.
#[derive(Debug, Clone)]
pub struct Fused {
    pub pyramid: DtcwtPyramid,
    pub regions: Option<RegionMap>,
}

/// Fuse with an explicit rule registry.
pub fn fuse_with(
    rules: &Registry<dyn FusionRule>,
    pyrs: &[DtcwtPyramid],
    config: &FusionConfig,
) -> Result<Fused> {
    let first = pyrs
        .first()
        .ok_or_else(|| Error::invalid("fusion needs at least one pyramid"))?;
    for p in &pyrs[1..] {
        if let Some(level) = first.shape_mismatch(p) {
            return Err(Error::PyramidShape { level });
        }
    }
    let rule = rules.get(&config.mode)?;
    let mut out = first.zeros_like();
    let n = pyrs.len() as f64;
    for p in pyrs {
        for (acc, v) in out.lowpass.data_mut().iter_mut().zip(p.lowpass.data()) {
            *acc += v;
        }
    }
    out.lowpass.data_mut().iter_mut().for_each(|v| *v /= n);
    let regions = rule.fuse_subbands(pyrs, config, &mut out)?;
    Ok(Fused {
        pyramid: out,
        regions,
    })
}

/// Fuse pyramids of identical structure with the built-in rules.
pub fn fuse_sequence(pyrs: &[DtcwtPyramid], config: &FusionConfig) -> Result<DtcwtPyramid> {
    fuse_with(&fusion_rules(), pyrs, config).map(|f| f.pyramid)
}

/// Forward transform of every frame, fusion, inverse. Not clamped.
pub fn fuse_frames_detailed(
    frames: &FrameSequence,
    config: &FusionConfig,
    bank: &FilterBank,
) -> Result<(Frame, Fused)> {
    config.validate()?;
    let pyrs: Vec<DtcwtPyramid> = frames
        .frames()
        .par_iter()
        .map(|f| dtcwt::forward(f, config.levels, bank))
        .collect::<Result<_>>()?;
    let fused = fuse_with(&fusion_rules(), &pyrs, config)?;
    let image = dtcwt::inverse(&fused.pyramid, bank)?;
    Ok((image, fused))
}

pub fn fuse_frames(frames: &FrameSequence, config: &FusionConfig, bank: &FilterBank) -> Result<Frame> {
    fuse_frames_detailed(frames, config, bank).map(|(f, _)| f)
}

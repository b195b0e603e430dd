//! Synthetic turbulence: a smoothed random tilt field, a per-frame
//! Gaussian blur and additive noise applied to a clean image, with the
//! warps kept as ground truth.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::gaussian_blur;
use crate::image::{Frame, FrameSequence, Plane};
use crate::io::save_frame;
use crate::register::{warp, FlowField};

pub const MIN_SIDE: usize = 32;
pub const DEFAULT_TEXT: &str = "TURBULENT TEXT 0123";
pub const DEFAULT_SIZE: usize = 128;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth/clean.png";

const BACKGROUND: f64 = 0.9;
const INK: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurbulenceParams {
    /// Peak tilt displacement in pixels.
    pub warp_amplitude: f64,
    /// Spatial correlation (Gaussian sigma, pixels) of the tilt field.
    pub warp_smoothness: f64,
    /// Per-frame blur sigma is drawn uniformly from this range.
    pub blur_sigma_range: [f64; 2],
    pub noise_sigma: f64,
    pub frames: usize,
    pub seed: u64,
}

impl Default for TurbulenceParams {
    fn default() -> Self {
        TurbulenceParams {
            warp_amplitude: 2.0,
            warp_smoothness: 8.0,
            blur_sigma_range: [0.5, 2.5],
            noise_sigma: 0.01,
            frames: 100,
            seed: 42,
        }
    }
}

impl TurbulenceParams {
    /// No warp, blur or noise.
    pub fn identity(frames: usize, seed: u64) -> Self {
        TurbulenceParams {
            warp_amplitude: 0.0,
            warp_smoothness: 0.0,
            blur_sigma_range: [0.0, 0.0],
            noise_sigma: 0.0,
            frames,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.blur_sigma_range;
        let values = [self.warp_amplitude, self.warp_smoothness, lo, hi, self.noise_sigma];
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!(
                "turbulence parameters must be finite and non-negative: {self:?}"
            )));
        }
        if lo > hi {
            return Err(Error::invalid(format!("blur sigma range [{lo}, {hi}] is reversed")));
        }
        if self.frames == 0 {
            return Err(Error::invalid("simulated frame count must be >= 1"));
        }
        Ok(())
    }
}

/// Gaussian random field smoothed at `smoothness`, scaled so its peak
/// magnitude is exactly `amplitude`. The noise is drawn on a canvas padded
/// by the kernel radius and cropped, so the field statistics do not change
/// near the border.
fn tilt_field(rng: &mut ChaCha8Rng, w: usize, h: usize, amplitude: f64, smoothness: f64) -> FlowField {
    let pad = (3.0 * smoothness).ceil() as usize;
    let (pw, ph) = (w + 2 * pad, h + 2 * pad);
    let mut draw = || {
        let noise = Plane::from_fn(pw, ph, |_, _| rng.sample::<f64, _>(StandardNormal));
        gaussian_blur(&noise, smoothness).crop(pad, pad, w, h)
    };
    let u = draw();
    let v = draw();
    let mut flow = FlowField { u, v };
    let peak = flow.max_magnitude();
    let gain = if peak > 0.0 { amplitude / peak } else { 0.0 };
    for p in [&mut flow.u, &mut flow.v] {
        p.data_mut().iter_mut().for_each(|x| *x *= gain);
    }
    flow
}

fn degrade_one(clean: &Frame, params: &TurbulenceParams, index: usize) -> (Frame, FlowField) {
    let (w, h) = clean.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(index as u64);

    let flow = tilt_field(&mut rng, w, h, params.warp_amplitude, params.warp_smoothness);
    let warped = warp(clean, &flow).expect("flow built at frame size");
    let [lo, hi] = params.blur_sigma_range;
    let sigma = lo + (hi - lo) * rng.random::<f64>();
    let mut out = gaussian_blur(warped.as_plane(), sigma);
    for v in out.data_mut() {
        *v += params.noise_sigma * rng.sample::<f64, _>(StandardNormal);
    }
    (Frame::clamped(&out), flow)
}

/// Degrade `clean` into `params.frames` frames. Frame `i` draws from its
/// own ChaCha stream `i` under `params.seed`, so output is independent of
/// thread scheduling.
pub fn degrade(clean: &Frame, params: &TurbulenceParams) -> Result<(FrameSequence, Vec<FlowField>)> {
    params.validate()?;
    let (w, h) = clean.dims();
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(Error::TooSmall {
            what: "simulation",
            width: w,
            height: h,
            min_width: MIN_SIDE,
            min_height: MIN_SIDE,
        });
    }
    let (frames, flows): (Vec<Frame>, Vec<FlowField>) = (0..params.frames)
        .into_par_iter()
        .map(|i| degrade_one(clean, params, i))
        .unzip();
    let ids = (0..params.frames)
        .map(|i| format!("seed{}_frame{i:04}", params.seed))
        .collect();
    Ok((FrameSequence::new(frames, ids)?, flows))
}

/// Stroke segments of a glyph on a unit box (x right, y down), endpoints
/// `(x0, y0, x1, y1)`.
const SEGMENTS: [(f64, f64, f64, f64); 8] = [
    (0.0, 0.0, 1.0, 0.0), // top
    (0.0, 0.5, 1.0, 0.5), // middle
    (0.0, 1.0, 1.0, 1.0), // bottom
    (0.0, 0.0, 0.0, 0.5), // upper left
    (1.0, 0.0, 1.0, 0.5), // upper right
    (0.0, 0.5, 0.0, 1.0), // lower left
    (1.0, 0.5, 1.0, 1.0), // lower right
    (0.0, 1.0, 1.0, 0.0), // diagonal
];

/// Segment mask for one byte; always at least two strokes.
fn glyph_mask(b: u8) -> u8 {
    let mixed = b.wrapping_mul(0x9d) ^ b.rotate_left(3);
    if mixed.count_ones() < 2 {
        mixed | 0b1000_0101
    } else {
        mixed
    }
}

fn distance_to_segment(px: f64, py: f64, (x0, y0, x1, y1): (f64, f64, f64, f64)) -> f64 {
    let (dx, dy) = (x1 - x0, y1 - y0);
    let len2 = dx * dx + dy * dy;
    let t = (((px - x0) * dx + (py - y0) * dy) / len2).clamp(0.0, 1.0);
    (px - x0 - t * dx).hypot(py - y0 - t * dy)
}

/// Deterministic text-like test card: one procedural glyph per byte,
/// dark strokes on a light background, laid out in as many rows as make
/// the glyphs largest. Whitespace leaves a gap.
pub fn text_card(width: usize, height: usize, text: &str) -> Result<Frame> {
    if width < 64 || height < 32 {
        return Err(Error::TooSmall {
            what: "text card",
            width,
            height,
            min_width: 64,
            min_height: 32,
        });
    }
    let mut img = Plane::filled(width, height, BACKGROUND);
    let bytes = text.as_bytes();
    let n = bytes.len();
    if n == 0 {
        return Frame::from_plane(img);
    }
    let margin = (height.min(width) / 8) as f64;
    let (aw, ah) = (width as f64 - 2.0 * margin, height as f64 - 2.0 * margin);
    // glyph height for a given row count, cells kept at 3:5
    let glyph_h = |rows: usize| {
        let cols = n.div_ceil(rows);
        (aw / cols as f64 * 5.0 / 3.0).min(ah / rows as f64)
    };
    let rows = (1..=n)
        .max_by(|&a, &b| glyph_h(a).total_cmp(&glyph_h(b)).then(b.cmp(&a)))
        .unwrap();
    let cols = n.div_ceil(rows);
    let (cell_w, cell_h) = (aw / cols as f64, ah / rows as f64);
    let gh = 0.8 * glyph_h(rows);
    let gw = gh * 3.0 / 5.0;
    let stroke = (gh / 7.0).max(1.0);

    for (i, &b) in bytes.iter().enumerate() {
        if b.is_ascii_whitespace() {
            continue;
        }
        let mask = glyph_mask(b);
        let (r, c) = (i / cols, i % cols);
        let x0 = margin + c as f64 * cell_w + (cell_w - gw) / 2.0;
        let y0 = margin + r as f64 * cell_h + (cell_h - gh) / 2.0;
        let half = stroke / 2.0;
        let xa = (x0 - half).floor().max(0.0) as usize;
        let xb = ((x0 + gw + half).ceil() as usize).min(width - 1);
        let ya = (y0 - half).floor().max(0.0) as usize;
        let yb = ((y0 + gh + half).ceil() as usize).min(height - 1);
        for y in ya..=yb {
            for x in xa..=xb {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let hit = SEGMENTS.iter().enumerate().any(|(s, &(sx0, sy0, sx1, sy1))| {
                    mask & (1 << s) != 0
                        && distance_to_segment(
                            px,
                            py,
                            (x0 + sx0 * gw, y0 + sy0 * gh, x0 + sx1 * gw, y0 + sy1 * gh),
                        ) <= half
                });
                if hit {
                    img.set(x, y, INK);
                }
            }
        }
    }
    Frame::from_plane(img)
}

/// Contents of `manifest.json` in a simulated sequence directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationManifest {
    pub params: TurbulenceParams,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub frames: Vec<String>,
    /// Relative to the sequence directory.
    pub ground_truth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flows: Vec<String>,
}

impl SimulationManifest {
    pub fn read(seq_dir: impl AsRef<Path>) -> Result<Self> {
        let path = seq_dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))
    }

    pub fn ground_truth_path(&self, seq_dir: impl AsRef<Path>) -> PathBuf {
        seq_dir.as_ref().join(&self.ground_truth)
    }
}

/// Write frames as `frame_NNNN.png`, the clean image, optional FLO2 flow
/// dumps and the manifest into `dir`.
pub fn write_simulation(
    dir: impl AsRef<Path>,
    clean: &Frame,
    seq: &FrameSequence,
    flows: Option<&[FlowField]>,
    params: &TurbulenceParams,
    text: Option<&str>,
) -> Result<SimulationManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("ground_truth")).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::with_capacity(seq.len());
    for (i, f) in seq.frames().iter().enumerate() {
        let name = format!("frame_{i:04}.png");
        save_frame(f, dir.join(&name))?;
        names.push(name);
    }
    save_frame(clean, dir.join(GROUND_TRUTH_FILE))?;
    let mut flow_names = Vec::new();
    if let Some(flows) = flows {
        fs::create_dir_all(dir.join("flows")).map_err(|e| Error::io(dir, e))?;
        for (i, f) in flows.iter().enumerate() {
            let name = format!("flows/frame_{i:04}.flo2");
            f.write_flo2(dir.join(&name))?;
            flow_names.push(name);
        }
    }
    let (width, height) = clean.dims();
    let manifest = SimulationManifest {
        params: params.clone(),
        seed: params.seed,
        width,
        height,
        frames: names,
        ground_truth: GROUND_TRUTH_FILE.into(),
        text: text.map(str::to_string),
        flows: flow_names,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

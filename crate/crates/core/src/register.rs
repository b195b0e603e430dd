//! Registration of selected frames to their temporal mean.
//!
//! Flow is estimated with coarse-to-fine Horn–Schunck and applied with a
//! backward bilinear warp. A flow `(u, v)` at `(x, y)` means the moving
//! frame sampled at `(x + u, y + v)` matches the reference at `(x, y)`.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{central_gradients, convolve_separable, resize_bilinear, sample_bilinear, BINOMIAL5};
use crate::image::{Frame, FrameSequence, Plane};

/// Smallest side length accepted at full resolution and kept at the
/// coarsest pyramid level.
pub const MIN_FLOW_SIDE: usize = 16;
const MAX_AUTO_LEVELS: usize = 5;
const FLO2_MAGIC: &[u8; 4] = b"FLO2";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    /// Weight of the smoothness term. It enters the Jacobi update linearly,
    /// as `alpha + Ix^2 + Iy^2`, with intensities in `[0, 1]`.
    pub alpha: f64,
    /// Jacobi iterations per warp.
    pub iterations: usize,
    /// `None` picks the depth from the image size.
    pub pyramid_levels: Option<usize>,
    pub scale: f64,
    pub warps_per_level: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            alpha: 0.05,
            iterations: 150,
            pyramid_levels: None,
            scale: 0.5,
            warps_per_level: 2,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid(format!("flow alpha must be > 0, got {}", self.alpha)));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("flow iterations must be >= 1"));
        }
        if self.pyramid_levels == Some(0) {
            return Err(Error::invalid("pyramid levels must be >= 1"));
        }
        if !(self.scale > 0.0 && self.scale < 1.0) {
            return Err(Error::invalid(format!(
                "pyramid scale must be in (0, 1), got {}",
                self.scale
            )));
        }
        if self.warps_per_level == 0 {
            return Err(Error::invalid("warps per level must be >= 1"));
        }
        Ok(())
    }

    /// Depth actually used for a `width x height` image: the requested (or
    /// automatic) depth, reduced until the coarsest level keeps
    /// [`MIN_FLOW_SIDE`] pixels.
    pub fn effective_levels(&self, width: usize, height: usize) -> usize {
        let min_side = width.min(height) as f64;
        let wanted = self.pyramid_levels.unwrap_or_else(|| {
            let auto = (min_side / MIN_FLOW_SIDE as f64).log2().floor();
            (auto.max(1.0) as usize).min(MAX_AUTO_LEVELS)
        });
        let mut levels = 1;
        while levels < wanted
            && (min_side * self.scale.powi(levels as i32)).round() >= MIN_FLOW_SIDE as f64
        {
            levels += 1;
        }
        levels
    }
}

/// Dense per-pixel displacement in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub u: Plane,
    pub v: Plane,
}

impl FlowField {
    pub fn new(u: Plane, v: Plane) -> Result<Self> {
        u.check_same_dims(&v)?;
        if !(u.is_finite() && v.is_finite()) {
            return Err(Error::InvalidData("flow field has non-finite values".into()));
        }
        Ok(FlowField { u, v })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, u: f64, v: f64) -> Self {
        FlowField {
            u: Plane::filled(width, height, u),
            v: Plane::filled(width, height, v),
        }
    }

    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.u.dims()
    }

    /// Mean endpoint magnitude `sqrt(u^2 + v^2)`.
    pub fn mean_magnitude(&self) -> f64 {
        let sum: f64 = self
            .u
            .data()
            .iter()
            .zip(self.v.data())
            .map(|(u, v)| u.hypot(*v))
            .sum();
        sum / self.u.len() as f64
    }

    pub fn max_magnitude(&self) -> f64 {
        self.u
            .data()
            .iter()
            .zip(self.v.data())
            .map(|(u, v)| u.hypot(*v))
            .fold(0.0, f64::max)
    }

    /// Write the `FLO2` debug format: magic, width and height as
    /// little-endian `u32`, then the `u` plane and the `v` plane as
    /// little-endian `f32`, row-major.
    pub fn write_flo2(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let (w, h) = self.dims();
        let mut buf = Vec::with_capacity(12 + 8 * w * h);
        buf.extend_from_slice(FLO2_MAGIC);
        buf.extend_from_slice(&(w as u32).to_le_bytes());
        buf.extend_from_slice(&(h as u32).to_le_bytes());
        for p in [&self.u, &self.v] {
            for &x in p.data() {
                buf.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_flo2(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let bad = |m: &str| Error::InvalidData(format!("{}: {m}", path.display()));
        if bytes.len() < 12 || &bytes[..4] != FLO2_MAGIC {
            return Err(bad("not a FLO2 file"));
        }
        let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let n = w * h;
        if bytes.len() != 12 + 8 * n {
            return Err(bad("size does not match header"));
        }
        let mut vals = bytes[12..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        let u = Plane::new(w, h, vals.by_ref().take(n).collect())?;
        let v = Plane::new(w, h, vals.collect())?;
        FlowField::new(u, v)
    }
}

/// Per-pixel arithmetic mean of every frame.
pub fn reference_frame(seq: &FrameSequence) -> Frame {
    let (w, h) = seq.dims();
    let mut acc = vec![0.0; w * h];
    for f in seq.frames() {
        for (a, v) in acc.iter_mut().zip(f.data()) {
            *a += v;
        }
    }
    let n = seq.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Frame::clamped(&Plane::new(w, h, acc).expect("dims match"))
}

/// Backward warp: `out(x, y) = frame(x + u, y + v)`, bilinear, with
/// out-of-range coordinates clamped to the nearest edge.
pub fn warp(frame: &Frame, flow: &FlowField) -> Result<Frame> {
    let plane = warp_plane(frame.as_plane(), flow)?;
    Ok(Frame::clamped(&plane))
}

fn warp_plane(src: &Plane, flow: &FlowField) -> Result<Plane> {
    src.check_same_dims(&flow.u)?;
    Ok(Plane::from_fn(src.width(), src.height(), |x, y| {
        sample_bilinear(
            src,
            x as f64 + flow.u.get(x, y),
            y as f64 + flow.v.get(x, y),
        )
    }))
}

fn build_pyramid(img: &Plane, levels: usize, scale: f64) -> Vec<Plane> {
    let mut out = vec![img.clone()];
    for _ in 1..levels {
        let prev = out.last().unwrap();
        let smooth = convolve_separable(prev, &BINOMIAL5, &BINOMIAL5);
        let w = ((prev.width() as f64 * scale).round() as usize).max(1);
        let h = ((prev.height() as f64 * scale).round() as usize).max(1);
        out.push(resize_bilinear(&smooth, w, h));
    }
    out
}

fn upsample_flow(flow: &FlowField, width: usize, height: usize) -> FlowField {
    let sx = width as f64 / flow.width() as f64;
    let sy = height as f64 / flow.height() as f64;
    FlowField {
        u: resize_bilinear(&flow.u, width, height).map(|u| u * sx),
        v: resize_bilinear(&flow.v, width, height).map(|v| v * sy),
    }
}

/// Four-neighbour average with replicated borders.
fn neighbour_mean(p: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for y in 0..h {
        let up = y.saturating_sub(1) * w;
        let down = (y + 1).min(h - 1) * w;
        let row = y * w;
        for x in 0..w {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(w - 1);
            out[row + x] = 0.25 * (p[row + left] + p[row + right] + p[up + x] + p[down + x]);
        }
    }
}

/// One outer warp at a single level: linearize around `flow` and run the
/// Jacobi iterations in place.
fn refine(moving: &Plane, reference: &Plane, flow: &mut FlowField, alpha: f64, iterations: usize) {
    let (w, h) = reference.dims();
    let warped = warp_plane(moving, flow).expect("level dims match");
    let (wx, wy) = central_gradients(&warped);
    let (rx, ry) = central_gradients(reference);
    let n = w * h;
    let mut ix = vec![0.0; n];
    let mut iy = vec![0.0; n];
    let mut it = vec![0.0; n];
    for i in 0..n {
        ix[i] = 0.5 * (wx.data()[i] + rx.data()[i]);
        iy[i] = 0.5 * (wy.data()[i] + ry.data()[i]);
        it[i] = warped.data()[i] - reference.data()[i];
    }
    let u0 = flow.u.data().to_vec();
    let v0 = flow.v.data().to_vec();
    let mut ubar = vec![0.0; n];
    let mut vbar = vec![0.0; n];
    for _ in 0..iterations {
        neighbour_mean(flow.u.data(), w, h, &mut ubar);
        neighbour_mean(flow.v.data(), w, h, &mut vbar);
        let u = flow.u.data_mut();
        for i in 0..n {
            let denom = alpha + ix[i] * ix[i] + iy[i] * iy[i];
            let r = (it[i] + ix[i] * (ubar[i] - u0[i]) + iy[i] * (vbar[i] - v0[i])) / denom;
            u[i] = ubar[i] - ix[i] * r;
            vbar[i] -= iy[i] * r;
        }
        flow.v.data_mut().copy_from_slice(&vbar);
    }
}

/// Dense flow from `moving` to `reference` by pyramidal Horn–Schunck.
pub fn estimate_flow(moving: &Frame, reference: &Frame, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    moving.check_same_dims(reference)?;
    let (w, h) = reference.dims();
    if w < MIN_FLOW_SIDE || h < MIN_FLOW_SIDE {
        return Err(Error::TooSmall {
            what: "optical flow",
            width: w,
            height: h,
            min_width: MIN_FLOW_SIDE,
            min_height: MIN_FLOW_SIDE,
        });
    }
    let levels = params.effective_levels(w, h);
    let mov = build_pyramid(moving.as_plane(), levels, params.scale);
    let refs = build_pyramid(reference.as_plane(), levels, params.scale);

    let (cw, ch) = refs[levels - 1].dims();
    let mut flow = FlowField::zeros(cw, ch);
    for lvl in (0..levels).rev() {
        let (lw, lh) = refs[lvl].dims();
        if flow.dims() != (lw, lh) {
            flow = upsample_flow(&flow, lw, lh);
        }
        for _ in 0..params.warps_per_level {
            refine(&mov[lvl], &refs[lvl], &mut flow, params.alpha, params.iterations);
        }
    }
    Ok(flow)
}

/// Register a sequence and also return the flows of the final pass.
pub fn register_with_flows(
    seq: &FrameSequence,
    params: &FlowParams,
    passes: usize,
) -> Result<(FrameSequence, Vec<FlowField>)> {
    params.validate()?;
    if passes == 0 {
        return Err(Error::invalid("registration passes must be >= 1"));
    }
    let mut current = seq.clone();
    let mut flows = Vec::new();
    for pass in 0..passes {
        let reference = reference_frame(&current);
        let results: Vec<(Frame, FlowField)> = current
            .frames()
            .par_iter()
            .map(|f| {
                let flow = estimate_flow(f, &reference, params)?;
                Ok((warp(f, &flow)?, flow))
            })
            .collect::<Result<_>>()?;
        let (frames, pass_flows): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        log::debug!(
            "registration pass {}: mean flow magnitude {:.4}",
            pass + 1,
            pass_flows.iter().map(FlowField::mean_magnitude).sum::<f64>() / frames.len() as f64
        );
        current = current.with_frames(frames)?;
        flows = pass_flows;
    }
    Ok((current, flows))
}

/// Align every frame to the temporal mean, `passes` times over.
pub fn register_sequence(seq: &FrameSequence, params: &FlowParams, passes: usize) -> Result<FrameSequence> {
    register_with_flows(seq, params, passes).map(|(s, _)| s)
}

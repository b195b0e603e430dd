//! Image data model: unconstrained real planes, unit-range frames and
//! frame sequences.

use crate::error::{Error, Result};

/// A dense row-major 2-D array of `f64` samples with no range constraint.
///
/// Used for intermediate data: wavelet subbands, flow components, lowpass
/// residuals and anything else that may leave the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidData(format!(
                "plane data has {} samples, expected {}x{}={}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, y: usize) -> &mut [f64] {
        &mut self.data[y * self.width..(y + 1) * self.width]
    }

    /// Sample with coordinates clamped to the nearest edge pixel.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn transpose(&self) -> Plane {
        let mut out = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                out.push(self.get(x, y));
            }
        }
        Plane {
            width: self.height,
            height: self.width,
            data: out,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Plane) -> f64 {
        debug_assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copy of the rectangle `[x0, x0+width) x [y0, y0+height)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Plane {
        assert!(x0 + width <= self.width && y0 + height <= self.height);
        let mut data = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            data.extend_from_slice(&self.row(y)[x0..x0 + width]);
        }
        Plane {
            width,
            height,
            data,
        }
    }

    pub(crate) fn check_same_dims(&self, other: &Plane) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }
}

/// A single-channel luminance image.
///
/// Frames built through [`Frame::new`] or loaded from disk hold finite
/// values in `[0, 1]`. Stage outputs that may overshoot the unit interval
/// (wavelet synthesis, fusion) are built with [`Frame::unbounded`] and are
/// only guaranteed finite; clamping happens at the deartifact stage and at
/// save time.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    plane: Plane,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let plane = Plane::new(width, height, data)?;
        Self::from_plane(plane)
    }

    /// Validating conversion: every sample must be finite and in `[0, 1]`.
    pub fn from_plane(plane: Plane) -> Result<Self> {
        if let Some((i, v)) = plane
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::InvalidData(format!(
                "sample {i} = {v} outside [0, 1]"
            )));
        }
        Ok(Frame { plane })
    }

    /// Conversion that only requires finite samples.
    pub fn unbounded(plane: Plane) -> Result<Self> {
        if !plane.is_finite() {
            return Err(Error::InvalidData("non-finite sample".into()));
        }
        Ok(Frame { plane })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Frame {
            plane: Plane::filled(width, height, value.clamp(0.0, 1.0)),
        }
    }

    /// Build a frame from a generator, clamping each sample into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Frame {
            plane: Plane::from_fn(width, height, |x, y| clamp_unit(f(x, y))),
        }
    }

    /// Clamp every sample of `plane` into `[0, 1]`; NaN maps to 0.
    pub fn clamped(plane: &Plane) -> Self {
        Frame {
            plane: plane.map(clamp_unit),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.plane.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.plane.height()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.plane.dims()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        self.plane.data()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.plane.get(x, y)
    }

    #[inline]
    pub fn as_plane(&self) -> &Plane {
        &self.plane
    }

    pub fn into_plane(self) -> Plane {
        self.plane
    }

    pub(crate) fn check_same_dims(&self, other: &Frame) -> Result<()> {
        self.plane.check_same_dims(&other.plane)
    }
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// An ordered, non-empty list of same-sized frames with per-frame labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    source_ids: Vec<String>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, source_ids: Vec<String>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::InvalidData("frame sequence is empty".into()));
        };
        if frames.len() != source_ids.len() {
            return Err(Error::InvalidData(format!(
                "{} frames but {} source ids",
                frames.len(),
                source_ids.len()
            )));
        }
        let dims = first.dims();
        for f in &frames[1..] {
            if f.dims() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    found: f.dims(),
                });
            }
        }
        Ok(FrameSequence { frames, source_ids })
    }

    /// Sequence with labels `frame_0000`, `frame_0001`, ...
    pub fn from_frames(frames: Vec<Frame>) -> Result<Self> {
        let ids = (0..frames.len()).map(|i| format!("frame_{i:04}")).collect();
        Self::new(frames, ids)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false; sequences hold at least one frame.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn source_ids(&self) -> &[String] {
        &self.source_ids
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Frame, &str)> {
        self.frames
            .iter()
            .zip(self.source_ids.iter().map(String::as_str))
    }

    /// Subsequence at the given original indices, in the order given.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let frames = indices.iter().map(|&i| self.frames[i].clone()).collect();
        let ids = indices.iter().map(|&i| self.source_ids[i].clone()).collect();
        Self::new(frames, ids)
    }

    /// Replace the frames, keeping the labels.
    pub(crate) fn with_frames(&self, frames: Vec<Frame>) -> Result<Self> {
        Self::new(frames, self.source_ids.clone())
    }

    pub fn into_parts(self) -> (Vec<Frame>, Vec<String>) {
        (self.frames, self.source_ids)
    }
}

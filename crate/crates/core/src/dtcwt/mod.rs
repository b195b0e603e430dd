//! 2-D dual-tree complex wavelet transform.
//!
//! Level 1 filters the (even-padded) image with the biorthogonal pair
//! without decimation of the four trees; levels 2 and up use the q-shift
//! pair with two-fold decimation. Each level yields six complex subbands at
//! half the resolution of that level's input, oriented near ±15°, ±45° and
//! ±75°. The lowpass residual stays at twice the resolution of the last
//! level's subbands. It is stored divided by its DC gain `2^(levels-1)`,
//! so a constant image `c` has a lowpass of exactly `c`.
//!
//! Orientation angles are measured from the image x axis, counter-clockwise
//! with y pointing up, and describe the direction along which the
//! subband's edges and stripes run.

mod conv;
pub mod dump;
mod filters;

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::image::{Frame, Plane};

pub use conv::{coldfilt, colfilter, colifilt};
pub use filters::{
    load_filter_bank, FilterBank, DEFAULT_LEVEL1, DEFAULT_QSHIFT, FILTER_NAMES, PR_TOLERANCE,
};

pub const MAX_LEVELS: usize = 6;
pub const DEFAULT_LEVELS: usize = 4;
pub const ORIENTATIONS: usize = 6;

/// Nominal subband orientations in degrees, indexed like
/// [`Level::bands`].
pub const ORIENTATION_DEGREES: [f64; ORIENTATIONS] = [15.0, 45.0, 75.0, -75.0, -45.0, -15.0];

/// One complex subband stored as separate real and imaginary planes.
#[derive(Debug, Clone, PartialEq)]
pub struct Subband {
    pub re: Plane,
    pub im: Plane,
}

impl Subband {
    pub fn zeros(width: usize, height: usize) -> Self {
        Subband {
            re: Plane::zeros(width, height),
            im: Plane::zeros(width, height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.re.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        (self.re.get(x, y), self.im.get(x, y))
    }

    #[inline]
    pub fn magnitude_at(&self, i: usize) -> f64 {
        self.re.data()[i].hypot(self.im.data()[i])
    }

    pub fn energy(&self) -> f64 {
        self.re.sum_of_squares() + self.im.sum_of_squares()
    }
}

/// The six oriented subbands of one decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub bands: Vec<Subband>,
}

impl Level {
    pub fn dims(&self) -> (usize, usize) {
        self.bands[0].dims()
    }

    pub fn energy(&self) -> f64 {
        self.bands.iter().map(Subband::energy).sum()
    }

    /// Complex coefficients per subband.
    pub fn coefficients_per_band(&self) -> usize {
        let (w, h) = self.dims();
        w * h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtcwtPyramid {
    /// Finest level first.
    pub levels: Vec<Level>,
    pub lowpass: Plane,
    /// `(width, height)` of the image before padding.
    pub original_size: (usize, usize),
}

impl DtcwtPyramid {
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Total squared magnitude of every coefficient, lowpass included.
    pub fn energy(&self) -> f64 {
        self.levels.iter().map(Level::energy).sum::<f64>() + self.lowpass.sum_of_squares()
    }

    /// Same structure, all coefficients zero.
    pub fn zeros_like(&self) -> Self {
        DtcwtPyramid {
            levels: self
                .levels
                .iter()
                .map(|l| {
                    let (w, h) = l.dims();
                    Level {
                        bands: (0..ORIENTATIONS).map(|_| Subband::zeros(w, h)).collect(),
                    }
                })
                .collect(),
            lowpass: Plane::zeros(self.lowpass.width(), self.lowpass.height()),
            original_size: self.original_size,
        }
    }

    /// True if `other` has identical level count and plane sizes.
    pub fn same_shape(&self, other: &DtcwtPyramid) -> bool {
        self.shape_mismatch(other).is_none()
    }

    /// First level (1-based) at which the shapes differ; `levels + 1` for
    /// the lowpass or original size.
    pub fn shape_mismatch(&self, other: &DtcwtPyramid) -> Option<usize> {
        if self.levels.len() != other.levels.len() {
            return Some(self.levels.len().min(other.levels.len()) + 1);
        }
        for (i, (a, b)) in self.levels.iter().zip(&other.levels).enumerate() {
            if a.bands.len() != b.bands.len()
                || a.bands.iter().zip(&b.bands).any(|(x, y)| x.dims() != y.dims())
            {
                return Some(i + 1);
            }
        }
        if self.lowpass.dims() != other.lowpass.dims() || self.original_size != other.original_size
        {
            return Some(self.levels.len() + 1);
        }
        None
    }

    /// Check the size relations that synthesis relies on.
    pub fn validate(&self) -> Result<()> {
        let malformed = |m: String| Err(Error::MalformedPyramid(m));
        if self.levels.is_empty() {
            return malformed("no levels".into());
        }
        for (i, level) in self.levels.iter().enumerate() {
            if level.bands.len() != ORIENTATIONS {
                return malformed(format!(
                    "level {} has {} subbands, expected {ORIENTATIONS}",
                    i + 1,
                    level.bands.len()
                ));
            }
            let dims = level.dims();
            for b in &level.bands {
                if b.re.dims() != dims || b.im.dims() != dims {
                    return malformed(format!("level {} has unequal subband sizes", i + 1));
                }
                if !(b.re.is_finite() && b.im.is_finite()) {
                    return malformed(format!("level {} has non-finite coefficients", i + 1));
                }
            }
            if dims.0 == 0 || dims.1 == 0 {
                return malformed(format!("level {} is empty", i + 1));
            }
        }
        let last = self.levels.last().unwrap().dims();
        if self.lowpass.dims() != (2 * last.0, 2 * last.1) {
            return malformed(format!(
                "lowpass is {:?}, expected twice the coarsest subband {:?}",
                self.lowpass.dims(),
                last
            ));
        }
        for i in 1..self.levels.len() {
            let fine = self.levels[i - 1].dims();
            let coarse = self.levels[i].dims();
            let ok = |f: usize, c: usize| 2 * f == 4 * c || 2 * f + 2 == 4 * c;
            if !ok(fine.0, coarse.0) || !ok(fine.1, coarse.1) {
                return malformed(format!(
                    "level {} size {:?} inconsistent with level {} size {:?}",
                    i + 1,
                    coarse,
                    i,
                    fine
                ));
            }
        }
        let first = self.levels[0].dims();
        let (ow, oh) = self.original_size;
        let fits = |o: usize, f: usize| o == 2 * f || o + 1 == 2 * f;
        if !fits(ow, first.0) || !fits(oh, first.1) {
            return malformed(format!(
                "original size {:?} inconsistent with level-1 size {:?}",
                self.original_size, first
            ));
        }
        Ok(())
    }
}

/// Pack 2x2 quads of a real plane into the two complex subbands they
/// encode: `((a - d) + j(b + c)) / √2` and `((a + d) + j(b - c)) / √2`.
fn quads_to_complex(y: &Plane) -> (Subband, Subband) {
    let (w, h) = (y.width() / 2, y.height() / 2);
    let mut z1 = Subband::zeros(w, h);
    let mut z2 = Subband::zeros(w, h);
    for r in 0..h {
        let top = y.row(2 * r);
        let bottom = y.row(2 * r + 1);
        for c in 0..w {
            let a = top[2 * c];
            let b = top[2 * c + 1];
            let cc = bottom[2 * c];
            let d = bottom[2 * c + 1];
            let i = r * w + c;
            z1.re.data_mut()[i] = (a - d) * FRAC_1_SQRT_2;
            z1.im.data_mut()[i] = (b + cc) * FRAC_1_SQRT_2;
            z2.re.data_mut()[i] = (a + d) * FRAC_1_SQRT_2;
            z2.im.data_mut()[i] = (b - cc) * FRAC_1_SQRT_2;
        }
    }
    (z1, z2)
}

/// Inverse of [`quads_to_complex`].
fn complex_to_quads(z1: &Subband, z2: &Subband) -> Plane {
    let (w, h) = z1.dims();
    let mut y = Plane::zeros(2 * w, 2 * h);
    for r in 0..h {
        for c in 0..w {
            let (r1, i1) = z1.get(c, r);
            let (r2, i2) = z2.get(c, r);
            let (pr, pi) = ((r1 + r2) * FRAC_1_SQRT_2, (i1 + i2) * FRAC_1_SQRT_2);
            let (qr, qi) = ((r1 - r2) * FRAC_1_SQRT_2, (i1 - i2) * FRAC_1_SQRT_2);
            y.set(2 * c, 2 * r, pr);
            y.set(2 * c + 1, 2 * r, pi);
            y.set(2 * c, 2 * r + 1, qi);
            y.set(2 * c + 1, 2 * r + 1, -qr);
        }
    }
    y
}

fn add(mut a: Plane, b: &Plane) -> Plane {
    debug_assert_eq!(a.dims(), b.dims());
    for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
        *x += y;
    }
    a
}

/// Repeat the last row and/or column to make both sides even.
fn pad_to_even(p: &Plane) -> Plane {
    let (w, h) = p.dims();
    let (nw, nh) = (w + w % 2, h + h % 2);
    if (nw, nh) == (w, h) {
        return p.clone();
    }
    Plane::from_fn(nw, nh, |x, y| p.get(x.min(w - 1), y.min(h - 1)))
}

/// Add one replicated row (column) on each side where the count is not a
/// multiple of four.
fn pad_to_multiple_of_4(p: &Plane) -> Plane {
    let (w, h) = p.dims();
    let px = usize::from(w % 4 != 0);
    let py = usize::from(h % 4 != 0);
    if px == 0 && py == 0 {
        return p.clone();
    }
    Plane::from_fn(w + 2 * px, h + 2 * py, |x, y| {
        p.get_clamped(x as isize - px as isize, y as isize - py as isize)
    })
}

fn assemble_level(
    bank_h0: impl Fn(&Plane) -> Plane,
    bank_h1: impl Fn(&Plane) -> Plane,
    input: &Plane,
) -> (Level, Plane) {
    // vertical filtering first, then horizontal on the transposed result
    let lo = bank_h0(input).transpose();
    let hi = bank_h1(input).transpose();
    let lolo = bank_h0(&lo).transpose();
    let (b0, b5) = quads_to_complex(&bank_h0(&hi).transpose());
    let (b2, b3) = quads_to_complex(&bank_h1(&lo).transpose());
    let (b1, b4) = quads_to_complex(&bank_h1(&hi).transpose());
    (
        Level {
            bands: vec![b0, b1, b2, b3, b4, b5],
        },
        lolo,
    )
}

/// Lowpass DC gain: 1 at level 1, times 2 per q-shift level.
fn dc_gain(levels: usize) -> f64 {
    (1u64 << (levels - 1)) as f64
}

/// Forward transform of `image` to `levels` levels.
pub fn forward_plane(image: &Plane, levels: usize, bank: &FilterBank) -> Result<DtcwtPyramid> {
    if !(1..=MAX_LEVELS).contains(&levels) {
        return Err(Error::invalid(format!(
            "dtcwt level count {levels} outside [1, {MAX_LEVELS}]"
        )));
    }
    let (w, h) = image.dims();
    let min = 1usize << levels;
    if w < min || h < min {
        return Err(Error::TooSmall {
            what: "dtcwt",
            width: w,
            height: h,
            min_width: min,
            min_height: min,
        });
    }

    let x = pad_to_even(image);
    let (first, mut lolo) = assemble_level(
        |p| colfilter(p, &bank.level1_lo),
        |p| colfilter(p, &bank.level1_hi),
        &x,
    );
    let mut out = vec![first];
    for _ in 1..levels {
        let padded = pad_to_multiple_of_4(&lolo);
        let (level, next) = assemble_level(
            |p| coldfilt(p, &bank.qshift_b_lo, &bank.qshift_a_lo),
            |p| coldfilt(p, &bank.qshift_b_hi, &bank.qshift_a_hi),
            &padded,
        );
        out.push(level);
        lolo = next;
    }
    let gain = dc_gain(levels);
    lolo.data_mut().iter_mut().for_each(|v| *v /= gain);
    Ok(DtcwtPyramid {
        levels: out,
        lowpass: lolo,
        original_size: (w, h),
    })
}

pub fn forward(frame: &Frame, levels: usize, bank: &FilterBank) -> Result<DtcwtPyramid> {
    forward_plane(frame.as_plane(), levels, bank)
}

fn synthesize_level(
    level: &Level,
    z: &Plane,
    lo: impl Fn(&Plane) -> Plane,
    hi: impl Fn(&Plane) -> Plane,
) -> Plane {
    let b = &level.bands;
    let lh = complex_to_quads(&b[0], &b[5]);
    let hl = complex_to_quads(&b[2], &b[3]);
    let hh = complex_to_quads(&b[1], &b[4]);
    let y1 = add(lo(z), &hi(&lh));
    let y2 = add(lo(&hl), &hi(&hh));
    add(lo(&y1.transpose()), &hi(&y2.transpose())).transpose()
}

/// Inverse transform as an unconstrained plane of `original_size`.
pub fn inverse_plane(pyr: &DtcwtPyramid, bank: &FilterBank) -> Result<Plane> {
    pyr.validate()?;
    let gain = dc_gain(pyr.levels.len());
    let mut z = pyr.lowpass.map(|v| v * gain);
    for idx in (1..pyr.levels.len()).rev() {
        z = synthesize_level(
            &pyr.levels[idx],
            &z,
            |p| colifilt(p, &bank.qshift_b_lo_syn, &bank.qshift_a_lo_syn),
            |p| colifilt(p, &bank.qshift_b_hi_syn, &bank.qshift_a_hi_syn),
        );
        let (tw, th) = pyr.levels[idx - 1].dims();
        let (tw, th) = (2 * tw, 2 * th);
        let (zw, zh) = z.dims();
        let cx = usize::from(zw != tw);
        let cy = usize::from(zh != th);
        if cx == 1 || cy == 1 {
            z = z.crop(cx, cy, zw - 2 * cx, zh - 2 * cy);
        }
        if z.dims() != (tw, th) {
            return Err(Error::MalformedPyramid(format!(
                "synthesized level {} is {:?}, expected {:?}",
                idx + 1,
                z.dims(),
                (tw, th)
            )));
        }
    }
    let z = synthesize_level(
        &pyr.levels[0],
        &z,
        |p| colfilter(p, &bank.level1_lo_syn),
        |p| colfilter(p, &bank.level1_hi_syn),
    );
    let (w, h) = pyr.original_size;
    Ok(if z.dims() == (w, h) {
        z
    } else {
        z.crop(0, 0, w, h)
    })
}

/// Inverse transform, cropped to the original size and not clamped.
pub fn inverse(pyr: &DtcwtPyramid, bank: &FilterBank) -> Result<Frame> {
    Frame::unbounded(inverse_plane(pyr, bank)?)
}

/// Largest level count `<= wanted` that an image of this size supports.
pub fn max_levels_for(width: usize, height: usize, wanted: usize) -> usize {
    let mut levels = wanted.clamp(1, MAX_LEVELS);
    while levels > 1 && (width < (1 << levels) || height < (1 << levels)) {
        levels -= 1;
    }
    levels
}

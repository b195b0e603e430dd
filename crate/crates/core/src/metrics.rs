//! Full-reference quality metrics on unit-range frames.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{Frame, Plane};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    /// Decibels; `+inf` for identical images.
    pub psnr: f64,
    pub ssim: f64,
}

impl MetricReport {
    pub fn compute(a: &Frame, b: &Frame) -> Result<Self> {
        Ok(MetricReport {
            psnr: psnr(a, b)?,
            ssim: ssim(a, b)?,
        })
    }
}

pub fn mse(a: &Frame, b: &Frame) -> Result<f64> {
    a.check_same_dims(b)?;
    let n = a.data().len() as f64;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// Peak signal-to-noise ratio with peak 1.0; `f64::INFINITY` when the
/// images are identical.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

fn ssim_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "valid" filtering: output is `(w - n + 1) x (h - n + 1)`.
fn filter_valid(src: &Plane, k: &[f64]) -> Plane {
    let n = k.len();
    let (w, h) = src.dims();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut tmp = Plane::zeros(ow, h);
    for y in 0..h {
        let row = src.row(y);
        for x in 0..ow {
            let v: f64 = k.iter().zip(&row[x..x + n]).map(|(c, s)| c * s).sum();
            tmp.set(x, y, v);
        }
    }
    let mut out = Plane::zeros(ow, oh);
    for y in 0..oh {
        for (j, &c) in k.iter().enumerate() {
            let src_row = tmp.row(y + j);
            for (o, s) in out.row_mut(y).iter_mut().zip(src_row) {
                *o += c * s;
            }
        }
    }
    out
}

/// Mean structural similarity over all positions where an 11x11 Gaussian
/// window (sigma 1.5) fits inside the image.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    a.check_same_dims(b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::TooSmall {
            what: "ssim",
            width: w,
            height: h,
            min_width: SSIM_WINDOW,
            min_height: SSIM_WINDOW,
        });
    }
    let k = ssim_window();
    let pa = a.as_plane();
    let pb = b.as_plane();
    let mu_a = filter_valid(pa, &k);
    let mu_b = filter_valid(pb, &k);
    let aa = filter_valid(&pa.map(|v| v * v), &k);
    let bb = filter_valid(&pb.map(|v| v * v), &k);
    let ab_plane = Plane::new(
        w,
        h,
        pa.data().iter().zip(pb.data()).map(|(x, y)| x * y).collect(),
    )?;
    let ab = filter_valid(&ab_plane, &k);

    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let ma = mu_a.data()[i];
        let mb = mu_b.data()[i];
        let va = aa.data()[i] - ma * ma;
        let vb = bb.data()[i] - mb * mb;
        let cov = ab.data()[i] - ma * mb;
        let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2);
        total += num / den;
    }
    Ok(total / mu_a.len() as f64)
}

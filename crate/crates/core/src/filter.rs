//! Small spatial filtering helpers shared by the stages: separable
//! convolution with replicated borders, Gaussian blur, bilinear sampling
//! and resizing.

use crate::image::Plane;

/// 5-tap binomial kernel `[1, 4, 6, 4, 1] / 16`.
pub const BINOMIAL5: [f64; 5] = [0.0625, 0.25, 0.375, 0.25, 0.0625];

/// Normalized Gaussian kernel truncated at `ceil(3 sigma)`.
///
/// `sigma <= 0` yields the identity kernel `[1.0]`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if !(sigma > 0.0) {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Convolve rows with `kx` then columns with `ky`; both kernels odd-length
/// and centered. Out-of-range samples replicate the nearest edge.
pub fn convolve_separable(src: &Plane, kx: &[f64], ky: &[f64]) -> Plane {
    debug_assert!(kx.len() % 2 == 1 && ky.len() % 2 == 1);
    let (w, h) = src.dims();
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;

    let mut tmp = Plane::zeros(w, h);
    for y in 0..h {
        let row = src.row(y);
        let out = tmp.row_mut(y);
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &c) in kx.iter().enumerate() {
                let xx = (x as isize + j as isize - rx).clamp(0, w as isize - 1) as usize;
                acc += c * row[xx];
            }
            *o = acc;
        }
    }

    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for (j, &c) in ky.iter().enumerate() {
            let yy = (y as isize + j as isize - ry).clamp(0, h as isize - 1) as usize;
            let src_row = tmp.row(yy);
            for (o, &s) in out.row_mut(y).iter_mut().zip(src_row) {
                *o += c * s;
            }
        }
    }
    out
}

pub fn gaussian_blur(src: &Plane, sigma: f64) -> Plane {
    if !(sigma > 0.0) {
        return src.clone();
    }
    let k = gaussian_kernel(sigma);
    convolve_separable(src, &k, &k)
}

/// Bilinear sample at `(x, y)`; coordinates are clamped into the image
/// first, so anything outside reads the nearest edge.
#[inline]
pub fn sample_bilinear(src: &Plane, x: f64, y: f64) -> f64 {
    let (w, h) = src.dims();
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as usize;
    let y0 = y0 as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let top = src.get(x0, y0) * (1.0 - fx) + src.get(x1, y0) * fx;
    let bottom = src.get(x0, y1) * (1.0 - fx) + src.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resize with pixel-center alignment and bilinear interpolation.
pub fn resize_bilinear(src: &Plane, width: usize, height: usize) -> Plane {
    let sx = src.width() as f64 / width as f64;
    let sy = src.height() as f64 / height as f64;
    Plane::from_fn(width, height, |x, y| {
        let u = (x as f64 + 0.5) * sx - 0.5;
        let v = (y as f64 + 0.5) * sy - 0.5;
        sample_bilinear(src, u, v)
    })
}

/// Central-difference derivatives `(d/dx, d/dy)` with replicated borders.
pub fn central_gradients(src: &Plane) -> (Plane, Plane) {
    let (w, h) = src.dims();
    let mut gx = Plane::zeros(w, h);
    let mut gy = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let xi = x as isize;
            let yi = y as isize;
            gx.set(
                x,
                y,
                0.5 * (src.get_clamped(xi + 1, yi) - src.get_clamped(xi - 1, yi)),
            );
            gy.set(
                x,
                y,
                0.5 * (src.get_clamped(xi, yi + 1) - src.get_clamped(xi, yi - 1)),
            );
        }
    }
    (gx, gy)
}

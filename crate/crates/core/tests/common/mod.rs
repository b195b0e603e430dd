//! Shared helpers for the integration tests: test images and a decimated
//! wavelet baseline built independently of the dual-tree code path.

#![allow(dead_code)]

use std::f64::consts::PI;

use turbfuse::dtcwt::{colfilter, DtcwtPyramid, FilterBank};
use turbfuse::filter::gaussian_blur;
use turbfuse::{Frame, Plane};

/// Sinusoidal grating whose stripes run at `deg` degrees from the x axis
/// (counter-clockwise, y up).
pub fn grating(w: usize, h: usize, deg: f64, period: f64) -> Plane {
    let t = deg.to_radians();
    // image rows grow downward, so the stripe direction is (cos t, -sin t)
    // and the wave vector (sin t, cos t)
    let (kx, ky) = (t.sin(), t.cos());
    Plane::from_fn(w, h, |x, y| {
        0.5 + 0.4 * (2.0 * PI * (kx * x as f64 + ky * y as f64) / period).sin()
    })
}

/// Two vertical step edges (a bright bar) on a dark background; the
/// borders are uniform so a circular shift only moves the edges.
pub fn shift_invariance_image(w: usize, h: usize) -> Plane {
    let (a, b) = (w * 5 / 16, w * 11 / 16 + 1);
    Plane::from_fn(w, h, |x, _| if x >= a && x < b { 1.0 } else { 0.0 })
}

/// Per-level, per-orientation energies of a pyramid.
pub fn dtcwt_level_energies(pyr: &DtcwtPyramid) -> Vec<[f64; 6]> {
    pyr.levels
        .iter()
        .map(|l| {
            let mut e = [0.0; 6];
            for (o, b) in l.bands.iter().enumerate() {
                e[o] = b.energy();
            }
            e
        })
        .collect()
}

fn decimate_rows(p: &Plane, phase: usize) -> Plane {
    let rows: Vec<usize> = (phase..p.height()).step_by(2).collect();
    Plane::from_fn(p.width(), rows.len(), |x, r| p.get(x, rows[r]))
}

/// Critically sampled separable DWT with the level-1 biorthogonal filters
/// at every level; returns the detail energy (LH + HL + HH) per level.
pub fn dwt_level_energies(img: &Plane, levels: usize, bank: &FilterBank) -> Vec<f64> {
    let mut ll = img.clone();
    let mut out = Vec::new();
    for _ in 0..levels {
        let lo = decimate_rows(&colfilter(&ll, &bank.level1_lo), 0).transpose();
        let hi = decimate_rows(&colfilter(&ll, &bank.level1_hi), 1).transpose();
        let lolo = decimate_rows(&colfilter(&lo, &bank.level1_lo), 0).transpose();
        let lohi = decimate_rows(&colfilter(&lo, &bank.level1_hi), 1);
        let hilo = decimate_rows(&colfilter(&hi, &bank.level1_lo), 0);
        let hihi = decimate_rows(&colfilter(&hi, &bank.level1_hi), 1);
        out.push(lohi.sum_of_squares() + hilo.sum_of_squares() + hihi.sum_of_squares());
        ll = lolo;
    }
    out
}

/// Smoothed random texture in `[0, 1]`, used for flow tests.
pub fn texture(w: usize, h: usize, seed: u64) -> Frame {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let noise = Plane::from_fn(w, h, |_, _| rng.random::<f64>());
    let smooth = gaussian_blur(&noise, 1.5);
    let (lo, hi) = smooth
        .data()
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    Frame::from_fn(w, h, |x, y| 0.1 + 0.8 * (smooth.get(x, y) - lo) / (hi - lo))
}

/// Integer translation with replicated border: `out(x, y) = f(x - dx, y - dy)`.
pub fn translate(f: &Frame, dx: isize, dy: isize) -> Frame {
    let p = f.as_plane();
    Frame::from_fn(f.width(), f.height(), |x, y| {
        p.get_clamped(x as isize - dx, y as isize - dy)
    })
}

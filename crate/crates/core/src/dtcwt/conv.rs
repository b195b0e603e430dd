//! Column filtering kernels of the dual-tree transform.
//!
//! All three operate along the vertical axis of a [`Plane`] (combining whole
//! rows, so the inner loop runs over contiguous memory); callers transpose
//! to filter horizontally. Boundaries use half-sample symmetric extension,
//! i.e. the end samples are repeated.

use crate::image::Plane;

/// Map a logical index onto `0..n` by half-sample symmetric reflection.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// `out[row_of(n)] += sum_k f[k] * x[reflect(logical(n + len(f) - 1 - k))]`
/// for `n` in `0..count`.
fn accumulate(
    x: &Plane,
    out: &mut Plane,
    count: usize,
    f: &[f64],
    row_of: impl Fn(usize) -> usize,
    logical: impl Fn(usize) -> isize,
) {
    let rows = x.height();
    let m = f.len();
    for n in 0..count {
        let dst = row_of(n);
        for (k, &c) in f.iter().enumerate() {
            let src = reflect(logical(n + m - 1 - k), rows);
            let src_row = x.row(src);
            for (o, s) in out.row_mut(dst).iter_mut().zip(src_row) {
                *o += c * s;
            }
        }
    }
}

/// Non-decimating filter with an odd-length kernel; output matches the
/// input size with each output sample aligned to its input sample.
pub fn colfilter(x: &Plane, h: &[f64]) -> Plane {
    debug_assert!(h.len() % 2 == 1, "colfilter needs an odd-length filter");
    let rows = x.height();
    let m2 = (h.len() / 2) as isize;
    let mut out = Plane::zeros(x.width(), rows);
    accumulate(x, &mut out, rows, h, |n| n, |j| j as isize - m2);
    out
}

fn split_phases(h: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let odd = h.iter().step_by(2).copied().collect();
    let even = h.iter().skip(1).step_by(2).copied().collect();
    (odd, even)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Decimate by two with a q-shift pair: `ha` runs on one input phase and
/// `hb = reverse(ha)` on the other; outputs interleave. Rows must be a
/// multiple of four and filters of even length.
pub fn coldfilt(x: &Plane, ha: &[f64], hb: &[f64]) -> Plane {
    let rows = x.height();
    assert!(rows.is_multiple_of(4), "coldfilt needs a multiple of 4 rows, got {rows}");
    assert_eq!(ha.len(), hb.len());
    assert!(ha.len().is_multiple_of(2));
    let m = ha.len() as isize;
    let (hao, hae) = split_phases(ha);
    let (hbo, hbe) = split_phases(hb);
    let half = rows / 2;
    let count = rows / 4;
    let (s1, s2) = if dot(ha, hb) > 0.0 { (0, 1) } else { (1, 0) };

    let mut out = Plane::zeros(x.width(), half);
    // logical input index of extended sample t_j + off, t_j = 5 + 4j
    let at = move |off: isize| move |j: usize| 5 + 4 * j as isize + off - m;
    accumulate(x, &mut out, count, &hao, |n| 2 * n + s1, at(-1));
    accumulate(x, &mut out, count, &hae, |n| 2 * n + s1, at(-3));
    accumulate(x, &mut out, count, &hbo, |n| 2 * n + s2, at(0));
    accumulate(x, &mut out, count, &hbe, |n| 2 * n + s2, at(-2));
    out
}

/// Interpolate by two with a q-shift pair; the inverse of [`coldfilt`]
/// when used with the matching synthesis filters.
pub fn colifilt(x: &Plane, ha: &[f64], hb: &[f64]) -> Plane {
    let rows = x.height();
    assert!(rows.is_multiple_of(2), "colifilt needs an even number of rows, got {rows}");
    assert_eq!(ha.len(), hb.len());
    assert!(ha.len().is_multiple_of(2));
    let m = ha.len();
    let m2 = (m / 2) as isize;
    let (hao, hae) = split_phases(ha);
    let (hbo, hbe) = split_phases(hb);
    let count = rows / 2;
    let positive = dot(ha, hb) > 0.0;

    let mut out = Plane::zeros(x.width(), rows * 2);
    // t_j = start + 2j; ta/tb pick which tree reads which phase
    let start: isize = if m2 % 2 == 0 { 3 } else { 2 };
    let (da, db) = if positive { (0, -1) } else { (-1, 0) };
    let at = move |d: isize| move |j: usize| start + 2 * j as isize + d - m2;

    if m2 % 2 == 0 {
        accumulate(x, &mut out, count, &hae, |n| 4 * n, at(db - 2));
        accumulate(x, &mut out, count, &hbe, |n| 4 * n + 1, at(da - 2));
        accumulate(x, &mut out, count, &hao, |n| 4 * n + 2, at(db));
        accumulate(x, &mut out, count, &hbo, |n| 4 * n + 3, at(da));
    } else {
        accumulate(x, &mut out, count, &hao, |n| 4 * n, at(db));
        accumulate(x, &mut out, count, &hbo, |n| 4 * n + 1, at(da));
        accumulate(x, &mut out, count, &hae, |n| 4 * n + 2, at(db));
        accumulate(x, &mut out, count, &hbe, |n| 4 * n + 3, at(da));
    }
    out
}

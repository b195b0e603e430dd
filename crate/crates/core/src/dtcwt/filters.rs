//! Filter banks for the dual-tree transform.
//!
//! A bank pairs a biorthogonal level-1 set (`h0o`, `h1o` analysis, `g0o`,
//! `g1o` synthesis) with a quarter-shift set for the coarser levels (`h0a`,
//! `h1a`, `g0a`, `g1a` for tree a and their time-reverses `*b` for tree b).
//! Every bank is checked for perfect reconstruction when it is built.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Plane;

use super::conv::{coldfilt, colfilter, colifilt};

/// Tolerance of the load-time reconstruction check.
pub const PR_TOLERANCE: f64 = 1e-10;
/// Tolerance for the tree-b filters being time-reverses of tree a.
pub const REVERSE_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_LEVEL1: &str = "near_sym_b";
pub const DEFAULT_QSHIFT: &str = "qshift_b";

// Near-symmetric 13/19-tap biorthogonal pair.
const NEAR_SYM_B_H0O: [f64; 13] = [
    -0.0017578125, 0.0, 0.022265625, -0.046875, -0.0482421875, 0.296875, 0.55546875, 0.296875,
    -0.0482421875, -0.046875, 0.022265625, 0.0, -0.0017578125,
];
const NEAR_SYM_B_G0O: [f64; 19] = [
    7.062639508928571e-05, 0.0, -0.0013419015066964285, -0.0018833705357142855,
    0.007156808035714285, 0.023856026785714284, -0.05564313616071428, -0.05168805803571428,
    0.29975760323660716, 0.5594308035714286, 0.29975760323660716, -0.05168805803571428,
    -0.05564313616071428, 0.023856026785714284, 0.007156808035714285, -0.0018833705357142855,
    -0.0013419015066964285, 0.0, 7.062639508928571e-05,
];
const NEAR_SYM_B_H1O: [f64; 19] = [
    -7.062639508928571e-05, 0.0, 0.0013419015066964285, -0.0018833705357142855,
    -0.007156808035714285, 0.023856026785714284, 0.05564313616071428, -0.05168805803571428,
    -0.29975760323660716, 0.5594308035714286, -0.29975760323660716, -0.05168805803571428,
    0.05564313616071428, 0.023856026785714284, -0.007156808035714285, -0.0018833705357142855,
    0.0013419015066964285, 0.0, -7.062639508928571e-05,
];
const NEAR_SYM_B_G1O: [f64; 13] = [
    -0.0017578125, 0.0, 0.022265625, 0.046875, -0.0482421875, -0.296875, 0.55546875, -0.296875,
    -0.0482421875, 0.046875, 0.022265625, 0.0, -0.0017578125,
];

// 14-tap quarter-shift set, tree a; tree b is the time-reverse.
const QSHIFT_B_H0A: [f64; 14] = [
    0.003253142763653182, -0.00388321199915849, 0.03466034684485349, -0.03887280126882779,
    -0.11720388769911527, 0.27529538466888204, 0.7561456438925225, 0.5688104207121227,
    0.011866092033797, -0.1067118046866654, 0.023825384794920298, 0.01702522388155399,
    -0.005439475937274115, -0.004556895628475491,
];
const QSHIFT_B_H1A: [f64; 14] = [
    -0.004556895628475491, 0.005439475937274115, 0.01702522388155399, -0.023825384794920298,
    -0.1067118046866654, -0.011866092033797, 0.5688104207121227, -0.7561456438925225,
    0.27529538466888204, 0.11720388769911527, -0.03887280126882779, -0.03466034684485349,
    -0.00388321199915849, -0.003253142763653182,
];

/// Filter names accepted in the text format, in canonical order.
pub const FILTER_NAMES: [&str; 12] = [
    "h0o", "g0o", "h1o", "g1o", "h0a", "h0b", "g0a", "g0b", "h1a", "h1b", "g1a", "g1b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub name: String,
    /// Level-1 analysis lowpass (`h0o`).
    pub level1_lo: Vec<f64>,
    /// Level-1 analysis highpass (`h1o`).
    pub level1_hi: Vec<f64>,
    /// Level-1 synthesis lowpass (`g0o`).
    pub level1_lo_syn: Vec<f64>,
    /// Level-1 synthesis highpass (`g1o`).
    pub level1_hi_syn: Vec<f64>,
    pub qshift_a_lo: Vec<f64>,
    pub qshift_a_hi: Vec<f64>,
    pub qshift_b_lo: Vec<f64>,
    pub qshift_b_hi: Vec<f64>,
    pub qshift_a_lo_syn: Vec<f64>,
    pub qshift_a_hi_syn: Vec<f64>,
    pub qshift_b_lo_syn: Vec<f64>,
    pub qshift_b_hi_syn: Vec<f64>,
}

fn reversed(v: &[f64]) -> Vec<f64> {
    v.iter().rev().copied().collect()
}

impl FilterBank {
    /// Build from raw taps and run the validation checks.
    pub fn from_taps(name: impl Into<String>, taps: &BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let get = |k: &str| -> Result<Vec<f64>> {
            taps.get(k)
                .cloned()
                .ok_or_else(|| Error::FilterBank(format!("missing filter {k}")))
        };
        let bank = FilterBank {
            name: name.into(),
            level1_lo: get("h0o")?,
            level1_lo_syn: get("g0o")?,
            level1_hi: get("h1o")?,
            level1_hi_syn: get("g1o")?,
            qshift_a_lo: get("h0a")?,
            qshift_b_lo: get("h0b")?,
            qshift_a_lo_syn: get("g0a")?,
            qshift_b_lo_syn: get("g0b")?,
            qshift_a_hi: get("h1a")?,
            qshift_b_hi: get("h1b")?,
            qshift_a_hi_syn: get("g1a")?,
            qshift_b_hi_syn: get("g1b")?,
        };
        bank.validate()?;
        Ok(bank)
    }

    /// One of the embedded filter sets.
    pub fn builtin(level1: &str, qshift: &str) -> Result<Self> {
        let mut taps = BTreeMap::new();
        match level1 {
            "near_sym_b" => {
                taps.insert("h0o".into(), NEAR_SYM_B_H0O.to_vec());
                taps.insert("g0o".into(), NEAR_SYM_B_G0O.to_vec());
                taps.insert("h1o".into(), NEAR_SYM_B_H1O.to_vec());
                taps.insert("g1o".into(), NEAR_SYM_B_G1O.to_vec());
            }
            other => {
                return Err(Error::FilterBank(format!(
                    "unknown level-1 filter set {other:?}"
                )))
            }
        }
        match qshift {
            "qshift_b" => {
                let h0a = QSHIFT_B_H0A.to_vec();
                let h1a = QSHIFT_B_H1A.to_vec();
                // orthonormal set: synthesis = analysis time-reversed
                taps.insert("h0b".into(), reversed(&h0a));
                taps.insert("h1b".into(), reversed(&h1a));
                taps.insert("g0a".into(), reversed(&h0a));
                taps.insert("g1a".into(), reversed(&h1a));
                taps.insert("g0b".into(), h0a.clone());
                taps.insert("g1b".into(), h1a.clone());
                taps.insert("h0a".into(), h0a);
                taps.insert("h1a".into(), h1a);
            }
            other => {
                return Err(Error::FilterBank(format!(
                    "unknown q-shift filter set {other:?}"
                )))
            }
        }
        Self::from_taps(format!("{level1}+{qshift}"), &taps)
    }

    /// Parse the text format: one filter per line, name followed by
    /// whitespace-separated taps. Blank lines and `#` comments are skipped.
    pub fn parse_text(name: &str, text: &str) -> Result<Self> {
        let mut taps = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            if !FILTER_NAMES.contains(&key) {
                return Err(Error::FilterBank(format!(
                    "line {}: unknown filter name {key:?}",
                    lineno + 1
                )));
            }
            let values = parts
                .map(|t| t.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Error::FilterBank(format!("line {}: {e}", lineno + 1)))?;
            if values.is_empty() {
                return Err(Error::FilterBank(format!("line {}: no taps", lineno + 1)));
            }
            taps.insert(key.to_string(), values);
        }
        Self::from_taps(name, &taps)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, taps) in FILTER_NAMES.iter().zip(self.filters()) {
            out.push_str(key);
            for t in taps {
                let _ = write!(out, " {t:e}");
            }
            out.push('\n');
        }
        out
    }

    fn filters(&self) -> [&Vec<f64>; 12] {
        [
            &self.level1_lo,
            &self.level1_lo_syn,
            &self.level1_hi,
            &self.level1_hi_syn,
            &self.qshift_a_lo,
            &self.qshift_b_lo,
            &self.qshift_a_lo_syn,
            &self.qshift_b_lo_syn,
            &self.qshift_a_hi,
            &self.qshift_b_hi,
            &self.qshift_a_hi_syn,
            &self.qshift_b_hi_syn,
        ]
    }

    /// Structural checks, then reconstruction of unit impulses through
    /// one level-1 stage and one q-shift stage.
    pub fn validate(&self) -> Result<()> {
        for (key, taps) in FILTER_NAMES.iter().zip(self.filters()) {
            if taps.iter().any(|t| !t.is_finite()) {
                return Err(Error::FilterBank(format!("filter {key} has non-finite taps")));
            }
        }
        for (key, taps) in FILTER_NAMES[..4].iter().zip(&self.filters()[..4]) {
            if taps.len() % 2 == 0 {
                return Err(Error::FilterBank(format!(
                    "level-1 filter {key} must have odd length"
                )));
            }
        }
        let q = &self.filters()[4..];
        let qlen = q[0].len();
        if !qlen.is_multiple_of(2) || q.iter().any(|f| f.len() != qlen) {
            return Err(Error::FilterBank(
                "q-shift filters must share one even length".into(),
            ));
        }

        let residual = self.reconstruction_residual();
        if !(residual < PR_TOLERANCE) {
            return Err(Error::FilterBank(format!(
                "filter bank fails perfect reconstruction (residual {residual:e})"
            )));
        }

        let pairs = [
            ("h0a/h0b", &self.qshift_a_lo, &self.qshift_b_lo),
            ("h1a/h1b", &self.qshift_a_hi, &self.qshift_b_hi),
            ("g0a/g0b", &self.qshift_a_lo_syn, &self.qshift_b_lo_syn),
            ("g1a/g1b", &self.qshift_a_hi_syn, &self.qshift_b_hi_syn),
        ];
        for (label, a, b) in pairs {
            let err = a
                .iter()
                .zip(b.iter().rev())
                .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
            if !(err < REVERSE_TOLERANCE) {
                return Err(Error::FilterBank(format!(
                    "q-shift pair {label} is not time-reversed (error {err:e})"
                )));
            }
        }
        Ok(())
    }

    /// Worst absolute reconstruction error over impulses at every phase of
    /// a 64-sample signal, for both the level-1 and the q-shift stage.
    pub fn reconstruction_residual(&self) -> f64 {
        const N: usize = 64;
        let mut worst = 0.0_f64;
        for pos in [0, 1, 2, 3, 29, 30, 31, 32, 33, 62, 63] {
            let x = Plane::from_fn(1, N, |_, r| if r == pos { 1.0 } else { 0.0 });

            let lo = colfilter(&x, &self.level1_lo);
            let hi = colfilter(&x, &self.level1_hi);
            let mut y = colfilter(&lo, &self.level1_lo_syn);
            for (o, v) in y.data_mut().iter_mut().zip(colfilter(&hi, &self.level1_hi_syn).data()) {
                *o += v;
            }
            worst = worst.max(y.max_abs_diff(&x));

            let lo = coldfilt(&x, &self.qshift_b_lo, &self.qshift_a_lo);
            let hi = coldfilt(&x, &self.qshift_b_hi, &self.qshift_a_hi);
            let mut y = colifilt(&lo, &self.qshift_b_lo_syn, &self.qshift_a_lo_syn);
            let yh = colifilt(&hi, &self.qshift_b_hi_syn, &self.qshift_a_hi_syn);
            for (o, v) in y.data_mut().iter_mut().zip(yh.data()) {
                *o += v;
            }
            worst = worst.max(y.max_abs_diff(&x));
        }
        worst
    }
}

impl Default for FilterBank {
    fn default() -> Self {
        FilterBank::builtin(DEFAULT_LEVEL1, DEFAULT_QSHIFT).expect("embedded filter bank is valid")
    }
}

/// Resolve a bank by builtin name (`near_sym_b+qshift_b`, or `default`) or
/// by path to a text-format file.
pub fn load_filter_bank(source: &str) -> Result<FilterBank> {
    if source == "default" {
        return Ok(FilterBank::default());
    }
    if let Some((l1, q)) = source.split_once('+') {
        if !Path::new(source).exists() {
            return FilterBank::builtin(l1, q);
        }
    }
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return FilterBank::parse_text(source, &text);
    }
    Err(Error::FilterBank(format!(
        "unknown filter bank {source:?} (expected `near_sym_b+qshift_b` or a file path)"
    )))
}

//! Final artifact removal.
//!
//! The built-in deartifacter soft-thresholds DT-CWT coefficient magnitudes
//! with a universal threshold scaled by a JPEG-style quality factor. An
//! external tool can be substituted through a command template, and `none`
//! passes the frame through untouched.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dtcwt::{self, FilterBank, Subband};
use crate::error::{Error, Result};
use crate::image::Frame;
use crate::io::{load_frame, save_frame};
use crate::registry::Registry;

pub const BUILTIN: &str = "builtin";
pub const BUILTIN_SHRINKAGE: &str = "builtin_shrinkage";
pub const EXTERNAL: &str = "external";
pub const NONE: &str = "none";

pub const DEFAULT_QUALITY_FACTOR: u32 = 20;
pub const SHRINKAGE_LEVELS: usize = 4;
/// Median absolute deviation to Gaussian sigma.
const MAD_SCALE: f64 = 0.6745;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeartifactConfig {
    /// 1 (strongest) to 100 (off).
    pub quality_factor: u32,
    /// Registered deartifacter name.
    pub mode: String,
    /// Template with `{in}`, `{out}` and optionally `{qf}`; external mode only.
    pub external_cmd: Option<String>,
}

impl Default for DeartifactConfig {
    fn default() -> Self {
        DeartifactConfig {
            quality_factor: DEFAULT_QUALITY_FACTOR,
            mode: BUILTIN.into(),
            external_cmd: None,
        }
    }
}

impl DeartifactConfig {
    pub fn validate(&self) -> Result<()> {
        shrinkage_strength(self.quality_factor)?;
        deartifacters().get(&self.mode)?;
        if self.mode == EXTERNAL {
            let cmd = self.external_cmd.as_deref().unwrap_or("");
            parse_template(cmd)?;
        }
        Ok(())
    }
}

/// `(100 - qf) / 80`, clamped to `[0, 1.25]`: QF 20 is strength 1.
pub fn shrinkage_strength(quality_factor: u32) -> Result<f64> {
    if !(1..=100).contains(&quality_factor) {
        return Err(Error::invalid(format!(
            "quality factor must be in [1, 100], got {quality_factor}"
        )));
    }
    Ok(((100.0 - quality_factor as f64) / 80.0).clamp(0.0, 1.25))
}

/// Shrink the magnitude of `(re, im)` by `t`, keeping its phase.
pub fn soft_threshold(re: f64, im: f64, t: f64) -> (f64, f64) {
    let m = re.hypot(im);
    if m <= t {
        return (0.0, 0.0);
    }
    let g = (m - t) / m;
    (re * g, im * g)
}

fn shrink_band(band: &mut Subband, t: f64) {
    for (re, im) in band.re.data_mut().iter_mut().zip(band.im.data_mut()) {
        (*re, *im) = soft_threshold(*re, *im, t);
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Built-in phase-preserving wavelet shrinkage, output clamped to `[0, 1]`.
pub fn deartifact_builtin(frame: &Frame, quality_factor: u32, bank: &FilterBank) -> Result<Frame> {
    let s = shrinkage_strength(quality_factor)?;
    let (w, h) = frame.dims();
    let levels = dtcwt::max_levels_for(w, h, SHRINKAGE_LEVELS);
    if levels < SHRINKAGE_LEVELS {
        log::debug!("deartifact: {w}x{h} frame supports only {levels} levels");
    }
    let mut pyr = dtcwt::forward(frame, levels, bank)?;
    let finest: Vec<f64> = pyr.levels[0]
        .bands
        .iter()
        .flat_map(|b| (0..b.re.len()).map(move |i| b.magnitude_at(i)))
        .collect();
    let sigma = median(finest) / MAD_SCALE;
    if s > 0.0 && sigma > 0.0 {
        for level in &mut pyr.levels {
            let n = (dtcwt::ORIENTATIONS * level.coefficients_per_band()) as f64;
            let t = s * sigma * (2.0 * n.ln()).sqrt();
            level.bands.iter_mut().for_each(|b| shrink_band(b, t));
        }
    }
    let out = dtcwt::inverse_plane(&pyr, bank)?;
    Ok(Frame::clamped(&out))
}

/// Split a command template and check it names `{in}` and `{out}`.
fn parse_template(template: &str) -> Result<Vec<String>> {
    let tokens = shlex::split(template)
        .ok_or_else(|| Error::invalid(format!("cannot parse deartifact command {template:?}")))?;
    if tokens.is_empty() {
        return Err(Error::invalid("external deartifact mode needs a command"));
    }
    for p in ["{in}", "{out}"] {
        if !tokens.iter().any(|t| t.contains(p)) {
            return Err(Error::invalid(format!(
                "deartifact command {template:?} lacks the {p} placeholder"
            )));
        }
    }
    Ok(tokens)
}

/// Argument vector for one invocation, placeholders substituted.
pub fn render_command(template: &str, input: &Path, output: &Path, quality_factor: u32) -> Result<Vec<String>> {
    let qf = quality_factor.to_string();
    Ok(parse_template(template)?
        .into_iter()
        .map(|t| {
            t.replace("{in}", &input.to_string_lossy())
                .replace("{out}", &output.to_string_lossy())
                .replace("{qf}", &qf)
        })
        .collect())
}

/// Run an external tool on the frame through PNG files in a fresh
/// temporary directory. No shell is involved.
pub fn deartifact_external(frame: &Frame, template: &str, quality_factor: u32) -> Result<Frame> {
    shrinkage_strength(quality_factor)?;
    let dir = tempfile::Builder::new()
        .prefix("turbfuse-deartifact-")
        .tempdir()
        .map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let input = dir.path().join("in.png");
    let output = dir.path().join("out.png");
    save_frame(frame, &input)?;
    let argv = render_command(template, &input, &output, quality_factor)?;
    let command = argv.join(" ");
    let fail = |detail: String| Error::External {
        command: command.clone(),
        detail,
    };
    let result = Command::new(&argv[0])
        .args(&argv[1..])
        .output()
        .map_err(|e| fail(format!("cannot start: {e}")))?;
    if !result.status.success() {
        let stderr = String::from_utf8_lossy(&result.stderr);
        let stderr = stderr.trim();
        let status = match result.status.code() {
            Some(c) => format!("exit status {c}"),
            None => "terminated by signal".to_string(),
        };
        return Err(fail(if stderr.is_empty() {
            status
        } else {
            format!("{status}: {stderr}")
        }));
    }
    if !output.exists() {
        return Err(fail("no output image written".into()));
    }
    let out = load_frame(&output).map_err(|e| fail(format!("unreadable output image: {e}")))?;
    if out.dims() != frame.dims() {
        return Err(fail(format!(
            "output is {}x{}, expected {}x{}",
            out.width(),
            out.height(),
            frame.width(),
            frame.height()
        )));
    }
    Ok(out)
}

/// One way of removing residual artifacts from the fused frame.
pub trait Deartifacter: Send + Sync {
    fn apply(&self, frame: &Frame, config: &DeartifactConfig, bank: &FilterBank) -> Result<Frame>;
}

pub struct Shrinkage;

impl Deartifacter for Shrinkage {
    fn apply(&self, frame: &Frame, config: &DeartifactConfig, bank: &FilterBank) -> Result<Frame> {
        deartifact_builtin(frame, config.quality_factor, bank)
    }
}

pub struct External;

impl Deartifacter for External {
    fn apply(&self, frame: &Frame, config: &DeartifactConfig, _bank: &FilterBank) -> Result<Frame> {
        let cmd = config
            .external_cmd
            .as_deref()
            .ok_or_else(|| Error::invalid("external deartifact mode needs a command"))?;
        deartifact_external(frame, cmd, config.quality_factor)
    }
}

/// Exact identity; the frame is not even clamped.
pub struct Passthrough;

impl Deartifacter for Passthrough {
    fn apply(&self, frame: &Frame, _config: &DeartifactConfig, _bank: &FilterBank) -> Result<Frame> {
        Ok(frame.clone())
    }
}

/// Built-in deartifacters: `builtin` (alias `builtin_shrinkage`),
/// `external` and `none`.
pub fn deartifacters() -> Registry<dyn Deartifacter> {
    let mut r: Registry<dyn Deartifacter> = Registry::new("deartifact mode");
    let shrink: Arc<dyn Deartifacter> = Arc::new(Shrinkage);
    r.register(BUILTIN, shrink.clone());
    r.register(BUILTIN_SHRINKAGE, shrink);
    r.register(EXTERNAL, Arc::new(External));
    r.register(NONE, Arc::new(Passthrough));
    r
}

/// Apply the deartifacter named by `config.mode`.
pub fn deartifact(frame: &Frame, config: &DeartifactConfig, bank: &FilterBank) -> Result<Frame> {
    deartifacters().get(&config.mode)?.apply(frame, config, bank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn template_needs_placeholders() {
        assert!(parse_template("cp {in} {out}").is_ok());
        assert!(parse_template("cp {in} /tmp/x.png").is_err());
        assert!(parse_template("").is_err());
        assert!(parse_template("tool 'unterminated").is_err());
    }

    #[test]
    fn render_substitutes_inside_tokens() {
        let argv = render_command(
            "tool --in={in} -o {out} --quality {qf}",
            Path::new("/a b/in.png"),
            Path::new("/o.png"),
            20,
        )
        .unwrap();
        assert_eq!(argv, ["tool", "--in=/a b/in.png", "-o", "/o.png", "--quality", "20"]);
    }

    #[test]
    fn config_validation() {
        assert!(DeartifactConfig::default().validate().is_ok());
        let bad_qf = DeartifactConfig { quality_factor: 0, ..Default::default() };
        assert!(bad_qf.validate().is_err());
        let no_cmd = DeartifactConfig { mode: EXTERNAL.into(), ..Default::default() };
        assert!(no_cmd.validate().is_err());
        let unknown = DeartifactConfig { mode: "fbcnn".into(), ..Default::default() };
        assert!(unknown.validate().is_err());
    }
}

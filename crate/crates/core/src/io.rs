//! Frame and sequence I/O.
//!
//! Inputs: 8/16-bit grayscale or RGB PNG and binary (P5) or ASCII (P2)
//! PGM. RGB is reduced to luminance with Rec.601 weights. Output is always
//! 8-bit grayscale PNG.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageFormat};

use crate::error::{Error, Result};
use crate::image::{Frame, FrameSequence};

/// Default file pattern for sequence directories.
pub const DEFAULT_PATTERN: &str = "*";

const LUMA_WEIGHTS: [u64; 3] = [299, 587, 114];

fn is_frame_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm"))
        .unwrap_or(false)
}

/// Frame files in `dir` whose file name matches `pattern`, sorted
/// lexicographically by file name.
pub fn list_frame_files(dir: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let matcher = glob::Pattern::new(pattern)
        .map_err(|e| Error::invalid(format!("bad file pattern {pattern:?}: {e}")))?;
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() || !is_frame_file(&path) {
            continue;
        }
        let name = entry.file_name();
        if matcher.matches(&name.to_string_lossy()) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Load every matching frame in `dir` as one sequence in file-name order.
pub fn load_sequence(dir: impl AsRef<Path>, pattern: &str) -> Result<FrameSequence> {
    let dir = dir.as_ref();
    let files = list_frame_files(dir, pattern)?;
    if files.is_empty() {
        return Err(Error::NoFrames {
            dir: dir.to_path_buf(),
            pattern: pattern.to_string(),
        });
    }
    let mut frames = Vec::with_capacity(files.len());
    let mut ids = Vec::with_capacity(files.len());
    for path in &files {
        let frame = load_frame(path)?;
        if let Some(first) = frames.first().map(Frame::dims) {
            if frame.dims() != first {
                return Err(Error::InconsistentFrameSize {
                    path: path.clone(),
                    expected: first,
                    found: frame.dims(),
                });
            }
        }
        frames.push(frame);
        ids.push(
            path.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
        );
    }
    FrameSequence::new(frames, ids)
}

/// Load one PNG or PGM file as a luminance frame in `[0, 1]`.
pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let is_pgm = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.eq_ignore_ascii_case("pgm"))
        .unwrap_or(false);
    if is_pgm || bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        return decode_pgm(&bytes).map_err(|message| Error::Decode {
            path: path.to_path_buf(),
            message,
        });
    }
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png).map_err(|e| {
        Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    })?;
    frame_from_dynamic(img).map_err(|message| Error::Decode {
        path: path.to_path_buf(),
        message,
    })
}

fn luma(r: u64, g: u64, b: u64, max: u64) -> f64 {
    if r == g && g == b {
        return r as f64 / max as f64;
    }
    let num = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b;
    num as f64 / (1000 * max) as f64
}

fn frame_from_dynamic(img: DynamicImage) -> Result<Frame, String> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageRgb8(b) => b
            .pixels()
            .map(|p| luma(p.0[0] as u64, p.0[1] as u64, p.0[2] as u64, 255))
            .collect(),
        DynamicImage::ImageRgba8(b) => b
            .pixels()
            .map(|p| luma(p.0[0] as u64, p.0[1] as u64, p.0[2] as u64, 255))
            .collect(),
        DynamicImage::ImageRgb16(b) => b
            .pixels()
            .map(|p| luma(p.0[0] as u64, p.0[1] as u64, p.0[2] as u64, 65535))
            .collect(),
        DynamicImage::ImageRgba16(b) => b
            .pixels()
            .map(|p| luma(p.0[0] as u64, p.0[1] as u64, p.0[2] as u64, 65535))
            .collect(),
        other => return Err(format!("unsupported pixel format {:?}", other.color())),
    };
    Frame::new(w, h, data).map_err(|e| e.to_string())
}

/// Minimal PGM reader (P5 binary, P2 ASCII); samples are scaled by the
/// header's max value.
fn decode_pgm(bytes: &[u8]) -> Result<Frame, String> {
    let mut pos = 0usize;
    let next_token = |pos: &mut usize| -> Result<String, String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err("truncated PGM header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = next_token(&mut pos)?;
    let parse = |s: String| s.parse::<usize>().map_err(|e| format!("bad PGM header: {e}"));
    let w = parse(next_token(&mut pos)?)?;
    let h = parse(next_token(&mut pos)?)?;
    let max = parse(next_token(&mut pos)?)?;
    if max == 0 || max > 65535 {
        return Err(format!("bad PGM max value {max}"));
    }
    let n = w * h;
    let samples: Vec<u64> = match magic.as_str() {
        "P5" => {
            // exactly one whitespace byte separates the header from the raster
            pos += 1;
            let bps = if max < 256 { 1 } else { 2 };
            let raster = bytes
                .get(pos..pos + n * bps)
                .ok_or_else(|| "truncated PGM raster".to_string())?;
            if bps == 1 {
                raster.iter().map(|&b| b as u64).collect()
            } else {
                raster
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as u64)
                    .collect()
            }
        }
        "P2" => {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(parse(next_token(&mut pos)?)? as u64);
            }
            v
        }
        other => return Err(format!("unsupported PNM type {other}")),
    };
    if let Some(bad) = samples.iter().find(|&&s| s > max as u64) {
        return Err(format!("sample {bad} exceeds max value {max}"));
    }
    let data = samples.iter().map(|&s| s as f64 / max as f64).collect();
    Frame::new(w, h, data).map_err(|e| e.to_string())
}

/// Quantize to 8 bits: clamp to `[0, 1]`, then `round(v * 255)`.
pub fn quantize(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0).round() as u8
}

/// Write an 8-bit grayscale PNG.
pub fn save_frame(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf: Vec<u8> = frame.data().iter().map(|&v| quantize(v)).collect();
    let img = GrayImage::from_raw(frame.width() as u32, frame.height() as u32, buf)
        .expect("buffer length matches frame dimensions");
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Encode {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn gray_rgb_pixel_is_exact() {
        for v in 0..=255u64 {
            assert_eq!(luma(v, v, v, 255), v as f64 / 255.0);
        }
        assert_eq!(luma(65535, 65535, 65535, 65535), 1.0);
    }

    #[test]
    fn rgb_weights() {
        let l = luma(255, 0, 0, 255);
        assert!((l - 0.299).abs() < 1e-12);
    }

    #[test]
    fn quantization_rule() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(1.7), 255);
        assert_eq!(quantize(f64::NAN), 0);
    }

    #[test]
    fn pgm_p5_and_p2() {
        let mut p5 = b"P5\n# comment\n2 1\n1023\n".to_vec();
        p5.extend_from_slice(&1023u16.to_be_bytes());
        p5.extend_from_slice(&0u16.to_be_bytes());
        let f = decode_pgm(&p5).unwrap();
        assert_eq!(f.data(), &[1.0, 0.0]);

        let p2 = b"P2 3 1 4\n0 2 4\n";
        let f = decode_pgm(p2).unwrap();
        assert_eq!(f.data(), &[0.0, 0.5, 1.0]);

        assert!(decode_pgm(b"P5 2 2 255\n\x00").is_err());
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("missing").join("x.png");
        let err = save_frame(&Frame::filled(4, 4, 0.2), &path).unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
    }
}

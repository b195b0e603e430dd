//! Debug dump of a pyramid: one little-endian `f32` file per subband (real
//! plane followed by imaginary plane, row-major) plus `manifest.json`.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{DtcwtPyramid, ORIENTATION_DEGREES};
use crate::error::{Error, Result};
use crate::image::Plane;

#[derive(Debug, Serialize)]
pub struct DumpEntry {
    pub file: String,
    /// 1-based; 0 for the lowpass residual.
    pub level: usize,
    pub orientation_deg: Option<f64>,
    pub width: usize,
    pub height: usize,
    pub planes: Vec<&'static str>,
}

#[derive(Debug, Serialize)]
pub struct DumpManifest {
    pub original_width: usize,
    pub original_height: usize,
    pub levels: usize,
    pub entries: Vec<DumpEntry>,
}

fn push_plane(buf: &mut Vec<u8>, p: &Plane) {
    for v in p.data() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

pub fn dump_pyramid(pyr: &DtcwtPyramid, dir: impl AsRef<Path>) -> Result<DumpManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (li, level) in pyr.levels.iter().enumerate() {
        for (oi, band) in level.bands.iter().enumerate() {
            let file = format!("level{}_orient{}.f32", li + 1, oi);
            let mut buf = Vec::with_capacity(band.re.len() * 8);
            push_plane(&mut buf, &band.re);
            push_plane(&mut buf, &band.im);
            let path = dir.join(&file);
            fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
            let (width, height) = band.dims();
            entries.push(DumpEntry {
                file,
                level: li + 1,
                orientation_deg: Some(ORIENTATION_DEGREES[oi]),
                width,
                height,
                planes: vec!["re", "im"],
            });
        }
    }
    let mut buf = Vec::new();
    push_plane(&mut buf, &pyr.lowpass);
    let path = dir.join("lowpass.f32");
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    entries.push(DumpEntry {
        file: "lowpass.f32".into(),
        level: 0,
        orientation_deg: None,
        width: pyr.lowpass.width(),
        height: pyr.lowpass.height(),
        planes: vec!["re"],
    });

    let manifest = DumpManifest {
        original_width: pyr.original_size.0,
        original_height: pyr.original_size.1,
        levels: pyr.levels.len(),
        entries,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

//! End-to-end restoration: select, register, fuse, deartifact. Also the
//! batch driver and the sharpness analysis entry point.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deartifact::{self, DeartifactConfig};
use crate::dtcwt::{self, FilterBank};
use crate::error::{Error, Result, Stage, StageExt};
use crate::fuse::{self, FusionConfig};
use crate::image::{Frame, FrameSequence};
use crate::io;
use crate::metrics::MetricReport;
use crate::register::{self, FlowParams};
use crate::select::{self, SharpnessSeries};
use crate::simulate::SimulationManifest;

pub const REPORT_CSV: &str = "report.csv";
pub const TIMINGS_CSV: &str = "timings.csv";

/// Registration settings: flow parameters plus the number of passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub alpha: f64,
    pub iterations: usize,
    /// Omit for a size-dependent depth.
    pub pyramid_levels: Option<usize>,
    pub scale: f64,
    pub warps_per_level: usize,
    pub passes: usize,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        let p = FlowParams::default();
        RegistrationConfig {
            alpha: p.alpha,
            iterations: p.iterations,
            pyramid_levels: p.pyramid_levels,
            scale: p.scale,
            warps_per_level: p.warps_per_level,
            passes: 1,
        }
    }
}

impl RegistrationConfig {
    pub fn flow_params(&self) -> FlowParams {
        FlowParams {
            alpha: self.alpha,
            iterations: self.iterations,
            pyramid_levels: self.pyramid_levels,
            scale: self.scale,
            warps_per_level: self.warps_per_level,
        }
    }
}

/// Optional debug output written next to a restored image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DumpConfig {
    /// Root for dumps; nothing is written when unset.
    pub dir: Option<PathBuf>,
    pub sharpness: bool,
    pub flows: bool,
    pub pyramid: bool,
    pub regions: bool,
}

impl DumpConfig {
    fn any(&self) -> bool {
        self.dir.is_some() && (self.sharpness || self.flows || self.pyramid || self.regions)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub select_fraction: f64,
    /// Input file-name glob.
    pub pattern: String,
    /// `default`, a builtin `level1+qshift` name or a filter file path.
    pub filters: String,
    pub registration: RegistrationConfig,
    pub fusion: FusionConfig,
    pub deartifact: DeartifactConfig,
    pub dump: DumpConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            select_fraction: select::DEFAULT_FRACTION,
            pattern: io::DEFAULT_PATTERN.into(),
            filters: "default".into(),
            registration: RegistrationConfig::default(),
            fusion: FusionConfig::default(),
            deartifact: DeartifactConfig::default(),
            dump: DumpConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Check every sub-config; all failures become [`Error::Config`].
    pub fn validate(&self) -> Result<()> {
        let check = || -> Result<()> {
            select::selection_count(1, self.select_fraction)?;
            glob::Pattern::new(&self.pattern)
                .map_err(|e| Error::invalid(format!("bad file pattern {:?}: {e}", self.pattern)))?;
            self.registration.flow_params().validate()?;
            if self.registration.passes == 0 {
                return Err(Error::invalid("registration passes must be >= 1"));
            }
            self.fusion.validate()?;
            self.deartifact.validate()?;
            self.filter_bank()?;
            Ok(())
        };
        check().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    pub fn filter_bank(&self) -> Result<FilterBank> {
        dtcwt::load_filter_bank(&self.filters)
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub select: f64,
    pub register: f64,
    pub fuse: f64,
    pub deartifact: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub frames_in: usize,
    pub frames_selected: usize,
    pub timings: StageTimings,
    pub metrics: Option<MetricReport>,
    pub config: PipelineConfig,
}

/// Intermediate results kept by [`restore_detailed`].
#[derive(Debug, Clone)]
pub struct Restoration {
    pub output: Frame,
    /// Fused image before the deartifact stage (not clamped).
    pub fused: Frame,
    pub sharpness: SharpnessSeries,
    pub selected: Vec<usize>,
    pub report: RunReport,
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed().as_secs_f64();
    out
}

/// Run all four stages, keeping intermediates and writing any requested
/// dumps under `config.dump.dir`.
pub fn restore_detailed(seq: &FrameSequence, config: &PipelineConfig) -> Result<Restoration> {
    config.validate()?;
    let bank = config.filter_bank()?;
    let start = Instant::now();
    let mut t = StageTimings::default();
    let dump = config.dump.any().then(|| config.dump.dir.clone().unwrap());
    if let Some(dir) = &dump {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let (sharpness, selected, chosen) = timed(&mut t.select, || {
        let series = select::sharpness_series(seq)?;
        let k = select::selection_count(seq.len(), config.select_fraction)?;
        let idx = select::top_indices(&series.raw, k);
        let chosen = seq.subset(&idx)?;
        if let (Some(dir), true) = (&dump, config.dump.sharpness) {
            select::export_series_csv(&series, dir.join("sharpness.csv"))?;
        }
        Ok((series, idx, chosen))
    })
    .stage(Stage::Select)?;
    log::info!("selected {} of {} frames", chosen.len(), seq.len());

    let registered = timed(&mut t.register, || {
        let params = config.registration.flow_params();
        let (registered, flows) =
            register::register_with_flows(&chosen, &params, config.registration.passes)?;
        if let (Some(dir), true) = (&dump, config.dump.flows) {
            let flow_dir = dir.join("flows");
            fs::create_dir_all(&flow_dir).map_err(|e| Error::io(&flow_dir, e))?;
            for (f, id) in flows.iter().zip(registered.source_ids()) {
                f.write_flo2(flow_dir.join(format!("{}.flo2", file_stem(id))))?;
            }
        }
        Ok(registered)
    })
    .stage(Stage::Register)?;

    let fused = timed(&mut t.fuse, || {
        let (image, detail) = fuse::fuse_frames_detailed(&registered, &config.fusion, &bank)?;
        if let Some(dir) = &dump {
            if config.dump.pyramid {
                dtcwt::dump::dump_pyramid(&detail.pyramid, dir.join("pyramid"))?;
            }
            if let (true, Some(regions)) = (config.dump.regions, &detail.regions) {
                regions.dump(dir.join("regions"))?;
            }
        }
        Ok(image)
    })
    .stage(Stage::Fuse)?;

    let output = timed(&mut t.deartifact, || {
        deartifact::deartifact(&fused, &config.deartifact, &bank)
    })
    .stage(Stage::Deartifact)?;

    t.total = start.elapsed().as_secs_f64();
    let report = RunReport {
        frames_in: seq.len(),
        frames_selected: chosen.len(),
        timings: t,
        metrics: None,
        config: config.clone(),
    };
    Ok(Restoration {
        output,
        fused,
        sharpness,
        selected,
        report,
    })
}

/// Restore one sequence to a single frame.
pub fn restore(seq: &FrameSequence, config: &PipelineConfig) -> Result<(Frame, RunReport)> {
    restore_detailed(seq, config).map(|r| (r.output, r.report))
}

fn file_stem(id: &str) -> &str {
    Path::new(id)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(id)
}

/// Clean image for a simulated sequence directory, if it has a manifest.
pub fn ground_truth(seq_dir: &Path) -> Result<Option<Frame>> {
    if !seq_dir.join(crate::simulate::MANIFEST_FILE).exists() {
        return Ok(None);
    }
    let manifest = SimulationManifest::read(seq_dir)?;
    io::load_frame(manifest.ground_truth_path(seq_dir)).map(Some)
}

/// Load, restore and save one sequence directory; metrics are filled in
/// when the directory carries simulator ground truth.
pub fn restore_dir(seq_dir: &Path, output: &Path, config: &PipelineConfig) -> Result<RunReport> {
    let seq = io::load_sequence(seq_dir, &config.pattern).stage(Stage::Load)?;
    let (frame, mut report) = restore(&seq, config)?;
    io::save_frame(&frame, output).stage(Stage::Save)?;
    if let Some(truth) = ground_truth(seq_dir).stage(Stage::Load)? {
        // compare what was written, quantization included
        let saved = io::load_frame(output).stage(Stage::Save)?;
        report.metrics = Some(MetricReport::compute(&saved, &truth).stage(Stage::Save)?);
    }
    Ok(report)
}

/// Sequence directories under `root`, sorted by name.
pub fn discover_sequences(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Outcome of one sequence in a batch.
#[derive(Debug)]
pub struct BatchEntry {
    pub name: String,
    pub output: PathBuf,
    pub result: Result<RunReport>,
}

impl BatchEntry {
    pub fn is_ok(&self) -> bool {
        self.result.is_ok()
    }
}

#[derive(Serialize)]
struct ReportRow<'a> {
    sequence: &'a str,
    status: &'static str,
    stage: &'a str,
    frames_in: Option<usize>,
    frames_selected: Option<usize>,
    psnr: Option<f64>,
    ssim: Option<f64>,
    error: String,
}

#[derive(Serialize)]
struct TimingRow<'a> {
    sequence: &'a str,
    select_s: f64,
    register_s: f64,
    fuse_s: f64,
    deartifact_s: f64,
    total_s: f64,
}

/// Restore every sequence directory under `root` into
/// `output_dir/<name>.png`. Failures are recorded, not propagated.
/// Writes `report.csv` (deterministic fields only) and `timings.csv`.
pub fn run_batch(root: &Path, config: &PipelineConfig, output_dir: &Path) -> Result<Vec<BatchEntry>> {
    config.validate()?;
    let dirs = discover_sequences(root)?;
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    log::info!("batch: {} sequences under {}", dirs.len(), root.display());

    let entries: Vec<BatchEntry> = dirs
        .par_iter()
        .map(|dir| {
            let name = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let output = output_dir.join(format!("{name}.png"));
            let mut cfg = config.clone();
            if let Some(d) = &config.dump.dir {
                cfg.dump.dir = Some(d.join(&name));
            }
            let result = restore_dir(dir, &output, &cfg);
            if let Err(e) = &result {
                log::warn!("{name}: {e}");
            }
            BatchEntry {
                name,
                output,
                result,
            }
        })
        .collect();

    write_batch_csvs(&entries, output_dir)?;
    Ok(entries)
}

fn write_batch_csvs(entries: &[BatchEntry], output_dir: &Path) -> Result<()> {
    let report_path = output_dir.join(REPORT_CSV);
    let mut report = csv::Writer::from_path(&report_path)?;
    let timing_path = output_dir.join(TIMINGS_CSV);
    let mut timings = csv::Writer::from_path(&timing_path)?;
    for e in entries {
        match &e.result {
            Ok(r) => {
                report.serialize(ReportRow {
                    sequence: &e.name,
                    status: "ok",
                    stage: "",
                    frames_in: Some(r.frames_in),
                    frames_selected: Some(r.frames_selected),
                    psnr: r.metrics.map(|m| m.psnr),
                    ssim: r.metrics.map(|m| m.ssim),
                    error: String::new(),
                })?;
                timings.serialize(TimingRow {
                    sequence: &e.name,
                    select_s: r.timings.select,
                    register_s: r.timings.register,
                    fuse_s: r.timings.fuse,
                    deartifact_s: r.timings.deartifact,
                    total_s: r.timings.total,
                })?;
            }
            Err(err) => {
                report.serialize(ReportRow {
                    sequence: &e.name,
                    status: "failed",
                    stage: err.stage().map(Stage::as_str).unwrap_or(""),
                    frames_in: None,
                    frames_selected: None,
                    psnr: None,
                    ssim: None,
                    error: err.to_string(),
                })?;
            }
        }
    }
    report.flush().map_err(|e| Error::io(&report_path, e))?;
    timings.flush().map_err(|e| Error::io(&timing_path, e))?;
    Ok(())
}

/// Sharpness series of a sequence directory, written as CSV.
pub fn analyze(seq_dir: &Path, pattern: &str, out_csv: &Path) -> Result<SharpnessSeries> {
    let seq = io::load_sequence(seq_dir, pattern)?;
    let series = select::sharpness_series(&seq)?;
    select::export_series_csv(&series, out_csv)?;
    Ok(series)
}

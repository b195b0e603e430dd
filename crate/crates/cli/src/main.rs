use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use turbfuse::io::load_frame;
use turbfuse::metrics::MetricReport;
use turbfuse::pipeline::{self, PipelineConfig, REPORT_CSV};
use turbfuse::simulate::{self, TurbulenceParams};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "turbfuse", version, about = "Restore a sharp image from a turbulence-distorted frame sequence")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Restore one sequence directory to a single image.
    Restore {
        seq_dir: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Write the run report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Restore every sequence directory under a root.
    Batch {
        root: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Generate a synthetic turbulence sequence with ground truth.
    Simulate(SimulateArgs),
    /// Write the per-frame sharpness series of a sequence as CSV.
    Analyze {
        seq_dir: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = turbfuse::io::DEFAULT_PATTERN)]
        pattern: String,
    },
    /// PSNR and SSIM between two images.
    Metrics {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

/// Pipeline settings. Values given here override the config file.
#[derive(Args)]
struct PipelineArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    select_fraction: Option<f64>,
    /// File-name glob for frames inside a sequence directory.
    #[arg(long)]
    pattern: Option<String>,
    /// Wavelet filters: `default`, `<level1>+<qshift>` or a file path.
    #[arg(long)]
    filters: Option<String>,
    #[arg(long)]
    flow_alpha: Option<f64>,
    #[arg(long)]
    flow_iters: Option<usize>,
    /// Flow pyramid depth; size-dependent when omitted.
    #[arg(long)]
    flow_levels: Option<usize>,
    #[arg(long)]
    register_passes: Option<usize>,
    /// Fusion rule (pixel_max, region).
    #[arg(long)]
    fusion_mode: Option<String>,
    #[arg(long)]
    fusion_levels: Option<usize>,
    #[arg(long)]
    region_threshold_k: Option<f64>,
    /// Artifact removal (builtin, external, none).
    #[arg(long)]
    deartifact: Option<String>,
    #[arg(long)]
    qf: Option<u32>,
    /// Command template for external mode, with {in}, {out} and optional {qf}.
    #[arg(long)]
    deartifact_cmd: Option<String>,
    /// Directory for debug dumps.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    #[arg(long)]
    dump_sharpness: bool,
    #[arg(long)]
    dump_flows: bool,
    #[arg(long)]
    dump_pyramid: bool,
    #[arg(long)]
    dump_regions: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(short, long)]
    output: PathBuf,
    /// Degrade this image instead of a generated text card.
    #[arg(long, conflicts_with = "text")]
    clean: Option<PathBuf>,
    #[arg(long)]
    text: Option<String>,
    #[arg(long, default_value_t = simulate::DEFAULT_SIZE)]
    width: usize,
    #[arg(long, default_value_t = simulate::DEFAULT_SIZE)]
    height: usize,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    warp_amplitude: Option<f64>,
    #[arg(long)]
    warp_smoothness: Option<f64>,
    #[arg(long)]
    blur_min: Option<f64>,
    #[arg(long)]
    blur_max: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Also write the ground-truth flow of every frame.
    #[arg(long)]
    dump_flows: bool,
}

fn config_error(e: impl std::fmt::Display) -> anyhow::Error {
    anyhow::Error::new(turbfuse::Error::Config(e.to_string()))
}

fn build_config(args: &PipelineArgs) -> Result<PipelineConfig> {
    let mut c = match &args.config {
        Some(path) => PipelineConfig::load(path).map_err(config_error)?,
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value.clone() {
                $field = v;
            }
        };
    }
    set!(c.select_fraction, args.select_fraction);
    set!(c.pattern, args.pattern);
    set!(c.filters, args.filters);
    set!(c.registration.alpha, args.flow_alpha);
    set!(c.registration.iterations, args.flow_iters);
    set!(c.registration.passes, args.register_passes);
    if args.flow_levels.is_some() {
        c.registration.pyramid_levels = args.flow_levels;
    }
    set!(c.fusion.mode, args.fusion_mode);
    set!(c.fusion.levels, args.fusion_levels);
    set!(c.fusion.threshold_k, args.region_threshold_k);
    set!(c.deartifact.mode, args.deartifact);
    set!(c.deartifact.quality_factor, args.qf);
    if args.deartifact_cmd.is_some() {
        c.deartifact.external_cmd = args.deartifact_cmd.clone();
    }
    if args.dump_dir.is_some() {
        c.dump.dir = args.dump_dir.clone();
    }
    c.dump.sharpness |= args.dump_sharpness;
    c.dump.flows |= args.dump_flows;
    c.dump.pyramid |= args.dump_pyramid;
    c.dump.regions |= args.dump_regions;
    let wants_dump = c.dump.sharpness || c.dump.flows || c.dump.pyramid || c.dump.regions;
    if wants_dump && c.dump.dir.is_none() {
        return Err(config_error("dump flags need --dump-dir"));
    }
    c.validate()?;
    Ok(c)
}

fn restore(seq_dir: &Path, output: &Path, report_path: Option<&Path>, args: &PipelineArgs) -> Result<u8> {
    let config = build_config(args)?;
    let report = pipeline::restore_dir(seq_dir, output, &config)
        .with_context(|| format!("restoring {}", seq_dir.display()))?;
    println!(
        "{}: {} of {} frames, {:.2} s -> {}",
        seq_dir.display(),
        report.frames_selected,
        report.frames_in,
        report.timings.total,
        output.display()
    );
    if let Some(m) = report.metrics {
        println!("psnr {:.4} dB, ssim {:.4}", m.psnr, m.ssim);
    }
    if let Some(path) = report_path {
        let json = serde_json::to_string_pretty(&report)?;
        std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(0)
}

fn batch(root: &Path, output: &Path, args: &PipelineArgs) -> Result<u8> {
    let config = build_config(args)?;
    let entries = pipeline::run_batch(root, &config, output)?;
    let failed: Vec<_> = entries.iter().filter(|e| !e.is_ok()).collect();
    for e in &failed {
        if let Err(err) = &e.result {
            eprintln!("{}: {err}", e.name);
        }
    }
    println!(
        "{} sequences, {} failed; report in {}",
        entries.len(),
        failed.len(),
        output.join(REPORT_CSV).display()
    );
    Ok(if failed.is_empty() { 0 } else { EXIT_FAILURE })
}

fn simulate_cmd(a: &SimulateArgs) -> Result<u8> {
    let defaults = TurbulenceParams::default();
    let params = TurbulenceParams {
        warp_amplitude: a.warp_amplitude.unwrap_or(defaults.warp_amplitude),
        warp_smoothness: a.warp_smoothness.unwrap_or(defaults.warp_smoothness),
        blur_sigma_range: [
            a.blur_min.unwrap_or(defaults.blur_sigma_range[0]),
            a.blur_max.unwrap_or(defaults.blur_sigma_range[1]),
        ],
        noise_sigma: a.noise_sigma.unwrap_or(defaults.noise_sigma),
        frames: a.frames.unwrap_or(defaults.frames),
        seed: a.seed.unwrap_or(defaults.seed),
    };
    params.validate().map_err(config_error)?;
    let (clean, text) = match &a.clean {
        Some(path) => (load_frame(path)?, None),
        None => {
            let text = a.text.clone().unwrap_or_else(|| simulate::DEFAULT_TEXT.to_string());
            (simulate::text_card(a.width, a.height, &text).map_err(config_error)?, Some(text))
        }
    };
    let (seq, flows) = simulate::degrade(&clean, &params)?;
    let flows = a.dump_flows.then_some(flows.as_slice());
    simulate::write_simulation(&a.output, &clean, &seq, flows, &params, text.as_deref())?;
    println!("wrote {} frames to {}", seq.len(), a.output.display());
    Ok(0)
}

fn analyze(seq_dir: &Path, output: &Path, pattern: &str) -> Result<u8> {
    let series = pipeline::analyze(seq_dir, pattern, output)?;
    println!(
        "{} frames, coefficient of variation {:.4}; wrote {}",
        series.len(),
        series.coefficient_of_variation(),
        output.display()
    );
    Ok(0)
}

fn metrics(a: &Path, b: &Path, json: bool) -> Result<u8> {
    let fa = load_frame(a)?;
    let fb = load_frame(b)?;
    let m = MetricReport::compute(&fa, &fb)?;
    if json {
        println!("{}", serde_json::to_string(&m)?);
    } else {
        println!("psnr {:.4}", m.psnr);
        println!("ssim {:.4}", m.ssim);
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Restore {
            seq_dir,
            output,
            report,
            pipeline,
        } => restore(&seq_dir, &output, report.as_deref(), &pipeline),
        Command::Batch {
            root,
            output,
            pipeline,
        } => batch(&root, &output, &pipeline),
        Command::Simulate(args) => simulate_cmd(&args),
        Command::Analyze {
            seq_dir,
            output,
            pattern,
        } => analyze(&seq_dir, &output, &pattern),
        Command::Metrics { a, b, json } => metrics(&a, &b, json),
    }
}

fn is_config_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        matches!(
            e.downcast_ref::<turbfuse::Error>(),
            Some(turbfuse::Error::Config(_))
        )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_config_error(&err) { EXIT_CONFIG } else { EXIT_FAILURE })
        }
    }
}

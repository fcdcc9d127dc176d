use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, LevelFilter};
use scenestat::report::{
    analyze_sequence, read_csv, render_svg, summarize_records, write_csv, AnalysisError,
    ReportMetadata, RunConfig,
};
use scenestat::sequence::{load_manifest_file, CropSpec, ManifestError, NormalizeMode};
use scenestat::synth::{
    corpus_manifest, generate, write_sequence, Preset, SynthError, SynthKind, SynthScript,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "scenestat",
    version,
    about = "Scene statistics for image sequences"
)]
struct Cli {
    /// Only report errors on standard error.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a dataset and write one CSV row per adjacent frame pair.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic frame sequence with ground truth.
    Synth(SynthArgs),
    /// Summarize analysis CSVs into JSON and SVG box plots.
    Report(ReportArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    manifest: PathBuf,
    /// Output CSV path, `-` for standard output.
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value_t = 100)]
    feature_budget: usize,
    #[arg(long, default_value_t = 0.75)]
    ratio_threshold: f64,
    #[arg(long, default_value_t = 1000)]
    ransac_iters: usize,
    /// Inlier threshold in pixels.
    #[arg(long, default_value_t = 3.0)]
    ransac_threshold: f64,
    #[arg(long, default_value_t = 0.08)]
    fast_threshold: f64,
    /// `bottom-half` or `L,T,W,H`; overrides the manifest.
    #[arg(long)]
    crop: Option<CropSpec>,
    #[arg(long)]
    target_fps: Option<f64>,
    #[arg(long)]
    skip_frames: Option<usize>,
    /// `global` or `per-frame`.
    #[arg(long, default_value = "global")]
    normalize: NormalizeMode,
}

#[derive(Args)]
struct SynthArgs {
    /// `forestlike`, `officelike`, `static`, `flicker`, `translate` or `mixed`.
    kind: String,
    /// Output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Horizontal motion in pixels per frame.
    #[arg(long, allow_hyphen_values = true)]
    dx: Option<f64>,
    /// Vertical motion in pixels per frame.
    #[arg(long, allow_hyphen_values = true)]
    dy: Option<f64>,
    /// Number of frames.
    #[arg(short = 'n', long = "frames")]
    frames: Option<usize>,
    /// Flicker amplitude in `[0, 1)`.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Fraction of 8x8 blocks given local motion.
    #[arg(long)]
    fraction: Option<f64>,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Frame rate recorded in the manifest.
    #[arg(long, default_value_t = 10.0)]
    fps: f64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    /// Summary JSON path (standard output when neither output is given).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Box-plot SVG path.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Free-text note on the crop setting, stored in the JSON metadata.
    #[arg(long)]
    crop_ablation: Option<String>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: anyhow::Error) -> Self {
        Self {
            code: EXIT_USAGE,
            error,
        }
    }

    fn data(error: anyhow::Error) -> Self {
        Self {
            code: EXIT_DATA,
            error,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn open_output(path: &Path) -> anyhow::Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdout().lock()));
    }
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(Box::new(BufWriter::new(file)))
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    let mut out = open_output(path).map_err(Failure::data)?;
    out.write_all(contents.as_bytes())
        .and_then(|_| out.flush())
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::data)
}

fn analyze(args: AnalyzeArgs) -> CmdResult {
    let mut config = RunConfig::default();
    config.features.budget = args.feature_budget;
    config.features.ratio_threshold = args.ratio_threshold;
    config.features.fast_threshold = args.fast_threshold;
    config.ransac.iterations = args.ransac_iters;
    config.ransac.inlier_threshold = args.ransac_threshold;
    config.ransac.seed = args.seed;
    config.normalize = args.normalize;
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    config.validate().map_err(|e| Failure::usage(e.into()))?;

    let path = &args.manifest;
    if !path.is_file() {
        return Err(Failure::data(anyhow!(
            "manifest not found: {}",
            path.display()
        )));
    }
    let mut manifest = load_manifest_file(path)
        .with_context(|| format!("invalid manifest {}", path.display()))
        .map_err(Failure::data)?;
    if let Some(crop) = args.crop {
        manifest.crop = Some(crop);
    }
    if let Some(fps) = args.target_fps {
        manifest.target_fps = fps;
    }
    if let Some(skip) = args.skip_frames {
        manifest.skip_frames = skip;
    }
    manifest.validate().map_err(|e| match e {
        ManifestError::InvalidValue { .. } => Failure::usage(e.into()),
        _ => Failure::data(e.into()),
    })?;

    let analysis = analyze_sequence(&manifest, &config).map_err(|e| {
        let code = match e {
            AnalysisError::Pool(_) => EXIT_INTERNAL,
            AnalysisError::Config(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            error: anyhow::Error::from(e).context(format!("analysis of {} failed", manifest.name)),
        }
    })?;
    info!(
        "{}: {} pair records",
        analysis.dataset,
        analysis.records.len()
    );

    let out = open_output(&args.output).map_err(Failure::data)?;
    write_csv(&analysis.records, out)
        .with_context(|| format!("cannot write {}", args.output.display()))
        .map_err(Failure::data)
}

fn synth(args: SynthArgs) -> CmdResult {
    let (name, mut script) = match (args.kind.parse::<Preset>(), args.kind.parse::<SynthKind>()) {
        (Ok(p), _) => (p.to_string(), p.script(args.seed)),
        (_, Ok(k)) => (
            k.to_string(),
            SynthScript {
                texture_seed: args.seed,
                ..SynthScript::new(k)
            },
        ),
        _ => {
            return Err(Failure::usage(anyhow!(
                "unknown sequence kind `{}` (forestlike | officelike | static | flicker | translate | mixed)",
                args.kind
            )))
        }
    };
    if let Some(dx) = args.dx {
        script.motion_px_per_frame.0 = dx;
    }
    if let Some(dy) = args.dy {
        script.motion_px_per_frame.1 = dy;
    }
    if let Some(n) = args.frames {
        script.n_frames = n;
    }
    if let Some(a) = args.amplitude {
        script.luminance_amplitude = a;
    }
    if let Some(f) = args.fraction {
        script.local_motion_fraction = f;
    }
    if let Some(s) = args.noise {
        script.noise_sigma = s;
    }
    if let Some(w) = args.width {
        script.width = w;
    }
    if let Some(h) = args.height {
        script.height = h;
    }
    script.validate().map_err(|e| Failure::usage(e.into()))?;
    if !(args.fps.is_finite() && args.fps > 0.0) {
        return Err(Failure::usage(anyhow!("--fps must be positive")));
    }
    let dir = args
        .output
        .ok_or_else(|| Failure::usage(anyhow!("an output directory is required (-o DIR)")))?;

    info!(
        "generating {} frames of `{name}` into {}",
        script.n_frames,
        dir.display()
    );
    let seq = generate(&script).map_err(|e| Failure::usage(e.into()))?;
    let written =
        write_sequence(&dir, &seq, &corpus_manifest(&name, args.fps)).map_err(|e| match e {
            SynthError::InvalidScript(_) => Failure::usage(e.into()),
            _ => Failure::data(e.into()),
        })?;
    println!("{}", written.manifest_path.display());
    Ok(())
}

fn report(args: ReportArgs) -> CmdResult {
    let mut records = Vec::new();
    for path in &args.csv {
        let file = File::open(path)
            .with_context(|| format!("cannot open {}", path.display()))
            .map_err(Failure::data)?;
        let rows = read_csv(file)
            .with_context(|| format!("invalid analysis CSV {}", path.display()))
            .map_err(Failure::data)?;
        info!("{}: {} records", path.display(), rows.len());
        records.extend(rows);
    }
    let sources = args
        .csv
        .iter()
        .map(|p| {
            p.file_name().map_or_else(
                || p.display().to_string(),
                |n| n.to_string_lossy().into_owned(),
            )
        })
        .collect();
    let summary = summarize_records(&records, ReportMetadata::new(args.crop_ablation, sources));
    if let Some(svg) = &args.svg {
        write_file(svg, &render_svg(&summary))?;
    }
    match &args.json {
        Some(json) => write_file(json, &(summary.to_json() + "\n")),
        None if args.svg.is_none() => write_file(Path::new("-"), &(summary.to_json() + "\n")),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.quiet {
            LevelFilter::Error
        } else {
            LevelFilter::Info
        })
        .format_timestamp(None)
        .format_target(false)
        .init();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Synth(s) => synth(s),
        Command::Report(r) => report(r),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

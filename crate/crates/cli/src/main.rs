use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use maskprune::params::{
    DEFAULT_K, DEFAULT_MAX_STAGE_REMOVAL, DEFAULT_MIN_VIEWS, DEFAULT_P_NEIGHBOR, DEFAULT_P_SPATIAL, DEFAULT_TAU,
};
use maskprune::score::keep_from_indices;
use maskprune::{
    colmap, ply, rig_json, score, synth, CameraSource, PipelineConfig, PruneParams, PruneReport, SceneSpec, Variant,
};

/// Mask-guided background and floater removal for Gaussian Splatting models.
#[derive(Debug, Parser)]
#[command(name = "maskprune", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Prune a model with object masks.
    Prune(PruneArgs),
    /// Generate a labeled synthetic scene.
    Synth(SynthArgs),
    /// Score a pruning report against synthetic labels.
    Eval(EvalArgs),
    /// Print model and camera statistics.
    Info(InfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Workers {
    Auto,
    Count(usize),
}

fn parse_workers(s: &str) -> Result<Workers, String> {
    if s == "auto" {
        return Ok(Workers::Auto);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(Workers::Count(n)),
        _ => Err(format!("expected a positive integer or 'auto', got '{s}'")),
    }
}

#[derive(Debug, Args)]
#[command(
    group(clap::ArgGroup::new("rig").required(true).args(["cameras", "cameras_json"])),
    allow_negative_numbers = true
)]
struct PruneArgs {
    /// Input Gaussian model (binary little-endian PLY).
    #[arg(long)]
    model: PathBuf,
    /// COLMAP text model directory (cameras.txt, images.txt).
    #[arg(long)]
    cameras: Option<PathBuf>,
    /// Camera rig as JSON.
    #[arg(long)]
    cameras_json: Option<PathBuf>,
    /// Directory of binary object masks named after their images.
    #[arg(long)]
    masks: PathBuf,
    /// Directory of masked color images; enables color validation.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Output PLY path.
    #[arg(long)]
    out: PathBuf,
    /// Report path [default: <out>.report.json].
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "neighbor", value_parser = |s: &str| s.parse::<Variant>())]
    variant: Variant,
    /// Color distance threshold in RGB [default: 0.40].
    #[arg(long)]
    tau: Option<f64>,
    /// Neighbors for k-NN outlier removal [default: 10].
    #[arg(long)]
    k: Option<usize>,
    /// Centroid-distance percentile [default: 99].
    #[arg(long)]
    p_spatial: Option<f64>,
    /// Mean neighbor distance percentile [default: 95].
    #[arg(long)]
    p_neighbor: Option<f64>,
    /// Minimum masked views for multiview and combined [default: 2].
    #[arg(long)]
    min_views: Option<u32>,
    /// Worker threads, or 'auto'.
    #[arg(long, default_value = "auto", value_parser = parse_workers)]
    workers: Workers,
    /// Abort when a stage leaves less than this fraction of its input.
    #[arg(long, default_value_t = 1.0 - DEFAULT_MAX_STAGE_REMOVAL)]
    min_remaining: f64,
}

impl PruneArgs {
    fn params(&self) -> (PruneParams, Vec<String>) {
        let v = self.variant;
        let mut warnings = Vec::new();
        let mut ignored = |flag: &str, applies: bool, set: bool| {
            if set && !applies {
                warnings.push(format!("--{flag} has no effect with --variant {v}"));
            }
        };
        ignored("k", v.uses_neighbor(), self.k.is_some());
        ignored("p-neighbor", v.uses_neighbor(), self.p_neighbor.is_some());
        ignored("p-spatial", v.uses_spatial(), self.p_spatial.is_some());
        ignored("min-views", v.uses_min_views(), self.min_views.is_some());
        let params = PruneParams {
            variant: v,
            tau: self.tau.unwrap_or(DEFAULT_TAU),
            k: self.k.unwrap_or(DEFAULT_K),
            p_spatial: self.p_spatial.unwrap_or(DEFAULT_P_SPATIAL),
            p_neighbor: self.p_neighbor.unwrap_or(DEFAULT_P_NEIGHBOR),
            min_views: self.min_views.unwrap_or(DEFAULT_MIN_VIEWS),
            max_stage_removal: 1.0 - self.min_remaining,
        };
        (params, warnings)
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5_000)]
    objects: usize,
    #[arg(long, default_value_t = 15_000)]
    background: usize,
    #[arg(long, default_value_t = 2_000)]
    floaters: usize,
    /// Cameras on the ring.
    #[arg(long, default_value_t = 12)]
    views: usize,
    /// Masked cameras, evenly spaced on the ring.
    #[arg(long, default_value_t = 3)]
    mask_views: usize,
    #[arg(long, default_value_t = 256)]
    width: u32,
    #[arg(long, default_value_t = 192)]
    height: u32,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Label file written by `synth`.
    #[arg(long)]
    labels: PathBuf,
    /// Report written by `prune`.
    #[arg(long)]
    report: PathBuf,
    /// Pruned model; checked against the report's kept indices.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("what").required(true).multiple(true).args(["model", "cameras", "cameras_json"])))]
struct InfoArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    cameras: Option<PathBuf>,
    #[arg(long)]
    cameras_json: Option<PathBuf>,
}

fn usage_error(kind: ErrorKind, msg: impl std::fmt::Display) -> ! {
    Cli::command().error(kind, msg).exit()
}

fn default_report_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".report.json");
    out.with_file_name(name)
}

fn thousands(n: usize) -> String {
    if n >= 10_000 {
        format!("{}K", (n as f64 / 1000.0).round())
    } else {
        n.to_string()
    }
}

fn prune(args: PruneArgs) -> anyhow::Result<()> {
    let (params, warnings) = args.params();
    if let Err(msg) = params.validate() {
        usage_error(ErrorKind::ValueValidation, msg);
    }
    if !(0.0..=1.0).contains(&args.min_remaining) {
        usage_error(ErrorKind::ValueValidation, "--min-remaining must be in [0, 1]");
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let cameras = match (args.cameras, args.cameras_json) {
        (Some(dir), None) => CameraSource::ColmapText(dir),
        (None, Some(file)) => CameraSource::Json(file),
        _ => usage_error(ErrorKind::ArgumentConflict, "give exactly one of --cameras and --cameras-json"),
    };
    let config = PipelineConfig {
        params,
        model: args.model,
        cameras,
        masks: args.masks,
        images: args.images,
        report: Some(args.report.unwrap_or_else(|| default_report_path(&args.out))),
        output: args.out,
        workers: match args.workers {
            Workers::Auto => None,
            Workers::Count(n) => Some(n),
        },
    };
    let report = maskprune::run_pipeline(&config)?;

    let mut chain = vec![thousands(report.input.gaussians)];
    chain.extend(report.stages.iter().map(|s| thousands(s.remaining)));
    println!("{}", chain.join(" -> "));
    for s in &report.stages {
        println!(
            "  {:<18} removed {:>9}  ({:5.1}% of input)  {:>9.1} ms",
            s.name,
            s.removed,
            100.0 * s.fraction_of_original,
            s.millis
        );
    }
    println!(
        "compression {:.1}%  ({} -> {} bytes), {:.1} ms total with {} workers",
        100.0 * report.compression_ratio,
        report.input.bytes,
        report.output.bytes,
        report.total_millis,
        report.workers
    );
    Ok(())
}

fn synth_cmd(args: SynthArgs) -> anyhow::Result<()> {
    let spec = SceneSpec {
        seed: args.seed,
        n_object: args.objects,
        n_background: args.background,
        n_floaters: args.floaters,
        ring_views: args.views,
        mask_views: args.mask_views,
        width: args.width,
        height: args.height,
        focal: args.width as f64,
        ..SceneSpec::default()
    };
    let scene = maskprune::generate_scene(&spec)?;
    scene.write(&args.out)?;
    println!(
        "wrote {} gaussians ({} object, {} background, {} floaters), {} cameras, {} masks to {}",
        scene.cloud.len(),
        scene.count(synth::Category::Object),
        scene.count(synth::Category::Background),
        scene.count(synth::Category::Floater),
        scene.rig.len(),
        scene.masks.total_views(),
        args.out.display()
    );
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let labels = synth::read_labels(&args.labels)?;
    let report = PruneReport::load(&args.report)?;
    if report.input.gaussians != labels.len() {
        bail!(
            "report input has {} gaussians but {} has {} labels",
            report.input.gaussians,
            args.labels.display(),
            labels.len()
        );
    }
    if let Some(model) = &args.model {
        let layout = ply::read_layout(model)?;
        if layout.vertex_count != report.kept_indices.len() {
            bail!(
                "{} has {} gaussians but the report kept {}",
                model.display(),
                layout.vertex_count,
                report.kept_indices.len()
            );
        }
    }
    let keep = keep_from_indices(labels.len(), &report.kept_indices).context("kept index out of range")?;
    let metrics = score(&keep, &labels)?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

fn info(args: InfoArgs) -> anyhow::Result<()> {
    if let Some(path) = &args.model {
        let (cloud, layout) = ply::load_ply_with_layout(path)?;
        println!("model {}", path.display());
        println!("  gaussians      {}", layout.vertex_count);
        println!("  properties     {} ({} bytes per vertex)", layout.property_count, layout.stride_bytes);
        println!("  sh rest        {}", layout.sh_rest_count);
        println!("  reference      {}", layout.is_reference());
        if let Some((lo, hi)) = cloud.bounds() {
            println!("  bounds         {lo:?} .. {hi:?}");
        }
        for c in &cloud.comments {
            println!("  comment        {c}");
        }
    }
    let rig = match (&args.cameras, &args.cameras_json) {
        (Some(dir), _) => Some((dir, colmap::load_colmap_text(dir)?)),
        (None, Some(file)) => Some((file, rig_json::load_cameras_json(file)?)),
        _ => None,
    };
    if let Some((path, views)) = rig {
        println!("rig {} ({} views)", path.display(), views.len());
        for v in &views {
            let c = v.center();
            println!(
                "  {:>4} {:<24} {}x{} f=({:.1}, {:.1}) center=({:.3}, {:.3}, {:.3})",
                v.view_id, v.image_name, v.width, v.height, v.fx, v.fy, c.x, c.y, c.z
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prune(a) => prune(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Info(a) => info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // sources often repeat their parent's message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

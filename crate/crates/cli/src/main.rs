use std::ffi::OsStr;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use log::info;

use surfgrasp::cloud::{load_pcd, write_pcd, write_ply, PcdEncoding, PointCloud};
use surfgrasp::config::{ConfigFile, FilterSection, GripperSection, Length, NormalsSection, SegmentationSection};
use surfgrasp::eval::synth::{clutter_suite, ClutterParams};
use surfgrasp::eval::{bench, evaluate, synth_scene, EvalReport, Scene, SceneAnnotation, SceneFailure, SyntheticSceneSpec};
use surfgrasp::pipeline::{detect, segment, PipelineConfig, SegmentSelection};
use surfgrasp::report::{HandleReport, SegmentationReport};

/// Finds parallel-jaw grasp handles in single-view point clouds.
#[derive(Parser)]
#[command(name = "surfgrasp", version)]
struct Cli {
    /// Cap on worker threads (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a cloud and search it for grasp handles.
    Detect(DetectArgs),
    /// Segment a cloud only and write per-point labels.
    Segment(SegmentArgs),
    /// Score detections against annotated scenes.
    Eval(EvalArgs),
    /// Generate synthetic scenes with exact ground truth.
    Synth(SynthArgs),
    /// Time each pipeline stage over repeated runs.
    Bench(BenchArgs),
    /// Render a cloud with saved labels and handles to PLY.
    Export(ExportArgs),
}

/// Pipeline parameters. Lengths take a unit suffix (`8cm`, `5mm`, `0.08m`);
/// bare numbers are meters. Flags override the config file.
#[derive(Args, Default)]
struct PipelineArgs {
    /// TOML config file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Maximum hand aperture.
    #[arg(long, value_name = "LEN")]
    gripper_d: Option<Length>,
    /// Finger width.
    #[arg(long, value_name = "LEN")]
    gripper_w: Option<Length>,
    /// Finger thickness.
    #[arg(long, value_name = "LEN")]
    gripper_e: Option<Length>,
    /// Finger length.
    #[arg(long, value_name = "LEN")]
    gripper_h: Option<Length>,
    /// Minimum grasp depth.
    #[arg(long, value_name = "LEN")]
    gripper_l: Option<Length>,
    /// Minimum clearance beside the patch.
    #[arg(long, value_name = "LEN")]
    gripper_g: Option<Length>,
    /// Lower smoothness threshold in degrees.
    #[arg(long, value_name = "DEG")]
    theta_low: Option<f64>,
    /// Upper smoothness threshold in degrees.
    #[arg(long, value_name = "DEG")]
    theta_high: Option<f64>,
    /// Edge-point ratio threshold.
    #[arg(long, value_name = "K")]
    edge_k: Option<f64>,
    /// Region growing radius.
    #[arg(long, value_name = "LEN")]
    radius: Option<Length>,
    #[arg(long, value_name = "N")]
    min_segment_size: Option<usize>,
    /// Estimate normals from a radius neighborhood.
    #[arg(long, value_name = "LEN", conflicts_with = "normal_knn")]
    normal_radius: Option<Length>,
    /// Estimate normals from the k nearest neighbors.
    #[arg(long, value_name = "K")]
    normal_knn: Option<usize>,
    /// Voxel downsampling leaf size.
    #[arg(long, value_name = "LEN")]
    voxel_leaf: Option<Length>,
    /// Neighborhood-mean smoothing radius.
    #[arg(long, value_name = "LEN")]
    smoothing_radius: Option<Length>,
    /// Clamp on how far smoothing may move a point.
    #[arg(long, value_name = "LEN")]
    max_displacement: Option<Length>,
}

impl PipelineArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let flags = ConfigFile {
            gripper: GripperSection {
                d: self.gripper_d,
                w: self.gripper_w,
                e: self.gripper_e,
                h: self.gripper_h,
                l: self.gripper_l,
                g: self.gripper_g,
            },
            segmentation: SegmentationSection {
                theta_low_deg: self.theta_low,
                theta_high_deg: self.theta_high,
                k: self.edge_k,
                radius: self.radius,
                min_segment_size: self.min_segment_size,
            },
            normals: NormalsSection {
                radius: self.normal_radius,
                knn: self.normal_knn,
            },
            filter: FilterSection {
                voxel_leaf: self.voxel_leaf,
                smoothing_radius: self.smoothing_radius,
                max_displacement: self.max_displacement,
            },
        };
        let mut merged = file.merged(flags);
        // A normals flag replaces whichever neighborhood the file chose.
        if self.normal_radius.is_some() {
            merged.normals.knn = None;
        }
        if self.normal_knn.is_some() {
            merged.normals.radius = None;
        }
        Ok(merged.resolve(PipelineConfig::default())?)
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Input PCD file.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Handle JSON; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write a colored PLY with handle glyphs.
    #[arg(long, value_name = "FILE")]
    viz: Option<PathBuf>,
    /// Include wall-clock stage timings in the JSON.
    #[arg(long)]
    with_timings: bool,
    /// Only search segments that are noticeably curved.
    #[arg(long)]
    curved_only: bool,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Label JSON; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write a PLY colored by segment.
    #[arg(long, value_name = "FILE")]
    viz: Option<PathBuf>,
    #[arg(long)]
    with_timings: bool,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// PCD files, or directories searched for `*.pcd`.
    #[arg(long, value_name = "PATH", num_args = 1.., required = true)]
    scenes: Vec<PathBuf>,
    /// Directory holding `<scene>.ann.json` or `<scene>.txt` per scene.
    #[arg(long, value_name = "DIR", required = true)]
    annotations: PathBuf,
    /// Report JSON; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Per-frame recall table.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[arg(long)]
    with_timings: bool,
    /// Only search segments that are noticeably curved.
    #[arg(long)]
    curved_only: bool,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Clutter,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene description JSON.
    #[arg(long, value_name = "FILE", required_unless_present = "suite", conflicts_with = "suite")]
    spec: Option<PathBuf>,
    /// Generate a randomized suite instead of a single scene.
    #[arg(long)]
    suite: Option<Suite>,
    /// Scenes in the suite.
    #[arg(long, default_value_t = 19)]
    count: usize,
    /// Suite seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Write binary PCD instead of ASCII.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Timing JSON; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct ExportArgs {
    /// The cloud the labels and handles refer to (after any filtering).
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Label JSON written by `segment`.
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,
    /// Handle JSON written by `detect`.
    #[arg(long, value_name = "FILE")]
    handles: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

/// Writes next to the destination, then renames, so a failed run never
/// leaves a truncated file behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write into {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn load(path: &Path) -> Result<(PointCloud, f64)> {
    let t = Instant::now();
    let cloud = load_pcd(path)?;
    if cloud.dropped() > 0 {
        log::warn!("{}: dropped {} non-finite points", path.display(), cloud.dropped());
    }
    Ok((cloud, t.elapsed().as_secs_f64()))
}

fn ply_bytes(cloud: &PointCloud, seg: Option<&surfgrasp::segmentation::Segmentation>, handles: &[surfgrasp::affordance::GraspHandle]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_ply(cloud, seg, handles, &mut buf)?;
    Ok(buf)
}

fn with_selection(mut cfg: PipelineConfig, curved_only: bool) -> PipelineConfig {
    if curved_only {
        cfg.selection = SegmentSelection::curved_only();
    }
    cfg
}

fn cmd_detect(a: &DetectArgs) -> Result<()> {
    let cfg = with_selection(a.pipeline.resolve()?, a.curved_only);
    let (cloud, load_secs) = load(&a.input)?;
    let mut det = detect(&cloud, &cfg)?;
    det.timings.load = load_secs;
    let report = HandleReport::new(&det, &cfg, a.with_timings);
    // Render everything before writing anything.
    let viz = a.viz.as_ref().map(|_| ply_bytes(&det.cloud, Some(&det.segmentation), &det.handles)).transpose()?;
    emit(a.out.as_deref(), &json(&report)?)?;
    if let (Some(p), Some(bytes)) = (&a.viz, viz) {
        write_atomic(p, &bytes)?;
    }
    eprintln!(
        "{}: {} points, {} segments, {} handles",
        a.input.display(),
        det.cloud.len(),
        det.segmentation.segments().len(),
        det.handles.len()
    );
    Ok(())
}

fn cmd_segment(a: &SegmentArgs) -> Result<()> {
    let cfg = a.pipeline.resolve()?;
    let (cloud, load_secs) = load(&a.input)?;
    let (cloud, _, _, seg, mut timings) = segment(&cloud, &cfg)?;
    timings.load = load_secs;
    let report = SegmentationReport::new(&seg, &cfg, a.with_timings.then_some(timings));
    let viz = a.viz.as_ref().map(|_| ply_bytes(&cloud, Some(&seg), &[])).transpose()?;
    emit(a.out.as_deref(), &json(&report)?)?;
    if let (Some(p), Some(bytes)) = (&a.viz, viz) {
        write_atomic(p, &bytes)?;
    }
    eprintln!(
        "{}: {} points, {} segments, {} edge points, {} unlabeled",
        a.input.display(),
        seg.len(),
        seg.segments().len(),
        seg.edge_points().len(),
        seg.unlabeled_count()
    );
    Ok(())
}

fn scene_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let rd = std::fs::read_dir(p).with_context(|| format!("cannot list {}", p.display()))?;
            let mut found: Vec<PathBuf> = rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension() == Some(OsStr::new("pcd")))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!("no .pcd scenes found");
    }
    Ok(out)
}

fn annotation_path(dir: &Path, stem: &str) -> Option<PathBuf> {
    [format!("{stem}.ann.json"), format!("{stem}.json"), format!("{stem}.txt")]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
}

/// Returns whether every scene was evaluated.
fn cmd_eval(a: &EvalArgs) -> Result<bool> {
    let cfg = with_selection(a.pipeline.resolve()?, a.curved_only);
    if !a.annotations.is_dir() {
        bail!("annotation directory {} does not exist", a.annotations.display());
    }
    let mut scenes = Vec::new();
    let mut load_failures = Vec::new();
    for file in scene_files(&a.scenes)? {
        let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let loaded = (|| -> Result<Scene> {
            let ann_path = annotation_path(&a.annotations, &stem)
                .with_context(|| format!("no annotation for {stem} in {}", a.annotations.display()))?;
            let mut annotation = SceneAnnotation::load(&ann_path)?;
            annotation.scene_id = stem.clone();
            Ok(Scene {
                cloud: load_pcd(&file)?,
                annotation,
            })
        })();
        match loaded {
            Ok(s) => scenes.push(s),
            Err(e) => {
                log::error!("{stem}: {e:#}");
                load_failures.push(SceneFailure {
                    scene_id: stem,
                    error: format!("{e:#}"),
                });
            }
        }
    }
    let evaluated = evaluate(&scenes, &cfg)?;
    let mut results: Vec<std::result::Result<_, _>> = evaluated.scenes.into_iter().map(Ok).collect();
    results.extend(evaluated.failures.into_iter().map(Err));
    results.extend(load_failures.into_iter().map(Err));
    let mut report = EvalReport::assemble(results);
    if !a.with_timings {
        report = report.without_timings();
    }
    for f in &report.failures {
        eprintln!("scene {} failed: {}", f.scene_id, f.error);
    }
    let csv = a.csv.as_ref().map(|_| report.to_csv());
    emit(a.out.as_deref(), &json(&report)?)?;
    if let (Some(p), Some(text)) = (&a.csv, csv) {
        write_atomic(p, text.as_bytes())?;
    }
    eprintln!(
        "recall {:.2}% ({} of {} objects, {} scenes, {} failed)",
        report.aggregate_recall_pct,
        report.detected_objects,
        report.total_objects,
        report.scenes.len(),
        report.failures.len()
    );
    Ok(report.failures.is_empty())
}

fn write_scene(dir: &Path, stem: &str, spec: &SyntheticSceneSpec, encoding: PcdEncoding) -> Result<usize> {
    let (cloud, annotation) = synth_scene(spec)?;
    let mut pcd = Vec::new();
    write_pcd(&cloud, &mut pcd, encoding)?;
    let ann = json(&annotation)?;
    write_atomic(&dir.join(format!("{stem}.pcd")), &pcd)?;
    write_atomic(&dir.join(format!("{stem}.ann.json")), &ann)?;
    Ok(cloud.len())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let specs: Vec<(String, SyntheticSceneSpec)> = match (&a.spec, a.suite) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let spec: SyntheticSceneSpec =
                serde_json::from_str(&text).with_context(|| format!("invalid scene spec {}", path.display()))?;
            spec.validate()?;
            vec![("scene".into(), spec)]
        }
        (None, Some(Suite::Clutter)) => {
            let params = ClutterParams::around(PipelineConfig::default().gripper.g);
            clutter_suite(a.count, &params, a.seed)
                .into_iter()
                .map(|s| (s.name.clone(), s))
                .collect()
        }
        (None, None) => bail!("either --spec or --suite is required"),
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let encoding = if a.binary { PcdEncoding::Binary } else { PcdEncoding::Ascii };
    for (stem, spec) in &specs {
        let n = write_scene(&a.out, stem, spec, encoding)?;
        info!("{stem}: {n} points");
    }
    eprintln!("wrote {} scene(s) to {}", specs.len(), a.out.display());
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let cfg = a.pipeline.resolve()?;
    let (cloud, load_secs) = load(&a.input)?;
    let mut report = bench(&cloud, &cfg, a.repeats)?;
    report.load_seconds = Some(load_secs);
    emit(a.out.as_deref(), &json(&report)?)?;
    eprintln!(
        "{} points: total {:.3} s median, segmentation {:.3} s median",
        report.n_points, report.total.median, report.segmentation.median
    );
    Ok(())
}

fn cmd_export(a: &ExportArgs) -> Result<()> {
    let (cloud, _) = load(&a.input)?;
    let seg = match &a.labels {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            let report: SegmentationReport = serde_json::from_str(&text).with_context(|| format!("invalid label file {}", p.display()))?;
            if report.labels.len() != cloud.len() {
                bail!("{} has {} labels but the cloud has {} points", p.display(), report.labels.len(), cloud.len());
            }
            Some(report.to_segmentation()?)
        }
        None => None,
    };
    let handles = match &a.handles {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            let report: HandleReport = serde_json::from_str(&text).with_context(|| format!("invalid handle file {}", p.display()))?;
            if let Some(bad) = report.handles.iter().flat_map(|h| &h.patch_indices).find(|&&i| i >= cloud.len()) {
                bail!("{} references point {bad} but the cloud has {} points", p.display(), cloud.len());
            }
            report.to_handles()
        }
        None => Vec::new(),
    };
    write_atomic(&a.out, &ply_bytes(&cloud, seg.as_ref(), &handles)?)?;
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::Detect(a) => cmd_detect(a).map(|_| true),
        Command::Segment(a) => cmd_segment(a).map(|_| true),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a).map(|_| true),
        Command::Bench(a) => cmd_bench(a).map(|_| true),
        Command::Export(a) => cmd_export(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

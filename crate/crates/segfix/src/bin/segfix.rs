//! Thin command-line wrapper around the segfix library. Each subcommand maps
//! to one pipeline stage; `run` chains them all. Stage failures exit with a
//! stage-specific code (load 10, detect 20, refine 30, evaluate 40).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use segfix::corrector::{advice_mask, central_shape, decide, score_supervoxels};
use segfix::errormap::{binarize, combined_error_map, NoisyDetector};
use segfix::metrics::{contingency, per_object_vi, pr_curve, rand_scores, vi_scores};
use segfix::pipeline::{
    load_label_volume, run_pipeline_with, sidecar_path, to_json_precise, BackendConfig, Overrides,
    PipelineError, Stage,
};
use segfix::svgraph::{SegGraph, SegmentationView};
use segfix::synth::{generate_gt, inject_errors, propose_mutations, select_eval_points, EvalSpec, SynthConfig};
use segfix::volume::{LabelVolume, Point3, RawVolume, Shape3, Volume, WindowMode};
use segfix::{ErrorWindowSpec, NoisyCorrector, OracleCorrector, Corrector, Box3};

#[derive(Parser)]
#[command(name = "segfix", version, about = "Segmentation error detection and correction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonFlags {
    /// RNG seed; wins over the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (currently stages run sequentially).
    #[arg(long)]
    threads: Option<usize>,
    /// Detector backend: oracle | noisy:<fp>,<fn>
    #[arg(long, value_parser = BackendConfig::parse)]
    detector: Option<BackendConfig>,
    /// Corrector backend: oracle | noisy:<fp>,<fn>
    #[arg(long, value_parser = BackendConfig::parse)]
    corrector: Option<BackendConfig>,
    /// Output directory; stdout when omitted where applicable.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic GT volume, supervoxels, proposal graph, and
    /// mutation log.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Compute the binarized combined error map of a proposal.
    Detect {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        supervoxels: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        /// Error window extents, odd, as X,Y,Z.
        #[arg(long, default_value = "7,7,3", value_parser = parse_dims)]
        window: [usize; 3],
        #[arg(long, default_value = "clipped")]
        mode: String,
        #[arg(long, default_value_t = 0.25)]
        threshold: f64,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Run one corrector task at a location and print the decision.
    Correct {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        supervoxels: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        /// Task center as x,y,z.
        #[arg(long, value_parser = parse_point)]
        center: Point3,
        /// Corrector window extents, odd, as X,Y,Z.
        #[arg(long, default_value = "17,17,7", value_parser = parse_dims)]
        shape: [usize; 3],
        #[arg(long, default_value = "7,7,3", value_parser = parse_dims)]
        window: [usize; 3],
        #[arg(long, default_value_t = 0.25)]
        threshold: f64,
        #[arg(long, default_value_t = 0.1)]
        lo: f64,
        #[arg(long, default_value_t = 0.9)]
        hi: f64,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Run the refinement loop from a pipeline config and write the final
    /// segmentation.
    Refine {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Compare a proposal against ground truth (VI, per-object VI, Rand).
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        proposal: PathBuf,
        #[arg(long)]
        include_background: bool,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Precision-recall of a noisy detector over selected evaluation points.
    PrCurve {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        supervoxels: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "7,7,3", value_parser = parse_dims)]
        window: [usize; 3],
        #[arg(long, default_value_t = 0.25)]
        threshold: f64,
        /// Evaluation-point spec JSON; defaults match select_eval_points.
        #[arg(long)]
        eval_config: Option<PathBuf>,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Full pipeline: load/synth, detect, refine, evaluate; one JSON report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
    },
}

fn parse_dims(text: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected X,Y,Z, got '{text}'"));
    }
    let mut out = [0usize; 3];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p.trim().parse().map_err(|e| format!("bad extent: {e}"))?;
    }
    Ok(out)
}

fn parse_point(text: &str) -> Result<Point3, String> {
    let d = parse_dims(text)?;
    Ok([d[0] as i64, d[1] as i64, d[2] as i64])
}

fn stage_err<E: std::fmt::Display>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError {
        stage,
        message: e.to_string(),
    }
}

fn parse_mode(text: &str) -> Result<WindowMode, PipelineError> {
    match text {
        "valid" => Ok(WindowMode::Valid),
        "clipped" => Ok(WindowMode::Clipped),
        other => Err(PipelineError {
            stage: Stage::Load,
            message: format!("unknown window mode '{other}'"),
        }),
    }
}

fn window_spec(dims: [usize; 3], mode: WindowMode) -> Result<ErrorWindowSpec, PipelineError> {
    let shape = Shape3::new(dims[0], dims[1], dims[2]).map_err(stage_err(Stage::Load))?;
    ErrorWindowSpec::new(shape, mode).map_err(stage_err(Stage::Load))
}

fn load_view(
    supervoxels: &Path,
    graph: &Path,
) -> Result<SegmentationView, PipelineError> {
    let sv = load_label_volume(supervoxels)?;
    let text = std::fs::read_to_string(graph).map_err(stage_err(Stage::Load))?;
    let g = SegGraph::from_json(&text).map_err(stage_err(Stage::Load))?;
    SegmentationView::new(sv, g).map_err(stage_err(Stage::Load))
}

fn emit(common: &CommonFlags, file_name: &str, text: &str) -> Result<(), PipelineError> {
    match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(stage_err(Stage::Evaluate))?;
            std::fs::write(dir.join(file_name), text).map_err(stage_err(Stage::Evaluate))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_labels(dir: &Path, name: &str, v: &LabelVolume) -> Result<(), PipelineError> {
    let path = dir.join(name);
    segfix::write_volume(&Volume::Label(v.clone()), &path, &sidecar_path(&path))
        .map_err(stage_err(Stage::Load))
}

#[derive(Deserialize)]
struct SynthCliConfig {
    #[serde(flatten)]
    synth: SynthConfig,
    #[serde(default)]
    merges: usize,
    #[serde(default)]
    splits: usize,
}

fn cmd_synth(config: &Path, common: &CommonFlags) -> Result<(), PipelineError> {
    let text = std::fs::read_to_string(config).map_err(stage_err(Stage::Load))?;
    let mut cfg: SynthCliConfig = serde_json::from_str(&text).map_err(stage_err(Stage::Load))?;
    if let Some(seed) = common.seed {
        cfg.synth.seed = seed;
    }
    let (gt, sv) = generate_gt(&cfg.synth).map_err(stage_err(Stage::Load))?;
    let mutations = propose_mutations(&gt, &sv, cfg.merges, cfg.splits, cfg.synth.seed)
        .map_err(stage_err(Stage::Load))?;
    let view = inject_errors(&gt, &sv, &mutations).map_err(stage_err(Stage::Load))?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(stage_err(Stage::Load))?;
    write_labels(&dir, "gt.raw", &gt)?;
    write_labels(&dir, "supervoxels.raw", &sv)?;
    std::fs::write(dir.join("graph.json"), view.graph.to_json())
        .map_err(stage_err(Stage::Load))?;
    let log = serde_json::to_string_pretty(&mutations).expect("mutation log");
    std::fs::write(dir.join("mutations.json"), log).map_err(stage_err(Stage::Load))?;
    log::info!("synth: wrote gt, supervoxels, graph, mutations to {}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct DetectReport {
    error_voxels: usize,
    foreground_voxels: usize,
    coverage: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_detect(
    gt: &Path,
    supervoxels: &Path,
    graph: &Path,
    window: [usize; 3],
    mode: &str,
    threshold: f64,
    common: &CommonFlags,
) -> Result<(), PipelineError> {
    let gt = load_label_volume(gt)?;
    let view = load_view(supervoxels, graph)?;
    let rendered = view.render_labels();
    let spec = window_spec(window, parse_mode(mode)?)?;
    let seed = common.seed.unwrap_or(0);
    let map = match &common.detector {
        Some(BackendConfig::Noisy { fp, fn_rate }) => {
            let det = NoisyDetector::new(gt.clone(), spec.clone(), *fp, *fn_rate, seed)
                .map_err(stage_err(Stage::Detect))?;
            use segfix::Detector as _;
            det.error_map(&rendered, None, &rendered.shape.bounds())
                .map_err(stage_err(Stage::Detect))?
        }
        _ => combined_error_map(&rendered, &gt, &spec).map_err(stage_err(Stage::Detect))?,
    };
    let map = binarize(&map, threshold).map_err(stage_err(Stage::Detect))?;
    let report = DetectReport {
        error_voxels: map.count_nonzero(),
        foreground_voxels: rendered.data().iter().filter(|&&v| v != 0).count(),
        coverage: map.coverage(),
    };
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir).map_err(stage_err(Stage::Detect))?;
        let raw = RawVolume::new(
            rendered.shape,
            map.data().to_vec(),
            rendered.voxel_size,
        )
        .map_err(stage_err(Stage::Detect))?;
        let path = dir.join("error_map.raw");
        segfix::write_volume(&Volume::Raw(raw), &path, &sidecar_path(&path))
            .map_err(stage_err(Stage::Detect))?;
    }
    emit(common, "detect_report.json", &to_json_precise(&report))
}

#[derive(Serialize)]
struct CorrectReport {
    center: Point3,
    scores: BTreeMap<u32, f64>,
    merge: Vec<u32>,
    cut: Vec<u32>,
    abstain: bool,
}

#[allow(clippy::too_many_arguments)]
fn cmd_correct(
    gt: &Path,
    supervoxels: &Path,
    graph: &Path,
    center: Point3,
    shape: [usize; 3],
    window: [usize; 3],
    threshold: f64,
    lo: f64,
    hi: f64,
    common: &CommonFlags,
) -> Result<(), PipelineError> {
    let gt = load_label_volume(gt)?;
    let view = load_view(supervoxels, graph)?;
    let rendered = view.render_labels();
    let spec = window_spec(window, WindowMode::Clipped)?;
    let map = combined_error_map(&rendered, &gt, &spec).map_err(stage_err(Stage::Detect))?;
    let map = binarize(&map, threshold).map_err(stage_err(Stage::Detect))?;
    let cshape = Shape3::new(shape[0], shape[1], shape[2]).map_err(stage_err(Stage::Load))?;
    let task = advice_mask(&view, &map, None, center, cshape).map_err(stage_err(Stage::Refine))?;
    let seed = common.seed.unwrap_or(0);
    let corrector: Box<dyn Corrector> = match &common.corrector {
        Some(BackendConfig::Noisy { fp, fn_rate }) => Box::new(
            NoisyCorrector::new(gt.clone(), *fp, *fn_rate, seed).map_err(stage_err(Stage::Refine))?,
        ),
        _ => Box::new(OracleCorrector::new(gt.clone())),
    };
    let soft = corrector.prune(&task).map_err(stage_err(Stage::Refine))?;
    let central = Box3::window_at(center, central_shape(cshape))
        .map_err(stage_err(Stage::Refine))?
        .intersect(&view.supervoxels.shape.bounds())
        .ok_or_else(|| PipelineError {
            stage: Stage::Refine,
            message: format!("center {center:?} lies outside the volume"),
        })?;
    let scores = score_supervoxels(&soft, &view, &central);
    let decision = decide(&scores, lo, hi).map_err(stage_err(Stage::Refine))?;
    let report = CorrectReport {
        center,
        scores,
        merge: decision.merge.iter().copied().collect(),
        cut: decision.cut.iter().copied().collect(),
        abstain: decision.abstain,
    };
    emit(common, "correct_report.json", &to_json_precise(&report))
}

fn overrides_from(common: &CommonFlags) -> Overrides {
    Overrides {
        seed: common.seed,
        threads: common.threads,
        detector: common.detector.clone(),
        corrector: common.corrector.clone(),
    }
}

fn cmd_run(config: &Path, common: &CommonFlags, full_report: bool) -> Result<(), PipelineError> {
    let text = std::fs::read_to_string(config).map_err(stage_err(Stage::Load))?;
    let outcome = run_pipeline_with(&text, &overrides_from(common))?;
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir).map_err(stage_err(Stage::Evaluate))?;
        write_labels(dir, "final_segmentation.raw", &outcome.final_rendered)?;
        std::fs::write(dir.join("final_graph.json"), outcome.final_view.graph.to_json())
            .map_err(stage_err(Stage::Evaluate))?;
    }
    let (name, text) = if full_report {
        ("report.json", to_json_precise(&outcome.report))
    } else {
        ("refine_report.json", to_json_precise(&outcome.report.refinement))
    };
    emit(common, name, &text)
}

#[derive(Serialize)]
struct EvaluateReport {
    vi: segfix::ViScores,
    rand: segfix::RandScores,
    per_object: segfix::metrics::PerObjectVi,
}

fn cmd_evaluate(
    gt: &Path,
    proposal: &Path,
    include_background: bool,
    common: &CommonFlags,
) -> Result<(), PipelineError> {
    let gt = load_label_volume(gt)?;
    let prop = load_label_volume(proposal)?;
    let t = contingency(&gt, &prop, include_background).map_err(stage_err(Stage::Evaluate))?;
    let report = EvaluateReport {
        vi: vi_scores(&t).map_err(stage_err(Stage::Evaluate))?,
        rand: rand_scores(&t).map_err(stage_err(Stage::Evaluate))?,
        per_object: per_object_vi(&t).map_err(stage_err(Stage::Evaluate))?,
    };
    emit(common, "evaluation.json", &to_json_precise(&report))
}

#[derive(Serialize)]
struct PrReport {
    points: usize,
    positives: usize,
    curve: Vec<segfix::metrics::PrPoint>,
}

fn cmd_pr_curve(
    gt: &Path,
    supervoxels: &Path,
    graph: &Path,
    window: [usize; 3],
    threshold: f64,
    eval_config: Option<&Path>,
    common: &CommonFlags,
) -> Result<(), PipelineError> {
    let gt = load_label_volume(gt)?;
    let view = load_view(supervoxels, graph)?;
    let rendered = view.render_labels();
    let spec = window_spec(window, WindowMode::Clipped)?;
    let map = combined_error_map(&rendered, &gt, &spec).map_err(stage_err(Stage::Detect))?;
    let map = binarize(&map, threshold).map_err(stage_err(Stage::Detect))?;
    let eval: EvalSpec = match eval_config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(stage_err(Stage::Load))?;
            serde_json::from_str(&text).map_err(stage_err(Stage::Load))?
        }
        None => EvalSpec::default(),
    };
    let seed = common.seed.unwrap_or(0);
    let points =
        select_eval_points(&rendered, &map, &eval, seed).map_err(stage_err(Stage::Evaluate))?;
    let (fp, fn_rate) = match &common.detector {
        Some(BackendConfig::Noisy { fp, fn_rate }) => (*fp, *fn_rate),
        _ => (0.0, 0.0),
    };
    let det = NoisyDetector::new(gt.clone(), spec, fp, fn_rate, seed)
        .map_err(stage_err(Stage::Detect))?;
    let small = Shape3::new(
        eval.small[0].max(1) | 1,
        eval.small[1].max(1) | 1,
        eval.small[2].max(1) | 1,
    )
    .map_err(stage_err(Stage::Evaluate))?;
    let mut scores = Vec::with_capacity(points.len());
    let mut labels = Vec::with_capacity(points.len());
    for p in &points {
        let d = det
            .point_decision(&rendered, p.point, small)
            .map_err(stage_err(Stage::Evaluate))?;
        scores.push(if d { 1.0 } else { 0.0 });
        labels.push(p.erroneous);
    }
    let curve = pr_curve(&scores, &labels).map_err(stage_err(Stage::Evaluate))?;
    let report = PrReport {
        points: points.len(),
        positives: labels.iter().filter(|&&l| l).count(),
        curve,
    };
    emit(common, "pr_curve.json", &to_json_precise(&report))
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Synth { config, common } => cmd_synth(config, common),
        Command::Detect {
            gt,
            supervoxels,
            graph,
            window,
            mode,
            threshold,
            common,
        } => cmd_detect(gt, supervoxels, graph, *window, mode, *threshold, common),
        Command::Correct {
            gt,
            supervoxels,
            graph,
            center,
            shape,
            window,
            threshold,
            lo,
            hi,
            common,
        } => cmd_correct(
            gt, supervoxels, graph, *center, *shape, *window, *threshold, *lo, *hi, common,
        ),
        Command::Refine { config, common } => cmd_run(config, common, false),
        Command::Evaluate {
            gt,
            proposal,
            include_background,
            common,
        } => cmd_evaluate(gt, proposal, *include_background, common),
        Command::PrCurve {
            gt,
            supervoxels,
            graph,
            window,
            threshold,
            eval_config,
            common,
        } => cmd_pr_curve(
            gt,
            supervoxels,
            graph,
            *window,
            *threshold,
            eval_config.as_deref(),
            common,
        ),
        Command::Run { config, common } => cmd_run(config, common, true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SEGFIX_LOG")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("segfix: {e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}

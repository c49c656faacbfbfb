//! End-to-end orchestration: load or synthesize data, detect errors, run the
//! refinement loop, and evaluate the result, producing a single JSON report.
//!
//! Stage failures carry a stage tag so callers can map them to distinct exit
//! codes. Reports embed the input config byte for byte and serialize floats
//! at full precision so reruns with the same seed diff cleanly.

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::errormap::{
    binarize, combined_error_map, error_within, Detector, ErrorWindowSpec, NoisyDetector,
    OracleDetector,
};
use crate::metrics::{
    contingency, count_point_errors, rand_scores, vi_scores, PointErrorCounts, RandScores,
    ViScores,
};
use crate::refine::{init_state, run, RefinementConfig, RefinementReport};
use crate::svgraph::{SegGraph, SegmentationView};
use crate::synth::{
    generate_gt, inject_errors, propose_mutations, select_eval_points, EvalSpec, SynthConfig,
};
use crate::corrector::{Corrector, NoisyCorrector, OracleCorrector};
use crate::volume::{LabelVolume, Shape3, Volume};

/// Stage classes used for error tagging and process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Load,
    Detect,
    Refine,
    Evaluate,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Load => 10,
            Stage::Detect => 20,
            Stage::Refine => 30,
            Stage::Evaluate => 40,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Load => "load",
            Stage::Detect => "detect",
            Stage::Refine => "refine",
            Stage::Evaluate => "evaluate",
        };
        f.write_str(s)
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.message)
    }
}

impl std::error::Error for PipelineError {}

fn fail<E: fmt::Display>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError {
        stage,
        message: e.to_string(),
    }
}

/// Backend selection for the detector or corrector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Oracle,
    Noisy {
        fp: f64,
        #[serde(rename = "fn")]
        fn_rate: f64,
    },
}

impl BackendConfig {
    /// Parse the CLI form `oracle` or `noisy:<fp>,<fn>`.
    pub fn parse(text: &str) -> Result<Self, String> {
        if text == "oracle" {
            return Ok(BackendConfig::Oracle);
        }
        let rest = text
            .strip_prefix("noisy:")
            .ok_or_else(|| format!("expected 'oracle' or 'noisy:<fp>,<fn>', got '{text}'"))?;
        let (fp, fnr) = rest
            .split_once(',')
            .ok_or_else(|| format!("expected 'noisy:<fp>,<fn>', got '{text}'"))?;
        let fp: f64 = fp.trim().parse().map_err(|e| format!("bad fp rate: {e}"))?;
        let fn_rate: f64 = fnr.trim().parse().map_err(|e| format!("bad fn rate: {e}"))?;
        Ok(BackendConfig::Noisy { fp, fn_rate })
    }
}

/// Where the volumes come from: files on disk or an inline synthetic recipe.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputsConfig {
    Paths {
        gt: PathBuf,
        supervoxels: PathBuf,
        graph: PathBuf,
    },
    Synth {
        #[serde(flatten)]
        synth: SynthConfig,
        merges: usize,
        splits: usize,
    },
}

fn default_threads() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub inputs: InputsConfig,
    pub refine: RefinementConfig,
    pub detector: BackendConfig,
    pub corrector: BackendConfig,
    pub seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub include_background: bool,
    #[serde(default)]
    pub eval: Option<EvalSpec>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let config: PipelineConfig = serde_json::from_str(text).map_err(fail(Stage::Load))?;
        if config.threads == 0 {
            return Err(PipelineError {
                stage: Stage::Load,
                message: "threads must be >= 1".into(),
            });
        }
        config.refine.validate().map_err(fail(Stage::Load))?;
        Ok(config)
    }
}

/// Sidecar path convention: the volume path with ".json" appended.
pub fn sidecar_path(volume: &Path) -> PathBuf {
    let mut s = volume.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn load_label_volume(path: &Path) -> Result<LabelVolume, PipelineError> {
    let v = crate::volume::read_volume(path, &sidecar_path(path)).map_err(fail(Stage::Load))?;
    match v {
        Volume::Label(l) => Ok(l),
        Volume::Raw(_) => Err(PipelineError {
            stage: Stage::Load,
            message: format!("{} is a raw volume, expected labels", path.display()),
        }),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentationMetrics {
    pub vi: ViScores,
    pub rand: RandScores,
    pub error_voxels: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config_echo: String,
    pub seed: u64,
    pub timings: Vec<StageTiming>,
    pub initial: SegmentationMetrics,
    #[serde(rename = "final")]
    pub final_metrics: SegmentationMetrics,
    pub refinement: RefinementReport,
    pub point_errors: Option<PointErrorCounts>,
}

/// Everything the pipeline produced beyond the report, for callers that want
/// to write artifacts.
pub struct RunOutcome {
    pub report: RunReport,
    pub gt: LabelVolume,
    pub final_view: SegmentationView,
    pub final_rendered: LabelVolume,
}

fn make_detector(
    backend: &BackendConfig,
    gt: &LabelVolume,
    window: &ErrorWindowSpec,
    seed: u64,
) -> Result<Box<dyn Detector>, PipelineError> {
    Ok(match backend {
        BackendConfig::Oracle => Box::new(OracleDetector::new(gt.clone(), window.clone())),
        BackendConfig::Noisy { fp, fn_rate } => Box::new(
            NoisyDetector::new(gt.clone(), window.clone(), *fp, *fn_rate, seed)
                .map_err(fail(Stage::Detect))?,
        ),
    })
}

fn make_corrector(
    backend: &BackendConfig,
    gt: &LabelVolume,
    seed: u64,
) -> Result<Box<dyn Corrector>, PipelineError> {
    Ok(match backend {
        BackendConfig::Oracle => Box::new(OracleCorrector::new(gt.clone())),
        BackendConfig::Noisy { fp, fn_rate } => Box::new(
            NoisyCorrector::new(gt.clone(), *fp, *fn_rate, seed).map_err(fail(Stage::Refine))?,
        ),
    })
}

fn measure(
    gt: &LabelVolume,
    rendered: &LabelVolume,
    window: &ErrorWindowSpec,
    threshold: f64,
    include_background: bool,
) -> Result<(SegmentationMetrics, crate::errormap::ErrorMap), PipelineError> {
    let t = contingency(gt, rendered, include_background).map_err(fail(Stage::Evaluate))?;
    let vi = vi_scores(&t).map_err(fail(Stage::Evaluate))?;
    let rand = rand_scores(&t).map_err(fail(Stage::Evaluate))?;
    let map = combined_error_map(rendered, gt, window).map_err(fail(Stage::Evaluate))?;
    let map = binarize(&map, threshold).map_err(fail(Stage::Evaluate))?;
    Ok((
        SegmentationMetrics {
            vi,
            rand,
            error_voxels: map.count_nonzero(),
        },
        map,
    ))
}

/// Command-line overrides; a set flag wins over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub detector: Option<BackendConfig>,
    pub corrector: Option<BackendConfig>,
}

/// Run load, detect, refine, and evaluate on a parsed config, echoing
/// `config_text` into the report.
pub fn run_pipeline(config_text: &str) -> Result<RunOutcome, PipelineError> {
    run_pipeline_with(config_text, &Overrides::default())
}

pub fn run_pipeline_with(
    config_text: &str,
    overrides: &Overrides,
) -> Result<RunOutcome, PipelineError> {
    let mut config = PipelineConfig::parse(config_text)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(threads) = overrides.threads {
        config.threads = threads;
    }
    if let Some(d) = &overrides.detector {
        config.detector = d.clone();
    }
    if let Some(c) = &overrides.corrector {
        config.corrector = c.clone();
    }
    let mut timings = Vec::new();

    let t0 = Instant::now();
    let (gt, view) = match &config.inputs {
        InputsConfig::Paths {
            gt,
            supervoxels,
            graph,
        } => {
            let gt = load_label_volume(gt)?;
            let sv = load_label_volume(supervoxels)?;
            let text = std::fs::read_to_string(graph).map_err(fail(Stage::Load))?;
            let g = SegGraph::from_json(&text).map_err(fail(Stage::Load))?;
            let view = SegmentationView::new(sv, g).map_err(fail(Stage::Load))?;
            (gt, view)
        }
        InputsConfig::Synth {
            synth,
            merges,
            splits,
        } => {
            let mut synth = synth.clone();
            synth.seed = config.seed;
            let (gt, sv) = generate_gt(&synth).map_err(fail(Stage::Load))?;
            let mutations =
                propose_mutations(&gt, &sv, *merges, *splits, config.seed).map_err(fail(Stage::Load))?;
            let view = inject_errors(&gt, &sv, &mutations).map_err(fail(Stage::Load))?;
            (gt, view)
        }
    };
    timings.push(StageTiming {
        stage: "load".into(),
        ms: t0.elapsed().as_millis() as u64,
    });

    let mut refine_config = config.refine.clone();
    refine_config.seed = config.seed;
    let detector = make_detector(&config.detector, &gt, &refine_config.error_window, config.seed)?;
    let corrector = make_corrector(&config.corrector, &gt, config.seed)?;

    let t1 = Instant::now();
    let mut state =
        init_state(view, detector.as_ref(), None, &refine_config).map_err(fail(Stage::Detect))?;
    let initial_rendered = state.rendered().clone();
    timings.push(StageTiming {
        stage: "detect".into(),
        ms: t1.elapsed().as_millis() as u64,
    });

    let t2 = Instant::now();
    let refinement = run(
        &mut state,
        detector.as_ref(),
        corrector.as_ref(),
        None,
        &refine_config,
    )
    .map_err(fail(Stage::Refine))?;
    timings.push(StageTiming {
        stage: "refine".into(),
        ms: t2.elapsed().as_millis() as u64,
    });

    let t3 = Instant::now();
    let final_rendered = state.rendered().clone();
    let (initial, initial_map) = measure(
        &gt,
        &initial_rendered,
        &refine_config.error_window,
        refine_config.binarize_threshold,
        config.include_background,
    )?;
    let (final_metrics, final_map) = measure(
        &gt,
        &final_rendered,
        &refine_config.error_window,
        refine_config.binarize_threshold,
        config.include_background,
    )?;
    let point_errors = match &config.eval {
        Some(spec) => {
            let points = select_eval_points(&initial_rendered, &initial_map, spec, config.seed)
                .map_err(fail(Stage::Evaluate))?;
            let small = Shape3::new(
                spec.small[0].max(1),
                spec.small[1].max(1),
                spec.small[2].max(1),
            )
            .map_err(fail(Stage::Evaluate))?;
            let before: Vec<bool> = points.iter().map(|p| p.erroneous).collect();
            let after: Vec<bool> = points
                .iter()
                .map(|p| error_within(&final_map, p.point, small))
                .collect();
            Some(count_point_errors(&before, &after).map_err(fail(Stage::Evaluate))?)
        }
        None => None,
    };
    timings.push(StageTiming {
        stage: "evaluate".into(),
        ms: t3.elapsed().as_millis() as u64,
    });

    let report = RunReport {
        config_echo: config_text.to_string(),
        seed: config.seed,
        timings,
        initial,
        final_metrics,
        refinement,
        point_errors,
    };
    Ok(RunOutcome {
        report,
        gt,
        final_view: state.into_view(),
        final_rendered,
    })
}

struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        // 17 significant digits round-trip any f64.
        write!(writer, "{:.16e}", value)
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{:.16e}", f64::from(value))
    }
}

/// Serialize to JSON with every float at 17 significant digits.
pub fn to_json_precise<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PreciseFormatter);
    value.serialize(&mut ser).expect("report serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("json is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::WindowMode;

    fn synth_config_json(seed: u64) -> String {
        format!(
            r#"{{
  "inputs": {{
    "kind": "synth",
    "shape": {{"x": 64, "y": 64, "z": 16}},
    "num_objects": 8,
    "cell": [16, 16, 16],
    "gap": 2,
    "min_thickness": 14,
    "tube_fraction": 0.0,
    "sv_block": [5, 5, 4],
    "seed": 0,
    "merges": 5,
    "splits": 5
  }},
  "refine": {{
    "corrector_shape": {{"x": 17, "y": 17, "z": 7}},
    "error_window": {{"shape": {{"x": 7, "y": 7, "z": 3}}, "mode": "clipped"}},
    "binarize_threshold": 0.25,
    "lo": 0.1,
    "hi": 0.9,
    "max_visits": 2,
    "seed": 0
  }},
  "detector": {{"kind": "oracle"}},
  "corrector": {{"kind": "oracle"}},
  "seed": {seed}
}}"#
        )
    }

    fn strip_timings(report: &RunReport) -> String {
        let mut r = report.clone();
        r.timings.clear();
        r.refinement.wall_ms = 0;
        to_json_precise(&r)
    }

    #[test]
    fn oracle_run_reaches_zero_vi() {
        let text = synth_config_json(42);
        let outcome = run_pipeline(&text).unwrap();
        let r = &outcome.report;
        assert!(r.initial.vi.vi_split + r.initial.vi.vi_merge > 0.0);
        assert_eq!(r.final_metrics.vi.vi_split, 0.0);
        assert_eq!(r.final_metrics.vi.vi_merge, 0.0);
        assert_eq!(r.final_metrics.error_voxels, 0);
        assert_eq!(r.config_echo, text);
    }

    #[test]
    fn same_seed_reports_match_modulo_timings() {
        let text = synth_config_json(7);
        let a = run_pipeline(&text).unwrap();
        let b = run_pipeline(&text).unwrap();
        assert_eq!(strip_timings(&a.report), strip_timings(&b.report));
    }

    #[test]
    fn missing_volume_is_a_load_error() {
        let text = r#"{
  "inputs": {"kind": "paths", "gt": "/nonexistent/gt.raw",
             "supervoxels": "/nonexistent/sv.raw", "graph": "/nonexistent/g.json"},
  "refine": {
    "corrector_shape": {"x": 7, "y": 7, "z": 3},
    "error_window": {"shape": {"x": 3, "y": 3, "z": 1}, "mode": "clipped"},
    "binarize_threshold": 0.25, "lo": 0.1, "hi": 0.9, "max_visits": 2, "seed": 0
  },
  "detector": {"kind": "oracle"},
  "corrector": {"kind": "oracle"},
  "seed": 1
}"#;
        let err = run_pipeline(text).err().unwrap();
        assert_eq!(err.stage, Stage::Load);
        assert_eq!(err.stage.exit_code(), 10);
    }

    #[test]
    fn backend_parsing() {
        assert_eq!(BackendConfig::parse("oracle").unwrap(), BackendConfig::Oracle);
        assert_eq!(
            BackendConfig::parse("noisy:0.05,0.02").unwrap(),
            BackendConfig::Noisy {
                fp: 0.05,
                fn_rate: 0.02
            }
        );
        assert!(BackendConfig::parse("magic").is_err());
        assert!(BackendConfig::parse("noisy:1").is_err());
    }

    #[test]
    fn precise_floats_round_trip() {
        #[derive(Serialize)]
        struct S {
            x: f64,
        }
        for &x in &[0.1, 1.0 / 3.0, 2.0f64.ln(), 1e-300, 12345.678901234567] {
            let text = to_json_precise(&S { x });
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["x"].as_f64().unwrap(), x);
        }
    }

    #[test]
    fn window_spec_serde_round_trip() {
        let spec = ErrorWindowSpec::new(Shape3::new(5, 5, 3).unwrap(), WindowMode::Valid).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: ErrorWindowSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}

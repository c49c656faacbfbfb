//! Error detection and correction for volumetric instance segmentations.
//!
//! A proposed segmentation is modeled as a graph over supervoxels: an
//! over-segmentation whose atoms are never wrong, so every proposal and every
//! true object is a union of supervoxels. Errors live at the graph level as
//! spurious edges (merges) or missing edges (splits).
//!
//! The toolkit detects errors with windowed error maps, builds advice masks
//! around flagged locations, asks a pluggable corrector to prune each
//! candidate mask down to a single object, and applies the confident
//! decisions to the graph until the error map clears or a visit budget is
//! exhausted. Ground-truth oracles (optionally with calibrated noise) stand
//! in for learned models, which keeps every stage exactly testable.
//!
//! Start with [`synth`] to build test volumes, [`errormap`] for detection,
//! [`refine`] for the correction loop, and [`metrics`] for evaluation. The
//! `examples/` directory walks through each capability; the `segfix` binary
//! wraps them as subcommands.

pub mod corrector;
pub mod errormap;
pub mod metrics;
pub mod pipeline;
pub mod reference;
pub mod refine;
pub mod svgraph;
pub mod synth;
pub mod volume;

pub use corrector::{
    advice_mask, central_shape, decide, mask_from_vector_field, score_supervoxels,
    AbstainCorrector, Corrector, NoisyCorrector, OracleCorrector, PruningTask, SoftMask,
};
pub use errormap::{
    binarize, combined_error_map, error_within, oracle_error_map, Detector, ErrorMap,
    ErrorWindowSpec, NoisyDetector, OracleDetector,
};
pub use metrics::{
    contingency, count_point_errors, per_object_vi, pr_curve, rand_scores, vi_scores,
    ContingencyTable, RandScores, ViScores,
};
pub use pipeline::{
    run_pipeline, run_pipeline_with, to_json_precise, BackendConfig, Overrides, PipelineConfig,
    RunReport, Stage,
};
pub use refine::{init_state, run, RefinementConfig, RefinementReport};
pub use svgraph::{build_graph, SegGraph, SegmentationView, SupervoxelId};
pub use synth::{
    generate_gt, inject_errors, propose_mutations, sample_locations, select_eval_points,
    EvalSpec, Mutation, SynthConfig,
};
pub use volume::{
    read_volume, write_volume, Box3, LabelVolume, ObjectMask, Point3, RawVolume, Shape3, Volume,
    VoxelSize, WindowMode,
};

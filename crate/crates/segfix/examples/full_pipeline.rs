//! Drive the whole pipeline from a JSON config, exactly as the `segfix run`
//! subcommand does: synthesize inputs, detect, refine with noisy backends,
//! evaluate, and emit one report.
//!
//! Run with: cargo run --example full_pipeline

use segfix::{run_pipeline, to_json_precise};

const CONFIG: &str = r#"{
  "inputs": {
    "kind": "synth",
    "shape": {"x": 64, "y": 64, "z": 16},
    "num_objects": 16,
    "cell": [16, 16, 16],
    "gap": 2,
    "min_thickness": 99,
    "tube_fraction": 0.0,
    "sv_block": [5, 5, 4],
    "seed": 0,
    "merges": 3,
    "splits": 3
  },
  "refine": {
    "corrector_shape": {"x": 17, "y": 17, "z": 7},
    "error_window": {"shape": {"x": 7, "y": 7, "z": 3}, "mode": "clipped"},
    "binarize_threshold": 0.25,
    "lo": 0.1,
    "hi": 0.9,
    "max_visits": 2,
    "seed": 0
  },
  "detector": {"kind": "noisy", "fp": 0.002, "fn": 0.01},
  "corrector": {"kind": "oracle"},
  "seed": 42,
  "eval": {
    "large": [21, 21, 5],
    "small": [11, 11, 3],
    "spacing": [4, 4, 2],
    "candidates": 2048,
    "sample_window": [33, 33, 9]
  }
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let outcome = run_pipeline(CONFIG)?;
    let r = &outcome.report;

    for t in &r.timings {
        println!("stage {:9} {:6} ms", t.stage, t.ms);
    }
    println!(
        "initial: VI split {:.4} merge {:.4}, {} error voxels",
        r.initial.vi.vi_split, r.initial.vi.vi_merge, r.initial.error_voxels
    );
    println!(
        "final:   VI split {:.4} merge {:.4}, {} error voxels",
        r.final_metrics.vi.vi_split, r.final_metrics.vi.vi_merge, r.final_metrics.error_voxels
    );
    println!(
        "refinement: {} steps, {} applied, stopped because {}",
        r.refinement.steps, r.refinement.applied, r.refinement.termination
    );
    if let Some(pe) = &r.point_errors {
        println!(
            "point errors: {} before, {} after, {} fixed, {} introduced",
            pe.errors_before, pe.errors_after, pe.fixed, pe.introduced
        );
    }

    // The full report, as `segfix run` writes it (floats kept at full
    // precision so reruns diff cleanly).
    let json = to_json_precise(&r);
    println!("report is {} bytes of JSON", json.len());
    Ok(())
}

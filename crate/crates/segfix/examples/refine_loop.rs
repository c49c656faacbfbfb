//! Run the full refinement loop: detect errors, walk flagged locations, ask
//! the corrector for a decision at each, apply confident decisions to the
//! graph, and refresh the error map locally until it clears.
//!
//! With oracle backends the loop recovers the ground truth exactly.
//!
//! Run with: cargo run --example refine_loop

use segfix::{
    contingency, generate_gt, init_state, inject_errors, propose_mutations, run, vi_scores,
    ErrorWindowSpec, OracleCorrector, OracleDetector, RefinementConfig, Shape3, SynthConfig,
    WindowMode,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SynthConfig {
        shape: Shape3::new(64, 64, 16)?,
        num_objects: 16,
        cell: [16, 16, 16],
        gap: 2,
        min_thickness: 99,
        tube_fraction: 0.0,
        sv_block: [5, 5, 4],
        seed: 11,
    };
    let (gt, supervoxels) = generate_gt(&config)?;
    let mutations = propose_mutations(&gt, &supervoxels, 4, 4, config.seed)?;
    let view = inject_errors(&gt, &supervoxels, &mutations)?;

    let refine = RefinementConfig {
        corrector_shape: Shape3::new(17, 17, 7)?,
        error_window: ErrorWindowSpec::new(Shape3::new(7, 7, 3)?, WindowMode::Clipped)?,
        binarize_threshold: 0.25,
        lo: 0.1,
        hi: 0.9,
        max_visits: 2,
        seed: config.seed,
    };
    let detector = OracleDetector::new(gt.clone(), refine.error_window.clone());
    let corrector = OracleCorrector::new(gt.clone());

    let mut state = init_state(view, &detector, None, &refine)?;
    let before = vi_scores(&contingency(&gt, state.rendered(), false)?)?;
    println!(
        "before: {} white voxels, VI split {:.4} merge {:.4}",
        state.error_map().count_nonzero(),
        before.vi_split,
        before.vi_merge
    );

    let report = run(&mut state, &detector, &corrector, None, &refine)?;
    println!(
        "loop: {} steps, {} applied, {} abstained, +{} -{} edges, stopped because {}",
        report.steps,
        report.applied,
        report.abstained,
        report.edges_added,
        report.edges_removed,
        report.termination
    );

    let after = vi_scores(&contingency(&gt, state.rendered(), false)?)?;
    println!(
        "after: {} white voxels, VI split {:.4} merge {:.4}",
        state.error_map().count_nonzero(),
        after.vi_split,
        after.vi_merge
    );
    assert_eq!(state.error_map().count_nonzero(), 0);
    Ok(())
}

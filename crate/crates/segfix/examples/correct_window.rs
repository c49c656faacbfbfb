//! Run a single corrector task at a flagged location.
//!
//! The advice mask gathers the central segment plus every segment that owns a
//! white error-map voxel inside the window. The corrector returns a soft mask
//! of the one true object containing the center; supervoxel scores against
//! the central box become a merge/cut decision, or an abstention when any
//! score is ambiguous.
//!
//! Run with: cargo run --example correct_window

use segfix::{
    advice_mask, binarize, central_shape, combined_error_map, decide, generate_gt,
    inject_errors, propose_mutations, score_supervoxels, Box3, Corrector, ErrorWindowSpec,
    OracleCorrector, Shape3, SynthConfig, WindowMode,
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
        seed: 7,
    };
    let (gt, supervoxels) = generate_gt(&config)?;
    let mutations = propose_mutations(&gt, &supervoxels, 3, 3, config.seed)?;
    let view = inject_errors(&gt, &supervoxels, &mutations)?;
    let proposal = view.render_labels();

    let spec = ErrorWindowSpec::new(Shape3::new(7, 7, 3)?, WindowMode::Clipped)?;
    let map = binarize(&combined_error_map(&proposal, &gt, &spec)?, 0.25)?;

    // First white foreground voxel is our task center.
    let center = map
        .region
        .iter()
        .find(|&p| map.get(p) > 0.0 && proposal.get(p) != 0)
        .expect("corrupted proposal has flagged voxels");
    println!("task center {center:?}, proposal segment {}", proposal.get(center));

    let window = Shape3::new(17, 17, 7)?;
    let task = advice_mask(&view, &map, None, center, window)?;
    let candidate_voxels = task.candidate.data().iter().filter(|&&b| b).count();
    println!(
        "advice mask: {candidate_voxels} candidate voxels in a {} voxel window",
        task.window.len()
    );

    let corrector = OracleCorrector::new(gt.clone());
    let soft = corrector.prune(&task)?;

    let central = Box3::window_at(center, central_shape(window))?
        .intersect(&view.supervoxels.shape.bounds())
        .unwrap();
    let scores = score_supervoxels(&soft, &view, &central);
    for (sv, score) in &scores {
        println!("  supervoxel {sv}: mean mask value {score:.4}");
    }

    let decision = decide(&scores, 0.1, 0.9)?;
    if decision.abstain {
        println!("decision: abstain (some score fell inside [0.1, 0.9])");
    } else {
        println!(
            "decision: merge {:?}, cut {:?}",
            decision.merge, decision.cut
        );
    }
    Ok(())
}

//! Compute windowed error maps for a corrupted proposal.
//!
//! A voxel is error-free when the proposal restricted to the window around it
//! matches some true object's restriction; otherwise it is flagged. The
//! combined map unions the per-object maps over the foreground.
//!
//! Run with: cargo run --example detect_errors

use segfix::{
    binarize, combined_error_map, generate_gt, inject_errors, oracle_error_map,
    propose_mutations, ErrorWindowSpec, Shape3, SynthConfig, WindowMode,
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

    // Per-object map for one proposal segment.
    let label = proposal.data().iter().copied().find(|&v| v != 0).unwrap();
    let mask = proposal.object_mask(label)?;
    let per_object = oracle_error_map(&mask, &gt, &spec)?;
    println!(
        "segment {label}: {} erroneous window centers",
        binarize(&per_object, 0.25)?.count_nonzero()
    );

    // Combined map over all segments, then binarized at 0.25.
    let combined = binarize(&combined_error_map(&proposal, &gt, &spec)?, 0.25)?;
    println!(
        "combined map: {} white voxels, coverage {:.4}",
        combined.count_nonzero(),
        combined.coverage()
    );

    // Widening the window grows each error's footprint.
    let wide = ErrorWindowSpec::new(Shape3::new(15, 15, 5)?, WindowMode::Clipped)?;
    let wide_map = binarize(&combined_error_map(&proposal, &gt, &wide)?, 0.25)?;
    println!(
        "15x15x5 window: {} white voxels (wider windows see each error sooner)",
        wide_map.count_nonzero()
    );
    Ok(())
}

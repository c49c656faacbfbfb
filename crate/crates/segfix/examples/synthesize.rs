//! Generate a synthetic scene: a ground-truth label volume, a supervoxel
//! over-segmentation, and a corrupted proposal graph with known merge and
//! split errors.
//!
//! Run with: cargo run --example synthesize

use segfix::{
    contingency, generate_gt, inject_errors, propose_mutations, vi_scores, Mutation, Shape3,
    SynthConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SynthConfig {
        shape: Shape3::new(64, 64, 16)?,
        num_objects: 16,
        cell: [16, 16, 16],
        gap: 2,
        // Larger than any cell interior, so objects fill their cells and
        // neighbors sit exactly `gap` voxels apart.
        min_thickness: 99,
        tube_fraction: 0.0,
        sv_block: [5, 5, 4],
        seed: 7,
    };

    let (gt, supervoxels) = generate_gt(&config)?;
    let foreground = gt.data().iter().filter(|&&v| v != 0).count();
    println!(
        "ground truth: {} objects, {}/{} voxels foreground",
        config.num_objects,
        foreground,
        gt.shape.len()
    );

    let sv_count = {
        let mut ids: Vec<u32> = supervoxels.data().iter().copied().filter(|&v| v != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    };
    println!("supervoxels: {sv_count} atoms (every object is a union of them)");

    // Corrupt the perfect graph with 3 merges and 3 splits.
    let mutations = propose_mutations(&gt, &supervoxels, 3, 3, config.seed)?;
    for m in &mutations {
        match m {
            Mutation::Merge { a, b } => println!("  inject merge of objects {a} and {b}"),
            Mutation::Split { object, side_a, side_b } => println!(
                "  inject split of object {object} into {} + {} supervoxels",
                side_a.len(),
                side_b.len()
            ),
        }
    }
    let view = inject_errors(&gt, &supervoxels, &mutations)?;
    println!(
        "proposal graph: {} vertices, {} edges, {} segments",
        view.graph.vertices().len(),
        view.graph.edges().len(),
        view.graph.num_components()
    );

    let proposal = view.render_labels();
    let vi = vi_scores(&contingency(&gt, &proposal, false)?)?;
    println!(
        "corrupted proposal VI: split {:.4} nats, merge {:.4} nats",
        vi.vi_split, vi.vi_merge
    );
    Ok(())
}

//! Work with the supervoxel graph directly: build it, render segments, apply
//! a merge/cut decision atomically, and round-trip volumes and graphs through
//! their on-disk formats.
//!
//! Run with: cargo run --example graph_edits

use std::collections::BTreeSet;

use segfix::pipeline::sidecar_path;
use segfix::{
    build_graph, generate_gt, read_volume, write_volume, SegGraph, SegmentationView, Shape3,
    SynthConfig, Volume,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SynthConfig {
        shape: Shape3::new(32, 32, 8)?,
        num_objects: 4,
        cell: [16, 16, 8],
        gap: 2,
        min_thickness: 99,
        tube_fraction: 0.0,
        sv_block: [5, 5, 3],
        seed: 1,
    };
    let (_gt, supervoxels) = generate_gt(&config)?;

    // An edgeless graph renders every supervoxel as its own segment.
    let graph = build_graph(&supervoxels, &[])?;
    println!(
        "{} supervoxels, {} segments with no edges",
        graph.vertices().len(),
        graph.num_components()
    );

    // Merge the three smallest ids into one segment, then cut one back out.
    // apply_decision inserts the clique and removes crossing edges in one
    // component refresh.
    let ids: Vec<u32> = graph.vertices().iter().copied().take(3).collect();
    let mut graph = graph;
    let merge: BTreeSet<u32> = ids.iter().copied().collect();
    let (added, _) = graph.apply_decision(&merge, &BTreeSet::new())?;
    println!("merged {ids:?}: +{added} edges, {} segments", graph.num_components());

    let keep: BTreeSet<u32> = ids[..2].iter().copied().collect();
    let cut: BTreeSet<u32> = ids[2..].iter().copied().collect();
    let (_, removed) = graph.apply_decision(&keep, &cut)?;
    println!("cut {:?} back out: -{removed} edges, {} segments", ids[2], graph.num_components());

    let view = SegmentationView::new(supervoxels, graph)?;
    let rendered = view.render_labels();
    println!(
        "rendered labels: {} distinct segments over foreground",
        rendered.labels().len()
    );

    // Volumes persist as raw little-endian arrays with a JSON sidecar; the
    // graph persists as JSON.
    let dir = tempfile::tempdir()?;
    let vol_path = dir.path().join("supervoxels.raw");
    write_volume(
        &Volume::Label(view.supervoxels.clone()),
        &vol_path,
        &sidecar_path(&vol_path),
    )?;
    let back = read_volume(&vol_path, &sidecar_path(&vol_path))?;
    match back {
        Volume::Label(v) => assert_eq!(v.data(), view.supervoxels.data()),
        Volume::Raw(_) => unreachable!(),
    }
    let graph_back = SegGraph::from_json(&view.graph.to_json())?;
    assert_eq!(graph_back.edges(), view.graph.edges());
    println!("volume and graph round-tripped through disk byte-for-byte");
    Ok(())
}

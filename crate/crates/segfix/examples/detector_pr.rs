//! Precision-recall of a noisy detector over sampled evaluation points.
//!
//! Candidate locations are drawn with inverse-occupancy weighting so small
//! objects are not drowned out, then filtered: a point whose large window
//! contains an error that the small window misses is ambiguous and dropped,
//! and same-object points closer than the spacing on every axis are thinned.
//! Each surviving point is labeled by the small window and judged by a
//! detector with calibrated false-positive and false-negative rates.
//!
//! Run with: cargo run --example detector_pr

use segfix::{
    binarize, combined_error_map, generate_gt, inject_errors, pr_curve, propose_mutations,
    select_eval_points, ErrorWindowSpec, EvalSpec, NoisyDetector, Shape3, SynthConfig,
    WindowMode,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SynthConfig {
        shape: Shape3::new(96, 96, 16)?,
        num_objects: 36,
        cell: [16, 16, 16],
        gap: 2,
        min_thickness: 99,
        tube_fraction: 0.0,
        sv_block: [5, 5, 4],
        seed: 21,
    };
    let (gt, supervoxels) = generate_gt(&config)?;
    let mutations = propose_mutations(&gt, &supervoxels, 8, 8, config.seed)?;
    let proposal = inject_errors(&gt, &supervoxels, &mutations)?.render_labels();

    let spec = ErrorWindowSpec::new(Shape3::new(7, 7, 3)?, WindowMode::Clipped)?;
    let map = binarize(&combined_error_map(&proposal, &gt, &spec)?, 0.25)?;

    let eval = EvalSpec {
        large: [21, 21, 5],
        small: [11, 11, 3],
        spacing: [4, 4, 2],
        candidates: 4096,
        sample_window: [33, 33, 9],
    };
    let points = select_eval_points(&proposal, &map, &eval, config.seed)?;
    let positives = points.iter().filter(|p| p.erroneous).count();
    println!("{} evaluation points, {} labeled erroneous", points.len(), positives);

    let detector = NoisyDetector::new(gt.clone(), spec, 0.01, 0.05, config.seed)?;
    let small = Shape3::new(eval.small[0] | 1, eval.small[1] | 1, eval.small[2] | 1)?;
    let mut scores = Vec::with_capacity(points.len());
    let mut labels = Vec::with_capacity(points.len());
    for p in &points {
        let flagged = detector.point_decision(&proposal, p.point, small)?;
        scores.push(if flagged { 1.0 } else { 0.0 });
        labels.push(p.erroneous);
    }

    for pt in pr_curve(&scores, &labels)? {
        println!(
            "threshold {:.2}: precision {:.4}, recall {:.4}",
            pt.threshold, pt.precision, pt.recall
        );
    }
    Ok(())
}

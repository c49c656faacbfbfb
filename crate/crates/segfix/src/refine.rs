//! Iterative refinement: pick error locations, build advice tasks, apply
//! confident decisions to the supervoxel graph, locally refresh the error
//! map, and stop once every error voxel has been covered `t` times.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corrector::{advice_mask, central_shape, decide, score_supervoxels, Corrector};
use crate::errormap::{binarize, Detector, ErrorMap, ErrorWindowSpec};
use crate::svgraph::{SegmentationView, SupervoxelId};
use crate::volume::{Box3, LabelVolume, Point3, RawVolume, Shape3};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("max_visits must be >= 1")]
    BadVisitLimit,
    #[error(transparent)]
    Detector(#[from] crate::errormap::ErrorMapError),
    #[error(transparent)]
    Corrector(#[from] crate::corrector::CorrectorError),
    #[error(transparent)]
    Graph(#[from] crate::svgraph::GraphError),
    #[error(transparent)]
    Volume(#[from] crate::volume::VolumeError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementConfig {
    /// Corrector window P_x x P_y x P_z (odd dims).
    pub corrector_shape: Shape3,
    pub error_window: ErrorWindowSpec,
    pub binarize_threshold: f64,
    pub lo: f64,
    pub hi: f64,
    /// Visit budget t: a location is retired once covered this many times.
    pub max_visits: u32,
    pub seed: u64,
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        if self.max_visits == 0 {
            return Err(RefineError::BadVisitLimit);
        }
        if self.lo >= self.hi {
            return Err(RefineError::Corrector(
                crate::corrector::CorrectorError::BadThresholds(self.lo, self.hi),
            ));
        }
        Ok(())
    }
}

/// Mutable loop state: segmentation view, rendered proposal, binarized error
/// map, and per-voxel visit counts.
pub struct RefinementState {
    view: SegmentationView,
    rendered: LabelVolume,
    error_map: ErrorMap,
    visits: Vec<u32>,
    steps: u64,
    sv_boxes: HashMap<SupervoxelId, Box3>,
    /// Scan cursor for `next_location`; voxels below it are known ineligible
    /// until an error-map update rewinds it.
    cursor: usize,
}

impl RefinementState {
    pub fn view(&self) -> &SegmentationView {
        &self.view
    }

    pub fn rendered(&self) -> &LabelVolume {
        &self.rendered
    }

    pub fn error_map(&self) -> &ErrorMap {
        &self.error_map
    }

    pub fn visits(&self, p: Point3) -> u32 {
        self.visits[self.view.supervoxels.shape.index_point(p)]
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn into_view(self) -> SegmentationView {
        self.view
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    Abstained,
    Exhausted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementReport {
    pub steps: u64,
    pub applied: u64,
    pub abstained: u64,
    pub edges_added: u64,
    pub edges_removed: u64,
    pub wall_ms: u64,
    pub termination: String,
}

fn supervoxel_boxes(volume: &LabelVolume) -> HashMap<SupervoxelId, Box3> {
    let mut boxes: HashMap<SupervoxelId, Box3> = HashMap::new();
    for p in volume.shape.iter() {
        let l = volume.get(p);
        if l == 0 {
            continue;
        }
        let cell = Box3 {
            min: p,
            max: [p[0] + 1, p[1] + 1, p[2] + 1],
        };
        boxes
            .entry(l)
            .and_modify(|b| *b = b.union(&cell))
            .or_insert(cell);
    }
    boxes
}

/// Compute the initial binarized combined error map and zeroed visit counts.
pub fn init_state(
    view: SegmentationView,
    detector: &dyn Detector,
    raw: Option<&RawVolume>,
    config: &RefinementConfig,
) -> Result<RefinementState, RefineError> {
    config.validate()?;
    let rendered = view.render_labels();
    let full = rendered.shape.bounds();
    let map = detector.error_map(&rendered, raw, &full)?;
    let error_map = binarize(&map, config.binarize_threshold)?;
    let visits = vec![0; rendered.shape.len()];
    let sv_boxes = supervoxel_boxes(&view.supervoxels);
    Ok(RefinementState {
        view,
        rendered,
        error_map,
        visits,
        steps: 0,
        sv_boxes,
        cursor: 0,
    })
}

// Deterministic lexicographic scan (z, then y, then x) for the next
// foreground error voxel still under the visit budget. Background voxels are
// skipped: a detector may flag them, but they admit no corrector task. The
// cursor makes repeated scans incremental; error-map updates rewind it.
fn next_location(state: &mut RefinementState, config: &RefinementConfig) -> Option<Point3> {
    let shape = state.view.supervoxels.shape;
    let [nx, ny, _] = shape.dims();
    for i in state.cursor..shape.len() {
        let p = [
            (i % nx) as i64,
            ((i / nx) % ny) as i64,
            (i / (nx * ny)) as i64,
        ];
        if state.visits[i] < config.max_visits
            && state.view.supervoxels.data()[i] != 0
            && state.error_map.in_domain(p)
            && state.error_map.get(p) > 0.0
        {
            state.cursor = i;
            return Some(p);
        }
    }
    state.cursor = shape.len();
    None
}

/// Recompute the error map wherever the detector's decision could have
/// changed: the union of the changed supervoxels' bounding boxes, dilated by
/// the error-window radius per axis.
fn update_error_map_local(
    state: &mut RefinementState,
    detector: &dyn Detector,
    raw: Option<&RawVolume>,
    config: &RefinementConfig,
    changed: &BTreeSet<SupervoxelId>,
) -> Result<(), RefineError> {
    let mut region: Option<Box3> = None;
    for sv in changed {
        if let Some(b) = state.sv_boxes.get(sv) {
            region = Some(match region {
                Some(r) => r.union(b),
                None => *b,
            });
        }
    }
    let Some(region) = region else {
        return Ok(());
    };
    let r = config.error_window.shape.radius();
    let region = region.dilate(r);
    let Some(region) = region.intersect(&state.rendered.shape.bounds()) else {
        return Ok(());
    };
    let map = detector.error_map(&state.rendered, raw, &region)?;
    let patch = binarize(&map, config.binarize_threshold)?;
    state.error_map.splat(&patch);
    // The patch may whiten voxels the scan already passed.
    let rewind = state.rendered.shape.index_point(region.min);
    state.cursor = state.cursor.min(rewind);
    Ok(())
}

fn bump_visits(state: &mut RefinementState, window: &Box3) {
    let shape = state.view.supervoxels.shape;
    for p in window.iter() {
        let i = shape.index_point(p);
        state.visits[i] = state.visits[i].saturating_add(1);
    }
}

/// One refinement step. Selects the next error location, runs the corrector
/// on its advice task, and applies the decision if confident.
pub fn step(
    state: &mut RefinementState,
    detector: &dyn Detector,
    corrector: &dyn Corrector,
    raw: Option<&RawVolume>,
    config: &RefinementConfig,
    tally: &mut RefinementReport,
) -> Result<StepOutcome, RefineError> {
    let Some(location) = next_location(state, config) else {
        return Ok(StepOutcome::Exhausted);
    };
    let task = advice_mask(
        &state.view,
        &state.error_map,
        raw,
        location,
        config.corrector_shape,
    )?;
    let soft = corrector.prune(&task)?;
    let central = Box3::window_at(location, central_shape(config.corrector_shape))?
        .intersect(&state.view.supervoxels.shape.bounds())
        .expect("central box intersects volume at an interior voxel");
    let scores = score_supervoxels(&soft, &state.view, &central);
    let decision = decide(&scores, config.lo, config.hi)?;

    state.steps += 1;
    tally.steps += 1;
    let outcome = if decision.abstain {
        tally.abstained += 1;
        StepOutcome::Abstained
    } else {
        let seeds: BTreeSet<SupervoxelId> =
            decision.merge.union(&decision.cut).copied().collect();
        let before = state.view.graph.component_members(&seeds)?;
        let (added, removed) = state
            .view
            .graph
            .apply_decision(&decision.merge, &decision.cut)?;
        tally.applied += 1;
        tally.edges_added += added as u64;
        tally.edges_removed += removed as u64;
        if added > 0 || removed > 0 {
            // Everything in a component touched by the decision, before or
            // after, may have changed segment membership.
            let after = state.view.graph.component_members(&seeds)?;
            let changed: BTreeSet<SupervoxelId> = before.union(&after).copied().collect();
            state.rendered = state.view.render_labels();
            update_error_map_local(state, detector, raw, config, &changed)?;
        }
        StepOutcome::Applied
    };
    bump_visits(state, &task.window);
    Ok(outcome)
}

/// Run steps until exhaustion and report totals.
pub fn run(
    state: &mut RefinementState,
    detector: &dyn Detector,
    corrector: &dyn Corrector,
    raw: Option<&RawVolume>,
    config: &RefinementConfig,
) -> Result<RefinementReport, RefineError> {
    let start = Instant::now();
    let mut report = RefinementReport {
        steps: 0,
        applied: 0,
        abstained: 0,
        edges_added: 0,
        edges_removed: 0,
        wall_ms: 0,
        termination: String::new(),
    };
    loop {
        match step(state, detector, corrector, raw, config, &mut report)? {
            StepOutcome::Exhausted => break,
            _ => continue,
        }
    }
    report.wall_ms = start.elapsed().as_millis() as u64;
    report.termination = if state.error_map.count_nonzero() == 0 {
        "error_map_clear".to_string()
    } else {
        "visit_budget".to_string()
    };
    Ok(report)
}

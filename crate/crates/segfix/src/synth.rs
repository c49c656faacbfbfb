//! Synthetic data: ground-truth volumes built from simple axis-aligned
//! geometry, supervoxel partitions, injected merge/split errors, and the
//! sampling procedures used to pick training and evaluation locations.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::errormap::ErrorMap;
use crate::svgraph::{build_graph, SegmentationView, SupervoxelId};
use crate::volume::{Box3, LabelVolume, Point3, Shape3, VoxelSize};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("cannot place {requested} objects; the grid holds {capacity}")]
    PlacementFailed { requested: usize, capacity: usize },
    #[error("mutation references unknown segment {0}")]
    UnknownSegment(u32),
    #[error("invalid mutation: {0}")]
    InvalidMutation(String),
    #[error("volume has no foreground to sample")]
    AllBackground,
    #[error(transparent)]
    Volume(#[from] crate::volume::VolumeError),
    #[error(transparent)]
    Graph(#[from] crate::svgraph::GraphError),
}

/// Configuration for `generate_gt`. Objects are placed one per grid cell of
/// size `cell`, inset by `gap` voxels from the high side of the cell so
/// neighbors never touch. Each object is an axis-aligned box; with
/// probability `tube_fraction` one random axis is stretched to the full
/// usable extent of the cell. Objects are partitioned into supervoxel blocks
/// of size `sv_block`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub shape: Shape3,
    pub num_objects: usize,
    pub cell: [usize; 3],
    pub gap: usize,
    pub min_thickness: usize,
    pub tube_fraction: f64,
    pub sv_block: [usize; 3],
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.num_objects == 0 {
            return Err(SynthError::InvalidConfig("num_objects must be >= 1".into()));
        }
        if self.min_thickness == 0 {
            return Err(SynthError::InvalidConfig("min_thickness must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.tube_fraction) {
            return Err(SynthError::InvalidConfig("tube_fraction must be in [0,1]".into()));
        }
        for d in 0..3 {
            if self.cell[d] == 0 || self.sv_block[d] == 0 {
                return Err(SynthError::InvalidConfig("cell and sv_block must be >= 1".into()));
            }
            // min_thickness clamps to the usable interior, so only the gap
            // can make a cell unusable.
            if self.cell[d] <= self.gap {
                return Err(SynthError::InvalidConfig(format!(
                    "cell axis {d} ({}) leaves no room after gap {}",
                    self.cell[d], self.gap
                )));
            }
        }
        Ok(())
    }
}

/// Ground truth plus a supervoxel partition of it. Every supervoxel lies
/// inside exactly one object, and objects are unions of supervoxels.
pub fn generate_gt(config: &SynthConfig) -> Result<(LabelVolume, LabelVolume), SynthError> {
    config.validate()?;
    let dims = config.shape.dims();
    let grid: Vec<usize> = (0..3).map(|d| dims[d] / config.cell[d]).collect();
    let capacity = grid.iter().product::<usize>();
    if capacity < config.num_objects {
        return Err(SynthError::PlacementFailed {
            requested: config.num_objects,
            capacity,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut gt = LabelVolume::zeros(config.shape, VoxelSize::default());
    let mut sv = LabelVolume::zeros(config.shape, VoxelSize::default());
    let mut next_sv: u32 = 1;
    for k in 0..config.num_objects {
        let cell_idx = [
            k % grid[0],
            (k / grid[0]) % grid[1],
            k / (grid[0] * grid[1]),
        ];
        // Usable interior of the cell: the gap is carved off the high side.
        let usable: Vec<usize> = (0..3)
            .map(|d| config.cell[d] - config.gap)
            .collect();
        let tube_axis = if rng.gen_bool(config.tube_fraction) {
            Some(rng.gen_range(0..3usize))
        } else {
            None
        };
        let mut min = [0i64; 3];
        let mut max = [0i64; 3];
        for d in 0..3 {
            let lo = config.min_thickness.min(usable[d]);
            let ext = if tube_axis == Some(d) {
                usable[d]
            } else {
                rng.gen_range(lo..=usable[d])
            };
            let off = rng.gen_range(0..=(usable[d] - ext));
            let base = (cell_idx[d] * config.cell[d] + off) as i64;
            min[d] = base;
            max[d] = base + ext as i64;
        }
        let obj = Box3::new(min, max).expect("nonempty object box");
        let label = (k + 1) as u32;
        for p in obj.iter() {
            gt.set(p, label);
        }
        // Supervoxel blocks tile the object box from its min corner.
        let ext = obj.extents();
        let blocks: Vec<usize> = (0..3)
            .map(|d| ext[d].div_ceil(config.sv_block[d]))
            .collect();
        for bz in 0..blocks[2] {
            for by in 0..blocks[1] {
                for bx in 0..blocks[0] {
                    let b = [bx, by, bz];
                    let bmin: Vec<i64> = (0..3)
                        .map(|d| obj.min[d] + (b[d] * config.sv_block[d]) as i64)
                        .collect();
                    let bmax: Vec<i64> = (0..3)
                        .map(|d| (bmin[d] + config.sv_block[d] as i64).min(obj.max[d]))
                        .collect();
                    let block =
                        Box3::new([bmin[0], bmin[1], bmin[2]], [bmax[0], bmax[1], bmax[2]])
                            .expect("nonempty block");
                    for p in block.iter() {
                        sv.set(p, next_sv);
                    }
                    next_sv += 1;
                }
            }
        }
    }
    Ok((gt, sv))
}

/// A segmentation error to inject: merge two objects, or split one object
/// along a supervoxel bipartition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mutation {
    Merge {
        a: u32,
        b: u32,
    },
    Split {
        object: u32,
        side_a: BTreeSet<SupervoxelId>,
        side_b: BTreeSet<SupervoxelId>,
    },
}

struct SvIndex {
    /// Supervoxels of each GT object.
    members: BTreeMap<u32, BTreeSet<SupervoxelId>>,
    /// Voxel-coordinate centroid of each supervoxel.
    centroid: HashMap<SupervoxelId, [f64; 3]>,
}

fn index_supervoxels(gt: &LabelVolume, supervoxels: &LabelVolume) -> Result<SvIndex, SynthError> {
    if gt.shape != supervoxels.shape {
        return Err(SynthError::InvalidConfig(
            "gt and supervoxel volumes have different shapes".into(),
        ));
    }
    let mut owner = HashMap::new();
    let mut members: BTreeMap<u32, BTreeSet<SupervoxelId>> = BTreeMap::new();
    let mut sums: HashMap<SupervoxelId, ([f64; 3], f64)> = HashMap::new();
    for p in gt.shape.iter() {
        let s = supervoxels.get(p);
        let g = gt.get(p);
        if (s == 0) != (g == 0) {
            return Err(SynthError::InvalidConfig(
                "supervoxel and gt foregrounds disagree".into(),
            ));
        }
        if s == 0 {
            continue;
        }
        if *owner.entry(s).or_insert(g) != g {
            return Err(SynthError::InvalidConfig(format!(
                "supervoxel {s} spans multiple gt objects"
            )));
        }
        members.entry(g).or_default().insert(s);
        let e = sums.entry(s).or_insert(([0.0; 3], 0.0));
        for d in 0..3 {
            e.0[d] += p[d] as f64;
        }
        e.1 += 1.0;
    }
    let centroid = sums
        .into_iter()
        .map(|(s, (sum, n))| (s, [sum[0] / n, sum[1] / n, sum[2] / n]))
        .collect();
    Ok(SvIndex { members, centroid })
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|d| (a[d] - b[d]).powi(2)).sum()
}

/// Closest pair of supervoxels, one from each set, by centroid distance.
fn closest_pair(
    idx: &SvIndex,
    a: &BTreeSet<SupervoxelId>,
    b: &BTreeSet<SupervoxelId>,
) -> (SupervoxelId, SupervoxelId) {
    let mut best = (f64::INFINITY, 0, 0);
    for &sa in a {
        for &sb in b {
            let d = sq_dist(&idx.centroid[&sa], &idx.centroid[&sb]);
            if d < best.0 {
                best = (d, sa, sb);
            }
        }
    }
    (best.1, best.2)
}

/// Apply mutations to the intact segmentation. The base graph connects
/// face-adjacent supervoxels of the same object; each merge adds one edge
/// between the closest supervoxels of the two objects, each split removes
/// all edges crossing its bipartition.
pub fn inject_errors(
    gt: &LabelVolume,
    supervoxels: &LabelVolume,
    mutations: &[Mutation],
) -> Result<SegmentationView, SynthError> {
    let idx = index_supervoxels(gt, supervoxels)?;
    let mut edges: BTreeSet<(SupervoxelId, SupervoxelId)> = BTreeSet::new();
    for p in gt.shape.iter() {
        let s = supervoxels.get(p);
        if s == 0 {
            continue;
        }
        for d in 0..3 {
            let mut q = p;
            q[d] += 1;
            if !gt.shape.contains(q) {
                continue;
            }
            let t = supervoxels.get(q);
            if t != 0 && t != s && gt.get(p) == gt.get(q) {
                edges.insert((s.min(t), s.max(t)));
            }
        }
    }
    for m in mutations {
        match m {
            Mutation::Merge { a, b } => {
                if a == b {
                    return Err(SynthError::InvalidMutation("merge of a segment with itself".into()));
                }
                let sa = idx.members.get(a).ok_or(SynthError::UnknownSegment(*a))?;
                let sb = idx.members.get(b).ok_or(SynthError::UnknownSegment(*b))?;
                let (x, y) = closest_pair(&idx, sa, sb);
                edges.insert((x.min(y), x.max(y)));
            }
            Mutation::Split {
                object,
                side_a,
                side_b,
            } => {
                let all = idx
                    .members
                    .get(object)
                    .ok_or(SynthError::UnknownSegment(*object))?;
                if side_a.is_empty() || side_b.is_empty() {
                    return Err(SynthError::InvalidMutation("split side is empty".into()));
                }
                if !side_a.is_disjoint(side_b) {
                    return Err(SynthError::InvalidMutation("split sides overlap".into()));
                }
                let union: BTreeSet<SupervoxelId> = side_a.union(side_b).copied().collect();
                if &union != all {
                    return Err(SynthError::InvalidMutation(
                        "split sides do not cover the object".into(),
                    ));
                }
                edges.retain(|&(x, y)| {
                    !((side_a.contains(&x) && side_b.contains(&y))
                        || (side_b.contains(&x) && side_a.contains(&y)))
                });
            }
        }
    }
    let edge_list: Vec<_> = edges.into_iter().collect();
    let graph = build_graph(supervoxels, &edge_list)?;
    Ok(SegmentationView::new(supervoxels.clone(), graph)?)
}

/// Random mutation list: `n_merges` distinct object pairs taken in order of
/// increasing centroid distance (so merges stay spatially local), and
/// `n_splits` median bipartitions of multi-supervoxel objects along random
/// axes.
pub fn propose_mutations(
    gt: &LabelVolume,
    supervoxels: &LabelVolume,
    n_merges: usize,
    n_splits: usize,
    seed: u64,
) -> Result<Vec<Mutation>, SynthError> {
    let idx = index_supervoxels(gt, supervoxels)?;
    let objects: Vec<u32> = idx.members.keys().copied().collect();
    let obj_centroid: HashMap<u32, [f64; 3]> = idx
        .members
        .iter()
        .map(|(&o, svs)| {
            let mut c = [0.0; 3];
            for s in svs {
                for d in 0..3 {
                    c[d] += idx.centroid[s][d];
                }
            }
            for v in &mut c {
                *v /= svs.len() as f64;
            }
            (o, c)
        })
        .collect();

    let mut pairs: Vec<(u32, u32)> = Vec::new();
    for i in 0..objects.len() {
        for j in (i + 1)..objects.len() {
            pairs.push((objects[i], objects[j]));
        }
    }
    if pairs.len() < n_merges {
        return Err(SynthError::InvalidMutation(format!(
            "requested {n_merges} merges but only {} object pairs exist",
            pairs.len()
        )));
    }
    pairs.sort_by(|a, b| {
        let da = sq_dist(&obj_centroid[&a.0], &obj_centroid[&a.1]);
        let db = sq_dist(&obj_centroid[&b.0], &obj_centroid[&b.1]);
        da.partial_cmp(&db).unwrap().then(a.cmp(b))
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Mutation> = pairs[..n_merges]
        .iter()
        .map(|&(a, b)| Mutation::Merge { a, b })
        .collect();

    let splittable: Vec<u32> = objects
        .iter()
        .copied()
        .filter(|o| idx.members[o].len() >= 2)
        .collect();
    if splittable.is_empty() && n_splits > 0 {
        return Err(SynthError::InvalidMutation(
            "no object has enough supervoxels to split".into(),
        ));
    }
    for k in 0..n_splits {
        let object = splittable[k % splittable.len()];
        let svs = &idx.members[&object];
        // Prefer an axis along which the centroids actually spread.
        let mut order: Vec<SupervoxelId> = svs.iter().copied().collect();
        let mut axis = rng.gen_range(0..3usize);
        for probe in 0..3 {
            let d = (axis + probe) % 3;
            let coords: BTreeSet<i64> = order
                .iter()
                .map(|s| (idx.centroid[s][d] * 16.0).round() as i64)
                .collect();
            if coords.len() >= 2 {
                axis = d;
                break;
            }
        }
        order.sort_by(|a, b| {
            idx.centroid[a][axis]
                .partial_cmp(&idx.centroid[b][axis])
                .unwrap()
                .then(a.cmp(b))
        });
        let cut = (order.len() / 2).max(1);
        out.push(Mutation::Split {
            object,
            side_a: order[..cut].iter().copied().collect(),
            side_b: order[cut..].iter().copied().collect(),
        });
    }
    Ok(out)
}

/// Per-voxel sampling weights: 1 / (fraction of the clipped window occupied
/// by the voxel's object), 0 on background.
#[derive(Debug, Clone)]
pub struct SamplingWeights {
    pub shape: Shape3,
    pub window: [usize; 3],
    weights: Vec<f64>,
}

impl SamplingWeights {
    pub fn get(&self, p: Point3) -> f64 {
        self.weights[self.shape.index_point(p)]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Inclusive-min, exclusive-max window of `dims` voxels around `center`,
/// clipped to the volume. Even extents hang one voxel further on the high
/// side.
fn clipped_window(shape: Shape3, center: Point3, dims: [usize; 3]) -> Box3 {
    let mut min = [0i64; 3];
    let mut max = [0i64; 3];
    let bounds = shape.dims();
    for d in 0..3 {
        let lo = ((dims[d] - 1) / 2) as i64;
        let hi = (dims[d] / 2) as i64;
        min[d] = (center[d] - lo).max(0);
        max[d] = (center[d] + hi + 1).min(bounds[d] as i64);
    }
    Box3::new(min, max).expect("center inside volume")
}

/// Summed-area table of the indicator of one label; query gives the count of
/// that label inside any box in O(1).
struct Sat {
    nx: usize,
    ny: usize,
    nz: usize,
    acc: Vec<u64>,
}

impl Sat {
    fn build(seg: &LabelVolume, label: u32) -> Sat {
        let [nx, ny, nz] = seg.shape.dims();
        let sx = nx + 1;
        let sy = ny + 1;
        let mut acc = vec![0u64; sx * sy * (nz + 1)];
        let at = |x: usize, y: usize, z: usize| (z * sy + y) * sx + x;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let v = u64::from(seg.get([x as i64, y as i64, z as i64]) == label);
                    acc[at(x + 1, y + 1, z + 1)] = v
                        + acc[at(x, y + 1, z + 1)]
                        + acc[at(x + 1, y, z + 1)]
                        + acc[at(x + 1, y + 1, z)]
                        - acc[at(x, y, z + 1)]
                        - acc[at(x, y + 1, z)]
                        - acc[at(x + 1, y, z)]
                        + acc[at(x, y, z)];
                }
            }
        }
        Sat { nx: sx, ny: sy, nz: nz + 1, acc }
    }

    fn count(&self, b: &Box3) -> u64 {
        let _ = self.nz;
        let at = |p: [i64; 3]| ((p[2] as usize) * self.ny + p[1] as usize) * self.nx + p[0] as usize;
        let (lo, hi) = (b.min, b.max);
        self.acc[at([hi[0], hi[1], hi[2]])]
            .wrapping_sub(self.acc[at([lo[0], hi[1], hi[2]])])
            .wrapping_sub(self.acc[at([hi[0], lo[1], hi[2]])])
            .wrapping_sub(self.acc[at([hi[0], hi[1], lo[2]])])
            .wrapping_add(self.acc[at([lo[0], lo[1], hi[2]])])
            .wrapping_add(self.acc[at([lo[0], hi[1], lo[2]])])
            .wrapping_add(self.acc[at([hi[0], lo[1], lo[2]])])
            .wrapping_sub(self.acc[at([lo[0], lo[1], lo[2]])])
    }
}

/// Inverse-occupancy weights over a label volume.
pub fn occupancy_weights(
    seg: &LabelVolume,
    window: [usize; 3],
) -> Result<SamplingWeights, SynthError> {
    if window.iter().any(|&w| w == 0) {
        return Err(SynthError::InvalidConfig("window extents must be >= 1".into()));
    }
    let mut weights = vec![0.0f64; seg.shape.len()];
    for label in seg.labels() {
        let sat = Sat::build(seg, label);
        for p in seg.shape.iter() {
            if seg.get(p) != label {
                continue;
            }
            let b = clipped_window(seg.shape, p, window);
            let occupied = sat.count(&b) as f64;
            let fraction = occupied / b.len() as f64;
            weights[seg.shape.index_point(p)] = 1.0 / fraction;
        }
    }
    Ok(SamplingWeights {
        shape: seg.shape,
        window,
        weights,
    })
}

/// `n` i.i.d. draws from the normalized inverse-occupancy weight field.
pub fn sample_locations(
    seg: &LabelVolume,
    n: usize,
    window: [usize; 3],
    seed: u64,
) -> Result<Vec<Point3>, SynthError> {
    let w = occupancy_weights(seg, window)?;
    sample_from_weights(&w, n, seed)
}

pub fn sample_from_weights(
    w: &SamplingWeights,
    n: usize,
    seed: u64,
) -> Result<Vec<Point3>, SynthError> {
    let mut prefix = Vec::with_capacity(w.weights.len());
    let mut total = 0.0f64;
    for &x in &w.weights {
        total += x;
        prefix.push(total);
    }
    if total <= 0.0 {
        return Err(SynthError::AllBackground);
    }
    let [nx, ny, _] = w.shape.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.gen::<f64>() * total;
        let i = prefix.partition_point(|&c| c <= u).min(prefix.len() - 1);
        let z = i / (nx * ny);
        let y = (i / nx) % ny;
        let x = i % nx;
        out.push([x as i64, y as i64, z as i64]);
    }
    Ok(out)
}

/// An evaluation location with its detector target: true means the proposal
/// has an error within the small window around the point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub point: Point3,
    pub erroneous: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSpec {
    /// Window whose errors disqualify a point unless also in the small one.
    pub large: [usize; 3],
    /// Window that defines the point's label.
    pub small: [usize; 3],
    /// Minimum per-axis separation of same-object points (at least one axis
    /// must meet it).
    pub spacing: [i64; 3],
    /// Candidate draws before filtering.
    pub candidates: usize,
    /// Window for the inverse-occupancy candidate sampling.
    pub sample_window: [usize; 3],
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            large: [80, 80, 8],
            small: [40, 40, 4],
            spacing: [80, 80, 8],
            candidates: 4096,
            sample_window: [128, 128, 16],
        }
    }
}

/// Evaluation points over a proposal: candidates come from inverse-occupancy
/// sampling of the rendered proposal; a candidate is dropped when the
/// binarized error map is white somewhere in its large window but nowhere in
/// its small window, and points sharing a proposal object must be separated
/// by the spacing along at least one axis.
pub fn select_eval_points(
    rendered: &LabelVolume,
    error_map: &ErrorMap,
    spec: &EvalSpec,
    seed: u64,
) -> Result<Vec<EvalPoint>, SynthError> {
    let candidates = sample_locations(rendered, spec.candidates, spec.sample_window, seed)?;
    let white = |b: &Box3| b.iter().any(|p| error_map.get(p) > 0.0);
    let mut kept: Vec<EvalPoint> = Vec::new();
    let mut by_object: HashMap<u32, Vec<Point3>> = HashMap::new();
    for c in candidates {
        let in_large = white(&clipped_window(rendered.shape, c, spec.large));
        let in_small = white(&clipped_window(rendered.shape, c, spec.small));
        if in_large && !in_small {
            continue;
        }
        let object = rendered.get(c);
        let taken = by_object.entry(object).or_default();
        let ok = taken.iter().all(|q| {
            (0..3).any(|d| (q[d] - c[d]).abs() >= spec.spacing[d])
        });
        if !ok {
            continue;
        }
        taken.push(c);
        kept.push(EvalPoint {
            point: c,
            erroneous: in_small,
        });
    }
    Ok(kept)
}

//! Object mask pruning: advice-mask construction, the vector-field to
//! soft-mask transform, per-supervoxel scoring, and confident decisions.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::errormap::{unit_hash, ErrorMap};
use crate::svgraph::{SegmentationView, SupervoxelId};
use crate::volume::{Box3, LabelVolume, ObjectMask, Point3, RawVolume, Shape3};

/// Soft-mask value the oracle assigns outside the target object. Keeps the
/// output inside (0, 1] while staying decisively below the low threshold.
pub const ORACLE_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CorrectorError {
    #[error("central voxel {0:?} is background")]
    BackgroundCenter(Point3),
    #[error("anchor has dimension {got}, field has {expected}")]
    DimMismatch { got: usize, expected: usize },
    #[error("thresholds must satisfy lo < hi, got lo={0} hi={1}")]
    BadThresholds(f64, f64),
    #[error("noise rates must lie in [0, 1), got fp={0} fn={1}")]
    BadRates(f64, f64),
    #[error("probability draw {0} outside [0, 1]")]
    BadDraw(f64),
    #[error("window at {center:?} does not intersect the volume")]
    EmptyWindow { center: Point3 },
    #[error(transparent)]
    Volume(#[from] crate::volume::VolumeError),
}

/// One window's error-correction input: a candidate mask that is a union of
/// whole supervoxels, anchored at a central voxel.
#[derive(Debug, Clone)]
pub struct PruningTask {
    /// Window box in global voxel coordinates.
    pub window: Box3,
    /// Candidate mask over the window (local layout, window extents).
    pub candidate: ObjectMask,
    /// Central voxel in global coordinates; always inside `window`.
    pub center: Point3,
    /// Optional raw image crop over the window. Carried through for trained
    /// backends; the oracle backends ignore it.
    pub raw: Option<RawVolume>,
    /// Supervoxel labels cropped to the window.
    pub supervoxels: LabelVolume,
}

impl PruningTask {
    #[inline]
    fn local(&self, p: Point3) -> Point3 {
        [
            p[0] - self.window.min[0],
            p[1] - self.window.min[1],
            p[2] - self.window.min[2],
        ]
    }

    pub fn candidate_at(&self, p: Point3) -> bool {
        self.candidate.get(self.local(p))
    }

    pub fn supervoxel_at(&self, p: Point3) -> SupervoxelId {
        self.supervoxels.get(self.local(p))
    }
}

/// k-dimensional vector per voxel over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub window: Box3,
    pub k: usize,
    data: Vec<f64>,
}

impl VectorField {
    pub fn new(window: Box3, k: usize, data: Vec<f64>) -> Result<Self, CorrectorError> {
        let expected = window.len() * k;
        if data.len() != expected {
            return Err(CorrectorError::DimMismatch {
                got: data.len(),
                expected,
            });
        }
        Ok(VectorField { window, k, data })
    }

    pub fn zeros(window: Box3, k: usize) -> Self {
        let n = window.len() * k;
        VectorField {
            window,
            k,
            data: vec![0.0; n],
        }
    }

    #[inline]
    pub fn get(&self, p: Point3) -> &[f64] {
        let i = self.window.local_index(p) * self.k;
        &self.data[i..i + self.k]
    }

    pub fn set(&mut self, p: Point3, v: &[f64]) {
        assert_eq!(v.len(), self.k);
        let i = self.window.local_index(p) * self.k;
        self.data[i..i + self.k].copy_from_slice(v);
    }
}

/// Scalar mask in (0, 1] over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    pub window: Box3,
    data: Vec<f64>,
}

impl SoftMask {
    pub fn constant(window: Box3, v: f64) -> Self {
        assert!(v > 0.0 && v <= 1.0);
        let n = window.len();
        SoftMask {
            window,
            data: vec![v; n],
        }
    }

    #[inline]
    pub fn get(&self, p: Point3) -> f64 {
        self.data[self.window.local_index(p)]
    }

    #[inline]
    pub fn set(&mut self, p: Point3, v: f64) {
        debug_assert!(v > 0.0 && v <= 1.0);
        let i = self.window.local_index(p);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Outcome of thresholding per-supervoxel scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupervoxelDecision {
    pub merge: BTreeSet<SupervoxelId>,
    pub cut: BTreeSet<SupervoxelId>,
    pub abstain: bool,
}

/// A pluggable error corrector. Deterministic per seed.
pub trait Corrector {
    fn prune(&self, task: &PruningTask) -> Result<SoftMask, CorrectorError>;
}

/// Ground-truth corrector: 1 on the GT object containing the central voxel
/// (clipped to the candidate mask), epsilon elsewhere.
pub struct OracleCorrector {
    pub gt: LabelVolume,
}

impl OracleCorrector {
    pub fn new(gt: LabelVolume) -> Self {
        OracleCorrector { gt }
    }
}

impl Corrector for OracleCorrector {
    fn prune(&self, task: &PruningTask) -> Result<SoftMask, CorrectorError> {
        let target = self.gt.get(task.center);
        if target == 0 {
            return Err(CorrectorError::BackgroundCenter(task.center));
        }
        let mut out = SoftMask::constant(task.window, ORACLE_EPSILON);
        for p in task.window.iter() {
            if self.gt.get(p) == target && task.candidate_at(p) {
                out.set(p, 1.0);
            }
        }
        Ok(out)
    }
}

/// Oracle corrector with per-voxel output noise, deterministic per seed.
pub struct NoisyCorrector {
    oracle: OracleCorrector,
    fp_rate: f64,
    fn_rate: f64,
    seed: u64,
}

impl NoisyCorrector {
    pub fn new(
        gt: LabelVolume,
        fp_rate: f64,
        fn_rate: f64,
        seed: u64,
    ) -> Result<Self, CorrectorError> {
        if !(0.0..1.0).contains(&fp_rate) || !(0.0..1.0).contains(&fn_rate) {
            return Err(CorrectorError::BadRates(fp_rate, fn_rate));
        }
        Ok(NoisyCorrector {
            oracle: OracleCorrector::new(gt),
            fp_rate,
            fn_rate,
            seed,
        })
    }
}

impl Corrector for NoisyCorrector {
    fn prune(&self, task: &PruningTask) -> Result<SoftMask, CorrectorError> {
        let mut out = self.oracle.prune(task)?;
        for p in task.window.iter() {
            let u = unit_hash(self.seed, 0x636f7272, p);
            let v = out.get(p);
            if v > 0.5 {
                if u < self.fn_rate {
                    out.set(p, ORACLE_EPSILON);
                }
            } else if u < self.fp_rate {
                out.set(p, 1.0);
            }
        }
        Ok(out)
    }
}

/// Corrector that is never confident: constant 0.5 output, so every
/// supervoxel score lands inside the confidence band.
pub struct AbstainCorrector;

impl Corrector for AbstainCorrector {
    fn prune(&self, task: &PruningTask) -> Result<SoftMask, CorrectorError> {
        Ok(SoftMask::constant(task.window, 0.5))
    }
}

/// Build the advice-mask pruning task at `center`: the candidate is the union
/// of the central segment with every segment owning a white error voxel
/// inside the window, as whole supervoxels clipped to the window.
pub fn advice_mask(
    view: &SegmentationView,
    binarized: &ErrorMap,
    raw: Option<&RawVolume>,
    center: Point3,
    shape: Shape3,
) -> Result<PruningTask, CorrectorError> {
    let central_sv = view.supervoxels.get(center);
    if central_sv == 0 {
        return Err(CorrectorError::BackgroundCenter(center));
    }
    let window = Box3::window_at(center, shape)?
        .intersect(&view.supervoxels.shape.bounds())
        .ok_or(CorrectorError::EmptyWindow { center })?;
    let central_comp = view.graph.component_of(central_sv).expect("view consistency");
    let mut selected: BTreeSet<SupervoxelId> = [central_comp].into();
    for p in window.iter() {
        if binarized.region.contains(p) && binarized.get(p) > 0.0 {
            let sv = view.supervoxels.get(p);
            if sv != 0 {
                selected.insert(view.graph.component_of(sv).expect("view consistency"));
            }
        }
    }
    let e = window.extents();
    let wshape = Shape3::new(e[0], e[1], e[2])?;
    let mut candidate = ObjectMask::zeros(wshape);
    for p in window.iter() {
        let sv = view.supervoxels.get(p);
        if sv != 0 {
            let comp = view.graph.component_of(sv).expect("view consistency");
            if selected.contains(&comp) {
                candidate.set(
                    [
                        p[0] - window.min[0],
                        p[1] - window.min[1],
                        p[2] - window.min[2],
                    ],
                    true,
                );
            }
        }
    }
    Ok(PruningTask {
        window,
        candidate,
        center,
        raw: raw.map(|r| r.crop(&window)),
        supervoxels: view.supervoxels.crop(&window),
    })
}

/// Pointwise `exp(-||v - anchor||^2)`.
pub fn mask_from_vector_field(v: &VectorField, anchor: &[f64]) -> Result<SoftMask, CorrectorError> {
    if anchor.len() != v.k {
        return Err(CorrectorError::DimMismatch {
            got: anchor.len(),
            expected: v.k,
        });
    }
    let mut out = SoftMask::constant(v.window, 1.0);
    for p in v.window.iter() {
        let d2: f64 = v
            .get(p)
            .iter()
            .zip(anchor)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        out.set(p, (-d2).exp());
    }
    Ok(out)
}

/// Componentwise mean of `v` over the supervoxel containing `central`,
/// restricted to the field's window.
pub fn anchor_vector(
    v: &VectorField,
    supervoxels: &LabelVolume,
    central: Point3,
) -> Result<Vec<f64>, CorrectorError> {
    let label = supervoxels.get(central);
    if label == 0 {
        return Err(CorrectorError::BackgroundCenter(central));
    }
    let mut sum = vec![0.0; v.k];
    let mut n = 0usize;
    for p in v.window.iter() {
        if supervoxels.shape.contains(p) && supervoxels.get(p) == label {
            for (s, x) in sum.iter_mut().zip(v.get(p)) {
                *s += x;
            }
            n += 1;
        }
    }
    for s in &mut sum {
        *s /= n as f64;
    }
    Ok(sum)
}

/// The central sub-window shape: each dimension is halved, then rounded up to
/// the nearest odd value so the box stays centered.
pub fn central_shape(window: Shape3) -> Shape3 {
    fn half_odd(d: usize) -> usize {
        let h = (d / 2).max(1);
        if h % 2 == 0 {
            h + 1
        } else {
            h
        }
    }
    Shape3 {
        x: half_odd(window.x),
        y: half_odd(window.y),
        z: half_odd(window.z),
    }
}

/// Mean soft-mask value per supervoxel, for every supervoxel with at least
/// one voxel in `central_box`. Means are taken over the supervoxel's voxels
/// within the full mask window.
pub fn score_supervoxels(
    m: &SoftMask,
    view: &SegmentationView,
    central_box: &Box3,
) -> BTreeMap<SupervoxelId, f64> {
    let mut sums: BTreeMap<SupervoxelId, (f64, usize)> = BTreeMap::new();
    let mut relevant: BTreeSet<SupervoxelId> = BTreeSet::new();
    let bounds = view.supervoxels.shape.bounds();
    for p in m.window.iter() {
        if !bounds.contains(p) {
            continue;
        }
        let sv = view.supervoxels.get(p);
        if sv == 0 {
            continue;
        }
        let e = sums.entry(sv).or_insert((0.0, 0));
        e.0 += m.get(p);
        e.1 += 1;
        if central_box.contains(p) {
            relevant.insert(sv);
        }
    }
    relevant
        .into_iter()
        .map(|sv| {
            let (s, n) = sums[&sv];
            (sv, s / n as f64)
        })
        .collect()
}

/// Threshold scores into a confident decision or an abstention.
/// Abstains iff any score lands inside `[lo, hi]`.
pub fn decide(
    scores: &BTreeMap<SupervoxelId, f64>,
    lo: f64,
    hi: f64,
) -> Result<SupervoxelDecision, CorrectorError> {
    if lo >= hi {
        return Err(CorrectorError::BadThresholds(lo, hi));
    }
    let abstain = scores.values().any(|&s| (lo..=hi).contains(&s));
    if abstain {
        return Ok(SupervoxelDecision {
            merge: BTreeSet::new(),
            cut: BTreeSet::new(),
            abstain: true,
        });
    }
    Ok(SupervoxelDecision {
        merge: scores.iter().filter(|(_, &s)| s > hi).map(|(&v, _)| v).collect(),
        cut: scores.iter().filter(|(_, &s)| s < lo).map(|(&v, _)| v).collect(),
        abstain: false,
    })
}

/// Generate a corrector training example at `center`: the candidate is the
/// union of the GT object at the center with each other GT segment in the
/// window selected independently with probability `p`, where `p` is the
/// given draw or a uniform draw from the seed.
pub fn make_pruning_task(
    gt: &LabelVolume,
    supervoxels: &LabelVolume,
    center: Point3,
    shape: Shape3,
    p_draw: Option<f64>,
    seed: u64,
) -> Result<(PruningTask, ObjectMask), CorrectorError> {
    let target = gt.get(center);
    if target == 0 {
        return Err(CorrectorError::BackgroundCenter(center));
    }
    let p = match p_draw {
        Some(p) if !(0.0..=1.0).contains(&p) => return Err(CorrectorError::BadDraw(p)),
        Some(p) => p,
        None => unit_hash(seed, 0x70647261, center),
    };
    let window = Box3::window_at(center, shape)?
        .intersect(&gt.shape.bounds())
        .ok_or(CorrectorError::EmptyWindow { center })?;
    let mut labels: BTreeSet<u32> = BTreeSet::new();
    for q in window.iter() {
        let l = gt.get(q);
        if l != 0 {
            labels.insert(l);
        }
    }
    let selected: BTreeSet<u32> = labels
        .into_iter()
        .filter(|&l| l == target || unit_hash(seed, u64::from(l), center) < p)
        .collect();
    let e = window.extents();
    let wshape = Shape3::new(e[0], e[1], e[2])?;
    let mut candidate = ObjectMask::zeros(wshape);
    let mut target_mask = ObjectMask::zeros(wshape);
    for q in window.iter() {
        let l = gt.get(q);
        let local = [
            q[0] - window.min[0],
            q[1] - window.min[1],
            q[2] - window.min[2],
        ];
        if selected.contains(&l) {
            candidate.set(local, true);
        }
        if l == target {
            target_mask.set(local, true);
        }
    }
    let task = PruningTask {
        window,
        candidate,
        center,
        raw: None,
        supervoxels: supervoxels.crop(&window),
    };
    Ok((task, target_mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::errormap::{binarize, combined_error_map, ErrorWindowSpec};
    use crate::svgraph::build_graph;
    use crate::volume::{VoxelSize, WindowMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vol(labels: &[u32], x: usize, y: usize, z: usize) -> LabelVolume {
        LabelVolume::new(
            Shape3::new(x, y, z).unwrap(),
            labels.to_vec(),
            VoxelSize::default(),
        )
        .unwrap()
    }

    fn field(window: Box3, k: usize, mut f: impl FnMut(Point3) -> Vec<f64>) -> VectorField {
        let mut v = VectorField::zeros(window, k);
        for p in window.iter() {
            v.set(p, &f(p));
        }
        v
    }

    #[test]
    fn constant_field_gives_all_ones() {
        let w = Box3::new([0, 0, 0], [3, 3, 1]).unwrap();
        let v = field(w, 6, |_| vec![2.0; 6]);
        let m = mask_from_vector_field(&v, &vec![2.0; 6]).unwrap();
        assert!(m.data().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn transform_matches_exp_of_distance() {
        let w = Box3::new([0, 0, 0], [2, 1, 1]).unwrap();
        let mut v = VectorField::zeros(w, 6);
        v.set([0, 0, 0], &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let ln4 = 4.0f64.ln().sqrt();
        v.set([1, 0, 0], &[ln4, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let m = mask_from_vector_field(&v, &[0.0; 6]).unwrap();
        assert!((m.get([0, 0, 0]) - (-1.0f64).exp()).abs() < 1e-12);
        assert!((m.get([1, 0, 0]) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn transform_rejects_dim_mismatch() {
        let w = Box3::new([0, 0, 0], [1, 1, 1]).unwrap();
        let v = VectorField::zeros(w, 6);
        assert!(matches!(
            mask_from_vector_field(&v, &[0.0; 4]),
            Err(CorrectorError::DimMismatch { got: 4, expected: 6 })
        ));
    }

    #[test]
    fn central_value_is_one_with_pointwise_anchor() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = Box3::new([0, 0, 0], [3, 3, 3]).unwrap();
        let v = field(w, 6, |_| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let center = [1, 1, 1];
        let m = mask_from_vector_field(&v, v.get(center)).unwrap();
        assert_eq!(m.get(center), 1.0);
    }

    #[test]
    fn anchor_is_mean_over_central_supervoxel() {
        let sv = vol(&[5, 5, 0, 7], 4, 1, 1);
        let w = Box3::new([0, 0, 0], [4, 1, 1]).unwrap();
        let mut v = VectorField::zeros(w, 6);
        v.set([0, 0, 0], &[0.0; 6]);
        v.set([1, 0, 0], &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let a = anchor_vector(&v, &sv, [0, 0, 0]).unwrap();
        assert_eq!(a, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

        // Singleton supervoxel: anchor equals the field value there.
        v.set([3, 0, 0], &[9.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let a = anchor_vector(&v, &sv, [3, 0, 0]).unwrap();
        assert_eq!(a, vec![9.0, 1.0, 2.0, 3.0, 4.0, 5.0]);

        assert!(matches!(
            anchor_vector(&v, &sv, [2, 0, 0]),
            Err(CorrectorError::BackgroundCenter(_))
        ));
    }

    #[test]
    fn anchor_matches_brute_force_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let shape = Shape3::new(6, 6, 2).unwrap();
        let data: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(1..4)).collect();
        let sv = LabelVolume::new(shape, data, VoxelSize::default()).unwrap();
        let w = shape.bounds();
        let v = field(w, 3, |_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let central = [2, 3, 1];
        let a = anchor_vector(&v, &sv, central).unwrap();
        let label = sv.get(central);
        let pts: Vec<Point3> = w.iter().filter(|&p| sv.get(p) == label).collect();
        for k in 0..3 {
            let mean: f64 = pts.iter().map(|&p| v.get(p)[k]).sum::<f64>() / pts.len() as f64;
            assert!((a[k] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn decide_thresholds() {
        let scores: BTreeMap<u32, f64> = [(1, 0.95), (2, 0.92), (3, 0.03)].into();
        let d = decide(&scores, 0.1, 0.9).unwrap();
        assert!(!d.abstain);
        assert_eq!(d.merge, [1, 2].into());
        assert_eq!(d.cut, [3].into());

        let scores: BTreeMap<u32, f64> = [(1, 0.5)].into();
        assert!(decide(&scores, 0.1, 0.9).unwrap().abstain);

        let empty = BTreeMap::new();
        let d = decide(&empty, 0.1, 0.9).unwrap();
        assert!(!d.abstain && d.merge.is_empty() && d.cut.is_empty());

        assert!(decide(&empty, 0.9, 0.1).is_err());
    }

    #[test]
    fn decide_is_monotone_in_thresholds() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let scores: BTreeMap<u32, f64> = (1..=8)
                .map(|i| (i, rng.gen_range(0.0..1.0)))
                .collect();
            let lo: f64 = rng.gen_range(0.0..0.4);
            let hi = rng.gen_range(0.5..1.0);
            let hi2 = rng.gen_range(hi..1.0);
            let lo2 = rng.gen_range(0.0..lo.max(1e-9));
            let d1 = decide(&scores, lo, hi).unwrap();
            let d_hi = decide(&scores, lo, hi2).unwrap();
            let d_lo = decide(&scores, lo2, hi).unwrap();
            if !d1.abstain && !d_hi.abstain {
                assert!(d_hi.merge.is_subset(&d1.merge));
            }
            if !d1.abstain && !d_lo.abstain {
                assert!(d_lo.cut.is_subset(&d1.cut));
            }
        }
    }

    fn two_segment_view() -> SegmentationView {
        // Supervoxels 1 and 2 form the left segment, 3 the right one.
        let sv = vol(
            &[
                1, 1, 3, 3, //
                1, 1, 3, 3, //
                2, 2, 3, 3, //
                2, 2, 3, 3,
            ],
            4,
            4,
            1,
        );
        let g = build_graph(&sv, &[(1, 2)]).unwrap();
        SegmentationView::new(sv, g).unwrap()
    }

    #[test]
    fn advice_without_errors_is_central_segment_only() {
        let view = two_segment_view();
        let spec = ErrorWindowSpec::new(Shape3::new(3, 3, 1).unwrap(), WindowMode::Clipped).unwrap();
        let blank = ErrorMap::zeros(view.supervoxels.shape.bounds(), spec);
        let task = advice_mask(&view, &blank, None, [1, 1, 0], Shape3::new(5, 5, 1).unwrap())
            .unwrap();
        for p in task.window.iter() {
            let sv = view.supervoxels.get(p);
            assert_eq!(task.candidate_at(p), sv == 1 || sv == 2);
        }
    }

    #[test]
    fn advice_includes_flagged_segment() {
        let view = two_segment_view();
        let spec = ErrorWindowSpec::new(Shape3::new(3, 3, 1).unwrap(), WindowMode::Clipped).unwrap();
        let mut map = ErrorMap::zeros(view.supervoxels.shape.bounds(), spec);
        map.set([2, 1, 0], 1.0); // white voxel inside segment 3
        let task = advice_mask(&view, &map, None, [1, 1, 0], Shape3::new(5, 5, 1).unwrap())
            .unwrap();
        for p in task.window.iter() {
            assert_eq!(task.candidate_at(p), view.supervoxels.get(p) != 0);
        }
    }

    #[test]
    fn advice_rejects_background_center() {
        let sv = vol(&[0, 0, 1, 1], 4, 1, 1);
        let g = build_graph(&sv, &[]).unwrap();
        let view = SegmentationView::new(sv, g).unwrap();
        let spec = ErrorWindowSpec::new(Shape3::new(3, 1, 1).unwrap(), WindowMode::Clipped).unwrap();
        let blank = ErrorMap::zeros(view.supervoxels.shape.bounds(), spec);
        assert!(matches!(
            advice_mask(&view, &blank, None, [0, 0, 0], Shape3::new(3, 1, 1).unwrap()),
            Err(CorrectorError::BackgroundCenter(_))
        ));
    }

    #[test]
    fn oracle_corrector_erases_the_other_object() {
        let gt = vol(&[1, 1, 2, 2, 1, 1, 2, 2, 1, 1, 2, 2, 1, 1, 2, 2], 4, 4, 1);
        let view = SegmentationView::new(gt.clone(), build_graph(&gt, &[(1, 2)]).unwrap()).unwrap();
        let spec = ErrorWindowSpec::new(Shape3::new(3, 3, 1).unwrap(), WindowMode::Valid).unwrap();
        let merged = view.render_labels();
        let map = binarize(&combined_error_map(&merged, &gt, &spec).unwrap(), 0.25).unwrap();
        let task = advice_mask(&view, &map, None, [1, 1, 0], Shape3::new(5, 5, 1).unwrap())
            .unwrap();
        let m = OracleCorrector::new(gt.clone()).prune(&task).unwrap();
        for p in task.window.iter() {
            if gt.get(p) == 1 {
                assert_eq!(m.get(p), 1.0);
            } else {
                assert_eq!(m.get(p), ORACLE_EPSILON);
            }
        }
        // Per-supervoxel scores are decisively confident.
        let cb = Box3::window_at([1, 1, 0], central_shape(Shape3::new(5, 5, 1).unwrap()))
            .unwrap()
            .intersect(&gt.shape.bounds())
            .unwrap();
        let scores = score_supervoxels(&m, &view, &cb);
        for (_, s) in scores {
            assert!(s > 0.9 || s < 0.1);
        }
    }

    #[test]
    fn oracle_corrector_candidate_equals_object() {
        let gt = vol(&[1; 8], 4, 2, 1);
        let sv = gt.clone();
        let (task, target) =
            make_pruning_task(&gt, &sv, [1, 1, 0], Shape3::new(3, 3, 1).unwrap(), Some(0.0), 1)
                .unwrap();
        assert_eq!(task.candidate, target);
        let m = OracleCorrector::new(gt).prune(&task).unwrap();
        for p in task.window.iter() {
            assert_eq!(m.get(p), 1.0);
        }
    }

    #[test]
    fn score_excludes_supervoxels_outside_central_box() {
        let view = two_segment_view();
        let w = view.supervoxels.shape.bounds();
        let m = SoftMask::constant(w, 1.0);
        let cb = Box3::new([0, 0, 0], [2, 2, 1]).unwrap();
        let scores = score_supervoxels(&m, &view, &cb);
        // Supervoxel 2 (rows 2-3) and 3 (columns 2-3) have no voxel in the box.
        assert_eq!(scores.keys().copied().collect::<Vec<_>>(), vec![1]);
        assert_eq!(scores[&1], 1.0);
    }

    #[test]
    fn score_matches_brute_force_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let view = two_segment_view();
        let w = view.supervoxels.shape.bounds();
        let mut m = SoftMask::constant(w, 1.0);
        for p in w.iter() {
            m.set(p, rng.gen_range(0.05..1.0));
        }
        let cb = Box3::new([1, 1, 0], [3, 3, 1]).unwrap();
        let scores = score_supervoxels(&m, &view, &cb);
        for (&sv, &score) in &scores {
            let pts: Vec<Point3> = w.iter().filter(|&p| view.supervoxels.get(p) == sv).collect();
            let mean = pts.iter().map(|&p| m.get(p)).sum::<f64>() / pts.len() as f64;
            assert!((score - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn pruning_task_extremes() {
        let gt = vol(&[1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3, 2, 2], 4, 4, 1);
        let shape = Shape3::new(5, 5, 1).unwrap();
        let (task, target) = make_pruning_task(&gt, &gt, [1, 1, 0], shape, Some(0.0), 1).unwrap();
        assert_eq!(task.candidate, target);
        let (task, _) = make_pruning_task(&gt, &gt, [1, 1, 0], shape, Some(1.0), 1).unwrap();
        for p in task.window.iter() {
            assert_eq!(task.candidate_at(p), gt.get(p) != 0);
        }
    }

    #[test]
    fn pruning_task_candidate_contains_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let shape = Shape3::new(10, 10, 3).unwrap();
        let data: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(0..5)).collect();
        let gt = LabelVolume::new(shape, data, VoxelSize::default()).unwrap();
        let wshape = Shape3::new(5, 5, 3).unwrap();
        for seed in 0..100u64 {
            let c = [
                rng.gen_range(0..10) as i64,
                rng.gen_range(0..10) as i64,
                rng.gen_range(0..3) as i64,
            ];
            if gt.get(c) == 0 {
                continue;
            }
            let (task, target) = make_pruning_task(&gt, &gt, c, wshape, None, seed).unwrap();
            for p in task.window.iter() {
                let local = [
                    p[0] - task.window.min[0],
                    p[1] - task.window.min[1],
                    p[2] - task.window.min[2],
                ];
                if target.get(local) {
                    assert!(task.candidate_at(p));
                }
            }
        }
    }

    #[test]
    fn central_shape_halving() {
        assert_eq!(central_shape(Shape3::new(33, 33, 9).unwrap()).dims(), [17, 17, 5]);
        assert_eq!(central_shape(Shape3::new(3, 3, 1).unwrap()).dims(), [1, 1, 1]);
        assert_eq!(central_shape(Shape3::new(7, 5, 3).unwrap()).dims(), [3, 3, 1]);
    }
}

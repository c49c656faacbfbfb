//! Windowed error maps over proposed segmentations.
//!
//! A voxel of an object's error map is 0 iff the object mask restricted to
//! the window centered there is voxel-wise equal to the restriction of some
//! ground-truth object. The combined error map restricts each object's map to
//! the object itself and sums the results, so foreground voxels carry their
//! own object's error value and background stays 0.
//!
//! The production path slides per-window label counts along x instead of
//! re-comparing windows; `reference::brute_force_error_map` is the literal
//! implementation it is validated against.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume::{Box3, LabelVolume, ObjectMask, Point3, RawVolume, Shape3, WindowMode};

#[derive(Debug, Error)]
pub enum ErrorMapError {
    #[error("window dimensions must be odd, got {0}x{1}x{2}")]
    EvenWindow(usize, usize, usize),
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch([usize; 3], [usize; 3]),
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("noise rates must lie in [0, 1), got fp={0} fn={1}")]
    BadRates(f64, f64),
    #[error("voxel {0:?} is covered by no tile")]
    Uncovered(Point3),
    #[error("region {0:?} does not intersect the volume")]
    EmptyRegion(Box3),
}

/// Window size and border handling for error-map evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorWindowSpec {
    pub shape: Shape3,
    pub mode: WindowMode,
}

impl ErrorWindowSpec {
    pub fn new(shape: Shape3, mode: WindowMode) -> Result<Self, ErrorMapError> {
        if !shape.is_odd() {
            return Err(ErrorMapError::EvenWindow(shape.x, shape.y, shape.z));
        }
        Ok(ErrorWindowSpec { shape, mode })
    }
}

/// Scalar field in [0, 1] over a box region.
///
/// In valid mode, centers whose window does not fit the volume are flagged
/// out-of-domain and carry 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap {
    pub region: Box3,
    pub spec: ErrorWindowSpec,
    data: Vec<f32>,
    domain: Vec<bool>,
}

impl ErrorMap {
    pub fn zeros(region: Box3, spec: ErrorWindowSpec) -> Self {
        let n = region.len();
        ErrorMap {
            region,
            spec,
            data: vec![0.0; n],
            domain: vec![true; n],
        }
    }

    #[inline]
    pub fn get(&self, p: Point3) -> f32 {
        self.data[self.region.local_index(p)]
    }

    #[inline]
    pub fn set(&mut self, p: Point3, v: f32) {
        debug_assert!((0.0..=1.0).contains(&v));
        let i = self.region.local_index(p);
        self.data[i] = v;
    }

    #[inline]
    pub fn in_domain(&self, p: Point3) -> bool {
        self.domain[self.region.local_index(p)]
    }

    pub fn set_out_of_domain(&mut self, p: Point3) {
        let i = self.region.local_index(p);
        self.domain[i] = false;
        self.data[i] = 0.0;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Number of voxels with a nonzero value.
    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v > 0.0).count()
    }

    /// Fraction of the region that is in-domain.
    pub fn coverage(&self) -> f64 {
        self.domain.iter().filter(|&&d| d).count() as f64 / self.domain.len() as f64
    }

    /// Copy values and domain flags from `other` wherever regions overlap.
    pub fn splat(&mut self, other: &ErrorMap) {
        if let Some(b) = self.region.intersect(&other.region) {
            for p in b.iter() {
                let i = self.region.local_index(p);
                self.data[i] = other.get(p);
                self.domain[i] = other.in_domain(p);
            }
        }
    }
}

/// Threshold an error map into a binary one. Voxels with value >= threshold
/// become 1; out-of-domain voxels stay 0.
pub fn binarize(map: &ErrorMap, threshold: f64) -> Result<ErrorMap, ErrorMapError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ErrorMapError::BadThreshold(threshold));
    }
    let mut out = map.clone();
    for (i, v) in out.data.iter_mut().enumerate() {
        *v = if out.domain[i] && f64::from(*v) >= threshold {
            1.0
        } else {
            0.0
        };
    }
    Ok(out)
}

/// Blend overlapping tiles into one map over `region` using a per-voxel
/// maximum. Every voxel of `region` must be covered by at least one tile.
pub fn blend_max(
    region: Box3,
    spec: ErrorWindowSpec,
    tiles: &[ErrorMap],
) -> Result<ErrorMap, ErrorMapError> {
    let mut out = ErrorMap::zeros(region, spec);
    for p in region.iter() {
        let mut best: Option<f32> = None;
        let mut in_domain = false;
        for t in tiles {
            if t.region.contains(p) {
                let v = t.get(p);
                best = Some(best.map_or(v, |b: f32| b.max(v)));
                in_domain |= t.in_domain(p);
            }
        }
        match best {
            Some(v) => {
                out.set(p, v);
                if !in_domain {
                    out.set_out_of_domain(p);
                }
            }
            None => return Err(ErrorMapError::Uncovered(p)),
        }
    }
    Ok(out)
}

// Sliding per-window counts for one (y, z) row of centers. Planes of constant
// x enter and leave as the center advances.
struct SlidingCounts<'a> {
    gt: &'a LabelVolume,
    y_range: (i64, i64),
    z_range: (i64, i64),
    gt_count: HashMap<u32, usize>,
}

impl<'a> SlidingCounts<'a> {
    fn new(gt: &'a LabelVolume, y_range: (i64, i64), z_range: (i64, i64)) -> Self {
        SlidingCounts {
            gt,
            y_range,
            z_range,
            gt_count: HashMap::new(),
        }
    }

    fn plane<F: FnMut(Point3, u32)>(&self, x: i64, mut f: F) {
        for z in self.z_range.0..self.z_range.1 {
            for y in self.y_range.0..self.y_range.1 {
                let p = [x, y, z];
                f(p, self.gt.get(p));
            }
        }
    }

    fn add_gt(&mut self, x: i64) {
        let mut updates = Vec::new();
        self.plane(x, |_, l| {
            if l != 0 {
                updates.push(l);
            }
        });
        for l in updates {
            *self.gt_count.entry(l).or_insert(0) += 1;
        }
    }

    fn remove_gt(&mut self, x: i64) {
        let mut updates = Vec::new();
        self.plane(x, |_, l| {
            if l != 0 {
                updates.push(l);
            }
        });
        for l in updates {
            let c = self.gt_count.get_mut(&l).expect("count underflow");
            *c -= 1;
            if *c == 0 {
                self.gt_count.remove(&l);
            }
        }
    }
}

fn axis_center_range(region: &Box3, n: usize, r: i64, axis: usize, mode: WindowMode) -> (i64, i64) {
    match mode {
        WindowMode::Valid => (region.min[axis].max(r), region.max[axis].min(n as i64 - r)),
        WindowMode::Clipped => (region.min[axis], region.max[axis]),
    }
}

fn clip_window(c: i64, r: i64, n: usize, mode: WindowMode) -> (i64, i64) {
    match mode {
        WindowMode::Valid => (c - r, c + r + 1),
        WindowMode::Clipped => ((c - r).max(0), (c + r + 1).min(n as i64)),
    }
}

/// Per-object error map of `obj` against ground truth, evaluated at every
/// voxel of the volume.
pub fn oracle_error_map(
    obj: &ObjectMask,
    gt: &LabelVolume,
    spec: &ErrorWindowSpec,
) -> Result<ErrorMap, ErrorMapError> {
    if obj.shape != gt.shape {
        return Err(ErrorMapError::ShapeMismatch(obj.shape.dims(), gt.shape.dims()));
    }
    let shape = gt.shape;
    let region = shape.bounds();
    let mut out = ErrorMap::zeros(region, spec.clone());
    if spec.mode == WindowMode::Valid {
        mark_valid_domain(&mut out, shape, spec.shape);
    }
    let r = spec.shape.radius();
    let (cz0, cz1) = axis_center_range(&region, shape.z, r[2], 2, spec.mode);
    let (cy0, cy1) = axis_center_range(&region, shape.y, r[1], 1, spec.mode);
    for cz in cz0..cz1 {
        let z_range = clip_window(cz, r[2], shape.z, spec.mode);
        for cy in cy0..cy1 {
            let y_range = clip_window(cy, r[1], shape.y, spec.mode);
            let (cx0, cx1) = axis_center_range(&region, shape.x, r[0], 0, spec.mode);
            if cx0 >= cx1 {
                continue;
            }
            let mut counts = SlidingCounts::new(gt, y_range, z_range);
            let mut obj_count = 0usize;
            let mut obj_bg = 0usize;
            let mut overlap: HashMap<u32, usize> = HashMap::new();
            let add_plane = |counts: &mut SlidingCounts,
                                 obj_count: &mut usize,
                                 obj_bg: &mut usize,
                                 overlap: &mut HashMap<u32, usize>,
                                 x: i64| {
                counts.add_gt(x);
                counts.plane(x, |p, l| {
                    if obj.get(p) {
                        *obj_count += 1;
                        if l == 0 {
                            *obj_bg += 1;
                        } else {
                            *overlap.entry(l).or_insert(0) += 1;
                        }
                    }
                });
            };
            let remove_plane = |counts: &mut SlidingCounts,
                                    obj_count: &mut usize,
                                    obj_bg: &mut usize,
                                    overlap: &mut HashMap<u32, usize>,
                                    x: i64| {
                counts.remove_gt(x);
                counts.plane(x, |p, l| {
                    if obj.get(p) {
                        *obj_count -= 1;
                        if l == 0 {
                            *obj_bg -= 1;
                        } else {
                            let c = overlap.get_mut(&l).expect("overlap underflow");
                            *c -= 1;
                            if *c == 0 {
                                overlap.remove(&l);
                            }
                        }
                    }
                });
            };
            let (x0, x1) = clip_window(cx0, r[0], shape.x, spec.mode);
            for x in x0..x1 {
                add_plane(&mut counts, &mut obj_count, &mut obj_bg, &mut overlap, x);
            }
            let mut lo = x0;
            let mut hi = x1;
            for cx in cx0..cx1 {
                if cx > cx0 {
                    let (nlo, nhi) = clip_window(cx, r[0], shape.x, spec.mode);
                    while hi < nhi {
                        add_plane(&mut counts, &mut obj_count, &mut obj_bg, &mut overlap, hi);
                        hi += 1;
                    }
                    while lo < nlo {
                        remove_plane(&mut counts, &mut obj_count, &mut obj_bg, &mut overlap, lo);
                        lo += 1;
                    }
                }
                let value = if obj_count == 0 {
                    0.0
                } else if obj_bg > 0 {
                    1.0
                } else {
                    let matched = overlap.iter().any(|(l, &c)| {
                        c == obj_count && counts.gt_count.get(l) == Some(&obj_count)
                    });
                    if matched {
                        0.0
                    } else {
                        1.0
                    }
                };
                out.set([cx, cy, cz], value);
            }
        }
    }
    Ok(out)
}

fn mark_valid_domain(out: &mut ErrorMap, volume: Shape3, window: Shape3) {
    let r = window.radius();
    let region = out.region;
    for p in region.iter() {
        let inside = (0..3).all(|a| {
            p[a] >= r[a] && p[a] + r[a] < [volume.x, volume.y, volume.z][a] as i64
        });
        if !inside {
            out.set_out_of_domain(p);
        }
    }
}

/// Combined error map over a region of centers; windows still see the whole
/// volume. At a foreground center the value is its own object's error value;
/// background is 0.
pub fn combined_error_map_region(
    proposal: &LabelVolume,
    gt: &LabelVolume,
    spec: &ErrorWindowSpec,
    region: &Box3,
) -> Result<ErrorMap, ErrorMapError> {
    if proposal.shape != gt.shape {
        return Err(ErrorMapError::ShapeMismatch(
            proposal.shape.dims(),
            gt.shape.dims(),
        ));
    }
    let shape = gt.shape;
    let region = region
        .intersect(&shape.bounds())
        .ok_or(ErrorMapError::EmptyRegion(*region))?;
    let mut out = ErrorMap::zeros(region, spec.clone());
    if spec.mode == WindowMode::Valid {
        mark_valid_domain(&mut out, shape, spec.shape);
    }
    let r = spec.shape.radius();
    let (cz0, cz1) = axis_center_range(&region, shape.z, r[2], 2, spec.mode);
    let (cy0, cy1) = axis_center_range(&region, shape.y, r[1], 1, spec.mode);
    for cz in cz0..cz1 {
        let z_range = clip_window(cz, r[2], shape.z, spec.mode);
        for cy in cy0..cy1 {
            let y_range = clip_window(cy, r[1], shape.y, spec.mode);
            let (cx0, cx1) = axis_center_range(&region, shape.x, r[0], 0, spec.mode);
            if cx0 >= cx1 {
                continue;
            }
            let mut counts = SlidingCounts::new(gt, y_range, z_range);
            let mut prop_count: HashMap<u32, usize> = HashMap::new();
            let mut prop_bg: HashMap<u32, usize> = HashMap::new();
            let mut overlap: HashMap<(u32, u32), usize> = HashMap::new();
            let add = |counts: &mut SlidingCounts,
                       prop_count: &mut HashMap<u32, usize>,
                       prop_bg: &mut HashMap<u32, usize>,
                       overlap: &mut HashMap<(u32, u32), usize>,
                       x: i64| {
                counts.add_gt(x);
                counts.plane(x, |p, l| {
                    let q = proposal.get(p);
                    if q != 0 {
                        *prop_count.entry(q).or_insert(0) += 1;
                        if l == 0 {
                            *prop_bg.entry(q).or_insert(0) += 1;
                        } else {
                            *overlap.entry((q, l)).or_insert(0) += 1;
                        }
                    }
                });
            };
            let remove = |counts: &mut SlidingCounts,
                          prop_count: &mut HashMap<u32, usize>,
                          prop_bg: &mut HashMap<u32, usize>,
                          overlap: &mut HashMap<(u32, u32), usize>,
                          x: i64| {
                counts.remove_gt(x);
                counts.plane(x, |p, l| {
                    let q = proposal.get(p);
                    if q != 0 {
                        let c = prop_count.get_mut(&q).expect("count underflow");
                        *c -= 1;
                        if *c == 0 {
                            prop_count.remove(&q);
                        }
                        if l == 0 {
                            let c = prop_bg.get_mut(&q).expect("count underflow");
                            *c -= 1;
                            if *c == 0 {
                                prop_bg.remove(&q);
                            }
                        } else {
                            let c = overlap.get_mut(&(q, l)).expect("count underflow");
                            *c -= 1;
                            if *c == 0 {
                                overlap.remove(&(q, l));
                            }
                        }
                    }
                });
            };
            let (x0, x1) = clip_window(cx0, r[0], shape.x, spec.mode);
            for x in x0..x1 {
                add(&mut counts, &mut prop_count, &mut prop_bg, &mut overlap, x);
            }
            let mut lo = x0;
            let mut hi = x1;
            for cx in cx0..cx1 {
                if cx > cx0 {
                    let (nlo, nhi) = clip_window(cx, r[0], shape.x, spec.mode);
                    while hi < nhi {
                        add(&mut counts, &mut prop_count, &mut prop_bg, &mut overlap, hi);
                        hi += 1;
                    }
                    while lo < nlo {
                        remove(&mut counts, &mut prop_count, &mut prop_bg, &mut overlap, lo);
                        lo += 1;
                    }
                }
                let center = [cx, cy, cz];
                if !out.in_domain(center) {
                    continue;
                }
                let q = proposal.get(center);
                let value = if q == 0 {
                    0.0
                } else {
                    let l = gt.get(center);
                    // The center voxel is part of its own object's mask, so
                    // a match can only be against the object covering it.
                    let n = prop_count[&q];
                    let matched = l != 0
                        && !prop_bg.contains_key(&q)
                        && overlap.get(&(q, l)) == Some(&n)
                        && counts.gt_count.get(&l) == Some(&n);
                    if matched {
                        0.0
                    } else {
                        1.0
                    }
                };
                out.set(center, value);
            }
        }
    }
    Ok(out)
}

/// Combined error map over the whole volume.
pub fn combined_error_map(
    proposal: &LabelVolume,
    gt: &LabelVolume,
    spec: &ErrorWindowSpec,
) -> Result<ErrorMap, ErrorMapError> {
    combined_error_map_region(proposal, gt, spec, &proposal.shape.bounds())
}

/// True iff the binarized map has a nonzero voxel within the (clipped) window
/// of `shape` centered at `center`.
pub fn error_within(map: &ErrorMap, center: Point3, shape: Shape3) -> bool {
    let b = match Box3::window_at(center, shape) {
        Ok(b) => b,
        Err(_) => return false,
    };
    match b.intersect(&map.region) {
        Some(b) => b.iter().any(|p| map.get(p) > 0.0),
        None => false,
    }
}

/// Deterministic per-location uniform variate in [0, 1). splitmix64 over the
/// seed, a tag, and the coordinates.
pub(crate) fn unit_hash(seed: u64, tag: u64, p: Point3) -> f64 {
    let mut x = seed
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(tag)
        .wrapping_add((p[0] as u64).wrapping_mul(0xd1342543de82ef95))
        .wrapping_add((p[1] as u64).wrapping_mul(0xaf251af3b0f025b5))
        .wrapping_add((p[2] as u64).wrapping_mul(0xb564ef22ec7aece5));
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^= x >> 31;
    (x >> 11) as f64 / (1u64 << 53) as f64
}

/// A pluggable error detector: given a proposal (and optionally the raw
/// image), produce an error map over a region. Deterministic per seed.
pub trait Detector {
    fn error_map(
        &self,
        proposal: &LabelVolume,
        raw: Option<&RawVolume>,
        region: &Box3,
    ) -> Result<ErrorMap, ErrorMapError>;

    fn spec(&self) -> &ErrorWindowSpec;
}

/// Ground-truth-backed detector producing exact combined error maps.
pub struct OracleDetector {
    pub gt: LabelVolume,
    pub window: ErrorWindowSpec,
}

impl OracleDetector {
    pub fn new(gt: LabelVolume, window: ErrorWindowSpec) -> Self {
        OracleDetector { gt, window }
    }
}

impl Detector for OracleDetector {
    fn error_map(
        &self,
        proposal: &LabelVolume,
        _raw: Option<&RawVolume>,
        region: &Box3,
    ) -> Result<ErrorMap, ErrorMapError> {
        combined_error_map_region(proposal, &self.gt, &self.window, region)
    }

    fn spec(&self) -> &ErrorWindowSpec {
        &self.window
    }
}

/// Oracle detector with per-location decision noise: error decisions flip
/// 1 -> 0 with probability `fn_rate` and 0 -> 1 with probability `fp_rate`,
/// independently per location and deterministically per seed.
pub struct NoisyDetector {
    oracle: OracleDetector,
    fp_rate: f64,
    fn_rate: f64,
    seed: u64,
}

impl NoisyDetector {
    pub fn new(
        gt: LabelVolume,
        window: ErrorWindowSpec,
        fp_rate: f64,
        fn_rate: f64,
        seed: u64,
    ) -> Result<Self, ErrorMapError> {
        if !(0.0..1.0).contains(&fp_rate) || !(0.0..1.0).contains(&fn_rate) {
            return Err(ErrorMapError::BadRates(fp_rate, fn_rate));
        }
        Ok(NoisyDetector {
            oracle: OracleDetector::new(gt, window),
            fp_rate,
            fn_rate,
            seed,
        })
    }

    fn flip(&self, p: Point3, decision: bool) -> bool {
        let u = unit_hash(self.seed, 0x6e6f6973, p);
        if decision {
            u >= self.fn_rate
        } else {
            u < self.fp_rate
        }
    }

    /// Window-level decision at a single evaluation point: the oracle answer
    /// to "is there an error within the window of `shape` at `center`",
    /// flipped with the configured rates.
    pub fn point_decision(
        &self,
        proposal: &LabelVolume,
        center: Point3,
        shape: Shape3,
    ) -> Result<bool, ErrorMapError> {
        let b = Box3::window_at(center, shape)
            .map_err(|_| ErrorMapError::EvenWindow(shape.x, shape.y, shape.z))?;
        let b = b
            .intersect(&proposal.shape.bounds())
            .ok_or(ErrorMapError::EmptyRegion(b))?;
        let map = self.oracle.error_map(proposal, None, &b)?;
        let oracle = map.data().iter().any(|&v| v > 0.0);
        Ok(self.flip(center, oracle))
    }
}

impl Detector for NoisyDetector {
    fn error_map(
        &self,
        proposal: &LabelVolume,
        raw: Option<&RawVolume>,
        region: &Box3,
    ) -> Result<ErrorMap, ErrorMapError> {
        let mut map = self.oracle.error_map(proposal, raw, region)?;
        let region = map.region;
        for p in region.iter() {
            if !map.in_domain(p) {
                continue;
            }
            let decision = map.get(p) > 0.0;
            let flipped = self.flip(p, decision);
            map.set(p, if flipped { 1.0 } else { 0.0 });
        }
        Ok(map)
    }

    fn spec(&self) -> &ErrorWindowSpec {
        &self.oracle.window
    }
}

//! Slow reference implementations used to cross-check the optimized paths.
//!
//! Everything here is written in the most literal way possible and shares no
//! code with the production implementations. Intended for tests and
//! validation runs, not for production use.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::errormap::{ErrorMap, ErrorWindowSpec};
use crate::volume::{window_box, LabelVolume, ObjectMask, Point3};

/// Connected components by breadth-first search over an explicit edge set.
/// Component ids are the minimum member id.
pub fn connected_components(
    vertices: &BTreeSet<u32>,
    edges: &BTreeSet<(u32, u32)>,
) -> BTreeMap<u32, u32> {
    let mut adj: HashMap<u32, Vec<u32>> = HashMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut out = BTreeMap::new();
    for &start in vertices {
        if out.contains_key(&start) {
            continue;
        }
        let mut members = vec![start];
        let mut seen: BTreeSet<u32> = [start].into();
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &n in adj.get(&v).into_iter().flatten() {
                if vertices.contains(&n) && seen.insert(n) {
                    members.push(n);
                    queue.push_back(n);
                }
            }
        }
        let canon = *members.iter().min().unwrap();
        for m in members {
            out.insert(m, canon);
        }
    }
    out
}

/// Literal windowed comparison from the error-map definition: a voxel is 0
/// iff the mask restricted to the window equals the restriction of some
/// ground-truth object. An empty mask window counts as error-free.
pub fn brute_force_error_map(
    obj: &ObjectMask,
    gt: &LabelVolume,
    spec: &ErrorWindowSpec,
) -> ErrorMap {
    let shape = obj.shape;
    let mut out = ErrorMap::zeros(shape.bounds(), spec.clone());
    for center in shape.iter() {
        let b = match window_box(shape, center, spec.shape, spec.mode) {
            Ok(b) => b,
            Err(_) => {
                out.set_out_of_domain(center);
                continue;
            }
        };
        let mut candidates: BTreeSet<u32> = BTreeSet::new();
        let mut any_obj = false;
        for p in b.iter() {
            if gt.get(p) != 0 {
                candidates.insert(gt.get(p));
            }
            any_obj |= obj.get(p);
        }
        let value = if !any_obj {
            0.0
        } else {
            let matched = candidates.iter().any(|&label| {
                b.iter().all(|p| obj.get(p) == (gt.get(p) == label))
            });
            if matched {
                0.0
            } else {
                1.0
            }
        };
        out.set(center, value);
    }
    out
}

/// Combined error map straight from the definition: the per-object map of
/// each proposal object, masked to the object, summed.
pub fn brute_force_combined_error_map(
    proposal: &LabelVolume,
    gt: &LabelVolume,
    spec: &ErrorWindowSpec,
) -> ErrorMap {
    let shape = proposal.shape;
    let mut out = ErrorMap::zeros(shape.bounds(), spec.clone());
    for label in proposal.labels() {
        let mask = proposal.object_mask(label).expect("nonzero label");
        let per = brute_force_error_map(&mask, gt, spec);
        for p in shape.iter() {
            if mask.get(p) {
                out.set(p, out.get(p) + per.get(p));
            }
        }
    }
    // Domain flags come from the window geometry, not from any object.
    let probe = brute_force_error_map(&ObjectMask::zeros(shape), gt, spec);
    for p in shape.iter() {
        if !probe.in_domain(p) {
            out.set_out_of_domain(p);
        }
    }
    out
}

/// Rand recall/precision by explicit pair counting over all voxel pairs.
/// Only usable on tiny volumes.
pub fn pairwise_rand(gt: &LabelVolume, prop: &LabelVolume) -> (f64, f64) {
    let pts: Vec<Point3> = gt
        .shape
        .iter()
        .filter(|&p| gt.get(p) != 0 && prop.get(p) != 0)
        .collect();
    let mut same_gt = 0u64;
    let mut same_prop = 0u64;
    let mut same_both = 0u64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let g = gt.get(pts[i]) == gt.get(pts[j]);
            let s = prop.get(pts[i]) == prop.get(pts[j]);
            same_gt += u64::from(g);
            same_prop += u64::from(s);
            same_both += u64::from(g && s);
        }
    }
    // Self-pairs are included so the counts match the sum-of-squares form.
    let n = pts.len() as u64;
    let recall = (2 * same_both + n) as f64 / (2 * same_gt + n) as f64;
    let precision = (2 * same_both + n) as f64 / (2 * same_prop + n) as f64;
    (recall, precision)
}

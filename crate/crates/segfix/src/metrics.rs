//! Segmentation comparison: contingency tables, variation of information and
//! its per-object decomposition, Rand precision/recall, error counts at
//! evaluation points, and detector precision-recall curves.
//!
//! All information measures are in nats, with the 0 log 0 = 0 convention.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume::LabelVolume;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch([usize; 3], [usize; 3]),
    #[error("contingency table is empty")]
    EmptyTable,
    #[error("decision lists have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no positive labels; recall is undefined")]
    NoPositives,
}

/// Sparse voxel-overlap counts between ground-truth segments (rows) and
/// proposed segments (columns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: HashMap<(u32, u32), u64>,
    row_sums: BTreeMap<u32, u64>,
    col_sums: BTreeMap<u32, u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn from_counts(counts: impl IntoIterator<Item = ((u32, u32), u64)>) -> Self {
        let mut t = ContingencyTable {
            counts: HashMap::new(),
            row_sums: BTreeMap::new(),
            col_sums: BTreeMap::new(),
            total: 0,
        };
        for ((i, j), c) in counts {
            if c == 0 {
                continue;
            }
            *t.counts.entry((i, j)).or_insert(0) += c;
            *t.row_sums.entry(i).or_insert(0) += c;
            *t.col_sums.entry(j).or_insert(0) += c;
            t.total += c;
        }
        t
    }

    pub fn count(&self, i: u32, j: u32) -> u64 {
        self.counts.get(&(i, j)).copied().unwrap_or(0)
    }

    pub fn row_sum(&self, i: u32) -> u64 {
        self.row_sums.get(&i).copied().unwrap_or(0)
    }

    pub fn col_sum(&self, j: u32) -> u64 {
        self.col_sums.get(&j).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn rows(&self) -> impl Iterator<Item = u32> + '_ {
        self.row_sums.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = ((u32, u32), u64)> + '_ {
        self.counts.iter().map(|(&k, &v)| (k, v))
    }

    fn entries_sorted(&self) -> Vec<((u32, u32), u64)> {
        let mut v: Vec<_> = self.entries().collect();
        v.sort_unstable();
        v
    }
}

/// Build the contingency table of two aligned label volumes. By default only
/// voxels that are foreground in both are counted; with
/// `include_background` every voxel is counted and 0 is an ordinary label.
pub fn contingency(
    gt: &LabelVolume,
    prop: &LabelVolume,
    include_background: bool,
) -> Result<ContingencyTable, MetricsError> {
    if gt.shape != prop.shape {
        return Err(MetricsError::ShapeMismatch(gt.shape.dims(), prop.shape.dims()));
    }
    let pairs = gt
        .data()
        .iter()
        .zip(prop.data())
        .filter(|&(&g, &p)| include_background || (g != 0 && p != 0))
        .map(|(&g, &p)| ((g, p), 1));
    Ok(ContingencyTable::from_counts(pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViScores {
    pub vi_split: f64,
    pub vi_merge: f64,
}

/// Total variation-of-information scores:
/// `VI_split = -(1/R) sum r_ij log(r_ij / p_i)` and the column analogue.
pub fn vi_scores(t: &ContingencyTable) -> Result<ViScores, MetricsError> {
    if t.total() == 0 {
        return Err(MetricsError::EmptyTable);
    }
    let total = t.total() as f64;
    let mut split = 0.0;
    let mut merge = 0.0;
    for ((i, j), r) in t.entries_sorted() {
        let r = r as f64;
        let p = t.row_sum(i) as f64;
        let q = t.col_sum(j) as f64;
        split -= r * (r / p).ln();
        merge -= r * (r / q).ln();
    }
    Ok(ViScores {
        vi_split: split / total,
        vi_merge: merge / total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectViScore {
    pub segment: u32,
    pub vi_split: f64,
    pub vi_merge: f64,
    /// p_i / R, the segment's weight in the total scores.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerObjectVi {
    pub scores: Vec<ObjectViScore>,
}

/// Per-ground-truth-segment decomposition:
/// `VI_split(i) = -sum_j (r_ij/p_i) log(r_ij/p_i)`,
/// `VI_merge(i) = -sum_j (r_ij/p_i) log(r_ij/q_j)`.
/// The totals are the p_i/R-weighted sums of these.
pub fn per_object_vi(t: &ContingencyTable) -> Result<PerObjectVi, MetricsError> {
    if t.total() == 0 {
        return Err(MetricsError::EmptyTable);
    }
    let total = t.total() as f64;
    let mut per: BTreeMap<u32, (f64, f64)> = t.rows().map(|i| (i, (0.0, 0.0))).collect();
    for ((i, j), r) in t.entries_sorted() {
        let r = r as f64;
        let p = t.row_sum(i) as f64;
        let q = t.col_sum(j) as f64;
        let e = per.get_mut(&i).expect("row present");
        e.0 -= (r / p) * (r / p).ln();
        e.1 -= (r / p) * (r / q).ln();
    }
    Ok(PerObjectVi {
        scores: per
            .into_iter()
            .map(|(segment, (vi_split, vi_merge))| ObjectViScore {
                segment,
                vi_split,
                vi_merge,
                weight: t.row_sum(segment) as f64 / total,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandScores {
    pub rand_recall: f64,
    pub rand_precision: f64,
}

/// Sum-of-squares Rand scores:
/// recall = sum r_ij^2 / sum p_i^2, precision = sum r_ij^2 / sum q_j^2.
pub fn rand_scores(t: &ContingencyTable) -> Result<RandScores, MetricsError> {
    if t.total() == 0 {
        return Err(MetricsError::EmptyTable);
    }
    let sq = |x: u64| (x as f64) * (x as f64);
    let num: f64 = t.entries().map(|(_, r)| sq(r)).sum();
    let rows: f64 = t.rows().map(|i| sq(t.row_sum(i))).sum();
    let cols: f64 = t.col_sums.values().map(|&q| sq(q)).sum();
    Ok(RandScores {
        rand_recall: num / rows,
        rand_precision: num / cols,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointErrorCounts {
    pub errors_before: usize,
    pub errors_after: usize,
    pub fixed: usize,
    pub introduced: usize,
}

/// Compare per-point error decisions before and after refinement.
pub fn count_point_errors(
    before: &[bool],
    after: &[bool],
) -> Result<PointErrorCounts, MetricsError> {
    if before.len() != after.len() {
        return Err(MetricsError::LengthMismatch(before.len(), after.len()));
    }
    let mut counts = PointErrorCounts {
        errors_before: 0,
        errors_after: 0,
        fixed: 0,
        introduced: 0,
    };
    for (&b, &a) in before.iter().zip(after) {
        counts.errors_before += usize::from(b);
        counts.errors_after += usize::from(a);
        counts.fixed += usize::from(b && !a);
        counts.introduced += usize::from(!b && a);
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall at each distinct score threshold, descending. A point is
/// predicted positive when its score is >= the threshold.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), labels.len()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(MetricsError::NoPositives);
    }
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    thresholds.dedup();
    let mut out = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for (&s, &l) in scores.iter().zip(labels) {
            if s >= t {
                if l {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        out.push(PrPoint {
            threshold: t,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / positives as f64,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use crate::volume::{Shape3, VoxelSize};
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

    // GT split into halves A=1, B=2; proposal is one merged segment.
    fn merged_halves() -> (LabelVolume, LabelVolume) {
        let gt = vol(&[1, 1, 2, 2, 1, 1, 2, 2, 1, 1, 2, 2, 1, 1, 2, 2], 4, 4, 1);
        let prop = vol(&[1; 16], 4, 4, 1);
        (gt, prop)
    }

    #[test]
    fn identical_volumes_give_diagonal_table() {
        let (gt, _) = merged_halves();
        let t = contingency(&gt, &gt, false).unwrap();
        assert_eq!(t.count(1, 1), 8);
        assert_eq!(t.count(2, 2), 8);
        assert_eq!(t.count(1, 2), 0);
        assert_eq!(t.total(), 16);
    }

    #[test]
    fn merged_halves_table() {
        let (gt, prop) = merged_halves();
        let t = contingency(&gt, &prop, false).unwrap();
        assert_eq!(t.count(1, 1), 8);
        assert_eq!(t.count(2, 1), 8);
        assert_eq!(t.row_sum(1), 8);
        assert_eq!(t.col_sum(1), 16);
    }

    #[test]
    fn table_total_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let shape = Shape3::new(8, 8, 3).unwrap();
            let a: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(0..5)).collect();
            let b: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(0..5)).collect();
            let overlap = a
                .iter()
                .zip(&b)
                .filter(|(&x, &y)| x != 0 && y != 0)
                .count() as u64;
            let gt = LabelVolume::new(shape, a, VoxelSize::default()).unwrap();
            let prop = LabelVolume::new(shape, b, VoxelSize::default()).unwrap();
            let t = contingency(&gt, &prop, false).unwrap();
            assert_eq!(t.total(), overlap);
        }
    }

    #[test]
    fn contingency_shape_mismatch() {
        let a = vol(&[1; 4], 4, 1, 1);
        let b = vol(&[1; 8], 4, 2, 1);
        assert!(matches!(
            contingency(&a, &b, false),
            Err(MetricsError::ShapeMismatch(..))
        ));
    }

    #[test]
    fn vi_identical_partitions_is_zero() {
        let (gt, _) = merged_halves();
        let t = contingency(&gt, &gt, false).unwrap();
        let vi = vi_scores(&t).unwrap();
        assert_eq!(vi.vi_split, 0.0);
        assert_eq!(vi.vi_merge, 0.0);
    }

    #[test]
    fn vi_merged_and_split_halves() {
        let (gt, prop) = merged_halves();
        let t = contingency(&gt, &prop, false).unwrap();
        let vi = vi_scores(&t).unwrap();
        assert!((vi.vi_split - 0.0).abs() < 1e-12);
        assert!((vi.vi_merge - 2.0f64.ln()).abs() < 1e-12);

        // The dual: swap the roles.
        let t = contingency(&prop, &gt, false).unwrap();
        let vi = vi_scores(&t).unwrap();
        assert!((vi.vi_split - 2.0f64.ln()).abs() < 1e-12);
        assert!((vi.vi_merge - 0.0).abs() < 1e-12);
    }

    #[test]
    fn vi_symmetric_under_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let shape = Shape3::new(8, 8, 2).unwrap();
            let a: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(1..5)).collect();
            let b: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(1..5)).collect();
            let gt = LabelVolume::new(shape, a, VoxelSize::default()).unwrap();
            let prop = LabelVolume::new(shape, b, VoxelSize::default()).unwrap();
            let vi = vi_scores(&contingency(&gt, &prop, false).unwrap()).unwrap();
            let swapped = vi_scores(&contingency(&prop, &gt, false).unwrap()).unwrap();
            assert!((vi.vi_split - swapped.vi_merge).abs() < 1e-12);
            assert!((vi.vi_merge - swapped.vi_split).abs() < 1e-12);
        }
    }

    #[test]
    fn merging_proposal_segments_never_increases_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let shape = Shape3::new(8, 8, 2).unwrap();
            let a: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(1..6)).collect();
            let b: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(1..6)).collect();
            let gt = LabelVolume::new(shape, a, VoxelSize::default()).unwrap();
            let prop = LabelVolume::new(shape, b.clone(), VoxelSize::default()).unwrap();
            // Merge proposal labels 1 and 2.
            let merged: Vec<u32> = b.iter().map(|&l| if l == 2 { 1 } else { l }).collect();
            let mvol = LabelVolume::new(shape, merged, VoxelSize::default()).unwrap();
            let before = vi_scores(&contingency(&gt, &prop, false).unwrap()).unwrap();
            let after = vi_scores(&contingency(&gt, &mvol, false).unwrap()).unwrap();
            assert!(after.vi_split <= before.vi_split + 1e-12);
        }
    }

    #[test]
    fn per_object_merged_halves() {
        let (gt, prop) = merged_halves();
        let t = contingency(&gt, &prop, false).unwrap();
        let per = per_object_vi(&t).unwrap();
        for s in &per.scores {
            assert!((s.vi_merge - 2.0f64.ln()).abs() < 1e-12);
            assert!((s.vi_split - 0.0).abs() < 1e-12);
            assert!((s.weight - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn per_object_exact_segment_scores_zero() {
        let gt = vol(&[1, 1, 2, 2], 4, 1, 1);
        let prop = vol(&[5, 5, 6, 6], 4, 1, 1);
        let per = per_object_vi(&contingency(&gt, &prop, false).unwrap()).unwrap();
        for s in &per.scores {
            assert_eq!(s.vi_split, 0.0);
            assert_eq!(s.vi_merge, 0.0);
        }
    }

    fn random_table(rng: &mut ChaCha8Rng, max_count: u64) -> ContingencyTable {
        let rows = rng.gen_range(2..8);
        let cols = rng.gen_range(2..8);
        let mut counts = Vec::new();
        for i in 1..=rows {
            for j in 1..=cols {
                if rng.gen_bool(0.6) {
                    counts.push(((i, j), rng.gen_range(1..=max_count)));
                }
            }
        }
        counts.push(((1, 1), 1)); // never empty
        ContingencyTable::from_counts(counts)
    }

    #[test]
    fn decomposition_identity_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let t = random_table(&mut rng, 50_000);
            let vi = vi_scores(&t).unwrap();
            let per = per_object_vi(&t).unwrap();
            let split: f64 = per.scores.iter().map(|s| s.weight * s.vi_split).sum();
            let merge: f64 = per.scores.iter().map(|s| s.weight * s.vi_merge).sum();
            assert!((split - vi.vi_split).abs() <= 1e-9);
            assert!((merge - vi.vi_merge).abs() <= 1e-9);
        }
    }

    #[test]
    fn rand_identical_and_halves() {
        let (gt, prop) = merged_halves();
        let r = rand_scores(&contingency(&gt, &gt, false).unwrap()).unwrap();
        assert_eq!((r.rand_recall, r.rand_precision), (1.0, 1.0));

        let r = rand_scores(&contingency(&gt, &prop, false).unwrap()).unwrap();
        assert!((r.rand_recall - 1.0).abs() < 1e-12);
        assert!((r.rand_precision - 0.5).abs() < 1e-12);

        let r = rand_scores(&contingency(&prop, &gt, false).unwrap()).unwrap();
        assert!((r.rand_recall - 0.5).abs() < 1e-12);
        assert!((r.rand_precision - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rand_matches_pair_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..10 {
            let shape = Shape3::new(6, 6, 2).unwrap();
            let a: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(0..4)).collect();
            let b: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(0..4)).collect();
            let gt = LabelVolume::new(shape, a, VoxelSize::default()).unwrap();
            let prop = LabelVolume::new(shape, b, VoxelSize::default()).unwrap();
            let t = match contingency(&gt, &prop, false) {
                Ok(t) if t.total() > 0 => t,
                _ => continue,
            };
            let r = rand_scores(&t).unwrap();
            let (recall, precision) = reference::pairwise_rand(&gt, &prop);
            assert!((r.rand_recall - recall).abs() < 1e-12);
            assert!((r.rand_precision - precision).abs() < 1e-12);
        }
    }

    #[test]
    fn point_error_counts() {
        let c = count_point_errors(&[true, true, false], &[false, true, true]).unwrap();
        assert_eq!(c.fixed, 1);
        assert_eq!(c.introduced, 1);
        assert_eq!(c.errors_after, 2);

        let c = count_point_errors(&[true, false], &[true, false]).unwrap();
        assert_eq!((c.fixed, c.introduced), (0, 0));

        assert!(count_point_errors(&[true], &[]).is_err());
    }

    #[test]
    fn point_error_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let n = rng.gen_range(1..100);
            let before: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let after: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let c = count_point_errors(&before, &after).unwrap();
            assert_eq!(
                c.fixed as i64 - c.introduced as i64,
                c.errors_before as i64 - c.errors_after as i64
            );
        }
    }

    #[test]
    fn pr_curve_perfect_and_constant() {
        let curve = pr_curve(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap();
        assert!(curve
            .iter()
            .any(|p| p.precision == 1.0 && p.recall == 1.0));

        let curve = pr_curve(&[0.5, 0.5, 0.5, 0.5], &[true, false, false, false]).unwrap();
        assert_eq!(curve.len(), 1);
        assert_eq!(curve[0].precision, 0.25);
        assert_eq!(curve[0].recall, 1.0);

        assert!(matches!(
            pr_curve(&[0.5], &[false]),
            Err(MetricsError::NoPositives)
        ));
    }
}

//! Supervoxel graph whose connected components define the current segmentation.
//!
//! Cuts can split components, so a plain union-find is not enough; components
//! are recomputed from the edge set after each batch of updates. Graphs here
//! are small (thousands of vertices), so the recompute cost is irrelevant.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume::{Box3, LabelVolume};

/// A supervoxel's id equals its label in the supervoxel volume; always > 0.
pub type SupervoxelId = u32;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vertex {0} is not a label in the supervoxel volume")]
    UnknownVertex(SupervoxelId),
    #[error("supervoxel id 0 is reserved for background")]
    ZeroVertex,
    #[error("graph JSON parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Undirected graph over supervoxel ids with a maintained component index.
///
/// The canonical component id is the minimum member id, which makes
/// [`SegmentationView::render_labels`] deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegGraph {
    vertices: BTreeSet<SupervoxelId>,
    edges: BTreeSet<(SupervoxelId, SupervoxelId)>,
    components: HashMap<SupervoxelId, SupervoxelId>,
}

fn norm_edge(a: SupervoxelId, b: SupervoxelId) -> (SupervoxelId, SupervoxelId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SegGraph {
    pub fn new(vertices: BTreeSet<SupervoxelId>) -> Result<Self, GraphError> {
        if vertices.contains(&0) {
            return Err(GraphError::ZeroVertex);
        }
        let mut g = SegGraph {
            vertices,
            edges: BTreeSet::new(),
            components: HashMap::new(),
        };
        g.recompute_components();
        Ok(g)
    }

    pub fn vertices(&self) -> &BTreeSet<SupervoxelId> {
        &self.vertices
    }

    pub fn edges(&self) -> &BTreeSet<(SupervoxelId, SupervoxelId)> {
        &self.edges
    }

    pub fn num_components(&self) -> usize {
        self.components.values().collect::<BTreeSet<_>>().len()
    }

    /// Canonical component id (minimum member) of a vertex.
    pub fn component_of(&self, v: SupervoxelId) -> Result<SupervoxelId, GraphError> {
        self.components
            .get(&v)
            .copied()
            .ok_or(GraphError::UnknownVertex(v))
    }

    /// Snapshot of the component index.
    pub fn component_index(&self) -> BTreeMap<SupervoxelId, SupervoxelId> {
        self.components.iter().map(|(&k, &v)| (k, v)).collect()
    }

    /// Vertices sharing a component with any of the given vertices.
    pub fn component_members(
        &self,
        seeds: &BTreeSet<SupervoxelId>,
    ) -> Result<BTreeSet<SupervoxelId>, GraphError> {
        let mut comps = BTreeSet::new();
        for &s in seeds {
            comps.insert(self.component_of(s)?);
        }
        Ok(self
            .vertices
            .iter()
            .copied()
            .filter(|&v| comps.contains(&self.components[&v]))
            .collect())
    }

    fn check_vertices<'a>(
        &self,
        ids: impl IntoIterator<Item = &'a SupervoxelId>,
    ) -> Result<(), GraphError> {
        for &v in ids {
            if !self.vertices.contains(&v) {
                return Err(GraphError::UnknownVertex(v));
            }
        }
        Ok(())
    }

    /// Insert every edge of a clique on `ids` and refresh components.
    pub fn add_clique(&mut self, ids: &BTreeSet<SupervoxelId>) -> Result<usize, GraphError> {
        self.check_vertices(ids)?;
        let before = self.edges.len();
        let v: Vec<_> = ids.iter().copied().collect();
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                self.edges.insert(norm_edge(v[i], v[j]));
            }
        }
        let added = self.edges.len() - before;
        if added > 0 {
            self.recompute_components();
        }
        Ok(added)
    }

    /// Remove every edge with one endpoint in `a` and the other in `b`.
    /// Edges within `a` or within `b` are untouched.
    pub fn cut_between(
        &mut self,
        a: &BTreeSet<SupervoxelId>,
        b: &BTreeSet<SupervoxelId>,
    ) -> Result<usize, GraphError> {
        self.check_vertices(a.iter().chain(b.iter()))?;
        let before = self.edges.len();
        self.edges.retain(|&(x, y)| {
            !((a.contains(&x) && b.contains(&y)) || (a.contains(&y) && b.contains(&x)))
        });
        let removed = before - self.edges.len();
        if removed > 0 {
            self.recompute_components();
        }
        Ok(removed)
    }

    /// Apply a clique insertion and a cut as one atomic update with a single
    /// component refresh. Returns (edges added, edges removed).
    pub fn apply_decision(
        &mut self,
        merge: &BTreeSet<SupervoxelId>,
        cut: &BTreeSet<SupervoxelId>,
    ) -> Result<(usize, usize), GraphError> {
        self.check_vertices(merge.iter().chain(cut.iter()))?;
        let before = self.edges.len();
        let v: Vec<_> = merge.iter().copied().collect();
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                self.edges.insert(norm_edge(v[i], v[j]));
            }
        }
        let added = self.edges.len() - before;
        let mid = self.edges.len();
        self.edges.retain(|&(x, y)| {
            !((cut.contains(&x) && merge.contains(&y)) || (cut.contains(&y) && merge.contains(&x)))
        });
        let removed = mid - self.edges.len();
        if added > 0 || removed > 0 {
            self.recompute_components();
        }
        Ok((added, removed))
    }

    fn recompute_components(&mut self) {
        // Union-find over the current edge set, then canonicalize each root
        // to the minimum member id.
        let idx: HashMap<SupervoxelId, usize> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i))
            .collect();
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, idx[&a]), find(&mut parent, idx[&b]));
            if ra != rb {
                parent[ra] = rb;
            }
        }
        let verts: Vec<SupervoxelId> = self.vertices.iter().copied().collect();
        let mut canon: HashMap<usize, SupervoxelId> = HashMap::new();
        for (i, &v) in verts.iter().enumerate() {
            let r = find(&mut parent, i);
            let e = canon.entry(r).or_insert(v);
            if v < *e {
                *e = v;
            }
        }
        self.components = verts
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, canon[&find(&mut parent, i)]))
            .collect();
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            vertices: self.vertices.iter().copied().collect(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("graph serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text)?;
        let mut g = SegGraph::new(file.vertices.into_iter().collect())?;
        for [a, b] in file.edges {
            g.check_vertices([&a, &b])?;
            g.edges.insert(norm_edge(a, b));
        }
        g.recompute_components();
        Ok(g)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    vertices: Vec<SupervoxelId>,
    edges: Vec<[SupervoxelId; 2]>,
}

/// A supervoxel volume together with the graph over its labels.
#[derive(Debug, Clone)]
pub struct SegmentationView {
    pub supervoxels: LabelVolume,
    pub graph: SegGraph,
}

impl SegmentationView {
    pub fn new(supervoxels: LabelVolume, graph: SegGraph) -> Result<Self, GraphError> {
        for &l in &supervoxels.labels() {
            if !graph.vertices().contains(&l) {
                return Err(GraphError::UnknownVertex(l));
            }
        }
        Ok(SegmentationView { supervoxels, graph })
    }

    /// Relabel every voxel with the canonical component id of its supervoxel.
    pub fn render_labels(&self) -> LabelVolume {
        let map: HashMap<SupervoxelId, SupervoxelId> = self
            .graph
            .component_index()
            .into_iter()
            .collect();
        let mut out = self.supervoxels.clone();
        for v in out.data_mut() {
            if *v != 0 {
                *v = map[v];
            }
        }
        out
    }

    /// Component ids of segments with at least one voxel in `region`.
    pub fn segments_touching(&self, region: &Box3) -> BTreeSet<SupervoxelId> {
        let mut out = BTreeSet::new();
        if let Some(b) = region.intersect(&self.supervoxels.shape.bounds()) {
            for p in b.iter() {
                let l = self.supervoxels.get(p);
                if l != 0 {
                    out.insert(self.graph.component_of(l).expect("view consistency"));
                }
            }
        }
        out
    }
}

/// Build the graph from a supervoxel volume plus an initial edge list.
pub fn build_graph(
    supervoxels: &LabelVolume,
    initial_merges: &[(SupervoxelId, SupervoxelId)],
) -> Result<SegGraph, GraphError> {
    let mut g = SegGraph::new(supervoxels.labels())?;
    for &(a, b) in initial_merges {
        g.check_vertices([&a, &b])?;
        g.edges.insert(norm_edge(a, b));
    }
    g.recompute_components();
    Ok(g)
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

    fn set(ids: &[u32]) -> BTreeSet<u32> {
        ids.iter().copied().collect()
    }

    fn assert_matches_bfs(g: &SegGraph) {
        let oracle = reference::connected_components(g.vertices(), g.edges());
        assert_eq!(g.component_index(), oracle);
    }

    #[test]
    fn build_graph_components() {
        let v = vol(&[1, 2, 3, 0], 4, 1, 1);
        let g = build_graph(&v, &[]).unwrap();
        assert_eq!(g.num_components(), 3);
        let g = build_graph(&v, &[(1, 2)]).unwrap();
        assert_eq!(g.num_components(), 2);
        assert_eq!(g.component_of(2).unwrap(), 1);
        assert_eq!(g.component_of(3).unwrap(), 3);
    }

    #[test]
    fn build_graph_rejects_unknown_endpoint() {
        let v = vol(&[1, 2, 3, 0], 4, 1, 1);
        assert!(matches!(
            build_graph(&v, &[(1, 9)]),
            Err(GraphError::UnknownVertex(9))
        ));
    }

    #[test]
    fn clique_merges_and_singleton_is_noop() {
        let v = vol(&[1, 2, 3, 0], 4, 1, 1);
        let mut g = build_graph(&v, &[]).unwrap();
        g.add_clique(&set(&[1, 2, 3])).unwrap();
        assert_eq!(g.num_components(), 1);
        assert_eq!(g.edges().len(), 3);
        let before = g.clone();
        g.add_clique(&set(&[2])).unwrap();
        assert_eq!(g, before);
    }

    #[test]
    fn cut_between_splits() {
        let v = vol(&[1, 2, 0, 0], 4, 1, 1);
        let mut g = build_graph(&v, &[(1, 2)]).unwrap();
        g.cut_between(&set(&[1]), &set(&[2])).unwrap();
        assert_eq!(g.num_components(), 2);
    }

    #[test]
    fn cut_between_non_adjacent_is_noop() {
        let v = vol(&[1, 2, 3, 4], 4, 1, 1);
        let mut g = build_graph(&v, &[(1, 2), (3, 4)]).unwrap();
        let before = g.clone();
        g.cut_between(&set(&[1]), &set(&[4])).unwrap();
        assert_eq!(g, before);
    }

    #[test]
    fn random_updates_match_bfs_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..30 {
            let n = 20u32;
            let labels: Vec<u32> = (1..=n).collect();
            let v = vol(&labels, 20, 1, 1);
            let mut edges = Vec::new();
            for _ in 0..rng.gen_range(0..30) {
                edges.push((rng.gen_range(1..=n), rng.gen_range(1..=n)));
            }
            let edges: Vec<_> = edges.into_iter().filter(|(a, b)| a != b).collect();
            let mut g = build_graph(&v, &edges).unwrap();
            assert_matches_bfs(&g);
            for _ in 0..5 {
                let comps_before = g.num_components();
                if rng.gen_bool(0.5) {
                    let ids: BTreeSet<u32> =
                        (0..rng.gen_range(1..5)).map(|_| rng.gen_range(1..=n)).collect();
                    g.add_clique(&ids).unwrap();
                    assert!(g.num_components() <= comps_before);
                } else {
                    let a: BTreeSet<u32> =
                        (0..rng.gen_range(1..5)).map(|_| rng.gen_range(1..=n)).collect();
                    let b: BTreeSet<u32> =
                        (0..rng.gen_range(1..5)).map(|_| rng.gen_range(1..=n)).collect();
                    g.cut_between(&a, &b).unwrap();
                    assert!(g.num_components() >= comps_before);
                }
                assert_matches_bfs(&g);
            }
        }
    }

    #[test]
    fn render_labels_identity_without_edges() {
        let v = vol(&[1, 2, 0, 3], 4, 1, 1);
        let view = SegmentationView::new(v.clone(), build_graph(&v, &[]).unwrap()).unwrap();
        assert_eq!(view.render_labels(), v);
    }

    #[test]
    fn render_labels_after_merge() {
        let v = vol(&[1, 2, 0, 3], 4, 1, 1);
        let view = SegmentationView::new(v, build_graph_vol(&[1, 2, 0, 3], &[(1, 2)])).unwrap();
        let r = view.render_labels();
        assert_eq!(r.data(), &[1, 1, 0, 3]);
    }

    fn build_graph_vol(labels: &[u32], edges: &[(u32, u32)]) -> SegGraph {
        let v = vol(labels, labels.len(), 1, 1);
        build_graph(&v, edges).unwrap()
    }

    #[test]
    fn render_partition_matches_component_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let shape = Shape3::new(8, 8, 2).unwrap();
            let data: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(0..9)).collect();
            let v = LabelVolume::new(shape, data, VoxelSize::default()).unwrap();
            let labels: Vec<u32> = v.labels().into_iter().collect();
            if labels.len() < 2 {
                continue;
            }
            let mut edges = Vec::new();
            for _ in 0..4 {
                let a = labels[rng.gen_range(0..labels.len())];
                let b = labels[rng.gen_range(0..labels.len())];
                if a != b {
                    edges.push((a, b));
                }
            }
            let g = build_graph(&v, &edges).unwrap();
            let view = SegmentationView::new(v.clone(), g.clone()).unwrap();
            let r = view.render_labels();
            for p in shape.iter() {
                let l = v.get(p);
                if l == 0 {
                    assert_eq!(r.get(p), 0);
                } else {
                    assert_eq!(r.get(p), g.component_of(l).unwrap());
                }
            }
        }
    }

    #[test]
    fn segments_touching_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let shape = Shape3::new(10, 10, 4).unwrap();
        let data: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(0..5)).collect();
        let v = LabelVolume::new(shape, data, VoxelSize::default()).unwrap();
        let g = build_graph(&v, &[(1, 2)]).unwrap();
        let view = SegmentationView::new(v.clone(), g.clone()).unwrap();

        let all = view.segments_touching(&shape.bounds());
        let expected: BTreeSet<u32> = v
            .labels()
            .into_iter()
            .map(|l| g.component_of(l).unwrap())
            .collect();
        assert_eq!(all, expected);

        for _ in 0..20 {
            let min = [
                rng.gen_range(0..10) as i64,
                rng.gen_range(0..10) as i64,
                rng.gen_range(0..4) as i64,
            ];
            let max = [
                rng.gen_range(min[0] + 1..=10),
                rng.gen_range(min[1] + 1..=10),
                rng.gen_range(min[2] + 1..=4),
            ];
            let b = Box3::new(min, max).unwrap();
            let mut scan = BTreeSet::new();
            for p in b.iter() {
                let l = v.get(p);
                if l != 0 {
                    scan.insert(g.component_of(l).unwrap());
                }
            }
            assert_eq!(view.segments_touching(&b), scan);
        }
    }

    #[test]
    fn segments_touching_background_box_is_empty() {
        let v = vol(&[0, 0, 1, 1], 4, 1, 1);
        let view = SegmentationView::new(v.clone(), build_graph(&v, &[]).unwrap()).unwrap();
        let b = Box3::new([0, 0, 0], [2, 1, 1]).unwrap();
        assert!(view.segments_touching(&b).is_empty());
    }

    #[test]
    fn json_round_trip() {
        let g = build_graph_vol(&[1, 2, 3, 4], &[(1, 2), (3, 4)]);
        let text = g.to_json();
        let back = SegGraph::from_json(&text).unwrap();
        assert_eq!(g, back);
    }
}

//! The bipartite camera / object measurement graph and the block operators
//! assembled from it.

mod assemble;
mod block;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use nalgebra::Vector3;

pub(crate) use assemble::accumulate_power_operator;
pub use assemble::{
    degree_matrix, invert_dual_block, merge_object_blocks, power_graph_adjacency,
    power_graph_operator, MergedBlocks,
};
pub use block::{BlockMatrix33, ScalarCsr};

use crate::error::{Error, Result};
use crate::geom::{NoiseParams, Pose, Rotation};

pub type CameraId = usize;
pub type MarkerId = usize;
pub type TimeIndex = usize;

/// One camera-to-marker relative pose measurement at a given time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeMeasurement {
    pub cam: CameraId,
    pub marker: MarkerId,
    pub time: TimeIndex,
    /// Measured rotation of the marker frame relative to the camera.
    pub r_meas: Rotation,
    /// Measured translation, meters.
    pub t_meas: Vector3<f64>,
    pub noise: NoiseParams,
}

impl EdgeMeasurement {
    pub fn pose(&self) -> Pose {
        Pose::new(self.r_meas, self.t_meas)
    }
}

/// Rigid object: transforms from the reference marker frame to every marker.
///
/// The first marker is the reference and maps to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectModel {
    markers: Vec<MarkerId>,
    rel: BTreeMap<MarkerId, Pose>,
}

impl ObjectModel {
    /// Object made of a single marker.
    pub fn single(marker: MarkerId) -> Self {
        ObjectModel {
            markers: vec![marker],
            rel: BTreeMap::from([(marker, Pose::identity())]),
        }
    }

    /// Builds a model from `(marker, P̄_{m,m1})` pairs, reference first.
    pub fn new(entries: Vec<(MarkerId, Pose)>) -> Result<Self> {
        let Some((_, first)) = entries.first() else {
            return Err(Error::Shape("object model has no markers".into()));
        };
        let id = Pose::identity();
        if (first.to_homogeneous() - id.to_homogeneous()).norm() > 1e-9 {
            return Err(Error::Shape(
                "reference marker must map to the identity".into(),
            ));
        }
        let mut markers = Vec::with_capacity(entries.len());
        let mut rel = BTreeMap::new();
        for (m, p) in entries {
            if rel.insert(m, p).is_some() {
                return Err(Error::Shape(format!("marker {m} listed twice")));
            }
            markers.push(m);
        }
        Ok(ObjectModel { markers, rel })
    }

    pub fn reference(&self) -> MarkerId {
        self.markers[0]
    }

    /// Marker ids, reference first.
    pub fn markers(&self) -> &[MarkerId] {
        &self.markers
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    /// `P̄_{m,m1}`.
    pub fn relative(&self, marker: MarkerId) -> Option<&Pose> {
        self.rel.get(&marker)
    }

    /// `(marker, P̄_{m,m1})` in listing order.
    pub fn iter(&self) -> impl Iterator<Item = (MarkerId, &Pose)> {
        self.markers.iter().map(|m| (*m, &self.rel[m]))
    }
}

/// Bipartite measurement graph. Cameras and times are ordered by id; their
/// positions in these lists are the block indices used by every operator.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementGraph {
    cameras: Vec<CameraId>,
    times: Vec<TimeIndex>,
    edges: Vec<EdgeMeasurement>,
    object: ObjectModel,
    cam_index: HashMap<CameraId, usize>,
    time_index: HashMap<TimeIndex, usize>,
}

impl MeasurementGraph {
    /// Graph whose node sets are exactly those referenced by `edges`.
    pub fn new(edges: Vec<EdgeMeasurement>, object: ObjectModel) -> Result<Self> {
        let cameras: BTreeSet<_> = edges.iter().map(|e| e.cam).collect();
        let times: BTreeSet<_> = edges.iter().map(|e| e.time).collect();
        Self::with_nodes(
            cameras.into_iter().collect(),
            times.into_iter().collect(),
            edges,
            object,
        )
    }

    /// Graph with explicit node sets, which may include unobserved nodes.
    pub fn with_nodes(
        mut cameras: Vec<CameraId>,
        mut times: Vec<TimeIndex>,
        edges: Vec<EdgeMeasurement>,
        object: ObjectModel,
    ) -> Result<Self> {
        cameras.sort_unstable();
        cameras.dedup();
        times.sort_unstable();
        times.dedup();
        let cam_index: HashMap<_, _> = cameras.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let time_index: HashMap<_, _> = times.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        let mut seen = HashSet::with_capacity(edges.len());
        for e in &edges {
            if !cam_index.contains_key(&e.cam) {
                return Err(Error::UnknownCamera(e.cam));
            }
            if !time_index.contains_key(&e.time) {
                return Err(Error::Shape(format!(
                    "edge references unknown time {}",
                    e.time
                )));
            }
            if !seen.insert((e.cam, e.marker, e.time)) {
                return Err(Error::DuplicateEdge {
                    cam: e.cam,
                    marker: e.marker,
                    time: e.time,
                });
            }
        }
        Ok(MeasurementGraph {
            cameras,
            times,
            edges,
            object,
            cam_index,
            time_index,
        })
    }

    pub fn cameras(&self) -> &[CameraId] {
        &self.cameras
    }

    pub fn times(&self) -> &[TimeIndex] {
        &self.times
    }

    pub fn edges(&self) -> &[EdgeMeasurement] {
        &self.edges
    }

    pub fn object(&self) -> &ObjectModel {
        &self.object
    }

    pub fn num_cameras(&self) -> usize {
        self.cameras.len()
    }

    pub fn num_times(&self) -> usize {
        self.times.len()
    }

    pub fn camera_index(&self, cam: CameraId) -> Option<usize> {
        self.cam_index.get(&cam).copied()
    }

    pub fn time_index(&self, time: TimeIndex) -> Option<usize> {
        self.time_index.get(&time).copied()
    }

    /// Copy of this graph with extra edges appended.
    pub fn with_edges(&self, extra: &[EdgeMeasurement]) -> Result<Self> {
        let mut edges = self.edges.clone();
        edges.extend_from_slice(extra);
        let mut times = self.times.clone();
        times.extend(extra.iter().map(|e| e.time));
        let mut cameras = self.cameras.clone();
        cameras.extend(extra.iter().map(|e| e.cam));
        Self::with_nodes(cameras, times, edges, self.object.clone())
    }

    /// Edges grouped by time id, in time order.
    pub fn edges_by_time(&self) -> Vec<(TimeIndex, Vec<EdgeMeasurement>)> {
        let mut groups: BTreeMap<TimeIndex, Vec<EdgeMeasurement>> = BTreeMap::new();
        for e in &self.edges {
            groups.entry(e.time).or_default().push(*e);
        }
        groups.into_iter().collect()
    }

    /// Whether every node is reachable through rotation-carrying edges.
    pub fn is_connected(&self) -> bool {
        let (c, t) = (self.num_cameras(), self.num_times());
        if c + t == 0 {
            return false;
        }
        let mut parent: Vec<usize> = (0..c + t).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in self.edges.iter().filter(|e| e.noise.kappa > 0.0) {
            let a = find(&mut parent, self.cam_index[&e.cam]);
            let b = find(&mut parent, c + self.time_index[&e.time]);
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        (0..c + t).all(|x| find(&mut parent, x) == root)
    }
}

/// Nodes dropped by [`prune`]; retained nodes keep their ids and are
/// re-indexed by position.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PruneReport {
    pub removed_cameras: Vec<CameraId>,
    pub removed_times: Vec<TimeIndex>,
}

impl PruneReport {
    pub fn is_empty(&self) -> bool {
        self.removed_cameras.is_empty() && self.removed_times.is_empty()
    }
}

/// Removes cameras and time steps that carry no rotation weight, together
/// with their edges.
pub fn prune(g: &MeasurementGraph) -> Result<(MeasurementGraph, PruneReport)> {
    let mut cam_weight = vec![0.0f64; g.num_cameras()];
    let mut time_weight = vec![0.0f64; g.num_times()];
    for e in g.edges.iter().filter(|e| e.noise.kappa > 0.0) {
        cam_weight[g.cam_index[&e.cam]] += e.noise.kappa;
        time_weight[g.time_index[&e.time]] += e.noise.kappa;
    }
    let mut report = PruneReport::default();
    let cameras: Vec<_> = g
        .cameras
        .iter()
        .zip(&cam_weight)
        .filter_map(|(c, w)| {
            if *w > 0.0 {
                Some(*c)
            } else {
                report.removed_cameras.push(*c);
                None
            }
        })
        .collect();
    let times: Vec<_> = g
        .times
        .iter()
        .zip(&time_weight)
        .filter_map(|(t, w)| {
            if *w > 0.0 {
                Some(*t)
            } else {
                report.removed_times.push(*t);
                None
            }
        })
        .collect();
    if cameras.is_empty() || times.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let keep_c: HashSet<_> = cameras.iter().copied().collect();
    let keep_t: HashSet<_> = times.iter().copied().collect();
    let edges = g
        .edges
        .iter()
        .filter(|e| keep_c.contains(&e.cam) && keep_t.contains(&e.time))
        .copied()
        .collect();
    let pruned = MeasurementGraph::with_nodes(cameras, times, edges, g.object.clone())?;
    Ok((pruned, report))
}

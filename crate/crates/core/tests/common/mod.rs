#![allow(dead_code)]

use bipgo::blockgraph::{EdgeMeasurement, MeasurementGraph, ObjectModel};
use bipgo::geom::{
    compose, relative, sample_gaussian_translation, sample_langevin, NoiseParams, Pose, Rotation,
};
use nalgebra::Vector3;
use rand::Rng;

pub fn random_pose<R: Rng>(rng: &mut R, spread: f64) -> Pose {
    let t = Vector3::from_fn(|_, _| rng.random_range(-spread..spread));
    Pose::new(Rotation::random(rng), t)
}

/// A random rig with `markers` markers, ids `1..=markers`, reference 1.
pub fn random_object<R: Rng>(rng: &mut R, markers: usize) -> ObjectModel {
    let mut entries = vec![(1, Pose::identity())];
    entries.extend((2..=markers).map(|m| (m, random_pose(rng, 0.5))));
    ObjectModel::new(entries).unwrap()
}

pub struct Scene {
    pub graph: MeasurementGraph,
    pub cams: Vec<Pose>,
    pub objs: Vec<Pose>,
}

/// Connected random bipartite scene. Every time step sees camera
/// `t % nc`; other (camera, marker, time) triples appear with probability
/// `p`. `noise = None` gives exact measurements with unit weights.
pub fn random_scene<R: Rng>(
    rng: &mut R,
    nc: usize,
    nt: usize,
    object: &ObjectModel,
    p: f64,
    noise: Option<(f64, f64)>,
) -> Scene {
    loop {
        let cams: Vec<Pose> = (0..nc).map(|_| random_pose(rng, 5.0)).collect();
        let objs: Vec<Pose> = (0..nt).map(|_| random_pose(rng, 5.0)).collect();
        let mut edges = Vec::new();
        for (t, op) in objs.iter().enumerate() {
            for (c, cp) in cams.iter().enumerate() {
                for (m, rel) in object.iter() {
                    let forced = c == t % nc && m == object.reference();
                    if !forced && !rng.random_bool(p) {
                        continue;
                    }
                    let truth = relative(cp, &compose(rel, op));
                    let (r_meas, t_meas, params) = match noise {
                        Some((kappa, tau)) => (
                            sample_langevin(&truth.r, kappa, rng),
                            sample_gaussian_translation(&truth.t, tau, rng),
                            NoiseParams::new(kappa, tau),
                        ),
                        None => (truth.r, truth.t, NoiseParams::new(1.0, 1.0)),
                    };
                    edges.push(EdgeMeasurement {
                        cam: c,
                        marker: m,
                        time: t,
                        r_meas,
                        t_meas,
                        noise: params,
                    });
                }
            }
        }
        let graph = MeasurementGraph::new(edges, object.clone()).unwrap();
        if graph.num_cameras() == nc && graph.is_connected() {
            return Scene { graph, cams, objs };
        }
    }
}

/// Negative log-likelihood summed literally over every (camera, marker,
/// time) edge, up to constants.
pub fn nll_per_edge(g: &MeasurementGraph, cams: &[Pose], objs: &[Pose]) -> f64 {
    let mut total = 0.0;
    for e in g.edges() {
        let c = cams[g.camera_index(e.cam).unwrap()];
        let o = objs[g.time_index(e.time).unwrap()];
        let m = compose(g.object().relative(e.marker).unwrap(), &o);
        let pred = relative(&c, &m);
        total += 0.5 * e.noise.tau * (e.t_meas - pred.t).norm_squared();
        total -=
            e.noise.kappa * (e.r_meas.matrix() * m.r.matrix() * c.r.matrix().transpose()).trace();
    }
    total
}

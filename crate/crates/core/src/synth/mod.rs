//! Synthetic camera networks observing a moving rigid marker rig.

mod config;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{NoiseModel, ObjectSource, SceneConfig, Visibility, PRESETS};

use crate::blockgraph::{EdgeMeasurement, MarkerId, MeasurementGraph, ObjectModel};
use crate::error::{Error, Result};
use crate::geom::{
    compose, inverse, relative, sample_gaussian_translation, sample_langevin, NoiseParams, Pose,
    Rotation, KAPPA_NOISELESS, TAU_NOISELESS,
};
use crate::io::PoseSet;

pub const CUBE_SIDE: f64 = 0.575;
pub const CUBE_MARKER_SIDE: f64 = 0.276;
const MAX_PLACEMENT_ATTEMPTS: usize = 100;

/// Latent poses (world to local) of every camera and of the reference marker
/// at every time step.
pub type GroundTruth = PoseSet;

/// Marker-to-body poses of the cube: four markers per face in a 2x2 layout,
/// `z` along the outward normal. Ids run 1..=24.
pub fn cube_layout() -> Vec<(MarkerId, Pose)> {
    let h = CUBE_SIDE / 2.0;
    let q = CUBE_SIDE / 4.0;
    let mut out = Vec::with_capacity(24);
    let faces = [
        (Vector3::x(), Vector3::y()),
        (-Vector3::x(), -Vector3::y()),
        (Vector3::y(), -Vector3::x()),
        (-Vector3::y(), Vector3::x()),
        (Vector3::z(), Vector3::x()),
        (-Vector3::z(), -Vector3::x()),
    ];
    for (normal, u) in faces {
        let v = normal.cross(&u);
        let r = Rotation::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[u, v, normal]));
        for (a, b) in [(-q, -q), (q, -q), (-q, q), (q, q)] {
            let center = normal * h + u * a + v * b;
            out.push((out.len() + 1, Pose::new(r, center)));
        }
    }
    out
}

/// The 24-marker cube with marker 1 as reference.
pub fn builtin_cube() -> ObjectModel {
    let layout = cube_layout();
    let b1 = layout[0].1;
    let entries = layout
        .iter()
        .map(|(m, b)| {
            (
                *m,
                if *m == 1 {
                    Pose::identity()
                } else {
                    relative(&inverse(b), &inverse(&b1))
                },
            )
        })
        .collect();
    ObjectModel::new(entries).expect("cube layout is a valid object model")
}

/// Marker centers and outward normals in world coordinates for a marker
/// with world-to-local pose `p`.
fn marker_geometry(p: &Pose) -> (Vector3<f64>, Vector3<f64>) {
    let rt = p.r.transpose();
    (-rt.rotate(&p.t), rt.rotate(&Vector3::z()))
}

fn camera_center(p: &Pose) -> Vector3<f64> {
    -p.r.transpose().rotate(&p.t)
}

/// World-to-camera pose of a camera at `center` whose optical (`z`) axis
/// points along `forward`.
pub fn look_along(center: &Vector3<f64>, forward: &Vector3<f64>) -> Pose {
    let z = forward.normalize();
    let a = if z.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let x = (a - z * a.dot(&z)).normalize();
    let y = z.cross(&x);
    let r = Rotation::from_matrix_unchecked(nalgebra::Matrix3::from_rows(&[
        x.transpose(),
        y.transpose(),
        z.transpose(),
    ]));
    Pose::new(r, -r.rotate(center))
}

fn jitter<R: Rng>(dir: &Vector3<f64>, max_deg: f64, rng: &mut R) -> Vector3<f64> {
    if max_deg <= 0.0 {
        return *dir;
    }
    let axis = Rotation::random(rng).rotate(&Vector3::x());
    let angle = rng.random::<f64>() * max_deg.to_radians();
    Rotation::from_axis_angle(&axis, angle).rotate(dir)
}

fn visible(cam: &Pose, marker: &Pose, vis: &Visibility) -> Option<f64> {
    let o = camera_center(cam);
    let (c, n) = marker_geometry(marker);
    let to_cam = o - c;
    let d = to_cam.norm();
    if d > vis.max_range || d == 0.0 {
        return None;
    }
    if n.dot(&to_cam) / d < vis.max_view_angle_deg.to_radians().cos() {
        return None;
    }
    let axis = cam.r.transpose().rotate(&Vector3::z());
    if axis.dot(&(-to_cam)) / d < (vis.fov_deg / 2.0).to_radians().cos() {
        return None;
    }
    Some(d)
}

fn measure<R: Rng>(
    cam: &Pose,
    marker: &Pose,
    d: f64,
    noise: &NoiseModel,
    rng: &mut R,
) -> (Pose, NoiseParams) {
    let truth = relative(cam, marker);
    let att = noise.attenuation(d);
    let params = NoiseParams::new(noise.kappa * att, noise.tau * att);
    let r = if noise.kappa >= KAPPA_NOISELESS {
        truth.r
    } else {
        sample_langevin(&truth.r, params.kappa, rng)
    };
    let t = if noise.tau >= TAU_NOISELESS {
        truth.t
    } else {
        sample_gaussian_translation(&truth.t, params.tau, rng)
    };
    (Pose::new(r, t), params)
}

/// Random stream `k` of the generator seeded with `seed`.
fn stream_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Ceiling-mounted cameras on a regular grid, each looking down and
/// somewhat toward the middle of the room.
pub fn camera_grid(cfg: &SceneConfig) -> Vec<Pose> {
    let mut rng = stream_rng(cfg.seed, 0);
    let (rows, cols) = cfg.grid;
    let mid = Vector3::new(cfg.room.x / 2.0, cfg.room.y / 2.0, 0.0);
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let center = Vector3::new(
                (i as f64 + 0.5) * cfg.room.x / rows as f64,
                (j as f64 + 0.5) * cfg.room.y / cols as f64,
                cfg.camera_height,
            );
            let ground = Vector3::new(center.x, center.y, 0.0);
            let target = ground * 0.6 + mid * 0.4;
            let forward = jitter(&(target - center), cfg.orientation_jitter_deg, &mut rng);
            out.push(look_along(&center, &forward));
        }
    }
    out
}

/// Samples one object placement: Haar orientation, rig centroid uniform in
/// the room shrunk by the rig radius (and kept below the cameras).
fn sample_object_pose<R: Rng>(
    cfg: &SceneConfig,
    centroid: &Vector3<f64>,
    radius: f64,
    rng: &mut R,
) -> Pose {
    let r = Rotation::random(rng);
    let margin = radius + 0.05;
    let top = (cfg.camera_height - 0.3 - margin).max(margin);
    let lo = Vector3::new(margin, margin, margin);
    let hi = Vector3::new(
        (cfg.room.x - margin).max(margin),
        (cfg.room.y - margin).max(margin),
        top,
    );
    let p = Vector3::from_fn(|k, _| lo[k] + rng.random::<f64>() * (hi[k] - lo[k]));
    // x_local = R x_world + t, with the centroid mapped to `centroid`.
    Pose::new(r, centroid - r.rotate(&p))
}

/// Centroid and radius of the marker centers in the reference-marker frame.
fn rig_extent(object: &ObjectModel) -> (Vector3<f64>, f64) {
    let centers: Vec<Vector3<f64>> = object
        .iter()
        .map(|(_, rel)| marker_geometry(rel).0)
        .collect();
    let centroid = centers.iter().sum::<Vector3<f64>>() / centers.len() as f64;
    let radius = centers
        .iter()
        .map(|c| (c - centroid).norm())
        .fold(0.0, f64::max);
    (centroid, radius)
}

/// Generates ground truth and measurements with the configured object,
/// which must be the builtin cube; use [`generate_scene_with`] for others.
pub fn generate_scene(cfg: &SceneConfig) -> Result<(GroundTruth, MeasurementGraph)> {
    match &cfg.object {
        ObjectSource::BuiltinCube => generate_scene_with(cfg, &builtin_cube()),
        ObjectSource::File(p) => Err(Error::BadConfig {
            line: 0,
            field: "object".into(),
            msg: format!("object file {p:?} must be loaded by the caller"),
        }),
    }
}

pub fn generate_scene_with(
    cfg: &SceneConfig,
    object: &ObjectModel,
) -> Result<(GroundTruth, MeasurementGraph)> {
    cfg.validate()?;
    let cams = camera_grid(cfg);
    let (centroid, radius) = rig_extent(object);
    let steps: Vec<(Pose, Vec<EdgeMeasurement>)> = (0..cfg.times)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(cfg.seed, t as u64 + 1);
            // Placements that no camera sees are redrawn a bounded number of times.
            let mut attempt = 0;
            loop {
                let obj = sample_object_pose(cfg, &centroid, radius, &mut rng);
                let mut edges = Vec::new();
                for (c, cam) in cams.iter().enumerate() {
                    for (m, rel) in object.iter() {
                        let marker = compose(rel, &obj);
                        let Some(d) = visible(cam, &marker, &cfg.visibility) else {
                            continue;
                        };
                        if rng.random::<f64>() < cfg.visibility.dropout {
                            continue;
                        }
                        let (meas, noise) = measure(cam, &marker, d, &cfg.noise, &mut rng);
                        edges.push(EdgeMeasurement {
                            cam: c,
                            marker: m,
                            time: t,
                            r_meas: meas.r,
                            t_meas: meas.t,
                            noise,
                        });
                    }
                }
                attempt += 1;
                if !edges.is_empty() || attempt >= MAX_PLACEMENT_ATTEMPTS {
                    break (obj, edges);
                }
            }
        })
        .collect();
    let objects = steps
        .iter()
        .enumerate()
        .map(|(t, (p, _))| (t, *p))
        .collect();
    let edges: Vec<EdgeMeasurement> = steps.into_iter().flat_map(|(_, e)| e).collect();
    if edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let truth = GroundTruth {
        cameras: cams.into_iter().enumerate().collect(),
        objects,
    };
    Ok((truth, MeasurementGraph::new(edges, object.clone())?))
}

/// Views of a static rig from one moving camera.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationViews {
    /// Edges with `cam = 0` and `time` = view index.
    pub edges: Vec<EdgeMeasurement>,
    /// World-to-camera pose per view.
    pub camera_poses: Vec<Pose>,
    /// World-to-marker poses; the world frame is the reference marker's.
    pub marker_poses: Vec<(MarkerId, Pose)>,
}

/// Visibility used for calibration views.
pub const CALIBRATION_VISIBILITY: Visibility = Visibility {
    max_range: 3.0,
    max_view_angle_deg: 75.0,
    fov_deg: 90.0,
    dropout: 0.0,
};

/// Camera positions are uniform on shells of radius 1.2 to 2.5 m around the
/// rig centroid, looking at it with a few degrees of jitter.
pub fn generate_calibration_views(
    object: &ObjectModel,
    num_views: usize,
    noise: &NoiseModel,
    seed: u64,
) -> Result<CalibrationViews> {
    if num_views == 0 {
        return Err(Error::Shape("need at least one view".into()));
    }
    let (centroid, _) = rig_extent(object);
    let marker_poses: Vec<(MarkerId, Pose)> = object.iter().map(|(m, p)| (m, *p)).collect();
    let views: Vec<(Pose, Vec<EdgeMeasurement>)> = (0..num_views)
        .into_par_iter()
        .map(|v| {
            let mut rng = stream_rng(seed, v as u64);
            let dir = Rotation::random(&mut rng).rotate(&Vector3::z());
            let radius = 1.2 + 1.3 * rng.random::<f64>();
            let center = centroid + dir * radius;
            let cam = look_along(&center, &jitter(&-dir, 3.0, &mut rng));
            let mut edges = Vec::new();
            for (m, marker) in &marker_poses {
                if let Some(d) = visible(&cam, marker, &CALIBRATION_VISIBILITY) {
                    let (meas, params) = measure(&cam, marker, d, noise, &mut rng);
                    edges.push(EdgeMeasurement {
                        cam: 0,
                        marker: *m,
                        time: v,
                        r_meas: meas.r,
                        t_meas: meas.t,
                        noise: params,
                    });
                }
            }
            (cam, edges)
        })
        .collect();
    let camera_poses = views.iter().map(|(p, _)| *p).collect();
    let edges = views.into_iter().flat_map(|(_, e)| e).collect();
    Ok(CalibrationViews {
        edges,
        camera_poses,
        marker_poses,
    })
}

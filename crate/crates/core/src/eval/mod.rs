//! Gauge alignment, error metrics and likelihood evaluation.

mod report;

use nalgebra::{Matrix3, Vector3};

pub use report::{parse_report_csv, write_report_csv, ErrorReport, REPORT_HEADER};

use crate::blockgraph::{CameraId, MeasurementGraph};
use crate::error::{Error, Result};
use crate::geom::{geodesic_angle_deg, project_to_so3, Pose, Rotation};
use crate::io::PoseSet;

/// Pairs every estimated camera with its ground-truth pose, in the order of
/// the estimate.
pub fn match_cameras(est: &PoseSet, gt: &PoseSet) -> Result<(Vec<CameraId>, Vec<Pose>, Vec<Pose>)> {
    if est.cameras.is_empty() {
        return Err(Error::IdMismatch("solution has no cameras".into()));
    }
    let mut ids = Vec::with_capacity(est.cameras.len());
    let mut gt_poses = Vec::with_capacity(est.cameras.len());
    for (id, _) in &est.cameras {
        let p = gt.camera(*id).ok_or_else(|| {
            Error::IdMismatch(format!("camera {id} is missing from the ground truth"))
        })?;
        ids.push(*id);
        gt_poses.push(*p);
    }
    Ok((ids, est.cameras.iter().map(|(_, p)| *p).collect(), gt_poses))
}

/// Rotation part of the gauge aligning `est` onto `gt`: maximizes
/// `Σ Tr(R_cᵀ R'_c R_H)` over SO(3).
pub fn align_rotations(est: &[Rotation], gt: &[Rotation]) -> Rotation {
    assert_eq!(est.len(), gt.len(), "alignment needs matching node lists");
    let s: Matrix3<f64> = gt
        .iter()
        .zip(est)
        .map(|(g, e)| g.matrix().transpose() * e.matrix())
        .sum();
    let h = project_to_so3(&s.transpose());
    if s.determinant() < 0.0 {
        log::debug!("gauge alignment needed a determinant correction");
    }
    h
}

/// Gauge `H` such that `est_c · H` is closest to `gt_c`. The translation
/// part is the mean of `R'_cᵀ (t_c - t'_c)`.
pub fn align_gauge(est: &[Pose], gt: &[Pose]) -> Pose {
    assert_eq!(est.len(), gt.len(), "alignment needs matching node lists");
    let er: Vec<Rotation> = est.iter().map(|p| p.r).collect();
    let gr: Vec<Rotation> = gt.iter().map(|p| p.r).collect();
    let r = align_rotations(&er, &gr);
    let t = if est.is_empty() {
        Vector3::zeros()
    } else {
        est.iter()
            .zip(gt)
            .map(|(e, g)| e.r.transpose().rotate(&(g.t - e.t)))
            .sum::<Vector3<f64>>()
            / est.len() as f64
    };
    Pose::new(r, t)
}

/// Per-node and aggregate errors after gauge alignment.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitDistance {
    /// `(δ_R degrees, δ_t meters)` per node.
    pub per_node: Vec<(f64, f64)>,
    pub avg_dr: f64,
    pub max_dr: f64,
    pub avg_dt: f64,
    pub max_dt: f64,
    pub gauge: Pose,
}

fn aggregate(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    (
        values.clone().sum::<f64>() / n as f64,
        values.fold(0.0, f64::max),
    )
}

pub fn orbit_distance(est: &[Pose], gt: &[Pose]) -> OrbitDistance {
    let gauge = align_gauge(est, gt);
    errors_under_gauge(est, gt, gauge)
}

/// Errors of `est · gauge` against `gt`.
pub fn errors_under_gauge(est: &[Pose], gt: &[Pose], gauge: Pose) -> OrbitDistance {
    let per_node: Vec<(f64, f64)> = est
        .iter()
        .zip(gt)
        .map(|(e, g)| {
            let aligned = *e * gauge;
            (
                geodesic_angle_deg(&g.r, &aligned.r),
                (g.t - aligned.t).norm(),
            )
        })
        .collect();
    let (avg_dr, max_dr) = aggregate(per_node.iter().map(|p| p.0));
    let (avg_dt, max_dt) = aggregate(per_node.iter().map(|p| p.1));
    OrbitDistance {
        per_node,
        avg_dr,
        max_dr,
        avg_dt,
        max_dt,
        gauge,
    }
}

/// Largest rotation error in degrees after rotation-only alignment.
pub fn rotation_orbit_distance_deg(est: &[Rotation], gt: &[Rotation]) -> f64 {
    let h = align_rotations(est, gt);
    est.iter()
        .zip(gt)
        .map(|(e, g)| geodesic_angle_deg(g, &(*e * h)))
        .fold(0.0, f64::max)
}

/// Squared distance `Σ ‖t_c - t'_c‖² + ‖R_c - R'_c‖_F²` of `est · gauge`
/// to `gt`.
pub fn se3_distance_sq(est: &[Pose], gt: &[Pose], gauge: &Pose) -> f64 {
    est.iter()
        .zip(gt)
        .map(|(e, g)| {
            let a = *e * *gauge;
            (g.t - a.t).norm_squared() + (g.r.matrix() - a.r.matrix()).norm_squared()
        })
        .sum()
}

/// Translation and rotation terms of the negative log-likelihood, additive
/// constants dropped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nll {
    pub translation: f64,
    pub rotation: f64,
}

impl Nll {
    pub fn total(&self) -> f64 {
        self.translation + self.rotation
    }
}

/// Evaluates the likelihood with every marker expressed through the object
/// pose of its time step. `object_poses` are reference-marker poses.
pub fn nll(g: &MeasurementGraph, cam_poses: &[Pose], object_poses: &[Pose]) -> Result<Nll> {
    if cam_poses.len() != g.num_cameras() || object_poses.len() != g.num_times() {
        return Err(Error::Shape(format!(
            "{} camera and {} object poses for a {}x{} graph",
            cam_poses.len(),
            object_poses.len(),
            g.num_cameras(),
            g.num_times()
        )));
    }
    let mut out = Nll {
        translation: 0.0,
        rotation: 0.0,
    };
    for e in g.edges() {
        let c = &cam_poses[g.camera_index(e.cam).ok_or(Error::UnknownCamera(e.cam))?];
        let o = &object_poses[g.time_index(e.time).expect("graph validated time ids")];
        let rel = g
            .object()
            .relative(e.marker)
            .ok_or(Error::UnknownMarker(e.marker))?;
        let r_m = rel.r * o.r;
        let rc_rmt = c.r.matrix() * r_m.matrix().transpose();
        let lhs = e.t_meas + rc_rmt * rel.t;
        let rhs = c.t - c.r.matrix() * o.r.matrix().transpose() * o.t;
        out.translation += 0.5 * e.noise.tau * (lhs - rhs).norm_squared();
        out.rotation -= e.noise.kappa
            * (e.r_meas.matrix() * rel.r.matrix() * o.r.matrix() * c.r.matrix().transpose())
                .trace();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::blockgraph::{EdgeMeasurement, ObjectModel};
    use crate::geom::{
        compose, relative, sample_gaussian_translation, sample_langevin, NoiseParams,
    };

    fn random_pose<R: Rng>(g: &mut R) -> Pose {
        Pose::new(
            Rotation::random(g),
            Vector3::new(
                g.random_range(-5.0..5.0),
                g.random_range(-5.0..5.0),
                g.random_range(-5.0..5.0),
            ),
        )
    }

    #[test]
    fn missing_camera_is_named() {
        let p = Pose::identity();
        let est = PoseSet {
            cameras: vec![(2, p), (5, p)],
            objects: vec![],
        };
        let gt = PoseSet {
            cameras: vec![(2, p), (3, p)],
            objects: vec![],
        };
        match match_cameras(&est, &gt) {
            Err(Error::IdMismatch(msg)) => assert!(msg.contains("camera 5")),
            other => panic!("{other:?}"),
        }
        let gt = PoseSet {
            cameras: vec![(5, p), (2, p), (9, p)],
            objects: vec![],
        };
        assert_eq!(match_cameras(&est, &gt).unwrap().0, vec![2, 5]);
    }

    #[test]
    fn identity_gauge_for_equal_sets() {
        let mut g = ChaCha8Rng::seed_from_u64(1);
        let p: Vec<Pose> = (0..6).map(|_| random_pose(&mut g)).collect();
        let h = align_gauge(&p, &p);
        assert!((h.r.matrix() - Matrix3::identity()).norm() < 1e-12);
        assert!(h.t.norm() < 1e-12);
    }

    #[test]
    fn recovers_constructed_gauge() {
        let mut g = ChaCha8Rng::seed_from_u64(2);
        let gt: Vec<Pose> = (0..10).map(|_| random_pose(&mut g)).collect();
        let h0 = random_pose(&mut g);
        let est: Vec<Pose> = gt.iter().map(|p| *p * h0).collect();
        let d = orbit_distance(&est, &gt);
        assert!(d.max_dr < 1e-10 && d.max_dt < 1e-10, "{d:?}");
        let h = d.gauge;
        let back = h0 * h;
        assert!((back.r.matrix() - Matrix3::identity()).norm() < 1e-10 && back.t.norm() < 1e-10);
    }

    #[test]
    fn single_pose_aligns_exactly() {
        let mut g = ChaCha8Rng::seed_from_u64(3);
        let d = orbit_distance(&[random_pose(&mut g)], &[random_pose(&mut g)]);
        assert!(d.max_dr < 1e-10 && d.max_dt < 1e-10);
    }

    #[test]
    fn one_rotated_camera_dominates_max_error() {
        let mut g = ChaCha8Rng::seed_from_u64(4);
        let gt: Vec<Pose> = (0..25).map(|_| random_pose(&mut g)).collect();
        let mut est = gt.clone();
        est[7].r =
            Rotation::from_axis_angle(&Vector3::new(0.0, 0.0, 1.0), 1f64.to_radians()) * est[7].r;
        let d = orbit_distance(&est, &gt);
        assert!((d.max_dr - 1.0).abs() <= 0.1, "{}", d.max_dr);
    }

    #[test]
    fn report_is_gauge_invariant() {
        let mut g = ChaCha8Rng::seed_from_u64(5);
        let gt: Vec<Pose> = (0..12).map(|_| random_pose(&mut g)).collect();
        let est: Vec<Pose> = gt
            .iter()
            .map(|p| {
                Pose::new(
                    sample_langevin(&p.r, 500.0, &mut g),
                    sample_gaussian_translation(&p.t, 100.0, &mut g),
                )
            })
            .collect();
        let a = orbit_distance(&est, &gt);
        let h = random_pose(&mut g);
        let moved: Vec<Pose> = est.iter().map(|p| *p * h).collect();
        let b = orbit_distance(&moved, &gt);
        for (x, y) in [
            (a.avg_dr, b.avg_dr),
            (a.max_dr, b.max_dr),
            (a.avg_dt, b.avg_dt),
            (a.max_dt, b.max_dt),
        ] {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn gauge_is_locally_optimal() {
        let mut g = ChaCha8Rng::seed_from_u64(6);
        let gt: Vec<Pose> = (0..15).map(|_| random_pose(&mut g)).collect();
        let est: Vec<Pose> = gt
            .iter()
            .map(|p| {
                Pose::new(
                    sample_langevin(&p.r, 50.0, &mut g),
                    sample_gaussian_translation(&p.t, 10.0, &mut g),
                )
            })
            .collect();
        let h = align_gauge(&est, &gt);
        let best = se3_distance_sq(&est, &gt, &h);
        for _ in 0..1000 {
            let scale = g.random_range(1e-4..0.3);
            let axis = Vector3::new(
                g.random_range(-1.0..1.0),
                g.random_range(-1.0..1.0),
                g.random_range(-1.0..1.0),
            );
            let dr = Rotation::from_axis_angle(&axis.normalize(), scale);
            let dt = Vector3::new(
                g.random_range(-1.0..1.0),
                g.random_range(-1.0..1.0),
                g.random_range(-1.0..1.0),
            ) * scale;
            let h2 = compose(&h, &Pose::new(dr, dt));
            assert!(se3_distance_sq(&est, &gt, &h2) >= best - 1e-9);
        }
    }

    /// Literal per-marker evaluation with explicit marker poses.
    fn nll_direct(g: &MeasurementGraph, cams: &[Pose], objs: &[Pose]) -> f64 {
        let mut total = 0.0;
        for e in g.edges() {
            let c = cams[g.camera_index(e.cam).unwrap()];
            let o = objs[g.time_index(e.time).unwrap()];
            let m = compose(g.object().relative(e.marker).unwrap(), &o);
            let pred = relative(&c, &m);
            total += 0.5 * e.noise.tau * (e.t_meas - pred.t).norm_squared();
            total -= e.noise.kappa
                * (e.r_meas.matrix() * m.r.matrix() * c.r.matrix().transpose()).trace();
        }
        total
    }

    fn two_marker_graph<R: Rng>(
        g: &mut R,
        noisy: bool,
    ) -> (MeasurementGraph, Vec<Pose>, Vec<Pose>) {
        let object = ObjectModel::new(vec![
            (1, Pose::identity()),
            (2, random_pose(g)),
            (3, random_pose(g)),
        ])
        .unwrap();
        let cams: Vec<Pose> = (0..4).map(|_| random_pose(g)).collect();
        let objs: Vec<Pose> = (0..5).map(|_| random_pose(g)).collect();
        let mut edges = Vec::new();
        for (c, cp) in cams.iter().enumerate() {
            for (t, op) in objs.iter().enumerate() {
                for m in [1, 2, 3] {
                    if g.random_bool(0.4) {
                        continue;
                    }
                    let mp = compose(object.relative(m).unwrap(), op);
                    let truth = relative(cp, &mp);
                    let noise =
                        NoiseParams::new(g.random_range(1.0..50.0), g.random_range(1.0..50.0));
                    let (r_meas, t_meas) = if noisy {
                        (
                            sample_langevin(&truth.r, noise.kappa, g),
                            sample_gaussian_translation(&truth.t, noise.tau, g),
                        )
                    } else {
                        (truth.r, truth.t)
                    };
                    edges.push(EdgeMeasurement {
                        cam: c,
                        marker: m,
                        time: t,
                        r_meas,
                        t_meas,
                        noise,
                    });
                }
            }
        }
        let graph = MeasurementGraph::with_nodes((0..4).collect(), (0..5).collect(), edges, object)
            .unwrap();
        (graph, cams, objs)
    }

    #[test]
    fn nll_at_noiseless_truth() {
        let mut g = ChaCha8Rng::seed_from_u64(7);
        let (graph, cams, objs) = two_marker_graph(&mut g, false);
        let v = nll(&graph, &cams, &objs).unwrap();
        let k: f64 = graph.edges().iter().map(|e| e.noise.kappa).sum();
        assert!(v.translation < 1e-20, "{}", v.translation);
        assert!((v.rotation + 3.0 * k).abs() < 1e-9 * k);
        let mut moved = cams.clone();
        moved[1].t += Vector3::new(1e-3, 0.0, 0.0);
        assert!(nll(&graph, &moved, &objs).unwrap().total() > v.total());
        let mut turned = objs.clone();
        turned[2].r = Rotation::from_axis_angle(&Vector3::x(), 1e-3) * turned[2].r;
        assert!(nll(&graph, &cams, &turned).unwrap().total() > v.total());
    }

    #[test]
    fn merged_matches_direct_evaluation() {
        for seed in 0..10 {
            let mut g = ChaCha8Rng::seed_from_u64(100 + seed);
            let (graph, _, _) = two_marker_graph(&mut g, true);
            let cams: Vec<Pose> = (0..4).map(|_| random_pose(&mut g)).collect();
            let objs: Vec<Pose> = (0..5).map(|_| random_pose(&mut g)).collect();
            let merged = nll(&graph, &cams, &objs).unwrap().total();
            let direct = nll_direct(&graph, &cams, &objs);
            assert!(
                (merged - direct).abs() <= 1e-9 * direct.abs().max(1.0),
                "{merged} vs {direct}"
            );
        }
    }
}

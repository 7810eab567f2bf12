//! Rig calibration from a single camera moving around a static rig.

use std::collections::{BTreeMap, BTreeSet};

use super::solver::{solve_rotations, SolverConfig};
use crate::blockgraph::{
    CameraId, EdgeMeasurement, MarkerId, MeasurementGraph, ObjectModel, TimeIndex,
};
use crate::error::{Error, Result};
use crate::geom::{inverse, relative, Pose};
use crate::transsync::{build_translation_system, solve_translations};

/// Relative gradient tolerance and iteration cap of the translation stage.
pub const CALIB_CG_TOL: f64 = 1e-12;
pub const CALIB_CG_MAX_ITER: usize = 10_000;

#[derive(Clone, Debug)]
pub struct Calibration {
    pub object: ObjectModel,
    /// Outer iterations of the rotation stage.
    pub iterations: usize,
    pub converged: bool,
    pub certified: bool,
    pub translation_iterations: usize,
}

/// Recovers marker-to-reference transforms from views of a static rig.
///
/// Views are keyed by `(cam, time)`; each becomes one mobile node of a
/// reversed bipartite graph whose static side is the set of markers.
pub fn calibrate_object(
    views: &[EdgeMeasurement],
    reference: MarkerId,
    cfg: &SolverConfig,
) -> Result<Calibration> {
    cfg.validate()?;
    let usable: Vec<&EdgeMeasurement> = views
        .iter()
        .filter(|e| e.noise.kappa > 0.0 && e.noise.tau > 0.0)
        .collect();
    if usable.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut view_ids: BTreeMap<(CameraId, TimeIndex), usize> = BTreeMap::new();
    for e in &usable {
        let next = view_ids.len();
        view_ids.entry((e.cam, e.time)).or_insert(next);
    }
    check_connected(&usable, &view_ids, reference)?;

    let reversed: Vec<EdgeMeasurement> = usable
        .iter()
        .map(|e| {
            let p = inverse(&e.pose());
            EdgeMeasurement {
                cam: e.marker,
                marker: 0,
                time: view_ids[&(e.cam, e.time)],
                r_meas: p.r,
                t_meas: p.t,
                noise: e.noise,
            }
        })
        .collect();
    let g = MeasurementGraph::new(reversed, ObjectModel::single(0))?;
    let rot = solve_rotations(&g, cfg)?;
    let sys = build_translation_system(&g, &rot.r_c, &rot.r_t, reference)?;
    let tr = solve_translations(&sys, CALIB_CG_TOL, CALIB_CG_MAX_ITER)?;

    let poses: BTreeMap<MarkerId, Pose> = g
        .cameras()
        .iter()
        .enumerate()
        .map(|(i, m)| (*m, Pose::new(rot.r_c[i], tr.t_c[i])))
        .collect();
    let p_ref = poses[&reference];
    let mut entries = vec![(reference, Pose::identity())];
    entries.extend(
        poses
            .iter()
            .filter(|(m, _)| **m != reference)
            .map(|(m, p)| (*m, relative(p, &p_ref))),
    );
    Ok(Calibration {
        object: ObjectModel::new(entries)?,
        iterations: rot.iterations,
        converged: rot.converged,
        certified: rot.certificate.certified,
        translation_iterations: tr.iterations,
    })
}

/// Every marker must share a chain of views with the reference.
fn check_connected(
    edges: &[&EdgeMeasurement],
    view_ids: &BTreeMap<(CameraId, TimeIndex), usize>,
    reference: MarkerId,
) -> Result<()> {
    let markers: BTreeSet<MarkerId> = edges.iter().map(|e| e.marker).collect();
    if !markers.contains(&reference) {
        return Err(Error::DisconnectedRig(markers.into_iter().collect()));
    }
    let mut by_marker: BTreeMap<MarkerId, Vec<usize>> = BTreeMap::new();
    let mut by_view: Vec<Vec<MarkerId>> = vec![Vec::new(); view_ids.len()];
    for e in edges {
        let v = view_ids[&(e.cam, e.time)];
        by_marker.entry(e.marker).or_default().push(v);
        by_view[v].push(e.marker);
    }
    let mut seen_marker = BTreeSet::from([reference]);
    let mut seen_view = vec![false; by_view.len()];
    let mut stack = vec![reference];
    while let Some(m) = stack.pop() {
        for &v in &by_marker[&m] {
            if std::mem::replace(&mut seen_view[v], true) {
                continue;
            }
            for &n in &by_view[v] {
                if seen_marker.insert(n) {
                    stack.push(n);
                }
            }
        }
    }
    let missing: Vec<MarkerId> = markers.difference(&seen_marker).copied().collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::DisconnectedRig(missing))
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector3;

    use super::*;
    use crate::geom::{geodesic_angle_deg, NoiseParams, Rotation, KAPPA_NOISELESS, TAU_NOISELESS};
    use crate::synth::{builtin_cube, generate_calibration_views, NoiseModel};

    fn noiseless() -> NoiseModel {
        NoiseModel {
            kappa: KAPPA_NOISELESS,
            tau: TAU_NOISELESS,
            d0: 3.0,
            exponent: 0.0,
        }
    }

    #[test]
    fn recovers_cube_exactly() {
        let cube = builtin_cube();
        let views = generate_calibration_views(&cube, 300, &noiseless(), 1).unwrap();
        let cal = calibrate_object(&views.edges, 1, &SolverConfig::default()).unwrap();
        assert!(cal.converged && cal.certified);
        assert_eq!(cal.object.reference(), 1);
        assert_eq!(cal.object.relative(1).unwrap(), &Pose::identity());
        for (m, want) in cube.iter() {
            let got = cal.object.relative(m).unwrap();
            assert!(geodesic_angle_deg(&got.r, &want.r) < 1e-6, "marker {m}");
            assert!(
                (got.t - want.t).norm() < 1e-8,
                "marker {m}: {}",
                (got.t - want.t).norm()
            );
        }
    }

    #[test]
    fn noisy_views_certify() {
        let noise = NoiseModel {
            kappa: 200.0,
            tau: 1e4,
            d0: 3.0,
            exponent: 0.0,
        };
        let views = generate_calibration_views(&builtin_cube(), 300, &noise, 2).unwrap();
        let cal = calibrate_object(&views.edges, 1, &SolverConfig::default()).unwrap();
        assert!(cal.certified);
        assert!(cal.iterations <= 5);
    }

    #[test]
    fn disconnected_rig_lists_markers() {
        let e = |marker, time| EdgeMeasurement {
            cam: 0,
            marker,
            time,
            r_meas: Rotation::identity(),
            t_meas: Vector3::new(0.0, 0.0, 1.0),
            noise: NoiseParams::new(1.0, 1.0),
        };
        let views = [e(1, 0), e(2, 0), e(3, 1), e(4, 1)];
        assert_eq!(
            calibrate_object(&views, 1, &SolverConfig::default()).unwrap_err(),
            Error::DisconnectedRig(vec![3, 4])
        );
        assert!(matches!(
            calibrate_object(&views, 9, &SolverConfig::default()),
            Err(Error::DisconnectedRig(_))
        ));
    }
}

//! Line-oriented text formats for graphs, object models and pose sets.
//!
//! Fields are whitespace separated, `#` starts a comment, and numbers are
//! written with 17 significant digits so files round-trip exactly.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};

use crate::blockgraph::{
    CameraId, EdgeMeasurement, MarkerId, MeasurementGraph, ObjectModel, TimeIndex,
};
use crate::error::{Error, Result};
use crate::geom::{NoiseParams, Pose, Rotation};

/// Orthonormality slack accepted for rotations read from files.
pub const ROTATION_TOL: f64 = 1e-6;

/// Absolute poses of cameras and of the reference marker per time step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PoseSet {
    pub cameras: Vec<(CameraId, Pose)>,
    pub objects: Vec<(TimeIndex, Pose)>,
}

impl PoseSet {
    pub fn camera(&self, id: CameraId) -> Option<&Pose> {
        self.cameras.iter().find(|(c, _)| *c == id).map(|(_, p)| p)
    }

    pub fn object(&self, time: TimeIndex) -> Option<&Pose> {
        self.objects
            .iter()
            .find(|(t, _)| *t == time)
            .map(|(_, p)| p)
    }
}

fn num(out: &mut String, x: f64) {
    let _ = write!(out, " {x:.16e}");
}

fn push_pose(out: &mut String, p: &Pose) {
    for i in 0..3 {
        for j in 0..3 {
            num(out, p.r.matrix()[(i, j)]);
        }
    }
    for k in 0..3 {
        num(out, p.t[k]);
    }
}

/// Non-empty, comment-stripped lines with 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn expect_len(line: usize, fields: &[&str], n: usize, what: &str) -> Result<()> {
    if fields.len() != n {
        return Err(parse_err(
            line,
            format!("{what} needs {n} fields, found {}", fields.len()),
        ));
    }
    Ok(())
}

fn parse_id(line: usize, s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(line, format!("{what} {s:?} is not a non-negative integer")))
}

fn parse_f64(line: usize, s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(parse_err(line, format!("{s:?} is not a finite number"))),
    }
}

/// Twelve numbers: a row-major rotation and a translation.
fn parse_pose(line: usize, fields: &[&str]) -> Result<Pose> {
    let v: Vec<f64> = fields
        .iter()
        .map(|s| parse_f64(line, s))
        .collect::<Result<_>>()?;
    let m = Matrix3::from_row_slice(&v[..9]);
    let r = Rotation::try_from_matrix(m, ROTATION_TOL)
        .ok_or_else(|| parse_err(line, "rotation is not orthonormal with determinant +1"))?;
    Ok(Pose::new(r, Vector3::new(v[9], v[10], v[11])))
}

/// Edge list: `cam marker time r00 .. r22 tx ty tz kappa tau`.
pub fn parse_edges(text: &str) -> Result<Vec<EdgeMeasurement>> {
    records(text)
        .map(|(line, f)| {
            expect_len(line, &f, 17, "edge")?;
            let pose = parse_pose(line, &f[3..15])?;
            let kappa = parse_f64(line, f[15])?;
            let tau = parse_f64(line, f[16])?;
            if kappa < 0.0 || tau < 0.0 {
                return Err(parse_err(line, "kappa and tau must be non-negative"));
            }
            Ok(EdgeMeasurement {
                cam: parse_id(line, f[0], "camera")?,
                marker: parse_id(line, f[1], "marker")?,
                time: parse_id(line, f[2], "time")?,
                r_meas: pose.r,
                t_meas: pose.t,
                noise: NoiseParams::new(kappa, tau),
            })
        })
        .collect()
}

/// Parses an edge list against a known object model.
pub fn parse_graph(text: &str, object: &ObjectModel) -> Result<MeasurementGraph> {
    let edges = parse_edges(text)?;
    if edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    MeasurementGraph::new(edges, object.clone())
}

pub fn write_edges(edges: &[EdgeMeasurement]) -> String {
    let mut out =
        String::from("# cam marker time r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz kappa tau\n");
    for e in edges {
        let _ = write!(out, "{} {} {}", e.cam, e.marker, e.time);
        push_pose(&mut out, &e.pose());
        num(&mut out, e.noise.kappa);
        num(&mut out, e.noise.tau);
        out.push('\n');
    }
    out
}

pub fn write_graph(g: &MeasurementGraph) -> String {
    write_edges(g.edges())
}

/// Object model: `marker r00 .. r22 tx ty tz`, reference first with the
/// identity transform.
pub fn parse_object(text: &str) -> Result<ObjectModel> {
    let mut entries: Vec<(MarkerId, Pose)> = Vec::new();
    for (line, f) in records(text) {
        expect_len(line, &f, 13, "marker")?;
        let m = parse_id(line, f[0], "marker")?;
        let p = parse_pose(line, &f[1..])?;
        if entries.is_empty()
            && (p.to_homogeneous() - Pose::identity().to_homogeneous()).norm() > 1e-9
        {
            return Err(parse_err(
                line,
                format!("reference marker {m} must carry the identity transform"),
            ));
        }
        if entries.iter().any(|(k, _)| *k == m) {
            return Err(parse_err(line, format!("marker {m} listed twice")));
        }
        entries.push((m, p));
    }
    if entries.is_empty() {
        return Err(parse_err(0, "object file lists no markers"));
    }
    ObjectModel::new(entries)
}

pub fn write_object(object: &ObjectModel) -> String {
    let mut out = String::from("# marker r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz\n");
    for (m, p) in object
        .markers()
        .iter()
        .map(|m| (*m, object.relative(*m).expect("listed marker")))
    {
        let _ = write!(out, "{m}");
        push_pose(&mut out, p);
        out.push('\n');
    }
    out
}

/// Pose set: `camera <id> r00 .. tz` lines, then `object <time> r00 .. tz`.
pub fn parse_poses(text: &str) -> Result<PoseSet> {
    let mut set = PoseSet::default();
    for (line, f) in records(text) {
        expect_len(line, &f, 14, "pose")?;
        let id = parse_id(line, f[1], "id")?;
        let p = parse_pose(line, &f[2..])?;
        match f[0] {
            "camera" => {
                if !set.objects.is_empty() {
                    return Err(parse_err(line, "camera poses must precede object poses"));
                }
                if set.camera(id).is_some() {
                    return Err(parse_err(line, format!("camera {id} listed twice")));
                }
                set.cameras.push((id, p));
            }
            "object" => {
                if set.object(id).is_some() {
                    return Err(parse_err(line, format!("time {id} listed twice")));
                }
                set.objects.push((id, p));
            }
            other => {
                return Err(parse_err(
                    line,
                    format!("unknown record {other:?}, expected camera or object"),
                ))
            }
        }
    }
    Ok(set)
}

pub fn write_poses(set: &PoseSet) -> String {
    let mut out = String::from("# kind id r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz\n");
    for (kind, list) in [("camera", &set.cameras), ("object", &set.objects)] {
        for (id, p) in list {
            let _ = write!(out, "{kind} {id}");
            push_pose(&mut out, p);
            out.push('\n');
        }
    }
    out
}

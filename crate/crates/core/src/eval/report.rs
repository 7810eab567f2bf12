use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::orbit_distance;
use crate::blockgraph::CameraId;
use crate::error::{Error, Result};
use crate::geom::Pose;

pub const REPORT_HEADER: [&str; 11] = [
    "dataset",
    "C",
    "T",
    "E",
    "avg_dr_deg",
    "max_dr_deg",
    "avg_dt_m",
    "max_dt_m",
    "iters",
    "sec_per_iter",
    "certified",
];

/// One results row: camera pose errors against ground truth plus solver
/// statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub dataset: String,
    pub cameras: usize,
    pub times: usize,
    pub edges: usize,
    pub avg_dr: f64,
    pub max_dr: f64,
    pub avg_dt: f64,
    pub max_dt: f64,
    /// `(camera id, δ_R degrees, δ_t meters)`; empty when parsed from CSV.
    pub per_camera: Vec<(CameraId, f64, f64)>,
    pub iterations: usize,
    pub seconds_per_iteration: f64,
    pub certified: bool,
}

#[derive(Serialize, Deserialize)]
struct Row {
    dataset: String,
    #[serde(rename = "C")]
    cameras: usize,
    #[serde(rename = "T")]
    times: usize,
    #[serde(rename = "E")]
    edges: usize,
    avg_dr_deg: f64,
    max_dr_deg: f64,
    avg_dt_m: f64,
    max_dt_m: f64,
    iters: usize,
    sec_per_iter: f64,
    certified: bool,
}

impl ErrorReport {
    /// Aligns `est` to `gt` (camera poses, same order as `ids`) and collects
    /// the errors.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dataset: &str,
        ids: &[CameraId],
        times: usize,
        edges: usize,
        est: &[Pose],
        gt: &[Pose],
        iterations: usize,
        seconds_per_iteration: f64,
        certified: bool,
    ) -> Self {
        let d = orbit_distance(est, gt);
        ErrorReport {
            dataset: dataset.to_string(),
            cameras: ids.len(),
            times,
            edges,
            avg_dr: d.avg_dr,
            max_dr: d.max_dr,
            avg_dt: d.avg_dt,
            max_dt: d.max_dt,
            per_camera: ids
                .iter()
                .zip(&d.per_node)
                .map(|(id, (r, t))| (*id, *r, *t))
                .collect(),
            iterations,
            seconds_per_iteration,
            certified,
        }
    }

    /// Human-readable table in the layout of the CSV columns.
    pub fn to_text(reports: &[ErrorReport]) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>5} {:>6} {:>8} {:>12} {:>12} {:>12} {:>12} {:>6} {:>10} {:>9}",
            "dataset",
            "C",
            "T",
            "E",
            "avg δ_R",
            "max δ_R",
            "avg δ_t",
            "max δ_t",
            "iters",
            "t (s/it)",
            "certified"
        );
        for r in reports {
            let _ = writeln!(
                out,
                "{:<16} {:>5} {:>6} {:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>6} {:>10.4} {:>9}",
                r.dataset,
                r.cameras,
                r.times,
                r.edges,
                r.avg_dr,
                r.max_dr,
                r.avg_dt,
                r.max_dt,
                r.iterations,
                r.seconds_per_iteration,
                r.certified
            );
        }
        out
    }

    fn row(&self) -> Row {
        Row {
            dataset: self.dataset.clone(),
            cameras: self.cameras,
            times: self.times,
            edges: self.edges,
            avg_dr_deg: self.avg_dr,
            max_dr_deg: self.max_dr,
            avg_dt_m: self.avg_dt,
            max_dt_m: self.max_dt,
            iters: self.iterations,
            sec_per_iter: self.seconds_per_iteration,
            certified: self.certified,
        }
    }
}

pub fn write_report_csv<W: Write>(reports: &[ErrorReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r.row()).map_err(|e| Error::Parse {
            line: 0,
            msg: e.to_string(),
        })?;
    }
    if reports.is_empty() {
        w.write_record(REPORT_HEADER).map_err(|e| Error::Parse {
            line: 0,
            msg: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })
}

pub fn parse_report_csv<R: Read>(input: R) -> Result<Vec<ErrorReport>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    if headers.iter().ne(REPORT_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize::<Row>() {
        let row = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::Parse {
                line,
                msg: e.to_string(),
            }
        })?;
        out.push(ErrorReport {
            dataset: row.dataset,
            cameras: row.cameras,
            times: row.times,
            edges: row.edges,
            avg_dr: row.avg_dr_deg,
            max_dr: row.max_dr_deg,
            avg_dt: row.avg_dt_m,
            max_dt: row.max_dt_m,
            per_camera: Vec::new(),
            iterations: row.iters,
            seconds_per_iteration: row.sec_per_iter,
            certified: row.certified,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ErrorReport {
        ErrorReport {
            dataset: "SmallRoom50".into(),
            cameras: 25,
            times: 50,
            edges: 768,
            avg_dr: 0.0123456789012345,
            max_dr: 0.05,
            avg_dt: 1.5e-3,
            max_dt: 4.25e-3,
            per_camera: Vec::new(),
            iterations: 2,
            seconds_per_iteration: 0.0125,
            certified: true,
        }
    }

    #[test]
    fn csv_round_trip() {
        let reports = vec![
            sample(),
            ErrorReport {
                dataset: "a,b".into(),
                certified: false,
                ..sample()
            },
        ];
        let mut buf = Vec::new();
        write_report_csv(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&REPORT_HEADER.join(",")));
        assert_eq!(parse_report_csv(buf.as_slice()).unwrap(), reports);
    }

    #[test]
    fn rejects_bad_header_and_rows() {
        assert!(parse_report_csv("x,y\n1,2\n".as_bytes()).is_err());
        let bad = format!("{}\nA,1,2,3,x,0,0,0,1,0,true\n", REPORT_HEADER.join(","));
        assert!(matches!(
            parse_report_csv(bad.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn text_has_every_row() {
        let t = ErrorReport::to_text(&[sample(), sample()]);
        assert_eq!(t.lines().count(), 3);
        assert!(t.lines().next().unwrap().contains("max δ_t"));
    }
}

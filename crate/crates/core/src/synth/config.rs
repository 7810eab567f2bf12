use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Where the rigid object comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ObjectSource {
    BuiltinCube,
    /// Path to an object model file, resolved by the caller.
    File(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Visibility {
    /// Meters between camera center and marker center.
    pub max_range: f64,
    /// Degrees between the marker's outward normal and the ray to the camera.
    pub max_view_angle_deg: f64,
    /// Full field of view of every camera, degrees.
    pub fov_deg: f64,
    pub dropout: f64,
}

/// Distance-attenuated noise: `k(d) = kappa / (1 + (d / d0)^exponent)`,
/// likewise for `tau`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub kappa: f64,
    pub tau: f64,
    pub d0: f64,
    pub exponent: f64,
}

impl NoiseModel {
    pub fn attenuation(&self, d: f64) -> f64 {
        if self.exponent == 0.0 {
            1.0
        } else {
            1.0 / (1.0 + (d / self.d0).powf(self.exponent))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub name: String,
    /// Ceiling grid of cameras, `(rows along x, columns along y)`.
    pub grid: (usize, usize),
    pub times: usize,
    /// Room extent along x, y, z in meters; the floor is at z = 0.
    pub room: Vector3<f64>,
    /// Mounting height of the cameras.
    pub camera_height: f64,
    /// Random tilt added to each camera's viewing direction, degrees.
    pub orientation_jitter_deg: f64,
    pub object: ObjectSource,
    pub visibility: Visibility,
    pub noise: NoiseModel,
    pub seed: u64,
}

pub const PRESETS: [&str; 6] = [
    "SmallRoom50",
    "SmallRoom500",
    "SmallRoom5K",
    "LargeShop500",
    "LargeShop5K",
    "LargeShop10K",
];

impl SceneConfig {
    pub fn num_cameras(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    fn small_room(name: &str, times: usize) -> Self {
        SceneConfig {
            name: name.into(),
            grid: (5, 5),
            times,
            room: Vector3::new(12.0, 6.0, 3.0),
            camera_height: 2.9,
            orientation_jitter_deg: 5.0,
            object: ObjectSource::BuiltinCube,
            visibility: Visibility {
                max_range: 3.8,
                max_view_angle_deg: 60.0,
                fov_deg: 90.0,
                dropout: 0.15,
            },
            noise: NoiseModel {
                kappa: 6565.0,
                tau: 1e4,
                d0: 3.0,
                exponent: 2.0,
            },
            seed: 0,
        }
    }

    fn large_shop(name: &str, times: usize) -> Self {
        SceneConfig {
            name: name.into(),
            grid: (19, 18),
            times,
            room: Vector3::new(20.0, 17.9, 3.5),
            camera_height: 3.4,
            orientation_jitter_deg: 5.0,
            object: ObjectSource::BuiltinCube,
            visibility: Visibility {
                max_range: 4.5,
                max_view_angle_deg: 65.0,
                fov_deg: 90.0,
                dropout: 0.1,
            },
            noise: NoiseModel {
                kappa: 6565.0,
                tau: 1e4,
                d0: 3.0,
                exponent: 2.0,
            },
            seed: 0,
        }
    }

    /// Named preset sized after the benchmark datasets.
    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "SmallRoom50" => Self::small_room(name, 50),
            "SmallRoom500" => Self::small_room(name, 500),
            "SmallRoom5K" => Self::small_room(name, 5000),
            "LargeShop500" => Self::large_shop(name, 500),
            "LargeShop5K" => Self::large_shop(name, 5000),
            "LargeShop10K" => Self::large_shop(name, 10000),
            _ => {
                return Err(Error::BadConfig {
                    line: 0,
                    field: "preset".into(),
                    msg: format!(
                        "unknown preset {name:?}; expected one of {}",
                        PRESETS.join(", ")
                    ),
                })
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| {
            Err(Error::BadConfig {
                line: 0,
                field: field.into(),
                msg,
            })
        };
        if self.num_cameras() < 2 {
            return bad(
                "grid",
                format!("need at least 2 cameras, got {}", self.num_cameras()),
            );
        }
        if self.times == 0 {
            return bad("times", "need at least one time step".into());
        }
        if !(0.0..1.0).contains(&self.visibility.dropout) {
            return bad(
                "dropout",
                format!("{} is outside [0, 1)", self.visibility.dropout),
            );
        }
        if self.room.iter().any(|v| !(*v > 0.0)) {
            return bad("room", "extents must be positive".into());
        }
        if !(self.camera_height > 0.0 && self.camera_height <= self.room.z) {
            return bad(
                "camera_height",
                format!("{} is not inside the room", self.camera_height),
            );
        }
        for (field, v) in [
            ("max_range", self.visibility.max_range),
            ("max_view_angle", self.visibility.max_view_angle_deg),
            ("fov", self.visibility.fov_deg),
            ("kappa", self.noise.kappa),
            ("tau", self.noise.tau),
            ("d0", self.noise.d0),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(field, format!("must be positive, got {v}"));
            }
        }
        if !(self.noise.exponent >= 0.0) {
            return bad("exponent", "must be non-negative".into());
        }
        Ok(())
    }

    /// Parses `key = value` lines. A `preset` key, if present, must come
    /// first and provides the defaults; otherwise SmallRoom50 does.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::small_room("custom", 50);
        let mut seen_other = false;
        let mut set_at: HashMap<String, usize> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::BadConfig {
                    line,
                    field: content.into(),
                    msg: "expected key = value".into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let err = |msg: String| Error::BadConfig {
                line,
                field: key.into(),
                msg,
            };
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(format!("{v:?} is not a number")))
            };
            let int = |v: &str| -> Result<usize> {
                v.parse::<usize>()
                    .map_err(|_| err(format!("{v:?} is not an integer")))
            };
            match key {
                "preset" => {
                    if seen_other {
                        return Err(err("preset must precede other keys".into()));
                    }
                    cfg = Self::preset(value)
                        .map_err(|_| err(format!("unknown preset {value:?}")))?;
                }
                "name" => cfg.name = value.into(),
                "times" => cfg.times = int(value)?,
                "grid" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 2 {
                        return Err(err("expected two integers".into()));
                    }
                    cfg.grid = (int(parts[0])?, int(parts[1])?);
                }
                "room" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(err("expected three numbers".into()));
                    }
                    cfg.room = Vector3::new(num(parts[0])?, num(parts[1])?, num(parts[2])?);
                }
                "camera_height" => cfg.camera_height = num(value)?,
                "orientation_jitter" => cfg.orientation_jitter_deg = num(value)?,
                "object" => {
                    cfg.object = if value == "cube" {
                        ObjectSource::BuiltinCube
                    } else {
                        ObjectSource::File(value.into())
                    }
                }
                "max_range" => cfg.visibility.max_range = num(value)?,
                "max_view_angle" => cfg.visibility.max_view_angle_deg = num(value)?,
                "fov" => cfg.visibility.fov_deg = num(value)?,
                "dropout" => cfg.visibility.dropout = num(value)?,
                "kappa" => cfg.noise.kappa = num(value)?,
                "tau" => cfg.noise.tau = num(value)?,
                "d0" => cfg.noise.d0 = num(value)?,
                "exponent" => cfg.noise.exponent = num(value)?,
                "seed" => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| err(format!("{value:?} is not an integer")))?
                }
                _ => return Err(err("unknown key".into())),
            }
            if key != "preset" {
                seen_other = true;
            }
            set_at.insert(key.to_string(), line);
        }
        // Keys interact (grid and height, say), so only the final state is
        // checked; errors point at the line that last set the field.
        cfg.validate().map_err(|e| match e {
            Error::BadConfig { field, msg, .. } => Error::BadConfig {
                line: set_at.get(&field).copied().unwrap_or(0),
                field,
                msg,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    /// Serializes to the format read by [`SceneConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "grid = {} {}", self.grid.0, self.grid.1);
        let _ = writeln!(s, "times = {}", self.times);
        let _ = writeln!(
            s,
            "room = {:?} {:?} {:?}",
            self.room.x, self.room.y, self.room.z
        );
        let _ = writeln!(s, "camera_height = {:?}", self.camera_height);
        let _ = writeln!(s, "orientation_jitter = {:?}", self.orientation_jitter_deg);
        match &self.object {
            ObjectSource::BuiltinCube => {
                let _ = writeln!(s, "object = cube");
            }
            ObjectSource::File(p) => {
                let _ = writeln!(s, "object = {p}");
            }
        }
        let v = &self.visibility;
        let _ = writeln!(s, "max_range = {:?}", v.max_range);
        let _ = writeln!(s, "max_view_angle = {:?}", v.max_view_angle_deg);
        let _ = writeln!(s, "fov = {:?}", v.fov_deg);
        let _ = writeln!(s, "dropout = {:?}", v.dropout);
        let n = &self.noise;
        let _ = writeln!(s, "kappa = {:?}", n.kappa);
        let _ = writeln!(s, "tau = {:?}", n.tau);
        let _ = writeln!(s, "d0 = {:?}", n.d0);
        let _ = writeln!(s, "exponent = {:?}", n.exponent);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

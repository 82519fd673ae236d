//! Vehicle trajectory samples and logs, uniform resampling and kinematic
//! derivation.
//!
//! Conventions used throughout the workspace: SI units, headings in radians
//! measured counter-clockwise from +X, rightward steering negative. Speeds
//! are ground speeds and never negative.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::signal;

/// Spacing jitter tolerated before a log stops counting as uniform, seconds.
pub const UNIFORM_TOLERANCE: f64 = 1e-9;

/// Default smoothing window for derivative estimation, seconds.
pub const DEFAULT_SMOOTH_WINDOW: f64 = 0.1;

/// Test environment a log was recorded in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Environment {
    /// Instrumented vehicle on the real track.
    Real,
    /// Simulator in its standard configuration.
    Std,
    /// Simulator without steering torque feedback.
    NoTrq,
    /// Simulator without platform motion.
    NoMot,
}

impl Environment {
    pub const ALL: [Environment; 4] =
        [Environment::Real, Environment::Std, Environment::NoTrq, Environment::NoMot];

    pub fn as_str(&self) -> &'static str {
        match self {
            Environment::Real => "REAL",
            Environment::Std => "STD",
            Environment::NoTrq => "NOTRQ",
            Environment::NoMot => "NOMOT",
        }
    }

    pub fn parse(s: &str) -> Option<Environment> {
        Self::ALL.iter().copied().find(|e| e.as_str() == s)
    }
}

impl std::fmt::Display for Environment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Driving task a log belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    /// Lane change over a low-friction strip.
    Lct,
    /// Slalom through a line of cones.
    Slx,
    /// Launch onto and laps of a small circle.
    Clv,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Lct, Task::Slx, Task::Clv];

    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Lct => "LCT",
            Task::Slx => "SLX",
            Task::Clv => "CLV",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        Self::ALL.iter().copied().find(|t| t.as_str() == s)
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One state sample. `yaw_rate`, `lat_accel` and `sw_rate` may be absent in
/// raw logs; [`derive_kinematics`] fills them in without touching values that
/// are already present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    /// Time, s.
    pub t: f64,
    /// Position, m.
    pub x: f64,
    pub y: f64,
    /// Heading, rad CCW from +X.
    pub heading: f64,
    /// Ground speed, m/s (>= 0).
    pub speed: f64,
    /// Steering wheel angle, rad (rightward negative).
    pub swa: f64,
    /// Yaw rate, rad/s.
    pub yaw_rate: Option<f64>,
    /// Lateral acceleration, m/s^2.
    pub lat_accel: Option<f64>,
    /// Steering wheel rate, rad/s.
    pub sw_rate: Option<f64>,
}

impl TrajectorySample {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let req = [
            ("t", self.t),
            ("x", self.x),
            ("y", self.y),
            ("heading", self.heading),
            ("speed", self.speed),
            ("swa", self.swa),
        ];
        for (name, v) in req {
            if !v.is_finite() {
                return Err(format!("non-finite {name}"));
            }
        }
        for (name, v) in [
            ("yaw_rate", self.yaw_rate),
            ("lat_accel", self.lat_accel),
            ("sw_rate", self.sw_rate),
        ] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(format!("non-finite {name}"));
                }
            }
        }
        if self.speed < 0.0 {
            return Err(format!("negative speed {}", self.speed));
        }
        Ok(())
    }
}

/// Log header data. `extras` carries any additional `key=value` pairs found
/// in a file (attempt files use this for anchor and cone-hit bookkeeping).
#[derive(Debug, Clone, PartialEq)]
pub struct LogMeta {
    pub driver_id: String,
    pub environment: Environment,
    pub task: Task,
    /// Declared sample rate, Hz.
    pub sample_rate: f64,
    /// Post-drive realism rating in [0, 1], when collected.
    pub realism_rating: Option<f64>,
    pub extras: BTreeMap<String, String>,
}

/// A time-ordered trajectory with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveLog {
    pub meta: LogMeta,
    samples: Vec<TrajectorySample>,
}

impl DriveLog {
    /// Build a log, enforcing strictly increasing time and per-sample
    /// validity.
    pub fn new(meta: LogMeta, samples: Vec<TrajectorySample>) -> Result<DriveLog> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("log has no samples".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            s.validate()
                .map_err(|m| Error::InvalidInput(format!("sample {i}: {m}")))?;
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(Error::InvalidInput(format!(
                    "non-monotonic time at sample {i}"
                )));
            }
        }
        if meta.sample_rate <= 0.0 || !meta.sample_rate.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sample_rate must be positive, got {}",
                meta.sample_rate
            )));
        }
        if let Some(r) = meta.realism_rating {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidInput(format!(
                    "realism_rating {r} outside [0, 1]"
                )));
            }
        }
        Ok(DriveLog { meta, samples })
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample period if the spacing is constant within [`UNIFORM_TOLERANCE`].
    pub fn uniform_dt(&self) -> Option<f64> {
        if self.samples.len() < 2 {
            return None;
        }
        let dt = self.samples[1].t - self.samples[0].t;
        for w in self.samples.windows(2) {
            if ((w[1].t - w[0].t) - dt).abs() > UNIFORM_TOLERANCE {
                return None;
            }
        }
        Some(dt)
    }

    /// All of `yaw_rate`, `lat_accel`, `sw_rate` present on every sample?
    pub fn is_kinematically_complete(&self) -> bool {
        self.samples.iter().all(|s| {
            s.yaw_rate.is_some() && s.lat_accel.is_some() && s.sw_rate.is_some()
        })
    }
}

fn lerp(a: f64, b: f64, u: f64) -> f64 {
    a + (b - a) * u
}

fn lerp_opt(a: Option<f64>, b: Option<f64>, u: f64) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Some(lerp(a, b, u)),
        _ => None,
    }
}

/// Interpolate headings along the shortest arc, so 3.1 -> -3.1 passes
/// through pi rather than 0.
fn lerp_heading(a: f64, b: f64, u: f64) -> f64 {
    let d = signal::wrap_angle(b - a);
    signal::wrap_angle(a + d * u)
}

/// Resample a log onto a uniform time base at `rate` Hz by linear
/// interpolation. Output stamps are `t0 + k/rate` up to the last input time;
/// resampling an already-uniform log at its own rate reproduces it.
pub fn resample_uniform(log: &DriveLog, rate: f64) -> Result<DriveLog> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidInput(format!("resample rate {rate} not positive")));
    }
    let xs = log.samples();
    if xs.len() < 2 {
        return Err(Error::InvalidInput(
            "resampling needs at least two samples".into(),
        ));
    }
    let t0 = xs[0].t;
    let span = xs[xs.len() - 1].t - t0;
    let n_out = (span * rate + 1e-9).floor() as usize + 1;

    let mut out = Vec::with_capacity(n_out);
    let mut seg = 0usize; // advancing bracket index
    for k in 0..n_out {
        let t = t0 + k as f64 / rate;
        while seg + 2 < xs.len() && xs[seg + 1].t < t {
            seg += 1;
        }
        let (a, b) = (&xs[seg], &xs[seg + 1]);
        let u = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        out.push(TrajectorySample {
            t,
            x: lerp(a.x, b.x, u),
            y: lerp(a.y, b.y, u),
            heading: lerp_heading(a.heading, b.heading, u),
            speed: lerp(a.speed, b.speed, u),
            swa: lerp(a.swa, b.swa, u),
            yaw_rate: lerp_opt(a.yaw_rate, b.yaw_rate, u),
            lat_accel: lerp_opt(a.lat_accel, b.lat_accel, u),
            sw_rate: lerp_opt(a.sw_rate, b.sw_rate, u),
        });
    }
    let mut meta = log.meta.clone();
    meta.sample_rate = rate;
    DriveLog::new(meta, out)
}

/// Fill in missing kinematic fields on a uniform log.
///
/// Missing `yaw_rate` comes from a smoothed central difference of the
/// (unwrapped) heading, missing `sw_rate` likewise from the steering wheel
/// angle, and missing `lat_accel` is `speed * yaw_rate`. `smooth_window` is
/// the moving-average width in seconds applied before differencing. Fields
/// already present are never overwritten.
pub fn derive_kinematics(log: &DriveLog, smooth_window: f64) -> Result<DriveLog> {
    let dt = log.uniform_dt().ok_or_else(|| {
        Error::InvalidInput("derive_kinematics requires a uniform log".into())
    })?;
    if smooth_window < 0.0 {
        return Err(Error::InvalidInput("negative smoothing window".into()));
    }
    let rate = 1.0 / dt;
    let w = signal::window_samples(smooth_window, rate);
    let xs = log.samples();

    let headings: Vec<f64> = xs.iter().map(|s| s.heading).collect();
    let unwrapped = signal::unwrap_angles(&headings);
    let yaw = signal::central_diff(&signal::moving_average(&unwrapped, w), dt);

    let swas: Vec<f64> = xs.iter().map(|s| s.swa).collect();
    let swr = signal::central_diff(&signal::moving_average(&swas, w), dt);

    let mut out = xs.to_vec();
    for (i, s) in out.iter_mut().enumerate() {
        if s.yaw_rate.is_none() {
            s.yaw_rate = Some(yaw[i]);
        }
        if s.lat_accel.is_none() {
            s.lat_accel = Some(s.speed * s.yaw_rate.unwrap());
        }
        if s.sw_rate.is_none() {
            s.sw_rate = Some(swr[i]);
        }
    }
    DriveLog::new(log.meta.clone(), out)
}

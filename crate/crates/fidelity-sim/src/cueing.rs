//! Classical washout motion cueing: scaled high-pass translation, tilt
//! coordination for sustained specific force, high-passed rotation, and
//! hard platform limits with per-sample violation flags.

use crate::GRAVITY;
use fidelity_core::error::{Error, Result};

/// Cueing filter configuration. Defaults follow common practice for a
/// mid-size hexapod with an XY table; the structure (not the numbers) is
/// what matters downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct CueingParams {
    /// Motion scale applied to translational cues and tilt targets.
    pub scale: f64,
    /// High-pass natural frequency, rad/s (translation and rotation).
    pub hp_natural_freq: f64,
    /// High-pass damping ratio.
    pub hp_damping: f64,
    /// Extra first-order break that washes platform position back to
    /// neutral, rad/s.
    pub washout_break_freq: f64,
    /// Tilt-coordination low-pass corner, rad/s.
    pub tilt_lowpass_freq: f64,
    /// Tilt slew limit, rad/s.
    pub tilt_rate_limit: f64,
    /// Excursion limits: XY travel, heave, and any rotation, in m / m / rad.
    pub limit_xy: f64,
    pub limit_heave: f64,
    pub limit_angle: f64,
}

impl Default for CueingParams {
    fn default() -> Self {
        CueingParams {
            scale: 0.5,
            hp_natural_freq: 1.0,
            hp_damping: 1.0,
            washout_break_freq: 0.7,
            tilt_lowpass_freq: 0.5,
            tilt_rate_limit: 3.0_f64.to_radians(),
            limit_xy: 2.5,
            limit_heave: 0.25,
            limit_angle: 20.0_f64.to_radians(),
        }
    }
}

impl CueingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "cueing scale must be in (0, 1], got {}",
                self.scale
            )));
        }
        let positive = [
            ("hp_natural_freq", self.hp_natural_freq),
            ("hp_damping", self.hp_damping),
            ("washout_break_freq", self.washout_break_freq),
            ("tilt_lowpass_freq", self.tilt_lowpass_freq),
            ("tilt_rate_limit", self.tilt_rate_limit),
            ("limit_xy", self.limit_xy),
            ("limit_heave", self.limit_heave),
            ("limit_angle", self.limit_angle),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "cueing {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One input sample: body-frame accelerations (m/s², gravity removed) and
/// yaw rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CueingSample {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub yaw_rate: f64,
}

/// Platform pose at one sample. `limit_flags` has one bit per channel in
/// the order x, y, z, roll, pitch, yaw; a set bit means the unclamped
/// command exceeded the platform limit at this sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatformPose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub limit_flags: u8,
}

/// Third-order washout from acceleration to platform position:
/// `scale·s / ((s + w)(s² + 2ζωs + ω²))`. The free `s` washes position
/// back to neutral after sustained inputs.
struct TranslationChannel {
    z: [f64; 3],
    a0: f64,
    a1: f64,
    a2: f64,
    scale: f64,
}

impl TranslationChannel {
    fn new(p: &CueingParams) -> TranslationChannel {
        let w = p.washout_break_freq;
        let n = p.hp_natural_freq;
        let z = p.hp_damping;
        TranslationChannel {
            z: [0.0; 3],
            a0: w * n * n,
            a1: 2.0 * z * n * w + n * n,
            a2: w + 2.0 * z * n,
            scale: p.scale,
        }
    }

    fn step(&mut self, u: f64, dt: f64) -> f64 {
        let deriv = |s: [f64; 3]| {
            [s[1], s[2], -self.a0 * s[0] - self.a1 * s[1] - self.a2 * s[2] + u]
        };
        self.z = rk4_3(self.z, deriv, dt);
        self.scale * self.z[1]
    }
}

/// Second-order high-pass of a rotation angle, driven by its rate:
/// `yaw_platform(s) = s·rate(s) / (s² + 2ζωs + ω²)`.
struct RotationChannel {
    z: [f64; 2],
    n2: f64,
    two_zn: f64,
}

impl RotationChannel {
    fn new(p: &CueingParams) -> RotationChannel {
        RotationChannel {
            z: [0.0; 2],
            n2: p.hp_natural_freq * p.hp_natural_freq,
            two_zn: 2.0 * p.hp_damping * p.hp_natural_freq,
        }
    }

    fn step(&mut self, rate: f64, dt: f64) -> f64 {
        let deriv = |s: [f64; 2]| [s[1], -self.n2 * s[0] - self.two_zn * s[1] + rate];
        self.z = rk4_2(self.z, deriv, dt);
        self.z[1]
    }
}

/// Tilt coordination: low-passed specific force mapped to a gravity-aligned
/// tilt angle, slew-limited.
struct TiltChannel {
    filtered: f64,
    angle: f64,
}

impl TiltChannel {
    fn step(&mut self, accel: f64, p: &CueingParams, dt: f64) -> f64 {
        // exact first-order low-pass over the sample interval
        let k = (-p.tilt_lowpass_freq * dt).exp();
        self.filtered = accel + (self.filtered - accel) * k;
        let target = (p.scale * self.filtered / GRAVITY).clamp(-1.0, 1.0).asin();
        let max_step = p.tilt_rate_limit * dt;
        self.angle += (target - self.angle).clamp(-max_step, max_step);
        self.angle
    }
}

fn rk4_3(y: [f64; 3], f: impl Fn([f64; 3]) -> [f64; 3], dt: f64) -> [f64; 3] {
    let add = |a: [f64; 3], b: [f64; 3], h: f64| {
        [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]]
    };
    let k1 = f(y);
    let k2 = f(add(y, k1, 0.5 * dt));
    let k3 = f(add(y, k2, 0.5 * dt));
    let k4 = f(add(y, k3, dt));
    let mut out = y;
    for i in 0..3 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn rk4_2(y: [f64; 2], f: impl Fn([f64; 2]) -> [f64; 2], dt: f64) -> [f64; 2] {
    let add = |a: [f64; 2], b: [f64; 2], h: f64| [a[0] + h * b[0], a[1] + h * b[1]];
    let k1 = f(y);
    let k2 = f(add(y, k1, 0.5 * dt));
    let k3 = f(add(y, k2, 0.5 * dt));
    let k4 = f(add(y, k3, dt));
    [
        y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn clamp_flag(v: f64, limit: f64, bit: u8, flags: &mut u8) -> f64 {
    if v.abs() > limit {
        *flags |= 1 << bit;
        v.clamp(-limit, limit)
    } else {
        v
    }
}

/// Run the cueing filter over a uniformly sampled input series.
///
/// Zero input produces an identically neutral pose: every filter state
/// starts at zero and stays there.
pub fn motion_cueing(
    inputs: &[CueingSample],
    sample_rate: f64,
    params: &CueingParams,
) -> Result<Vec<PlatformPose>> {
    params.validate()?;
    if !(sample_rate > 0.0) || !sample_rate.is_finite() {
        return Err(Error::InvalidInput(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    let dt = 1.0 / sample_rate;
    let mut surge = TranslationChannel::new(params);
    let mut sway = TranslationChannel::new(params);
    let mut heave = TranslationChannel::new(params);
    let mut yaw = RotationChannel::new(params);
    let mut roll = TiltChannel { filtered: 0.0, angle: 0.0 };
    let mut pitch = TiltChannel { filtered: 0.0, angle: 0.0 };

    let mut out = Vec::with_capacity(inputs.len());
    for (k, s) in inputs.iter().enumerate() {
        let mut flags = 0u8;
        let x = clamp_flag(surge.step(s.ax, dt), params.limit_xy, 0, &mut flags);
        let y = clamp_flag(sway.step(s.ay, dt), params.limit_xy, 1, &mut flags);
        let z = clamp_flag(heave.step(s.az, dt), params.limit_heave, 2, &mut flags);
        let roll_v = clamp_flag(roll.step(s.ay, params, dt), params.limit_angle, 3, &mut flags);
        let pitch_v =
            clamp_flag(pitch.step(s.ax, params, dt), params.limit_angle, 4, &mut flags);
        let yaw_v = clamp_flag(yaw.step(s.yaw_rate, dt), params.limit_angle, 5, &mut flags);
        out.push(PlatformPose {
            t: k as f64 * dt,
            x,
            y,
            z,
            roll: roll_v,
            pitch: pitch_v,
            yaw: yaw_v,
            limit_flags: flags,
        });
    }
    Ok(out)
}

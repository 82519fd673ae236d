//! Single-track (bicycle) vehicle with friction-circle tire saturation.
//!
//! Lateral axle forces are linear in slip angle and clamped to the grip
//! available after longitudinal demand, with friction sampled from the
//! grid at each axle's ground position. Integration is fixed-step RK4.

use crate::friction::FrictionGrid;
use crate::GRAVITY;
use fidelity_core::error::{Error, Result};

/// Vehicle parameters. Defaults describe a large executive sedan; every
/// field is configurable.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    /// Total mass, kg.
    pub mass: f64,
    /// Yaw moment of inertia, kg·m².
    pub yaw_inertia: f64,
    /// Axle-to-axle distance, m.
    pub wheelbase: f64,
    /// Centre of gravity to front axle, m.
    pub cg_to_front: f64,
    /// Cornering stiffness per axle, N/rad.
    pub cornering_stiffness_front: f64,
    pub cornering_stiffness_rear: f64,
    /// Steering-wheel angle per road-wheel angle.
    pub steering_ratio: f64,
    /// Body rectangle used for cone-hit checks, m.
    pub body_length: f64,
    pub body_width: f64,
    /// Steering-wheel angle limit, rad.
    pub max_swa: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            mass: 1800.0,
            yaw_inertia: 3500.0,
            wheelbase: 2.96,
            cg_to_front: 1.4,
            cornering_stiffness_front: 80_000.0,
            cornering_stiffness_rear: 80_000.0,
            steering_ratio: 16.0,
            body_length: 4.9,
            body_width: 1.9,
            max_swa: 3.0 * std::f64::consts::PI,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("wheelbase", self.wheelbase),
            ("cg_to_front", self.cg_to_front),
            ("cornering_stiffness_front", self.cornering_stiffness_front),
            ("cornering_stiffness_rear", self.cornering_stiffness_rear),
            ("steering_ratio", self.steering_ratio),
            ("body_length", self.body_length),
            ("body_width", self.body_width),
            ("max_swa", self.max_swa),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "vehicle {name} must be positive, got {v}"
                )));
            }
        }
        if self.cg_to_front >= self.wheelbase {
            return Err(Error::InvalidInput(format!(
                "cg_to_front {} must be less than the wheelbase {}",
                self.cg_to_front, self.wheelbase
            )));
        }
        Ok(())
    }

    /// Centre of gravity to rear axle, m.
    pub fn cg_to_rear(&self) -> f64 {
        self.wheelbase - self.cg_to_front
    }
}

/// Planar rigid-body state. Velocities are in the body frame (vx forward,
/// vy leftward); heading is CCW from +X.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
}

impl VehicleState {
    pub fn at_rest(x: f64, y: f64, heading: f64) -> VehicleState {
        VehicleState { x, y, heading, vx: 0.0, vy: 0.0, yaw_rate: 0.0 }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    fn to_array(self) -> [f64; 6] {
        [self.x, self.y, self.heading, self.vx, self.vy, self.yaw_rate]
    }

    fn from_array(a: [f64; 6]) -> VehicleState {
        VehicleState { x: a[0], y: a[1], heading: a[2], vx: a[3], vy: a[4], yaw_rate: a[5] }
    }
}

/// Commanded inputs, held constant over an integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    /// Steering-wheel angle, rad (leftward positive).
    pub swa: f64,
    /// Longitudinal acceleration demand, m/s² (negative brakes).
    pub accel: f64,
}

/// Axle forces and accelerations at one state, used both for integration
/// and for logging body lateral acceleration.
#[derive(Debug, Clone, Copy)]
struct ForceBalance {
    fy_front: f64,
    fy_rear: f64,
    /// Saturated longitudinal acceleration, m/s².
    ax: f64,
    /// Road-wheel angle, rad.
    delta: f64,
}

fn force_balance(
    s: &VehicleState,
    c: &Controls,
    p: &VehicleParams,
    grid: &FrictionGrid,
) -> ForceBalance {
    let delta = c.swa / p.steering_ratio;
    let a = p.cg_to_front;
    let b = p.cg_to_rear();
    let (sin_h, cos_h) = s.heading.sin_cos();
    let mu_front = grid.friction_at(s.x + a * cos_h, s.y + a * sin_h);
    let mu_rear = grid.friction_at(s.x - b * cos_h, s.y - b * sin_h);

    // static axle loads
    let fz_front = p.mass * GRAVITY * b / p.wheelbase;
    let fz_rear = p.mass * GRAVITY * a / p.wheelbase;

    // longitudinal demand saturated at the weaker axle's grip; a stopped
    // car cannot brake backwards
    let mu_min = mu_front.min(mu_rear);
    let mut ax = c.accel.clamp(-mu_min * GRAVITY, mu_min * GRAVITY);
    if s.vx <= 0.0 && ax < 0.0 {
        ax = 0.0;
    }
    // drive/brake force split in proportion to static load
    let fx_front = p.mass * ax * b / p.wheelbase;
    let fx_rear = p.mass * ax * a / p.wheelbase;

    // slip angles; the speed floor keeps the geometry defined at rest
    let vx_eff = s.vx.max(1.0);
    let alpha_front = (s.vy + a * s.yaw_rate).atan2(vx_eff) - delta;
    let alpha_rear = (s.vy - b * s.yaw_rate).atan2(vx_eff);

    // friction circle: lateral capacity shrinks with longitudinal use
    let cap = |mu: f64, fz: f64, fx: f64| ((mu * fz).powi(2) - fx * fx).max(0.0).sqrt();
    let cap_front = cap(mu_front, fz_front, fx_front);
    let cap_rear = cap(mu_rear, fz_rear, fx_rear);
    let fy_front =
        (-p.cornering_stiffness_front * alpha_front).clamp(-cap_front, cap_front);
    let fy_rear = (-p.cornering_stiffness_rear * alpha_rear).clamp(-cap_rear, cap_rear);

    ForceBalance { fy_front, fy_rear, ax, delta }
}

fn derivatives(
    s: &VehicleState,
    c: &Controls,
    p: &VehicleParams,
    grid: &FrictionGrid,
) -> [f64; 6] {
    let f = force_balance(s, c, p, grid);
    let (sin_h, cos_h) = s.heading.sin_cos();
    let (sin_d, cos_d) = f.delta.sin_cos();
    let a = p.cg_to_front;
    let b = p.cg_to_rear();
    [
        s.vx * cos_h - s.vy * sin_h,
        s.vx * sin_h + s.vy * cos_h,
        s.yaw_rate,
        f.ax + s.vy * s.yaw_rate - f.fy_front * sin_d / p.mass,
        (f.fy_front * cos_d + f.fy_rear) / p.mass - s.vx * s.yaw_rate,
        (a * f.fy_front * cos_d - b * f.fy_rear) / p.yaw_inertia,
    ]
}

/// Body-frame lateral acceleration produced by the tires at this state;
/// this is the value a body-mounted accelerometer would log.
pub fn body_lateral_accel(
    s: &VehicleState,
    c: &Controls,
    p: &VehicleParams,
    grid: &FrictionGrid,
) -> f64 {
    let f = force_balance(s, c, p, grid);
    (f.fy_front * f.delta.cos() + f.fy_rear) / p.mass
}

/// Front-axle slip angle and the slip angle at which the front tire force
/// saturates on the local surface. Steering past the second value adds no
/// lateral force — a driver feels this as understeer.
pub fn front_slip_and_peak(
    s: &VehicleState,
    c: &Controls,
    p: &VehicleParams,
    grid: &FrictionGrid,
) -> (f64, f64) {
    let delta = c.swa / p.steering_ratio;
    let a = p.cg_to_front;
    let (sin_h, cos_h) = s.heading.sin_cos();
    let mu_front = grid.friction_at(s.x + a * cos_h, s.y + a * sin_h);
    let fz_front = p.mass * GRAVITY * p.cg_to_rear() / p.wheelbase;
    let alpha = (s.vy + a * s.yaw_rate).atan2(s.vx.max(1.0)) - delta;
    let alpha_peak = mu_front * fz_front / p.cornering_stiffness_front;
    (alpha, alpha_peak)
}

/// Advance the vehicle one RK4 step of `dt` seconds with controls held.
pub fn step_vehicle(
    state: &VehicleState,
    controls: &Controls,
    params: &VehicleParams,
    grid: &FrictionGrid,
    dt: f64,
) -> Result<VehicleState> {
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(Error::InvalidInput(format!(
            "integration step must be in (0, 0.01] s, got {dt}"
        )));
    }
    let y0 = state.to_array();
    let eval = |ys: [f64; 6]| derivatives(&VehicleState::from_array(ys), controls, params, grid);
    let add = |ys: [f64; 6], ks: [f64; 6], h: f64| {
        let mut out = ys;
        for i in 0..6 {
            out[i] += h * ks[i];
        }
        out
    };
    let k1 = eval(y0);
    let k2 = eval(add(y0, k1, 0.5 * dt));
    let k3 = eval(add(y0, k2, 0.5 * dt));
    let k4 = eval(add(y0, k3, dt));
    let mut y1 = y0;
    for i in 0..6 {
        y1[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let mut next = VehicleState::from_array(y1);
    // braking stops at rest rather than reversing
    if next.vx < 0.0 && state.vx >= 0.0 && controls.accel <= 0.0 {
        next.vx = 0.0;
    }
    for v in next.to_array() {
        if !v.is_finite() {
            return Err(Error::Sim("vehicle state became non-finite".into()));
        }
    }
    Ok(next)
}

//! Complete synthetic drives: idle, launch, manoeuvre, brake, idle —
//! logged at the canonical rate with geometric cone-hit bookkeeping.

use crate::driver::{Driver, DriverConfig};
use crate::friction::{generate_friction_grid, FrictionGrid};
use crate::vehicle::{
    body_lateral_accel, front_slip_and_peak, step_vehicle, Controls, VehicleParams, VehicleState,
};
use crate::GRAVITY;
use fidelity_core::error::{Error, Result};
use fidelity_core::layout::TaskLayout;
use fidelity_core::metrics::{footprint_intersects_cone, FootprintConfig};
use fidelity_core::path::PathSpec;
use fidelity_core::trajectory::{DriveLog, Environment, LogMeta, Task, TrajectorySample};
use fidelity_core::{derive_seed, CANONICAL_RATE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Control/logging interval, s.
const CONTROL_DT: f64 = 1.0 / CANONICAL_RATE;
/// Physics substeps per control tick.
const SUBSTEPS: usize = 5;
/// Quiet time logged before launch and after stopping, s.
const IDLE_TIME: f64 = 2.0;
/// A run may not last longer than this, s.
const MAX_DURATION: f64 = 120.0;
/// Positions farther than this from the course centre abort the run, m.
const SAFETY_RADIUS: f64 = 1000.0;
/// Fraction of the friction budget the lap-speed target uses.
const LAP_GRIP_FRACTION: f64 = 0.9;
/// Deceleration assumed when scheduling the end-of-lap brake point, m/s².
const BRAKE_PLAN_DECEL: f64 = 2.0;
/// Number of laps driven in a circle task.
const LAPS: f64 = 3.0;
/// Lateral grip utilisation above which the driver lifts off the throttle.
const LIFT_UTILISATION: f64 = 0.9;
/// Braking applied per unit of utilisation beyond the lift point, m/s².
const LIFT_GAIN: f64 = 10.0;
/// Time constant for centring the wheel once the course is done, s.
const WHEEL_RELAX_TIME: f64 = 0.5;
/// Fastest the wheel is unwound while rolling out, rad/s.
const MAX_RELAX_RATE: f64 = 4.0;

/// Caller-supplied identity and condition tags for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub driver_id: String,
    pub environment: Environment,
    /// Post-drive realism rating in [0, 1], recorded in the log header.
    pub realism_rating: Option<f64>,
    /// Override the layout's nominal target speed, m/s.
    pub target_speed: Option<f64>,
    pub vehicle: VehicleParams,
    pub driver: DriverConfig,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(driver_id: &str, environment: Environment, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            driver_id: driver_id.to_string(),
            environment,
            realism_rating: None,
            target_speed: None,
            vehicle: VehicleParams::default(),
            driver: DriverConfig::default(),
            seed,
        }
    }

    /// Like [`ScenarioConfig::new`] but with the driver defaults matched
    /// to the manoeuvre (see [`DriverConfig::for_task`]).
    pub fn for_task(
        task: Task,
        driver_id: &str,
        environment: Environment,
        seed: u64,
    ) -> ScenarioConfig {
        ScenarioConfig {
            driver: DriverConfig::for_task(task),
            ..ScenarioConfig::new(driver_id, environment, seed)
        }
    }
}

/// A finished run: the drive log plus the friction grid it rolled over.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub log: DriveLog,
    pub grid: FrictionGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    PreIdle,
    Drive,
    Brake,
    PostIdle,
}

/// Run a scenario on a freshly sampled friction grid.
///
/// The grid RNG stream depends only on the seed, so two runs that share a
/// seed but differ in surface means roll over identically-patterned
/// surfaces — paired comparisons stay paired.
pub fn run_scenario(layout: &TaskLayout, cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let grid = generate_friction_grid(layout, derive_seed(cfg.seed, &["grid"]));
    let log = run_scenario_on_grid(layout, cfg, &grid)?;
    Ok(ScenarioOutput { log, grid: grid.clone() })
}

/// Run a scenario over a caller-supplied friction grid.
pub fn run_scenario_on_grid(
    layout: &TaskLayout,
    cfg: &ScenarioConfig,
    grid: &FrictionGrid,
) -> Result<DriveLog> {
    layout.validate()?;
    cfg.vehicle.validate()?;
    let mut driver = Driver::new(cfg.driver.clone(), CANONICAL_RATE)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &["driver-noise"]));

    let path = &layout.nominal_path;
    let (x0, y0) = path.start();
    let heading0 = path.start_heading();
    let mut state = VehicleState::at_rest(x0, y0, heading0);
    let mut controls = Controls { swa: 0.0, accel: 0.0 };

    let target_speed = cfg.target_speed.unwrap_or_else(|| match layout.task {
        Task::Clv => lap_speed_target(layout),
        _ => layout.nominal_speed,
    });
    let end_progress = path.polyline_length().map(|len| len - 1.0);
    let (bb_lo, bb_hi) = layout.bounding_box();
    let centre = (0.5 * (bb_lo.0 + bb_hi.0), 0.5 * (bb_lo.1 + bb_hi.1));
    let footprint = FootprintConfig { length: cfg.vehicle.body_length, width: cfg.vehicle.body_width };
    let circle_radius = match path {
        PathSpec::Circle { radius, .. } => *radius,
        _ => 0.0,
    };

    let mut samples: Vec<TrajectorySample> = Vec::new();
    let mut hit_ids: Vec<u32> = Vec::new();
    let mut hit_times: Vec<f64> = Vec::new();
    let mut phase = Phase::PreIdle;
    let mut phase_t = 0.0;
    let mut tick: u64 = 0;

    loop {
        let t = tick as f64 * CONTROL_DT;
        if t > MAX_DURATION + 2.0 * IDLE_TIME {
            break;
        }

        // log the state at this instant, with the forces still acting
        samples.push(TrajectorySample {
            t,
            x: state.x,
            y: state.y,
            heading: wrap_angle(state.heading),
            speed: state.speed(),
            swa: controls.swa,
            yaw_rate: Some(state.yaw_rate),
            lat_accel: Some(body_lateral_accel(&state, &controls, &cfg.vehicle, grid)),
            sw_rate: None,
        });

        // phase transitions
        let laps_done = (state.heading - heading0).abs();
        match phase {
            Phase::PreIdle if t >= IDLE_TIME => {
                phase = Phase::Drive;
                phase_t = t;
            }
            Phase::Drive => {
                let done = match layout.task {
                    Task::Clv => {
                        // begin braking so the stop lands near the start
                        let remaining = (LAPS * std::f64::consts::TAU - laps_done).max(0.0);
                        remaining * circle_radius
                            <= state.speed().powi(2) / (2.0 * BRAKE_PLAN_DECEL)
                    }
                    _ => {
                        let progress = path.progress((state.x, state.y));
                        progress >= end_progress.expect("polyline tasks have a length")
                    }
                };
                if done || t - phase_t > MAX_DURATION {
                    phase = Phase::Brake;
                }
            }
            Phase::Brake if state.speed() < 0.05 => {
                phase = Phase::PostIdle;
                phase_t = t;
            }
            Phase::PostIdle if t - phase_t >= IDLE_TIME => break,
            _ => {}
        }

        // commands for the coming interval
        match phase {
            Phase::PreIdle | Phase::PostIdle => {
                controls.accel = 0.0;
            }
            Phase::Drive => {
                let (mut sw_rate, mut accel) = driver.tick(
                    (state.x, state.y, state.heading),
                    state.speed(),
                    state.yaw_rate,
                    target_speed,
                    path,
                    &mut rng,
                );
                // understeer feel: once the front axle is past its
                // force peak, steering deeper adds nothing and the
                // driver stops winding the wheel in that direction
                if cfg.driver.understeer_freeze {
                    let (slip, slip_peak) =
                        front_slip_and_peak(&state, &controls, &cfg.vehicle, grid);
                    if slip < -slip_peak {
                        sw_rate = sw_rate.min(0.0);
                    } else if slip > slip_peak {
                        sw_rate = sw_rate.max(0.0);
                    }
                }
                // throttle balance in sustained cornering: near the grip
                // limit the driver trades speed for lateral margin; in
                // transient manoeuvres the throttle is held instead
                if circle_radius > 0.0 {
                    let mu_here = grid.friction_at(state.x, state.y);
                    let utilisation = body_lateral_accel(&state, &controls, &cfg.vehicle, grid)
                        .abs()
                        / (mu_here * GRAVITY);
                    if utilisation > LIFT_UTILISATION {
                        accel = accel.min(-LIFT_GAIN * (utilisation - LIFT_UTILISATION));
                    }
                }
                controls.swa = (controls.swa + sw_rate * CONTROL_DT)
                    .clamp(-cfg.vehicle.max_swa, cfg.vehicle.max_swa);
                controls.accel = accel;
            }
            Phase::Brake => {
                // the course is behind the car: straighten the wheel and
                // stop, instead of aiming at a path that has ended
                let sw_rate =
                    (-controls.swa / WHEEL_RELAX_TIME).clamp(-MAX_RELAX_RATE, MAX_RELAX_RATE);
                controls.swa += sw_rate * CONTROL_DT;
                controls.accel = -cfg.driver.accel_limit;
            }
        }

        for _ in 0..SUBSTEPS {
            state = step_vehicle(&state, &controls, &cfg.vehicle, grid, CONTROL_DT / SUBSTEPS as f64)?;
        }
        tick += 1;

        if (state.x - centre.0).abs() > SAFETY_RADIUS || (state.y - centre.1).abs() > SAFETY_RADIUS
        {
            return Err(Error::Sim(format!(
                "position ({:.0}, {:.0}) left the {SAFETY_RADIUS:.0} m safety box; \
                 controller diverged",
                state.x, state.y
            )));
        }

        // first-touch cone detection
        for cone in &layout.cones {
            if hit_ids.contains(&cone.id) {
                continue;
            }
            if footprint_intersects_cone(
                state.x,
                state.y,
                state.heading,
                &footprint,
                cone.x,
                cone.y,
                cone.radius,
            ) {
                hit_ids.push(cone.id);
                hit_times.push(tick as f64 * CONTROL_DT);
            }
        }
    }

    let mut extras = BTreeMap::new();
    extras.insert("sim_seed".to_string(), cfg.seed.to_string());
    extras.insert("cone_hits".to_string(), hit_ids.len().to_string());
    extras.insert(
        "cone_hit_times".to_string(),
        hit_times.iter().map(|t| format!("{t:.2}")).collect::<Vec<_>>().join(";"),
    );
    let meta = LogMeta {
        driver_id: cfg.driver_id.clone(),
        environment: cfg.environment,
        task: layout.task,
        sample_rate: CANONICAL_RATE,
        realism_rating: cfg.realism_rating,
        extras,
    };
    DriveLog::new(meta, samples)
}

/// Friction-limited lap speed: the speed whose lateral demand uses a fixed
/// fraction of the dominant surface's grip, capped at the nominal speed.
fn lap_speed_target(layout: &TaskLayout) -> f64 {
    let radius = match layout.nominal_path {
        PathSpec::Circle { radius, .. } => radius,
        _ => return layout.nominal_speed,
    };
    (LAP_GRIP_FRACTION * layout.base_mu() * GRAVITY * radius)
        .sqrt()
        .min(layout.nominal_speed)
}

fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(std::f64::consts::TAU);
    if x > std::f64::consts::PI {
        x -= std::f64::consts::TAU;
    }
    x
}

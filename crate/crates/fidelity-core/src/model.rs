//! Steering driver models and their fitting procedure.
//!
//! The continuous model steers the wheel at a rate proportional to a
//! delayed yaw-rate error: δ̇_SW(t) = −K · ω_err(t − T_R), where
//! ω_err = ω_actual − ω_desired and ω_desired aims at a point on the
//! desired path a preview time ahead. The intermittent variant replaces
//! the continuous rate with discrete minimum-jerk adjustment bursts whose
//! amplitudes scale with the same delayed error; it suits quasi-steady
//! tasks (circle driving) where continuous control fits poorly.
//!
//! Both fits are open-loop: predictions use recorded vehicle states only,
//! never their own output. Linear parameters (the gain) are solved in
//! closed form; the remaining parameters are found by brute-force grid
//! search with deterministic tie-breaking.

use crate::error::{Error, Result};
use crate::extract::AttemptSegment;
use crate::layout::TaskLayout;
use crate::path::{Direction, PathSpec};
use crate::signal::{mean, median, percentile, wrap_angle};
use crate::trajectory::{Task, TrajectorySample};

/// Continuous-model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpyreConfig {
    /// Steering-wheel rate per unit yaw-rate error (dimensionless).
    pub gain: f64,
    /// Response delay, s.
    pub t_r: f64,
    /// Preview time, s.
    pub t_p: f64,
}

impl DpyreConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_r >= 0.0) {
            return Err(Error::InvalidInput("response delay must be >= 0".into()));
        }
        if !(self.t_p > 0.0) {
            return Err(Error::InvalidInput("preview time must be > 0".into()));
        }
        if !self.gain.is_finite() {
            return Err(Error::InvalidInput("steering gain must be finite".into()));
        }
        Ok(())
    }
}

/// Which steering model produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Dpyre,
    Idpyre,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dpyre => "DPYRE",
            ModelKind::Idpyre => "IDPYRE",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "DPYRE" => Some(ModelKind::Dpyre),
            "IDPYRE" => Some(ModelKind::Idpyre),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of fitting a steering model to one attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub model: ModelKind,
    /// K (continuous) or k (intermittent).
    pub gain: f64,
    /// Response delay, s.
    pub t_r: f64,
    /// Preview time, s.
    pub t_p: f64,
    /// RMS of the prediction residual, rad/s.
    pub rms_error: f64,
    /// Variance explained on the recorded steering rate (≤ 1).
    pub r_squared: f64,
    /// True when the target had zero variance (nothing to explain).
    pub degenerate: bool,
    /// Mean |integrated wheel-angle change| per adjustment, rad
    /// (intermittent model only).
    pub avg_adjustment_magnitude: Option<f64>,
    /// Number of detected adjustments (intermittent model only).
    pub n_adjustments: Option<u32>,
    /// Fitted burst width, s (intermittent model only).
    pub burst_duration: Option<f64>,
}

/// One discrete steering adjustment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustmentBurst {
    /// Onset relative to the start of the analysed series, s.
    pub t_onset: f64,
    /// Integrated wheel-angle change over the burst, rad.
    pub amplitude: f64,
    pub duration: f64,
}

/// Search grid for the nonlinear fit parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitGrid {
    pub t_r_max: f64,
    pub t_r_step: f64,
    pub t_p_min: f64,
    pub t_p_max: f64,
    pub t_p_step: f64,
    pub burst_duration_min: f64,
    pub burst_duration_max: f64,
    pub burst_duration_step: f64,
    /// Burst detection threshold as a fraction of the 90th percentile of
    /// |sw_rate|.
    pub threshold_fraction: f64,
    /// Bursts closer than this merge into one adjustment, s.
    pub min_separation: f64,
}

impl Default for FitGrid {
    fn default() -> Self {
        FitGrid {
            t_r_max: 1.0,
            t_r_step: 0.05,
            t_p_min: 0.5,
            t_p_max: 3.0,
            t_p_step: 0.25,
            burst_duration_min: 0.2,
            burst_duration_max: 1.0,
            burst_duration_step: 0.1,
            threshold_fraction: 0.2,
            min_separation: 0.1,
        }
    }
}

fn steps(min: f64, max: f64, step: f64) -> Vec<f64> {
    let n = ((max - min) / step).round() as usize;
    (0..=n).map(|i| min + i as f64 * step).collect()
}

impl FitGrid {
    pub fn t_r_values(&self) -> Vec<f64> {
        steps(0.0, self.t_r_max, self.t_r_step)
    }

    pub fn t_p_values(&self) -> Vec<f64> {
        steps(self.t_p_min, self.t_p_max, self.t_p_step)
    }

    pub fn burst_duration_values(&self) -> Vec<f64> {
        steps(self.burst_duration_min, self.burst_duration_max, self.burst_duration_step)
    }
}

/// Below this speed the desired yaw rate is taken as zero (the preview
/// geometry degenerates when the car is effectively stationary).
const MIN_PREVIEW_SPEED: f64 = 0.1;

/// A driver never aims closer than this, m. At crawling speeds the raw
/// speed × preview-time distance collapses and tiny lateral offsets would
/// otherwise turn into huge curvature demands.
const MIN_PREVIEW_DISTANCE: f64 = 5.0;

/// If the preview target is closer than this the geometry is degenerate.
const MIN_TARGET_DISTANCE: f64 = 0.01;

/// Excitation below this is treated as unidentifiable.
const MIN_EXCITATION: f64 = 1e-12;

fn yaw_rate_towards(
    pose: (f64, f64, f64),
    speed: f64,
    target: (f64, f64),
) -> Result<f64> {
    let dx = target.0 - pose.0;
    let dy = target.1 - pose.1;
    let dist = dx.hypot(dy);
    if dist < MIN_TARGET_DISTANCE {
        return Err(Error::Fit(format!(
            "degenerate preview target {dist:.4} m away; cannot aim"
        )));
    }
    let alpha = wrap_angle(dy.atan2(dx) - pose.2);
    // constant-yaw-rate arc through the target
    Ok(2.0 * speed * alpha.sin() / dist)
}

/// A vehicle whose path projection is within this arc distance of a
/// polyline's final vertex has no forward path left to track, rad/s = 0.
const PATH_END_GUARD: f64 = 0.5;

/// Yaw rate of the circular arc that takes the vehicle from `pose` onto
/// the path point a preview time ahead.
///
/// The target sits at arc distance `speed × t_p` past the path point
/// nearest the vehicle. With α the bearing of the target relative to the
/// heading and L the straight-line distance, the arc through both points
/// has yaw rate 2·speed·sin(α)/L. A vehicle already on a circular path,
/// heading along it, gets exactly speed/radius for any preview. Past the
/// end of a polyline path the demand is zero: there is nothing ahead to
/// aim at.
pub fn desired_yaw_rate(
    pose: (f64, f64, f64),
    speed: f64,
    path: &PathSpec,
    t_p: f64,
) -> Result<f64> {
    if !(speed > 0.0) {
        return Err(Error::InvalidInput("desired_yaw_rate needs speed > 0".into()));
    }
    if !(t_p > 0.0) {
        return Err(Error::InvalidInput("preview time must be > 0".into()));
    }
    if path_exhausted(path, path.progress((pose.0, pose.1))) {
        return Ok(0.0);
    }
    let dist = (speed * t_p).max(MIN_PREVIEW_DISTANCE);
    let target = path.lookahead_point((pose.0, pose.1), dist);
    yaw_rate_towards(pose, speed, target)
}

fn path_exhausted(path: &PathSpec, arc: f64) -> bool {
    path.polyline_length().is_some_and(|len| arc >= len - PATH_END_GUARD)
}

fn sample_rate_of(samples: &[TrajectorySample]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Fit("need at least 2 samples".into()));
    }
    let span = samples[samples.len() - 1].t - samples[0].t;
    if !(span > 0.0) {
        return Err(Error::Fit("samples span no time".into()));
    }
    Ok((samples.len() - 1) as f64 / span)
}

/// Yaw-rate error series ω_actual − ω_desired. `arcs` caches the path arc
/// position of every sample so repeated preview times reuse projections.
fn omega_err_series(
    samples: &[TrajectorySample],
    path: &PathSpec,
    t_p: f64,
    arcs: &[f64],
) -> Result<Vec<f64>> {
    samples
        .iter()
        .zip(arcs)
        .map(|(s, &arc)| {
            let yaw = s.yaw_rate.ok_or_else(|| {
                Error::Fit("yaw_rate channel missing; derive kinematics first".into())
            })?;
            let des = if s.speed < MIN_PREVIEW_SPEED || path_exhausted(path, arc) {
                0.0
            } else {
                let dist = (s.speed * t_p).max(MIN_PREVIEW_DISTANCE);
                let target = path.point_at_arc(arc + dist);
                yaw_rate_towards((s.x, s.y, s.heading), s.speed, target)?
            };
            Ok(yaw - des)
        })
        .collect()
}

fn arc_positions(samples: &[TrajectorySample], path: &PathSpec) -> Vec<f64> {
    samples.iter().map(|s| path.progress((s.x, s.y))).collect()
}

fn sw_rate_series(samples: &[TrajectorySample]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            s.sw_rate.ok_or_else(|| {
                Error::Fit("sw_rate channel missing; derive kinematics first".into())
            })
        })
        .collect()
}

/// Open-loop prediction of the steering-wheel rate from recorded states.
///
/// The delay is rounded to whole samples; the first T_R seconds are
/// emitted as zero (no error history yet).
pub fn dpyre_predict(
    seg: &AttemptSegment,
    path: &PathSpec,
    cfg: &DpyreConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let rate = sample_rate_of(&seg.samples)?;
    let delay = (cfg.t_r * rate).round() as usize;
    if delay >= seg.samples.len() {
        return Err(Error::Fit(format!(
            "response delay {} s exceeds the segment length",
            cfg.t_r
        )));
    }
    let arcs = arc_positions(&seg.samples, path);
    let err = omega_err_series(&seg.samples, path, cfg.t_p, &arcs)?;
    let mut out = vec![0.0; err.len()];
    for i in delay..err.len() {
        out[i] = -cfg.gain * err[i - delay];
    }
    Ok(out)
}

/// Common fit preparation: sampling rate, duration check, channels.
struct FitInput {
    rate: f64,
    sw_rate: Vec<f64>,
    arcs: Vec<f64>,
    /// First scored sample; every grid delay has full history from here.
    window_start: usize,
}

fn prepare_fit(seg: &AttemptSegment, path: &PathSpec, grid: &FitGrid) -> Result<FitInput> {
    let rate = sample_rate_of(&seg.samples)?;
    let duration = seg.samples[seg.samples.len() - 1].t - seg.samples[0].t;
    if duration <= grid.t_r_max + 2.0 {
        return Err(Error::Fit(format!(
            "segment of {duration:.1} s is too short to fit (need more than {:.1} s)",
            grid.t_r_max + 2.0
        )));
    }
    Ok(FitInput {
        rate,
        sw_rate: sw_rate_series(&seg.samples)?,
        arcs: arc_positions(&seg.samples, path),
        window_start: (grid.t_r_max * rate).round() as usize,
    })
}

fn centred_sum_of_squares(y: &[f64]) -> f64 {
    let m = mean(y);
    y.iter().map(|v| (v - m) * (v - m)).sum()
}

/// Fit the continuous model by grid search over (T_R, T_p) with the gain
/// solved in closed form per grid point.
///
/// All grid points are scored over the same window (starting after the
/// largest delay) so their RMS values are comparable. Ties break toward
/// smaller T_R, then smaller T_p.
pub fn fit_dpyre(seg: &AttemptSegment, path: &PathSpec, grid: &FitGrid) -> Result<ModelFit> {
    let input = prepare_fit(seg, path, grid)?;
    let n = input.sw_rate.len();
    let window = &input.sw_rate[input.window_start..];
    let m = window.len() as f64;
    let ss_tot = centred_sum_of_squares(window);
    let syy: f64 = window.iter().map(|y| y * y).sum();

    if ss_tot <= 1e-18 && syy <= 1e-18 {
        // nothing to explain: zero steering rate throughout
        return Ok(ModelFit {
            model: ModelKind::Dpyre,
            gain: 0.0,
            t_r: 0.0,
            t_p: grid.t_p_min,
            rms_error: 0.0,
            r_squared: 1.0,
            degenerate: true,
            avg_adjustment_magnitude: None,
            n_adjustments: None,
            burst_duration: None,
        });
    }

    let errs: Vec<(f64, Vec<f64>)> = grid
        .t_p_values()
        .into_iter()
        .map(|t_p| {
            omega_err_series(&seg.samples, path, t_p, &input.arcs).map(|e| (t_p, e))
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, f64, f64, f64, f64)> = None; // rms, gain, t_r, t_p, ss_res
    for t_r in grid.t_r_values() {
        let delay = (t_r * input.rate).round() as usize;
        for (t_p, err) in &errs {
            let mut see = 0.0;
            let mut sye = 0.0;
            for i in input.window_start..n {
                let e = err[i - delay];
                see += e * e;
                sye += input.sw_rate[i] * e;
            }
            if see < MIN_EXCITATION {
                continue;
            }
            let gain = -sye / see;
            let ss_res = (syy - sye * sye / see).max(0.0);
            let rms = (ss_res / m).sqrt();
            if best.map_or(true, |b| rms < b.0) {
                best = Some((rms, gain, t_r, *t_p, ss_res));
            }
        }
    }
    let (rms, gain, t_r, t_p, ss_res) = best.ok_or_else(|| {
        Error::Fit("yaw-rate error has no variance anywhere on the grid; gain unidentifiable".into())
    })?;
    Ok(ModelFit {
        model: ModelKind::Dpyre,
        gain,
        t_r,
        t_p,
        rms_error: rms,
        r_squared: 1.0 - ss_res / ss_tot,
        degenerate: false,
        avg_adjustment_magnitude: None,
        n_adjustments: None,
        burst_duration: None,
    })
}

/// Find discrete steering adjustments: maximal runs with
/// |sw_rate| > rate_threshold, merged across gaps shorter than
/// `min_separation`. Amplitude is the integral of sw_rate over the run.
pub fn detect_adjustments(
    sw_rate: &[f64],
    sample_rate: f64,
    rate_threshold: f64,
    min_separation: f64,
) -> Vec<AdjustmentBurst> {
    let dt = 1.0 / sample_rate;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &x) in sw_rate.iter().enumerate() {
        if x.abs() > rate_threshold {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            runs.push((s, i - 1));
        }
    }
    if let Some(s) = start {
        runs.push((s, sw_rate.len() - 1));
    }

    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (a, b) in runs {
        match merged.last_mut() {
            Some(prev) if (a - prev.1) as f64 * dt < min_separation => prev.1 = b,
            _ => merged.push((a, b)),
        }
    }

    merged
        .into_iter()
        .map(|(a, b)| AdjustmentBurst {
            t_onset: a as f64 * dt,
            amplitude: sw_rate[a..=b].iter().sum::<f64>() * dt,
            duration: (b - a + 1) as f64 * dt,
        })
        .collect()
}

/// Unit-area minimum-jerk rate pulse sampled over `width` points.
pub fn min_jerk_pulse(width: usize) -> Vec<f64> {
    let mut shape: Vec<f64> = (0..width)
        .map(|j| {
            let tau = (j as f64 + 0.5) / width as f64;
            let q = tau * (1.0 - tau);
            q * q
        })
        .collect();
    let total: f64 = shape.iter().sum();
    for v in &mut shape {
        *v /= total;
    }
    shape
}

/// Fit the intermittent model: detected burst amplitudes are regressed
/// (through the origin) on the delayed yaw-rate error at their onsets,
/// and the steering rate is reconstructed as minimum-jerk pulses of the
/// gridded width. Ties break toward smaller T_R, then T_p, then width.
pub fn fit_intermittent_dpyre(
    seg: &AttemptSegment,
    path: &PathSpec,
    grid: &FitGrid,
) -> Result<ModelFit> {
    let input = prepare_fit(seg, path, grid)?;
    let n = input.sw_rate.len();
    let abs_rate: Vec<f64> = input.sw_rate.iter().map(|x| x.abs()).collect();
    let threshold = grid.threshold_fraction * percentile(&abs_rate, 90.0);
    let bursts = detect_adjustments(&input.sw_rate, input.rate, threshold, grid.min_separation);
    if bursts.is_empty() {
        return Err(Error::Fit(
            "no steering adjustments detected; intermittent model unidentifiable".into(),
        ));
    }
    let onset_idx: Vec<usize> =
        bursts.iter().map(|b| (b.t_onset * input.rate).round() as usize).collect();
    let avg_magnitude = mean(&bursts.iter().map(|b| b.amplitude.abs()).collect::<Vec<f64>>());

    let window = &input.sw_rate[input.window_start..];
    let m = window.len() as f64;
    let ss_tot = centred_sum_of_squares(window);

    let errs: Vec<(f64, Vec<f64>)> = grid
        .t_p_values()
        .into_iter()
        .map(|t_p| {
            omega_err_series(&seg.samples, path, t_p, &input.arcs).map(|e| (t_p, e))
        })
        .collect::<Result<_>>()?;
    let pulses: Vec<(f64, Vec<f64>)> = grid
        .burst_duration_values()
        .into_iter()
        .map(|w| {
            let width = ((w * input.rate).round() as usize).max(1);
            (w, min_jerk_pulse(width))
        })
        .collect();

    // rms, gain, t_r, t_p, width, ss_res
    let mut best: Option<(f64, f64, f64, f64, f64, f64)> = None;
    let mut predicted = vec![0.0; n];
    for t_r in grid.t_r_values() {
        let delay = (t_r * input.rate).round() as usize;
        for (t_p, err) in &errs {
            // regress amplitudes on the delayed error at burst onsets
            let mut sae = 0.0;
            let mut see = 0.0;
            let mut used: Vec<(usize, f64)> = Vec::new(); // onset idx, error
            for (b, &oi) in bursts.iter().zip(&onset_idx) {
                if oi < delay {
                    continue; // onset precedes the available error history
                }
                let e = err[oi - delay];
                sae += b.amplitude * e;
                see += e * e;
                used.push((oi, e));
            }
            if see < MIN_EXCITATION || used.is_empty() {
                continue;
            }
            let gain = -sae / see;
            for (width_s, shape) in &pulses {
                predicted.iter_mut().for_each(|v| *v = 0.0);
                for &(oi, e) in &used {
                    let amp = -gain * e;
                    for (j, w) in shape.iter().enumerate() {
                        if let Some(slot) = predicted.get_mut(oi + j) {
                            *slot += amp * w * input.rate;
                        }
                    }
                }
                let mut ss_res = 0.0;
                for i in input.window_start..n {
                    let r = input.sw_rate[i] - predicted[i];
                    ss_res += r * r;
                }
                let rms = (ss_res / m).sqrt();
                if best.map_or(true, |b| rms < b.0) {
                    best = Some((rms, gain, t_r, *t_p, *width_s, ss_res));
                }
            }
        }
    }
    let (rms, gain, t_r, t_p, width, ss_res) = best.ok_or_else(|| {
        Error::Fit("yaw-rate error at burst onsets has no variance; gain unidentifiable".into())
    })?;
    Ok(ModelFit {
        model: ModelKind::Idpyre,
        gain,
        t_r,
        t_p,
        rms_error: rms,
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
        degenerate: false,
        avg_adjustment_magnitude: Some(avg_magnitude),
        n_adjustments: Some(bursts.len() as u32),
        burst_duration: Some(width),
    })
}

/// The desired path an attempt is fitted against, in the task frame.
///
/// Lane-change and slalom attempts use the layout's nominal line mapped
/// into the task frame. Circle attempts use a circle at the origin whose
/// radius is the attempt's own median driven radius, oriented by the
/// net rotation of the data (falling back to the layout direction).
pub fn desired_path(layout: &TaskLayout, seg: &AttemptSegment) -> Result<PathSpec> {
    match layout.task {
        Task::Lct | Task::Slx => {
            let map = layout.task_frame_map()?;
            match &layout.nominal_path {
                PathSpec::Polyline { vertices } => Ok(PathSpec::Polyline {
                    vertices: vertices.iter().map(|&v| map.apply(v)).collect(),
                }),
                PathSpec::Circle { .. } => {
                    Err(Error::Fit("expected a polyline nominal path".into()))
                }
            }
        }
        Task::Clv => {
            let moving: Vec<&TrajectorySample> =
                seg.samples.iter().filter(|s| s.speed > 2.0).collect();
            if moving.len() < 3 {
                return Err(Error::Fit("too few moving samples to size the circle".into()));
            }
            let radii: Vec<f64> = moving.iter().map(|s| s.x.hypot(s.y)).collect();
            let net_rotation: f64 = moving
                .windows(2)
                .map(|w| wrap_angle(w[1].heading - w[0].heading))
                .sum();
            let direction = if net_rotation.abs() > 0.5 {
                if net_rotation < 0.0 {
                    Direction::Cw
                } else {
                    Direction::Ccw
                }
            } else {
                layout.direction.unwrap_or(Direction::Cw)
            };
            Ok(PathSpec::Circle { centre: (0.0, 0.0), radius: median(&radii), direction })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{Environment, LogMeta};
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    const RATE: f64 = 100.0;

    fn straight_path() -> PathSpec {
        PathSpec::Polyline { vertices: vec![(-100.0, 0.0), (2000.0, 0.0)] }
    }

    fn seg_from_channels(
        speed: f64,
        yaw_rate: &[f64],
        sw_rate: &[f64],
    ) -> AttemptSegment {
        let samples: Vec<TrajectorySample> = yaw_rate
            .iter()
            .zip(sw_rate)
            .enumerate()
            .map(|(i, (&w, &r))| {
                let t = i as f64 / RATE;
                TrajectorySample {
                    t,
                    x: speed * t,
                    y: 0.0,
                    heading: 0.0,
                    speed,
                    swa: 0.0,
                    yaw_rate: Some(w),
                    lat_accel: Some(0.0),
                    sw_rate: Some(r),
                }
            })
            .collect();
        AttemptSegment {
            meta: LogMeta {
                driver_id: "d1".into(),
                environment: Environment::Real,
                task: Task::Lct,
                sample_rate: RATE,
                realism_rating: None,
                extras: BTreeMap::new(),
            },
            attempt_index: 1,
            samples,
            cone_hits: None,
        }
    }

    // --- desired_yaw_rate ------------------------------------------------

    #[test]
    fn target_dead_ahead_needs_no_yaw() {
        let w = desired_yaw_rate((0.0, 0.0, 0.0), 10.0, &straight_path(), 1.0).unwrap();
        assert_relative_eq!(w, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn forty_five_degree_target_hand_geometry() {
        // target (10, 10): α = 45°, L = √200 → 2·10·sin45°/√200 = 1 rad/s
        let w = yaw_rate_towards((0.0, 0.0, 0.0), 10.0, (10.0, 10.0)).unwrap();
        assert_relative_eq!(w, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn on_circle_preview_reproduces_curvature() {
        for (dir, sign) in [(Direction::Ccw, 1.0), (Direction::Cw, -1.0)] {
            let path = PathSpec::Circle { centre: (0.0, 0.0), radius: 50.0, direction: dir };
            // pose on the circle at angle 0, heading tangent to `dir`
            let pose = (50.0, 0.0, sign * std::f64::consts::FRAC_PI_2);
            for t_p in [0.5, 1.0, 2.5] {
                let w = desired_yaw_rate(pose, 14.0, &path, t_p).unwrap();
                assert_relative_eq!(w, sign * 14.0 / 50.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn mirror_reflection_flips_the_sign() {
        let path = PathSpec::Polyline { vertices: vec![(0.0, 0.0), (30.0, 10.0), (60.0, 0.0)] };
        let mirrored = PathSpec::Polyline {
            vertices: vec![(0.0, 0.0), (30.0, -10.0), (60.0, 0.0)],
        };
        for x in [2.0, 10.0, 25.0] {
            let w = desired_yaw_rate((x, 1.0, 0.1), 9.0, &path, 1.2).unwrap();
            let wm = desired_yaw_rate((x, -1.0, -0.1), 9.0, &mirrored, 1.2).unwrap();
            assert_relative_eq!(w, -wm, epsilon = 1e-9);
        }
    }

    #[test]
    fn degenerate_target_errors() {
        // a circle so small every point of it sits on top of the vehicle
        let path = PathSpec::Circle {
            centre: (0.0, 0.0),
            radius: 0.001,
            direction: Direction::Ccw,
        };
        let err = desired_yaw_rate((0.0, 0.0, 0.0), 8.0, &path, 0.5).unwrap_err();
        assert!(err.to_string().contains("degenerate preview target"), "{err}");
    }

    #[test]
    fn an_exhausted_path_demands_nothing() {
        // pose projecting onto the final vertex: no forward path remains,
        // so the model stops aiming instead of chasing a point behind it
        let path = PathSpec::Polyline { vertices: vec![(0.0, 0.0), (1.0, 0.0)] };
        let w = desired_yaw_rate((5.0, 0.0, 0.0), 8.0, &path, 0.5).unwrap();
        assert_eq!(w, 0.0);
    }

    // --- dpyre_predict ---------------------------------------------------

    #[test]
    fn constant_error_gives_constant_prediction() {
        let n = 500;
        let seg = seg_from_channels(10.0, &vec![0.1; n], &vec![0.0; n]);
        let cfg = DpyreConfig { gain: 2.0, t_r: 0.0, t_p: 1.0 };
        let pred = dpyre_predict(&seg, &straight_path(), &cfg).unwrap();
        for v in &pred {
            assert_relative_eq!(*v, -0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_error_gives_zero_prediction() {
        let n = 500;
        let seg = seg_from_channels(10.0, &vec![0.0; n], &vec![0.0; n]);
        let cfg = DpyreConfig { gain: 13.0, t_r: 0.2, t_p: 1.0 };
        let pred = dpyre_predict(&seg, &straight_path(), &cfg).unwrap();
        assert!(pred.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn prediction_is_linear_in_gain() {
        let n = 600;
        let yaw: Vec<f64> = (0..n).map(|i| (i as f64 * 0.03).sin() * 0.2).collect();
        let seg = seg_from_channels(12.0, &yaw, &vec![0.0; n]);
        let one = dpyre_predict(&seg, &straight_path(), &DpyreConfig { gain: 5.0, t_r: 0.1, t_p: 1.0 })
            .unwrap();
        let two =
            dpyre_predict(&seg, &straight_path(), &DpyreConfig { gain: 10.0, t_r: 0.1, t_p: 1.0 })
                .unwrap();
        for (a, b) in one.iter().zip(&two) {
            assert_relative_eq!(2.0 * a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn delay_shifts_the_prediction() {
        let n = 800;
        let yaw: Vec<f64> = (0..n).map(|i| (i as f64 * 0.05).sin() * 0.3).collect();
        let seg = seg_from_channels(12.0, &yaw, &vec![0.0; n]);
        let base =
            dpyre_predict(&seg, &straight_path(), &DpyreConfig { gain: 3.0, t_r: 0.0, t_p: 1.0 })
                .unwrap();
        let delayed =
            dpyre_predict(&seg, &straight_path(), &DpyreConfig { gain: 3.0, t_r: 0.25, t_p: 1.0 })
                .unwrap();
        let d = 25;
        for i in d..n {
            assert_relative_eq!(delayed[i], base[i - d], epsilon = 1e-12);
        }
        assert!(delayed[..d].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn excessive_delay_errors() {
        let seg = seg_from_channels(10.0, &vec![0.1; 50], &vec![0.0; 50]);
        let cfg = DpyreConfig { gain: 1.0, t_r: 10.0, t_p: 1.0 };
        assert!(dpyre_predict(&seg, &straight_path(), &cfg).is_err());
    }

    // --- fit_dpyre ---------------------------------------------------------

    /// Data generated by the model equation itself on a straight path:
    /// ω_des = 0, so ω_err equals the prescribed yaw-rate series.
    fn model_generated(gain: f64, t_r: f64, duration: f64) -> AttemptSegment {
        let n = (duration * RATE) as usize;
        let d = (t_r * RATE).round() as usize;
        let yaw: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / RATE;
                0.2 * (2.0 * std::f64::consts::PI * 0.3 * t).sin()
                    + 0.1 * (2.0 * std::f64::consts::PI * 0.17 * t + 0.8).sin()
            })
            .collect();
        let sw: Vec<f64> =
            (0..n).map(|i| if i >= d { -gain * yaw[i - d] } else { 0.0 }).collect();
        seg_from_channels(12.0, &yaw, &sw)
    }

    #[test]
    fn fit_recovers_generating_parameters() {
        let seg = model_generated(7.5, 0.25, 40.0);
        let fit = fit_dpyre(&seg, &straight_path(), &FitGrid::default()).unwrap();
        assert_eq!(fit.model, ModelKind::Dpyre);
        assert_relative_eq!(fit.t_r, 0.25, epsilon = 1e-12);
        assert_relative_eq!(fit.gain, 7.5, epsilon = 1e-6);
        assert!(fit.r_squared > 0.999, "r² = {}", fit.r_squared);
        assert!(fit.rms_error < 1e-6);
        // ω_des = 0 makes every preview equivalent; ties go to the smallest
        assert_relative_eq!(fit.t_p, 0.5);
        assert!(!fit.degenerate);
    }

    #[test]
    fn closed_form_gain_matches_brute_force_scan() {
        let seg = model_generated(7.5, 0.25, 40.0);
        let grid = FitGrid::default();
        let fit = fit_dpyre(&seg, &straight_path(), &grid).unwrap();

        // independent 1-D scan of the RMS over K at the fitted (T_R, T_p)
        let cfg = |k| DpyreConfig { gain: k, t_r: fit.t_r, t_p: fit.t_p };
        let sw: Vec<f64> = seg.samples.iter().map(|s| s.sw_rate.unwrap()).collect();
        let start = (grid.t_r_max * RATE).round() as usize;
        let rms_of = |k: f64| {
            let pred = dpyre_predict(&seg, &straight_path(), &cfg(k)).unwrap();
            let ss: f64 = (start..sw.len()).map(|i| (sw[i] - pred[i]).powi(2)).sum();
            (ss / (sw.len() - start) as f64).sqrt()
        };
        let mut best = (f64::INFINITY, 0.0);
        let mut k = 0.0;
        while k <= 15.0 {
            let r = rms_of(k);
            if r < best.0 {
                best = (r, k);
            }
            k += 0.005;
        }
        assert!(
            (best.1 - fit.gain).abs() <= 0.005 + 0.001 * fit.gain.abs(),
            "scan {} vs closed form {}",
            best.1,
            fit.gain
        );
    }

    #[test]
    fn zero_steering_rate_is_degenerate() {
        let n = 4000;
        let yaw: Vec<f64> = (0..n).map(|i| (i as f64 * 0.02).sin() * 0.2).collect();
        let seg = seg_from_channels(12.0, &yaw, &vec![0.0; n]);
        let fit = fit_dpyre(&seg, &straight_path(), &FitGrid::default()).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.gain, 0.0);
        assert_eq!(fit.r_squared, 1.0);
        assert_eq!(fit.rms_error, 0.0);
    }

    #[test]
    fn no_excitation_errors() {
        let n = 4000;
        let sw: Vec<f64> = (0..n).map(|i| (i as f64 * 0.02).sin() * 0.2).collect();
        let seg = seg_from_channels(12.0, &vec![0.0; n], &sw);
        let err = fit_dpyre(&seg, &straight_path(), &FitGrid::default()).unwrap_err();
        assert!(err.to_string().contains("unidentifiable"), "{err}");
    }

    #[test]
    fn short_segments_are_rejected() {
        let seg = model_generated(7.5, 0.25, 2.5);
        let err = fit_dpyre(&seg, &straight_path(), &FitGrid::default()).unwrap_err();
        assert!(err.to_string().contains("too short"), "{err}");
    }

    // --- detect_adjustments ----------------------------------------------

    #[test]
    fn silence_has_no_adjustments() {
        assert!(detect_adjustments(&vec![0.0; 1000], RATE, 0.1, 0.1).is_empty());
    }

    #[test]
    fn sub_threshold_pulse_is_ignored() {
        let mut x = vec![0.0; 1000];
        for (i, v) in x.iter_mut().enumerate().take(400).skip(300) {
            *v = 0.05 * ((i - 300) as f64 / 100.0 * std::f64::consts::PI).sin();
        }
        assert!(detect_adjustments(&x, RATE, 0.1, 0.1).is_empty());
    }

    #[test]
    fn gaussian_pulse_amplitudes_match_quadrature() {
        // two unit-area Gaussian rate pulses, σ = 0.1 s, centred 2 s apart
        let sigma = 0.1f64;
        let n = 600;
        let pdf = |t: f64, c: f64| {
            (-(t - c) * (t - c) / (2.0 * sigma * sigma)).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let x: Vec<f64> =
            (0..n).map(|i| pdf(i as f64 / RATE, 2.0) + pdf(i as f64 / RATE, 4.0)).collect();
        let peak = pdf(0.0, 0.0);
        let bursts = detect_adjustments(&x, RATE, 0.1 * peak, 0.1);
        assert_eq!(bursts.len(), 2);

        // oracle: fine trapezoid quadrature of one pulse over the region
        // where it exceeds 10% of its peak
        let half_width = sigma * (2.0 * (10.0f64).ln()).sqrt();
        let fine = 200_000;
        let mut area = 0.0;
        for i in 0..fine {
            let a = -half_width + 2.0 * half_width * i as f64 / fine as f64;
            let b = -half_width + 2.0 * half_width * (i + 1) as f64 / fine as f64;
            area += 0.5 * (pdf(a, 0.0) + pdf(b, 0.0)) * (b - a);
        }
        for b in &bursts {
            assert!((b.amplitude - area).abs() <= 0.01, "amp {} vs oracle {area}", b.amplitude);
            // published rounding of the same quantity
            assert!((b.amplitude - 0.98).abs() <= 0.02);
        }
        assert_relative_eq!(bursts[1].t_onset - bursts[0].t_onset, 2.0, epsilon = 0.02);
    }

    #[test]
    fn nearby_runs_merge_into_one_burst() {
        let mut x = vec![0.0; 1000];
        for v in &mut x[100..120] {
            *v = 1.0;
        }
        for v in &mut x[125..145] {
            *v = 1.0;
        }
        let merged = detect_adjustments(&x, RATE, 0.5, 0.1);
        assert_eq!(merged.len(), 1);
        assert_relative_eq!(merged[0].amplitude, 0.4, epsilon = 1e-9);

        let split = detect_adjustments(&x, RATE, 0.5, 0.01);
        assert_eq!(split.len(), 2);
        assert_relative_eq!(split[0].amplitude, 0.2, epsilon = 1e-9);
    }

    // --- intermittent fit ---------------------------------------------------

    /// Data generated by the intermittent model itself: bursts every 1.7 s
    /// with amplitude −k·ω_err(t_onset − T_R), minimum-jerk shape.
    fn intermittent_generated(k: f64, t_r: f64, width: f64) -> AttemptSegment {
        let duration = 60.0;
        let n = (duration * RATE) as usize;
        let yaw: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / RATE;
                0.15 * (2.0 * std::f64::consts::PI * 0.21 * t).sin()
                    + 0.1 * (2.0 * std::f64::consts::PI * 0.13 * t + 1.0).sin()
            })
            .collect();
        let w = (width * RATE).round() as usize;
        let shape = min_jerk_pulse(w);
        let d = (t_r * RATE).round() as usize;
        let mut sw = vec![0.0; n];
        let mut t_onset = 1.0;
        while t_onset < duration - 3.0 {
            let oi = (t_onset * RATE).round() as usize;
            if oi >= d {
                let amp = -k * yaw[oi - d];
                for (j, s) in shape.iter().enumerate() {
                    sw[oi + j] += amp * s * RATE;
                }
            }
            t_onset += 1.7;
        }
        seg_from_channels(12.0, &yaw, &sw)
    }

    #[test]
    fn intermittent_fit_recovers_generating_parameters() {
        let seg = intermittent_generated(2.0, 0.2, 0.4);
        let grid = FitGrid::default();
        let fit = fit_intermittent_dpyre(&seg, &straight_path(), &grid).unwrap();
        assert_eq!(fit.model, ModelKind::Idpyre);
        assert!((fit.gain - 2.0).abs() <= 0.2, "k = {}", fit.gain);
        assert!((fit.t_r - 0.2).abs() <= grid.t_r_step + 1e-9, "T_R = {}", fit.t_r);
        assert!(
            (fit.burst_duration.unwrap() - 0.4).abs() <= grid.burst_duration_step + 1e-9,
            "width = {:?}",
            fit.burst_duration
        );
        assert!(fit.r_squared > 0.7, "r² = {}", fit.r_squared);
        assert!(fit.n_adjustments.unwrap() >= 20);

        // the continuous model cannot explain spiky steering as well
        let continuous = fit_dpyre(&seg, &straight_path(), &grid).unwrap();
        assert!(
            fit.r_squared >= continuous.r_squared,
            "idpyre {} < dpyre {}",
            fit.r_squared,
            continuous.r_squared
        );
    }

    #[test]
    fn uniform_amplitudes_average_exactly() {
        // three identical pulses of integrated amplitude 0.05 rad
        let n = 3000;
        let mut sw = vec![0.0; n];
        let shape = min_jerk_pulse(40);
        for start in [500, 1200, 1900] {
            for (j, s) in shape.iter().enumerate() {
                sw[start + j] += 0.05 * s * RATE;
            }
        }
        let yaw: Vec<f64> = (0..n).map(|i| 0.2 * (i as f64 * 0.01).sin()).collect();
        let seg = seg_from_channels(12.0, &yaw, &sw);
        let fit = fit_intermittent_dpyre(&seg, &straight_path(), &FitGrid::default()).unwrap();
        assert_eq!(fit.n_adjustments, Some(3));
        assert_relative_eq!(fit.avg_adjustment_magnitude.unwrap(), 0.05, epsilon = 1e-9);
    }

    #[test]
    fn no_bursts_errors() {
        let n = 4000;
        let yaw: Vec<f64> = (0..n).map(|i| 0.2 * (i as f64 * 0.01).sin()).collect();
        let seg = seg_from_channels(12.0, &yaw, &vec![0.0; n]);
        let err = fit_intermittent_dpyre(&seg, &straight_path(), &FitGrid::default()).unwrap_err();
        assert!(err.to_string().contains("no steering adjustments"), "{err}");
    }

    // --- desired_path --------------------------------------------------------

    #[test]
    fn desired_path_for_circle_uses_driven_radius_and_direction() {
        use crate::layout::TaskLayout;
        let layout = TaskLayout::builtin(Task::Clv);
        // clockwise ring of radius 54 about the origin (task frame)
        let samples: Vec<TrajectorySample> = (0..2000)
            .map(|i| {
                let t = i as f64 * 0.01;
                let a = -t * 0.25;
                TrajectorySample {
                    t,
                    x: 54.0 * a.cos(),
                    y: 54.0 * a.sin(),
                    heading: wrap_angle(a - std::f64::consts::FRAC_PI_2),
                    speed: 13.5,
                    swa: 0.0,
                    yaw_rate: Some(-0.25),
                    lat_accel: Some(0.0),
                    sw_rate: Some(0.0),
                }
            })
            .collect();
        let seg = AttemptSegment {
            meta: LogMeta {
                driver_id: "d".into(),
                environment: Environment::Std,
                task: Task::Clv,
                sample_rate: 100.0,
                realism_rating: None,
                extras: BTreeMap::new(),
            },
            attempt_index: 1,
            samples,
            cone_hits: None,
        };
        match desired_path(&layout, &seg).unwrap() {
            PathSpec::Circle { centre, radius, direction } => {
                assert_eq!(centre, (0.0, 0.0));
                assert_relative_eq!(radius, 54.0, epsilon = 1e-9);
                assert_eq!(direction, Direction::Cw);
            }
            other => panic!("expected a circle, got {other:?}"),
        }
    }

    #[test]
    fn desired_path_for_polyline_tasks_is_the_mapped_nominal_line() {
        use crate::layout::TaskLayout;
        let layout = TaskLayout::builtin(Task::Lct);
        let seg = seg_from_channels(10.0, &[0.0; 10], &[0.0; 10]);
        match desired_path(&layout, &seg).unwrap() {
            PathSpec::Polyline { vertices } => {
                let map = layout.task_frame_map().unwrap();
                // anchor maps to the origin; path passes through y = -1 there
                let (ax, ay) = layout.nominal_anchor().unwrap();
                assert_eq!(map.apply((ax, ay)), (0.0, 0.0));
                // first vertex keeps its lane offset
                assert_relative_eq!(vertices[0].1, 1.0, epsilon = 1e-9);
            }
            other => panic!("expected a polyline, got {other:?}"),
        }
    }
}

//! Per-attempt driving performance measures.
//!
//! Two families are computed over a task-specific manoeuvre window:
//! aggregate measures (cone hits, speed/radius variability, peak lateral
//! acceleration) and time-series measures (entry speed, lateral travel,
//! slalom peak amplitudes, steering reversal rates).

use crate::error::{Error, Result};
use crate::extract::AttemptSegment;
use crate::layout::TaskLayout;
use crate::signal::{local_extrema, mean, moving_average, sample_sd, window_samples};
use crate::trajectory::{Task, TrajectorySample};

/// Unit tag attached to every metric value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Count,
    MetersPerSecond,
    MetersPerSecondSquared,
    Meters,
    Hertz,
    Seconds,
    Dimensionless,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Count => "count",
            Unit::MetersPerSecond => "m/s",
            Unit::MetersPerSecondSquared => "m/s²",
            Unit::Meters => "m",
            Unit::Hertz => "Hz",
            Unit::Seconds => "s",
            Unit::Dimensionless => "dimensionless",
        }
    }

    pub fn parse(s: &str) -> Option<Unit> {
        match s {
            "count" => Some(Unit::Count),
            "m/s" => Some(Unit::MetersPerSecond),
            "m/s²" => Some(Unit::MetersPerSecondSquared),
            "m" => Some(Unit::Meters),
            "Hz" => Some(Unit::Hertz),
            "s" => Some(Unit::Seconds),
            "dimensionless" => Some(Unit::Dimensionless),
            _ => None,
        }
    }
}

impl std::fmt::Display for Unit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether a metric set holds aggregate or time-series measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricCategory {
    Aggregate,
    TimeSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    pub name: &'static str,
    pub value: f64,
    pub unit: Unit,
}

/// The measures of one category for one attempt. The name set is closed
/// per (task, category); [`MetricSet::validate`] enforces it.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSet {
    pub task: Task,
    pub category: MetricCategory,
    pub values: Vec<MetricValue>,
}

/// The exact measures defined for a task and category, in output order.
pub fn expected_metrics(task: Task, category: MetricCategory) -> &'static [(&'static str, Unit)] {
    use MetricCategory::*;
    use Unit::*;
    match (task, category) {
        (Task::Lct, Aggregate) => &[
            ("cones_hit", Count),
            ("speed_var", MetersPerSecond),
            ("max_lat_accel", MetersPerSecondSquared),
        ],
        (Task::Slx, Aggregate) => &[("cones_hit", Count), ("speed_var", MetersPerSecond)],
        (Task::Clv, Aggregate) => &[("speed_var", MetersPerSecond), ("radius_var", Meters)],
        (Task::Lct, TimeSeries) => &[
            ("initial_speed", MetersPerSecond),
            ("total_lat_travel", Meters),
            ("swrr_1", Hertz),
            ("swrr_10", Hertz),
        ],
        (Task::Slx, TimeSeries) => &[
            ("avg_speed", MetersPerSecond),
            ("peak_lat_amp", Meters),
            ("peak_lat_amp_var", Meters),
            ("swrr_1", Hertz),
            ("swrr_10", Hertz),
        ],
        (Task::Clv, TimeSeries) => &[
            ("avg_speed", MetersPerSecond),
            ("avg_radius", Meters),
            ("swrr_1", Hertz),
            ("swrr_10", Hertz),
        ],
    }
}

impl MetricSet {
    pub fn validate(&self) -> Result<()> {
        let expected = expected_metrics(self.task, self.category);
        if self.values.len() != expected.len() {
            return Err(Error::Metrics(format!(
                "metric set for {} has {} entries, expected {}",
                self.task,
                self.values.len(),
                expected.len()
            )));
        }
        for (v, (name, unit)) in self.values.iter().zip(expected) {
            if v.name != *name || v.unit != *unit {
                return Err(Error::Metrics(format!(
                    "unexpected metric '{}' ({}), expected '{}' ({})",
                    v.name, v.unit, name, unit
                )));
            }
            if !v.value.is_finite() {
                return Err(Error::Metrics(format!("metric '{}' is not finite", v.name)));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|v| v.name == name).map(|v| v.value)
    }
}

/// Steering reversal gap presets.
pub const GAP_1_DEG: f64 = std::f64::consts::PI / 180.0;
pub const GAP_10_DEG: f64 = 10.0 * std::f64::consts::PI / 180.0;

/// Steering-wheel reversal rate in Hz.
///
/// The wheel angle is smoothed with a 0.1 s moving average; each local
/// extremum whose swing to an adjacent extremum (or to the series
/// boundary) reaches `gap` counts as one reversal.
pub fn swrr(swa: &[f64], sample_rate: f64, duration: f64, gap: f64) -> Result<f64> {
    if !(duration > 0.0) {
        return Err(Error::Metrics("swrr needs a positive duration".into()));
    }
    if !(gap > 0.0) {
        return Err(Error::Metrics("swrr needs a positive gap".into()));
    }
    if swa.len() < 3 {
        return Ok(0.0);
    }
    let smooth = moving_average(swa, window_samples(0.1, sample_rate));
    let extrema = local_extrema(&smooth);
    let mut count = 0usize;
    for (k, e) in extrema.iter().enumerate() {
        let prev = if k == 0 { smooth[0] } else { extrema[k - 1].value };
        let next = if k + 1 == extrema.len() { *smooth.last().unwrap() } else { extrema[k + 1].value };
        let swing = (e.value - prev).abs().max((next - e.value).abs());
        if swing >= gap {
            count += 1;
        }
    }
    Ok(count as f64 / duration)
}

/// Vehicle footprint used for geometric cone-hit detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootprintConfig {
    pub length: f64,
    pub width: f64,
}

impl Default for FootprintConfig {
    fn default() -> Self {
        FootprintConfig { length: 4.9, width: 1.9 }
    }
}

/// Does the vehicle rectangle (centred at x, y, oriented by `heading`)
/// overlap a cone disc?
pub fn footprint_intersects_cone(
    x: f64,
    y: f64,
    heading: f64,
    footprint: &FootprintConfig,
    cone_x: f64,
    cone_y: f64,
    cone_radius: f64,
) -> bool {
    let (sin_h, cos_h) = heading.sin_cos();
    let dx = cone_x - x;
    let dy = cone_y - y;
    // cone centre in the vehicle frame
    let u = dx * cos_h + dy * sin_h;
    let v = -dx * sin_h + dy * cos_h;
    let half_l = 0.5 * footprint.length;
    let half_w = 0.5 * footprint.width;
    let du = u - u.clamp(-half_l, half_l);
    let dv = v - v.clamp(-half_w, half_w);
    du * du + dv * dv <= cone_radius * cone_radius
}

/// Count cones touched at least once along a trajectory. Cone positions
/// are given in the same frame as the samples.
pub fn count_cone_hits(
    samples: &[TrajectorySample],
    cones: &[(f64, f64, f64)],
    footprint: &FootprintConfig,
) -> u32 {
    let mut hits = 0;
    for &(cx, cy, cr) in cones {
        if samples
            .iter()
            .any(|s| footprint_intersects_cone(s.x, s.y, s.heading, footprint, cx, cy, cr))
        {
            hits += 1;
        }
    }
    hits
}

fn x_window<'a>(
    samples: &'a [TrajectorySample],
    x_lo: f64,
    x_hi: f64,
) -> Result<&'a [TrajectorySample]> {
    let i0 = samples.iter().position(|s| s.x >= x_lo).ok_or_else(|| {
        Error::Metrics(format!("manoeuvre window is empty: attempt never reaches x = {x_lo:.1}"))
    })?;
    let rel = samples[i0..].iter().rposition(|s| s.x <= x_hi).ok_or_else(|| {
        Error::Metrics("manoeuvre window is empty: no samples before the window end".into())
    })?;
    Ok(&samples[i0..=i0 + rel])
}

/// Steady-state window for circle tasks: from the first sample at 90% of
/// the attempt's top speed until speed first drops below 80% of it.
fn steady_window(samples: &[TrajectorySample]) -> Result<&[TrajectorySample]> {
    let vmax = samples.iter().map(|s| s.speed).fold(f64::NEG_INFINITY, f64::max);
    if !(vmax > 0.0) {
        return Err(Error::Metrics("attempt never moves; no steady-state window".into()));
    }
    let i0 = samples.iter().position(|s| s.speed >= 0.9 * vmax).unwrap();
    let end = samples[i0..]
        .iter()
        .position(|s| s.speed < 0.8 * vmax)
        .map(|k| i0 + k)
        .unwrap_or(samples.len());
    let win = &samples[i0..end];
    if win.len() < 2 {
        return Err(Error::Metrics("steady-state window is too short".into()));
    }
    Ok(win)
}

/// The manoeuvre window of an attempt: LCT between entry and final gate,
/// SLX from the entry gate to 25 m past the last cone, CLV the
/// steady-speed laps.
pub fn manoeuvre_window<'a>(
    seg: &'a AttemptSegment,
    layout: &TaskLayout,
) -> Result<&'a [TrajectorySample]> {
    if seg.samples.is_empty() {
        return Err(Error::Metrics("attempt has no samples".into()));
    }
    let map = layout.task_frame_map()?;
    match layout.task {
        Task::Lct => {
            let gates = layout.lct_gates()?;
            let first = gates.first().unwrap();
            let last = gates.last().unwrap();
            let x_lo = map.apply((first.x, first.y_centre)).0;
            let x_hi = map.apply((last.x, last.y_centre)).0;
            x_window(&seg.samples, x_lo, x_hi)
        }
        Task::Slx => {
            let (g1, g2) = layout.slx_gate()?;
            let gate = map.apply((0.5 * (g1.x + g2.x), 0.5 * (g1.y + g2.y)));
            let cones = layout.slx_slalom_cones()?;
            let last = cones.last().unwrap();
            let x_hi = map.apply((last.x, last.y)).0 + 25.0;
            x_window(&seg.samples, gate.0, x_hi)
        }
        Task::Clv => steady_window(&seg.samples),
    }
}

fn window_duration(win: &[TrajectorySample]) -> Result<f64> {
    let d = win.last().unwrap().t - win[0].t;
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::Metrics("manoeuvre window has zero duration".into()))
    }
}

fn window_rate(win: &[TrajectorySample]) -> f64 {
    if win.len() < 2 {
        return crate::CANONICAL_RATE;
    }
    (win.len() - 1) as f64 / (win.last().unwrap().t - win[0].t)
}

fn max_abs_lat_accel(win: &[TrajectorySample]) -> Result<f64> {
    let mut best = 0.0f64;
    for s in win {
        let a = s.lat_accel.ok_or_else(|| {
            Error::Metrics("lat_accel channel missing; derive kinematics first".into())
        })?;
        best = best.max(a.abs());
    }
    Ok(best)
}

/// Number of cones struck during the attempt: the recorded count when the
/// source log carries one, otherwise geometric detection against the
/// layout's cones (mapped into the task frame).
fn cones_hit(seg: &AttemptSegment, layout: &TaskLayout) -> Result<f64> {
    if let Some(n) = seg.cone_hits {
        return Ok(n as f64);
    }
    let map = layout.task_frame_map()?;
    let cones: Vec<(f64, f64, f64)> = layout
        .cones
        .iter()
        .map(|c| {
            let p = map.apply((c.x, c.y));
            (p.0, p.1, c.radius)
        })
        .collect();
    Ok(count_cone_hits(&seg.samples, &cones, &FootprintConfig::default()) as f64)
}

/// Aggregate performance measures for one attempt.
pub fn aggregate_metrics(seg: &AttemptSegment, layout: &TaskLayout) -> Result<MetricSet> {
    if seg.meta.task != layout.task {
        return Err(Error::Metrics(format!(
            "attempt is for task {} but layout is for {}",
            seg.meta.task, layout.task
        )));
    }
    let win = manoeuvre_window(seg, layout)?;
    let speeds: Vec<f64> = win.iter().map(|s| s.speed).collect();
    let speed_var = sample_sd(&speeds);
    let values = match layout.task {
        Task::Lct => vec![
            MetricValue { name: "cones_hit", value: cones_hit(seg, layout)?, unit: Unit::Count },
            MetricValue { name: "speed_var", value: speed_var, unit: Unit::MetersPerSecond },
            MetricValue {
                name: "max_lat_accel",
                value: max_abs_lat_accel(win)?,
                unit: Unit::MetersPerSecondSquared,
            },
        ],
        Task::Slx => vec![
            MetricValue { name: "cones_hit", value: cones_hit(seg, layout)?, unit: Unit::Count },
            MetricValue { name: "speed_var", value: speed_var, unit: Unit::MetersPerSecond },
        ],
        Task::Clv => {
            let radii: Vec<f64> = win.iter().map(|s| s.x.hypot(s.y)).collect();
            vec![
                MetricValue { name: "speed_var", value: speed_var, unit: Unit::MetersPerSecond },
                MetricValue { name: "radius_var", value: sample_sd(&radii), unit: Unit::Meters },
            ]
        }
    };
    let set = MetricSet { task: layout.task, category: MetricCategory::Aggregate, values };
    set.validate()?;
    Ok(set)
}

/// Peak lateral excursion (about the slalom centreline) beside each cone,
/// for cones the attempt actually passes.
fn slalom_peaks(win: &[TrajectorySample], layout: &TaskLayout) -> Result<Vec<f64>> {
    let map = layout.task_frame_map()?;
    let cones = layout.slx_slalom_cones()?;
    let task_cones: Vec<(f64, f64)> = cones.iter().map(|c| map.apply((c.x, c.y))).collect();
    let y_centre = mean(&task_cones.iter().map(|c| c.1).collect::<Vec<f64>>());
    let half_span = 12.5;
    let mut peaks = Vec::new();
    for (cx, _) in &task_cones {
        let peak = win
            .iter()
            .filter(|s| (s.x - cx).abs() <= half_span)
            .map(|s| (s.y - y_centre).abs())
            .fold(f64::NEG_INFINITY, f64::max);
        if peak.is_finite() {
            peaks.push(peak);
        }
    }
    if peaks.len() < 2 {
        return Err(Error::Metrics(format!(
            "only {} slalom peak(s) detected; need at least 2",
            peaks.len()
        )));
    }
    Ok(peaks)
}

/// Time-series measures for one attempt.
pub fn timeseries_metrics(seg: &AttemptSegment, layout: &TaskLayout) -> Result<MetricSet> {
    if seg.meta.task != layout.task {
        return Err(Error::Metrics(format!(
            "attempt is for task {} but layout is for {}",
            seg.meta.task, layout.task
        )));
    }
    let win = manoeuvre_window(seg, layout)?;
    let duration = window_duration(win)?;
    let rate = window_rate(win);
    let swa: Vec<f64> = win.iter().map(|s| s.swa).collect();
    let swrr_1 = swrr(&swa, rate, duration, GAP_1_DEG)?;
    let swrr_10 = swrr(&swa, rate, duration, GAP_10_DEG)?;
    let mps = Unit::MetersPerSecond;

    let values = match layout.task {
        Task::Lct => {
            let t0 = win[0].t;
            let t1 = win.last().unwrap().t;
            let first: Vec<&TrajectorySample> =
                win.iter().take_while(|s| s.t <= t0 + 1.0).collect();
            let last: Vec<&TrajectorySample> =
                win.iter().skip_while(|s| s.t < t1 - 1.0).collect();
            let initial_speed =
                first.iter().map(|s| s.speed).sum::<f64>() / first.len() as f64;
            let y_first = first.iter().map(|s| s.y).sum::<f64>() / first.len() as f64;
            let y_last = last.iter().map(|s| s.y).sum::<f64>() / last.len() as f64;
            vec![
                MetricValue { name: "initial_speed", value: initial_speed, unit: mps },
                MetricValue {
                    name: "total_lat_travel",
                    value: (y_last - y_first).abs(),
                    unit: Unit::Meters,
                },
                MetricValue { name: "swrr_1", value: swrr_1, unit: Unit::Hertz },
                MetricValue { name: "swrr_10", value: swrr_10, unit: Unit::Hertz },
            ]
        }
        Task::Slx => {
            let peaks = slalom_peaks(win, layout)?;
            let speeds: Vec<f64> = win.iter().map(|s| s.speed).collect();
            vec![
                MetricValue { name: "avg_speed", value: mean(&speeds), unit: mps },
                MetricValue { name: "peak_lat_amp", value: mean(&peaks), unit: Unit::Meters },
                MetricValue {
                    name: "peak_lat_amp_var",
                    value: sample_sd(&peaks),
                    unit: Unit::Meters,
                },
                MetricValue { name: "swrr_1", value: swrr_1, unit: Unit::Hertz },
                MetricValue { name: "swrr_10", value: swrr_10, unit: Unit::Hertz },
            ]
        }
        Task::Clv => {
            let speeds: Vec<f64> = win.iter().map(|s| s.speed).collect();
            let radii: Vec<f64> = win.iter().map(|s| s.x.hypot(s.y)).collect();
            vec![
                MetricValue { name: "avg_speed", value: mean(&speeds), unit: mps },
                MetricValue { name: "avg_radius", value: mean(&radii), unit: Unit::Meters },
                MetricValue { name: "swrr_1", value: swrr_1, unit: Unit::Hertz },
                MetricValue { name: "swrr_10", value: swrr_10, unit: Unit::Hertz },
            ]
        }
    };
    let set = MetricSet { task: layout.task, category: MetricCategory::TimeSeries, values };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{derive_kinematics, DriveLog, Environment, LogMeta};
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    const RATE: f64 = 100.0;

    fn meta(task: Task) -> LogMeta {
        LogMeta {
            driver_id: "d1".into(),
            environment: Environment::Real,
            task,
            sample_rate: RATE,
            realism_rating: None,
            extras: BTreeMap::new(),
        }
    }

    fn seg(task: Task, samples: Vec<TrajectorySample>) -> AttemptSegment {
        // fill kinematic channels the way the pipeline would
        let log = DriveLog::new(meta(task), samples).unwrap();
        let log = derive_kinematics(&log, 0.05).unwrap();
        AttemptSegment {
            meta: log.meta.clone(),
            attempt_index: 1,
            samples: log.samples().to_vec(),
            cone_hits: None,
        }
    }

    // --- swrr ----------------------------------------------------------

    fn sinusoid(amp_deg: f64, freq: f64, duration: f64) -> Vec<f64> {
        let n = (duration * RATE) as usize;
        (0..n)
            .map(|i| {
                amp_deg.to_radians() * (2.0 * std::f64::consts::PI * freq * i as f64 / RATE).sin()
            })
            .collect()
    }

    #[test]
    fn swrr_quarter_hertz_sinusoid_is_half_hertz() {
        let swa = sinusoid(10.0, 0.25, 60.0);
        let r1 = swrr(&swa, RATE, 60.0, GAP_1_DEG).unwrap();
        let r10 = swrr(&swa, RATE, 60.0, GAP_10_DEG).unwrap();
        assert!((r1 - 0.5).abs() <= 0.01, "swrr_1 = {r1}");
        assert!((r10 - 0.5).abs() <= 0.01, "swrr_10 = {r10}");
    }

    #[test]
    fn swrr_small_swings_fail_the_wide_gap() {
        let swa = sinusoid(4.0, 0.25, 60.0);
        let r1 = swrr(&swa, RATE, 60.0, GAP_1_DEG).unwrap();
        let r10 = swrr(&swa, RATE, 60.0, GAP_10_DEG).unwrap();
        assert!((r1 - 0.5).abs() <= 0.01, "swrr_1 = {r1}");
        assert_eq!(r10, 0.0);
    }

    #[test]
    fn swrr_of_constant_and_monotonic_signals_is_zero() {
        let constant = vec![0.3; 600];
        assert_eq!(swrr(&constant, RATE, 6.0, GAP_1_DEG).unwrap(), 0.0);
        let ramp: Vec<f64> = (0..600).map(|i| i as f64 * 1e-3).collect();
        assert_eq!(swrr(&ramp, RATE, 6.0, GAP_1_DEG).unwrap(), 0.0);
    }

    #[test]
    fn swrr_never_increases_with_gap() {
        let swa = sinusoid(3.0, 0.4, 30.0);
        let gaps: [f64; 6] = [0.5, 1.0, 2.0, 5.0, 8.0, 12.0];
        let rates: Vec<f64> = gaps
            .into_iter()
            .map(|g| swrr(&swa, RATE, 30.0, g.to_radians()).unwrap())
            .collect();
        for w in rates.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{rates:?}");
        }
    }

    // --- footprint -----------------------------------------------------

    #[test]
    fn footprint_hit_detection() {
        let fp = FootprintConfig::default();
        // beside the car, just inside the width
        assert!(footprint_intersects_cone(0.0, 0.0, 0.0, &fp, 2.0, 1.0, 0.15));
        // ahead of the nose, out of reach
        assert!(!footprint_intersects_cone(0.0, 0.0, 0.0, &fp, 3.0, 0.0, 0.15));
        // nose reaches it
        assert!(footprint_intersects_cone(0.0, 0.0, 0.0, &fp, 2.55, 0.0, 0.15));
        // same cone with the car rotated 90°: now it is abeam, out of reach
        assert!(!footprint_intersects_cone(
            0.0,
            0.0,
            std::f64::consts::FRAC_PI_2,
            &fp,
            2.55,
            0.0,
            0.15
        ));
    }

    // --- LCT -----------------------------------------------------------

    /// Task-frame lane change at constant speed: y ramps +1.0 → -2.5 (the
    /// built-in course shape with its -1 m lateral crossing at the origin).
    fn lct_attempt(speed: f64) -> AttemptSegment {
        let layout = TaskLayout::builtin(Task::Lct);
        let (ax, _) = layout.nominal_anchor().unwrap();
        let ramp0 = 50.0 - ax;
        let ramp1 = 78.0 - ax;
        let x0 = -45.0;
        let n = ((150.0 - x0) / speed * RATE) as usize;
        let samples: Vec<TrajectorySample> = (0..n)
            .map(|i| {
                let t = i as f64 / RATE;
                let x = x0 + speed * t;
                let u = ((x - ramp0) / (ramp1 - ramp0)).clamp(0.0, 1.0);
                let pi = std::f64::consts::PI;
                let y = 1.0 - 3.5 * 0.5 * (1.0 - (pi * u).cos());
                let slope = -3.5 * 0.5 * (pi / (ramp1 - ramp0)) * (pi * u).sin();
                TrajectorySample {
                    t,
                    x,
                    y,
                    heading: slope.atan(),
                    speed,
                    swa: 0.0,
                    yaw_rate: None,
                    lat_accel: None,
                    sw_rate: None,
                }
            })
            .collect();
        seg(Task::Lct, samples)
    }

    #[test]
    fn lct_metrics_on_ideal_lane_change() {
        let layout = TaskLayout::builtin(Task::Lct);
        let attempt = lct_attempt(10.0);
        let agg = aggregate_metrics(&attempt, &layout).unwrap();
        agg.validate().unwrap();
        assert_eq!(agg.get("cones_hit").unwrap(), 0.0);
        assert_relative_eq!(agg.get("speed_var").unwrap(), 0.0, epsilon = 1e-12);
        assert!(agg.get("max_lat_accel").unwrap() > 0.1);

        let ts = timeseries_metrics(&attempt, &layout).unwrap();
        assert_relative_eq!(ts.get("initial_speed").unwrap(), 10.0, epsilon = 1e-9);
        assert!((ts.get("total_lat_travel").unwrap() - 3.5).abs() <= 0.01);
        assert_eq!(ts.get("swrr_1").unwrap(), 0.0);
    }

    #[test]
    fn lct_attempt_that_stops_short_errors() {
        let layout = TaskLayout::builtin(Task::Lct);
        let mut attempt = lct_attempt(10.0);
        attempt.samples.retain(|s| s.x < -30.0);
        let err = aggregate_metrics(&attempt, &layout).unwrap_err();
        assert!(err.to_string().contains("manoeuvre window is empty"), "{err}");
    }

    #[test]
    fn recorded_cone_hits_take_precedence() {
        let layout = TaskLayout::builtin(Task::Lct);
        let mut attempt = lct_attempt(10.0);
        attempt.cone_hits = Some(4);
        let agg = aggregate_metrics(&attempt, &layout).unwrap();
        assert_eq!(agg.get("cones_hit").unwrap(), 4.0);
    }

    #[test]
    fn lct_cone_hits_detected_geometrically() {
        let layout = TaskLayout::builtin(Task::Lct);
        let mut attempt = lct_attempt(10.0);
        // drag the whole attempt 1.6 m left: the exit lane then runs at
        // y = -0.9, straight over the upper exit-gate cones
        for s in &mut attempt.samples {
            s.y += 1.6;
        }
        let agg = aggregate_metrics(&attempt, &layout).unwrap();
        assert!(agg.get("cones_hit").unwrap() >= 1.0);
    }

    // --- circle helpers --------------------------------------------------

    fn circle_attempt(v: f64, r: f64) -> AttemptSegment {
        let n = (60.0 * RATE) as usize;
        let omega = v / r;
        let samples: Vec<TrajectorySample> = (0..n)
            .map(|i| {
                let t = i as f64 / RATE;
                let a = -omega * t; // clockwise
                TrajectorySample {
                    t,
                    x: r * a.cos(),
                    y: r * a.sin(),
                    heading: crate::signal::wrap_angle(a - std::f64::consts::FRAC_PI_2),
                    speed: v,
                    swa: 0.0,
                    yaw_rate: None,
                    lat_accel: None,
                    sw_rate: None,
                }
            })
            .collect();
        seg(Task::Clv, samples)
    }

    #[test]
    fn clv_metrics_on_perfect_circle() {
        let layout = TaskLayout::builtin(Task::Clv);
        let attempt = circle_attempt(12.2, 55.5);
        let agg = aggregate_metrics(&attempt, &layout).unwrap();
        assert_eq!(agg.get("speed_var").unwrap(), 0.0);
        assert!(agg.get("radius_var").unwrap().abs() <= 1e-9);

        let ts = timeseries_metrics(&attempt, &layout).unwrap();
        assert_relative_eq!(ts.get("avg_speed").unwrap(), 12.2, epsilon = 1e-9);
        assert!((ts.get("avg_radius").unwrap() - 55.5).abs() <= 1e-6);
    }

    #[test]
    fn peak_lateral_acceleration_matches_circular_motion() {
        // v²/R on a 55.5 m circle at 12.2 m/s
        let attempt = circle_attempt(12.2, 55.5);
        let expect = 12.2 * 12.2 / 55.5;
        let got = max_abs_lat_accel(&attempt.samples).unwrap();
        assert!((got - expect).abs() <= 0.005 * expect, "got {got}, expected {expect}");
    }

    #[test]
    fn clv_steady_window_excludes_launch_and_stop() {
        let layout = TaskLayout::builtin(Task::Clv);
        let mut samples = Vec::new();
        let r = 55.5;
        let mut t = 0.0;
        let mut angle: f64 = 0.0;
        // launch (accelerate), steady, decelerate
        for k in 0..(90.0 * RATE) as usize {
            let v = if k < 1000 {
                12.0 * k as f64 / 1000.0
            } else if k > 8000 {
                (12.0 - 12.0 * (k - 8000) as f64 / 500.0).max(0.0)
            } else {
                12.0
            };
            samples.push(TrajectorySample {
                t,
                x: r * angle.cos(),
                y: r * angle.sin(),
                heading: crate::signal::wrap_angle(angle - std::f64::consts::FRAC_PI_2),
                speed: v,
                swa: 0.0,
                yaw_rate: None,
                lat_accel: None,
                sw_rate: None,
            });
            angle -= v / r / RATE;
            t += 1.0 / RATE;
        }
        let attempt = seg(Task::Clv, samples);
        let win = manoeuvre_window(&attempt, &layout).unwrap();
        assert!(win[0].speed >= 0.9 * 12.0);
        assert!(win.last().unwrap().speed >= 0.8 * 12.0 - 1e-9);
        let agg = aggregate_metrics(&attempt, &layout).unwrap();
        // steady laps only: speed variation stays small
        assert!(agg.get("speed_var").unwrap() < 0.2);
    }

    // --- SLX -------------------------------------------------------------

    /// Task-frame slalom: sinusoidal weave whose lateral excursion peaks
    /// (alternating sign, magnitude `amp`) right beside each cone. Cones
    /// sit at task-frame x = 25k - 37.5 for k = 1..8.
    fn slx_attempt(amp: f64, speed: f64) -> AttemptSegment {
        let x0 = -45.0;
        let n = ((195.0 - x0) / speed * RATE) as usize;
        let samples: Vec<TrajectorySample> = (0..n)
            .map(|i| {
                let t = i as f64 / RATE;
                let x = x0 + speed * t;
                // weave between the zero crossings flanking the cone line
                let y = if (-25.0..=175.0).contains(&x) {
                    -amp * (std::f64::consts::PI * (x + 12.5) / 25.0).cos()
                } else {
                    0.0
                };
                let swa = 0.4 * y / amp.max(1e-9);
                TrajectorySample {
                    t,
                    x,
                    y,
                    heading: 0.0,
                    speed,
                    swa,
                    yaw_rate: None,
                    lat_accel: None,
                    sw_rate: None,
                }
            })
            .collect();
        seg(Task::Slx, samples)
    }

    #[test]
    fn slx_metrics_on_ideal_weave() {
        let layout = TaskLayout::builtin(Task::Slx);
        let attempt = slx_attempt(2.8, 10.0);
        let ts = timeseries_metrics(&attempt, &layout).unwrap();
        assert_relative_eq!(ts.get("avg_speed").unwrap(), 10.0, epsilon = 1e-9);
        assert!((ts.get("peak_lat_amp").unwrap() - 2.8).abs() <= 1e-6);
        assert!(ts.get("peak_lat_amp_var").unwrap() <= 1e-9);
        assert!(ts.get("swrr_1").unwrap() > 0.0);
        assert!(ts.get("swrr_10").unwrap() <= ts.get("swrr_1").unwrap());

        let agg = aggregate_metrics(&attempt, &layout).unwrap();
        assert_eq!(agg.get("cones_hit").unwrap(), 0.0);
    }

    #[test]
    fn slx_with_one_peak_errors() {
        let layout = TaskLayout::builtin(Task::Slx);
        let mut attempt = slx_attempt(2.8, 10.0);
        attempt.samples.retain(|s| s.x <= -5.0);
        let err = timeseries_metrics(&attempt, &layout).unwrap_err();
        assert!(err.to_string().contains("slalom peak"), "{err}");
    }

    // --- invariance ------------------------------------------------------

    #[test]
    fn metrics_are_invariant_under_world_frame_motion() {
        use crate::extract::{locate_anchor, to_task_frame};
        let layout = TaskLayout::builtin(Task::Lct);

        // base attempt in a "world" frame equal to the task frame
        let base = lct_attempt(10.0);
        let anchor_a = locate_anchor(&base.samples, Task::Lct, 0).unwrap();
        let seg_a = AttemptSegment {
            samples: to_task_frame(&base.samples, &anchor_a),
            ..base.clone()
        };

        // same drive seen in a rotated, translated frame with shifted time
        let theta = 0.7f64;
        let (sin_t, cos_t) = theta.sin_cos();
        let moved: Vec<TrajectorySample> = base
            .samples
            .iter()
            .map(|s| TrajectorySample {
                t: s.t + 500.0,
                x: 100.0 + s.x * cos_t - s.y * sin_t,
                y: -50.0 + s.x * sin_t + s.y * cos_t,
                heading: s.heading + theta,
                ..*s
            })
            .collect();
        let anchor_b = locate_anchor(&moved, Task::Lct, 0).unwrap();
        let seg_b = AttemptSegment { samples: to_task_frame(&moved, &anchor_b), ..base.clone() };

        for f in [aggregate_metrics, timeseries_metrics] {
            let a = f(&seg_a, &layout).unwrap();
            let b = f(&seg_b, &layout).unwrap();
            for (va, vb) in a.values.iter().zip(&b.values) {
                assert_relative_eq!(va.value, vb.value, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn metric_set_rejects_wrong_names() {
        let layout = TaskLayout::builtin(Task::Lct);
        let mut set = aggregate_metrics(&lct_attempt(10.0), &layout).unwrap();
        set.values[0].name = "bogus";
        assert!(set.validate().is_err());
    }
}

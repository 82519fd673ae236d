//! Splitting session logs into task attempts and aligning them in a
//! common task frame.
//!
//! A session log usually contains several runs of the same task separated
//! by idle periods (turnaround, repositioning). Attempts are found with a
//! speed hysteresis, then each attempt is anchored at a task-specific
//! reference pose — the start of the lane change, the midpoint of the
//! first slalom weave, or the centre of the driven circle — so attempts
//! from different sessions and environments can be compared in one frame.

use std::collections::BTreeMap;

use crate::circle::estimate_circle;
use crate::error::{Error, Result};
use crate::signal::{circular_mean, local_extrema, moving_average, prominence, window_samples};
use crate::trajectory::{DriveLog, LogMeta, Task, TrajectorySample};

/// Speed hysteresis and padding used when splitting a log into attempts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationConfig {
    /// Speed at which an attempt is considered started, m/s.
    pub on_speed: f64,
    /// Speed below which a started attempt ends, m/s.
    pub off_speed: f64,
    /// Minimum moving time (before padding) for a valid attempt, s.
    pub min_duration: f64,
    /// Context kept on each side of the moving interval, s.
    pub pad: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig { on_speed: 2.0, off_speed: 0.5, min_duration: 5.0, pad: 1.0 }
    }
}

/// How the anchor pose of an attempt was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorMethod {
    /// First sample at least 1 m to the right of the approach lane (LCT).
    LateralThreshold,
    /// Midpoint in time of the first two opposite lateral peaks (SLX).
    PeakMidpoint,
    /// Centre of the driven circle (CLV).
    CircleCentre,
}

impl AnchorMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            AnchorMethod::LateralThreshold => "LATERAL_THRESHOLD",
            AnchorMethod::PeakMidpoint => "PEAK_MIDPOINT",
            AnchorMethod::CircleCentre => "CIRCLE_CENTRE",
        }
    }

    pub fn parse(s: &str) -> Option<AnchorMethod> {
        match s {
            "LATERAL_THRESHOLD" => Some(AnchorMethod::LateralThreshold),
            "PEAK_MIDPOINT" => Some(AnchorMethod::PeakMidpoint),
            "CIRCLE_CENTRE" => Some(AnchorMethod::CircleCentre),
            _ => None,
        }
    }
}

/// Reference pose aligning an attempt with the task frame: the anchor maps
/// to the origin and `heading` to the +x axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorPose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Alignment reference direction, rad. For circle tasks the frame is
    /// only translated, so this is 0.
    pub heading: f64,
    pub method: AnchorMethod,
}

/// One attempt cut out of a session log (samples still in log coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptSegment {
    pub meta: LogMeta,
    /// 1-based position of this attempt within its source log.
    pub attempt_index: u32,
    pub samples: Vec<TrajectorySample>,
    /// Cones struck during this attempt, when the source log records them.
    pub cone_hits: Option<u32>,
}

/// Split a session log into attempts.
///
/// An attempt starts when speed first reaches `on_speed` and ends when it
/// falls below `off_speed`; intervals shorter than `min_duration` are
/// dropped, survivors are padded by `pad` seconds of context on each side,
/// and padded intervals that overlap are merged. Returns an empty vector
/// when the vehicle never moves.
pub fn segment_attempts(log: &DriveLog, config: &SegmentationConfig) -> Result<Vec<AttemptSegment>> {
    if config.off_speed > config.on_speed {
        return Err(Error::InvalidInput(
            "segmentation off_speed must not exceed on_speed".into(),
        ));
    }
    let s = log.samples();
    // moving intervals as inclusive index ranges
    let mut intervals: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for (i, smp) in s.iter().enumerate() {
        match start {
            None => {
                if smp.speed >= config.on_speed {
                    start = Some(i);
                }
            }
            Some(s0) => {
                if smp.speed < config.off_speed {
                    intervals.push((s0, i.saturating_sub(1).max(s0)));
                    start = None;
                }
            }
        }
    }
    if let Some(s0) = start {
        intervals.push((s0, s.len() - 1));
    }
    intervals.retain(|&(a, b)| s[b].t - s[a].t >= config.min_duration);

    // pad and merge
    let mut padded: Vec<(usize, usize)> = Vec::new();
    for &(a, b) in &intervals {
        let t_lo = s[a].t - config.pad;
        let t_hi = s[b].t + config.pad;
        let lo = s.partition_point(|x| x.t < t_lo);
        let hi = s.partition_point(|x| x.t <= t_hi) - 1;
        match padded.last_mut() {
            Some(prev) if lo <= prev.1 => prev.1 = hi,
            _ => padded.push((lo, hi)),
        }
    }

    let hit_times = parse_hit_times(&log.meta.extras)?;
    let total_hits: Option<u32> = match log.meta.extras.get("cone_hits") {
        Some(v) => Some(v.parse().map_err(|_| {
            Error::Extraction(format!("bad cone_hits value '{v}' in log metadata"))
        })?),
        None => None,
    };

    let mut out = Vec::with_capacity(padded.len());
    for (k, &(a, b)) in padded.iter().enumerate() {
        let cone_hits = if let Some(times) = &hit_times {
            Some(times.iter().filter(|&&t| t >= s[a].t && t <= s[b].t).count() as u32)
        } else if padded.len() == 1 {
            total_hits
        } else {
            None
        };
        out.push(AttemptSegment {
            meta: log.meta.clone(),
            attempt_index: (k + 1) as u32,
            samples: s[a..=b].to_vec(),
            cone_hits,
        });
    }
    Ok(out)
}

fn parse_hit_times(extras: &BTreeMap<String, String>) -> Result<Option<Vec<f64>>> {
    let Some(raw) = extras.get("cone_hit_times") else {
        return Ok(None);
    };
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(Some(Vec::new()));
    }
    let mut times = Vec::new();
    for tok in raw.split(';') {
        let t: f64 = tok.trim().parse().map_err(|_| {
            Error::Extraction(format!("bad cone_hit_times entry '{tok}' in log metadata"))
        })?;
        times.push(t);
    }
    Ok(Some(times))
}

/// Heading of the first second of driving and the centroid it was
/// measured around.
fn initial_frame(samples: &[TrajectorySample]) -> Result<(f64, (f64, f64))> {
    let t0 = samples[0].t;
    let head: Vec<&TrajectorySample> = samples.iter().take_while(|s| s.t <= t0 + 1.0).collect();
    if head.len() < 2 {
        return Err(Error::Extraction("attempt shorter than 1 s, cannot anchor".into()));
    }
    let theta = circular_mean(&head.iter().map(|s| s.heading).collect::<Vec<_>>());
    let cx = head.iter().map(|s| s.x).sum::<f64>() / head.len() as f64;
    let cy = head.iter().map(|s| s.y).sum::<f64>() / head.len() as f64;
    Ok((theta, (cx, cy)))
}

/// Signed lateral offset of each sample from the initial lane, left
/// positive.
fn lateral_series(samples: &[TrajectorySample], theta: f64, origin: (f64, f64)) -> Vec<f64> {
    let (sin_t, cos_t) = theta.sin_cos();
    samples
        .iter()
        .map(|s| -(s.x - origin.0) * sin_t + (s.y - origin.1) * cos_t)
        .collect()
}

fn sample_rate_of(samples: &[TrajectorySample]) -> f64 {
    if samples.len() < 2 {
        return crate::CANONICAL_RATE;
    }
    (samples.len() - 1) as f64 / (samples[samples.len() - 1].t - samples[0].t)
}

/// Locate the task-specific anchor pose of an attempt.
///
/// `seed` feeds the circle estimator for CLV attempts and is ignored for
/// the other tasks.
pub fn locate_anchor(samples: &[TrajectorySample], task: Task, seed: u64) -> Result<AnchorPose> {
    if samples.is_empty() {
        return Err(Error::Extraction("cannot anchor an empty attempt".into()));
    }
    match task {
        Task::Lct => {
            let (theta, origin) = initial_frame(samples)?;
            let lat = lateral_series(samples, theta, origin);
            let idx = lat
                .iter()
                .position(|&l| l <= -1.0)
                .ok_or_else(|| {
                    Error::Extraction(
                        "no lane change found: attempt never moves 1 m to the right of the \
                         approach lane"
                            .into(),
                    )
                })?;
            let s = &samples[idx];
            Ok(AnchorPose {
                t: s.t,
                x: s.x,
                y: s.y,
                heading: theta,
                method: AnchorMethod::LateralThreshold,
            })
        }
        Task::Slx => {
            let (theta, origin) = initial_frame(samples)?;
            let lat = lateral_series(samples, theta, origin);
            let w = window_samples(0.2, sample_rate_of(samples));
            let smooth = moving_average(&lat, w);
            let extrema = local_extrema(&smooth);
            let first_max = extrema
                .iter()
                .find(|e| e.is_max && prominence(&smooth, e) >= 0.5);
            let first_min = extrema
                .iter()
                .find(|e| !e.is_max && prominence(&smooth, e) >= 0.5);
            let (ma, mi) = match (first_max, first_min) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::Extraction(
                        "no slalom weave found: need two opposite lateral peaks of at \
                         least 0.5 m prominence"
                            .into(),
                    ))
                }
            };
            let t_anchor = 0.5 * (samples[ma.index].t + samples[mi.index].t);
            let s = samples
                .iter()
                .min_by(|a, b| {
                    (a.t - t_anchor).abs().partial_cmp(&(b.t - t_anchor).abs()).unwrap()
                })
                .unwrap();
            Ok(AnchorPose {
                t: s.t,
                x: s.x,
                y: s.y,
                heading: theta,
                method: AnchorMethod::PeakMidpoint,
            })
        }
        Task::Clv => {
            let moving: Vec<&TrajectorySample> =
                samples.iter().filter(|s| s.speed > 2.0).collect();
            if moving.len() < 3 {
                return Err(Error::Extraction(
                    "too few moving samples to locate the circle centre".into(),
                ));
            }
            let pts: Vec<(f64, f64)> = moving.iter().map(|s| (s.x, s.y)).collect();
            let est = estimate_circle(&pts, seed)?;
            Ok(AnchorPose {
                t: moving[0].t,
                x: est.centre.0,
                y: est.centre.1,
                heading: 0.0,
                method: AnchorMethod::CircleCentre,
            })
        }
    }
}

/// Express samples in the frame of `anchor`: the anchor pose moves to the
/// origin and its heading becomes the +x direction. Timestamps and
/// frame-independent channels are unchanged.
pub fn to_task_frame(samples: &[TrajectorySample], anchor: &AnchorPose) -> Vec<TrajectorySample> {
    let (sin_t, cos_t) = anchor.heading.sin_cos();
    samples
        .iter()
        .map(|s| {
            let dx = s.x - anchor.x;
            let dy = s.y - anchor.y;
            TrajectorySample {
                x: dx * cos_t + dy * sin_t,
                y: -dx * sin_t + dy * cos_t,
                heading: crate::signal::wrap_angle(s.heading - anchor.heading),
                ..*s
            }
        })
        .collect()
}

const KEY_ATTEMPT: &str = "attempt_index";
const KEY_ANCHOR_T: &str = "anchor_t";
const KEY_ANCHOR_METHOD: &str = "anchor_method";
const KEY_CONE_HITS: &str = "cone_hits";
const KEY_HIT_TIMES: &str = "cone_hit_times";

/// Render an attempt as a standalone task-frame log. The anchor and
/// attempt index are recorded in the metadata so [`attempt_from_log`] can
/// reverse the packaging.
pub fn attempt_to_log(attempt: &AttemptSegment, anchor: &AnchorPose) -> Result<DriveLog> {
    let mut meta = attempt.meta.clone();
    meta.extras.remove(KEY_HIT_TIMES);
    meta.extras.remove(KEY_CONE_HITS);
    meta.extras.insert(KEY_ATTEMPT.into(), attempt.attempt_index.to_string());
    meta.extras.insert(KEY_ANCHOR_T.into(), format!("{}", anchor.t));
    meta.extras.insert(KEY_ANCHOR_METHOD.into(), anchor.method.as_str().into());
    if let Some(hits) = attempt.cone_hits {
        meta.extras.insert(KEY_CONE_HITS.into(), hits.to_string());
    }
    DriveLog::new(meta, to_task_frame(&attempt.samples, anchor))
}

/// Rebuild an attempt from a task-frame log written by [`attempt_to_log`].
/// The returned anchor is at the origin by construction.
pub fn attempt_from_log(log: &DriveLog) -> Result<(AttemptSegment, AnchorPose)> {
    let get = |key: &str| {
        log.meta
            .extras
            .get(key)
            .ok_or_else(|| Error::Extraction(format!("not an attempt log: missing '{key}'")))
    };
    let attempt_index: u32 = get(KEY_ATTEMPT)?
        .parse()
        .map_err(|_| Error::Extraction("bad attempt_index in attempt log".into()))?;
    let t: f64 = get(KEY_ANCHOR_T)?
        .parse()
        .map_err(|_| Error::Extraction("bad anchor_t in attempt log".into()))?;
    let method = AnchorMethod::parse(get(KEY_ANCHOR_METHOD)?)
        .ok_or_else(|| Error::Extraction("unknown anchor_method in attempt log".into()))?;
    let cone_hits = match log.meta.extras.get(KEY_CONE_HITS) {
        Some(v) => Some(
            v.parse()
                .map_err(|_| Error::Extraction("bad cone_hits in attempt log".into()))?,
        ),
        None => None,
    };
    Ok((
        AttemptSegment {
            meta: log.meta.clone(),
            attempt_index,
            samples: log.samples().to_vec(),
            cone_hits,
        },
        AnchorPose { t, x: 0.0, y: 0.0, heading: 0.0, method },
    ))
}

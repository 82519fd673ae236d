//! Small numeric helpers shared by the analysis stages: smoothing,
//! differencing, angle handling, extrema and basic sample statistics.

use std::f64::consts::PI;

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Remove 2*pi jumps so the sequence becomes continuous.
pub fn unwrap_angles(xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut offset = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        if i > 0 {
            let raw = x - xs[i - 1];
            let wrapped = wrap_angle(raw);
            offset += wrapped - raw;
        }
        out.push(x + offset);
    }
    out
}

/// Circular mean of a set of angles.
pub fn circular_mean(angles: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for &a in angles {
        s += a.sin();
        c += a.cos();
    }
    s.atan2(c)
}

/// Centred moving average with an odd window of `window` samples.
///
/// Near the edges the window shrinks symmetrically, which keeps the filter
/// exact on linear signals everywhere. `window <= 1` returns the input.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let n = xs.len();
    if window <= 1 || n < 2 {
        return xs.to_vec();
    }
    let half = window / 2;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let r = half.min(i).min(n - 1 - i);
        let lo = i - r;
        let hi = i + r;
        let sum: f64 = xs[lo..=hi].iter().sum();
        out.push(sum / (hi - lo + 1) as f64);
    }
    out
}

/// Convert a smoothing window in seconds to an odd sample count (>= 1).
pub fn window_samples(window_s: f64, rate: f64) -> usize {
    let w = (window_s * rate).round() as i64;
    let w = w.max(1) as usize;
    if w % 2 == 0 {
        w + 1
    } else {
        w
    }
}

/// Central difference; one-sided at the ends.
pub fn central_diff(xs: &[f64], dt: f64) -> Vec<f64> {
    let n = xs.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    out[0] = (xs[1] - xs[0]) / dt;
    out[n - 1] = (xs[n - 1] - xs[n - 2]) / dt;
    for i in 1..n - 1 {
        out[i] = (xs[i + 1] - xs[i - 1]) / (2.0 * dt);
    }
    out
}

/// A local extremum of a sampled signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    /// Sample index (plateau midpoint when the signal is flat at the top).
    pub index: usize,
    pub value: f64,
    pub is_max: bool,
}

/// Local extrema in order of occurrence. Plateaus count once, at their
/// midpoint. Endpoints are not extrema.
pub fn local_extrema(xs: &[f64]) -> Vec<Extremum> {
    let n = xs.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    // direction of the last nonzero difference
    let mut last_sign = 0i8;
    // start of the current plateau (candidate extremum location)
    let mut plateau_start = 0usize;
    for i in 1..n {
        let d = xs[i] - xs[i - 1];
        let sign = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        };
        if sign == 0 {
            continue;
        }
        if last_sign != 0 && sign != last_sign {
            let idx = (plateau_start + i - 1) / 2;
            out.push(Extremum { index: idx, value: xs[idx], is_max: last_sign > 0 });
        }
        last_sign = sign;
        plateau_start = i;
    }
    out
}

/// Topographic prominence of the extremum at `ex` within `xs`.
///
/// For a maximum: walk outwards on both sides until a strictly higher sample
/// (or the series end) is reached, tracking the lowest valley on the way; the
/// prominence is the peak value minus the higher of the two valley floors.
/// Minima are handled by negation.
pub fn prominence(xs: &[f64], ex: &Extremum) -> f64 {
    let v = |i: usize| if ex.is_max { xs[i] } else { -xs[i] };
    let peak = v(ex.index);
    let mut bases = [f64::NEG_INFINITY; 2];
    for (side, base) in bases.iter_mut().enumerate() {
        let mut lowest = peak;
        let mut i = ex.index;
        loop {
            if side == 0 {
                if i == 0 {
                    break;
                }
                i -= 1;
            } else {
                if i + 1 >= xs.len() {
                    break;
                }
                i += 1;
            }
            let x = v(i);
            if x > peak {
                break;
            }
            if x < lowest {
                lowest = x;
            }
        }
        *base = lowest;
    }
    peak - bases[0].max(bases[1])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator). NaN for fewer than 2 values.
/// Exactly 0 for a constant series (no summation residue).
pub fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Median by sorting a copy; the mean of the two middle values for even n.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Percentile in [0, 100] with linear interpolation between order statistics.
pub fn percentile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        let u = rank - lo as f64;
        v[lo] * (1.0 - u) + v[hi] * u
    }
}

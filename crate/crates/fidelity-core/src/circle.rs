//! Robust circle estimation from noisy planar points.
//!
//! Fits are built from circumcentres of randomly sampled point triples and
//! combined with component-wise medians, which keeps gross outliers (spin
//! recoveries, entry/exit transients) from dragging the estimate.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Estimated circle with the number of triples that contributed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleEstimate {
    pub centre: (f64, f64),
    pub radius: f64,
    pub n_triples: usize,
}

/// Number of random triples drawn per estimate.
const N_TRIPLES: usize = 500;

/// A triple is discarded when its smallest altitude is below this fraction
/// of its longest side (near-collinear points give unstable circumcentres).
const FLATNESS_LIMIT: f64 = 1e-6;

/// Circumcentre of a triangle, or None when the triple is too flat.
fn circumcentre(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Option<(f64, f64)> {
    let (bx, by) = (b.0 - a.0, b.1 - a.1);
    let (cx, cy) = (c.0 - a.0, c.1 - a.1);
    let area2 = (bx * cy - by * cx).abs();
    let longest = (bx.hypot(by)).max(cx.hypot(cy)).max((cx - bx).hypot(cy - by));
    // smallest altitude = area2 / longest side
    if area2 < FLATNESS_LIMIT * longest * longest {
        return None;
    }
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    Some((a.0 + ux, a.1 + uy))
}

/// Estimate the circle traced by `points`.
///
/// Draws [`N_TRIPLES`] random triples of distinct points, collects the
/// circumcentre of each non-degenerate triple, and takes the median of the
/// centre coordinates. The radius is the median distance from that centre
/// to every input point. Deterministic for a given `seed`.
pub fn estimate_circle(points: &[(f64, f64)], seed: u64) -> Result<CircleEstimate> {
    if points.len() < 3 {
        return Err(Error::Estimation(format!(
            "circle estimation needs at least 3 points, got {}",
            points.len()
        )));
    }
    for p in points {
        if !p.0.is_finite() || !p.1.is_finite() {
            return Err(Error::Estimation("non-finite input point".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(N_TRIPLES);
    let mut ys = Vec::with_capacity(N_TRIPLES);
    for _ in 0..N_TRIPLES {
        let idx = rand::seq::index::sample(&mut rng, points.len(), 3);
        if let Some(c) = circumcentre(points[idx.index(0)], points[idx.index(1)], points[idx.index(2)])
        {
            xs.push(c.0);
            ys.push(c.1);
        }
    }
    if xs.is_empty() {
        return Err(Error::Estimation(
            "all sampled triples were degenerate (points nearly collinear?)".into(),
        ));
    }
    let centre = (crate::signal::median(&xs), crate::signal::median(&ys));
    let dists: Vec<f64> = points
        .iter()
        .map(|p| (p.0 - centre.0).hypot(p.1 - centre.1))
        .collect();
    Ok(CircleEstimate {
        centre,
        radius: crate::signal::median(&dists),
        n_triples: xs.len(),
    })
}

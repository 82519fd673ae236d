//! Task layouts: cone positions, surface patches and the nominal path.
//!
//! Layout files are line-oriented text:
//!
//! ```text
//! task SLX
//! nominal_speed_kph 45
//! cone 1 0 2.5 0.15
//! patch
//! mu 0.4 0.02
//! elevation 0.004 0.001
//! vertex -80 -15
//! vertex 300 -15
//! vertex 300 15
//! vertex -80 15
//! end
//! path polyline
//! vertex -60 0
//! vertex 0 0
//! end
//! ```
//!
//! Circles are a single line: `path circle <cx> <cy> <radius> <CW|CCW>`.
//! `direction <CW|CCW>` is required for CLV layouts.

use crate::error::{Error, Result};
use crate::path::{Direction, PathSpec};
use crate::trajectory::Task;

/// A traffic cone. Treated as a disc of `radius` for hit detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cone {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

/// A polygonal surface region with its friction and surface-height
/// statistics (means and standard deviations used when sampling a grid).
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePatch {
    pub polygon: Vec<(f64, f64)>,
    pub mu_mean: f64,
    pub mu_sd: f64,
    pub elevation_mean: f64,
    pub elevation_sd: f64,
}

impl SurfacePatch {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_mean > 0.0 && self.mu_mean <= 1.5) {
            return Err(Error::Layout(format!(
                "patch mu_mean {} outside (0, 1.5]",
                self.mu_mean
            )));
        }
        if self.mu_sd < 0.0 || self.elevation_sd < 0.0 {
            return Err(Error::Layout("patch standard deviations must be >= 0".into()));
        }
        if self.polygon.len() < 3 {
            return Err(Error::Layout("patch polygon needs at least 3 vertices".into()));
        }
        for v in &self.polygon {
            if !v.0.is_finite() || !v.1.is_finite() {
                return Err(Error::Layout("non-finite patch vertex".into()));
            }
        }
        if !polygon_is_simple(&self.polygon) {
            return Err(Error::Layout("patch polygon is self-intersecting".into()));
        }
        Ok(())
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let poly = &self.polygon;
        let mut inside = false;
        let n = poly.len();
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = poly[i];
            let (xj, yj) = poly[j];
            if (yi > y) != (yj > y) {
                let x_cross = xj + (y - yj) / (yi - yj) * (xi - xj);
                if x < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Axis-aligned rectangle helper.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64, mu: (f64, f64), elevation: (f64, f64)) -> SurfacePatch {
        SurfacePatch {
            polygon: vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)],
            mu_mean: mu.0,
            mu_sd: mu.1,
            elevation_mean: elevation.0,
            elevation_sd: elevation.1,
        }
    }
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    false
}

/// No two non-adjacent edges may cross.
fn polygon_is_simple(poly: &[(f64, f64)]) -> bool {
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        for j in i + 1..n {
            // skip edges sharing a vertex with edge i
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let c = poly[j];
            let d = poly[(j + 1) % n];
            if segments_cross(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// A gate: a pair of cones the vehicle must pass between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate {
    pub x: f64,
    pub y_centre: f64,
    pub half_width: f64,
}

/// Full course description for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskLayout {
    pub task: Task,
    /// Target approach/lap speed, m/s.
    pub nominal_speed: f64,
    pub cones: Vec<Cone>,
    /// Checked in order; the first patch containing a point wins. Points
    /// outside every patch default to packed snow.
    pub patches: Vec<SurfacePatch>,
    pub nominal_path: PathSpec,
    /// Lap direction, required for CLV.
    pub direction: Option<Direction>,
}

/// Friction patches at or below this mean count as "low mu" (ice).
pub const LOW_MU_THRESHOLD: f64 = 0.3;

/// Cones whose x positions differ by less than this are grouped into one
/// gate when identifying LCT gates.
const GATE_GROUP_TOLERANCE: f64 = 0.5;

const SLX_GATE_WIDTH: f64 = 5.0;
const SLX_CONE_SPACING: f64 = 25.0;
const GEOM_TOLERANCE: f64 = 0.05;

impl TaskLayout {
    pub fn validate(&self) -> Result<()> {
        if !(self.nominal_speed > 0.0) {
            return Err(Error::Layout("nominal speed must be positive".into()));
        }
        for c in &self.cones {
            if !(c.radius > 0.0) || !c.x.is_finite() || !c.y.is_finite() {
                return Err(Error::Layout(format!("cone {} has invalid geometry", c.id)));
            }
        }
        for p in &self.patches {
            p.validate()?;
        }
        self.nominal_path.validate()?;
        match self.task {
            Task::Lct => self.validate_lct(),
            Task::Slx => self.validate_slx(),
            Task::Clv => self.validate_clv(),
        }
    }

    fn validate_lct(&self) -> Result<()> {
        let gates = self.lct_gates()?;
        if gates.len() < 2 {
            return Err(Error::Layout(format!(
                "LCT layout needs an entry gate and at least one exit gate, found {}",
                gates.len()
            )));
        }
        let low: Vec<&SurfacePatch> =
            self.patches.iter().filter(|p| p.mu_mean <= LOW_MU_THRESHOLD).collect();
        if low.len() != 1 {
            return Err(Error::Layout(format!(
                "LCT layout needs exactly one low-mu patch, found {}",
                low.len()
            )));
        }
        let entry = gates.first().unwrap().x;
        let exit = gates.last().unwrap().x;
        let (lo, hi) = x_extent(&low[0].polygon);
        if lo <= entry || hi >= exit {
            return Err(Error::Layout(format!(
                "low-mu patch (x {lo:.1}..{hi:.1}) must lie between the entry gate at \
                 {entry:.1} and the final gate at {exit:.1}"
            )));
        }
        match self.nominal_path {
            PathSpec::Polyline { .. } => Ok(()),
            _ => Err(Error::Layout("LCT nominal path must be a polyline".into())),
        }
    }

    fn validate_slx(&self) -> Result<()> {
        self.slx_gate()?;
        let slalom = self.slx_slalom_cones()?;
        if slalom.len() != 8 {
            return Err(Error::Layout(format!(
                "slalom cone count is {}, expected 8",
                slalom.len()
            )));
        }
        for w in slalom.windows(2) {
            let gap = w[1].x - w[0].x;
            if (gap - SLX_CONE_SPACING).abs() > GEOM_TOLERANCE {
                return Err(Error::Layout(format!(
                    "slalom cones {} and {} are {gap:.2} m apart, expected {SLX_CONE_SPACING}",
                    w[0].id, w[1].id
                )));
            }
            if (w[1].y - w[0].y).abs() > GEOM_TOLERANCE {
                return Err(Error::Layout("slalom cones must be collinear".into()));
            }
        }
        match self.nominal_path {
            PathSpec::Polyline { .. } => Ok(()),
            _ => Err(Error::Layout("SLX nominal path must be a polyline".into())),
        }
    }

    fn validate_clv(&self) -> Result<()> {
        if self.direction.is_none() {
            return Err(Error::Layout("CLV layout needs a lap direction".into()));
        }
        match self.nominal_path {
            PathSpec::Circle { radius, .. } if radius > 0.0 => Ok(()),
            _ => Err(Error::Layout("CLV nominal path must be a circle".into())),
        }
    }

    /// LCT gates (pairs of cones sharing an x position), sorted by x.
    pub fn lct_gates(&self) -> Result<Vec<Gate>> {
        let mut cones: Vec<&Cone> = self.cones.iter().collect();
        cones.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
        let mut gates = Vec::new();
        let mut i = 0;
        while i < cones.len() {
            let mut group = vec![cones[i]];
            while i + 1 < cones.len() && cones[i + 1].x - cones[i].x < GATE_GROUP_TOLERANCE {
                i += 1;
                group.push(cones[i]);
            }
            i += 1;
            if group.len() != 2 {
                return Err(Error::Layout(format!(
                    "expected cone pairs forming gates, found a group of {} near x {:.1}",
                    group.len(),
                    group[0].x
                )));
            }
            let (a, b) = (group[0], group[1]);
            gates.push(Gate {
                x: 0.5 * (a.x + b.x),
                y_centre: 0.5 * (a.y + b.y),
                half_width: 0.5 * (a.y - b.y).abs(),
            });
        }
        Ok(gates)
    }

    /// The SLX entry gate: the unique pair of cones 5 m apart in y.
    pub fn slx_gate(&self) -> Result<(Cone, Cone)> {
        let mut found = None;
        for (i, a) in self.cones.iter().enumerate() {
            for b in &self.cones[i + 1..] {
                if (a.x - b.x).abs() < GEOM_TOLERANCE
                    && ((a.y - b.y).abs() - SLX_GATE_WIDTH).abs() < GEOM_TOLERANCE
                {
                    if found.is_some() {
                        return Err(Error::Layout("multiple candidate entry gates".into()));
                    }
                    found = Some((*a, *b));
                }
            }
        }
        found.ok_or_else(|| {
            Error::Layout("no entry gate (two cones 5 m apart) found".into())
        })
    }

    /// SLX cones excluding the entry gate, sorted along the course.
    pub fn slx_slalom_cones(&self) -> Result<Vec<Cone>> {
        let (g1, g2) = self.slx_gate()?;
        let mut rest: Vec<Cone> = self
            .cones
            .iter()
            .filter(|c| c.id != g1.id && c.id != g2.id)
            .copied()
            .collect();
        rest.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
        Ok(rest)
    }

    /// Where the anchor point falls on the nominal path, in layout
    /// coordinates. Attempts are aligned with their anchor at the origin, so
    /// layout features are mapped into the task frame by subtracting this.
    pub fn nominal_anchor(&self) -> Result<(f64, f64)> {
        match self.task {
            Task::Clv => match self.nominal_path {
                PathSpec::Circle { centre, .. } => Ok(centre),
                _ => Err(Error::Layout("CLV nominal path must be a circle".into())),
            },
            Task::Lct => {
                let verts = polyline_vertices(&self.nominal_path)?;
                let lat = lateral_offsets(verts);
                for i in 1..verts.len() {
                    if lat[i] <= -1.0 && lat[i - 1] > -1.0 {
                        let u = (-1.0 - lat[i - 1]) / (lat[i] - lat[i - 1]);
                        let x = verts[i - 1].0 + u * (verts[i].0 - verts[i - 1].0);
                        let y = verts[i - 1].1 + u * (verts[i].1 - verts[i - 1].1);
                        return Ok((x, y));
                    }
                }
                Err(Error::Layout(
                    "LCT nominal path never moves 1 m to the right of the initial lane".into(),
                ))
            }
            Task::Slx => {
                let verts = polyline_vertices(&self.nominal_path)?;
                let lat = lateral_offsets(verts);
                let ex = crate::signal::local_extrema(&lat);
                let first_max = ex
                    .iter()
                    .find(|e| e.is_max && crate::signal::prominence(&lat, e) >= 0.5);
                let first_min = ex
                    .iter()
                    .find(|e| !e.is_max && crate::signal::prominence(&lat, e) >= 0.5);
                let (ma, mi) = match (first_max, first_min) {
                    (Some(a), Some(b)) => (a, b),
                    _ => {
                        return Err(Error::Layout(
                            "SLX nominal path has no prominent lateral peaks".into(),
                        ))
                    }
                };
                let arcs = cumulative_arc(verts);
                let s_mid = 0.5 * (arcs[ma.index] + arcs[mi.index]);
                Ok(point_on_polyline(verts, &arcs, s_mid))
            }
        }
    }

    /// Mapping from layout coordinates into the task frame implied by this
    /// layout: the nominal anchor goes to the origin and the nominal path's
    /// start direction to +x.
    pub fn task_frame_map(&self) -> Result<TaskFrameMap> {
        let origin = self.nominal_anchor()?;
        let theta = self.nominal_path.start_heading();
        let (sin_t, cos_t) = theta.sin_cos();
        Ok(TaskFrameMap { origin, sin_t, cos_t })
    }

    /// Smallest axis-aligned box containing cones, patches and the path.
    pub fn bounding_box(&self) -> ((f64, f64), (f64, f64)) {
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut take = |x: f64, y: f64| {
            lo.0 = lo.0.min(x);
            lo.1 = lo.1.min(y);
            hi.0 = hi.0.max(x);
            hi.1 = hi.1.max(y);
        };
        for c in &self.cones {
            take(c.x - c.radius, c.y - c.radius);
            take(c.x + c.radius, c.y + c.radius);
        }
        for p in &self.patches {
            for v in &p.polygon {
                take(v.0, v.1);
            }
        }
        match &self.nominal_path {
            PathSpec::Polyline { vertices } => {
                for v in vertices {
                    take(v.0, v.1);
                }
            }
            PathSpec::Circle { centre, radius, .. } => {
                take(centre.0 - radius, centre.1 - radius);
                take(centre.0 + radius, centre.1 + radius);
            }
        }
        (lo, hi)
    }

    /// Override patch friction means: `ice` applies to patches at or below
    /// [`LOW_MU_THRESHOLD`], `snow` to the rest. Used to build environment
    /// variants of a course without editing layout files.
    pub fn set_patch_mu(&mut self, ice: Option<f64>, snow: Option<f64>) {
        for p in &mut self.patches {
            if p.mu_mean <= LOW_MU_THRESHOLD {
                if let Some(mu) = ice {
                    p.mu_mean = mu;
                }
            } else if let Some(mu) = snow {
                p.mu_mean = mu;
            }
        }
    }

    /// Mean friction of the dominant (non-ice) surface, used for
    /// friction-limited speed targets. Falls back to packed snow.
    pub fn base_mu(&self) -> f64 {
        self.patches
            .iter()
            .find(|p| p.mu_mean > LOW_MU_THRESHOLD)
            .map(|p| p.mu_mean)
            .unwrap_or(0.4)
    }

    /// Built-in course for a task, matching the dimensions used on the
    /// proving ground.
    pub fn builtin(task: Task) -> TaskLayout {
        match task {
            Task::Lct => builtin_lct(),
            Task::Slx => builtin_slx(),
            Task::Clv => builtin_clv(),
        }
    }
}

/// Rigid map from layout coordinates into the task frame.
#[derive(Debug, Clone, Copy)]
pub struct TaskFrameMap {
    origin: (f64, f64),
    sin_t: f64,
    cos_t: f64,
}

impl TaskFrameMap {
    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        let dx = p.0 - self.origin.0;
        let dy = p.1 - self.origin.1;
        (dx * self.cos_t + dy * self.sin_t, -dx * self.sin_t + dy * self.cos_t)
    }
}

fn x_extent(poly: &[(f64, f64)]) -> (f64, f64) {
    let lo = poly.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    let hi = poly.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn polyline_vertices(path: &PathSpec) -> Result<&[(f64, f64)]> {
    match path {
        PathSpec::Polyline { vertices } => Ok(vertices),
        _ => Err(Error::Layout("expected a polyline nominal path".into())),
    }
}

/// Signed lateral offset of each vertex in the frame of the path start
/// (left positive).
fn lateral_offsets(verts: &[(f64, f64)]) -> Vec<f64> {
    let (x0, y0) = verts[0];
    let th = {
        let (x1, y1) = verts[1];
        (y1 - y0).atan2(x1 - x0)
    };
    verts
        .iter()
        .map(|(x, y)| -(x - x0) * th.sin() + (y - y0) * th.cos())
        .collect()
}

fn cumulative_arc(verts: &[(f64, f64)]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(verts.len());
    out.push(0.0);
    for w in verts.windows(2) {
        acc += (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
        out.push(acc);
    }
    out
}

fn point_on_polyline(verts: &[(f64, f64)], arcs: &[f64], s: f64) -> (f64, f64) {
    for i in 1..verts.len() {
        if s <= arcs[i] {
            let seg = arcs[i] - arcs[i - 1];
            if seg == 0.0 {
                continue;
            }
            let u = (s - arcs[i - 1]) / seg;
            return (
                verts[i - 1].0 + u * (verts[i].0 - verts[i - 1].0),
                verts[i - 1].1 + u * (verts[i].1 - verts[i - 1].1),
            );
        }
    }
    *verts.last().unwrap()
}

// === built-in courses ===================================================

/// Default friction statistics (mean, sd) for packed snow and polished ice,
/// and the surface height variation of the graded track.
pub const SNOW_MU: (f64, f64) = (0.4, 0.02);
pub const ICE_MU: (f64, f64) = (0.2, 0.005);
pub const ELEVATION: (f64, f64) = (0.004, 0.001);

const KPH: f64 = 1.0 / 3.6;

/// Sampled cosine ramp from (x0, y0) to (x1, y1): zero slope at both ends.
fn cosine_ramp(x0: f64, y0: f64, x1: f64, y1: f64, step: f64, out: &mut Vec<(f64, f64)>) {
    let n = ((x1 - x0) / step).round().max(1.0) as usize;
    for k in 1..=n {
        let u = k as f64 / n as f64;
        let y = y0 + (y1 - y0) * 0.5 * (1.0 - (std::f64::consts::PI * u).cos());
        out.push((x0 + (x1 - x0) * u, y));
    }
}

/// Lane change to the right over an ice strip: entry gate on the approach
/// lane, a 6 m band of ice under the swerve, two exit gates on the target
/// lane 3.5 m to the right.
fn builtin_lct() -> TaskLayout {
    let mut verts = vec![(-40.0, 0.0), (50.0, 0.0)];
    cosine_ramp(50.0, 0.0, 78.0, -3.5, 0.5, &mut verts);
    verts.push((160.0, -3.5));
    TaskLayout {
        task: Task::Lct,
        nominal_speed: 45.0 * KPH,
        cones: vec![
            Cone { id: 1, x: 40.0, y: 1.75, radius: 0.15 },
            Cone { id: 2, x: 40.0, y: -1.75, radius: 0.15 },
            Cone { id: 3, x: 85.0, y: -1.9, radius: 0.15 },
            Cone { id: 4, x: 85.0, y: -5.1, radius: 0.15 },
            Cone { id: 5, x: 105.0, y: -1.9, radius: 0.15 },
            Cone { id: 6, x: 105.0, y: -5.1, radius: 0.15 },
        ],
        patches: vec![
            SurfacePatch::rect(55.0, -12.0, 61.0, 8.0, ICE_MU, ELEVATION),
            SurfacePatch::rect(-60.0, -15.0, 170.0, 10.0, SNOW_MU, ELEVATION),
        ],
        nominal_path: PathSpec::Polyline { vertices: verts },
        direction: None,
    }
}

/// Entry gate then eight cones 25 m apart, woven with 2.8 m peaks.
fn builtin_slx() -> TaskLayout {
    let mut verts = vec![(-60.0, 0.0)];
    let mut prev = (0.0, 0.0);
    verts.push(prev);
    for k in 1..=8 {
        let y = if k % 2 == 1 { -2.8 } else { 2.8 };
        let next = (25.0 * k as f64, y);
        cosine_ramp(prev.0, prev.1, next.0, next.1, 1.0, &mut verts);
        prev = next;
    }
    cosine_ramp(prev.0, prev.1, 235.0, 0.0, 1.0, &mut verts);
    verts.push((280.0, 0.0));

    let mut cones = vec![
        Cone { id: 1, x: 0.0, y: 2.5, radius: 0.15 },
        Cone { id: 2, x: 0.0, y: -2.5, radius: 0.15 },
    ];
    for k in 1..=8u32 {
        cones.push(Cone { id: 2 + k, x: 25.0 * k as f64, y: 0.0, radius: 0.15 });
    }
    TaskLayout {
        task: Task::Slx,
        nominal_speed: 45.0 * KPH,
        cones,
        patches: vec![SurfacePatch::rect(-80.0, -15.0, 300.0, 15.0, SNOW_MU, ELEVATION)],
        nominal_path: PathSpec::Polyline { vertices: verts },
        direction: None,
    }
}

/// Small circle marked by cones, driven clockwise. The nominal lap line
/// keeps a half-car-width gap to the cone ring.
fn builtin_clv() -> TaskLayout {
    let mut cones = Vec::new();
    for k in 0..24u32 {
        let a = 2.0 * std::f64::consts::PI * k as f64 / 24.0;
        cones.push(Cone { id: k + 1, x: 55.0 * a.cos(), y: 55.0 * a.sin(), radius: 0.15 });
    }
    // start marker pair, inside the ring near the launch point
    for (i, deg) in [86.0f64, 94.0].iter().enumerate() {
        let a = deg.to_radians();
        cones.push(Cone { id: 25 + i as u32, x: 52.0 * a.cos(), y: 52.0 * a.sin(), radius: 0.15 });
    }
    TaskLayout {
        task: Task::Clv,
        nominal_speed: 60.0 * KPH,
        cones,
        patches: vec![SurfacePatch::rect(-75.0, -75.0, 75.0, 75.0, SNOW_MU, ELEVATION)],
        nominal_path: PathSpec::Circle {
            centre: (0.0, 0.0),
            radius: 57.0,
            direction: Direction::Cw,
        },
        direction: Some(Direction::Cw),
    }
}

// === text format ========================================================

fn words(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}

fn parse_num(s: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} '{s}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite {what} '{s}'")));
    }
    Ok(v)
}

/// Parse a layout file. The result is validated before being returned.
pub fn parse_task_layout(text: &str) -> Result<TaskLayout> {
    let mut task: Option<Task> = None;
    let mut speed_kph: Option<f64> = None;
    let mut cones = Vec::new();
    let mut patches = Vec::new();
    let mut path: Option<PathSpec> = None;
    let mut direction: Option<Direction> = None;

    let mut lines = text.lines().enumerate().peekable();
    while let Some((idx, raw)) = lines.next() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let w = words(line);
        match w[0] {
            "task" => {
                let tok = w.get(1).copied().unwrap_or("");
                task = Some(
                    Task::parse(tok)
                        .ok_or_else(|| Error::parse(line_no, format!("unknown task '{tok}'")))?,
                );
            }
            "nominal_speed_kph" => {
                let tok = w.get(1).copied().unwrap_or("");
                speed_kph = Some(parse_num(tok, line_no, "nominal_speed_kph")?);
            }
            "direction" => {
                let tok = w.get(1).copied().unwrap_or("");
                direction = Some(Direction::parse(tok).ok_or_else(|| {
                    Error::parse(line_no, format!("unknown direction '{tok}'"))
                })?);
            }
            "cone" => {
                if w.len() != 5 {
                    return Err(Error::parse(line_no, "cone needs: id x y radius".to_string()));
                }
                let id: u32 = w[1]
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("invalid cone id '{}'", w[1])))?;
                cones.push(Cone {
                    id,
                    x: parse_num(w[2], line_no, "cone x")?,
                    y: parse_num(w[3], line_no, "cone y")?,
                    radius: parse_num(w[4], line_no, "cone radius")?,
                });
            }
            "patch" => {
                let mut mu = None;
                let mut elevation = None;
                let mut polygon = Vec::new();
                loop {
                    let (pidx, praw) = lines.next().ok_or_else(|| {
                        Error::parse(line_no, "unterminated patch block".to_string())
                    })?;
                    let pline_no = pidx + 1;
                    let pline = praw.trim();
                    if pline.is_empty() || pline.starts_with('#') {
                        continue;
                    }
                    let pw = words(pline);
                    match pw[0] {
                        "end" => break,
                        "mu" if pw.len() == 3 => {
                            mu = Some((
                                parse_num(pw[1], pline_no, "mu mean")?,
                                parse_num(pw[2], pline_no, "mu sd")?,
                            ));
                        }
                        "elevation" if pw.len() == 3 => {
                            elevation = Some((
                                parse_num(pw[1], pline_no, "elevation mean")?,
                                parse_num(pw[2], pline_no, "elevation sd")?,
                            ));
                        }
                        "vertex" if pw.len() == 3 => {
                            polygon.push((
                                parse_num(pw[1], pline_no, "vertex x")?,
                                parse_num(pw[2], pline_no, "vertex y")?,
                            ));
                        }
                        other => {
                            return Err(Error::parse(
                                pline_no,
                                format!("unexpected patch entry '{other}'"),
                            ))
                        }
                    }
                }
                let mu = mu.ok_or_else(|| {
                    Error::parse(line_no, "patch block is missing 'mu mean sd'".to_string())
                })?;
                let elevation = elevation.unwrap_or(ELEVATION);
                patches.push(SurfacePatch {
                    polygon,
                    mu_mean: mu.0,
                    mu_sd: mu.1,
                    elevation_mean: elevation.0,
                    elevation_sd: elevation.1,
                });
            }
            "path" => match w.get(1).copied() {
                Some("polyline") => {
                    let mut vertices = Vec::new();
                    loop {
                        let (pidx, praw) = lines.next().ok_or_else(|| {
                            Error::parse(line_no, "unterminated path block".to_string())
                        })?;
                        let pline_no = pidx + 1;
                        let pline = praw.trim();
                        if pline.is_empty() || pline.starts_with('#') {
                            continue;
                        }
                        let pw = words(pline);
                        match pw[0] {
                            "end" => break,
                            "vertex" if pw.len() == 3 => vertices.push((
                                parse_num(pw[1], pline_no, "vertex x")?,
                                parse_num(pw[2], pline_no, "vertex y")?,
                            )),
                            other => {
                                return Err(Error::parse(
                                    pline_no,
                                    format!("unexpected path entry '{other}'"),
                                ))
                            }
                        }
                    }
                    path = Some(PathSpec::Polyline { vertices });
                }
                Some("circle") if w.len() == 6 => {
                    let dir = Direction::parse(w[5]).ok_or_else(|| {
                        Error::parse(line_no, format!("unknown direction '{}'", w[5]))
                    })?;
                    path = Some(PathSpec::Circle {
                        centre: (
                            parse_num(w[2], line_no, "circle cx")?,
                            parse_num(w[3], line_no, "circle cy")?,
                        ),
                        radius: parse_num(w[4], line_no, "circle radius")?,
                        direction: dir,
                    });
                }
                other => {
                    return Err(Error::parse(
                        line_no,
                        format!("unknown path form {:?}", other.unwrap_or("")),
                    ))
                }
            },
            other => {
                return Err(Error::parse(line_no, format!("unknown layout entry '{other}'")));
            }
        }
    }

    let task = task.ok_or_else(|| Error::parse(1, "layout has no 'task' line".to_string()))?;
    let speed_kph =
        speed_kph.ok_or_else(|| Error::parse(1, "layout has no 'nominal_speed_kph' line".to_string()))?;
    let path = path.ok_or_else(|| Error::parse(1, "layout has no 'path' block".to_string()))?;
    let layout = TaskLayout {
        task,
        nominal_speed: speed_kph * KPH,
        cones,
        patches,
        nominal_path: path,
        direction,
    };
    layout.validate()?;
    Ok(layout)
}

/// Render a layout in the format accepted by [`parse_task_layout`].
pub fn write_task_layout(layout: &TaskLayout) -> String {
    let mut out = String::new();
    out.push_str(&format!("task {}\n", layout.task));
    out.push_str(&format!("nominal_speed_kph {}\n", layout.nominal_speed * 3.6));
    if let Some(d) = layout.direction {
        out.push_str(&format!("direction {d}\n"));
    }
    for c in &layout.cones {
        out.push_str(&format!("cone {} {} {} {}\n", c.id, c.x, c.y, c.radius));
    }
    for p in &layout.patches {
        out.push_str("patch\n");
        out.push_str(&format!("mu {} {}\n", p.mu_mean, p.mu_sd));
        out.push_str(&format!("elevation {} {}\n", p.elevation_mean, p.elevation_sd));
        for v in &p.polygon {
            out.push_str(&format!("vertex {} {}\n", v.0, v.1));
        }
        out.push_str("end\n");
    }
    match &layout.nominal_path {
        PathSpec::Polyline { vertices } => {
            out.push_str("path polyline\n");
            for v in vertices {
                out.push_str(&format!("vertex {} {}\n", v.0, v.1));
            }
            out.push_str("end\n");
        }
        PathSpec::Circle { centre, radius, direction } => {
            out.push_str(&format!("path circle {} {} {} {}\n", centre.0, centre.1, radius, direction));
        }
    }
    out
}

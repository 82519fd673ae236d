//! Stochastic friction/elevation grids sampled from layout surface patches.

use fidelity_core::error::{Error, Result};
use fidelity_core::layout::{SurfacePatch, TaskLayout, ELEVATION, SNOW_MU};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Grid cell size, m. Matches the 50 cm track-survey raster.
pub const GRID_RESOLUTION: f64 = 0.5;

/// Extra grid coverage beyond the layout bounding box, m.
const GRID_MARGIN: f64 = 25.0;

/// Sampled friction values are clamped to this physical range.
const MU_RANGE: (f64, f64) = (0.05, 1.5);

/// Raster of friction coefficients and surface heights over the task area.
///
/// Cell (ix, iy) is centred at `origin + ((ix + 0.5), (iy + 0.5)) * resolution`
/// and stored row-major (`iy * nx + ix`).
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionGrid {
    pub origin: (f64, f64),
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    mu: Vec<f64>,
    elevation: Vec<f64>,
    pub seed: u64,
}

impl FrictionGrid {
    pub fn new(
        origin: (f64, f64),
        resolution: f64,
        nx: usize,
        ny: usize,
        mu: Vec<f64>,
        elevation: Vec<f64>,
        seed: u64,
    ) -> Result<FrictionGrid> {
        let grid = FrictionGrid { origin, resolution, nx, ny, mu, elevation, seed };
        grid.validate()?;
        Ok(grid)
    }

    /// Constant-value grid covering `x0..x1 × y0..y1`, for controlled tests.
    pub fn uniform(x0: f64, y0: f64, x1: f64, y1: f64, mu: f64) -> Result<FrictionGrid> {
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::InvalidInput("uniform grid needs a non-empty area".into()));
        }
        let nx = ((x1 - x0) / GRID_RESOLUTION).ceil().max(1.0) as usize;
        let ny = ((y1 - y0) / GRID_RESOLUTION).ceil().max(1.0) as usize;
        FrictionGrid::new(
            (x0, y0),
            GRID_RESOLUTION,
            nx,
            ny,
            vec![mu; nx * ny],
            vec![ELEVATION.0; nx * ny],
            0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid resolution must be positive, got {}",
                self.resolution
            )));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidInput("grid must have at least one cell".into()));
        }
        let n = self.nx * self.ny;
        if self.mu.len() != n || self.elevation.len() != n {
            return Err(Error::InvalidInput(format!(
                "grid data length mismatch: {}x{} cells but {} mu / {} elevation values",
                self.nx,
                self.ny,
                self.mu.len(),
                self.elevation.len()
            )));
        }
        if !self.origin.0.is_finite() || !self.origin.1.is_finite() {
            return Err(Error::InvalidInput("non-finite grid origin".into()));
        }
        for &m in &self.mu {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::InvalidInput(format!("grid mu {m} outside (0, inf)")));
            }
        }
        for &e in &self.elevation {
            if !e.is_finite() {
                return Err(Error::InvalidInput("non-finite grid elevation".into()));
            }
        }
        Ok(())
    }

    pub fn mu_values(&self) -> &[f64] {
        &self.mu
    }

    pub fn elevation_values(&self) -> &[f64] {
        &self.elevation
    }

    pub fn cell_centre(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin.0 + (ix as f64 + 0.5) * self.resolution,
            self.origin.1 + (iy as f64 + 0.5) * self.resolution,
        )
    }

    /// Friction coefficient at a point: bilinear between the four nearest
    /// cell centres. Queries outside the grid clamp to the boundary value.
    pub fn friction_at(&self, x: f64, y: f64) -> f64 {
        self.bilinear(&self.mu, x, y)
    }

    /// Surface height at a point, same interpolation rules as friction.
    pub fn elevation_at(&self, x: f64, y: f64) -> f64 {
        self.bilinear(&self.elevation, x, y)
    }

    fn bilinear(&self, data: &[f64], x: f64, y: f64) -> f64 {
        let u = ((x - self.origin.0) / self.resolution - 0.5)
            .clamp(0.0, (self.nx - 1) as f64);
        let v = ((y - self.origin.1) / self.resolution - 0.5)
            .clamp(0.0, (self.ny - 1) as f64);
        let ix0 = (u.floor() as usize).min(self.nx - 1);
        let iy0 = (v.floor() as usize).min(self.ny - 1);
        let ix1 = (ix0 + 1).min(self.nx - 1);
        let iy1 = (iy0 + 1).min(self.ny - 1);
        let fu = u - ix0 as f64;
        let fv = v - iy0 as f64;
        let at = |ix: usize, iy: usize| data[iy * self.nx + ix];
        let lo = at(ix0, iy0) * (1.0 - fu) + at(ix1, iy0) * fu;
        let hi = at(ix0, iy1) * (1.0 - fu) + at(ix1, iy1) * fu;
        lo * (1.0 - fv) + hi * fv
    }
}

/// Sample a friction/elevation grid over the layout area.
///
/// Each cell draws from the Normal law of the first patch containing its
/// centre; cells outside every patch use the packed-snow defaults. Friction
/// values are clamped to a physical range. The same seed always reproduces
/// the same grid bit for bit.
pub fn generate_friction_grid(layout: &TaskLayout, seed: u64) -> FrictionGrid {
    let (lo, hi) = layout.bounding_box();
    let origin = (lo.0 - GRID_MARGIN, lo.1 - GRID_MARGIN);
    let nx = ((hi.0 + GRID_MARGIN - origin.0) / GRID_RESOLUTION).ceil().max(1.0) as usize;
    let ny = ((hi.1 + GRID_MARGIN - origin.1) / GRID_RESOLUTION).ceil().max(1.0) as usize;

    let default_patch = SurfacePatch::rect(
        origin.0,
        origin.1,
        origin.0 + nx as f64 * GRID_RESOLUTION,
        origin.1 + ny as f64 * GRID_RESOLUTION,
        SNOW_MU,
        ELEVATION,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu = Vec::with_capacity(nx * ny);
    let mut elevation = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let cx = origin.0 + (ix as f64 + 0.5) * GRID_RESOLUTION;
            let cy = origin.1 + (iy as f64 + 0.5) * GRID_RESOLUTION;
            let patch = layout
                .patches
                .iter()
                .find(|p| p.contains(cx, cy))
                .unwrap_or(&default_patch);
            let mu_law = Normal::new(patch.mu_mean, patch.mu_sd)
                .expect("validated patch has sd >= 0");
            let elev_law = Normal::new(patch.elevation_mean, patch.elevation_sd)
                .expect("validated patch has sd >= 0");
            mu.push(mu_law.sample(&mut rng).clamp(MU_RANGE.0, MU_RANGE.1));
            elevation.push(elev_law.sample(&mut rng));
        }
    }
    FrictionGrid { origin, resolution: GRID_RESOLUTION, nx, ny, mu, elevation, seed }
}

// === text format ========================================================

/// Render a grid as plain text: a header naming origin, resolution, size
/// and seed, then the friction and elevation blocks row-major, one grid
/// row per line. Values round-trip exactly.
pub fn write_friction_grid(grid: &FrictionGrid) -> String {
    let mut out = String::new();
    out.push_str("# friction grid\n");
    out.push_str(&format!("origin {} {}\n", grid.origin.0, grid.origin.1));
    out.push_str(&format!("resolution {}\n", grid.resolution));
    out.push_str(&format!("size {} {}\n", grid.nx, grid.ny));
    out.push_str(&format!("seed {}\n", grid.seed));
    for (name, data) in [("mu", &grid.mu), ("elevation", &grid.elevation)] {
        out.push_str(name);
        out.push('\n');
        for row in data.chunks(grid.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}

/// Parse the text form written by [`write_friction_grid`].
pub fn parse_friction_grid(text: &str) -> Result<FrictionGrid> {
    let mut origin: Option<(f64, f64)> = None;
    let mut resolution: Option<f64> = None;
    let mut size: Option<(usize, usize)> = None;
    let mut seed: u64 = 0;
    let mut mu: Vec<f64> = Vec::new();
    let mut elevation: Vec<f64> = Vec::new();
    // which value block is currently being read
    let mut block: Option<&str> = None;

    let parse_f = |tok: &str, line: usize, what: &str| -> Result<f64> {
        tok.parse::<f64>()
            .map_err(|_| Error::Parse { line, msg: format!("invalid {what} '{tok}'") })
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words[0] {
            "origin" if words.len() == 3 && block.is_none() => {
                origin = Some((
                    parse_f(words[1], line_no, "origin x")?,
                    parse_f(words[2], line_no, "origin y")?,
                ));
            }
            "resolution" if words.len() == 2 && block.is_none() => {
                resolution = Some(parse_f(words[1], line_no, "resolution")?);
            }
            "size" if words.len() == 3 && block.is_none() => {
                let nx = words[1].parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("invalid nx '{}'", words[1]),
                })?;
                let ny = words[2].parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("invalid ny '{}'", words[2]),
                })?;
                size = Some((nx, ny));
            }
            "seed" if words.len() == 2 && block.is_none() => {
                seed = words[1].parse::<u64>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("invalid seed '{}'", words[1]),
                })?;
            }
            "mu" if words.len() == 1 => block = Some("mu"),
            "elevation" if words.len() == 1 => block = Some("elevation"),
            _ => match block {
                Some("mu") => {
                    for w in &words {
                        mu.push(parse_f(w, line_no, "mu value")?);
                    }
                }
                Some("elevation") => {
                    for w in &words {
                        elevation.push(parse_f(w, line_no, "elevation value")?);
                    }
                }
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unexpected grid entry '{}'", words[0]),
                    })
                }
            },
        }
    }

    let origin = origin
        .ok_or_else(|| Error::Parse { line: 1, msg: "grid has no 'origin' line".into() })?;
    let resolution = resolution
        .ok_or_else(|| Error::Parse { line: 1, msg: "grid has no 'resolution' line".into() })?;
    let (nx, ny) =
        size.ok_or_else(|| Error::Parse { line: 1, msg: "grid has no 'size' line".into() })?;
    FrictionGrid::new(origin, resolution, nx, ny, mu, elevation, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use fidelity_core::layout::ICE_MU;
    use fidelity_core::trajectory::Task;

    fn snow_only_layout() -> TaskLayout {
        let mut l = TaskLayout::builtin(Task::Slx);
        // one big snow patch covering everything the grid will rasterize
        l.patches = vec![SurfacePatch::rect(-200.0, -200.0, 400.0, 200.0, SNOW_MU, ELEVATION)];
        l
    }

    fn sample_stats(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn snow_grid_matches_the_surface_statistics() {
        let grid = generate_friction_grid(&snow_only_layout(), 20240803);
        assert!(grid.nx * grid.ny >= 200 * 200, "grid too small: {}x{}", grid.nx, grid.ny);
        let (mean, sd) = sample_stats(grid.mu_values());
        assert!((mean - 0.4).abs() < 0.005, "snow mean {mean}");
        assert!((sd - 0.02).abs() < 0.2 * 0.02, "snow sd {sd}");
        let (emean, esd) = sample_stats(grid.elevation_values());
        assert!((emean - 0.004).abs() < 0.0005, "elevation mean {emean}");
        assert!((esd - 0.001).abs() < 0.2 * 0.001, "elevation sd {esd}");
    }

    #[test]
    fn ice_patch_cells_follow_the_ice_law() {
        let layout = TaskLayout::builtin(Task::Lct);
        let grid = generate_friction_grid(&layout, 7);
        // collect cells whose centres fall on the ice strip
        let ice = &layout.patches[0];
        assert!(ice.mu_mean <= 0.3, "expected the first LCT patch to be ice");
        let mut cells = Vec::new();
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let (cx, cy) = grid.cell_centre(ix, iy);
                if ice.contains(cx, cy) {
                    cells.push(grid.mu_values()[iy * grid.nx + ix]);
                }
            }
        }
        assert!(cells.len() > 400, "ice strip has {} cells", cells.len());
        let (mean, sd) = sample_stats(&cells);
        assert!((mean - ICE_MU.0).abs() < 0.003, "ice mean {mean}");
        assert!((sd - ICE_MU.1).abs() < 0.3 * ICE_MU.1, "ice sd {sd}");
    }

    #[test]
    fn same_seed_reproduces_the_grid_bit_for_bit() {
        let layout = TaskLayout::builtin(Task::Lct);
        let a = generate_friction_grid(&layout, 42);
        let b = generate_friction_grid(&layout, 42);
        assert_eq!(a, b);
        let c = generate_friction_grid(&layout, 43);
        assert_ne!(a.mu_values(), c.mu_values());
    }

    #[test]
    fn cell_centre_queries_are_exact() {
        let grid = generate_friction_grid(&TaskLayout::builtin(Task::Clv), 3);
        for (ix, iy) in [(0, 0), (5, 9), (grid.nx - 1, grid.ny - 1)] {
            let (cx, cy) = grid.cell_centre(ix, iy);
            assert_eq!(grid.friction_at(cx, cy), grid.mu_values()[iy * grid.nx + ix]);
        }
    }

    #[test]
    fn midpoint_between_known_cells_interpolates_linearly() {
        // 2x1 grid: cells 0.4 and 0.2, centres 0.5 m apart
        let grid = FrictionGrid::new(
            (0.0, 0.0),
            0.5,
            2,
            1,
            vec![0.4, 0.2],
            vec![0.0, 0.0],
            0,
        )
        .unwrap();
        let mid = grid.friction_at(0.5, 0.25);
        assert!((mid - 0.3).abs() < 1e-12, "midpoint {mid}");
        // quarter point
        assert_relative_eq!(grid.friction_at(0.375, 0.25), 0.35, epsilon = 1e-12);
    }

    #[test]
    fn constant_grid_is_constant_everywhere_including_outside() {
        let grid = FrictionGrid::uniform(-10.0, -10.0, 10.0, 10.0, 0.8).unwrap();
        for (x, y) in [(0.0, 0.0), (-9.9, 9.9), (3.21, -7.65), (-500.0, 0.0), (50.0, 50.0)] {
            assert_eq!(grid.friction_at(x, y), 0.8);
        }
    }

    #[test]
    fn boundary_queries_clamp_to_edge_values() {
        let grid = FrictionGrid::new(
            (0.0, 0.0),
            0.5,
            2,
            1,
            vec![0.4, 0.2],
            vec![0.0, 0.0],
            0,
        )
        .unwrap();
        // far left of the first centre and far right of the last
        assert_eq!(grid.friction_at(-100.0, 0.0), 0.4);
        assert_eq!(grid.friction_at(100.0, 0.0), 0.2);
    }

    #[test]
    fn grid_round_trips_through_text() {
        let layout = TaskLayout::builtin(Task::Lct);
        let grid = generate_friction_grid(&layout, 99);
        let text = write_friction_grid(&grid);
        let back = parse_friction_grid(&text).unwrap();
        assert_eq!(grid, back);
    }

    #[test]
    fn malformed_grid_text_is_rejected() {
        assert!(parse_friction_grid("resolution 0.5\nsize 2 1\nmu\n0.4 0.2\n").is_err());
        let err = parse_friction_grid(
            "origin 0 0\nresolution 0.5\nsize 2 1\nseed 0\nmu\n0.4\nelevation\n0 0\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("length mismatch"), "{err}");
    }
}

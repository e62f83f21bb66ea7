//! Enzyme concentration over the chamber disc: explicit 5-point diffusion with
//! no-flux walls and Dirichlet inlet sources.

use serde::{Deserialize, Serialize};

use crate::chamber::Chamber;
use crate::error::{Result, SimError};
use crate::geom::Vec2;

/// Default effective dispersion, µm²/s (3.7e-9 m²/s). Folds injection-driven
/// convection into a single coefficient.
pub const DEFAULT_D_EFF_UM2_PER_S: f64 = 3.7e3;

pub const GRID_MAGIC: &[u8; 4] = b"ENZG";
pub const GRID_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnzymeParams {
    pub cell_um: f64,
    pub d_eff_um2_per_s: f64,
    /// How long an injection holds its inlet at the injected concentration.
    pub hold_s: f64,
    /// Fill the whole chamber at t = 0 (open-chamber experiments).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_uniform: Option<f64>,
}

impl Default for EnzymeParams {
    fn default() -> Self {
        Self {
            cell_um: 50.0,
            d_eff_um2_per_s: DEFAULT_D_EFF_UM2_PER_S,
            hold_s: 60.0,
            initial_uniform: None,
        }
    }
}

impl EnzymeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_um > 0.0) {
            return Err(SimError::invariant("enzyme.cell_um", "must be > 0"));
        }
        if !(self.d_eff_um2_per_s > 0.0) {
            return Err(SimError::invariant("enzyme.d_eff_um2_per_s", "must be > 0"));
        }
        if self.hold_s < 0.0 {
            return Err(SimError::invariant("enzyme.hold_s", "must be >= 0"));
        }
        if let Some(c) = self.initial_uniform {
            if !(c >= 0.0) {
                return Err(SimError::invariant("enzyme.initial_uniform", "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Largest stable explicit step, h²/(4D).
    pub fn stable_dt(&self) -> f64 {
        self.cell_um * self.cell_um / (4.0 * self.d_eff_um2_per_s)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Source {
    cells: Vec<usize>,
    value: f64,
    remaining_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnzymeGrid {
    nx: usize,
    ny: usize,
    cell_um: f64,
    /// Lower-left corner of cell (0, 0).
    origin_um: Vec2,
    d_eff: f64,
    values: Vec<f64>,
    mask: Vec<bool>,
    sources: Vec<Source>,
    scratch: Vec<f64>,
    active: bool,
}

impl EnzymeGrid {
    /// Square grid centred on the chamber; cells whose centre lies in the
    /// disc are inside.
    pub fn for_chamber(chamber: &Chamber, cell_um: f64, d_eff: f64) -> Self {
        let n = (2.0 * chamber.radius_um / cell_um).ceil() as usize;
        let half = n as f64 * cell_um / 2.0;
        let origin = Vec2::new(-half, -half);
        let mut grid = Self::blank(n, n, cell_um, origin, d_eff);
        for j in 0..n {
            for i in 0..n {
                grid.mask[j * n + i] = chamber.contains(grid.cell_center(i, j));
            }
        }
        grid
    }

    /// Rectangle with every cell inside, lower-left corner at the origin.
    pub fn rectangle(nx: usize, ny: usize, cell_um: f64, d_eff: f64) -> Self {
        let mut g = Self::blank(nx, ny, cell_um, Vec2::ZERO, d_eff);
        g.mask.iter_mut().for_each(|m| *m = true);
        g
    }

    fn blank(nx: usize, ny: usize, cell_um: f64, origin_um: Vec2, d_eff: f64) -> Self {
        Self {
            nx,
            ny,
            cell_um,
            origin_um,
            d_eff,
            values: vec![0.0; nx * ny],
            mask: vec![false; nx * ny],
            sources: Vec::new(),
            scratch: vec![0.0; nx * ny],
            active: false,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn cell_um(&self) -> f64 {
        self.cell_um
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn d_eff(&self) -> f64 {
        self.d_eff
    }

    pub fn stable_dt(&self) -> f64 {
        self.cell_um * self.cell_um / (4.0 * self.d_eff)
    }

    /// Whether any enzyme has entered the grid yet.
    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        self.origin_um + Vec2::new((i as f64 + 0.5) * self.cell_um, (j as f64 + 0.5) * self.cell_um)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn total_mass(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v)
            .sum::<f64>()
            * self.cell_um
            * self.cell_um
    }

    pub fn fill(&mut self, c: f64) {
        for (v, &m) in self.values.iter_mut().zip(&self.mask) {
            if m {
                *v = c;
            }
        }
        self.active |= c > 0.0;
    }

    /// Cells whose centres lie within `radius` of `center`; at least the cell
    /// containing `center`.
    pub fn footprint(&self, center: Vec2, radius: f64) -> Vec<usize> {
        let mut cells = Vec::new();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = j * self.nx + i;
                if self.mask[k] && self.cell_center(i, j).distance(center) <= radius {
                    cells.push(k);
                }
            }
        }
        if cells.is_empty() {
            if let Some(k) = self.cell_index(center) {
                if self.mask[k] {
                    cells.push(k);
                }
            }
        }
        cells
    }

    fn cell_index(&self, p: Vec2) -> Option<usize> {
        let rel = p - self.origin_um;
        let i = (rel.x / self.cell_um).floor();
        let j = (rel.y / self.cell_um).floor();
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return None;
        }
        Some(j as usize * self.nx + i as usize)
    }

    /// Hold `cells` at `value` for `hold_s` seconds of diffusion.
    pub fn add_source(&mut self, cells: Vec<usize>, value: f64, hold_s: f64) {
        if value <= 0.0 || cells.is_empty() {
            return;
        }
        for &k in &cells {
            self.values[k] = value;
        }
        self.active = true;
        self.sources.push(Source { cells, value, remaining_s: hold_s });
    }

    /// Inject at a named chamber inlet.
    pub fn inject(&mut self, chamber: &Chamber, inlet: &str, concentration: f64, hold_s: f64) -> Result<()> {
        let inlet = chamber.inlet(inlet)?;
        if concentration == 0.0 {
            return Ok(());
        }
        if !(concentration > 0.0 && concentration <= 5.0) {
            return Err(SimError::InvalidInput(format!(
                "injected concentration must be in (0, 5] % w/v, got {concentration}"
            )));
        }
        let cells = self.footprint(inlet.center_um, inlet.radius_um);
        self.add_source(cells, concentration, hold_s);
        Ok(())
    }

    pub fn has_active_sources(&self) -> bool {
        !self.sources.is_empty()
    }

    /// One explicit step. No-flux walls: only in-mask neighbours exchange.
    pub fn diffuse_step(&mut self, dt: f64) -> Result<()> {
        let bound = self.stable_dt();
        if dt > bound * (1.0 + 1e-12) {
            return Err(SimError::Unstable { dt, bound });
        }
        if !self.active {
            return Ok(());
        }
        let r = self.d_eff * dt / (self.cell_um * self.cell_um);
        let (nx, ny) = (self.nx, self.ny);
        let v = &self.values;
        let m = &self.mask;
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                if !m[k] {
                    self.scratch[k] = 0.0;
                    continue;
                }
                let c = v[k];
                let mut flux = 0.0;
                if i > 0 && m[k - 1] {
                    flux += v[k - 1] - c;
                }
                if i + 1 < nx && m[k + 1] {
                    flux += v[k + 1] - c;
                }
                if j > 0 && m[k - nx] {
                    flux += v[k - nx] - c;
                }
                if j + 1 < ny && m[k + nx] {
                    flux += v[k + nx] - c;
                }
                self.scratch[k] = c + r * flux;
            }
        }
        std::mem::swap(&mut self.values, &mut self.scratch);
        for s in &mut self.sources {
            for &k in &s.cells {
                self.values[k] = s.value;
            }
            s.remaining_s -= dt;
        }
        self.sources.retain(|s| s.remaining_s > 1e-12);
        Ok(())
    }

    /// Bilinear interpolation between cell centres, over in-chamber cells only.
    pub fn concentration_at(&self, chamber: &Chamber, p: Vec2) -> Result<f64> {
        if !chamber.contains(p) {
            return Err(SimError::OutsideChamber { x: p.x, y: p.y });
        }
        Ok(self.sample(p))
    }

    /// Interpolated value without the chamber check.
    pub fn sample(&self, p: Vec2) -> f64 {
        if !self.active {
            return 0.0;
        }
        let rel = p - self.origin_um;
        let gx = rel.x / self.cell_um - 0.5;
        let gy = rel.y / self.cell_um - 0.5;
        let i0 = gx.floor();
        let j0 = gy.floor();
        let (fx, fy) = (gx - i0, gy - j0);
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (di, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
            for (dj, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
                let (i, j) = (i0 + di, j0 + dj);
                if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
                    continue;
                }
                let k = j as usize * self.nx + i as usize;
                if self.mask[k] {
                    let w = wx * wy;
                    acc += w * self.values[k];
                    wsum += w;
                }
            }
        }
        if wsum > 0.0 {
            acc / wsum
        } else {
            self.cell_index(p).map(|k| self.values[k]).unwrap_or(0.0)
        }
    }

    /// Block-averaged copy, `factor`× coarser in each direction. Cells outside
    /// the chamber are reported as 0.
    pub fn downsample(&self, factor: usize) -> (usize, usize, Vec<f32>) {
        let f = factor.max(1);
        let (cx, cy) = (self.nx.div_ceil(f), self.ny.div_ceil(f));
        let mut out = vec![0.0f32; cx * cy];
        for bj in 0..cy {
            for bi in 0..cx {
                let (mut sum, mut n) = (0.0, 0usize);
                for j in bj * f..((bj + 1) * f).min(self.ny) {
                    for i in bi * f..((bi + 1) * f).min(self.nx) {
                        let k = j * self.nx + i;
                        if self.mask[k] {
                            sum += self.values[k];
                            n += 1;
                        }
                    }
                }
                if n > 0 {
                    out[bj * cx + bi] = (sum / n as f64) as f32;
                }
            }
        }
        (cx, cy, out)
    }

    /// Dense dump: 16-byte header (`ENZG`, version, nx, ny as little-endian
    /// u32) followed by row-major little-endian f32 values.
    pub fn write_binary<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&GRID_VERSION.to_le_bytes())?;
        w.write_all(&(self.nx as u32).to_le_bytes())?;
        w.write_all(&(self.ny as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        Ok(())
    }
}

/// Decoded grid dump.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDump {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f32>,
}

pub fn read_grid_dump(bytes: &[u8]) -> Result<GridDump> {
    let bad = |why: &str| SimError::InvalidInput(format!("grid dump: {why}"));
    if bytes.len() < 16 || &bytes[..4] != GRID_MAGIC {
        return Err(bad("missing ENZG header"));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    if word(4) != GRID_VERSION {
        return Err(bad("unsupported version"));
    }
    let (nx, ny) = (word(8) as usize, word(12) as usize);
    let body = &bytes[16..];
    if body.len() != nx * ny * 4 {
        return Err(bad("payload length does not match nx*ny"));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(GridDump { nx, ny, values })
}

//! 2.5D elevation maps and the foot costmap derived from them.

mod edt;
mod export;
mod scenario;

pub use edt::squared_distance_transform;
pub use export::{costmap_csv, map_pgm, PgmMark};
pub use scenario::{scenario_map, Feature, ScenarioSpec, Side};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

pub const DEFAULT_RESOLUTION: f64 = 0.01;

/// Regular grid of terrain heights. `None` marks a void (gap) cell.
///
/// Cell `(ix, iy)` covers `[origin + ix·res, origin + (ix+1)·res)` along x
/// and likewise along y; storage is row-major in `iy`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationMap {
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub heights: Vec<Option<f64>>,
}

impl ElevationMap {
    pub fn flat(origin: Vec2, resolution: f64, width: usize, height: usize) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        Self {
            origin,
            resolution,
            width,
            height,
            heights: vec![Some(0.0); width * height],
        }
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    pub fn get(&self, ix: usize, iy: usize) -> Option<f64> {
        self.heights[self.index(ix, iy)]
    }

    /// Cell containing `p`, if inside the map.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        cell_of(self.origin, self.resolution, self.width, self.height, p)
    }
}

fn cell_of(origin: Vec2, res: f64, w: usize, h: usize, p: Vec2) -> Option<(usize, usize)> {
    if !p.is_finite() {
        return None;
    }
    let fx = ((p.x - origin.x) / res).floor();
    let fy = ((p.y - origin.y) / res).floor();
    if fx < 0.0 || fy < 0.0 || fx >= w as f64 || fy >= h as f64 {
        return None;
    }
    Some((fx as usize, fy as usize))
}

/// Nearest-cell terrain height at `p`.
pub fn height_at(map: &ElevationMap, p: Vec2) -> Result<f64> {
    let (ix, iy) = map.cell_of(p).ok_or(Error::OutOfMap { x: p.x, y: p.y })?;
    map.get(ix, iy).ok_or(Error::VoidCell { x: p.x, y: p.y })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostmapParams {
    /// Height spread inside the window above which a cell is unsafe, m.
    pub h_thr: f64,
    /// Odd window side, cells.
    pub window: usize,
}

impl Default for CostmapParams {
    fn default() -> Self {
        Self {
            h_thr: 0.03,
            window: 5,
        }
    }
}

/// Unsafe-cell mask plus the exact Euclidean distance to the nearest unsafe
/// cell. Cells outside the map count as unsafe.
#[derive(Debug, Clone, PartialEq)]
pub struct FootCostmap {
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub unsafe_cells: Vec<bool>,
    /// Meters; zero exactly on unsafe cells.
    pub dist_to_unsafe: Vec<f64>,
    pub params: CostmapParams,
}

pub fn compute_foot_costmap(map: &ElevationMap, params: CostmapParams) -> Result<FootCostmap> {
    if params.window < 3 || params.window % 2 == 0 {
        return Err(Error::InvalidParams(format!(
            "costmap window must be odd and >= 3, got {}",
            params.window
        )));
    }
    let (w, h) = (map.width, map.height);
    let r = params.window / 2;
    let mut unsafe_cells = vec![false; w * h];
    for iy in 0..h {
        for ix in 0..w {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut void = false;
            for y in iy.saturating_sub(r)..(iy + r + 1).min(h) {
                for x in ix.saturating_sub(r)..(ix + r + 1).min(w) {
                    match map.get(x, y) {
                        Some(z) => {
                            lo = lo.min(z);
                            hi = hi.max(z);
                        }
                        None => void = true,
                    }
                }
            }
            unsafe_cells[iy * w + ix] = void || hi - lo > params.h_thr;
        }
    }
    let dist_to_unsafe = distance_field(&unsafe_cells, w, h, map.resolution);
    Ok(FootCostmap {
        origin: map.origin,
        resolution: map.resolution,
        width: w,
        height: h,
        unsafe_cells,
        dist_to_unsafe,
        params,
    })
}

/// Distance (m) from every cell center to the nearest unsafe cell center,
/// with a ring of unsafe cells just outside the grid.
pub fn distance_field(unsafe_cells: &[bool], w: usize, h: usize, resolution: f64) -> Vec<f64> {
    let (pw, ph) = (w + 2, h + 2);
    let mut padded = vec![true; pw * ph];
    for iy in 0..h {
        for ix in 0..w {
            padded[(iy + 1) * pw + ix + 1] = unsafe_cells[iy * w + ix];
        }
    }
    let d2 = squared_distance_transform(&padded, pw, ph);
    let mut out = Vec::with_capacity(w * h);
    for iy in 0..h {
        for ix in 0..w {
            out.push(d2[(iy + 1) * pw + ix + 1].sqrt() * resolution);
        }
    }
    out
}

/// Safety-margin penalty for a foot at `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootCost {
    pub value: f64,
    /// Distance to the nearest unsafe cell, m (0 off the map).
    pub distance: f64,
    pub in_map: bool,
}

impl FootCostmap {
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        cell_of(self.origin, self.resolution, self.width, self.height, p)
    }

    pub fn is_unsafe_cell(&self, ix: usize, iy: usize) -> bool {
        self.unsafe_cells[iy * self.width + ix]
    }

    pub fn dist_at_cell(&self, ix: usize, iy: usize) -> f64 {
        self.dist_to_unsafe[iy * self.width + ix]
    }

    pub fn is_safe(&self, p: Vec2) -> bool {
        is_safe(self, p)
    }

    pub fn unsafe_count(&self) -> usize {
        self.unsafe_cells.iter().filter(|&&u| u).count()
    }
}

/// `d_max − d` when the foot is closer than `d_max` to an unsafe cell,
/// zero otherwise. Off the map the penalty is `d_max`.
pub fn foot_cost(costmap: &FootCostmap, p: Vec2, d_max: f64) -> FootCost {
    match costmap.cell_of(p) {
        Some((ix, iy)) => {
            let d = costmap.dist_at_cell(ix, iy);
            FootCost {
                value: if d < d_max { d_max - d } else { 0.0 },
                distance: d,
                in_map: true,
            }
        }
        None => FootCost {
            value: d_max,
            distance: 0.0,
            in_map: false,
        },
    }
}

pub fn is_safe(costmap: &FootCostmap, p: Vec2) -> bool {
    match costmap.cell_of(p) {
        Some((ix, iy)) => !costmap.is_unsafe_cell(ix, iy),
        None => false,
    }
}

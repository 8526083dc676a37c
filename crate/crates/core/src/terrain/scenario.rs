//! Corridor scenarios with gaps and steps, read from a TOML document.
//!
//! ```toml
//! name = "scenario_1"
//!
//! [corridor]
//! length = 4.0
//! width = 1.0
//! resolution = 0.01
//!
//! [start]
//! x = 0.5
//! y = 0.5
//!
//! [goal]
//! x = 3.5
//! y = 0.5
//!
//! [[feature]]
//! kind = "symmetric_gap"
//! x = 1.2
//! width = 0.10
//!
//! [[feature]]
//! kind = "asymmetric_gap"
//! x = 2.0
//! width = 0.15
//! side = "left"
//! span = 0.5
//!
//! [[feature]]
//! kind = "step"
//! x = 2.8
//! height = 0.06
//! ```

use serde::{Deserialize, Serialize};

use super::{ElevationMap, DEFAULT_RESOLUTION};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

pub const MAX_GAP_WIDTH: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// +y half of the corridor.
    Left,
    /// -y half of the corridor.
    Right,
}

/// A terrain feature. `x` is where it starts along the corridor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Feature {
    /// Void band across the whole corridor.
    SymmetricGap { x: f64, width: f64 },
    /// Void band reaching `span` meters in from one wall.
    AsymmetricGap {
        x: f64,
        width: f64,
        side: Side,
        span: f64,
    },
    /// Everything from `x` onwards is raised by `height`.
    Step { x: f64, height: f64 },
}

impl Feature {
    fn extent(&self) -> (f64, f64) {
        match *self {
            Feature::SymmetricGap { x, width } | Feature::AsymmetricGap { x, width, .. } => {
                (x, x + width)
            }
            Feature::Step { x, .. } => (x, x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corridor {
    pub length: f64,
    pub width: f64,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
}

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub corridor: Corridor,
    /// Initial CoM position.
    pub start: Vec2,
    /// CoM goal.
    pub goal: Vec2,
    #[serde(default, rename = "feature")]
    pub features: Vec<Feature>,
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<ScenarioSpec> {
        let spec: ScenarioSpec =
            toml::from_str(text).map_err(|e| Error::parse(format!("scenario: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        let c = &self.corridor;
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(c.length) && positive(c.width) && positive(c.resolution)) {
            return bad("corridor dimensions must be positive".into());
        }
        let cells = (c.length / c.resolution) * (c.width / c.resolution);
        if cells > 4.0e7 {
            return bad(format!("corridor too large ({cells:.0} cells)"));
        }
        let inside = |p: Vec2| p.is_finite() && (0.0..c.length).contains(&p.x) && (0.0..c.width).contains(&p.y);
        if !inside(self.start) || !inside(self.goal) {
            return bad("start and goal must lie inside the corridor".into());
        }
        let mut extents = Vec::with_capacity(self.features.len());
        for f in &self.features {
            match *f {
                Feature::SymmetricGap { width, .. } | Feature::AsymmetricGap { width, .. } => {
                    if !(width > 0.0 && width <= MAX_GAP_WIDTH) {
                        return bad(format!("gap width {width} outside (0, {MAX_GAP_WIDTH}]"));
                    }
                }
                Feature::Step { height, .. } => {
                    if !height.is_finite() {
                        return bad("step height must be finite".into());
                    }
                }
            }
            if let Feature::AsymmetricGap { span, .. } = *f {
                if !(span > 0.0 && span <= c.width) {
                    return bad(format!("gap span {span} outside (0, {}]", c.width));
                }
            }
            let (a, b) = f.extent();
            if !(a.is_finite() && a >= 0.0 && b <= c.length) {
                return bad(format!("feature at x = {a} leaves the corridor"));
            }
            extents.push((a, b));
        }
        extents.sort_by(|p, q| p.0.total_cmp(&q.0));
        for pair in extents.windows(2) {
            let ((a0, b0), (a1, _)) = (pair[0], pair[1]);
            // a step sitting exactly at the start of another feature still
            // overlaps it
            if a1 < b0 || a1 == a0 {
                return bad(format!("features at x = {a0} and x = {a1} overlap"));
            }
        }
        Ok(())
    }
}

fn to_cells(v: f64, res: f64) -> usize {
    (v / res).round().max(0.0) as usize
}

/// Rasterizes a scenario onto a flat corridor with the origin at (0, 0).
pub fn scenario_map(spec: &ScenarioSpec) -> Result<ElevationMap> {
    spec.validate()?;
    let c = spec.corridor;
    let res = c.resolution;
    let w = to_cells(c.length, res);
    let h = to_cells(c.width, res);
    let mut map = ElevationMap::flat(Vec2::ZERO, res, w, h);
    for f in &spec.features {
        if let Feature::Step { x, height } = *f {
            for iy in 0..h {
                for ix in to_cells(x, res).min(w)..w {
                    let i = map.index(ix, iy);
                    if let Some(z) = map.heights[i].as_mut() {
                        *z += height;
                    }
                }
            }
        }
    }
    for f in &spec.features {
        let (x, width, rows) = match *f {
            Feature::SymmetricGap { x, width } => (x, width, 0..h),
            Feature::AsymmetricGap {
                x,
                width,
                side,
                span,
            } => {
                let n = to_cells(span, res).min(h);
                let rows = match side {
                    Side::Left => h - n..h,
                    Side::Right => 0..n,
                };
                (x, width, rows)
            }
            Feature::Step { .. } => continue,
        };
        let cols = to_cells(x, res).min(w)..to_cells(x + width, res).min(w);
        for iy in rows.clone() {
            for ix in cols.clone() {
                let i = map.index(ix, iy);
                map.heights[i] = None;
            }
        }
    }
    Ok(map)
}

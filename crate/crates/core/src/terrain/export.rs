use std::fmt::Write;

use super::{ElevationMap, FootCostmap};
use crate::geometry::Vec2;
use crate::numfmt::sig9;

const MAX_GRAY: u8 = 255;
/// Heights map onto `[0, HEIGHT_GRAY]` so they never collide with unsafe cells.
const HEIGHT_GRAY: f64 = 200.0;

/// A point drawn on top of a PGM image as a plus sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgmMark {
    pub p: Vec2,
    pub gray: u8,
    /// Arm length in cells.
    pub radius: usize,
}

/// Plain-text PGM (P2). Image rows run from the top of the map (largest y)
/// down. Unsafe cells, or void cells when no costmap is given, are max gray.
pub fn map_pgm(map: &ElevationMap, costmap: Option<&FootCostmap>, marks: &[PgmMark]) -> String {
    let (w, h) = (map.width, map.height);
    let (lo, hi) = map
        .heights
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| (lo.min(z), hi.max(z)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut px = vec![0u8; w * h];
    for iy in 0..h {
        for ix in 0..w {
            let i = map.index(ix, iy);
            let unsafe_cell = match costmap {
                Some(cm) => cm.unsafe_cells[i],
                None => map.heights[i].is_none(),
            };
            px[i] = match map.heights[i] {
                _ if unsafe_cell => MAX_GRAY,
                Some(z) => ((z - lo) / span * HEIGHT_GRAY).round() as u8,
                None => MAX_GRAY,
            };
        }
    }
    for m in marks {
        let Some((cx, cy)) = map.cell_of(m.p) else {
            continue;
        };
        let r = m.radius as isize;
        for d in -r..=r {
            for (x, y) in [(cx as isize + d, cy as isize), (cx as isize, cy as isize + d)] {
                if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                    px[y as usize * w + x as usize] = m.gray;
                }
            }
        }
    }
    let mut out = format!("P2\n{w} {h}\n{MAX_GRAY}\n");
    for iy in (0..h).rev() {
        let row = &px[iy * w..(iy + 1) * w];
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// One row per cell: `x_index,y_index,height,unsafe,dist`. Void heights are
/// written as `VOID`.
pub fn costmap_csv(map: &ElevationMap, costmap: &FootCostmap) -> String {
    let mut out = String::from("x_index,y_index,height,unsafe,dist\n");
    for iy in 0..map.height {
        for ix in 0..map.width {
            let i = map.index(ix, iy);
            let z = match map.heights[i] {
                Some(z) => sig9(z),
                None => "VOID".into(),
            };
            let _ = writeln!(
                out,
                "{ix},{iy},{z},{},{}",
                u8::from(costmap.unsafe_cells[i]),
                sig9(costmap.dist_to_unsafe[i])
            );
        }
    }
    out
}

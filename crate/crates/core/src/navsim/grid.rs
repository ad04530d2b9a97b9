use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Cell = (usize, usize);

/// Boolean occupancy over square cells. Cell `(ix, iy)` covers
/// `[origin.0 + ix·res, origin.0 + (ix+1)·res) × [origin.1 + iy·res, …)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: (f64, f64),
    cells: Vec<bool>,
}

impl OccupancyGrid {
    /// An empty interior surrounded by a one-cell occupied border.
    pub fn closed(width: usize, height: usize, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) || width < 3 || height < 3 {
            return Err(Error::Config(format!(
                "grid {width}×{height} at resolution {resolution} is invalid"
            )));
        }
        let mut g = Self {
            width,
            height,
            resolution,
            origin: (0.0, 0.0),
            cells: vec![false; width * height],
        };
        for ix in 0..width {
            g.set(ix, 0, true);
            g.set(ix, height - 1, true);
        }
        for iy in 0..height {
            g.set(0, iy, true);
            g.set(width - 1, iy, true);
        }
        Ok(g)
    }

    /// Builds a grid from rows of text (`#` occupied, anything else free).
    /// The first line is the top row (highest `iy`). Borders are forced closed.
    pub fn from_ascii(rows: &[&str], resolution: f64) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map(|r| r.chars().count()).unwrap_or(0);
        let mut g = Self::closed(width, height, resolution)?;
        for (line, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Config("ragged ascii grid".into()));
            }
            let iy = height - 1 - line;
            for (ix, ch) in row.chars().enumerate() {
                if ch == '#' {
                    g.set(ix, iy, true);
                }
            }
        }
        Ok(g)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn index(&self, (ix, iy): Cell) -> usize {
        iy * self.width + ix
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        (index % self.width, index / self.width)
    }

    pub fn in_bounds(&self, ix: isize, iy: isize) -> bool {
        ix >= 0 && iy >= 0 && (ix as usize) < self.width && (iy as usize) < self.height
    }

    pub fn occupied(&self, ix: usize, iy: usize) -> bool {
        self.cells[iy * self.width + ix]
    }

    /// Out-of-bounds counts as occupied.
    pub fn occupied_signed(&self, ix: isize, iy: isize) -> bool {
        !self.in_bounds(ix, iy) || self.occupied(ix as usize, iy as usize)
    }

    pub fn set(&mut self, ix: usize, iy: usize, occupied: bool) {
        let w = self.width;
        self.cells[iy * w + ix] = occupied;
    }

    /// Marks a world-space rectangle occupied (cells whose centre lies inside).
    pub fn fill_rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        for iy in 0..self.height {
            for ix in 0..self.width {
                let (cx, cy) = self.center((ix, iy));
                if cx >= x0 && cx <= x1 && cy >= y0 && cy <= y1 {
                    self.set(ix, iy, true);
                }
            }
        }
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<Cell> {
        let fx = ((x - self.origin.0) / self.resolution).floor();
        let fy = ((y - self.origin.1) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn center(&self, (ix, iy): Cell) -> (f64, f64) {
        (
            self.origin.0 + (ix as f64 + 0.5) * self.resolution,
            self.origin.1 + (iy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.width as f64 * self.resolution, self.height as f64 * self.resolution)
    }

    /// Fraction of occupied cells, border excluded.
    pub fn interior_density(&self) -> f64 {
        let mut occ = 0usize;
        let mut total = 0usize;
        for iy in 1..self.height - 1 {
            for ix in 1..self.width - 1 {
                total += 1;
                occ += self.occupied(ix, iy) as usize;
            }
        }
        occ as f64 / total.max(1) as f64
    }

    /// True if a disc of radius `r` centred at `(x, y)` overlaps any occupied
    /// cell (or leaves the grid).
    pub fn disc_collides(&self, x: f64, y: f64, r: f64) -> bool {
        let res = self.resolution;
        let lo_x = ((x - r - self.origin.0) / res).floor() as isize;
        let hi_x = ((x + r - self.origin.0) / res).floor() as isize;
        let lo_y = ((y - r - self.origin.1) / res).floor() as isize;
        let hi_y = ((y + r - self.origin.1) / res).floor() as isize;
        for iy in lo_y..=hi_y {
            for ix in lo_x..=hi_x {
                if !self.occupied_signed(ix, iy) {
                    continue;
                }
                let cx0 = self.origin.0 + ix as f64 * res;
                let cy0 = self.origin.1 + iy as f64 * res;
                let nx = x.clamp(cx0, cx0 + res);
                let ny = y.clamp(cy0, cy0 + res);
                let (dx, dy) = (x - nx, y - ny);
                if dx * dx + dy * dy < r * r {
                    return true;
                }
            }
        }
        false
    }

    /// Configuration-space grid: a cell is blocked when a disc of radius `r`
    /// at its centre would touch an occupied cell.
    pub fn inflate(&self, r: f64) -> OccupancyGrid {
        let mut out = self.clone();
        for iy in 0..self.height {
            for ix in 0..self.width {
                if self.occupied(ix, iy) {
                    continue;
                }
                let (cx, cy) = self.center((ix, iy));
                if self.disc_collides(cx, cy, r) {
                    out.set(ix, iy, true);
                }
            }
        }
        out
    }

    /// Free 8-neighbours of `c` with their step cost. Diagonal moves are only
    /// allowed when both adjacent axis cells are free.
    pub fn neighbors(&self, (ix, iy): Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
        const DIRS: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        let diag = self.resolution * std::f64::consts::SQRT_2;
        let (x, y) = (ix as isize, iy as isize);
        DIRS.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            if self.occupied_signed(nx, ny) {
                return None;
            }
            if dx != 0 && dy != 0 {
                if self.occupied_signed(x + dx, y) || self.occupied_signed(x, y + dy) {
                    return None;
                }
                Some(((nx as usize, ny as usize), diag))
            } else {
                Some(((nx as usize, ny as usize), self.resolution))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_grid_has_occupied_border() {
        let g = OccupancyGrid::closed(5, 4, 0.1).unwrap();
        for ix in 0..5 {
            assert!(g.occupied(ix, 0) && g.occupied(ix, 3));
        }
        for iy in 0..4 {
            assert!(g.occupied(0, iy) && g.occupied(4, iy));
        }
        assert!(!g.occupied(2, 2));
        assert!(OccupancyGrid::closed(5, 5, 0.0).is_err());
    }

    #[test]
    fn disc_collision_against_border() {
        let g = OccupancyGrid::closed(20, 20, 0.1).unwrap();
        assert!(!g.disc_collides(1.0, 1.0, 0.3));
        // border cell spans [0, 0.1); a disc at x = 0.35 with r = 0.3 reaches 0.05
        assert!(g.disc_collides(0.35, 1.0, 0.3));
        assert!(!g.disc_collides(0.45, 1.0, 0.3));
    }

    #[test]
    fn diagonal_corner_cutting_forbidden() {
        let g = OccupancyGrid::from_ascii(&["#####", "#...#", "#.#.#", "#...#", "#####"], 1.0).unwrap();
        let n: Vec<_> = g.neighbors((1, 1)).map(|(c, _)| c).collect();
        assert!(!n.contains(&(2, 2)));
        assert!(n.contains(&(1, 2)) && n.contains(&(2, 1)));
    }

    #[test]
    fn inflation_blocks_cells_near_walls() {
        let g = OccupancyGrid::closed(20, 20, 0.1).unwrap();
        let inf = g.inflate(0.2);
        assert!(inf.occupied(1, 10) && inf.occupied(2, 10));
        assert!(!inf.occupied(3, 10));
    }
}

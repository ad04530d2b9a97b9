//! Grid shortest paths: Dijkstra distance fields, A* search and a
//! map-based pure-pursuit follower.

mod pursuit;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::navsim::grid::{Cell, OccupancyGrid};

pub use pursuit::{oracle_policy, PurePursuit};

/// Min-heap entry ordered by key, then by cell index for reproducible ties.
#[derive(Debug, Clone, Copy)]
struct Entry {
    key: f64,
    index: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Shortest obstacle-free distance from every cell to a goal cell.
/// Unreachable and occupied cells hold `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicField {
    grid: OccupancyGrid,
    goal: Cell,
    distances: Vec<f64>,
}

impl GeodesicField {
    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn at(&self, cell: Cell) -> f64 {
        self.distances[self.grid.index(cell)]
    }

    pub fn reachable(&self, cell: Cell) -> bool {
        self.at(cell).is_finite()
    }

    /// Continuous-position distance: the cheapest route through a reachable
    /// cell within two cells of `(x, y)`, counting the straight hop to its
    /// centre. Infinite if none is reachable.
    pub fn distance_at(&self, x: f64, y: f64) -> f64 {
        let res = self.grid.resolution();
        let (ox, oy) = self.grid.origin();
        let cx = ((x - ox) / res).floor() as isize;
        let cy = ((y - oy) / res).floor() as isize;
        let mut best = f64::INFINITY;
        for iy in cy - 2..=cy + 2 {
            for ix in cx - 2..=cx + 2 {
                if !self.grid.in_bounds(ix, iy) {
                    continue;
                }
                let c = (ix as usize, iy as usize);
                let d = self.at(c);
                if !d.is_finite() {
                    continue;
                }
                let (px, py) = self.grid.center(c);
                best = best.min(d + ((x - px).powi(2) + (y - py).powi(2)).sqrt());
            }
        }
        best
    }

    /// Free neighbour with the smallest distance, if it improves on `cell`.
    pub fn descend(&self, cell: Cell) -> Option<Cell> {
        let here = self.at(cell);
        self.grid
            .neighbors(cell)
            .map(|(n, _)| (n, self.at(n)))
            .filter(|&(_, d)| d < here)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(n, _)| n)
    }

    /// Rows from top (highest `iy`) to bottom; unreachable cells print `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for iy in (0..self.grid.height()).rev() {
            let row: Vec<String> = (0..self.grid.width())
                .map(|ix| {
                    let d = self.at((ix, iy));
                    if d.is_finite() { format!("{d}") } else { "inf".into() }
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Dijkstra from `goal` over free 8-connected cells without corner cutting.
pub fn geodesic_field(grid: &OccupancyGrid, goal: Cell) -> Result<GeodesicField> {
    if goal.0 >= grid.width() || goal.1 >= grid.height() || grid.occupied(goal.0, goal.1) {
        return Err(Error::Contract(format!("goal cell {goal:?} is not free")));
    }
    let mut distances = vec![f64::INFINITY; grid.num_cells()];
    let mut heap = BinaryHeap::new();
    let gi = grid.index(goal);
    distances[gi] = 0.0;
    heap.push(Entry { key: 0.0, index: gi });
    while let Some(Entry { key, index }) = heap.pop() {
        if key > distances[index] {
            continue;
        }
        // Costs are symmetric, so distances *to* the goal equal those *from* it.
        for (n, cost) in grid.neighbors(grid.cell_at(index)) {
            let ni = grid.index(n);
            let nd = key + cost;
            if nd < distances[ni] {
                distances[ni] = nd;
                heap.push(Entry { key: nd, index: ni });
            }
        }
    }
    Ok(GeodesicField { grid: grid.clone(), goal, distances })
}

/// Admissible heuristic for 8-connected grids with unit `res` steps.
pub fn octile(a: Cell, b: Cell, res: f64) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    res * (dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Start to goal inclusive; `None` when the goal is unreachable.
    pub path: Option<Vec<Cell>>,
    pub cost: f64,
    /// Nodes popped and expanded.
    pub expansions: usize,
}

/// A* with the octile heuristic. Both endpoints must be free.
pub fn astar_path(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Result<SearchResult> {
    best_first(grid, start, goal, true)
}

/// Uninformed variant of [`astar_path`] (zero heuristic).
pub fn dijkstra_path(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Result<SearchResult> {
    best_first(grid, start, goal, false)
}

fn best_first(grid: &OccupancyGrid, start: Cell, goal: Cell, informed: bool) -> Result<SearchResult> {
    for (what, c) in [("start", start), ("goal", goal)] {
        if c.0 >= grid.width() || c.1 >= grid.height() || grid.occupied(c.0, c.1) {
            return Err(Error::Contract(format!("{what} cell {c:?} is not free")));
        }
    }
    let res = grid.resolution();
    let h = |c: Cell| if informed { octile(c, goal, res) } else { 0.0 };
    let n = grid.num_cells();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let si = grid.index(start);
    let gi = grid.index(goal);
    g[si] = 0.0;
    heap.push(Entry { key: h(start), index: si });
    let mut expansions = 0;
    while let Some(Entry { index, .. }) = heap.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        expansions += 1;
        if index == gi {
            let mut path = vec![goal];
            let mut cur = gi;
            while cur != si {
                cur = parent[cur];
                path.push(grid.cell_at(cur));
            }
            path.reverse();
            return Ok(SearchResult { path: Some(path), cost: g[gi], expansions });
        }
        for (nc, cost) in grid.neighbors(grid.cell_at(index)) {
            let ni = grid.index(nc);
            if closed[ni] {
                continue;
            }
            let ng = g[index] + cost;
            if ng < g[ni] {
                g[ni] = ng;
                parent[ni] = index;
                heap.push(Entry { key: ng + h(nc), index: ni });
            }
        }
    }
    Ok(SearchResult { path: None, cost: f64::INFINITY, expansions })
}

/// Closest free cell to `cell` by breadth-first ring search (Chebyshev
/// rings, ties to the smallest Euclidean offset).
pub fn nearest_free(grid: &OccupancyGrid, cell: Cell) -> Option<Cell> {
    let (cx, cy) = (cell.0 as isize, cell.1 as isize);
    let max_r = grid.width().max(grid.height()) as isize;
    for r in 0..=max_r {
        let mut best: Option<(isize, Cell)> = None;
        for dy in -r..=r {
            for dx in -r..=r {
                if dx.abs().max(dy.abs()) != r {
                    continue;
                }
                let (x, y) = (cx + dx, cy + dy);
                if grid.occupied_signed(x, y) {
                    continue;
                }
                let d2 = dx * dx + dy * dy;
                if best.is_none_or(|(b, _)| d2 < b) {
                    best = Some((d2, (x as usize, y as usize)));
                }
            }
        }
        if let Some((_, c)) = best {
            return Some(c);
        }
    }
    None
}

/// Sum of straight segment lengths between consecutive cell centres.
pub fn path_length(grid: &OccupancyGrid, path: &[Cell]) -> f64 {
    polyline_length(&cells_to_points(grid, path))
}

pub fn polyline_length(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
        .sum()
}

pub fn cells_to_points(grid: &OccupancyGrid, path: &[Cell]) -> Vec<(f64, f64)> {
    path.iter().map(|&c| grid.center(c)).collect()
}

/// True if every cell touched by the segment (sampled at a quarter cell) is free.
pub fn line_of_sight(grid: &OccupancyGrid, a: (f64, f64), b: (f64, f64)) -> bool {
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    let steps = (len / (0.25 * grid.resolution())).ceil().max(1.0) as usize;
    (0..=steps).all(|i| {
        let t = i as f64 / steps as f64;
        match grid.cell_of(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)) {
            Some((ix, iy)) => !grid.occupied(ix, iy),
            None => false,
        }
    })
}

/// Greedy string pulling: keeps only the waypoints needed to preserve line
/// of sight on `grid`.
pub fn smooth_path(grid: &OccupancyGrid, points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    let mut anchor = 0;
    while anchor < points.len() - 1 {
        let mut next = anchor + 1;
        for j in (anchor + 2..points.len()).rev() {
            if line_of_sight(grid, points[anchor], points[j]) {
                next = j;
                break;
            }
        }
        out.push(points[next]);
        anchor = next;
    }
    out
}

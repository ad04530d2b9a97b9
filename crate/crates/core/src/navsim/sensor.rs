//! Planar depth sensing by grid traversal.

use super::grid::OccupancyGrid;

pub const DEFAULT_NUM_RAYS: usize = 32;
pub const DEFAULT_FOV: f64 = std::f64::consts::FRAC_PI_2;
pub const DEFAULT_MAX_RANGE: f64 = 5.0;

/// Angles of `k` rays spread evenly over `fov`, from right (negative) to left,
/// relative to the heading.
pub fn ray_offsets(k: usize, fov: f64) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..k)
            .map(|i| -0.5 * fov + fov * i as f64 / (k - 1) as f64)
            .collect(),
    }
}

/// Distance from `(x, y)` along `angle` to the first occupied cell, capped at
/// `max_range`. Walks cells in the order the ray crosses them.
pub fn cast_ray(grid: &OccupancyGrid, x: f64, y: f64, angle: f64, max_range: f64) -> f64 {
    let res = grid.resolution();
    let (ox, oy) = grid.origin();
    let (dx, dy) = (angle.cos(), angle.sin());
    let gx = (x - ox) / res;
    let gy = (y - oy) / res;
    let mut ix = gx.floor() as isize;
    let mut iy = gy.floor() as isize;
    if grid.occupied_signed(ix, iy) {
        return 0.0;
    }

    let step_x: isize = if dx > 0.0 { 1 } else { -1 };
    let step_y: isize = if dy > 0.0 { 1 } else { -1 };
    // Ray parameter (in metres) to the next vertical / horizontal cell boundary.
    let mut t_max_x = if dx.abs() < 1e-12 {
        f64::INFINITY
    } else if dx > 0.0 {
        ((ix + 1) as f64 - gx) * res / dx
    } else {
        (gx - ix as f64) * res / -dx
    };
    let mut t_max_y = if dy.abs() < 1e-12 {
        f64::INFINITY
    } else if dy > 0.0 {
        ((iy + 1) as f64 - gy) * res / dy
    } else {
        (gy - iy as f64) * res / -dy
    };
    let t_dx = if dx.abs() < 1e-12 { f64::INFINITY } else { res / dx.abs() };
    let t_dy = if dy.abs() < 1e-12 { f64::INFINITY } else { res / dy.abs() };

    loop {
        let t = if t_max_x < t_max_y {
            ix += step_x;
            let t = t_max_x;
            t_max_x += t_dx;
            t
        } else {
            iy += step_y;
            let t = t_max_y;
            t_max_y += t_dy;
            t
        };
        if t >= max_range {
            return max_range;
        }
        if grid.occupied_signed(ix, iy) {
            return t;
        }
    }
}

/// Depths (m) of `k` rays spread over `fov` around the pose heading.
pub fn raycast_depth(
    grid: &OccupancyGrid,
    pose: (f64, f64, f64),
    k: usize,
    fov: f64,
    max_range: f64,
) -> Vec<f64> {
    let (x, y, heading) = pose;
    ray_offsets(k, fov)
        .into_iter()
        .map(|off| cast_ray(grid, x, y, heading + off, max_range))
        .collect()
}

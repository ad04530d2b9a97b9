//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here calls the code it checks.

#![allow(dead_code)]

use legnav::diffnet::{Activation, Mat, Mlp, ParamCollection, Tape};
use legnav::navsim::{Cell, OccupancyGrid};
use ndarray::Array2;
use rand::Rng;

/// Plain forward pass of an MLP with weights `"{prefix}{i}.w"`/`".b"`,
/// written out as explicit loops.
pub fn mlp_forward_oracle(widths: &[usize], hidden: Activation, out: Activation, params: &ParamCollection, prefix: &str, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    let layers = widths.len() - 1;
    for l in 0..layers {
        let w = params.get(&format!("{prefix}{l}.w")).expect("weight");
        let b = params.get(&format!("{prefix}{l}.b")).expect("bias");
        let mut next = vec![0.0; widths[l + 1]];
        for (j, n) in next.iter_mut().enumerate() {
            let mut acc = b[[0, j]];
            for (i, hi) in h.iter().enumerate() {
                acc += hi * w[[i, j]];
            }
            let act = if l + 1 == layers { out } else { hidden };
            *n = match act {
                Activation::Identity => acc,
                Activation::Relu => acc.max(0.0),
                Activation::Tanh => acc.tanh(),
            };
        }
        h = next;
    }
    h
}

/// Scalar loss `Σ_k c_k · out_k` averaged over a batch, evaluated by the oracle.
pub fn weighted_output_loss(
    widths: &[usize],
    hidden: Activation,
    out: Activation,
    params: &ParamCollection,
    prefix: &str,
    inputs: &Mat,
    coeffs: &[f64],
) -> f64 {
    let n = inputs.nrows();
    let mut total = 0.0;
    for r in 0..n {
        let row: Vec<f64> = inputs.row(r).to_vec();
        let y = mlp_forward_oracle(widths, hidden, out, params, prefix, &row);
        total += y.iter().zip(coeffs).map(|(a, c)| a * c).sum::<f64>();
    }
    total / n as f64
}

/// Largest relative error between the tape's gradient of the weighted-output
/// loss and central finite differences with step `h`.
pub fn mlp_fd_max_rel_error<R: Rng>(widths: &[usize], hidden: Activation, out: Activation, batch: usize, h: f64, rng: &mut R) -> f64 {
    let mlp = Mlp::new(widths.to_vec(), hidden, out).with_prefix("m");
    let mut params = ParamCollection::new();
    mlp.init_params(&mut params, rng).unwrap();
    // Non-zero biases so relu kinks are not sitting exactly on the inputs.
    for idx in 0..params.len() {
        let v = params.value(idx).mapv(|x| x + rng.random_range(-0.1..0.1));
        params.set(idx, v).unwrap();
    }
    let inputs = Array2::from_shape_fn((batch, widths[0]), |_| rng.random_range(-1.0..1.0));
    let coeffs: Vec<f64> = (0..*widths.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();

    let mut tape = Tape::new();
    let x = tape.constant(inputs.clone());
    let y = mlp.forward(&params, x, &mut tape).unwrap();
    let c = tape.constant(Array2::from_shape_vec((1, coeffs.len()), coeffs.clone()).unwrap());
    let ones = tape.constant(Array2::ones((batch, 1)));
    let cb = tape.matmul(ones, c).unwrap();
    let prod = tape.mul(y, cb).unwrap();
    let s = tape.sum(prod);
    let loss = tape.scale(s, 1.0 / batch as f64);
    let grads = tape.backward(loss).unwrap().wrt(&params);

    let mut worst: f64 = 0.0;
    for idx in 0..params.len() {
        let shape = params.value(idx).dim();
        for r in 0..shape.0 {
            for col in 0..shape.1 {
                let base = params.value(idx).clone();
                let mut plus = base.clone();
                plus[[r, col]] += h;
                let mut minus = base.clone();
                minus[[r, col]] -= h;
                let mut p = params.clone();
                p.set(idx, plus).unwrap();
                let lp = weighted_output_loss(widths, hidden, out, &p, "m", &inputs, &coeffs);
                p.set(idx, minus).unwrap();
                let lm = weighted_output_loss(widths, hidden, out, &p, "m", &inputs, &coeffs);
                let fd = (lp - lm) / (2.0 * h);
                let an = grads.0[idx][[r, col]];
                let err = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
                worst = worst.max(err);
            }
        }
    }
    worst
}

/// Foot displacement by rotating the CoM-to-foot vector through `ω·dt`
/// and translating by `v·dt` along the body's x axis.
pub fn footstep_oracle(gamma: f64, v: f64, omega: f64, r_f: f64, dt: f64) -> (f64, f64) {
    let (fx, fy) = (r_f * gamma.cos(), r_f * gamma.sin());
    let a = omega * dt;
    let (rx, ry) = (a.cos() * fx - a.sin() * fy, a.sin() * fx + a.cos() * fy);
    (rx - fx + v * dt, ry - fy)
}

/// Distances to `goal` by repeated relaxation of every edge until nothing
/// changes. Moves are 8-connected; a diagonal needs both side cells free.
pub fn bellman_ford(grid: &OccupancyGrid, goal: Cell) -> Vec<f64> {
    let (w, h) = (grid.width(), grid.height());
    let res = grid.resolution();
    let free = |x: isize, y: isize| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && !grid.occupied(x as usize, y as usize);
    let mut d = vec![f64::INFINITY; w * h];
    d[goal.1 * w + goal.0] = 0.0;
    loop {
        let mut changed = false;
        for y in 0..h as isize {
            for x in 0..w as isize {
                if !free(x, y) {
                    continue;
                }
                let here = d[y as usize * w + x as usize];
                if here.is_infinite() {
                    continue;
                }
                for dx in -1..=1isize {
                    for dy in -1..=1isize {
                        if (dx, dy) == (0, 0) || !free(x + dx, y + dy) {
                            continue;
                        }
                        let cost = if dx != 0 && dy != 0 {
                            if !free(x + dx, y) || !free(x, y + dy) {
                                continue;
                            }
                            res * std::f64::consts::SQRT_2
                        } else {
                            res
                        };
                        let j = (y + dy) as usize * w + (x + dx) as usize;
                        if here + cost < d[j] {
                            d[j] = here + cost;
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            return d;
        }
    }
}

/// A `w`×`h` grid at resolution 1 with a solid border and random interior
/// obstacles at the given density.
pub fn random_grid<R: Rng>(w: usize, h: usize, density: f64, rng: &mut R) -> OccupancyGrid {
    let rows: Vec<String> = (0..h)
        .map(|y| {
            (0..w)
                .map(|x| {
                    let border = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
                    if border || rng.random_bool(density) { '#' } else { '.' }
                })
                .collect()
        })
        .collect();
    let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
    OccupancyGrid::from_ascii(&refs, 1.0).unwrap()
}

pub fn free_cells(grid: &OccupancyGrid) -> Vec<Cell> {
    let mut out = Vec::new();
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            if !grid.occupied(x, y) {
                out.push((x, y));
            }
        }
    }
    out
}

//! Cell-averaged demagnetization tensor for pairs of identical cuboid cells.
//!
//! `N(r)` is the tensor such that a uniformly magnetized source cell at the
//! origin produces the cell-averaged field `H = -N(r) M` in a target cell
//! displaced by `r`. Arguments are expected in units where the cell edges are
//! O(1); the tensor is scale invariant.

use std::f64::consts::PI;

/// Components in the order `[xx, yy, zz, xy, xz, yz]`.
pub type Tensor6 = [f64; 6];

fn newell_f(x: f64, y: f64, z: f64) -> f64 {
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    if r == 0.0 {
        return 0.0;
    }
    let mut acc = (2.0 * x2 - y2 - z2) * r / 6.0;
    if y > 0.0 && x2 + z2 > 0.0 {
        acc += 0.5 * y * (z2 - x2) * (y / (x2 + z2).sqrt()).asinh();
    }
    if z > 0.0 && x2 + y2 > 0.0 {
        acc += 0.5 * z * (y2 - x2) * (z / (x2 + y2).sqrt()).asinh();
    }
    if x > 0.0 {
        acc -= x * y * z * (y * z / (x * r)).atan();
    }
    acc
}

fn newell_g(x: f64, y: f64, z: f64) -> f64 {
    let sign = x.signum() * y.signum();
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    if r == 0.0 {
        return 0.0;
    }
    let mut acc = -x * y * r / 3.0;
    if z > 0.0 && x2 + y2 > 0.0 {
        acc += x * y * z * (z / (x2 + y2).sqrt()).asinh();
    }
    if x > 0.0 && y2 + z2 > 0.0 {
        acc += y / 6.0 * (3.0 * z2 - y2) * (x / (y2 + z2).sqrt()).asinh();
    }
    if y > 0.0 && x2 + z2 > 0.0 {
        acc += x / 6.0 * (3.0 * z2 - x2) * (y / (x2 + z2).sqrt()).asinh();
    }
    if z > 0.0 {
        acc -= z * z2 / 6.0 * (x * y / (z * r)).atan();
    }
    if y > 0.0 {
        acc -= 0.5 * z * y2 * (x * z / (y * r)).atan();
    }
    if x > 0.0 {
        acc -= 0.5 * z * x2 * (y * z / (x * r)).atan();
    }
    // f64::signum(0.0) is 1, but g vanishes on the coordinate planes anyway.
    sign * acc
}

const W: [f64; 3] = [-1.0, 2.0, -1.0];

/// Second difference of `func` over the 27-point stencil around `(x, y, z)`.
fn stencil(func: fn(f64, f64, f64) -> f64, x: f64, y: f64, z: f64, a: f64, b: f64, c: f64) -> f64 {
    let mut sum = 0.0;
    for (i, wi) in W.iter().enumerate() {
        let xi = x + (i as f64 - 1.0) * a;
        for (j, wj) in W.iter().enumerate() {
            let yj = y + (j as f64 - 1.0) * b;
            let wij = wi * wj;
            for (k, wk) in W.iter().enumerate() {
                sum += wij * wk * func(xi, yj, z + (k as f64 - 1.0) * c);
            }
        }
    }
    sum
}

/// Newell tensor for cells of size `d` separated by `r`.
///
/// Evaluated in the first octant and mapped back by parity (diagonal terms
/// even, off-diagonal terms odd in each of their two axes), so `N(r) = N(-r)`
/// holds bit for bit.
pub fn newell_tensor(r: [f64; 3], d: [f64; 3]) -> Tensor6 {
    let sign = |v: f64| if v < 0.0 { -1.0 } else { 1.0 };
    let (sx, sy, sz) = (sign(r[0]), sign(r[1]), sign(r[2]));
    let [x, y, z] = [r[0].abs(), r[1].abs(), r[2].abs()];
    let [dx, dy, dz] = d;
    let norm = 4.0 * PI * dx * dy * dz;
    [
        stencil(newell_f, x, y, z, dx, dy, dz) / norm,
        stencil(newell_f, y, x, z, dy, dx, dz) / norm,
        stencil(newell_f, z, y, x, dz, dy, dx) / norm,
        sx * sy * stencil(newell_g, x, y, z, dx, dy, dz) / norm,
        sx * sz * stencil(newell_g, x, z, y, dx, dz, dy) / norm,
        sy * sz * stencil(newell_g, y, z, x, dy, dz, dx) / norm,
    ]
}

/// Tensor between cells whose index offset is `(i, j, k)` on a grid with
/// spacing `d` (metres). Coordinates are rescaled to cell units first.
pub fn cell_tensor(offset: [i64; 3], d: [f64; 3]) -> Tensor6 {
    let s = d[0].min(d[1]).min(d[2]);
    let du = [d[0] / s, d[1] / s, d[2] / s];
    let r = [
        offset[0] as f64 * du[0],
        offset[1] as f64 * du[1],
        offset[2] as f64 * du[2],
    ];
    newell_tensor(r, du)
}

//! Second-order finite-difference operators and quadrature.
//!
//! Gradient and divergence use central differences in the interior; periodic
//! grids wrap, clamped grids fall back to one-sided second-order stencils at
//! the edges. The Laplacian is defined as the literal composition
//! `divergence(gradient(f))` so that the discrete product structure is exact:
//! `div . grad = lap` holds at every site to machine precision and
//! `integrate(laplacian(f)) = 0` telescopes exactly on periodic grids. On a
//! uniform axis the interior composition reduces to the 3-point (1D) / 5-point
//! (2D) second-difference stencil with doubled spacing,
//! `(f(x+2h) - 2 f(x) + f(x-2h)) / (2h)^2`.

use super::{Boundary, Grid, ScalarField, VectorField};

/// Deterministic pairwise summation; order-independent accumulation error.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
        }
    }
}

/// Central difference of `values` along `axis`, returned as a flat vector.
fn diff_axis(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.points(axis);
    let h = grid.spacing(axis);
    let inv2h = 1.0 / (2.0 * h);
    let stride = if axis == 0 { 1 } else { grid.points(0) };
    let lines = grid.len() / n;
    let line_stride = if axis == 0 { grid.points(0) } else { 1 };
    let mut out = vec![0.0; grid.len()];
    for line in 0..lines {
        let base = line * line_stride;
        let at = |k: usize| values[base + k * stride];
        let set = |out: &mut Vec<f64>, k: usize, v: f64| out[base + k * stride] = v;
        match grid.boundary() {
            Boundary::Periodic => {
                for k in 0..n {
                    let kp = (k + 1) % n;
                    let km = (k + n - 1) % n;
                    set(&mut out, k, (at(kp) - at(km)) * inv2h);
                }
            }
            Boundary::Clamped => {
                set(&mut out, 0, (-3.0 * at(0) + 4.0 * at(1) - at(2)) * inv2h);
                for k in 1..n - 1 {
                    set(&mut out, k, (at(k + 1) - at(k - 1)) * inv2h);
                }
                set(
                    &mut out,
                    n - 1,
                    (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) * inv2h,
                );
            }
        }
    }
    out
}

/// Gradient of a scalar field, one central-difference component per axis.
pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = f.grid();
    let components = (0..grid.ndim())
        .map(|axis| diff_axis(grid, f.values(), axis))
        .collect();
    VectorField::from_components(grid, components)
}

/// Divergence of a vector field: the gradient stencil applied per component, summed.
pub fn divergence(v: &VectorField) -> ScalarField {
    let grid = v.grid();
    assert_eq!(v.ncomp(), grid.ndim(), "component count must equal ndim");
    let mut acc = vec![0.0; grid.len()];
    for axis in 0..grid.ndim() {
        let d = diff_axis(grid, v.component(axis), axis);
        for (a, b) in acc.iter_mut().zip(d) {
            *a += b;
        }
    }
    ScalarField::from_values(grid, acc)
}

/// Laplacian as the exact composition `divergence(gradient(f))`.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    divergence(&gradient(f))
}

/// Domain integral. Riemann sum times `h^ndim` on periodic grids, tensor-product
/// trapezoid rule on clamped grids.
pub fn integrate(f: &ScalarField) -> f64 {
    let grid = f.grid();
    let vol = grid.cell_volume();
    match grid.boundary() {
        Boundary::Periodic => vol * pairwise_sum(f.values()),
        Boundary::Clamped => {
            let weighted: Vec<f64> = (0..grid.len())
                .map(|idx| {
                    let (i, j) = grid.site(idx);
                    let mut w = edge_weight(i, grid.points(0));
                    if grid.ndim() == 2 {
                        w *= edge_weight(j, grid.points(1));
                    }
                    w * f.get(idx)
                })
                .collect();
            vol * pairwise_sum(&weighted)
        }
    }
}

fn edge_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

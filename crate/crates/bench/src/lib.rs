//! Shared inputs for the benchmarks.

use halfspace::BoundaryKind;

/// Boundary conditions exercised by every kernel benchmark.
pub const BOUNDARIES: [BoundaryKind; 4] =
    [BoundaryKind::Bulk, BoundaryKind::Dirichlet, BoundaryKind::Neumann, BoundaryKind::Robin { c: 1.0 }];

/// A fixed `(τ, z, z')` grid of `n³` points spread over the usual ranges.
pub fn kernel_grid(n: usize) -> Vec<(f64, f64, f64)> {
    let axis = |i: usize, lo: f64, hi: f64| lo * (hi / lo).powf(i as f64 / (n.max(2) - 1) as f64);
    let mut out = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push((axis(i, 1e-2, 1e2), axis(j, 1e-2, 10.0), axis(k, 1e-2, 10.0)));
            }
        }
    }
    out
}

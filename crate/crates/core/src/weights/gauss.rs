//! Gaussian integrals over products of heat kernels on a tree, with the
//! internal positions restricted to the positive orthant.

use crate::quad::{integrate, QuadOptions};
use crate::rng::substream;
use crate::special::{bvn_upper, norm_cdf, norm_pdf, norm_quantile};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::f64::consts::PI;

/// End point of a line: a free internal position (index) or a fixed coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Free(usize),
    Fixed(f64),
}

/// One heat-kernel factor `p_B(variance; a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub a: Node,
    pub b: Node,
    pub variance: f64,
}

/// Orthant probability with its Monte Carlo standard error (zero for the
/// deterministic rules).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orthant {
    pub value: f64,
    pub std_error: f64,
}

/// Samples used above four dimensions.
pub const MC_SAMPLES: usize = 1_000_000;

/// `P(X ≥ 0)` for `X ~ N(mu, sigma)` by separation of variables: nested
/// adaptive quadrature over the whitened coordinates up to four dimensions,
/// seeded Monte Carlo above.
pub fn orthant_probability(mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Orthant {
    let r = mu.len();
    if r == 0 {
        return Orthant { value: 1.0, std_error: 0.0 };
    }
    if r == 1 {
        return Orthant { value: norm_cdf(mu[0] / sigma[(0, 0)].sqrt()), std_error: 0.0 };
    }
    // most restrictive coordinates first
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| (mu[i] / sigma[(i, i)].sqrt()).total_cmp(&(mu[j] / sigma[(j, j)].sqrt())));
    let m = DVector::from_fn(r, |i, _| mu[order[i]]);
    let s = DMatrix::from_fn(r, r, |i, j| sigma[(order[i], order[j])]);
    let l = match s.clone().cholesky() {
        Some(c) => c.l(),
        None => {
            // tiny diagonal shift for numerically singular covariances
            let eps = 1e-14 * s.diagonal().max();
            (s + DMatrix::identity(r, r) * eps).cholesky().expect("positive definite after shift").l()
        }
    };
    let integrand = |u: &[f64], w: &mut [f64]| -> f64 {
        let mut prod = 1.0;
        for i in 0..r {
            let mut acc = m[i];
            for j in 0..i {
                acc += l[(i, j)] * w[j];
            }
            let a = -acc / l[(i, i)];
            let q = norm_cdf(-a);
            prod *= q;
            if prod == 0.0 {
                return 0.0;
            }
            if i + 1 < r {
                let t = (q * (1.0 - u[i])).max(f64::MIN_POSITIVE);
                w[i] = -norm_quantile(t);
            }
        }
        prod
    };
    if r <= 4 {
        let mut w = vec![0.0; r];
        let value = nested(0, &m, &l, &mut w);
        return Orthant { value: value.clamp(0.0, 1.0), std_error: 0.0 };
    }
    let mut w = vec![0.0; r];
    let mut rng = substream(0x5eed_0f_0a7a, r as u64);
    let mut u = vec![0.0; r - 1];
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..MC_SAMPLES {
        for v in u.iter_mut() {
            *v = rng.random::<f64>();
        }
        let f = integrand(&u, &mut w);
        sum += f;
        sum2 += f * f;
    }
    let n = MC_SAMPLES as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0);
    Orthant { value: mean, std_error: (var / n).sqrt() }
}

/// `P(W_i ≥ a_i(W_<i), i ≥ k)` for standard normal `W` given the first `k`
/// coordinates in `w`.
fn nested(k: usize, m: &DVector<f64>, l: &DMatrix<f64>, w: &mut [f64]) -> f64 {
    let r = m.len();
    let mut acc = m[k];
    for j in 0..k {
        acc += l[(k, j)] * w[j];
    }
    let a = -acc / l[(k, k)];
    if k + 1 == r {
        return norm_cdf(-a);
    }
    if k + 2 == r {
        // last two coordinates: bivariate normal in closed form
        let mut acc2 = m[k + 1];
        for j in 0..k {
            acc2 += l[(k + 1, j)] * w[j];
        }
        let (l11, l21, l22) = (l[(k, k)], l[(k + 1, k)], l[(k + 1, k + 1)]);
        let s2 = (l21 * l21 + l22 * l22).sqrt();
        let p = bvn_upper(a, -acc2 / s2, l21 / s2 * l11.signum());
        if p > BVN_FLOOR {
            return p;
        }
    }
    let lo = a.max(-WHITE_RANGE);
    let hi = a.max(0.0) + WHITE_RANGE;
    if lo >= hi {
        return 0.0;
    }
    let mut buf = w.to_vec();
    let f = |x: f64| {
        buf[k] = x;
        norm_pdf(x) * nested(k + 1, m, l, &mut buf)
    };
    integrate(f, lo, hi, QuadOptions { abs_tol: 1e-300, rel_tol: 1e-10, max_intervals: 400 })
        .map_or(f64::NAN, |q| q.value)
}

const WHITE_RANGE: f64 = 9.0;
/// Below this value the closed-form bivariate rule loses relative accuracy and
/// the nested quadrature is used instead.
const BVN_FLOOR: f64 = 1e-7;

/// Log of `∫_{(ℝ⁺)^r} ∏ p_B(variance; a, b) dz` over the free positions.
/// Returns `-∞` when the integral vanishes.
pub fn log_tree_integral(n_free: usize, lines: &[Line]) -> f64 {
    log_tree_integral_with(n_free, lines.iter().map(|l| (l.a, l.b, l.variance)))
}

const STACK: usize = 8;

/// [`log_tree_integral`] over `(end, end, variance)` triples.
pub fn log_tree_integral_with(n_free: usize, lines: impl Iterator<Item = (Node, Node, f64)>) -> f64 {
    if n_free > STACK {
        let v: Vec<Line> = lines.map(|(a, b, variance)| Line { a, b, variance }).collect();
        return log_tree_integral_large(n_free, &v);
    }
    let mut a = [[0.0f64; STACK]; STACK];
    let mut b = [0.0f64; STACK];
    let mut c0 = 0.0;
    let mut var_prod = 1.0;
    let mut log_norm = 0.0;
    for (na, nb, v) in lines {
        let w = 1.0 / v;
        var_prod *= 2.0 * PI * v;
        if !(1e-200..=1e200).contains(&var_prod) {
            log_norm -= 0.5 * var_prod.ln();
            var_prod = 1.0;
        }
        match (na, nb) {
            (Node::Free(i), Node::Free(j)) => {
                a[i][i] += w;
                a[j][j] += w;
                a[i][j] -= w;
                a[j][i] -= w;
            }
            (Node::Free(i), Node::Fixed(x)) | (Node::Fixed(x), Node::Free(i)) => {
                a[i][i] += w;
                b[i] += w * x;
                c0 += w * x * x;
            }
            (Node::Fixed(x), Node::Fixed(y)) => c0 += w * (x - y) * (x - y),
        }
    }
    log_norm -= 0.5 * var_prod.ln();
    if n_free == 0 {
        return log_norm - 0.5 * c0;
    }
    if let Some(v) = small_case(n_free, &a, &b, c0) {
        return if v == f64::NEG_INFINITY { v } else { log_norm + v };
    }
    let am = DMatrix::from_fn(n_free, n_free, |i, j| a[i][j]);
    let bv = DVector::from_fn(n_free, |i, _| b[i]);
    log_norm + gaussian_part(am, bv, c0)
}

fn log_tree_integral_large(n_free: usize, lines: &[Line]) -> f64 {
    let mut a = DMatrix::<f64>::zeros(n_free, n_free);
    let mut b = DVector::<f64>::zeros(n_free);
    let mut c0 = 0.0;
    let mut log_norm = 0.0;
    for ln in lines {
        let w = 1.0 / ln.variance;
        log_norm -= 0.5 * (2.0 * PI * ln.variance).ln();
        match (ln.a, ln.b) {
            (Node::Free(i), Node::Free(j)) => {
                a[(i, i)] += w;
                a[(j, j)] += w;
                a[(i, j)] -= w;
                a[(j, i)] -= w;
            }
            (Node::Free(i), Node::Fixed(x)) | (Node::Fixed(x), Node::Free(i)) => {
                a[(i, i)] += w;
                b[i] += w * x;
                c0 += w * x * x;
            }
            (Node::Fixed(x), Node::Fixed(y)) => c0 += w * (x - y) * (x - y),
        }
    }
    log_norm + gaussian_part(a, b, c0)
}

/// `(r/2) log 2π − ½ log det A − ½ (c₀ − bᵀA⁻¹b) + log P(orthant)`.
fn gaussian_part(a: DMatrix<f64>, b: DVector<f64>, c0: f64) -> f64 {
    let n_free = b.len();
    let chol = a.cholesky().expect("tree precision matrix is positive definite");
    let mu = chol.solve(&b);
    let sigma = chol.inverse();
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad = (c0 - b.dot(&mu)).max(0.0);
    let p = orthant_probability(&mu, &sigma).value;
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    0.5 * n_free as f64 * (2.0 * PI).ln() - 0.5 * log_det - 0.5 * quad + p.ln()
}

/// Closed forms for one and two free vertices: the Gaussian part of the log
/// integral without the kernel normalizations, or `None` when the general
/// path is needed.
fn small_case(n: usize, a: &[[f64; STACK]; STACK], b: &[f64; STACK], c0: f64) -> Option<f64> {
    match n {
        1 => {
            let a11 = a[0][0];
            let mu = b[0] / a11;
            let quad = (c0 - b[0] * mu).max(0.0);
            let p = norm_cdf(mu * a11.sqrt());
            if p <= 0.0 {
                return Some(f64::NEG_INFINITY);
            }
            Some(0.5 * (2.0 * PI).ln() - 0.5 * a11.ln() - 0.5 * quad + p.ln())
        }
        2 => {
            let (a11, a12, a22) = (a[0][0], a[0][1], a[1][1]);
            let det = a11 * a22 - a12 * a12;
            if !(det > 0.0) {
                return None;
            }
            let (s11, s12, s22) = (a22 / det, -a12 / det, a11 / det);
            let mu1 = s11 * b[0] + s12 * b[1];
            let mu2 = s12 * b[0] + s22 * b[1];
            let quad = (c0 - b[0] * mu1 - b[1] * mu2).max(0.0);
            let (sd1, sd2) = (s11.sqrt(), s22.sqrt());
            let p = bvn_upper(-mu1 / sd1, -mu2 / sd2, s12 / (sd1 * sd2));
            if p <= BVN_FLOOR {
                return None;
            }
            Some((2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * quad + p.ln())
        }
        _ => None,
    }
}

/// `exp` of [`log_tree_integral`].
pub fn tree_integral(n_free: usize, lines: &[Line]) -> f64 {
    log_tree_integral(n_free, lines).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::p_bulk;
    use crate::quad::{integrate_to_inf, QuadOptions};

    #[test]
    fn single_vertex_matches_quadrature() {
        let lines = [
            Line { a: Node::Free(0), b: Node::Fixed(0.7), variance: 0.4 },
            Line { a: Node::Free(0), b: Node::Fixed(0.0), variance: 0.09 },
            Line { a: Node::Free(0), b: Node::Fixed(-0.3), variance: 1.3 },
        ];
        let exact = integrate_to_inf(
            |z| p_bulk(0.4, z, 0.7) * p_bulk(0.09, z, 0.0) * p_bulk(1.3, z, -0.3),
            0.0,
            0.5,
            QuadOptions::tol(1e-15, 1e-12),
        )
        .unwrap()
        .value;
        assert!((tree_integral(1, &lines) / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn two_vertex_chain_matches_nested_quadrature() {
        // y=1.2 -(0.5)- z0 -(0.3)- z1 -(0.2)- 0
        let lines = [
            Line { a: Node::Free(0), b: Node::Fixed(1.2), variance: 0.5 },
            Line { a: Node::Free(0), b: Node::Free(1), variance: 0.3 },
            Line { a: Node::Free(1), b: Node::Fixed(0.0), variance: 0.2 },
        ];
        let o = QuadOptions::tol(1e-14, 1e-11);
        let exact = integrate_to_inf(
            |z0| {
                p_bulk(0.5, z0, 1.2)
                    * integrate_to_inf(|z1| p_bulk(0.3, z0, z1) * p_bulk(0.2, z1, 0.0), 0.0, 0.5, o).unwrap().value
            },
            0.0,
            1.0,
            o,
        )
        .unwrap()
        .value;
        assert!((tree_integral(2, &lines) / exact - 1.0).abs() < 1e-9, "{} {}", tree_integral(2, &lines), exact);
    }

    #[test]
    fn orthant_of_independent_coordinates_factorizes() {
        let mu = DVector::from_vec(vec![0.3, -0.5, 1.0]);
        let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.5]));
        let p = orthant_probability(&mu, &sigma).value;
        let exact = norm_cdf(0.3) * norm_cdf(-0.5 / 2f64.sqrt()) * norm_cdf(1.0 / 0.5f64.sqrt());
        assert!((p - exact).abs() < 1e-13);
    }

    #[test]
    fn bivariate_orthant_with_correlation() {
        // P(X>=0, Y>=0) for standard normals with correlation rho: 1/4 + asin(rho)/(2π)
        let rho: f64 = 0.6;
        let mu = DVector::from_vec(vec![0.0, 0.0]);
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let p = orthant_probability(&mu, &sigma).value;
        assert!((p - (0.25 + rho.asin() / (2.0 * PI))).abs() < 1e-12, "{p}");
    }

    #[test]
    fn trivariate_orthant_closed_form() {
        // centred: 1/8 + (asin r12 + asin r13 + asin r23)/(4π)
        let (a, b, c): (f64, f64, f64) = (0.3, -0.2, 0.5);
        let mu = DVector::zeros(3);
        let sigma = DMatrix::from_row_slice(3, 3, &[1.0, a, b, a, 1.0, c, b, c, 1.0]);
        let p = orthant_probability(&mu, &sigma).value;
        let exact = 0.125 + (a.asin() + b.asin() + c.asin()) / (4.0 * PI);
        assert!((p - exact).abs() < 1e-9, "{p} {exact}");
    }
}

//! Regularized flowing propagators, their bulk/surface split and Λ-derivatives.

use crate::error::{domain, Result};
use crate::kernels::{kernel_value, surface_kernel_value, p_bulk, BoundaryKind, KernelContext};
use crate::quad::{integrate_log, QuadOptions};
use serde::{Deserialize, Serialize};

/// Infrared flow scale `Λ` and ultraviolet cutoff `Λ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffPair {
    pub lambda: f64,
    pub lambda0: f64,
}

impl CutoffPair {
    pub fn new(lambda: f64, lambda0: f64) -> Result<Self> {
        let c = Self { lambda, lambda0 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.lambda0 > 0.0) || !self.lambda0.is_finite() {
            return domain(format!("invalid cutoffs ({}, {})", self.lambda, self.lambda0));
        }
        if self.lambda > self.lambda0 {
            return domain(format!("Λ = {} exceeds Λ₀ = {}", self.lambda, self.lambda0));
        }
        Ok(())
    }
}

/// Which part of the propagator to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Full,
    Bulk,
    Surface,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorQuery {
    pub p: f64,
    pub z: f64,
    pub zp: f64,
    pub ctx: KernelContext,
    pub cut: CutoffPair,
}

impl PropagatorQuery {
    fn validate(&self) -> Result<()> {
        self.cut.validate()?;
        self.ctx.bc.validate()?;
        if !(self.p >= 0.0) {
            return domain(format!("momentum magnitude must be nonnegative, got {}", self.p));
        }
        if !(self.z >= 0.0 && self.zp >= 0.0) {
            return domain(format!("z, z' must be nonnegative, got ({}, {})", self.z, self.zp));
        }
        Ok(())
    }

    fn kappa2(&self) -> f64 {
        self.p * self.p + self.ctx.mass * self.ctx.mass
    }
}

/// Heat kernel selected by `part`.
pub fn part_kernel(bc: BoundaryKind, part: Part, tau: f64, z: f64, zp: f64) -> f64 {
    match part {
        Part::Full => kernel_value(bc, tau, z, zp),
        Part::Bulk => p_bulk(tau, z, zp),
        Part::Surface => surface_kernel_value(bc, tau, z, zp),
    }
}

/// Absolute tolerance of the proper-time integral.
pub const PROPAGATOR_ABS_TOL: f64 = 1e-12;

/// Proper-time upper limit replacing `∞` when `Λ = 0`: the neglected tail
/// `∫_T^∞ 4 (2πλ)^{-1/2} e^{-λκ²} dλ` is below `tol`.
pub fn ir_tail_cutoff(kappa2: f64, tol: f64) -> f64 {
    let mut t = 1.0 / kappa2;
    loop {
        let bound = 4.0 * (-t * kappa2).exp() / ((2.0 * std::f64::consts::PI * t).sqrt() * kappa2);
        if bound < tol {
            return t;
        }
        t *= 1.5;
    }
}

/// `C^{Λ,Λ₀}_•(p; z, z') = ∫_{1/Λ₀²}^{1/Λ²} dλ p_•(λ; z, z') e^{-λ(p²+m²)}`.
pub fn flowing_propagator(q: PropagatorQuery, part: Part) -> Result<f64> {
    q.validate()?;
    if q.ctx.bc == BoundaryKind::Bulk && part == Part::Surface {
        return Ok(0.0);
    }
    if q.cut.lambda == q.cut.lambda0 {
        return Ok(0.0);
    }
    let k2 = q.kappa2();
    let lo = 1.0 / (q.cut.lambda0 * q.cut.lambda0);
    let hi = if q.cut.lambda > 0.0 {
        1.0 / (q.cut.lambda * q.cut.lambda)
    } else {
        ir_tail_cutoff(k2, 0.1 * PROPAGATOR_ABS_TOL)
    };
    let bc = q.ctx.bc;
    let f = |lam: f64| part_kernel(bc, part, lam, q.z, q.zp) * (-lam * k2).exp();
    Ok(integrate_log(f, lo, hi, QuadOptions { abs_tol: PROPAGATOR_ABS_TOL, rel_tol: 1e-12, max_intervals: 4000 })?.value)
}

/// `Ċ^Λ(p) = −(2/Λ³) e^{-(p²+m²)/Λ²}`.
#[inline]
pub fn cdot(lambda: f64, p: f64, m: f64) -> f64 {
    -2.0 / lambda.powi(3) * (-(p * p + m * m) / (lambda * lambda)).exp()
}

/// `∂_Λ C^{Λ,Λ₀}_• = Ċ^Λ(p) p_•(1/Λ²; z, z')`.
pub fn propagator_derivative(q: PropagatorQuery, part: Part) -> Result<f64> {
    q.validate()?;
    if !(q.cut.lambda > 0.0) {
        return domain("Λ-derivative needs Λ > 0");
    }
    let tau = 1.0 / (q.cut.lambda * q.cut.lambda);
    Ok(cdot(q.cut.lambda, q.p, q.ctx.mass) * part_kernel(q.ctx.bc, part, tau, q.z, q.zp))
}

/// Normalization of the unregularized propagator.
///
/// `Displayed` is `(1/2κ)[e^{-κ|z−z'|} ± …]`, the Green function of `−∂² + κ²`.
/// `ProperTime` is the exact value of the proper-time integral with the kernels
/// of this crate (variance `λ`), the Green function of `−½∂² + κ²`, which equals
/// `2·Displayed` evaluated at `√2 κ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    Displayed,
    ProperTime,
}

/// Unregularized propagator in the displayed normalization.
pub fn closed_form_propagator(bc: BoundaryKind, p: f64, z: f64, zp: f64, m: f64) -> Result<f64> {
    closed_form_propagator_with(Convention::Displayed, bc, p, z, zp, m)
}

pub fn closed_form_propagator_with(conv: Convention, bc: BoundaryKind, p: f64, z: f64, zp: f64, m: f64) -> Result<f64> {
    bc.validate()?;
    if !(m > 0.0) {
        return domain(format!("mass must be positive, got {m}"));
    }
    if !(p >= 0.0) {
        return domain(format!("momentum magnitude must be nonnegative, got {p}"));
    }
    if bc.is_half_line() && !(z >= 0.0 && zp >= 0.0) {
        return domain(format!("z, z' must be nonnegative, got ({z}, {zp})"));
    }
    let kappa = (p * p + m * m).sqrt();
    let (k, norm) = match conv {
        Convention::Displayed => (kappa, 1.0),
        Convention::ProperTime => (std::f64::consts::SQRT_2 * kappa, 2.0),
    };
    let direct = (-k * (z - zp).abs()).exp();
    let image = (-k * (z + zp)).exp();
    let bracket = match bc {
        BoundaryKind::Bulk => direct,
        BoundaryKind::Dirichlet => direct - image,
        BoundaryKind::Neumann => direct + image,
        BoundaryKind::Robin { c } => direct + (k - c) / (k + c) * image,
    };
    Ok(norm * bracket / (2.0 * k))
}

/// Exact proper-time contribution of `λ ∈ (0, 1/Λ₀²)` to the bulk propagator at
/// coincident points, `∫_0^{1/Λ₀²} (2πλ)^{-1/2} e^{-λκ²} dλ`.
pub fn bulk_uv_tail_coincident(p: f64, m: f64, lambda0: f64) -> f64 {
    let kappa = (p * p + m * m).sqrt();
    // ∫_0^T (2πλ)^{-1/2} e^{-λκ²} dλ = erf(κ√T)/(√2 κ)
    crate::special::erf(kappa / lambda0) / (std::f64::consts::SQRT_2 * kappa)
}

/// Result of [`covariance_bound_check`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub w_order: u32,
    pub poly_degree: u32,
    /// Coefficients of `P̃(x) = a₀ + a_D x^D`, `D = w_order + poly_degree`.
    pub coefficients: Vec<f64>,
    /// `sup |∂^w Ċ^Λ(p) (p/Λ)^d| (Λ+m)^{3+w}` over the grid.
    pub sup_scaled: f64,
    /// Largest ratio of the scaled derivative to `P̃`; at most 1 by construction.
    pub worst_ratio: f64,
    pub grid_points: usize,
}

fn hermite(n: u32, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `∂_p^w Ċ^Λ(p)` for the radial momentum.
pub fn cdot_p_derivative(w: u32, lambda: f64, p: f64, m: f64) -> f64 {
    let x = p / lambda;
    let sign = if w % 2 == 0 { 1.0 } else { -1.0 };
    cdot(lambda, p, m) * sign * hermite(w, x) / lambda.powi(w as i32)
}

/// Fits the envelope `P̃` of `|∂^w Ċ^Λ(p) (p/Λ)^d| (Λ+m)^{3+w}` on a
/// `(p, Λ)` grid with `m = 1`.
pub fn covariance_bound_check(w_order: u32, poly_degree: u32) -> Result<CovarianceReport> {
    if w_order > 3 {
        return Err(crate::error::Error::Unsupported(format!("momentum derivative order {w_order} > 3")));
    }
    let m = 1.0;
    let dd = (w_order + poly_degree).max(1) as i32;
    let mut pts = Vec::new();
    for i in 0..64 {
        let lam = 10f64.powf(-2.0 + 4.0 * i as f64 / 63.0);
        for j in 0..64 {
            let p = 10.0 * (lam + m) * j as f64 / 63.0;
            let g = cdot_p_derivative(w_order, lam, p, m).abs() * (p / lam).powi(poly_degree as i32) * (lam + m).powi(3 + w_order as i32);
            pts.push((p / (lam + m), g));
        }
    }
    let sup_scaled = pts.iter().map(|t| t.1).fold(0.0, f64::max);
    let a0 = pts.iter().filter(|t| t.0 <= 1.0).map(|t| t.1).fold(0.0, f64::max);
    let ad = pts.iter().filter(|t| t.0 > 1.0).map(|t| t.1 / t.0.powi(dd)).fold(0.0, f64::max);
    let worst_ratio = pts
        .iter()
        .map(|&(x, g)| {
            let den = a0 + ad * x.powi(dd);
            if den > 0.0 { g / den } else { 0.0 }
        })
        .fold(0.0, f64::max);
    let mut coefficients = vec![0.0; dd as usize + 1];
    coefficients[0] = a0;
    coefficients[dd as usize] += ad;
    Ok(CovarianceReport { w_order, poly_degree, coefficients, sup_scaled, worst_ratio, grid_points: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(bc: BoundaryKind, p: f64, z: f64, zp: f64, l: f64, l0: f64) -> PropagatorQuery {
        PropagatorQuery { p, z, zp, ctx: KernelContext::new(1.0, bc).unwrap(), cut: CutoffPair::new(l, l0).unwrap() }
    }

    #[test]
    fn empty_range_is_zero() {
        for part in [Part::Full, Part::Bulk, Part::Surface] {
            assert_eq!(flowing_propagator(q(BoundaryKind::Neumann, 1.0, 0.3, 0.4, 5.0, 5.0), part).unwrap(), 0.0);
        }
        assert!(CutoffPair::new(6.0, 5.0).is_err());
    }

    #[test]
    fn bulk_reference_value() {
        // 30-digit oracle for p=0, z=z'=1, Λ=0.01, Λ₀=100
        let v = flowing_propagator(q(BoundaryKind::Bulk, 0.0, 1.0, 1.0, 0.01, 100.0), Part::Bulk).unwrap();
        assert!((v - 0.699_128_201_532_060_5).abs() < 1e-10, "{v}");
    }

    #[test]
    fn dirichlet_closed_form_reference() {
        let v = closed_form_propagator(BoundaryKind::Dirichlet, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert!((v - 0.5 * (1.0 - (-2f64).exp())).abs() < 1e-15);
        assert_eq!(closed_form_propagator(BoundaryKind::Dirichlet, 0.3, 1.0, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn proper_time_closed_form_matches_integral() {
        for bc in [BoundaryKind::Bulk, BoundaryKind::Dirichlet, BoundaryKind::Neumann, BoundaryKind::Robin { c: 1.5 }] {
            let num = flowing_propagator(q(bc, 0.7, 0.4, 1.3, 0.0, 1e6), Part::Full).unwrap();
            let cf = closed_form_propagator_with(Convention::ProperTime, bc, 0.7, 0.4, 1.3, 1.0).unwrap();
            assert!((num - cf).abs() < 1e-8, "{bc:?}: {num} vs {cf}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-4;
        let base = |l: f64| flowing_propagator(q(BoundaryKind::Robin { c: 0.8 }, 0.5, 0.4, 0.9, l, 10.0), Part::Full).unwrap();
        let fd = (base(2.0 + h) - base(2.0 - h)) / (2.0 * h);
        let an = propagator_derivative(q(BoundaryKind::Robin { c: 0.8 }, 0.5, 0.4, 0.9, 2.0, 10.0), Part::Full).unwrap();
        assert!(((fd - an) / an).abs() < 1e-6, "{fd} vs {an}");
    }

    #[test]
    fn uv_tail_formula() {
        let t = bulk_uv_tail_coincident(0.0, 1.0, 1e3);
        assert!((t - (2.0 / std::f64::consts::PI).sqrt() / 1e3).abs() < 1e-9);
    }

    #[test]
    fn covariance_envelope() {
        for w in 0..=3 {
            let r = covariance_bound_check(w, 1).unwrap();
            assert!(r.sup_scaled.is_finite() && r.worst_ratio <= 1.0 + 1e-12);
        }
        assert!(covariance_bound_check(4, 0).is_err());
    }
}

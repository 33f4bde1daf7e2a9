//! Scaling fits, power counting, the Robin→Dirichlet limit and the amputation
//! comparison built on the one-loop flows.

use super::tadpole::{bulk_tadpole_rate, integrate_bulk_tadpole, surface_tadpole_rates, surface_two_point_folded};
use super::{integrate_surface_tadpole, linear_fit, FlowParams, LambdaSchedule, LinearFit, ScheduleSpec, TestFunctionSpec};
use crate::error::{domain, Result};
use crate::kernels::BoundaryKind;
use crate::propagators::closed_form_propagator;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Λ₀-dependence of the surface tadpole couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TadpoleScaling {
    pub bc: BoundaryKind,
    pub lambda0s: Vec<f64>,
    pub s: Vec<f64>,
    pub e: Vec<f64>,
    pub h: Vec<f64>,
    /// `log|s₁^{Λ₀}|` against `log Λ₀`.
    pub s_fit: LinearFit,
    /// `e₁^{Λ₀}` against `log Λ₀`.
    pub e_fit: LinearFit,
    pub max_e_minus_h: f64,
    /// Largest `|s₁^{0,Λ₀}|, |e₁^{0,Λ₀}|` over the runs.
    pub max_condition_residual: f64,
    /// Largest value at `Λ = 0` after flowing the data back down on a refined schedule.
    pub max_round_trip_residual: f64,
}

pub fn tadpole_scaling(coupling: f64, mass: f64, bc: BoundaryKind, lambda0s: &[f64], spec: ScheduleSpec) -> Result<TadpoleScaling> {
    let runs = lambda0s
        .par_iter()
        .map(|&l0| {
            let p = FlowParams::new(coupling, mass, l0)?;
            let sched = LambdaSchedule::complete(&p, spec)?;
            let t = integrate_surface_tadpole(p, bc, &sched)?;
            let back = t.reintegrate(&sched.refined(2))?;
            Ok((t.boundary(), t.at_zero(), back))
        })
        .collect::<Result<Vec<_>>>()?;
    let s: Vec<f64> = runs.iter().map(|r| r.0.s).collect();
    let e: Vec<f64> = runs.iter().map(|r| r.0.e).collect();
    let h: Vec<f64> = runs.iter().map(|r| r.0.h).collect();
    let logl: Vec<f64> = lambda0s.iter().map(|l| l.ln()).collect();
    let s_fit = linear_fit(&logl, &s.iter().map(|v| v.abs().ln()).collect::<Vec<_>>())?;
    let e_fit = linear_fit(&logl, &e)?;
    let max_e_minus_h = e.iter().zip(&h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let max_condition_residual = runs.iter().map(|r| r.1.s.abs().max(r.1.e.abs())).fold(0.0, f64::max);
    let max_round_trip_residual = runs.iter().map(|r| r.2.s.abs().max(r.2.e.abs())).fold(0.0, f64::max);
    Ok(TadpoleScaling {
        bc,
        lambda0s: lambda0s.to_vec(),
        s,
        e,
        h,
        s_fit,
        e_fit,
        max_e_minus_h,
        max_condition_residual,
        max_round_trip_residual,
    })
}

/// Fitted `(Λ+m)` exponents of bulk and surface two-point moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCountingReport {
    pub bc: BoundaryKind,
    pub lambda: Vec<f64>,
    /// `a₁^{Λ,Λ₀}`.
    pub bulk: Vec<f64>,
    /// `s₁^{Λ,Λ₀}` and `e₁^{Λ,Λ₀}`.
    pub surface: Vec<f64>,
    pub surface_first: Vec<f64>,
    pub bulk_exponent: f64,
    /// Exponents of the integrated surface moments with `r₁ + r₂ = 0, 1`.
    pub surface_exponents: [f64; 2],
    /// Bulk minus surface exponent of the integrated `r = 0` moments.
    pub gap: f64,
    /// Exponent of `∂_Λ a₁`.
    pub bulk_rate_exponent: f64,
    /// Exponents of `∂_Λ` of the surface moments with `r₁ + r₂ = 0, 1, 2`.
    pub surface_rate_exponents: [f64; 3],
    pub rate_gap: f64,
}

/// Fits `log|moment|` against `log(Λ+m)` for `Λ ∈ [lo·m, hi·m]` on `points`
/// checkpoints.
///
/// Bulk moments with `r₁ + r₂ > 0` vanish identically at one loop (the bulk
/// tadpole is a pure `δ(z₁ − z₂)` term) and are not fitted.
pub fn power_counting_probe(
    coupling: f64,
    mass: f64,
    bc: BoundaryKind,
    range: (f64, f64),
    points: usize,
    spec: ScheduleSpec,
) -> Result<PowerCountingReport> {
    if points < 3 {
        return domain(format!("power counting needs at least three checkpoints, got {points}"));
    }
    let (lo, hi) = (range.0 * mass, range.1 * mass);
    if !(lo > 0.0 && hi > lo) {
        return domain(format!("invalid fit range [{lo}, {hi}]"));
    }
    let lambda: Vec<f64> = (0..points).map(|k| hi * (lo / hi).powf(k as f64 / (points - 1) as f64)).collect();
    // one flow from Λ = hi to 0 whose checkpoints contain the fit points
    let p = FlowParams::new(coupling, mass, hi)?;
    let dense = LambdaSchedule::complete(&p, spec)?;
    let mut pts: Vec<f64> = dense.points().iter().copied().filter(|l| *l < lo || *l > hi).collect();
    let per = ((spec.steps_per_decade as f64 * (hi / lo).log10()) / (points - 1) as f64).ceil().max(1.0) as usize;
    let fine = LambdaSchedule::from_points(lambda.clone())?.refined(per);
    pts.extend(fine.points());
    pts.sort_by(|a, b| b.total_cmp(a));
    pts.dedup();
    let sched = LambdaSchedule::from_points(pts)?;
    let index: Vec<usize> = lambda
        .iter()
        .map(|l| sched.points().iter().position(|x| x == l).expect("fit checkpoint in schedule"))
        .collect();

    let b = integrate_bulk_tadpole(p, &sched)?;
    let s = integrate_surface_tadpole(p, bc, &sched)?;
    let bulk: Vec<f64> = index.iter().map(|&i| b.a[i]).collect();
    let surface: Vec<f64> = index.iter().map(|&i| s.s[i]).collect();
    let surface_first: Vec<f64> = index.iter().map(|&i| s.e[i]).collect();

    let x: Vec<f64> = lambda.iter().map(|l| (l + mass).ln()).collect();
    let expo = |v: &[f64]| -> Result<f64> { Ok(linear_fit(&x, &v.iter().map(|a| a.abs().ln()).collect::<Vec<_>>())?.slope) };
    let bulk_exponent = expo(&bulk)?;
    let surface_exponents = [expo(&surface)?, expo(&surface_first)?];

    let rates: Vec<[f64; 4]> = lambda.iter().map(|&l| surface_tadpole_rates(bc, coupling, mass, l)).collect::<Result<_>>()?;
    let bulk_rates: Vec<f64> = lambda.iter().map(|&l| bulk_tadpole_rate(coupling, mass, l)).collect();
    let col = |k: usize| -> Vec<f64> { rates.iter().map(|r| r[k]).collect() };
    let bulk_rate_exponent = expo(&bulk_rates)?;
    let surface_rate_exponents = [expo(&col(0))?, expo(&col(1))?, expo(&col(3))?];
    Ok(PowerCountingReport {
        bc,
        lambda,
        bulk,
        surface,
        surface_first,
        bulk_exponent,
        surface_exponents,
        gap: bulk_exponent - surface_exponents[0],
        bulk_rate_exponent,
        surface_rate_exponents,
        rate_gap: bulk_rate_exponent - surface_rate_exponents[0],
    })
}

/// Robin surface two-point folds approaching the Dirichlet value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobinLimitReport {
    pub lambda: f64,
    pub lambda0: f64,
    pub c: Vec<f64>,
    pub robin: Vec<f64>,
    pub gaps: Vec<f64>,
    pub dirichlet: f64,
    pub neumann: f64,
    pub neumann_gap: f64,
    /// Polynomial extrapolation of the Robin values to `1/c = 0`.
    pub extrapolated: f64,
    pub extrapolation_relative_error: f64,
    pub gaps_decreasing: bool,
}

/// Neville extrapolation of `(x_i, v_i)` to `x = 0`.
fn extrapolate_to_zero(x: &[f64], v: &[f64]) -> f64 {
    let mut p = v.to_vec();
    let n = x.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (x[i + k] * p[i] - x[i] * p[i + 1]) / (x[i + k] - x[i]);
        }
    }
    p[0]
}

/// Folds `S₁,₂;R` with Robin kernels for every `c` in `c_list` and compares
/// with `S₁,₂;D` folded with Dirichlet kernels.
pub fn robin_dirichlet_limit(
    params: FlowParams,
    lambda: f64,
    c_list: &[f64],
    kernels: [(f64, f64); 2],
    spec: ScheduleSpec,
) -> Result<RobinLimitReport> {
    params.validate()?;
    if c_list.len() < 2 || c_list.windows(2).any(|w| w[1] <= w[0]) || c_list[0] <= 0.0 {
        return domain("c_list must hold at least two increasing positive values");
    }
    let sched = LambdaSchedule::complete(&params, spec)?;
    let fold_for = |bc: BoundaryKind| -> Result<f64> {
        let tests = kernels.map(|(tau, y)| TestFunctionSpec::StarKernel { tau, y, bc });
        let data = match bc {
            BoundaryKind::Dirichlet => None,
            _ => Some(integrate_surface_tadpole(params, bc, &sched)?.boundary()),
        };
        surface_two_point_folded(params, bc, lambda, &tests, data, spec)
    };
    let robin = c_list.par_iter().map(|&c| fold_for(BoundaryKind::robin(c)?)).collect::<Result<Vec<f64>>>()?;
    let dirichlet = fold_for(BoundaryKind::Dirichlet)?;
    let neumann = fold_for(BoundaryKind::Neumann)?;
    let gaps: Vec<f64> = robin.iter().map(|v| (v - dirichlet).abs()).collect();
    let tail = c_list.len().min(3);
    let xs: Vec<f64> = c_list[c_list.len() - tail..].iter().map(|c| 1.0 / c).collect();
    let extrapolated = extrapolate_to_zero(&xs, &robin[robin.len() - tail..]);
    Ok(RobinLimitReport {
        lambda,
        lambda0: params.lambda0,
        c: c_list.to_vec(),
        gaps_decreasing: gaps.windows(2).all(|w| w[1] < w[0]),
        robin,
        gaps,
        dirichlet,
        neumann,
        neumann_gap: (neumann - dirichlet).abs(),
        extrapolated,
        extrapolation_relative_error: ((extrapolated - dirichlet) / dirichlet).abs(),
    })
}

/// Both sides of the amputation inequalities for a two-point boundary term
/// `(s + e(∂_{z₁} + ∂_{z₂})) δ_{z₁} δ_{z₂}` folded with Robin propagators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmputationReport {
    pub s: f64,
    pub e: f64,
    pub c: f64,
    pub kappa: f64,
    /// `g = s + 2c·e`.
    pub g: f64,
    /// One external point sent to the surface after folding, and folded at the surface.
    pub one_point_limit: f64,
    pub one_point_surface: f64,
    pub one_point_difference: f64,
    /// `e (κ + c) C(0,0) C(0,y₂)`.
    pub one_point_predicted: f64,
    /// Both external points.
    pub two_point_limit: f64,
    pub two_point_surface: f64,
    pub two_point_difference: f64,
    /// `2 e (κ + c) C(0,0)²`.
    pub two_point_predicted: f64,
    pub strict: bool,
    pub degenerate: bool,
    /// Fold with both points at `(y₁, y₂)` and its value `g C(0,y₁) C(0,y₂)`.
    pub interior: f64,
    pub interior_g_form: f64,
    /// Finite-difference values of `lim_z lim_y ∂_z C / C(0,0)` and `lim_y lim_z ∂_z C / C(0,0)`.
    pub derivative_orderings: [f64; 2],
}

/// `lim_{z→0⁺} ∂_z C_R(p; z, y)`; for `y = 0` the limit of the derivative of `C_R(p; z, 0)`.
fn boundary_derivative(kappa: f64, c: f64, y: f64) -> f64 {
    let r = (kappa - c) / (kappa + c);
    if y > 0.0 {
        0.5 * (1.0 - r) * (-kappa * y).exp()
    } else {
        -0.5 * (1.0 + r)
    }
}

pub fn amputation_comparison(s: f64, e: f64, c: f64, m: f64, p: f64, y1: f64, y2: f64) -> Result<AmputationReport> {
    if !(y2 > 0.0) {
        return domain(format!("the inequalities are stated for y₂ > 0, got {y2}"));
    }
    if !(y1 >= 0.0) {
        return domain(format!("y₁ must be nonnegative, got {y1}"));
    }
    let bc = BoundaryKind::robin(c)?;
    let kappa = (p * p + m * m).sqrt();
    let cp = |z: f64, y: f64| closed_form_propagator(bc, p, z, y, m);
    let c00 = cp(0.0, 0.0)?;
    // fold of the boundary term with C(·, y₁) C(·, y₂)
    let fold = |ya: f64, yb: f64| -> Result<f64> {
        let (ca, cb) = (cp(0.0, ya)?, cp(0.0, yb)?);
        Ok(s * ca * cb + e * (ca * boundary_derivative(kappa, c, yb) + cb * boundary_derivative(kappa, c, ya)))
    };
    // limits y → 0⁺ taken along a geometric sequence, extrapolated linearly
    let limit = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let (h1, h2) = (1e-6, 5e-7);
        let (f1, f2) = (f(h1)?, f(h2)?);
        Ok(f2 + (f2 - f1) * h2 / (h1 - h2))
    };
    let one_point_limit = limit(&|ya| fold(ya, y2))?;
    let one_point_surface = fold(0.0, y2)?;
    let two_point_limit = limit(&|ya| limit(&|yb| fold(ya, yb)))?;
    let two_point_surface = fold(0.0, 0.0)?;
    let one_point_difference = one_point_limit - one_point_surface;
    let two_point_difference = two_point_limit - two_point_surface;
    let scale = one_point_limit.abs().max(two_point_limit.abs()).max(f64::MIN_POSITIVE);
    let degenerate = e == 0.0;
    let strict = one_point_difference.abs() > 1e-9 * scale && two_point_difference.abs() > 1e-9 * scale;

    // derivative orderings by finite differences on the closed form
    let hz = 1e-6;
    let inner_y0 = (-3.0 * cp(0.0, 0.0)? + 4.0 * cp(hz, 0.0)? - cp(2.0 * hz, 0.0)?) / (2.0 * hz);
    let y = 1e-3;
    let hz2 = 1e-7;
    let inner_z0 = (-3.0 * cp(0.0, y)? + 4.0 * cp(hz2, y)? - cp(2.0 * hz2, y)?) / (2.0 * hz2);
    let interior = if y1 > 0.0 { fold(y1, y2)? } else { one_point_limit };
    let interior_g_form = (s + 2.0 * c * e) * cp(0.0, y1)? * cp(0.0, y2)?;
    Ok(AmputationReport {
        s,
        e,
        c,
        kappa,
        g: s + 2.0 * c * e,
        one_point_limit,
        one_point_surface,
        one_point_difference,
        one_point_predicted: e * (kappa + c) * c00 * cp(0.0, y2)?,
        two_point_limit,
        two_point_surface,
        two_point_difference,
        two_point_predicted: 2.0 * e * (kappa + c) * c00 * c00,
        strict: strict && !degenerate,
        degenerate,
        derivative_orderings: [inner_y0 / c00, inner_z0 / c00],
        interior,
        interior_g_form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neville_extrapolates_polynomials_exactly() {
        let x = [0.5, 0.25, 0.125];
        let v: Vec<f64> = x.iter().map(|t| 3.0 - 2.0 * t + 0.5 * t * t).collect();
        assert!((extrapolate_to_zero(&x, &v) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn amputation_differences_follow_closed_form() {
        let r = amputation_comparison(-0.3, -0.02, 1.0, 1.0, 0.5, 0.4, 0.7).unwrap();
        assert!((r.one_point_difference / r.one_point_predicted - 1.0).abs() < 1e-6);
        assert!((r.two_point_difference / r.two_point_predicted - 1.0).abs() < 1e-6);
        assert!(r.strict && !r.degenerate);
        // the interior fold only sees g = s + 2ce
        let bc = BoundaryKind::robin(1.0).unwrap();
        let c0 = |y: f64| closed_form_propagator(bc, 0.5, 0.0, y, 1.0).unwrap();
        assert!((r.one_point_limit - r.g * c0(0.0) * c0(0.7)).abs() < 1e-8);
        assert!((r.interior - r.interior_g_form).abs() < 1e-14);
        let z = amputation_comparison(-0.3, 0.0, 1.0, 1.0, 0.5, 0.4, 0.7).unwrap();
        assert!(z.degenerate && !z.strict);
        assert!(z.one_point_difference.abs() < 1e-9 && z.two_point_difference.abs() < 1e-9);
    }

    #[test]
    fn derivative_orderings() {
        let r = amputation_comparison(1.0, 1.0, 2.0, 1.0, 0.0, 0.1, 0.5).unwrap();
        assert!((r.derivative_orderings[0] + r.kappa).abs() < 1e-6);
        assert!((r.derivative_orderings[1] - 2.0).abs() < 5e-3);
    }
}

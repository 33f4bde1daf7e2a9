//! Perturbative integration of the bulk and surface flow equations at one loop.
//!
//! Contact terms are kept symbolically: a correlation object carries the
//! coefficients of its `δ` and `δ'` structures, and only smooth coefficient
//! profiles are sampled on the transverse grid. All Λ-integrations run a
//! classical RK4 scheme on a log-spaced schedule.

pub mod experiments;
pub mod fourpoint;
pub mod tadpole;

use crate::error::{domain, Error, Result};
use crate::kernels::{kernel_value, p_bulk, BoundaryKind};
use crate::propagators::CutoffPair;
use crate::quad::{integrate_to_inf, QuadOptions};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub use experiments::{
    amputation_comparison, power_counting_probe, robin_dirichlet_limit, tadpole_scaling, AmputationReport,
    PowerCountingReport, RobinLimitReport, TadpoleScaling,
};
pub use fourpoint::{one_loop_four_point, FourPointKinematics, FourPointReport};
pub use tadpole::{
    dirichlet_surface_check, integrate_bulk_tadpole, integrate_surface_tadpole, surface_two_point_folded, BulkTadpole,
    DirichletReport, SurfaceTadpole,
};

/// `∫ d³k/(2π)³ Ċ^Λ(k)` at vanishing external momentum, `−e^{−m²/Λ²}/(4π^{3/2})`.
pub fn loop_integral(lambda: f64, m: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    -(-(m * m) / (lambda * lambda)).exp() / (4.0 * PI.powf(1.5))
}

/// `∫ d³k/(2π)³ e^{-u(k²+m²)} = e^{-um²}/(8π^{3/2}u^{3/2})`.
pub fn heat_trace(u: f64, m: f64) -> f64 {
    (-u * m * m).exp() / (8.0 * PI.powf(1.5) * u.powf(1.5))
}

/// Coupling, mass and ultraviolet cutoff of a flow run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Bare four-point coupling λ.
    pub coupling: f64,
    pub mass: f64,
    /// Ultraviolet cutoff Λ₀.
    pub lambda0: f64,
}

impl FlowParams {
    pub fn new(coupling: f64, mass: f64, lambda0: f64) -> Result<Self> {
        let p = Self { coupling, mass, lambda0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.coupling.is_finite() {
            return domain(format!("coupling must be finite, got {}", self.coupling));
        }
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return domain(format!("mass must be positive, got {}", self.mass));
        }
        if !(self.lambda0 > 0.0) || !self.lambda0.is_finite() {
            return domain(format!("Λ₀ must be positive and finite, got {}", self.lambda0));
        }
        Ok(())
    }
}

/// Resolution of the log-spaced Λ schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub steps_per_decade: usize,
    /// Smallest positive checkpoint in units of the mass; the schedule then
    /// closes with a single step to `Λ = 0`.
    pub floor_ratio: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self { steps_per_decade: 400, floor_ratio: 1e-2 }
    }
}

/// Strictly decreasing Λ checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    points: Vec<f64>,
}

impl LambdaSchedule {
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return domain("a schedule needs at least two checkpoints");
        }
        if points.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return domain("schedule checkpoints must be finite and nonnegative");
        }
        if points.windows(2).any(|w| w[1] >= w[0]) {
            return domain("schedule checkpoints must be strictly decreasing");
        }
        Ok(Self { points })
    }

    /// Geometric checkpoints from `top` down to `floor`, followed by `bottom`
    /// when `bottom < floor` (use `bottom = 0` for a complete flow).
    pub fn log_spaced(top: f64, floor: f64, bottom: f64, steps_per_decade: usize) -> Result<Self> {
        if !(top > 0.0 && floor > 0.0) || steps_per_decade == 0 {
            return domain(format!("invalid schedule request top={top} floor={floor}"));
        }
        let mut points = vec![top];
        if floor < top {
            let decades = (top / floor).log10();
            let n = ((decades * steps_per_decade as f64).ceil() as usize).max(1);
            for k in 1..=n {
                points.push(top * (floor / top).powf(k as f64 / n as f64));
            }
        }
        if bottom < *points.last().unwrap() {
            points.push(bottom);
        }
        Self::from_points(points)
    }

    /// Complete schedule from `Λ₀` to `0`.
    pub fn complete(params: &FlowParams, spec: ScheduleSpec) -> Result<Self> {
        let floor = (spec.floor_ratio * params.mass).min(0.5 * params.lambda0);
        Self::log_spaced(params.lambda0, floor, 0.0, spec.steps_per_decade)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn top(&self) -> f64 {
        self.points[0]
    }

    pub fn bottom(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn reaches_zero(&self) -> bool {
        self.bottom() == 0.0
    }

    /// Splits every positive interval into `factor` geometric pieces.
    pub fn refined(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        let mut points = vec![self.points[0]];
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            for k in 1..factor {
                let t = k as f64 / factor as f64;
                points.push(if b > 0.0 { a * (b / a).powf(t) } else { a * (1.0 - t) });
            }
            points.push(b);
        }
        Self { points }
    }
}

/// One classical RK4 step of `dx/dΛ = f(Λ, x)` from `a` to `b`, carried out in
/// `ln Λ` when both ends are positive.
pub fn rk4_step<const K: usize>(
    a: f64,
    b: f64,
    x: [f64; K],
    f: &mut impl FnMut(f64, &[f64; K]) -> Result<[f64; K]>,
) -> Result<[f64; K]> {
    let log = a > 0.0 && b > 0.0;
    let (u0, h) = if log { (a.ln(), b.ln() - a.ln()) } else { (a, b - a) };
    let mut g = |u: f64, x: &[f64; K]| -> Result<[f64; K]> {
        let lam = if log { u.exp() } else { u };
        let mut r = f(lam, x)?;
        if log {
            r.iter_mut().for_each(|v| *v *= lam);
        }
        Ok(r)
    };
    let add = |x: &[f64; K], k: &[f64; K], s: f64| -> [f64; K] { std::array::from_fn(|i| x[i] + s * k[i]) };
    let k1 = g(u0, &x)?;
    let k2 = g(u0 + 0.5 * h, &add(&x, &k1, 0.5 * h))?;
    let k3 = g(u0 + 0.5 * h, &add(&x, &k2, 0.5 * h))?;
    let k4 = g(u0 + h, &add(&x, &k3, h))?;
    Ok(std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

/// States along `path` (in the given order) starting from `x0`.
pub fn rk4_path<const K: usize>(
    path: &[f64],
    x0: [f64; K],
    mut f: impl FnMut(f64, &[f64; K]) -> Result<[f64; K]>,
) -> Result<Vec<[f64; K]>> {
    let mut out = Vec::with_capacity(path.len());
    out.push(x0);
    let mut x = x0;
    for w in path.windows(2) {
        x = rk4_step(w[0], w[1], x, &mut f)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("flow state became non-finite at Λ = {}", w[1])));
        }
        out.push(x);
    }
    Ok(out)
}

/// Transverse grid and momentum magnitudes on which profiles are reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub z_nodes: Vec<f64>,
    pub p_values: Vec<f64>,
}

impl GridSpec {
    /// `n` equally spaced nodes on `[0, 10/m]` and zero momentum.
    pub fn uniform(mass: f64, n: usize) -> Result<Self> {
        if !(mass > 0.0) || n < 2 {
            return domain("grid needs a positive mass and at least two nodes");
        }
        let zmax = 10.0 / mass;
        let z_nodes = (0..n).map(|i| zmax * i as f64 / (n - 1) as f64).collect();
        Ok(Self { z_nodes, p_values: vec![0.0] })
    }

    pub fn validate(&self) -> Result<()> {
        if self.z_nodes.first() != Some(&0.0) {
            return domain("the z grid must start at 0");
        }
        if self.z_nodes.windows(2).any(|w| w[1] <= w[0]) {
            return domain("the z grid must be strictly increasing");
        }
        if self.p_values.iter().any(|p| !(*p >= 0.0)) {
            return domain("momentum magnitudes must be nonnegative");
        }
        Ok(())
    }
}

/// Test functions against which correlation objects are folded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunctionSpec {
    /// `p_B(τ; z, y)`.
    BulkKernel { tau: f64, y: f64 },
    /// `p_★(τ; z, y)` for a boundary condition `★`.
    StarKernel { tau: f64, y: f64, bc: BoundaryKind },
    /// Characteristic function of the half-line.
    CharHalfline,
    /// `φ(z) = z`, with `φ(0) = 0` and `∂_n φ(0) = 1`.
    BoundaryDerivativeProbe,
}

impl TestFunctionSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TestFunctionSpec::BulkKernel { tau, .. } | TestFunctionSpec::StarKernel { tau, .. }
                if !(tau > 0.0 && tau.is_finite()) =>
            {
                domain(format!("test-function heat time must be positive, got {tau}"))
            }
            TestFunctionSpec::StarKernel { y, bc, .. } => {
                bc.validate()?;
                if bc == BoundaryKind::Bulk {
                    return domain("star kernel needs a boundary condition");
                }
                if y < 0.0 {
                    return domain(format!("star kernel source must lie in the half-space, got y = {y}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        match *self {
            TestFunctionSpec::BulkKernel { tau, y } => p_bulk(tau, z, y),
            TestFunctionSpec::StarKernel { tau, y, bc } => kernel_value(bc, tau, z, y),
            TestFunctionSpec::CharHalfline => 1.0,
            TestFunctionSpec::BoundaryDerivativeProbe => z,
        }
    }

    /// `(∂_n φ)(0) = lim_{z→0⁺} ∂_z φ(z)`.
    pub fn boundary_derivative(&self) -> f64 {
        match *self {
            TestFunctionSpec::BulkKernel { tau, y } => y / tau * p_bulk(tau, 0.0, y),
            TestFunctionSpec::StarKernel { tau, y, bc } => match bc {
                BoundaryKind::Bulk => y / tau * p_bulk(tau, 0.0, y),
                BoundaryKind::Dirichlet => 2.0 * y / tau * p_bulk(tau, 0.0, y),
                BoundaryKind::Neumann => 0.0,
                // the kernel obeys the Robin condition for every τ > 0
                BoundaryKind::Robin { c } => c * kernel_value(bc, tau, 0.0, y),
            },
            TestFunctionSpec::CharHalfline => 0.0,
            TestFunctionSpec::BoundaryDerivativeProbe => 1.0,
        }
    }

    /// Length scale over which the function varies, used to map quadratures.
    pub fn scale(&self) -> f64 {
        match *self {
            TestFunctionSpec::BulkKernel { tau, y } | TestFunctionSpec::StarKernel { tau, y, .. } => {
                tau.sqrt() + y.abs()
            }
            _ => 1.0,
        }
    }
}

/// Folds `∫_0^∞ dz φ₁(z) φ₂(z) w(z)` where `w` decays on the length `width`.
pub fn fold_diagonal(
    tests: &[TestFunctionSpec; 2],
    width: f64,
    w: impl Fn(f64) -> f64,
    opts: QuadOptions,
) -> Result<f64> {
    let scale = width.min(tests[0].scale()).min(tests[1].scale()).max(1e-300);
    Ok(integrate_to_inf(|z| tests[0].value(z) * tests[1].value(z) * w(z), 0.0, scale, opts)?.value)
}

/// Bulk or surface part of a correlation distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectFamily {
    Bulk,
    Surface,
}

/// Coefficients of the contact structures of an object.
///
/// `contact` multiplies `∏_i δ(z₁ − z_i)`; `surface` multiplies `δ₀(z₁)δ₀(z₂)`
/// and `surface_derivative = [h, e]` multiplies `δ'₀(z₁)δ₀(z₂)` and
/// `δ₀(z₁)δ'₀(z₂)`, normalized so that folding with `φ₁φ₂` gives
/// `h (∂_nφ₁)(0)φ₂(0) + e φ₁(0)(∂_nφ₂)(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalPart {
    pub contact: f64,
    pub surface: f64,
    pub surface_derivative: [f64; 2],
}

/// Moments `∫ z^r σ(z) dz` of the coefficient `σ` of `δ(z₁ − z₂)`.
///
/// `first_z1` and `first_z2` are the `z₁`- and `z₂`-weighted first moments,
/// computed by separate quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagonalMoments {
    pub zeroth: f64,
    pub first_z1: f64,
    pub first_z2: f64,
    pub second: f64,
}

/// Immutable snapshot of a correlation distribution at a scale `Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationObject {
    pub l: u32,
    pub n: u32,
    pub family: ObjectFamily,
    pub bc: BoundaryKind,
    pub cut: CutoffPair,
    pub local: LocalPart,
    /// Smooth coefficient sampled on `z_nodes`: for `n = 2` the coefficient of
    /// `δ(z₁ − z₂)`, for `n = 4` the relevant moment `c(z₁)`.
    pub profile: Vec<f64>,
    pub z_nodes: Vec<f64>,
    pub moments: DiagonalMoments,
    /// Momentum at which the object was evaluated.
    pub momentum: f64,
}

impl CorrelationObject {
    fn zero(l: u32, n: u32, family: ObjectFamily, bc: BoundaryKind, cut: CutoffPair) -> Self {
        Self {
            l,
            n,
            family,
            bc,
            cut,
            local: LocalPart::default(),
            profile: Vec::new(),
            z_nodes: Vec::new(),
            moments: DiagonalMoments::default(),
            momentum: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.local == LocalPart::default()
            && self.profile.iter().all(|v| *v == 0.0)
            && self.moments == DiagonalMoments::default()
    }

    /// Contact coefficient `a(z)` (n = 2) or `c(z)` (n = 4) at grid node `i`.
    fn coefficient_at(&self, i: usize) -> f64 {
        self.local.contact + self.profile.get(i).copied().unwrap_or(0.0)
    }
}

/// Tree-level objects keyed by `(family, n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeLevel {
    pub coupling: f64,
    pub bulk_two: CorrelationObject,
    pub bulk_four: CorrelationObject,
    pub surface_two: CorrelationObject,
    pub surface_four: CorrelationObject,
}

impl TreeLevel {
    /// Tree-level object for `n` points; zero for every `n ∉ {2, 4}`.
    pub fn object(&self, family: ObjectFamily, n: u32) -> CorrelationObject {
        match (family, n) {
            (ObjectFamily::Bulk, 2) => self.bulk_two.clone(),
            (ObjectFamily::Bulk, 4) => self.bulk_four.clone(),
            (ObjectFamily::Surface, 2) => self.surface_two.clone(),
            (ObjectFamily::Surface, 4) => self.surface_four.clone(),
            _ => {
                let mut o = self.bulk_two.clone();
                o.family = family;
                o.n = n;
                o.local = LocalPart::default();
                o
            }
        }
    }

    /// `D₀,₄` folded with four functions, `λ ∫_0^∞ dz ∏ φ_i(z)`.
    pub fn fold_bulk_four(&self, tests: &[TestFunctionSpec; 4]) -> Result<f64> {
        for t in tests {
            t.validate()?;
        }
        if self.coupling == 0.0 {
            return Ok(0.0);
        }
        let scale = tests.iter().map(|t| t.scale()).fold(f64::INFINITY, f64::min);
        let r = integrate_to_inf(|z| tests.iter().map(|t| t.value(z)).product::<f64>(), 0.0, scale, QuadOptions::tol(1e-300, 1e-12))?;
        Ok(self.coupling * r.value)
    }
}

/// Boundary data of the tree order: `D₀,₄ = λ ∏δ(z₁ − z_i)`, all other objects zero.
pub fn tree_level_init(coupling: f64, bc: BoundaryKind, cut: CutoffPair) -> Result<TreeLevel> {
    if !coupling.is_finite() {
        return domain("coupling must be finite");
    }
    bc.validate()?;
    cut.validate()?;
    let mut bulk_four = CorrelationObject::zero(0, 4, ObjectFamily::Bulk, BoundaryKind::Bulk, cut);
    bulk_four.local.contact = coupling;
    Ok(TreeLevel {
        coupling,
        bulk_two: CorrelationObject::zero(0, 2, ObjectFamily::Bulk, BoundaryKind::Bulk, cut),
        bulk_four,
        surface_two: CorrelationObject::zero(0, 2, ObjectFamily::Surface, bc, cut),
        surface_four: CorrelationObject::zero(0, 4, ObjectFamily::Surface, bc, cut),
    })
}

/// Bulk relevant profiles on the z grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BulkCounterterms {
    pub z: Vec<f64>,
    pub a: Vec<f64>,
    pub s: Vec<f64>,
    pub d: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// Surface relevant couplings.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SurfaceCounterterms {
    pub s: f64,
    pub e: f64,
    pub h: f64,
}

/// Relevant terms at a given loop order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CountertermSet {
    pub l: u32,
    pub bulk: Option<BulkCounterterms>,
    pub surface: Option<SurfaceCounterterms>,
}

/// Second derivative in `p` at `p = 0` of an even function by a five-point
/// stencil with one Richardson step.
pub fn p2_derivative(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let stencil = |h: f64| (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h);
    let (d1, d2) = (stencil(h), stencil(0.5 * h));
    // the five-point error is O(h⁴)
    (16.0 * d2 - d1) / 15.0
}

/// Relevant terms of `obj`.
///
/// Bulk objects yield `{a, s, d, b}` for `n = 2` and `c` for `n = 4`; surface
/// objects yield `{s, e, h}`. The objects of this crate carry no momentum
/// dependence beyond their contact coefficients, so `b` is obtained from the
/// `p²` stencil of a constant.
pub fn extract_relevant_terms(obj: &CorrelationObject, kind: ObjectFamily) -> Result<CountertermSet> {
    if obj.momentum != 0.0 {
        return Err(Error::Precondition(format!(
            "relevant terms are extracted at zero external momentum, got {}",
            obj.momentum
        )));
    }
    if kind != obj.family {
        return domain(format!("object is {:?}, asked for {:?} terms", obj.family, kind));
    }
    match kind {
        ObjectFamily::Bulk => {
            let z = if obj.z_nodes.is_empty() { vec![0.0] } else { obj.z_nodes.clone() };
            let coef: Vec<f64> = (0..z.len()).map(|i| obj.coefficient_at(i)).collect();
            let zeros = vec![0.0; z.len()];
            let mut out = BulkCounterterms { z, s: zeros.clone(), d: zeros.clone(), ..Default::default() };
            match obj.n {
                2 => {
                    // moments of δ(z₁ − z₂): only the zeroth survives
                    out.b = coef.iter().map(|&a| p2_derivative(|_| a, 1e-2) * 0.5).collect();
                    out.a = coef;
                    out.c = zeros;
                }
                4 => {
                    out.a = zeros.clone();
                    out.b = zeros;
                    out.c = coef;
                }
                n => return Err(Error::Unsupported(format!("bulk relevant terms exist for n ∈ {{2, 4}}, got {n}"))),
            }
            Ok(CountertermSet { l: obj.l, bulk: Some(out), surface: None })
        }
        ObjectFamily::Surface => {
            if obj.n != 2 {
                return Err(Error::Unsupported(format!("surface relevant terms exist for n = 2, got {}", obj.n)));
            }
            let s = obj.local.surface + obj.moments.zeroth;
            let e = obj.local.surface_derivative[1] + obj.moments.first_z2;
            let h = obj.local.surface_derivative[0] + obj.moments.first_z1;
            Ok(CountertermSet { l: obj.l, bulk: None, surface: Some(SurfaceCounterterms { s, e, h }) })
        }
    }
}

/// Remainder of the Taylor expansion of a surface two-point fold,
/// `fold − [s φ₁φ₂ + e φ₁∂_nφ₂ + h ∂_nφ₁φ₂](0)`.
pub fn surface_remainder(fold: f64, terms: &SurfaceCounterterms, tests: &[TestFunctionSpec; 2]) -> f64 {
    let (v1, v2) = (tests[0].value(0.0), tests[1].value(0.0));
    let (d1, d2) = (tests[0].boundary_derivative(), tests[1].boundary_derivative());
    fold - (terms.s * v1 * v2 + terms.e * v1 * d2 + terms.h * d1 * v2)
}

/// Ordinary least squares `y = slope·x + intercept` with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Numerical(format!("a fit needs at least three points, got {}", x.len().min(y.len()))));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("degenerate abscissae in fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LinearFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loop_integral_matches_momentum_quadrature() {
        let (lam, m) = (1.7, 0.8);
        let k = integrate_to_inf(
            |k| 4.0 * PI * k * k / (2.0 * PI).powi(3) * crate::propagators::cdot(lam, k, m),
            0.0,
            lam,
            QuadOptions::tol(1e-15, 1e-12),
        )
        .unwrap()
        .value;
        assert!((k / loop_integral(lam, m) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rk4_integrates_power_law() {
        // d/dΛ x = 3Λ² has x(Λ) = Λ³; in ln Λ the integrand is 3e^{3u}
        let sched = LambdaSchedule::log_spaced(10.0, 1.0, 1.0, 400).unwrap();
        let path: Vec<f64> = sched.points().iter().rev().copied().collect();
        let xs = rk4_path(&path, [1.0], |l, _| Ok([3.0 * l * l])).unwrap();
        let v = xs.last().unwrap()[0];
        assert!((v / 1000.0 - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn schedules_validate_and_refine() {
        assert!(LambdaSchedule::from_points(vec![1.0, 1.0]).is_err());
        let s = LambdaSchedule::log_spaced(10.0, 0.1, 0.0, 10).unwrap();
        assert!(s.reaches_zero());
        assert_eq!(s.points().len(), 22);
        let r = s.refined(3);
        assert_eq!(r.points().len(), 3 * 21 + 1);
        assert!(r.points().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn tree_level_objects() {
        let cut = CutoffPair::new(1.0, 10.0).unwrap();
        let t = tree_level_init(0.7, BoundaryKind::Neumann, cut).unwrap();
        assert!(t.surface_four.is_zero());
        assert!(t.surface_two.is_zero());
        assert!(t.bulk_two.is_zero());
        assert!(t.object(ObjectFamily::Bulk, 6).is_zero());
        let tests = [
            TestFunctionSpec::BulkKernel { tau: 0.5, y: 0.3 },
            TestFunctionSpec::BulkKernel { tau: 1.0, y: 0.8 },
            TestFunctionSpec::BulkKernel { tau: 2.0, y: 0.1 },
            TestFunctionSpec::BulkKernel { tau: 0.7, y: 1.2 },
        ];
        // product of four Gaussians: precision-weighted mean and variance
        let prec: f64 = [0.5f64, 1.0, 2.0, 0.7].iter().map(|t| 1.0 / t).sum();
        let mean = (0.3 / 0.5 + 0.8 / 1.0 + 0.1 / 2.0 + 1.2 / 0.7) / prec;
        let expo: f64 = [(0.5, 0.3), (1.0, 0.8), (2.0, 0.1), (0.7, 1.2)].iter().map(|(t, y): &(f64, f64)| y * y / t).sum::<f64>()
            - mean * mean * prec;
        let norm: f64 = [0.5f64, 1.0, 2.0, 0.7].iter().map(|t| (2.0 * PI * t).sqrt()).product();
        let closed = 0.7 * (-0.5 * expo).exp() / norm * (2.0 * PI / prec).sqrt() * crate::special::norm_cdf(mean * prec.sqrt());
        assert!((t.fold_bulk_four(&tests).unwrap() - closed).abs() < 1e-12);
        let free = tree_level_init(0.0, BoundaryKind::Neumann, cut).unwrap();
        assert_eq!(free.fold_bulk_four(&tests).unwrap(), 0.0);
        assert!(free.bulk_four.is_zero());
    }

    #[test]
    fn contact_extraction() {
        let cut = CutoffPair::new(1.0, 10.0).unwrap();
        let mut o = CorrelationObject::zero(1, 2, ObjectFamily::Bulk, BoundaryKind::Bulk, cut);
        o.local.contact = 0.37;
        o.z_nodes = vec![0.0, 0.5, 1.0];
        let ct = extract_relevant_terms(&o, ObjectFamily::Bulk).unwrap().bulk.unwrap();
        assert!(ct.a.iter().all(|a| *a == 0.37));
        assert!(ct.s.iter().chain(&ct.d).all(|v| *v == 0.0));
        assert!(ct.b.iter().all(|v| v.abs() < 1e-9));

        let mut s = CorrelationObject::zero(1, 2, ObjectFamily::Surface, BoundaryKind::Neumann, cut);
        s.local = LocalPart { contact: 0.0, surface: 1.25, surface_derivative: [-0.4, -0.4] };
        let st = extract_relevant_terms(&s, ObjectFamily::Surface).unwrap().surface.unwrap();
        assert_eq!((st.s, st.e, st.h), (1.25, -0.4, -0.4));
        s.momentum = 0.5;
        assert!(matches!(extract_relevant_terms(&s, ObjectFamily::Surface), Err(Error::Precondition(_))));
    }

    #[test]
    fn stencil_recovers_quadratic_coefficient() {
        let d = p2_derivative(|p| 3.0 + 2.5 * p * p - 0.1 * p.powi(4), 0.05);
        assert!((d - 5.0).abs() < 1e-8);
    }

    #[test]
    fn star_kernel_boundary_derivatives() {
        for bc in [BoundaryKind::Dirichlet, BoundaryKind::Neumann, BoundaryKind::Robin { c: 1.5 }] {
            let t = TestFunctionSpec::StarKernel { tau: 0.8, y: 0.6, bc };
            let h = 1e-6;
            let fd = (-3.0 * t.value(0.0) + 4.0 * t.value(h) - t.value(2.0 * h)) / (2.0 * h);
            assert!((fd - t.boundary_derivative()).abs() < 1e-8, "{bc:?}");
        }
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14 && f.r2 == 1.0);
        assert!(linear_fit(&x[..2], &y[..2]).is_err());
    }
}

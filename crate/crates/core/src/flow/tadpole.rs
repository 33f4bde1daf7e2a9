//! One-loop two-point flows: the bulk mass tadpole and the surface tadpole.

use super::{
    fold_diagonal, loop_integral, rk4_path, CorrelationObject, CountertermSet, DiagonalMoments, FlowParams, GridSpec,
    LambdaSchedule, LocalPart, ObjectFamily, ScheduleSpec, SurfaceCounterterms, TestFunctionSpec,
};
use crate::error::{domain, Error, Result};
use crate::kernels::{surface_kernel_value, BoundaryKind};
use crate::propagators::CutoffPair;
use crate::quad::{integrate_to_inf, QuadOptions};
use crate::special::FRAC_1_SQRT_2PI;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const MOMENT_OPTS: QuadOptions = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-12, max_intervals: 2000 };

fn check_schedule(params: &FlowParams, schedule: &LambdaSchedule) -> Result<()> {
    params.validate()?;
    if !schedule.reaches_zero() {
        return Err(Error::IncompleteFlow(format!(
            "schedule stops at Λ = {} but the renormalization conditions sit at Λ = 0",
            schedule.bottom()
        )));
    }
    if (schedule.top() - params.lambda0).abs() > 1e-12 * params.lambda0 {
        return Err(Error::IncompleteFlow(format!(
            "schedule starts at {} instead of Λ₀ = {}",
            schedule.top(),
            params.lambda0
        )));
    }
    Ok(())
}

/// `∂_Λ a₁ = ½ λ (∫_k Ċ^Λ) p_B(1/Λ²; z, z)`, independent of `z`.
pub fn bulk_tadpole_rate(coupling: f64, mass: f64, lambda: f64) -> f64 {
    0.5 * coupling * loop_integral(lambda, mass) * lambda * FRAC_1_SQRT_2PI
}

/// Moments `∫_0^∞ z^r p_{S,★}(τ; z, z) dz` for `r = 0, 1, 2`, with the first
/// moment evaluated twice, once per argument of the kernel.
///
/// Returns `[r=0, r=1 weighted by z₂, r=1 weighted by z₁, r=2]`.
pub fn surface_diagonal_moments(bc: BoundaryKind, tau: f64) -> Result<[f64; 4]> {
    let rt = tau.sqrt();
    let sign = match bc {
        BoundaryKind::Neumann => 1.0,
        BoundaryKind::Dirichlet => -1.0,
        BoundaryKind::Robin { .. } => 0.0,
        BoundaryKind::Bulk => return Ok([0.0; 4]),
    };
    if sign != 0.0 {
        // ∫ z^r e^{-2z²/τ}/√(2πτ) dz
        let m1 = rt * FRAC_1_SQRT_2PI / 4.0;
        return Ok([sign * 0.25, sign * m1, sign * m1, sign * tau / 16.0]);
    }
    let q = |w: &dyn Fn(f64) -> f64| -> Result<f64> { Ok(integrate_to_inf(w, 0.0, 0.5 * rt, MOMENT_OPTS)?.value) };
    Ok([
        q(&|z| surface_kernel_value(bc, tau, z, z))?,
        q(&|z2| z2 * surface_kernel_value(bc, tau, z2, z2))?,
        q(&|z1| surface_kernel_value(bc, tau, z1, z1) * z1)?,
        q(&|z| z * z * surface_kernel_value(bc, tau, z, z))?,
    ])
}

/// `∂_Λ (s, e, h, d₂)` of the surface tadpole at scale `Λ`.
pub fn surface_tadpole_rates(bc: BoundaryKind, coupling: f64, mass: f64, lambda: f64) -> Result<[f64; 4]> {
    if lambda <= 0.0 {
        return Ok([0.0; 4]);
    }
    let k = 0.5 * coupling * loop_integral(lambda, mass);
    if k == 0.0 {
        return Ok([0.0; 4]);
    }
    let m = surface_diagonal_moments(bc, 1.0 / (lambda * lambda))?;
    Ok([k * m[0], k * m[1], k * m[2], k * m[3]])
}

/// Bulk mass tadpole `a₁^{Λ,Λ₀}` along a complete schedule, with `a₁^{0,Λ₀} = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkTadpole {
    pub params: FlowParams,
    /// Checkpoints from `Λ₀` down to `0`.
    pub lambda: Vec<f64>,
    pub a: Vec<f64>,
    /// Irrelevant remainder, identically zero for a pure contact term.
    pub remainder: Vec<f64>,
}

impl BulkTadpole {
    /// Boundary value `a₁^{Λ₀,Λ₀}`.
    pub fn boundary(&self) -> f64 {
        self.a[0]
    }

    /// Snapshot at checkpoint `idx`, with the boundary value as contact
    /// coefficient and the flowed part as profile.
    pub fn object_at(&self, idx: usize, grid: &GridSpec) -> Result<CorrelationObject> {
        grid.validate()?;
        let lam = *self.lambda.get(idx).ok_or_else(|| Error::Domain(format!("checkpoint {idx} out of range")))?;
        let flowed = self.a[idx] - self.boundary();
        Ok(CorrelationObject {
            l: 1,
            n: 2,
            family: ObjectFamily::Bulk,
            bc: BoundaryKind::Bulk,
            cut: CutoffPair::new(lam, self.params.lambda0)?,
            local: LocalPart { contact: self.boundary(), ..Default::default() },
            profile: vec![flowed; grid.z_nodes.len()],
            z_nodes: grid.z_nodes.clone(),
            moments: DiagonalMoments::default(),
            momentum: 0.0,
        })
    }

    pub fn counterterms(&self, grid: &GridSpec) -> Result<CountertermSet> {
        super::extract_relevant_terms(&self.object_at(0, grid)?, ObjectFamily::Bulk)
    }
}

/// Integrates the one-loop bulk two-point flow with BPHZ conditions at `Λ = 0`.
pub fn integrate_bulk_tadpole(params: FlowParams, schedule: &LambdaSchedule) -> Result<BulkTadpole> {
    check_schedule(&params, schedule)?;
    let up: Vec<f64> = schedule.points().iter().rev().copied().collect();
    let xs = rk4_path(&up, [0.0], |lam, _| Ok([bulk_tadpole_rate(params.coupling, params.mass, lam)]))?;
    let a: Vec<f64> = xs.iter().rev().map(|x| x[0]).collect();
    Ok(BulkTadpole { params, lambda: schedule.points().to_vec(), remainder: vec![0.0; a.len()], a })
}

/// Surface tadpole couplings along a complete schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTadpole {
    pub params: FlowParams,
    pub bc: BoundaryKind,
    /// Checkpoints from `Λ₀` down to `0`.
    pub lambda: Vec<f64>,
    pub s: Vec<f64>,
    pub e: Vec<f64>,
    pub h: Vec<f64>,
    /// Second moment `∫ z₁z₂ S`, part of the remainder.
    pub d2: Vec<f64>,
}

impl SurfaceTadpole {
    /// Boundary data `(s₁^{Λ₀}, e₁^{Λ₀}, h₁^{Λ₀})`.
    pub fn boundary(&self) -> SurfaceCounterterms {
        SurfaceCounterterms { s: self.s[0], e: self.e[0], h: self.h[0] }
    }

    /// Values at the last checkpoint, `Λ = 0`.
    pub fn at_zero(&self) -> SurfaceCounterterms {
        let i = self.s.len() - 1;
        SurfaceCounterterms { s: self.s[i], e: self.e[i], h: self.h[i] }
    }

    /// Flows the boundary data from `Λ₀` down to `0` along `schedule` and
    /// returns the couplings reached at `Λ = 0`.
    pub fn reintegrate(&self, schedule: &LambdaSchedule) -> Result<SurfaceCounterterms> {
        check_schedule(&self.params, schedule)?;
        let b = self.boundary();
        let (bc, p) = (self.bc, self.params);
        let xs = rk4_path(schedule.points(), [b.s, b.e, b.h], |lam, _| {
            let r = surface_tadpole_rates(bc, p.coupling, p.mass, lam)?;
            Ok([r[0], r[1], r[2]])
        })?;
        let x = xs.last().unwrap();
        Ok(SurfaceCounterterms { s: x[0], e: x[1], h: x[2] })
    }

    /// Snapshot at checkpoint `idx`: the boundary data as surface contact
    /// terms plus the flowed coefficient of `δ(z₁ − z₂)` sampled on the grid.
    pub fn object_at(&self, idx: usize, grid: &GridSpec) -> Result<CorrelationObject> {
        grid.validate()?;
        let lam = *self.lambda.get(idx).ok_or_else(|| Error::Domain(format!("checkpoint {idx} out of range")))?;
        let b = self.boundary();
        let p = self.params;
        let path: Vec<f64> = self.lambda[..=idx].to_vec();
        let bc = self.bc;
        let profile = grid
            .z_nodes
            .par_iter()
            .map(|&z| {
                let xs = rk4_path(&path, [0.0], |l, _| {
                    if l <= 0.0 {
                        return Ok([0.0]);
                    }
                    Ok([0.5 * p.coupling * loop_integral(l, p.mass) * surface_kernel_value(bc, 1.0 / (l * l), z, z)])
                })?;
                Ok(xs.last().unwrap()[0])
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(CorrelationObject {
            l: 1,
            n: 2,
            family: ObjectFamily::Surface,
            bc: self.bc,
            cut: CutoffPair::new(lam, p.lambda0)?,
            local: LocalPart { contact: 0.0, surface: b.s, surface_derivative: [b.h, b.e] },
            profile,
            z_nodes: grid.z_nodes.clone(),
            moments: DiagonalMoments {
                zeroth: self.s[idx] - b.s,
                first_z2: self.e[idx] - b.e,
                first_z1: self.h[idx] - b.h,
                second: self.d2[idx] - self.d2[0],
            },
            momentum: 0.0,
        })
    }

    pub fn counterterms(&self) -> CountertermSet {
        CountertermSet { l: 1, bulk: None, surface: Some(self.boundary()) }
    }

    /// CSV series `lambda,s,e,h` from `Λ₀` down to `0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,s,e,h\n");
        for i in 0..self.lambda.len() {
            out.push_str(&format!("{:e},{:e},{:e},{:e}\n", self.lambda[i], self.s[i], self.e[i], self.h[i]));
        }
        out
    }
}

/// Integrates the one-loop surface two-point flow for Robin or Neumann
/// conditions with `s₁^{0,Λ₀} = e₁^{0,Λ₀} = 0`.
pub fn integrate_surface_tadpole(params: FlowParams, bc: BoundaryKind, schedule: &LambdaSchedule) -> Result<SurfaceTadpole> {
    bc.validate()?;
    match bc {
        BoundaryKind::Dirichlet => {
            return Err(Error::Unsupported(
                "Dirichlet data vanish at Λ₀ and carry no surface counterterm; use dirichlet_surface_check".into(),
            ))
        }
        BoundaryKind::Bulk => return domain("the surface tadpole needs a boundary condition"),
        _ => {}
    }
    check_schedule(&params, schedule)?;
    let up: Vec<f64> = schedule.points().iter().rev().copied().collect();
    let xs = rk4_path(&up, [0.0; 4], |lam, _| surface_tadpole_rates(bc, params.coupling, params.mass, lam))?;
    let col = |k: usize| -> Vec<f64> { xs.iter().rev().map(|x| x[k]).collect() };
    Ok(SurfaceTadpole { params, bc, lambda: schedule.points().to_vec(), s: col(0), e: col(1), h: col(2), d2: col(3) })
}

/// Boundary contact terms folded with two test functions.
pub fn fold_boundary(data: &SurfaceCounterterms, tests: &[TestFunctionSpec; 2]) -> f64 {
    let (v1, v2) = (tests[0].value(0.0), tests[1].value(0.0));
    let (d1, d2) = (tests[0].boundary_derivative(), tests[1].boundary_derivative());
    data.s * v1 * v2 + data.e * v1 * d2 + data.h * d1 * v2
}

/// `S₁,₂;★^{Λ,Λ₀}` folded with two test functions.
///
/// The Λ₀ data `boundary` (absent for Dirichlet) are flowed down to `Λ` with
/// `∂_Λ S = ½λ (∫_k Ċ^Λ) δ(z₁ − z₂) p_{S,★}(1/Λ²; z₁, z₁)`.
pub fn surface_two_point_folded(
    params: FlowParams,
    bc: BoundaryKind,
    lambda: f64,
    tests: &[TestFunctionSpec; 2],
    boundary: Option<SurfaceCounterterms>,
    spec: ScheduleSpec,
) -> Result<f64> {
    params.validate()?;
    bc.validate()?;
    for t in tests {
        t.validate()?;
    }
    CutoffPair::new(lambda, params.lambda0)?;
    if bc == BoundaryKind::Dirichlet && boundary.is_some_and(|b| b != SurfaceCounterterms::default()) {
        return domain("Dirichlet conditions admit no surface boundary data");
    }
    let start = boundary.map_or(0.0, |b| fold_boundary(&b, tests));
    if lambda == params.lambda0 {
        return Ok(start);
    }
    let floor = (spec.floor_ratio * params.mass).max(lambda).min(0.5 * params.lambda0);
    let sched = LambdaSchedule::log_spaced(params.lambda0, floor, lambda, spec.steps_per_decade)?;
    let xs = rk4_path(sched.points(), [start], |lam, _| {
        if lam <= 0.0 {
            return Ok([0.0]);
        }
        let k = 0.5 * params.coupling * loop_integral(lam, params.mass);
        if k == 0.0 {
            return Ok([0.0]);
        }
        let tau = 1.0 / (lam * lam);
        let f = fold_diagonal(tests, tau.sqrt(), |z| surface_kernel_value(bc, tau, z, z), QuadOptions::tol(1e-300, 1e-11))?;
        Ok([k * f])
    })?;
    Ok(xs.last().unwrap()[0])
}

/// Λ₀-dependence of the Dirichlet surface two-point object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletReport {
    pub lambda: f64,
    pub lambda0s: Vec<f64>,
    pub values: Vec<f64>,
    /// `|V(Λ₀,k+1) − V(Λ₀,k)| / |V(Λ₀,k+1)|`.
    pub relative_changes: Vec<f64>,
    /// Surface counterterms in force, identically zero.
    pub counterterms: SurfaceCounterterms,
}

impl DirichletReport {
    pub fn cauchy_within(&self, tol: f64) -> bool {
        self.relative_changes.last().is_some_and(|r| *r < tol)
    }
}

/// Folds `S₁,₂;D` with Dirichlet kernels `p_D(τ_i; ·, y_i)` for each `Λ₀`,
/// starting from vanishing data at `Λ₀`.
pub fn dirichlet_surface_check(
    coupling: f64,
    mass: f64,
    lambda: f64,
    lambda0s: &[f64],
    kernels: [(f64, f64); 2],
    spec: ScheduleSpec,
) -> Result<DirichletReport> {
    if lambda0s.len() < 2 || lambda0s.windows(2).any(|w| w[1] <= w[0]) {
        return domain("need at least two increasing cutoffs");
    }
    let tests = kernels.map(|(tau, y)| TestFunctionSpec::StarKernel { tau, y, bc: BoundaryKind::Dirichlet });
    let values = lambda0s
        .par_iter()
        .map(|&l0| {
            let p = FlowParams::new(coupling, mass, l0)?;
            surface_two_point_folded(p, BoundaryKind::Dirichlet, lambda, &tests, None, spec)
        })
        .collect::<Result<Vec<f64>>>()?;
    let relative_changes = values.windows(2).map(|w| ((w[1] - w[0]) / w[1]).abs()).collect();
    Ok(DirichletReport {
        lambda,
        lambda0s: lambda0s.to_vec(),
        values,
        relative_changes,
        counterterms: SurfaceCounterterms::default(),
    })
}

/// `a₁^{Λ,Λ₀} = ½λ (4π^{3/2})^{-1} (2π)^{-1/2} · ½[m² E₁(m²/Λ²) − Λ² e^{−m²/Λ²}]`,
/// the closed form of the bulk tadpole, used to cross-check the RK4 flow.
pub fn bulk_tadpole_closed_form(coupling: f64, mass: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let x = mass * mass / (lambda * lambda);
    let e1 = exp_integral_e1(x);
    0.5 * coupling / (4.0 * PI.powf(1.5)) * FRAC_1_SQRT_2PI * 0.5 * (mass * mass * e1 - lambda * lambda * (-x).exp())
}

/// Exponential integral `E₁(x)` for `x > 0`.
fn exp_integral_e1(x: f64) -> f64 {
    integrate_to_inf(|t| (-t).exp() / t, x, 1.0, QuadOptions::tol(1e-300, 1e-13)).map_or(f64::NAN, |r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(l0: f64) -> LambdaSchedule {
        LambdaSchedule::complete(&FlowParams::new(1.0, 1.0, l0).unwrap(), ScheduleSpec::default()).unwrap()
    }

    #[test]
    fn bulk_tadpole_boundary_value() {
        // high-precision quadrature of ∫_0^10 ½ (Λ/√(2π)) ∫_k Ċ^Λ dΛ at λ = m = 1
        let oracle = -0.425_244_043_486_746_516_325_074_6;
        let t = integrate_bulk_tadpole(FlowParams::new(1.0, 1.0, 10.0).unwrap(), &sched(10.0)).unwrap();
        assert!((t.boundary() / oracle - 1.0).abs() < 1e-10, "{}", t.boundary());
        assert_eq!(*t.a.last().unwrap(), 0.0);
        assert!((bulk_tadpole_closed_form(1.0, 1.0, 10.0) / oracle - 1.0).abs() < 1e-10);
    }

    #[test]
    fn incomplete_schedule_is_rejected() {
        let p = FlowParams::new(1.0, 1.0, 10.0).unwrap();
        let s = LambdaSchedule::log_spaced(10.0, 0.1, 0.1, 50).unwrap();
        assert!(matches!(integrate_bulk_tadpole(p, &s), Err(Error::IncompleteFlow(_))));
        assert!(matches!(integrate_surface_tadpole(p, BoundaryKind::Neumann, &s), Err(Error::IncompleteFlow(_))));
    }

    #[test]
    fn dirichlet_tadpole_redirects() {
        let p = FlowParams::new(1.0, 1.0, 10.0).unwrap();
        assert!(matches!(integrate_surface_tadpole(p, BoundaryKind::Dirichlet, &sched(10.0)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn neumann_boundary_values_match_quadrature_oracle() {
        let t = integrate_surface_tadpole(FlowParams::new(1.0, 1.0, 10.0).unwrap(), BoundaryKind::Neumann, &sched(10.0)).unwrap();
        let b = t.boundary();
        assert!((b.s / -0.046_734_067_995_281_679_485_69 - 1.0).abs() < 1e-10, "{}", b.s);
        assert!((b.e / -0.004_520_266_323_327_565_965_712 - 1.0).abs() < 1e-9, "{}", b.e);
        assert!((b.e - b.h).abs() < 1e-10);
        let z = t.at_zero();
        assert_eq!((z.s, z.e), (0.0, 0.0));
    }

    #[test]
    fn robin_moments_reduce_to_neumann_and_dirichlet() {
        let tau = 0.3;
        let n = surface_diagonal_moments(BoundaryKind::Neumann, tau).unwrap();
        let r0 = surface_diagonal_moments(BoundaryKind::Robin { c: 0.0 }, tau).unwrap();
        for k in 0..4 {
            assert!((n[k] - r0[k]).abs() < 1e-12);
        }
        let d = surface_diagonal_moments(BoundaryKind::Dirichlet, tau).unwrap();
        let r = surface_diagonal_moments(BoundaryKind::Robin { c: 1e6 }, tau).unwrap();
        assert!((d[0] - r[0]).abs() < 1e-5);
    }

    #[test]
    fn round_trip_restores_renormalization_conditions() {
        for bc in [BoundaryKind::Neumann, BoundaryKind::Robin { c: 1.0 }] {
            let p = FlowParams::new(1.0, 1.0, 20.0).unwrap();
            let s = sched(20.0);
            let t = integrate_surface_tadpole(p, bc, &s).unwrap();
            let back = t.reintegrate(&s).unwrap();
            assert!(back.s.abs() < 1e-12 && back.e.abs() < 1e-12);
            let fine = t.reintegrate(&s.refined(2)).unwrap();
            assert!(fine.s.abs() < 1e-6 && fine.e.abs() < 1e-6);
        }
    }

    #[test]
    fn zero_coupling_is_free() {
        let p = FlowParams::new(0.0, 1.0, 10.0).unwrap();
        let t = integrate_surface_tadpole(p, BoundaryKind::Robin { c: 2.0 }, &sched(10.0)).unwrap();
        assert!(t.s.iter().chain(&t.e).all(|v| *v == 0.0));
    }

    #[test]
    fn tadpole_object_round_trips_through_extraction() {
        let p = FlowParams::new(1.0, 1.0, 10.0).unwrap();
        let s = LambdaSchedule::complete(&p, ScheduleSpec { steps_per_decade: 50, floor_ratio: 1e-2 }).unwrap();
        let t = integrate_surface_tadpole(p, BoundaryKind::Robin { c: 1.0 }, &s).unwrap();
        let grid = GridSpec::uniform(1.0, 16).unwrap();
        let idx = 40;
        let obj = t.object_at(idx, &grid).unwrap();
        let ct = super::super::extract_relevant_terms(&obj, ObjectFamily::Surface).unwrap().surface.unwrap();
        assert!((ct.s - t.s[idx]).abs() < 1e-14 && (ct.e - t.e[idx]).abs() < 1e-14);

        let b = integrate_bulk_tadpole(p, &s).unwrap();
        let ctb = b.counterterms(&grid).unwrap().bulk.unwrap();
        assert!(ctb.a.iter().all(|a| (a - b.boundary()).abs() < 1e-15));
        let ob = b.object_at(s.points().len() - 1, &grid).unwrap();
        let at0 = super::super::extract_relevant_terms(&ob, ObjectFamily::Bulk).unwrap().bulk.unwrap();
        assert!(at0.a.iter().all(|a| a.abs() < 1e-15));
    }

    #[test]
    fn fold_with_moment_probes_reproduces_couplings() {
        // folding with (1, 1) and (1, z) gives s and e at the same scale
        let p = FlowParams::new(1.0, 1.0, 10.0).unwrap();
        let spec = ScheduleSpec { steps_per_decade: 200, floor_ratio: 1e-2 };
        let t = integrate_surface_tadpole(p, BoundaryKind::Robin { c: 0.5 }, &LambdaSchedule::complete(&p, spec).unwrap()).unwrap();
        let b = t.boundary();
        let one = TestFunctionSpec::CharHalfline;
        let z = TestFunctionSpec::BoundaryDerivativeProbe;
        let s0 = surface_two_point_folded(p, t.bc, 0.0, &[one, one], Some(b), spec).unwrap();
        let e0 = surface_two_point_folded(p, t.bc, 0.0, &[one, z], Some(b), spec).unwrap();
        assert!(s0.abs() < 1e-8 * b.s.abs(), "{s0}");
        assert!(e0.abs() < 1e-8 * b.e.abs(), "{e0}");
    }

    #[test]
    fn bulk_plus_surface_rates_give_star_rate() {
        use crate::kernels::{kernel_value, p_bulk};
        for bc in [BoundaryKind::Neumann, BoundaryKind::Dirichlet, BoundaryKind::Robin { c: 3.0 }] {
            for lam in [0.5, 2.0, 30.0] {
                let tau = 1.0 / (lam * lam);
                for z in [0.0, 0.1, 1.0] {
                    let k = 0.5 * loop_integral(lam, 1.0);
                    let sum = k * p_bulk(tau, z, z) + k * surface_kernel_value(bc, tau, z, z);
                    assert!((sum - k * kernel_value(bc, tau, z, z)).abs() < 1e-8 * (k * kernel_value(bc, tau, z, z)).abs().max(1e-300));
                }
            }
        }
    }
}

//! One-loop four-point function (the fish diagram) in reduced kinematics.
//!
//! All external momenta vanish and the four legs are folded with bulk heat
//! kernels. With contact vertices the diagram reduces to
//! `∫∫ dt dt' h(t + t') ∫∫_{ℝ⁺²} Φ_a(z) Φ_b(z') p(t; z, z') p(t'; z, z')`,
//! where `h(u) = ∫_k e^{-u(k²+m²)}`. The `(z, z')` integral of a product of
//! Gaussians over the quadrant is a bivariate normal probability, so only the
//! proper times are integrated numerically.

use super::{heat_trace, rk4_path, FlowParams, LambdaSchedule, ScheduleSpec};
use crate::error::{domain, Error, Result};
use crate::kernels::{p_bulk, BoundaryKind};
use crate::propagators::CutoffPair;
use crate::quad::{integrate, QuadOptions};
use crate::special::{bvn_upper, norm_cdf};
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::f64::consts::PI;

/// Sign and weight of the fish diagram: `D₁,₄ = FISH_WEIGHT · λ² Σ_channels ∫_k C²`.
pub const FISH_WEIGHT: f64 = -0.5;

/// Proper time beyond which `e^{-u m²}` is dropped, in units of `1/m²`.
const PROPER_TIME_HORIZON: f64 = 40.0;

const CHANNELS: [[usize; 4]; 3] = [[0, 1, 2, 3], [0, 2, 1, 3], [0, 3, 1, 2]];

/// Heat-kernel test functions `p_B(τ_i; ·, y_i)` on the four legs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourPointKinematics {
    pub kernels: [(f64, f64); 4],
    /// External momenta; only the all-zero configuration is supported.
    pub momenta: [f64; 4],
}

impl FourPointKinematics {
    pub fn new(kernels: [(f64, f64); 4]) -> Self {
        Self { kernels, momenta: [0.0; 4] }
    }

    fn validate(&self) -> Result<()> {
        if self.momenta.iter().any(|p| *p != 0.0) {
            return Err(Error::Unsupported("one-loop four-point functions are evaluated at zero external momenta".into()));
        }
        for (tau, y) in self.kernels {
            if !(tau > 0.0 && tau.is_finite() && y.is_finite()) {
                return domain(format!("invalid leg kernel (τ={tau}, y={y})"));
            }
        }
        Ok(())
    }
}

/// Gaussian `A e^{-(z-μ)²/(2v)}`.
#[derive(Debug, Clone, Copy)]
struct Gauss {
    amp: f64,
    mean: f64,
    var: f64,
}

impl Gauss {
    fn product(kernels: &[(f64, f64)]) -> Self {
        let prec: f64 = kernels.iter().map(|(t, _)| 1.0 / t).sum();
        let lin: f64 = kernels.iter().map(|(t, y)| y / t).sum();
        let quad: f64 = kernels.iter().map(|(t, y)| y * y / t).sum();
        let mean = lin / prec;
        let norm: f64 = kernels.iter().map(|(t, _)| (2.0 * PI * t).sqrt()).product();
        Self { amp: (-0.5 * (quad - mean * mean * prec)).exp() / norm, mean, var: 1.0 / prec }
    }
}

/// `∫_{ℝ⁺²} exp(−½(xᵀAx − 2bᵀx + c₀))`, with `det A` supplied by the caller
/// so that it can be formed without cancellation.
#[allow(clippy::too_many_arguments)]
fn quadrant(a11: f64, a22: f64, a12: f64, det: f64, b1: f64, b2: f64, c0: f64) -> f64 {
    let mu1 = (a22 * b1 - a12 * b2) / det;
    let mu2 = (a11 * b2 - a12 * b1) / det;
    let q = (c0 - (b1 * mu1 + b2 * mu2)).max(0.0);
    let s1 = (a22 / det).sqrt();
    let s2 = (a11 / det).sqrt();
    let rho = (-a12 / (a11 * a22).sqrt()).clamp(-1.0, 1.0);
    (-0.5 * q).exp() * 2.0 * PI / det.sqrt() * bvn_upper(-mu1 / s1, -mu2 / s2, rho)
}

/// `∫∫_{ℝ⁺²} Φ_a(z) Φ_b(z') p_B(t; z, σ₁z') p_B(t'; z, σ₂z') dz dz'`.
fn image_term(ga: &Gauss, gb: &Gauss, t: f64, tp: f64, s1: f64, s2: f64) -> f64 {
    let s = 1.0 / t + 1.0 / tp;
    let q = s1 / t + s2 / tp;
    let (pa, pb) = (1.0 / ga.var, 1.0 / gb.var);
    let (a11, a22, a12) = (s + pa, s + pb, -q);
    // (s − |q|)(s + |q|) is exact where the direct terms cancel
    let det = (s - q.abs()) * (s + q.abs()) + s * (pa + pb) + pa * pb;
    let (b1, b2) = (ga.mean * pa, gb.mean * pb);
    let c0 = ga.mean * ga.mean * pa + gb.mean * gb.mean * pb;
    ga.amp * gb.amp / (2.0 * PI * (t * tp).sqrt()) * quadrant(a11, a22, a12, det, b1, b2, c0)
}

/// Image signs and weights of `p_★(t) p_★(t') − p_B(t) p_B(t')`.
fn surface_terms(bc: BoundaryKind) -> Result<&'static [(f64, f64, f64)]> {
    match bc {
        BoundaryKind::Neumann => Ok(&[(1.0, -1.0, 1.0), (-1.0, 1.0, 1.0), (-1.0, -1.0, 1.0)]),
        BoundaryKind::Dirichlet => Ok(&[(1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)]),
        BoundaryKind::Robin { c } if c == 0.0 => surface_terms(BoundaryKind::Neumann),
        BoundaryKind::Robin { .. } => Err(Error::Unsupported(
            "the four-point fold is closed-form only for image kernels (Neumann, Dirichlet)".into(),
        )),
        BoundaryKind::Bulk => domain("surface four-point function needs a boundary condition"),
    }
}

/// `∫_0^∞ dz' p_B(t; z, z') p_B(t'; z, z') = (2π(t+t'))^{-1/2} Φ(z/σ)` with `σ² = tt'/(t+t')`.
fn half_line_overlap(z: f64, t: f64, tp: f64) -> f64 {
    let u = t + tp;
    norm_cdf(z * (u / (t * tp)).sqrt()) / (2.0 * PI * u).sqrt()
}

/// `∫_0^∞ dz Π(z) ∫_0^∞ dz' p_B(t; z, z') p_B(t'; z, z')` for the four-leg product `Π`.
fn local_subtraction(g4: &Gauss, t: f64, tp: f64) -> f64 {
    let u = t + tp;
    let k = (u / (t * tp)).sqrt();
    let sv = g4.var.sqrt();
    let w = (k * k * g4.var + 1.0).sqrt();
    let p = bvn_upper(-g4.mean / sv, -k * g4.mean / w, k * sv / w);
    g4.amp * (2.0 * PI * g4.var).sqrt() / (2.0 * PI * u).sqrt() * p
}

/// Adaptive nested integral over `[lo, hi]²` in logarithmic variables.
fn proper_time_square(lo: f64, hi: f64, f: impl Fn(f64, f64) -> f64, rel: f64) -> Result<f64> {
    let failed = Cell::new(None::<Error>);
    let inner = QuadOptions { abs_tol: 1e-300, rel_tol: 0.1 * rel, max_intervals: 4000 };
    let outer = QuadOptions { abs_tol: 1e-300, rel_tol: rel, max_intervals: 4000 };
    let r = integrate(
        |u| {
            let t = u.exp();
            match integrate(
                |v| {
                    let tp = v.exp();
                    f(t, tp) * tp
                },
                lo.ln(),
                hi.ln(),
                inner,
            ) {
                Ok(r) => r.value * t,
                Err(e) => {
                    failed.set(Some(e));
                    0.0
                }
            }
        },
        lo.ln(),
        hi.ln(),
        outer,
    )?;
    if let Some(e) = failed.take() {
        return Err(e);
    }
    Ok(r.value)
}

/// Proper-time window `[1/Λ₀², 1/Λ²]`, truncated where `e^{-um²}` is negligible.
fn window(mass: f64, lambda: f64, lambda0: f64) -> (f64, f64) {
    let lo = 1.0 / (lambda0 * lambda0);
    let horizon = lo + PROPER_TIME_HORIZON / (mass * mass);
    let hi = if lambda > 0.0 { (1.0 / (lambda * lambda)).min(horizon) } else { horizon };
    (lo, hi)
}

/// Folded one-loop four-point objects and the relevant moment `c₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourPointReport {
    pub params: FlowParams,
    pub bc: BoundaryKind,
    pub lambda: f64,
    pub kinematics: FourPointKinematics,
    /// `D₁,₄^{Λ,Λ₀}` folded, with `c₁^{0,Λ₀} = 0`.
    pub bulk_folded: f64,
    /// `S₁,₄;★^{Λ,Λ₀}` folded, with vanishing data at `Λ₀`.
    pub surface_folded: f64,
    /// Sample points `z₁` of the relevant moment.
    pub z: Vec<f64>,
    /// `c₁^{Λ,Λ₀}(z₁)` from the closed proper-time representation.
    pub c: Vec<f64>,
    /// `c₁^{Λ,Λ₀}(z₁)` integrated along the flow from `Λ = 0`.
    pub c_flow: Vec<f64>,
}

/// `∫∫_{[lo,hi]²} dt dt' h(t+t') (2π(t+t'))^{-1/2} Φ(z/σ)`, the per-channel moment.
fn channel_moment(z: f64, mass: f64, lo: f64, hi: f64) -> Result<f64> {
    proper_time_square(lo, hi, |t, tp| heat_trace(t + tp, mass) * half_line_overlap(z, t, tp), 1e-8)
}

/// `∂_Λ c₁^{Λ,Λ₀}(z)`: the derivative of the proper-time square through its
/// upper edge `T = 1/Λ²`.
pub fn c_rate(coupling: f64, mass: f64, lambda: f64, lambda0: f64, z: f64) -> Result<f64> {
    if lambda <= 0.0 || lambda >= lambda0 {
        return Ok(0.0);
    }
    let lo = 1.0 / (lambda0 * lambda0);
    let t = 1.0 / (lambda * lambda);
    let edge = integrate(
        |v| {
            let tp = v.exp();
            heat_trace(t + tp, mass) * half_line_overlap(z, t, tp) * tp
        },
        lo.ln(),
        t.ln(),
        QuadOptions { abs_tol: 1e-300, rel_tol: 1e-10, max_intervals: 4000 },
    )?
    .value;
    Ok(3.0 * FISH_WEIGHT * coupling * coupling * (-4.0 / lambda.powi(3)) * edge)
}

/// Fish-diagram contribution at loop order one for `n = 4`.
///
/// The bulk object is renormalized with `c₁^{0,Λ₀}(z₁) = 0`; the surface
/// object receives no four-point counterterm.
pub fn one_loop_four_point(
    params: FlowParams,
    bc: BoundaryKind,
    lambda: f64,
    kin: FourPointKinematics,
    z_samples: &[f64],
) -> Result<FourPointReport> {
    params.validate()?;
    bc.validate()?;
    kin.validate()?;
    CutoffPair::new(lambda, params.lambda0)?;
    let terms = surface_terms(bc)?;
    let weight = FISH_WEIGHT * params.coupling * params.coupling;
    let m = params.mass;
    let (lo, hi) = window(m, lambda, params.lambda0);
    let (_, hi0) = window(m, 0.0, params.lambda0);

    let pairs: Vec<(Gauss, Gauss)> = CHANNELS
        .iter()
        .map(|c| {
            let k = kin.kernels;
            (Gauss::product(&[k[c[0]], k[c[1]]]), Gauss::product(&[k[c[2]], k[c[3]]]))
        })
        .collect();
    let g4 = Gauss::product(&kin.kernels);

    let (bulk_folded, surface_folded) = if weight == 0.0 || lambda == params.lambda0 {
        (0.0, 0.0)
    } else {
        let surface = proper_time_square(
            lo,
            hi,
            |t, tp| {
                let q: f64 = pairs
                    .iter()
                    .map(|(a, b)| terms.iter().map(|&(s1, s2, w)| w * image_term(a, b, t, tp, s1, s2)).sum::<f64>())
                    .sum();
                heat_trace(t + tp, m) * q
            },
            1e-7,
        )?;
        // bulk fish minus its local part on the same window, then the
        // remaining IR part of the subtraction when Λ > 0
        let bulk_window = proper_time_square(
            lo,
            hi,
            |t, tp| {
                let q: f64 = pairs.iter().map(|(a, b)| image_term(a, b, t, tp, 1.0, 1.0)).sum();
                heat_trace(t + tp, m) * (q - 3.0 * local_subtraction(&g4, t, tp))
            },
            1e-7,
        )?;
        let ir = if hi < hi0 {
            let sub = |a: f64, b: f64| {
                proper_time_square(a, b, |t, tp| heat_trace(t + tp, m) * local_subtraction(&g4, t, tp), 1e-9)
            };
            3.0 * (sub(lo, hi0)? - sub(lo, hi)?)
        } else {
            0.0
        };
        (weight * (bulk_window - ir), weight * surface)
    };

    let mut c = Vec::with_capacity(z_samples.len());
    let mut c_flow = Vec::with_capacity(z_samples.len());
    for &z in z_samples {
        if z < 0.0 {
            return domain(format!("z samples must be nonnegative, got {z}"));
        }
        let direct = if hi < hi0 && weight != 0.0 {
            3.0 * weight * (channel_moment(z, m, lo, hi)? - channel_moment(z, m, lo, hi0)?)
        } else {
            0.0
        };
        c.push(direct);
        let flowed = if lambda > 0.0 && weight != 0.0 {
            let floor = (1e-2 * m).min(0.5 * lambda);
            let sched = LambdaSchedule::log_spaced(lambda, floor, 0.0, ScheduleSpec::default().steps_per_decade)?;
            let up: Vec<f64> = sched.points().iter().rev().copied().collect();
            let xs = rk4_path(&up, [0.0], |l, _| Ok([c_rate(params.coupling, m, l, params.lambda0, z)?]))?;
            xs.last().unwrap()[0]
        } else {
            0.0
        };
        c_flow.push(flowed);
    }

    Ok(FourPointReport { params, bc, lambda, kinematics: kin, bulk_folded, surface_folded, z: z_samples.to_vec(), c, c_flow })
}

/// Direct four-dimensional reference for a single image term, used in tests.
#[doc(hidden)]
pub fn image_term_reference(ka: [(f64, f64); 2], kb: [(f64, f64); 2], t: f64, tp: f64, s1: f64, s2: f64) -> Result<f64> {
    let opts = QuadOptions::tol(1e-300, 1e-10);
    let phi = |k: &[(f64, f64); 2], z: f64| p_bulk(k[0].0, z, k[0].1) * p_bulk(k[1].0, z, k[1].1);
    let v = integrate(
        |z| {
            integrate(|zp| phi(&kb, zp) * p_bulk(t, z, s1 * zp) * p_bulk(tp, z, s2 * zp), 0.0, 12.0, opts)
                .map_or(f64::NAN, |r| r.value)
                * phi(&ka, z)
        },
        0.0,
        12.0,
        opts,
    )?;
    Ok(v.value)
}

#[doc(hidden)]
pub fn image_term_closed(ka: [(f64, f64); 2], kb: [(f64, f64); 2], t: f64, tp: f64, s1: f64, s2: f64) -> f64 {
    image_term(&Gauss::product(&ka), &Gauss::product(&kb), t, tp, s1, s2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrant_terms_match_direct_quadrature() {
        let ka = [(0.5, 0.4), (1.0, 0.9)];
        let kb = [(0.8, 1.1), (0.3, 0.2)];
        for (t, tp) in [(0.05, 0.3), (1.0, 2.0), (0.01, 0.01)] {
            for (s1, s2) in [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                let c = image_term_closed(ka, kb, t, tp, s1, s2);
                let r = image_term_reference(ka, kb, t, tp, s1, s2).unwrap();
                assert!((c - r).abs() < 1e-9 * r.abs().max(1e-6), "t={t} tp={tp} s=({s1},{s2}): {c} vs {r}");
            }
        }
    }

    #[test]
    fn local_subtraction_matches_quadrature() {
        let k = [(0.5, 0.4), (1.0, 0.9), (0.8, 1.1), (0.3, 0.2)];
        let g4 = Gauss::product(&k);
        let (t, tp) = (0.2, 0.7);
        let direct = integrate(
            |z| k.iter().map(|(a, y)| p_bulk(*a, z, *y)).product::<f64>() * half_line_overlap(z, t, tp),
            0.0,
            12.0,
            QuadOptions::tol(1e-300, 1e-12),
        )
        .unwrap()
        .value;
        assert!((local_subtraction(&g4, t, tp) / direct - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quadratic_in_coupling_and_bphz_at_zero() {
        let kin = FourPointKinematics::new([(0.5, 0.5), (0.7, 0.8), (0.6, 0.3), (0.9, 1.0)]);
        let p1 = FlowParams::new(1.0, 1.0, 10.0).unwrap();
        let p2 = FlowParams::new(2.0, 1.0, 10.0).unwrap();
        let r1 = one_loop_four_point(p1, BoundaryKind::Neumann, 0.0, kin, &[0.0, 1.0]).unwrap();
        let r2 = one_loop_four_point(p2, BoundaryKind::Neumann, 0.0, kin, &[0.0, 1.0]).unwrap();
        assert!((r2.surface_folded / r1.surface_folded - 4.0).abs() < 1e-12);
        assert!((r2.bulk_folded / r1.bulk_folded - 4.0).abs() < 1e-12);
        assert!(r1.c.iter().chain(&r1.c_flow).all(|c| *c == 0.0));
        let free = one_loop_four_point(FlowParams::new(0.0, 1.0, 10.0).unwrap(), BoundaryKind::Neumann, 0.0, kin, &[0.5]).unwrap();
        assert_eq!((free.bulk_folded, free.surface_folded), (0.0, 0.0));
    }

    #[test]
    fn relevant_moment_flow_matches_closed_form() {
        let kin = FourPointKinematics::new([(0.5, 0.5); 4]);
        let p = FlowParams::new(1.0, 1.0, 20.0).unwrap();
        let r = one_loop_four_point(p, BoundaryKind::Neumann, 2.0, kin, &[0.0, 0.3, 3.0]).unwrap();
        for i in 0..3 {
            assert!((r.c[i] - r.c_flow[i]).abs() < 1e-6 * r.c[i].abs(), "{} vs {}", r.c[i], r.c_flow[i]);
        }
        // deep in the bulk the moment no longer depends on z
        assert!(r.c[0].abs() < r.c[2].abs());
    }

    #[test]
    fn unsupported_requests() {
        let p = FlowParams::new(1.0, 1.0, 10.0).unwrap();
        let mut kin = FourPointKinematics::new([(0.5, 0.5); 4]);
        assert!(matches!(one_loop_four_point(p, BoundaryKind::Robin { c: 1.0 }, 0.0, kin, &[]), Err(Error::Unsupported(_))));
        kin.momenta[1] = 0.3;
        assert!(matches!(one_loop_four_point(p, BoundaryKind::Neumann, 0.0, kin, &[]), Err(Error::Unsupported(_))));
    }
}

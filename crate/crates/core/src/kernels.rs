//! Bulk and half-line heat kernels with Dirichlet, Neumann and Robin boundary conditions.

use crate::error::{domain, Error, Result};
use crate::quad::{integrate_to_inf, QuadOptions};
use crate::special::{erfc, erfcx, FRAC_1_SQRT_2PI};
use serde::{Deserialize, Serialize};

/// Boundary condition selecting the kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundaryKind {
    Bulk,
    Dirichlet,
    Neumann,
    /// `∂_n φ = c φ` on the boundary, `c ≥ 0`.
    Robin { c: f64 },
}

impl BoundaryKind {
    pub fn robin(c: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return domain(format!("Robin parameter must be finite and nonnegative, got {c}"));
        }
        Ok(BoundaryKind::Robin { c })
    }

    pub fn validate(&self) -> Result<()> {
        if let BoundaryKind::Robin { c } = *self {
            BoundaryKind::robin(c)?;
        }
        Ok(())
    }

    pub fn is_half_line(&self) -> bool {
        !matches!(self, BoundaryKind::Bulk)
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundaryKind::Bulk => "bulk",
            BoundaryKind::Dirichlet => "dirichlet",
            BoundaryKind::Neumann => "neumann",
            BoundaryKind::Robin { .. } => "robin",
        }
    }
}

/// Mass and boundary condition shared by a family of evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelContext {
    pub mass: f64,
    pub bc: BoundaryKind,
}

impl KernelContext {
    pub fn new(mass: f64, bc: BoundaryKind) -> Result<Self> {
        if !(mass > 0.0) {
            return domain(format!("mass must be positive, got {mass}"));
        }
        bc.validate()?;
        Ok(Self { mass, bc })
    }
}

/// Heat time and the two transverse coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelQuery {
    pub tau: f64,
    pub z: f64,
    pub zp: f64,
}

impl KernelQuery {
    pub fn new(tau: f64, z: f64, zp: f64) -> Self {
        Self { tau, z, zp }
    }

    fn check_tau(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return domain(format!("heat time must be positive, got {}", self.tau));
        }
        Ok(())
    }

    fn check_half_line(&self) -> Result<()> {
        self.check_tau()?;
        if !(self.z >= 0.0 && self.zp >= 0.0) {
            return domain(format!("boundary kernels need z, z' >= 0, got ({}, {})", self.z, self.zp));
        }
        Ok(())
    }
}

/// `p_B(τ; z, z')` without argument checks.
#[inline]
pub fn p_bulk(tau: f64, z: f64, zp: f64) -> f64 {
    let d = z - zp;
    FRAC_1_SQRT_2PI / tau.sqrt() * (-d * d / (2.0 * tau)).exp()
}

/// Closed form of `∫_0^∞ e^{-w} p_B(τ; a + w/c) dw` for `c > 0`.
///
/// Written as `(c/2) e^{-a²/2τ} erfcx(x)` with `x = (a + cτ)/√(2τ)`; for
/// negative `x` the unscaled form is used instead.
pub fn robin_image_closed(tau: f64, a: f64, c: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let x = (a + c * tau) / (2.0 * tau).sqrt();
    if x >= 0.0 {
        0.5 * c * (-a * a / (2.0 * tau)).exp() * erfcx(x)
    } else {
        0.5 * c * (c * a + 0.5 * c * c * tau).exp() * erfc(x)
    }
}

/// Quadrature evaluation of the same weighted image integral.
pub fn robin_image_quadrature(tau: f64, a: f64, c: f64, opts: QuadOptions) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Domain("weighted image integral needs c > 0".into()));
    }
    let scale = 1.0f64.min(c * tau.sqrt()).max(1e-3);
    Ok(integrate_to_inf(|w| (-w).exp() * p_bulk(tau, a + w / c, 0.0), 0.0, scale, opts)?.value)
}

/// Robin kernel evaluated without argument checks.
#[inline]
pub fn p_robin(tau: f64, z: f64, zp: f64, c: f64) -> f64 {
    p_bulk(tau, z, zp) + p_bulk(tau, z, -zp) - 2.0 * robin_image_closed(tau, z + zp, c)
}

/// Kernel `p_★(τ; z, z')` without argument checks.
#[inline]
pub fn kernel_value(bc: BoundaryKind, tau: f64, z: f64, zp: f64) -> f64 {
    match bc {
        BoundaryKind::Bulk => p_bulk(tau, z, zp),
        BoundaryKind::Dirichlet => p_bulk(tau, z, zp) - p_bulk(tau, z, -zp),
        BoundaryKind::Neumann => p_bulk(tau, z, zp) + p_bulk(tau, z, -zp),
        BoundaryKind::Robin { c } => p_robin(tau, z, zp, c),
    }
}

/// Surface kernel `p_{S,★} = p_★ − p_B` without argument checks.
#[inline]
pub fn surface_kernel_value(bc: BoundaryKind, tau: f64, z: f64, zp: f64) -> f64 {
    match bc {
        BoundaryKind::Bulk => 0.0,
        BoundaryKind::Dirichlet => -p_bulk(tau, z, -zp),
        BoundaryKind::Neumann => p_bulk(tau, z, -zp),
        BoundaryKind::Robin { c } => p_bulk(tau, z, -zp) - 2.0 * robin_image_closed(tau, z + zp, c),
    }
}

/// Bulk heat kernel; `zp` may be negative (image arguments).
pub fn eval_bulk(q: KernelQuery) -> Result<f64> {
    q.check_tau()?;
    Ok(p_bulk(q.tau, q.z, q.zp))
}

/// Boundary heat kernel on the half-line.
pub fn eval_kernel(ctx: KernelContext, q: KernelQuery) -> Result<f64> {
    ctx.bc.validate()?;
    if ctx.bc == BoundaryKind::Bulk {
        return eval_bulk(q);
    }
    q.check_half_line()?;
    Ok(kernel_value(ctx.bc, q.tau, q.z, q.zp))
}

/// Tolerance above which the closed form and the quadrature of the Robin
/// image term are declared inconsistent.
pub const ROBIN_CROSS_CHECK_TOL: f64 = 1e-8;

/// Weighted image integral `∫_0^∞ dw e^{-w} p_B(τ; z, −w/c − z')`, evaluated in
/// closed form and validated against adaptive quadrature.
pub fn robin_image_integral(ctx: KernelContext, q: KernelQuery) -> Result<f64> {
    let c = match ctx.bc {
        BoundaryKind::Robin { c } => c,
        other => return domain(format!("weighted image integral is defined for Robin only, got {}", other.name())),
    };
    if c == 0.0 {
        return Err(Error::Domain("c = 0 makes the image argument singular; use the Neumann kernel".into()));
    }
    q.check_half_line()?;
    let closed = robin_image_closed(q.tau, q.z + q.zp, c);
    let quad = robin_image_quadrature(q.tau, q.z + q.zp, c, QuadOptions::tol(1e-13, 1e-11))?;
    if (closed - quad).abs() > ROBIN_CROSS_CHECK_TOL {
        return Err(Error::CrossCheck(format!(
            "Robin image term: closed form {closed:e} vs quadrature {quad:e}"
        )));
    }
    Ok(closed)
}

/// Surface kernel `p_{S,★}` on the half-line.
pub fn eval_surface_kernel(ctx: KernelContext, q: KernelQuery) -> Result<f64> {
    ctx.bc.validate()?;
    if ctx.bc == BoundaryKind::Bulk {
        return domain("surface kernel needs a boundary condition");
    }
    q.check_half_line()?;
    Ok(surface_kernel_value(ctx.bc, q.tau, q.z, q.zp))
}

/// Constant `C_{δ,δ'}` of the moment bound
/// `|z₁−z₂|^r p_B(τ_δ) ≤ C τ^{r/2} p_B(τ_{δ'})`.
pub fn moment_constant(delta: f64, delta_p: f64, r: u32) -> Result<f64> {
    if !(delta >= 0.0 && delta_p > delta) {
        return domain(format!("moment constant needs 0 <= delta < delta', got ({delta}, {delta_p})"));
    }
    let k = (delta_p - delta) / ((1.0 + delta) * (1.0 + delta_p));
    // sup_x x^r exp(-k x^2 / 2) attained at x^2 = r / k
    let sup = if r == 0 { 1.0 } else { (r as f64 / k).powf(r as f64 / 2.0) * (-(r as f64) / 2.0).exp() };
    Ok(((1.0 + delta_p) / (1.0 + delta)).sqrt() * sup)
}

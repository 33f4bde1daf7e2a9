//! Randomized sweeps of the reduction, fusion, chain-collapse and
//! test-function inequalities between weight factors.

use super::gauss::{tree_integral, Line, Node};
use super::{global_weight_factor, Family, WeightQuery};
use crate::error::{Error, Result};
use crate::kernels::{moment_constant, p_bulk};
use crate::propagators::CutoffPair;
use crate::quad::{integrate_real_line, integrate_to_inf, QuadOptions};
use crate::rng::{log_uniform, substream, uniform};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Mass scale of the sweeps; Λ is drawn from `[m, 10m]`.
pub const SWEEP_MASS: f64 = 1.0;
/// Number of log-spaced Λ strata used for the empirical constants.
pub const STRATA: usize = 4;
/// Largest admissible max/min spread of per-stratum constants.
pub const SPREAD_LIMIT: f64 = 1e3;
/// Relative tolerance of the Λ-monotonicity check, set by the resolution of
/// the sup search.
pub const LAMBDA_MONOTONICITY_TOL: f64 = super::SUP_LOG_THRESHOLD;
/// Relative slack applied to explicit constants.
pub const EXPLICIT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaKind {
    Reduction,
    FfFusion,
    TfFusion,
    Chain,
    ChainForest,
    Testfn6,
    Testfn7,
    Testfn8,
    Monotonicity,
}

impl LemmaKind {
    pub fn name(self) -> &'static str {
        match self {
            LemmaKind::Reduction => "reduction",
            LemmaKind::FfFusion => "ff-fusion",
            LemmaKind::TfFusion => "tf-fusion",
            LemmaKind::Chain => "chain",
            LemmaKind::ChainForest => "chain-forest",
            LemmaKind::Testfn6 => "testfn-6",
            LemmaKind::Testfn7 => "testfn-7",
            LemmaKind::Testfn8 => "testfn-8",
            LemmaKind::Monotonicity => "monotonicity",
        }
    }

    pub fn all() -> [LemmaKind; 9] {
        use LemmaKind::*;
        [Reduction, FfFusion, TfFusion, Chain, ChainForest, Testfn6, Testfn7, Testfn8, Monotonicity]
    }
}

/// Sweep configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub lemma: LemmaKind,
    pub samples: usize,
    pub seed: u64,
    /// Number of external points for the reduction sweep.
    pub s: u32,
    /// Loop order on the right-hand side.
    pub l: u32,
    /// Internal-vertex cap per tree in global sums.
    pub cap: usize,
    /// Relative tolerance of the `u` integrals.
    pub u_rel_tol: f64,
}

impl SweepConfig {
    pub fn new(lemma: LemmaKind, samples: usize, seed: u64) -> Self {
        SweepConfig { lemma, samples, seed, s: 1, l: 1, cap: 2, u_rel_tol: 1e-4 }
    }

    pub fn validate(&self) -> Result<()> {
        match self.lemma {
            LemmaKind::Reduction => {
                if !(1..=2).contains(&self.s) || !(1..=2).contains(&self.l) {
                    return Err(Error::Precondition("reduction sweep needs s <= 2 and l in {1,2}".into()));
                }
            }
            LemmaKind::Testfn8 if self.l == 0 => {
                return Err(Error::Precondition("two-variable test-function bound needs l >= 1".into()));
            }
            _ => {}
        }
        if self.cap > 4 {
            return Err(Error::Capacity("sweeps cap trees at 4 internal vertices".into()));
        }
        Ok(())
    }
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub index: usize,
    pub stratum: usize,
    pub params: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Upper limit on `ratio` when the inequality carries an explicit constant.
    pub limit: Option<f64>,
    /// Lower limit on `ratio` (two-sided sandwiches).
    pub floor: Option<f64>,
    pub violation: bool,
    pub error: Option<String>,
}

/// Aggregated sweep result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub samples: usize,
    pub seed: u64,
    pub violations: usize,
    pub errors: usize,
    /// Max ratio per Λ stratum (`None` for empty strata).
    pub stratum_constants: Vec<Option<f64>>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub spread: f64,
    pub extra: BTreeMap<String, f64>,
    #[serde(skip)]
    pub rows: Vec<SampleRow>,
}

impl LemmaReport {
    /// Zero violations, no evaluation errors and a bounded spread.
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.errors == 0 && self.spread.is_finite() && self.spread < SPREAD_LIMIT
    }

    /// CSV with one row per sample: index, stratum, parameters, lhs, rhs, ratio, violation.
    pub fn to_csv(&self) -> String {
        let mut keys: Vec<String> = Vec::new();
        for r in &self.rows {
            for k in r.params.keys() {
                if !keys.contains(k) {
                    keys.push(k.clone());
                }
            }
        }
        keys.sort();
        let mut out = String::from("index,stratum");
        for k in &keys {
            out.push(',');
            out.push_str(k);
        }
        out.push_str(",lhs,rhs,ratio,violation\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}", r.index, r.stratum));
            for k in &keys {
                match r.params.get(k) {
                    Some(v) => out.push_str(&format!(",{v:e}")),
                    None => out.push(','),
                }
            }
            out.push_str(&format!(",{:e},{:e},{:e},{}\n", r.lhs, r.rhs, r.ratio, r.violation));
        }
        out
    }
}

fn stratum_of(lambda: f64) -> usize {
    let x = (lambda / SWEEP_MASS).log10().clamp(0.0, 1.0 - 1e-12);
    (x * STRATA as f64) as usize
}

struct Draw {
    params: BTreeMap<String, f64>,
    lambda: f64,
}

impl Draw {
    fn new() -> Self {
        Draw { params: BTreeMap::new(), lambda: SWEEP_MASS }
    }
    fn put(&mut self, k: &str, v: f64) -> f64 {
        self.params.insert(k.to_string(), v);
        v
    }
}

/// Both sides of an inequality at one configuration, with the explicit
/// limits on their ratio when the inequality states them.
#[derive(Debug, Clone, PartialEq)]
pub struct Eval {
    pub lhs: f64,
    pub rhs: f64,
    pub limit: Option<f64>,
    pub floor: Option<f64>,
    pub extra: Vec<(&'static str, f64)>,
}

fn cut(lambda: f64, lambda0: f64) -> CutoffPair {
    CutoffPair { lambda, lambda0 }
}

fn quad_u(opts_rel: f64) -> QuadOptions {
    QuadOptions { abs_tol: 1e-300, rel_tol: opts_rel, max_intervals: 4000 }
}

fn base_scales(rng: &mut ChaCha8Rng, d: &mut Draw) -> (f64, f64, f64) {
    let lambda = d.put("lambda", log_uniform(rng, SWEEP_MASS, 10.0 * SWEEP_MASS));
    let lambda0 = d.put("lambda0", lambda * log_uniform(rng, 2.0, 20.0));
    let delta = d.put("delta", uniform(rng, 0.05, 0.5));
    d.lambda = lambda;
    (lambda, lambda0, delta)
}

fn sample(cfg: &SweepConfig, index: usize) -> Result<(Draw, Eval)> {
    let mut rng = substream(cfg.seed, index as u64);
    let mut d = Draw::new();
    let e = match cfg.lemma {
        LemmaKind::Reduction => reduction_sample(cfg, &mut rng, &mut d)?,
        LemmaKind::FfFusion | LemmaKind::TfFusion => fusion_sample(cfg, &mut rng, &mut d)?,
        LemmaKind::Chain => chain_sample(&mut rng, &mut d)?,
        LemmaKind::ChainForest => chain_forest_sample(&mut rng, &mut d)?,
        LemmaKind::Testfn6 => testfn6_sample(cfg, &mut rng, &mut d)?,
        LemmaKind::Testfn7 => testfn7_sample(cfg, &mut rng, &mut d)?,
        LemmaKind::Testfn8 => testfn8_sample(cfg, &mut rng, &mut d)?,
        LemmaKind::Monotonicity => monotonicity_sample(cfg, &mut rng, &mut d)?,
    };
    Ok((d, e))
}

/// Runs a sweep; samples are independent and evaluated in parallel, each from
/// its own substream.
pub fn run_sweep(cfg: &SweepConfig) -> Result<LemmaReport> {
    cfg.validate()?;
    let evals: Vec<(usize, Result<(Draw, Eval)>)> =
        (0..cfg.samples).into_par_iter().map(|i| (i, sample(cfg, i))).collect();
    let mut rows = Vec::with_capacity(cfg.samples);
    let mut extra: BTreeMap<String, f64> = BTreeMap::new();
    let mut stratum_constants: Vec<Option<f64>> = vec![None; STRATA];
    let (mut violations, mut errors) = (0, 0);
    let (mut max_ratio, mut min_ratio) = (0.0f64, f64::INFINITY);
    for (index, res) in evals {
        match res {
            Ok((d, e)) => {
                let ratio = e.lhs / e.rhs;
                let finite = ratio.is_finite() && ratio >= 0.0;
                let over = e.limit.is_some_and(|c| ratio > c * (1.0 + EXPLICIT_SLACK));
                let under = e.floor.is_some_and(|c| ratio < c * (1.0 - EXPLICIT_SLACK));
                let violation = !finite || over || under;
                violations += usize::from(violation);
                let stratum = stratum_of(d.lambda);
                if finite {
                    let c = stratum_constants[stratum].get_or_insert(0.0);
                    *c = c.max(ratio);
                    max_ratio = max_ratio.max(ratio);
                    if ratio > 0.0 {
                        min_ratio = min_ratio.min(ratio);
                    }
                }
                for (k, v) in e.extra {
                    *extra.entry(k.to_string()).or_insert(0.0) += v;
                }
                rows.push(SampleRow {
                    index,
                    stratum,
                    params: d.params,
                    lhs: e.lhs,
                    rhs: e.rhs,
                    ratio,
                    limit: e.limit,
                    floor: e.floor,
                    violation,
                    error: None,
                });
            }
            Err(err) => {
                errors += 1;
                rows.push(SampleRow {
                    index,
                    stratum: 0,
                    params: BTreeMap::new(),
                    lhs: f64::NAN,
                    rhs: f64::NAN,
                    ratio: f64::NAN,
                    limit: None,
                    floor: None,
                    violation: true,
                    error: Some(err.to_string()),
                });
            }
        }
    }
    let filled: Vec<f64> = stratum_constants.iter().flatten().copied().collect();
    let spread = if filled.is_empty() {
        f64::NAN
    } else {
        let hi = filled.iter().cloned().fold(0.0, f64::max);
        let lo = filled.iter().cloned().fold(f64::INFINITY, f64::min);
        if lo > 0.0 { hi / lo } else { f64::INFINITY }
    };
    Ok(LemmaReport {
        lemma: cfg.lemma.name().to_string(),
        samples: cfg.samples,
        seed: cfg.seed,
        violations,
        errors,
        stratum_constants,
        max_ratio,
        min_ratio,
        spread,
        extra,
        rows,
    })
}

fn global(s: u32, l: u32, pos: Vec<f64>, tau: Vec<f64>, c: CutoffPair, delta: f64, fam: Family, cap: usize) -> Result<f64> {
    global_weight_factor(s, l, &WeightQuery { positions: pos, tau, cut: c, delta }, fam, cap)
}

/// Integral over `u ∈ ℝ` of a nonnegative function concentrated near `points`.
fn integrate_u(f: impl Fn(f64) -> f64, points: &[f64], rel: f64) -> Result<f64> {
    let lo = points.iter().cloned().fold(0.0, f64::min);
    let hi = points.iter().cloned().fold(0.0, f64::max);
    let center = 0.5 * (lo + hi);
    let scale = (hi - lo).max(1.0);
    let mut err = None;
    let r = integrate_real_line(
        |u| match f(u) {
            v if v.is_finite() => v,
            _ => {
                err = Some(u);
                0.0
            }
        },
        center,
        scale,
        quad_u(rel),
    )?;
    if let Some(u) = err {
        return Err(Error::Numerical(format!("integrand not finite at u = {u}")));
    }
    Ok(r.value)
}

fn reduction_sample(cfg: &SweepConfig, rng: &mut ChaCha8Rng, d: &mut Draw) -> Result<Eval> {
    let (lambda, lambda0, delta) = base_scales(rng, d);
    let s = cfg.s as usize;
    let mut ys = Vec::new();
    let mut taus = Vec::new();
    for i in 1..=s {
        taus.push(d.put(&format!("tau{i}"), log_uniform(rng, 0.05, 5.0)));
        ys.push(d.put(&format!("y{i}"), uniform(rng, -2.0, 3.0)));
    }
    let c = cut(lambda, lambda0);
    let tu = 1.0 / (2.0 * lambda * lambda);
    let lhs = integrate_u(
        |u| {
            let mut p = ys.clone();
            p.extend([u, u]);
            let mut t = taus.clone();
            t.extend([tu, tu]);
            global(cfg.s + 2, cfg.l - 1, p, t, c, delta, Family::Surface, cfg.cap).unwrap_or(f64::NAN)
        },
        &ys,
        cfg.u_rel_tol,
    )?;
    let rhs = lambda * global(cfg.s, cfg.l, ys.clone(), taus.clone(), c, delta, Family::Surface, cfg.cap)?;
    Ok(Eval { lhs, rhs, limit: None, floor: None, extra: vec![] })
}

fn fusion_sample(cfg: &SweepConfig, rng: &mut ChaCha8Rng, d: &mut Draw) -> Result<Eval> {
    let (lambda, lambda0, delta) = base_scales(rng, d);
    let delta_p = d.put("delta_p", uniform(rng, 0.05, 0.5));
    let tau1 = d.put("tau1", log_uniform(rng, 0.05, 5.0));
    let tau2 = d.put("tau2", log_uniform(rng, 0.05, 5.0));
    let y1 = d.put("y1", uniform(rng, -2.0, 3.0));
    let y2 = d.put("y2", uniform(rng, -2.0, 3.0));
    fusion_eval(cfg, lambda, lambda0, delta, delta_p, [tau1, tau2], [y1, y2])
}

/// Both sides of a fusion inequality at one configuration (split 1+1,
/// `l₁ = l₂ = 1`, right-hand side at `l = 2`).
pub fn fusion_eval(
    cfg: &SweepConfig,
    lambda: f64,
    lambda0: f64,
    delta: f64,
    delta_p: f64,
    tau: [f64; 2],
    y: [f64; 2],
) -> Result<Eval> {
    let c = cut(lambda, lambda0);
    let tu = 1.0 / (2.0 * lambda * lambda);
    let tree_forest = cfg.lemma == LemmaKind::TfFusion;
    let lhs = integrate_u(
        |u| {
            let a = global(2, 1, vec![y[0], u], vec![tau[0], tu], c, delta, Family::Surface, cfg.cap);
            let fam = if tree_forest { Family::Bulk } else { Family::Surface };
            let b = global(2, 1, vec![y[1], u], vec![tau[1], tu], c, delta_p, fam, cfg.cap);
            match (a, b) {
                (Ok(a), Ok(b)) => a * b,
                _ => f64::NAN,
            }
        },
        &y,
        cfg.u_rel_tol,
    )?;
    let dpp = delta.max(delta_p);
    let g = global(2, 2, y.to_vec(), tau.to_vec(), c, dpp, Family::Surface, cfg.cap)?;
    if tree_forest {
        Ok(Eval { lhs, rhs: g, limit: None, floor: None, extra: vec![] })
    } else {
        Ok(Eval { lhs, rhs: lambda * g, limit: Some(1.0), floor: None, extra: vec![] })
    }
}

/// Collapsed parameters of the three-branch `s = 2` surface tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCollapse {
    pub c1: f64,
    pub c2: f64,
    /// `1/Λ̃₁²`.
    pub inv_lambda_tilde1_sq: f64,
    /// Integrated weight of the tree at the given line scales.
    pub weight: f64,
    /// Single-integral upper bound.
    pub bound: f64,
    /// Number of incidence-two vertices; the sandwich factor is `2^v`.
    pub v: usize,
}

/// Line scales of a three-branch tree: branch `i` carries `internal[i]`
/// internal lines between the branch vertex and its leaf (`y₁`, `y₂`, surface).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchLines {
    pub tau: [f64; 2],
    pub y: [f64; 2],
    /// Internal-line scales on the branches towards `y₁`, `y₂` and the surface.
    pub internal: [Vec<f64>; 3],
    /// Scale of the surface line.
    pub surface: f64,
    pub delta: f64,
}

/// Collapses the internal lines of each branch onto a single effective line
/// and compares the one-vertex bound with the exact tree integral.
pub fn chain_collapse(b: &BranchLines) -> Result<ChainCollapse> {
    if b.tau.iter().any(|t| *t <= 0.0) || b.surface <= 0.0 || b.internal.iter().flatten().any(|x| *x <= 0.0) {
        return Err(Error::Domain("line parameters must be positive".into()));
    }
    if b.internal.iter().map(Vec::len).sum::<usize>() > 3 {
        return Err(Error::Capacity("chain collapse limited to 3 incidence-two vertices".into()));
    }
    let k = 1.0 + b.delta;
    let inv2 = |v: &Vec<f64>| v.iter().map(|x| 1.0 / (x * x)).sum::<f64>();
    let c1 = b.tau[0] + inv2(&b.internal[0]);
    let c2 = b.tau[1] + inv2(&b.internal[1]);
    let it = inv2(&b.internal[2]) + 1.0 / (b.surface * b.surface);
    // exact tree: free vertex 0 is the branch vertex
    let mut lines = Vec::new();
    let mut n_free = 1;
    let leaves = [Node::Fixed(b.y[0]), Node::Fixed(b.y[1]), Node::Fixed(0.0)];
    for br in 0..3 {
        let mut prev = Node::Free(0);
        for s in &b.internal[br] {
            let next = Node::Free(n_free);
            n_free += 1;
            lines.push(Line { a: prev, b: next, variance: k / (s * s) });
            prev = next;
        }
        let variance = if br < 2 { k * b.tau[br] } else { k / (b.surface * b.surface) };
        lines.push(Line { a: prev, b: leaves[br], variance });
    }
    let weight = tree_integral(n_free, &lines);
    let bound = tree_integral(
        1,
        &[
            Line { a: Node::Free(0), b: leaves[0], variance: k * c1 },
            Line { a: Node::Free(0), b: leaves[1], variance: k * c2 },
            Line { a: Node::Free(0), b: leaves[2], variance: k * it },
        ],
    );
    Ok(ChainCollapse { c1, c2, inv_lambda_tilde1_sq: it, weight, bound, v: n_free - 1 })
}

fn chain_sample(rng: &mut ChaCha8Rng, d: &mut Draw) -> Result<Eval> {
    let (lambda, lambda0, delta) = base_scales(rng, d);
    let mut internal: [Vec<f64>; 3] = Default::default();
    let total = rng.random_range(0..=3usize);
    for _ in 0..total {
        internal[rng.random_range(0..3usize)].push(log_uniform(rng, lambda, lambda0));
    }
    for (i, br) in internal.iter().enumerate() {
        d.put(&format!("v{i}"), br.len() as f64);
    }
    let tau = [d.put("tau1", log_uniform(rng, 0.05, 5.0)), d.put("tau2", log_uniform(rng, 0.05, 5.0))];
    // positions on the half-line, where the collapse argument applies
    let y = [d.put("y1", uniform(rng, 0.0, 3.0)), d.put("y2", uniform(rng, 0.0, 3.0))];
    let surface = d.put("lambda_tilde", log_uniform(rng, lambda, lambda0));
    let r = chain_collapse(&BranchLines { tau, y, internal, surface, delta })?;
    Ok(Eval { lhs: r.bound, rhs: r.weight, limit: Some(2f64.powi(r.v as i32)), floor: Some(1.0), extra: vec![] })
}

/// Collapsed bound for a forest of two chains `y_i - z … z - 0` with doubled
/// `τ`: returns `(c̃₁, c̃₂, exact product, bound, v₁ + v₂)`.
pub fn chain_forest_collapse(
    tau: [f64; 2],
    y: [f64; 2],
    internal: [Vec<f64>; 2],
    surface: [f64; 2],
    delta: f64,
) -> Result<(f64, f64, f64, f64, usize)> {
    let k = 1.0 + delta;
    let mut exact = 1.0;
    let mut bound = 1.0;
    let mut ct = [0.0; 2];
    let mut v = 0;
    for i in 0..2 {
        if internal[i].len() + 1 > 4 {
            return Err(Error::Capacity("chain too long".into()));
        }
        // chain: y - z_0 - … - z_n - 0 with `internal` lines between consecutive z
        let n = internal[i].len() + 1;
        let mut lines = vec![Line { a: Node::Fixed(y[i]), b: Node::Free(0), variance: k * 2.0 * tau[i] }];
        for (j, s) in internal[i].iter().enumerate() {
            lines.push(Line { a: Node::Free(j), b: Node::Free(j + 1), variance: k / (s * s) });
        }
        lines.push(Line { a: Node::Free(n - 1), b: Node::Fixed(0.0), variance: k / (surface[i] * surface[i]) });
        exact *= tree_integral(n, &lines);
        ct[i] = 2.0 * tau[i] + internal[i].iter().map(|s| 1.0 / (s * s)).sum::<f64>() + 1.0 / (surface[i] * surface[i]);
        bound *= p_bulk(k * ct[i], y[i], 0.0);
        v += n;
    }
    Ok((ct[0], ct[1], exact, bound, v))
}

fn chain_forest_sample(rng: &mut ChaCha8Rng, d: &mut Draw) -> Result<Eval> {
    let (lambda, lambda0, delta) = base_scales(rng, d);
    let mut internal: [Vec<f64>; 2] = Default::default();
    for (i, chain) in internal.iter_mut().enumerate() {
        let n = rng.random_range(0..=1usize);
        for _ in 0..n {
            chain.push(log_uniform(rng, lambda, lambda0));
        }
        d.put(&format!("v{}", i + 1), (n + 1) as f64);
    }
    let tau = [d.put("tau1", log_uniform(rng, 0.05, 5.0)), d.put("tau2", log_uniform(rng, 0.05, 5.0))];
    let y = [d.put("y1", uniform(rng, 0.0, 3.0)), d.put("y2", uniform(rng, 0.0, 3.0))];
    let surface = [log_uniform(rng, lambda, lambda0), log_uniform(rng, lambda, lambda0)];
    let (_, _, exact, bound, v) = chain_forest_collapse(tau, y, internal, surface, delta)?;
    Ok(Eval { lhs: bound, rhs: exact, limit: Some(2f64.powi(v as i32)), floor: Some(1.0), extra: vec![] })
}

fn testfn6_sample(cfg: &SweepConfig, rng: &mut ChaCha8Rng, d: &mut Draw) -> Result<Eval> {
    let lambda = d.put("lambda", log_uniform(rng, SWEEP_MASS, 10.0 * SWEEP_MASS));
    d.lambda = lambda;
    let lambda0 = d.put("lambda0", (lambda + SWEEP_MASS) * log_uniform(rng, 2.0, 20.0));
    let delta = d.put("delta", uniform(rng, 0.05, 0.5));
    let tau = d.put("tau", log_uniform(rng, 0.05, 5.0));
    let y = d.put("y", uniform(rng, -2.0, 3.0));
    let alpha = d.put("alpha", f64::from(rng.random_range(0..=1u32)));
    let phi = p_bulk(tau, 0.0, y);
    let lhs = if alpha == 0.0 { phi } else { y.abs() / tau * phi };
    let c0 = moment_constant(0.0, delta, alpha as u32)?;
    let g = global(1, cfg.l, vec![y], vec![tau], cut(lambda, lambda0), delta, Family::Surface, cfg.cap)?;
    let rhs = 2f64.sqrt() * c0 * tau.powf(-alpha / 2.0) * (1.0 + tau.powf(-0.5) / (lambda + SWEEP_MASS)) * g;
    // count of points that would still fail with the constant doubled
    let doubled_fail = f64::from(u8::from(lhs > 2.0 * rhs * (1.0 + EXPLICIT_SLACK)));
    Ok(Eval { lhs, rhs, limit: Some(1.0), floor: None, extra: vec![("violations_with_doubled_constant", doubled_fail)] })
}

fn testfn7_sample(cfg: &SweepConfig, rng: &mut ChaCha8Rng, d: &mut Draw) -> Result<Eval> {
    let (lambda, lambda0, delta) = base_scales(rng, d);
    let delta_p = d.put("delta_p", (delta + uniform(rng, 0.05, 0.4)).min(0.95));
    let tau = d.put("tau", log_uniform(rng, 0.05, 5.0));
    let y = d.put("y", uniform(rng, -2.0, 3.0));
    let t = d.put("t", log_uniform(rng, 0.05, 1.0));
    let gamma = d.put("gamma", f64::from(rng.random_range(0..=2u32)));
    let c = cut(lambda, lambda0);
    let g_t = global(1, cfg.l, vec![y / t], vec![tau / (t * t)], c, delta, Family::Surface, cfg.cap)?;
    let g = global(1, cfg.l, vec![y], vec![tau], c, delta_p, Family::Surface, cfg.cap)?;
    let lhs = (y.abs() / tau.sqrt()).powf(gamma) * g_t;
    let rhs = t * (1.0 + tau.powf(-0.5) / lambda).powf(gamma) * g;
    Ok(Eval { lhs, rhs, limit: None, floor: None, extra: vec![] })
}

fn testfn8_sample(cfg: &SweepConfig, rng: &mut ChaCha8Rng, d: &mut Draw) -> Result<Eval> {
    let (lambda, lambda0, delta) = base_scales(rng, d);
    let delta_p = d.put("delta_p", (delta + uniform(rng, 0.05, 0.4)).min(0.95));
    // hypothesis Λ ≥ 3√l τ^{-1/2}
    let tmin = 9.0 * cfg.l as f64 / (lambda * lambda);
    let tau1 = d.put("tau1", tmin * log_uniform(rng, 1.0, 20.0));
    let tau2 = d.put("tau2", tmin * log_uniform(rng, 1.0, 20.0));
    let y1 = d.put("y1", uniform(rng, -2.0, 3.0));
    let y2 = d.put("y2", uniform(rng, -2.0, 3.0));
    let t1 = d.put("t1", log_uniform(rng, 0.1, 1.0));
    let t2 = d.put("t2", log_uniform(rng, 0.1, 1.0));
    let g1 = d.put("gamma1", f64::from(rng.random_range(0..=1u32)));
    let g2 = d.put("gamma2", f64::from(rng.random_range(0..=1u32)));
    let tau = tau1.min(tau2);
    if lambda < 3.0 * (cfg.l as f64).sqrt() / tau.sqrt() * (1.0 - 1e-12) {
        return Err(Error::Precondition("Λ below 3√l τ^{-1/2}".into()));
    }
    let c = cut(lambda, lambda0);
    let gs = global(2, cfg.l, vec![y1 / t1, y2 / t2], vec![tau1 / (t1 * t1), tau2 / (t2 * t2)], c, delta, Family::Surface, cfg.cap)?;
    let g = global(2, cfg.l, vec![y1, y2], vec![tau1, tau2], c, delta_p, Family::Surface, cfg.cap)?;
    let lhs = (y1.abs() / tau1.sqrt()).powf(g1) * (y2.abs() / tau2.sqrt()).powf(g2) * gs;
    // candidate polynomial Q(x) = (1 + x)^{γ₁+γ₂}
    let x = tau.powf(-0.5) / lambda;
    let rhs = t1 * t2 * (1.0 + x).powf(g1 + g2) * g;
    Ok(Eval { lhs, rhs, limit: None, floor: None, extra: vec![] })
}

fn monotonicity_sample(cfg: &SweepConfig, rng: &mut ChaCha8Rng, d: &mut Draw) -> Result<Eval> {
    let (lambda, lambda0, delta) = base_scales(rng, d);
    let lambda_p = d.put("lambda_p", lambda * log_uniform(rng, 0.2, 1.0));
    let delta_p = d.put("delta_p", (delta + uniform(rng, 0.0, 0.4)).min(0.95));
    let s = 2;
    let ys = vec![d.put("y1", uniform(rng, -2.0, 3.0)), d.put("y2", uniform(rng, -2.0, 3.0))];
    let taus = vec![d.put("tau1", log_uniform(rng, 0.05, 5.0)), d.put("tau2", log_uniform(rng, 0.05, 5.0))];
    let at = |lam: f64, del: f64| global(s, cfg.l, ys.clone(), taus.clone(), cut(lam, lambda0), del, Family::Surface, cfg.cap);
    let base = at(lambda, delta)?;
    let wider = at(lambda_p, delta)?;
    let dilated = at(lambda, delta_p)?;
    // Λ-monotonicity within the sup tolerance
    let lambda_fail = f64::from(u8::from(wider < base * (1.0 - LAMBDA_MONOTONICITY_TOL)));
    let lambda_gap = ((base - wider) / base).max(0.0);
    // δ-monotonicity: value at δ over value at δ′ is the recorded constant
    Ok(Eval { lhs: base, rhs: dilated, limit: None, floor: None, extra: vec![("lambda_monotonicity_failures", lambda_fail), ("lambda_monotonicity_worst_gap_sum", lambda_gap)] })
}

/// Reduction sides at large τ: returns `(τ, lhs, rhs)` for `τ ∈ {10³, 10⁴, 10⁵}`.
pub fn reduction_large_tau(cfg: &SweepConfig) -> Result<Vec<(f64, f64, f64)>> {
    let (lambda, lambda0, delta) = (2.0, 20.0, 0.2);
    let c = cut(lambda, lambda0);
    let tu = 1.0 / (2.0 * lambda * lambda);
    let mut out = Vec::new();
    for tau in [1e3, 1e4, 1e5] {
        let ys = vec![0.5; cfg.s as usize];
        let taus = vec![tau; cfg.s as usize];
        let lhs = integrate_u(
            |u| {
                let mut p = ys.clone();
                p.extend([u, u]);
                let mut t = taus.clone();
                t.extend([tu, tu]);
                global(cfg.s + 2, cfg.l - 1, p, t, c, delta, Family::Surface, cfg.cap).unwrap_or(f64::NAN)
            },
            &ys,
            cfg.u_rel_tol,
        )?;
        let rhs = lambda * global(cfg.s, cfg.l, ys.clone(), taus, c, delta, Family::Surface, cfg.cap)?;
        out.push((tau, lhs, rhs));
    }
    Ok(out)
}

/// `∫_{ℝ⁺} p_B(a; z, y) dz`, used by the tests as an elementary reference.
pub fn half_line_mass(a: f64, y: f64) -> Result<f64> {
    Ok(integrate_to_inf(|z| p_bulk(a, z, y), 0.0, a.sqrt(), QuadOptions::default())?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_collapse_without_subdivisions_keeps_tau() {
        let b = BranchLines { tau: [0.7, 1.3], y: [0.4, 1.0], internal: Default::default(), surface: 3.0, delta: 0.2 };
        let r = chain_collapse(&b).unwrap();
        assert_eq!(r.c1, 0.7);
        assert_eq!(r.c2, 1.3);
        assert_eq!(r.v, 0);
        assert!((r.bound / r.weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_collapse_sandwich_with_subdivisions() {
        let b = BranchLines {
            tau: [0.3, 0.9],
            y: [0.5, 2.0],
            internal: [vec![2.0], vec![], vec![4.0, 1.5]],
            surface: 5.0,
            delta: 0.3,
        };
        let r = chain_collapse(&b).unwrap();
        assert_eq!(r.v, 3);
        assert!(r.weight <= r.bound && r.bound <= 8.0 * r.weight);
    }

    #[test]
    fn forest_variant_bound_is_gaussian_product() {
        let (c1, c2, exact, bound, v) =
            chain_forest_collapse([0.5, 0.2], [1.0, 0.3], [vec![], vec![3.0]], [2.0, 4.0], 0.1).unwrap();
        assert!((c1 - (1.0 + 0.25)).abs() < 1e-15);
        assert!((c2 - (0.4 + 1.0 / 9.0 + 1.0 / 16.0)).abs() < 1e-15);
        assert_eq!(v, 3);
        assert!(exact <= bound && bound <= 8.0 * exact);
    }

    #[test]
    fn sweeps_are_deterministic() {
        let cfg = SweepConfig::new(LemmaKind::Chain, 20, 7);
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.violations, 0);
    }

    #[test]
    fn ff_fusion_symmetric_in_swapped_inputs() {
        let cfg = SweepConfig::new(LemmaKind::FfFusion, 1, 0);
        let a = fusion_eval(&cfg, 2.0, 10.0, 0.2, 0.2, [0.5, 0.8], [0.3, 1.1]).unwrap();
        let b = fusion_eval(&cfg, 2.0, 10.0, 0.2, 0.2, [0.8, 0.5], [1.1, 0.3]).unwrap();
        assert!((a.lhs / b.lhs - 1.0).abs() < 1e-4, "{} {}", a.lhs, b.lhs);
        assert!((a.rhs / b.rhs - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reduction_precondition() {
        let mut cfg = SweepConfig::new(LemmaKind::Reduction, 1, 0);
        cfg.l = 3;
        assert!(matches!(run_sweep(&cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn half_line_mass_matches_cdf() {
        let m = half_line_mass(0.5, 0.3).unwrap();
        assert!((m - crate::special::norm_cdf(0.3 / 0.5f64.sqrt())).abs() < 1e-12);
    }
}

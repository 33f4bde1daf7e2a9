//! Tree and forest weight factors: products of heat kernels over the lines of
//! a structure, their integrated versions (sup over line scales of the
//! integral over internal positions) and the global sums over all trees and
//! forests of a given order.

pub mod gauss;
pub mod lemmas;

use crate::error::{domain, Error, Result};
use crate::forests::{
    enumerate_partitions, enumerate_rooted_trees, surface_trees_on, Forest, Role, Structure, Tree, TreeKind,
};
use crate::kernels::p_bulk;
use crate::propagators::CutoffPair;
use crate::quad::{integrate_to_inf, QuadOptions};
use gauss::{log_tree_integral_with, Line, Node};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub use lemmas::*;

/// Largest number of internal vertices a single tree may carry in a weight
/// evaluation.
pub const MAX_INTERNAL: usize = 8;
/// Relative gap between the endpoint and refined sup above which the search
/// is logged.
pub const SUP_LOG_THRESHOLD: f64 = 0.01;
const SUP_GRID: usize = 16;
const GOLDEN_ITERS: usize = 12;

/// Line parameters of a structure. Lines are numbered by edge index, running
/// consecutively over the trees of a forest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LineParams {
    pub internal: BTreeMap<usize, f64>,
    pub external: BTreeMap<usize, f64>,
    pub surface: BTreeMap<usize, f64>,
    pub delta: f64,
}

/// External data of a weight evaluation. `positions[i]` and `tau[i]` belong to
/// label `i + 1`; for rooted trees label 1 is the root `z₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightQuery {
    pub positions: Vec<f64>,
    pub tau: Vec<f64>,
    pub cut: CutoffPair,
    pub delta: f64,
}

impl WeightQuery {
    pub fn new(positions: Vec<f64>, tau: Vec<f64>, cut: CutoffPair, delta: f64) -> Result<Self> {
        let q = WeightQuery { positions, tau, cut, delta };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        self.cut.validate()?;
        if self.cut.lambda <= 0.0 {
            return domain("weight factors need Λ > 0");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return domain(format!("δ must lie in (0,1), got {}", self.delta));
        }
        if self.tau.len() != self.positions.len() {
            return domain("positions and tau must have the same length");
        }
        if self.tau.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return domain("all τ must be positive and finite");
        }
        if self.positions.iter().any(|y| !y.is_finite()) {
            return domain("positions must be finite");
        }
        Ok(())
    }

    fn position(&self, label: u32) -> Result<f64> {
        self.positions
            .get(label as usize - 1)
            .copied()
            .ok_or_else(|| Error::Domain(format!("no position for label {label}")))
    }

    fn tau_of(&self, label: u32) -> Result<f64> {
        self.tau.get(label as usize - 1).copied().ok_or_else(|| Error::Domain(format!("no τ for label {label}")))
    }
}

/// Classification of a tree line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineKind {
    Internal,
    External,
    Surface,
}

/// Class of edge `(a, b)`: lines touching an external vertex are external,
/// lines touching the surface vertex are surface lines, all others internal.
pub fn line_kind(t: &Tree, edge: usize) -> LineKind {
    let (a, b) = t.edges[edge];
    let ext = |v: usize| matches!(t.roles[v], Role::External { .. });
    if ext(a) || ext(b) {
        LineKind::External
    } else if t.roles[a] == Role::Surface || t.roles[b] == Role::Surface {
        LineKind::Surface
    } else {
        LineKind::Internal
    }
}

fn external_label(t: &Tree, edge: usize) -> u32 {
    let (a, b) = t.edges[edge];
    match (t.roles[a], t.roles[b]) {
        (Role::External { label }, _) | (_, Role::External { label }) => label,
        _ => unreachable!("edge is not external"),
    }
}

/// A tree prepared for repeated Gaussian evaluation: fixed lines carry their
/// variance, scale lines are indexed into the parameter vector.
#[derive(Debug, Clone)]
struct Model {
    n_free: usize,
    lines: Vec<Line>,
    /// Parameter index of each line whose variance is `(1+δ)/Λ²`.
    param: Vec<Option<usize>>,
    n_params: usize,
    delta: f64,
}

impl Model {
    /// `root_free` integrates the root position over ℝ⁺ instead of fixing it.
    fn new(t: &Tree, q: &WeightQuery, doubled: bool, root_free: bool) -> Result<Model> {
        let mut free_index = vec![usize::MAX; t.n_vertices()];
        let mut n_free = 0;
        for (v, r) in t.roles.iter().enumerate() {
            if *r == Role::Internal || (*r == Role::Root && root_free) {
                free_index[v] = n_free;
                n_free += 1;
            }
        }
        if n_free > MAX_INTERNAL {
            return Err(Error::Capacity(format!("{n_free} internal vertices exceed the cap {MAX_INTERNAL}")));
        }
        let node = |v: usize| -> Result<Node> {
            Ok(match t.roles[v] {
                Role::Internal => Node::Free(free_index[v]),
                Role::Root if root_free => Node::Free(free_index[v]),
                Role::Root => Node::Fixed(q.position(1)?),
                Role::Surface => Node::Fixed(0.0),
                Role::External { label } => Node::Fixed(q.position(label)?),
            })
        };
        let factor = if doubled { 2.0 } else { 1.0 };
        let mut lines = Vec::new();
        let mut param = Vec::new();
        let mut n_params = 0;
        for (e, &(a, b)) in t.edges.iter().enumerate() {
            let variance = match line_kind(t, e) {
                LineKind::External => {
                    param.push(None);
                    (1.0 + q.delta) * factor * q.tau_of(external_label(t, e))?
                }
                _ => {
                    param.push(Some(n_params));
                    n_params += 1;
                    f64::NAN
                }
            };
            lines.push(Line { a: node(a)?, b: node(b)?, variance });
        }
        Ok(Model { n_free, lines, param, n_params, delta: q.delta })
    }

    fn log_value(&self, scales: &[f64]) -> f64 {
        let k = 1.0 + self.delta;
        log_tree_integral_with(
            self.n_free,
            self.lines.iter().zip(&self.param).map(|(l, p)| match p {
                Some(j) => (l.a, l.b, k / (scales[*j] * scales[*j])),
                None => (l.a, l.b, l.variance),
            }),
        )
    }
}

/// Result of a sup search over line scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    pub value: f64,
    pub scales: Vec<f64>,
    /// Best value found among the two all-equal endpoint assignments.
    pub endpoint_value: f64,
    /// True when the refined sup exceeds the endpoint value by more than 1%.
    pub logged: bool,
}

/// Endpoint-first sup of `f` (a log value) over `n` scales in `[lo, hi]`: the
/// two all-equal endpoints, a common log grid, then one coordinate pass.
pub fn sup_search(n: usize, lo: f64, hi: f64, f: impl Fn(&[f64]) -> f64) -> SupResult {
    if n == 0 {
        let v = f(&[]).exp();
        return SupResult { value: v, scales: vec![], endpoint_value: v, logged: false };
    }
    let grid: Vec<f64> = if hi > lo {
        (0..SUP_GRID).map(|k| lo * (hi / lo).powf(k as f64 / (SUP_GRID - 1) as f64)).collect()
    } else {
        vec![lo]
    };
    let mut best = vec![lo; n];
    let mut best_v = f(&best);
    let top = vec![hi; n];
    let tv = f(&top);
    if tv > best_v {
        best = top;
        best_v = tv;
    }
    let endpoint = best_v;
    for &g in &grid {
        let x = vec![g; n];
        let v = f(&x);
        if v > best_v {
            best = x;
            best_v = v;
        }
    }
    if n > 1 {
        for j in 0..n {
            let mut x = best.clone();
            for &g in &grid {
                x[j] = g;
                let v = f(&x);
                if v > best_v {
                    best_v = v;
                    best[j] = g;
                }
            }
        }
    }
    // golden-section refinement of each coordinate in log scale around the grid optimum
    if grid.len() > 1 {
        let step = (hi / lo).ln() / (SUP_GRID - 1) as f64;
        for j in 0..n {
            let c = best[j].ln();
            let (mut a, mut b) = ((c - step).max(lo.ln()), (c + step).min(hi.ln()));
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut x = best.clone();
            let eval = |t: f64, x: &mut Vec<f64>| {
                x[j] = t.exp();
                f(x)
            };
            let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
            let (mut f1, mut f2) = (eval(x1, &mut x), eval(x2, &mut x));
            for _ in 0..GOLDEN_ITERS {
                if f1 > f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - g * (b - a);
                    f1 = eval(x1, &mut x);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + g * (b - a);
                    f2 = eval(x2, &mut x);
                }
            }
            let (t, v) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
            if v > best_v {
                best_v = v;
                best[j] = t.exp();
            }
        }
    }
    let value = best_v.exp();
    let endpoint_value = endpoint.exp();
    let logged = value > 0.0 && (value - endpoint_value) / value > SUP_LOG_THRESHOLD;
    SupResult { value, scales: best, endpoint_value, logged }
}

fn tree_sup(t: &Tree, q: &WeightQuery, doubled: bool) -> Result<SupResult> {
    let m = Model::new(t, q, doubled, false)?;
    Ok(sup_search(m.n_params, q.cut.lambda, q.cut.lambda0, |x| m.log_value(x)))
}

/// Integrated weight factor of a tree or forest: sup over all line scales in
/// `[Λ, Λ₀]` of the integral over internal positions in ℝ⁺. Trees of a forest
/// sitting in singleton blocks use doubled `τ`.
pub fn integrated_weight_factor(structure: &Structure, q: &WeightQuery) -> Result<f64> {
    q.validate()?;
    structure.validate()?;
    Ok(integrated_detail(structure, q)?.iter().map(|r| r.value).product())
}

/// Per-tree sup results of [`integrated_weight_factor`].
pub fn integrated_detail(structure: &Structure, q: &WeightQuery) -> Result<Vec<SupResult>> {
    match structure {
        Structure::Tree(t) => {
            if t.kind == TreeKind::Rooted && t.edges.is_empty() {
                return Ok(vec![SupResult { value: 1.0, scales: vec![], endpoint_value: 1.0, logged: false }]);
            }
            Ok(vec![tree_sup(t, q, false)?])
        }
        Structure::Forest(f) => f.trees.iter().map(|t| tree_sup(t, q, t.externals().len() == 1)).collect(),
    }
}

/// Pointwise weight factor of a structure at given line parameters and
/// internal positions (internal vertices in vertex order, trees concatenated).
pub fn weight_factor(structure: &Structure, lines: &LineParams, q: &WeightQuery, internal_positions: &[f64]) -> Result<f64> {
    let trees: Vec<(&Tree, bool)> = match structure {
        Structure::Tree(t) => vec![(t, false)],
        Structure::Forest(f) => f.trees.iter().map(|t| (t, t.externals().len() == 1)).collect(),
    };
    let d = lines.delta;
    if !(d > 0.0 && d < 1.0) {
        return domain("δ must lie in (0,1)");
    }
    let (lo, hi) = (q.cut.lambda, q.cut.lambda0);
    let mut offset = 0;
    let mut pos_idx = 0;
    let mut value = 1.0;
    for (t, doubled) in trees {
        let mut pos = vec![f64::NAN; t.n_vertices()];
        for (v, r) in t.roles.iter().enumerate() {
            pos[v] = match r {
                Role::Internal => {
                    let p = *internal_positions
                        .get(pos_idx)
                        .ok_or_else(|| Error::Domain("missing internal position".into()))?;
                    pos_idx += 1;
                    p
                }
                Role::Surface => 0.0,
                Role::Root => q.position(1)?,
                Role::External { label } => q.position(*label)?,
            };
        }
        for (e, &(a, b)) in t.edges.iter().enumerate() {
            let id = offset + e;
            let missing = || Error::Domain(format!("missing parameter for line {id}"));
            let var = match line_kind(t, e) {
                LineKind::External => {
                    let tau = *lines.external.get(&id).ok_or_else(missing)?;
                    if tau <= 0.0 {
                        return domain("τ must be positive");
                    }
                    (1.0 + d) * tau * if doubled { 2.0 } else { 1.0 }
                }
                kind => {
                    let map = if kind == LineKind::Internal { &lines.internal } else { &lines.surface };
                    let s = *map.get(&id).ok_or_else(missing)?;
                    if !(s >= lo * (1.0 - 1e-12) && s <= hi * (1.0 + 1e-12)) {
                        return domain(format!("line scale {s} outside [{lo}, {hi}]"));
                    }
                    (1.0 + d) / (s * s)
                }
            };
            value *= p_bulk(var, pos[a], pos[b]);
        }
        offset += t.edges.len();
    }
    Ok(value)
}

/// Tree family of a global weight factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Sum over forests of surface trees.
    Surface,
    /// Sum over rooted trees with the root fixed at `positions[0]`.
    Rooted,
    /// Rooted sum integrated against a bulk leg `p_B(τ₁; z₁, y₁)` over `z₁ ∈ ℝ⁺`.
    Bulk,
}

/// Default internal-vertex cap for global sums.
pub const GLOBAL_CAP: usize = 3;

/// Global weight factor: the sum of integrated weight factors over the
/// enumerated tree or forest set with at most `cap` internal vertices per tree.
pub fn global_weight_factor(s: u32, l: u32, q: &WeightQuery, family: Family, cap: usize) -> Result<f64> {
    q.validate()?;
    if s > 4 || l > 3 {
        return Err(Error::Capacity(format!("global weight factor limited to s <= 4, l <= 3 (got s={s}, l={l})")));
    }
    if cap > MAX_INTERNAL {
        return Err(Error::Capacity(format!("cap {cap} exceeds {MAX_INTERNAL}")));
    }
    if (q.positions.len() as u32) < s {
        return domain("query has fewer positions than s");
    }
    match family {
        Family::Surface => {
            if s == 0 {
                return Ok(1.0);
            }
            let mut total = 0.0;
            let mut cache: BTreeMap<(Vec<u32>, bool), f64> = BTreeMap::new();
            for p in enumerate_partitions(s)? {
                let mut prod = 1.0;
                for b in &p.blocks {
                    let doubled = b.len() == 1;
                    let key = (b.clone(), doubled);
                    let v = match cache.get(&key) {
                        Some(v) => *v,
                        None => {
                            let mut sum = 0.0;
                            for t in surface_trees_on(b, l, cap)? {
                                sum += tree_sup(&t, q, doubled)?.value;
                            }
                            cache.insert(key, sum);
                            sum
                        }
                    };
                    prod *= v;
                }
                total += prod;
            }
            Ok(total)
        }
        Family::Rooted => {
            if s <= 1 {
                return Ok(1.0);
            }
            let mut sum = 0.0;
            for t in enumerate_rooted_trees(s, l, cap)? {
                sum += tree_sup(&t, q, false)?.value;
            }
            Ok(sum)
        }
        Family::Bulk => {
            let y1 = q.position(1)?;
            let tau1 = q.tau_of(1)?;
            let mut sum = 0.0;
            let trees = if s <= 1 { vec![] } else { enumerate_rooted_trees(s, l, cap)? };
            if s <= 1 {
                // 𝔉 ≡ 1: the bulk leg alone integrated over the half-line
                return Ok(crate::special::norm_cdf(y1 / tau1.sqrt()));
            }
            for t in trees {
                sum += bulk_tree_value(&t, q, y1, tau1)?;
            }
            Ok(sum)
        }
    }
}

/// `∫_{ℝ⁺} dz₁ p_B(τ₁; z₁, y₁) sup_scales ∫ F(z₁, …)`.
fn bulk_tree_value(t: &Tree, q: &WeightQuery, y1: f64, tau1: f64) -> Result<f64> {
    let inner = |z1: f64| -> f64 {
        let mut qq = q.clone();
        qq.positions[0] = z1;
        match tree_sup(t, &qq, false) {
            Ok(r) => p_bulk(tau1, z1, y1) * r.value,
            Err(_) => f64::NAN,
        }
    };
    let scale = tau1.sqrt().max(1.0 / q.cut.lambda0);
    let r = integrate_to_inf(inner, 0.0, scale, QuadOptions { abs_tol: 1e-300, rel_tol: 1e-4, max_intervals: 2000 })?;
    if !r.value.is_finite() {
        return Err(Error::Numerical("bulk tree integral not finite".into()));
    }
    Ok(r.value)
}

/// Forest weight as the product over its trees; exposed for the
/// multiplicativity property.
pub fn forest_tree_values(f: &Forest, q: &WeightQuery) -> Result<Vec<f64>> {
    f.trees.iter().map(|t| tree_sup(t, q, t.externals().len() == 1).map(|r| r.value)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forests::{enumerate_surface_trees, Partition};
    use crate::quad::integrate_log;

    fn query(pos: Vec<f64>, tau: Vec<f64>, lambda: f64, lambda0: f64, delta: f64) -> WeightQuery {
        WeightQuery::new(pos, tau, CutoffPair::new(lambda, lambda0).unwrap(), delta).unwrap()
    }

    fn chain_s1() -> Tree {
        enumerate_surface_trees(1, 1, 1).unwrap().remove(0)
    }

    #[test]
    fn chain_integrated_matches_dense_scan() {
        // τ₁=1, y₁=0.5, Λ=1, Λ₀=10, δ=0.1
        let q = query(vec![0.5], vec![1.0], 1.0, 10.0, 0.1);
        let t = chain_s1();
        let got = integrated_weight_factor(&Structure::Tree(t), &q).unwrap();
        let mut best: f64 = 0.0;
        for k in 0..=4000 {
            let lt = 10f64.powf(k as f64 / 4000.0);
            let v = integrate_to_inf(
                |z| p_bulk(1.1, z, 0.5) * p_bulk(1.1 / (lt * lt), z, 0.0),
                0.0,
                0.3,
                QuadOptions::tol(1e-15, 1e-12),
            )
            .unwrap()
            .value;
            best = best.max(v);
        }
        assert!(got >= best * (1.0 - 1e-12) && got / best - 1.0 < 1e-6, "{got} {best}");
        assert!((got - 0.18262834719028230).abs() < 1e-9, "{got}");
    }

    #[test]
    fn pointwise_weight_is_product_of_kernels() {
        let t = chain_s1();
        let q = query(vec![0.7], vec![0.4], 1.0, 10.0, 0.2);
        let mut lines = LineParams { delta: 0.2, ..Default::default() };
        for e in 0..t.edges.len() {
            match line_kind(&t, e) {
                LineKind::External => lines.external.insert(e, 0.4),
                LineKind::Surface => lines.surface.insert(e, 3.0),
                LineKind::Internal => lines.internal.insert(e, 2.0),
            };
        }
        let v = weight_factor(&Structure::Tree(t), &lines, &q, &[0.3]).unwrap();
        let expect = p_bulk(1.2 * 0.4, 0.3, 0.7) * p_bulk(1.2 / 9.0, 0.3, 0.0);
        assert!((v / expect - 1.0).abs() < 1e-14);
        let err = weight_factor(&Structure::Tree(chain_s1()), &LineParams { delta: 0.2, ..Default::default() }, &q, &[0.3]);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn global_trivial_cases() {
        let q = query(vec![0.3, 1.0], vec![0.5, 0.7], 1.0, 5.0, 0.1);
        assert_eq!(global_weight_factor(0, 1, &q, Family::Surface, 3).unwrap(), 1.0);
        assert_eq!(global_weight_factor(1, 1, &q, Family::Rooted, 3).unwrap(), 1.0);
    }

    #[test]
    fn global_s2_decomposes_into_trees_plus_chains() {
        let q = query(vec![0.3, 1.0], vec![0.5, 0.7], 1.0, 5.0, 0.1);
        let l = 1;
        let g = global_weight_factor(2, l, &q, Family::Surface, 2).unwrap();
        let mut trees = 0.0;
        for t in enumerate_surface_trees(2, l, 2).unwrap() {
            trees += tree_sup(&t, &q, false).unwrap().value;
        }
        let chains = |label: u32| -> f64 {
            surface_trees_on(&[label], l, 2).unwrap().iter().map(|t| tree_sup(t, &q, true).unwrap().value).sum()
        };
        let expect = trees + chains(1) * chains(2);
        assert!((g / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forest_weight_is_product_over_trees() {
        let q = query(vec![0.3, 1.0, 0.2], vec![0.5, 0.7, 1.1], 1.0, 5.0, 0.1);
        let p = Partition::new(3, vec![vec![1, 3], vec![2]]).unwrap();
        let f = crate::forests::enumerate_forests(&p, 1, 2).unwrap().remove(1);
        let whole = integrated_weight_factor(&Structure::Forest(f.clone()), &q).unwrap();
        let parts: f64 = forest_tree_values(&f, &q).unwrap().iter().product();
        assert!((whole - parts).abs() <= 1e-12 * whole);
    }

    #[test]
    fn lambda_monotonicity_of_chain() {
        let t = Structure::Tree(chain_s1());
        let hi = integrated_weight_factor(&t, &query(vec![0.5], vec![1.0], 0.5, 10.0, 0.1)).unwrap();
        let lo = integrated_weight_factor(&t, &query(vec![0.5], vec![1.0], 2.0, 10.0, 0.1)).unwrap();
        assert!(hi >= lo * (1.0 - 1e-9), "{hi} {lo}");
    }

    #[test]
    fn bulk_family_with_direct_root_line() {
        // with no internal vertex allowed, the only s=2 rooted tree joins the root to label 2
        let q = query(vec![0.4, 0.9], vec![0.6, 0.3], 1.0, 4.0, 0.2);
        let g = global_weight_factor(2, 1, &q, Family::Bulk, 0).unwrap();
        let exact = integrate_log(|z| p_bulk(0.6, z, 0.4) * p_bulk(1.2 * 0.3, z, 0.9), 1e-12, 40.0, QuadOptions::default())
            .unwrap()
            .value;
        assert!((g / exact - 1.0).abs() < 1e-6, "{g} {exact}");
    }
}

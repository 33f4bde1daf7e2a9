//! Set partitions, surface/rooted/bulk trees and forests, with the reduction
//! and merging operators and the incidence-number bookkeeping.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Partition of `σ_s = {1..s}` in canonical form: blocks sorted internally and
/// ordered by their smallest element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    pub ground_size: u32,
    pub blocks: Vec<Vec<u32>>,
}

impl Partition {
    /// Builds and canonicalizes; fails unless the blocks partition `{1..s}`.
    pub fn new(ground_size: u32, mut blocks: Vec<Vec<u32>>) -> Result<Self> {
        for b in blocks.iter_mut() {
            b.sort_unstable();
        }
        blocks.sort();
        let p = Partition { ground_size, blocks };
        p.validate()?;
        Ok(p)
    }

    pub fn trivial(s: u32) -> Self {
        Partition { ground_size: s, blocks: vec![(1..=s).collect()] }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for b in &self.blocks {
            if b.is_empty() {
                return Err(Error::Invariant("empty block".into()));
            }
            for &x in b {
                if x == 0 || x > self.ground_size || !seen.insert(x) {
                    return Err(Error::Invariant(format!("element {x} repeated or outside 1..={}", self.ground_size)));
                }
            }
        }
        if seen.len() as u32 != self.ground_size {
            return Err(Error::Invariant("blocks do not cover the ground set".into()));
        }
        let mut canon = self.blocks.clone();
        for b in canon.iter_mut() {
            b.sort_unstable();
        }
        canon.sort();
        if canon != self.blocks {
            return Err(Error::Invariant("partition not in canonical order".into()));
        }
        Ok(())
    }

    pub fn block_of(&self, x: u32) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(&x))
    }

    /// Applies a label map and re-canonicalizes.
    pub fn relabel(&self, f: impl Fn(u32) -> u32) -> Result<Self> {
        Partition::new(self.ground_size, self.blocks.iter().map(|b| b.iter().map(|&x| f(x)).collect()).collect())
    }
}

/// All set partitions of `{1..s}` in restricted-growth order.
pub fn enumerate_partitions(s: u32) -> Result<Vec<Partition>> {
    if s == 0 {
        return Err(Error::Domain("partitions of the empty ground set are not enumerated".into()));
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; s as usize];
    fn rec(i: usize, max: usize, rgs: &mut Vec<usize>, out: &mut Vec<Partition>, s: u32) {
        if i == rgs.len() {
            let nb = rgs.iter().max().map_or(0, |m| m + 1);
            let mut blocks = vec![Vec::new(); nb];
            for (k, &b) in rgs.iter().enumerate() {
                blocks[b].push(k as u32 + 1);
            }
            out.push(Partition { ground_size: s, blocks });
            return;
        }
        for b in 0..=max {
            rgs[i] = b;
            rec(i + 1, max.max(b + 1), rgs, out, s);
        }
    }
    rgs[0] = 0;
    rec(1, 1, &mut rgs, &mut out, s);
    Ok(out)
}

/// Drops `s+1` and `s+2` from a partition of `σ_{s+2}`, discarding emptied blocks.
pub fn reduce_partition(p: &Partition) -> Result<Partition> {
    p.validate()?;
    if p.ground_size < 3 {
        return Err(Error::Domain(format!("reduction needs s >= 1, got ground size {}", p.ground_size)));
    }
    let s = p.ground_size - 2;
    let blocks: Vec<Vec<u32>> = p
        .blocks
        .iter()
        .map(|b| b.iter().copied().filter(|&x| x <= s).collect::<Vec<_>>())
        .filter(|b| !b.is_empty())
        .collect();
    Partition::new(s, blocks)
}

/// Role of a tree vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "lowercase")]
pub enum Role {
    External { label: u32 },
    Surface,
    Internal,
    Root,
}

/// Tree family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    /// External leaves plus one surface leaf `0`.
    Surface,
    /// External leaves plus a distinguished root vertex `z₁`.
    Rooted,
    /// External leaves only.
    Bulk,
}

/// A tree with labelled external vertices and anonymous internal vertices.
/// Vertices are indexed by position in `roles`; `l` is the loop budget carried
/// as metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tree {
    pub kind: TreeKind,
    pub l: u32,
    pub roles: Vec<Role>,
    pub edges: Vec<(usize, usize)>,
}

pub type SurfaceTree = Tree;
pub type RootedTree = Tree;
pub type BulkTree = Tree;

/// Largest admissible `v₂` (or `v₂ + δ_{c₁,1}` for rooted trees) at loop order
/// `l` with `s` external points; `None` encodes `v₂ = 0` at `l = 0`.
pub fn v2_bound(l: u32, s: u32) -> Option<f64> {
    if l == 0 {
        None
    } else {
        Some(3.0 * l as f64 - 2.0 + s as f64 / 2.0)
    }
}

fn within_bound(count: usize, l: u32, s: u32) -> bool {
    match v2_bound(l, s) {
        None => count == 0,
        Some(b) => count as f64 <= b,
    }
}

impl Tree {
    pub fn n_vertices(&self) -> usize {
        self.roles.len()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.roles.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.roles.len()];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    /// Sorted external labels.
    pub fn externals(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .roles
            .iter()
            .filter_map(|r| if let Role::External { label } = r { Some(*label) } else { None })
            .collect();
        v.sort_unstable();
        v
    }

    pub fn vertex_of_label(&self, label: u32) -> Option<usize> {
        self.roles.iter().position(|r| *r == Role::External { label })
    }

    pub fn surface_vertex(&self) -> Option<usize> {
        self.roles.iter().position(|r| *r == Role::Surface)
    }

    pub fn root_vertex(&self) -> Option<usize> {
        self.roles.iter().position(|r| *r == Role::Root)
    }

    pub fn internal_vertices(&self) -> Vec<usize> {
        (0..self.roles.len()).filter(|&v| self.roles[v] == Role::Internal).collect()
    }

    pub fn internal_count(&self) -> usize {
        self.roles.iter().filter(|r| **r == Role::Internal).count()
    }

    /// Number of external points `s`; the root of a rooted tree counts as one.
    pub fn s(&self) -> u32 {
        self.externals().len() as u32 + u32::from(self.kind == TreeKind::Rooted)
    }

    /// Number of internal vertices of incidence two.
    pub fn v2(&self) -> usize {
        let d = self.degrees();
        (0..self.roles.len()).filter(|&v| self.roles[v] == Role::Internal && d[v] == 2).count()
    }

    /// Quantity constrained by the loop budget: `v₂`, plus `δ_{c₁,1}` for rooted trees.
    pub fn constrained_count(&self) -> usize {
        let extra = match (self.kind, self.root_vertex()) {
            (TreeKind::Rooted, Some(r)) => usize::from(self.degrees()[r] == 1),
            _ => 0,
        };
        self.v2() + extra
    }

    /// Structural checks independent of the loop budget.
    pub fn validate_structure(&self) -> Result<()> {
        let n = self.roles.len();
        let bad = |m: String| Err(Error::Invariant(m));
        for &(a, b) in &self.edges {
            if a >= n || b >= n || a == b {
                return bad(format!("edge ({a}, {b}) invalid for {n} vertices"));
            }
        }
        if n == 0 {
            return bad("empty tree".into());
        }
        if self.edges.len() + 1 != n {
            return bad(format!("{} edges for {n} vertices", self.edges.len()));
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("tree is not connected".into());
        }
        let deg = self.degrees();
        let mut labels = BTreeSet::new();
        let (mut n_surface, mut n_root) = (0, 0);
        for (v, r) in self.roles.iter().enumerate() {
            match r {
                Role::External { label } => {
                    if !labels.insert(*label) {
                        return bad(format!("external label {label} repeated"));
                    }
                    if deg[v] != 1 {
                        return bad(format!("external vertex y{label} has incidence {}", deg[v]));
                    }
                }
                Role::Surface => {
                    n_surface += 1;
                    if deg[v] != 1 {
                        return bad(format!("surface vertex has incidence {}", deg[v]));
                    }
                }
                Role::Root => {
                    n_root += 1;
                    if n > 1 && deg[v] == 0 {
                        return bad("isolated root".into());
                    }
                }
                Role::Internal => {
                    if deg[v] < 2 {
                        return bad(format!("internal vertex {v} has incidence {}", deg[v]));
                    }
                }
            }
        }
        let (want_surface, want_root) = match self.kind {
            TreeKind::Surface => (1, 0),
            TreeKind::Rooted => (0, 1),
            TreeKind::Bulk => (0, 0),
        };
        if n_surface != want_surface || n_root != want_root {
            return bad(format!("{:?} tree with {n_surface} surface and {n_root} root vertices", self.kind));
        }
        if self.kind != TreeKind::Rooted && self.internal_count() == 0 {
            return bad("tree without internal vertices".into());
        }
        Ok(())
    }

    /// Full membership check: structure plus the incidence bound at budget `l`.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        let count = self.constrained_count();
        if !within_bound(count, self.l, self.s()) {
            return Err(Error::Invariant(format!(
                "v2 count {count} exceeds the bound at l={}, s={}",
                self.l,
                self.s()
            )));
        }
        Ok(())
    }

    fn anchor(&self) -> usize {
        match self.kind {
            TreeKind::Surface => self.surface_vertex().unwrap_or(0),
            TreeKind::Rooted => self.root_vertex().unwrap_or(0),
            TreeKind::Bulk => self
                .roles
                .iter()
                .enumerate()
                .filter_map(|(v, r)| if let Role::External { label } = r { Some((*label, v)) } else { None })
                .min()
                .map_or(0, |t| t.1),
        }
    }

    /// Canonical string: nested sorted child codes from the anchor vertex
    /// (surface, root, or smallest external label). Equal strings mean
    /// isomorphic trees with identical external labelling.
    pub fn canonical(&self) -> String {
        let adj = self.adjacency();
        fn code(t: &Tree, adj: &[Vec<usize>], v: usize, parent: usize) -> String {
            let mut kids: Vec<String> = adj[v].iter().filter(|&&w| w != parent).map(|&w| code(t, adj, w, v)).collect();
            kids.sort();
            let head = match t.roles[v] {
                Role::External { label } => format!("y{label}"),
                Role::Surface => "s".to_string(),
                Role::Root => "r".to_string(),
                Role::Internal => "z".to_string(),
            };
            if kids.is_empty() {
                head
            } else {
                format!("{head}({})", kids.join(","))
            }
        }
        let a = self.anchor();
        format!("{:?}:{}", self.kind, code(self, &adj, a, usize::MAX))
    }

    /// Removes vertex set `dead` and renumbers.
    fn without(&self, dead: &[bool]) -> Tree {
        let mut map = vec![usize::MAX; self.roles.len()];
        let mut roles = Vec::new();
        for (v, r) in self.roles.iter().enumerate() {
            if !dead[v] {
                map[v] = roles.len();
                roles.push(*r);
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|(a, b)| !dead[*a] && !dead[*b])
            .map(|&(a, b)| (map[a], map[b]))
            .collect();
        Tree { kind: self.kind, l: self.l, roles, edges }
    }

    /// Removes the leg at external `label` and prunes internal vertices whose
    /// incidence drops to one. Returns `None` when nothing but the anchor
    /// remains.
    pub fn cut_leg(&self, label: u32) -> Result<Option<Tree>> {
        let v = self
            .vertex_of_label(label)
            .ok_or_else(|| Error::Domain(format!("label {label} is not external in this tree")))?;
        let mut dead = vec![false; self.roles.len()];
        let adj = self.adjacency();
        let mut deg = self.degrees();
        dead[v] = true;
        let mut cur = v;
        loop {
            let next = adj[cur].iter().copied().find(|&w| !dead[w]);
            let Some(w) = next else { break };
            deg[w] -= 1;
            if self.roles[w] == Role::Internal && deg[w] <= 1 {
                dead[w] = true;
                cur = w;
            } else {
                break;
            }
        }
        let t = self.without(&dead);
        if t.externals().is_empty() {
            return Ok(None);
        }
        Ok(Some(t))
    }

    /// Applies a map to external labels.
    pub fn relabel(&self, f: impl Fn(u32) -> u32) -> Tree {
        let mut t = self.clone();
        for r in t.roles.iter_mut() {
            if let Role::External { label } = r {
                *label = f(*label);
            }
        }
        t
    }

    pub fn with_l(mut self, l: u32) -> Tree {
        self.l = l;
        self
    }
}

/// Family of trees indexed by the blocks of a partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Forest {
    pub l: u32,
    pub partition: Partition,
    /// `trees[i]` carries exactly the labels of `partition.blocks[i]`.
    pub trees: Vec<SurfaceTree>,
}

impl Forest {
    pub fn new(l: u32, partition: Partition, trees: Vec<SurfaceTree>) -> Result<Self> {
        let f = Forest::assemble(l, partition, trees)?;
        f.validate()?;
        Ok(f)
    }

    /// Sorts trees to follow the canonical block order, without validation.
    fn assemble(l: u32, partition: Partition, trees: Vec<SurfaceTree>) -> Result<Self> {
        let mut slots: Vec<Option<SurfaceTree>> = vec![None; partition.blocks.len()];
        for t in trees {
            let ext = t.externals();
            let i = partition
                .blocks
                .iter()
                .position(|b| *b == ext)
                .ok_or_else(|| Error::Invariant(format!("tree labels {ext:?} match no block")))?;
            if slots[i].is_some() {
                return Err(Error::Invariant(format!("two trees for block {ext:?}")));
            }
            slots[i] = Some(t.with_l(l));
        }
        let trees = slots
            .into_iter()
            .map(|t| t.ok_or_else(|| Error::Invariant("block without tree".into())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Forest { l, partition, trees })
    }

    pub fn s(&self) -> u32 {
        self.partition.ground_size
    }

    /// Membership in `𝒲^s_l(Π)`: each tree is a surface tree valid at `l`.
    pub fn validate(&self) -> Result<()> {
        self.partition.validate()?;
        if self.trees.len() != self.partition.blocks.len() {
            return Err(Error::Invariant("tree count differs from block count".into()));
        }
        for (t, b) in self.trees.iter().zip(&self.partition.blocks) {
            if t.kind != TreeKind::Surface {
                return Err(Error::Invariant("forest trees must be surface trees".into()));
            }
            if t.l != self.l {
                return Err(Error::Invariant("tree loop budget differs from the forest's".into()));
            }
            if t.externals() != *b {
                return Err(Error::Invariant(format!("tree labels {:?} differ from block {b:?}", t.externals())));
            }
            t.validate()?;
        }
        Ok(())
    }

    pub fn canonical(&self) -> String {
        self.trees.iter().map(|t| t.canonical()).collect::<Vec<_>>().join(" | ")
    }
}

/// Outcome of [`reduce_forest`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reduction {
    pub forest: Forest,
    /// Number of trees removed entirely (two-leg tree cut at both labels, or a
    /// singleton tree cut at its only label).
    pub removed_trees: usize,
}

/// Cuts the legs at `a` and `b` from a forest over `s+2` labels at budget
/// `l−1`, prunes, and relabels the survivors to `1..s` in increasing order.
/// The result carries budget `l` and is returned without membership
/// validation so callers can inspect it.
pub fn reduce_forest(w: &Forest, a: u32, b: u32) -> Result<Reduction> {
    w.partition.validate()?;
    let n = w.s();
    if n < 3 {
        return Err(Error::Domain(format!("reduction needs s >= 1, got {} labels", n)));
    }
    if a == b || a == 0 || b == 0 || a > n || b > n {
        return Err(Error::Domain(format!("cut labels ({a}, {b}) invalid for {n} labels")));
    }
    let keep: Vec<u32> = (1..=n).filter(|&x| x != a && x != b).collect();
    let map = |x: u32| keep.iter().position(|&k| k == x).map(|p| p as u32 + 1).unwrap_or(0);
    let mut trees = Vec::new();
    let mut removed = 0;
    for t in &w.trees {
        let mut cur = Some(t.clone());
        for lab in [a, b] {
            if let Some(tt) = &cur {
                if tt.vertex_of_label(lab).is_some() {
                    cur = tt.cut_leg(lab)?;
                }
            }
        }
        match cur {
            None => removed += 1,
            Some(tt) => trees.push(tt.relabel(map).with_l(w.l + 1)),
        }
    }
    let blocks: Vec<Vec<u32>> = trees.iter().map(|t| t.externals()).collect();
    let partition = Partition::new(n - 2, blocks)?;
    let forest = Forest::assemble(w.l + 1, partition, trees)?;
    Ok(Reduction { forest, removed_trees: removed })
}

/// Merging mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeMode {
    /// Join the two leg endpoints by a new internal line.
    A,
    /// Join them through a new internal vertex of incidence two.
    B,
}

/// Joins bulk tree `t` (leg `t_label` removed) to the forest tree carrying
/// `w_label` (leg removed). Remaining labels of `t` and `w` must be disjoint
/// and together form `1..s`. The output carries budget `t.l + w.l` and is
/// returned without membership validation.
pub fn merge(mode: MergeMode, t: &BulkTree, w: &Forest, t_label: u32, w_label: u32) -> Result<Forest> {
    if t.kind != TreeKind::Bulk {
        return Err(Error::Domain("merge expects a bulk tree".into()));
    }
    t.validate_structure()?;
    let tv = t
        .vertex_of_label(t_label)
        .ok_or_else(|| Error::Domain(format!("label {t_label} is not external in the bulk tree")))?;
    let bi = w
        .partition
        .block_of(w_label)
        .ok_or_else(|| Error::Domain(format!("label {w_label} is not external in the forest")))?;
    let wt = &w.trees[bi];
    let wv = wt.vertex_of_label(w_label).ok_or_else(|| Error::Invariant("forest tree misses its block label".into()))?;
    let tz = t.adjacency()[tv][0];
    let wz = wt.adjacency()[wv][0];
    if t.roles[tz] != Role::Internal || wt.roles[wz] != Role::Internal {
        return Err(Error::Domain("merged legs must end at internal vertices".into()));
    }
    let t_rest: Vec<u32> = t.externals().into_iter().filter(|&x| x != t_label).collect();
    let mut labels: Vec<u32> = t_rest.clone();
    for (k, b) in w.partition.blocks.iter().enumerate() {
        for &x in b {
            if !(k == bi && x == w_label) {
                labels.push(x);
            }
        }
    }
    let s = labels.len() as u32;
    let mut sorted = labels.clone();
    sorted.sort_unstable();
    if sorted != (1..=s).collect::<Vec<_>>() {
        return Err(Error::Domain(format!("merged labels {sorted:?} are not 1..{s}")));
    }
    // Build the merged tree: wt without wv, t without tv, plus the joining line(s).
    let mut roles = Vec::new();
    let mut edges = Vec::new();
    let mut map_w = vec![usize::MAX; wt.roles.len()];
    for (v, r) in wt.roles.iter().enumerate() {
        if v != wv {
            map_w[v] = roles.len();
            roles.push(*r);
        }
    }
    let mut map_t = vec![usize::MAX; t.roles.len()];
    for (v, r) in t.roles.iter().enumerate() {
        if v != tv {
            map_t[v] = roles.len();
            roles.push(*r);
        }
    }
    for &(a, b) in &wt.edges {
        if a != wv && b != wv {
            edges.push((map_w[a], map_w[b]));
        }
    }
    for &(a, b) in &t.edges {
        if a != tv && b != tv {
            edges.push((map_t[a], map_t[b]));
        }
    }
    match mode {
        MergeMode::A => edges.push((map_t[tz], map_w[wz])),
        MergeMode::B => {
            let u = roles.len();
            roles.push(Role::Internal);
            edges.push((map_t[tz], u));
            edges.push((u, map_w[wz]));
        }
    }
    let l = t.l + w.l;
    let merged = Tree { kind: TreeKind::Surface, l, roles, edges };
    let mut trees: Vec<Tree> = w.trees.iter().enumerate().filter(|(k, _)| *k != bi).map(|(_, t)| t.clone()).collect();
    trees.push(merged);
    let blocks: Vec<Vec<u32>> = trees.iter().map(|t| t.externals()).collect();
    let partition = Partition::new(s, blocks)?;
    Forest::assemble(l, partition, trees)
}

/// Trees on the given leaves whose internal vertices all have incidence ≥ 3,
/// each generated once. Leaf `0` of the list is vertex 0.
fn branching_topologies(leaves: &[Role]) -> Vec<Tree> {
    let base = Tree { kind: TreeKind::Bulk, l: 0, roles: vec![leaves[0], leaves[1]], edges: vec![(0, 1)] };
    let mut cur = vec![base];
    for &leaf in &leaves[2..] {
        let mut next = Vec::new();
        for t in &cur {
            for (ei, &(a, b)) in t.edges.iter().enumerate() {
                let mut nt = t.clone();
                let w = nt.roles.len();
                nt.roles.push(Role::Internal);
                let y = nt.roles.len();
                nt.roles.push(leaf);
                nt.edges[ei] = (a, w);
                nt.edges.push((w, b));
                nt.edges.push((w, y));
                next.push(nt);
            }
            for v in t.internal_vertices() {
                let mut nt = t.clone();
                let y = nt.roles.len();
                nt.roles.push(leaf);
                nt.edges.push((v, y));
                next.push(nt);
            }
        }
        cur = next;
    }
    cur
}

/// Inserts `k_e` incidence-two vertices on each edge `e` for all vectors with
/// `Σ k_e ≤ max_extra`.
fn subdivisions(t: &Tree, max_extra: usize, out: &mut Vec<Tree>) {
    let ne = t.edges.len();
    let mut k = vec![0usize; ne];
    fn rec(t: &Tree, i: usize, left: usize, k: &mut Vec<usize>, out: &mut Vec<Tree>) {
        if i == k.len() {
            let mut nt = Tree { kind: t.kind, l: t.l, roles: t.roles.clone(), edges: Vec::new() };
            for (e, &(a, b)) in t.edges.iter().enumerate() {
                let mut prev = a;
                for _ in 0..k[e] {
                    let u = nt.roles.len();
                    nt.roles.push(Role::Internal);
                    nt.edges.push((prev, u));
                    prev = u;
                }
                nt.edges.push((prev, b));
            }
            out.push(nt);
            return;
        }
        for x in 0..=left {
            k[i] = x;
            rec(t, i + 1, left - x, k, out);
        }
        k[i] = 0;
    }
    rec(t, 0, max_extra, &mut k, out);
}

fn bounded_subdivisions(topos: Vec<Tree>, kind: TreeKind, l: u32, s: u32, max_internal: usize, allow_empty: bool) -> Vec<Tree> {
    let v2max = match v2_bound(l, s) {
        None => 0usize,
        Some(b) => b.floor().max(0.0) as usize,
    };
    let mut out = Vec::new();
    for mut t in topos {
        t.kind = kind;
        t.l = l;
        let branching = t.internal_count();
        if branching > max_internal {
            continue;
        }
        let extra = v2max.min(max_internal - branching);
        let mut sub = Vec::new();
        subdivisions(&t, extra, &mut sub);
        out.extend(sub.into_iter().filter(|x| allow_empty || x.internal_count() > 0));
    }
    out
}

/// All surface trees `T^{s,0}_l` with at most `max_internal` internal vertices,
/// one per isomorphism class, in a deterministic order.
pub fn enumerate_surface_trees(s: u32, l: u32, max_internal: usize) -> Result<Vec<SurfaceTree>> {
    if s == 0 {
        return Err(Error::Domain("surface trees need s >= 1".into()));
    }
    let mut leaves = vec![Role::Surface];
    leaves.extend((1..=s).map(|label| Role::External { label }));
    let out = bounded_subdivisions(branching_topologies(&leaves), TreeKind::Surface, l, s, max_internal, false);
    Ok(sorted_unique(out))
}

/// All bulk trees with externals `1..s` at budget `l`.
pub fn enumerate_bulk_trees(s: u32, l: u32, max_internal: usize) -> Result<Vec<BulkTree>> {
    if s < 2 {
        return Err(Error::Domain("bulk trees need s >= 2".into()));
    }
    let leaves: Vec<Role> = (1..=s).map(|label| Role::External { label }).collect();
    let out = bounded_subdivisions(branching_topologies(&leaves), TreeKind::Bulk, l, s, max_internal, false);
    Ok(sorted_unique(out))
}

/// All rooted trees with root `z₁` and externals `2..s` at budget `l`.
/// The root may have any incidence; the constraint is `v₂ + δ_{c₁,1}`.
pub fn enumerate_rooted_trees(s: u32, l: u32, max_internal: usize) -> Result<Vec<RootedTree>> {
    if s == 0 {
        return Err(Error::Domain("rooted trees need s >= 1".into()));
    }
    if s == 1 {
        return Ok(vec![Tree { kind: TreeKind::Rooted, l, roles: vec![Role::Root], edges: vec![] }]);
    }
    let mut leaves = vec![Role::Root];
    leaves.extend((2..=s).map(|label| Role::External { label }));
    // Root as a leaf: same generation as surface trees, allowing zero internal vertices.
    let mut pool = bounded_subdivisions(branching_topologies(&leaves), TreeKind::Rooted, l, s, max_internal + 1, true);
    // Root of higher incidence: contract the root leaf into a branching neighbour.
    let mut contracted = Vec::new();
    for t in &pool {
        let r = t.root_vertex().expect("root present");
        let nb = t.adjacency()[r][0];
        if t.roles[nb] == Role::Internal && t.degrees()[nb] >= 3 {
            let mut dead = vec![false; t.roles.len()];
            dead[r] = true;
            let mut nt = t.without(&dead);
            let nbn = if nb > r { nb - 1 } else { nb };
            nt.roles[nbn] = Role::Root;
            contracted.push(nt);
        }
    }
    pool.extend(contracted);
    let out = pool
        .into_iter()
        .filter(|t| t.internal_count() <= max_internal && within_bound(t.constrained_count(), l, s))
        .collect();
    Ok(sorted_unique(out))
}

fn sorted_unique(v: Vec<Tree>) -> Vec<Tree> {
    let mut keyed: Vec<(String, Tree)> = v.into_iter().map(|t| (t.canonical(), t)).collect();
    keyed.sort_by(|a, b| (a.1.internal_count(), &a.0).cmp(&(b.1.internal_count(), &b.0)));
    keyed.dedup_by(|a, b| a.0 == b.0);
    keyed.into_iter().map(|x| x.1).collect()
}

/// Surface trees on an arbitrary label set, obtained by relabelling `1..k`.
pub fn surface_trees_on(labels: &[u32], l: u32, max_internal: usize) -> Result<Vec<SurfaceTree>> {
    let base = enumerate_surface_trees(labels.len() as u32, l, max_internal)?;
    Ok(base.into_iter().map(|t| t.relabel(|x| labels[x as usize - 1])).collect())
}

/// All forests of `𝒲^s_l(Π)` with the per-tree internal cap.
pub fn enumerate_forests(p: &Partition, l: u32, max_internal: usize) -> Result<Vec<Forest>> {
    p.validate()?;
    let per_block: Vec<Vec<Tree>> =
        p.blocks.iter().map(|b| surface_trees_on(b, l, max_internal)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    let mut idx = vec![0usize; per_block.len()];
    if per_block.iter().any(|v| v.is_empty()) {
        return Ok(out);
    }
    loop {
        let trees = idx.iter().enumerate().map(|(k, &i)| per_block[k][i].clone()).collect();
        out.push(Forest { l, partition: p.clone(), trees });
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(out);
            }
            idx[k] += 1;
            if idx[k] < per_block[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// All forests over every partition of `σ_s`.
pub fn enumerate_all_forests(s: u32, l: u32, max_internal: usize) -> Result<Vec<Forest>> {
    let mut out = Vec::new();
    for p in enumerate_partitions(s)? {
        out.extend(enumerate_forests(&p, l, max_internal)?);
    }
    Ok(out)
}

/// Structures accepted by the JSON interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Structure {
    Forest(Forest),
    Tree(Tree),
}

impl Structure {
    pub fn validate(&self) -> Result<()> {
        match self {
            Structure::Forest(f) => f.validate(),
            Structure::Tree(t) => t.validate(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(labels_l: u32, k: usize) -> Tree {
        // y1 - z1 - ... - zk - 0
        let mut roles = vec![Role::External { label: 1 }, Role::Surface];
        let mut edges = Vec::new();
        let mut prev = 0;
        for _ in 0..k {
            let v = roles.len();
            roles.push(Role::Internal);
            edges.push((prev, v));
            prev = v;
        }
        edges.push((prev, 1));
        Tree { kind: TreeKind::Surface, l: labels_l, roles, edges }
    }

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (1..=6).map(|s| enumerate_partitions(s).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52, 203]);
        assert!(enumerate_partitions(0).is_err());
        for p in enumerate_partitions(4).unwrap() {
            p.validate().unwrap();
        }
    }

    #[test]
    fn partition_reduction_cases() {
        let p = Partition::new(3, vec![vec![1], vec![2, 3]]).unwrap();
        assert_eq!(reduce_partition(&p).unwrap().blocks, vec![vec![1]]);
        let p = Partition::new(4, vec![vec![1, 3], vec![2, 4]]).unwrap();
        assert_eq!(reduce_partition(&p).unwrap().blocks, vec![vec![1], vec![2]]);
        assert_eq!(reduce_partition(&Partition::trivial(5)).unwrap(), Partition::trivial(3));
        assert!(Partition::new(3, vec![vec![1, 2]]).is_err());
    }

    #[test]
    fn single_chain_at_one_loop() {
        let t = enumerate_surface_trees(1, 1, 1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].canonical(), chain(1, 1).canonical());
        assert!(enumerate_surface_trees(1, 0, 8).unwrap().is_empty());
    }

    #[test]
    fn surface_tree_counts() {
        // l = 0: branching trees only; 3, 4, 5 leaves give 1, 4, 26 topologies
        assert_eq!(enumerate_surface_trees(2, 0, 8).unwrap().len(), 1);
        assert_eq!(enumerate_surface_trees(3, 0, 8).unwrap().len(), 4);
        assert_eq!(enumerate_surface_trees(4, 0, 8).unwrap().len(), 26);
        // l = 1, s = 2: star with up to 2 subdivisions over 3 edges
        assert_eq!(enumerate_surface_trees(2, 1, 8).unwrap().len(), 10);
        for t in enumerate_surface_trees(3, 2, 5).unwrap() {
            t.validate().unwrap();
        }
    }

    #[test]
    fn canonical_forms_are_unique() {
        let ts = enumerate_surface_trees(3, 1, 4).unwrap();
        let mut c: Vec<String> = ts.iter().map(|t| t.canonical()).collect();
        let n = c.len();
        c.dedup();
        assert_eq!(c.len(), n);
    }

    #[test]
    fn two_leg_tree_is_removed() {
        let star = &enumerate_surface_trees(2, 0, 1).unwrap()[0];
        let w = Forest::new(0, Partition::new(3, vec![vec![1], vec![2, 3]]).unwrap_or_else(|_| unreachable!()), vec![
            chain(0, 1),
            star.relabel(|x| x + 1),
        ]);
        // chain at l = 0 is invalid (v2 = 1); the reduction itself is structural
        assert!(w.is_err());
        let f = Forest::assemble(0, Partition::new(3, vec![vec![1], vec![2, 3]]).unwrap(), vec![chain(0, 1), star.relabel(|x| x + 1)]).unwrap();
        let r = reduce_forest(&f, 2, 3).unwrap();
        assert_eq!(r.removed_trees, 1);
        assert_eq!(r.forest.partition.blocks, vec![vec![1]]);
    }

    #[test]
    fn cut_leg_keeps_branch_vertex() {
        // y1 - z1 - z2 - 0 with extra leg z1 - y2
        let t = Tree {
            kind: TreeKind::Surface,
            l: 1,
            roles: vec![Role::External { label: 1 }, Role::External { label: 2 }, Role::Internal, Role::Internal, Role::Surface],
            edges: vec![(0, 2), (1, 2), (2, 3), (3, 4)],
        };
        t.validate().unwrap();
        let c = t.cut_leg(2).unwrap().unwrap();
        assert_eq!(c.internal_count(), 2);
        assert_eq!(c.v2(), t.v2() + 1);
    }

    #[test]
    fn merge_bookkeeping() {
        let bulk = &enumerate_bulk_trees(2, 1, 1).unwrap()[0]; // y1 - z - y2
        let surf = enumerate_surface_trees(2, 1, 1).unwrap(); // star y1, y2, 0
        let star = surf.iter().find(|t| t.internal_count() == 1).unwrap();
        let w = Forest::new(1, Partition::trivial(2), vec![star.clone()]).unwrap();
        // bulk label 2 joins forest label 2; bulk label 1 becomes 2 in the output
        let bt = bulk.relabel(|x| if x == 1 { 2 } else { 9 });
        let wf = Forest::assemble(1, Partition::trivial(2), vec![star.clone()]).unwrap();
        let wf = Forest { trees: vec![wf.trees[0].relabel(|x| if x == 2 { 9 } else { x })], partition: Partition { ground_size: 2, blocks: vec![vec![1, 9]] }, l: 1 };
        let a = merge(MergeMode::A, &bt, &wf, 9, 9).unwrap();
        let b = merge(MergeMode::B, &bt, &wf, 9, 9).unwrap();
        assert_eq!(a.trees.len(), 1);
        assert_eq!(a.trees[0].externals(), vec![1, 2]);
        assert_eq!(a.trees[0].v2(), bt.v2() + star.v2());
        assert_eq!(b.trees[0].v2(), bt.v2() + star.v2() + 1);
        assert_eq!(b.trees[0].internal_count(), a.trees[0].internal_count() + 1);
        a.validate().unwrap();
        let _ = w;
    }

    #[test]
    fn rooted_trees_include_high_incidence_roots() {
        let ts = enumerate_rooted_trees(3, 1, 3).unwrap();
        assert!(ts.iter().any(|t| t.degrees()[t.root_vertex().unwrap()] == 2));
        for t in &ts {
            t.validate().unwrap();
        }
    }

    #[test]
    fn json_round_trip() {
        let f = enumerate_forests(&Partition::new(3, vec![vec![1, 3], vec![2]]).unwrap(), 1, 3).unwrap();
        let s = serde_json::to_string(&Structure::Forest(f[0].clone())).unwrap();
        let back: Structure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, Structure::Forest(f[0].clone()));
    }
}

//! Candidate solutions: rooted spanning forests over the demand vertices.
//!
//! A forest assigns every demand vertex a parent (a supply or another
//! demand). Supplies are roots and never move. The struct caches, per vertex,
//! the assigned supply root and the additive weight of the root path, plus
//! the total arc cost; all caches can be recomputed from the parent map
//! alone, which is what [`check_feasible`] and [`solution_cost`] do.
//!
//! Operators work through two elementary moves: detaching the subtree under
//! an arc, and inserting a detached fragment back, either as a child of a
//! vertex (type II) or spliced into an existing arc (type I).

use crate::instance::Instance;
use thiserror::Error;

/// Parent marker for a detached fragment root.
const NO_PARENT: usize = usize::MAX;

/// Insertion point for [`Forest::apply_insertion`]: splice into an arc
/// (type I) or attach under a vertex (type II).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertionPoint {
    /// Type-II: attach as a new child of the vertex.
    Vertex(usize),
    /// Type-I: splice into the arc `(parent, child)`, replacing it by two arcs.
    Arc(usize, usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum InsertionError {
    #[error("insertion point is not part of the restricted solution")]
    InvalidPoint,
    #[error("vertex {0} is not a detached demand fragment root")]
    NotDetached(usize),
    #[error("insertion would push a path past the budget")]
    Infeasible,
}

#[derive(Debug, Error, PartialEq)]
pub enum DetachError {
    #[error("arc ({0}, {1}) is not in the forest")]
    ArcNotInForest(usize, usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum StructuralError {
    #[error("expected {expected} arcs, found {actual}")]
    ArcCount { expected: usize, actual: usize },
    #[error("parent chain from vertex {0} does not reach a supply")]
    Cycle(usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum BuildError {
    #[error("parent list has {got} entries, instance has {expected} demands")]
    WrongArity { expected: usize, got: usize },
    #[error("vertex {vertex} has invalid parent {parent}")]
    BadParent { vertex: usize, parent: usize },
}

/// Verdict of [`check_feasible`]: feasible, or the first violated invariant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Feasibility {
    Feasible,
    ArcCount { expected: usize, actual: usize },
    Cycle { vertex: usize },
    SupplySupplyArc { a: usize, b: usize },
    BudgetBreach { vertex: usize, weight_sum: f64, limit: f64 },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

/// Root-path measurements for one demand vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathMetric {
    /// Sum of arc weights from the assigned supply to the vertex.
    pub weight_sum: f64,
    /// `exp(-weight_sum)`: the path reliability in reliability mode.
    pub reliability: f64,
}

/// A (possibly partially detached) rooted spanning forest.
#[derive(Clone, Debug)]
pub struct Forest {
    n: usize,
    m: usize,
    parent: Vec<usize>,
    root: Vec<usize>,
    path_weight: Vec<f64>,
    attached: Vec<bool>,
    cost: f64,
}

impl Forest {
    /// Builds a forest from per-demand parent assignments
    /// (`parents[k]` is the parent of demand vertex `m + k`).
    ///
    /// Structure is taken as given: cyclic assignments build successfully and
    /// are reported by [`check_feasible`] / rejected by [`solution_cost`].
    pub fn from_parents(inst: &Instance, parents: &[usize]) -> Result<Self, BuildError> {
        let (n, m) = (inst.n(), inst.m());
        if parents.len() != n - m {
            return Err(BuildError::WrongArity {
                expected: n - m,
                got: parents.len(),
            });
        }
        let mut parent = vec![NO_PARENT; n];
        for (s, slot) in parent.iter_mut().enumerate().take(m) {
            *slot = s;
        }
        for (k, &p) in parents.iter().enumerate() {
            let v = m + k;
            if p >= n || p == v {
                return Err(BuildError::BadParent { vertex: v, parent: p });
            }
            parent[v] = p;
        }
        let mut forest = Self {
            n,
            m,
            parent,
            root: vec![NO_PARENT; n],
            path_weight: vec![f64::NAN; n],
            attached: vec![false; n],
            cost: 0.0,
        };
        forest.recompute_caches(inst);
        Ok(forest)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Cached total arc cost, including arcs internal to detached fragments.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// Parent of `v`, or `None` for supplies and detached fragment roots.
    pub fn parent(&self, v: usize) -> Option<usize> {
        let p = self.parent[v];
        (p != NO_PARENT && p != v).then_some(p)
    }

    /// Supply root currently assigned to `v`. Supplies root themselves.
    pub fn root_of(&self, v: usize) -> Option<usize> {
        let r = self.root[v];
        (r != NO_PARENT).then_some(r)
    }

    /// Cached root-path weight of `v`. Stale for detached vertices.
    pub fn path_weight(&self, v: usize) -> f64 {
        self.path_weight[v]
    }

    /// Whether `v` currently hangs off a supply root.
    pub fn is_attached(&self, v: usize) -> bool {
        self.attached[v]
    }

    /// Present arcs as `(parent, child)` pairs, children in ascending order.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        (self.m..self.n)
            .filter(|&v| self.parent[v] != NO_PARENT)
            .map(|v| (self.parent[v], v))
            .collect()
    }

    /// Attached demand vertices without attached children.
    pub fn leaves(&self) -> Vec<usize> {
        let mut has_child = vec![false; self.n];
        for v in self.m..self.n {
            if self.attached[v] {
                if let Some(p) = self.parent(v) {
                    has_child[p] = true;
                }
            }
        }
        (self.m..self.n)
            .filter(|&v| self.attached[v] && !has_child[v])
            .collect()
    }

    /// Child adjacency in compressed form; rebuilt on demand, never cached.
    fn children_csr(&self) -> ChildrenIndex {
        let mut starts = vec![0usize; self.n + 1];
        for v in self.m..self.n {
            if let Some(p) = self.parent(v) {
                starts[p + 1] += 1;
            }
        }
        for i in 0..self.n {
            starts[i + 1] += starts[i];
        }
        let mut items = vec![0usize; starts[self.n]];
        let mut cursor = starts.clone();
        for v in self.m..self.n {
            if let Some(p) = self.parent(v) {
                items[cursor[p]] = v;
                cursor[p] += 1;
            }
        }
        ChildrenIndex { starts, items }
    }

    /// Vertices of the fragment hanging at `r` (including `r`), in preorder.
    pub fn fragment_preorder(&self, r: usize) -> Vec<usize> {
        let children = self.children_csr();
        let mut out = Vec::new();
        let mut stack = vec![r];
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(children.of(v).iter().rev());
        }
        out
    }

    /// Weight of the fragment-internal path from `r` to each fragment vertex,
    /// paired with the vertex, in preorder (`r` itself carries 0).
    fn fragment_relative_weights(
        &self,
        r: usize,
        inst: &Instance,
        children: &ChildrenIndex,
    ) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![(r, 0.0)];
        while let Some((v, w)) = stack.pop() {
            out.push((v, w));
            for &c in children.of(v) {
                stack.push((c, w + inst.weight(v, c)));
            }
        }
        out
    }

    /// Recomputes roots, path weights, attachment flags and cost from the
    /// parent map. Vertices whose chain does not reach a supply (detached or
    /// cyclic) end up unattached with NaN path weight.
    pub fn recompute_caches(&mut self, inst: &Instance) {
        let children = self.children_csr();
        for v in 0..self.n {
            self.root[v] = NO_PARENT;
            self.path_weight[v] = f64::NAN;
            self.attached[v] = false;
        }
        let mut stack: Vec<usize> = (0..self.m).collect();
        for s in 0..self.m {
            self.root[s] = s;
            self.path_weight[s] = 0.0;
            self.attached[s] = true;
        }
        while let Some(v) = stack.pop() {
            for &c in children.of(v) {
                self.root[c] = self.root[v];
                self.path_weight[c] = self.path_weight[v] + inst.weight(v, c);
                self.attached[c] = true;
                stack.push(c);
            }
        }
        self.cost = (self.m..self.n)
            .filter_map(|v| self.parent(v).map(|p| inst.cost(p, v)))
            .sum();
    }

    /// Removes the arc `(i, j)` and returns the detached fragment (preorder,
    /// rooted at `j`). The fragment keeps its internal arcs; caches stay
    /// valid for everything else.
    pub fn detach_subtree(
        &mut self,
        arc: (usize, usize),
        inst: &Instance,
    ) -> Result<Vec<usize>, DetachError> {
        let (i, j) = arc;
        if j >= self.n || self.parent(j) != Some(i) {
            return Err(DetachError::ArcNotInForest(i, j));
        }
        let frag = self.fragment_preorder(j);
        self.parent[j] = NO_PARENT;
        self.cost -= inst.cost(i, j);
        for &u in &frag {
            self.attached[u] = false;
        }
        Ok(frag)
    }

    /// Breaks a detached fragment into individually detached vertices,
    /// dropping its internal arcs. `frag` is the list returned by
    /// [`Forest::detach_subtree`].
    pub(crate) fn dissolve_fragment(&mut self, frag: &[usize], inst: &Instance) {
        for &u in frag {
            if let Some(p) = self.parent(u) {
                self.cost -= inst.cost(p, u);
                self.parent[u] = NO_PARENT;
            }
        }
    }

    /// Cost delta of inserting the detached fragment rooted at `v` at
    /// `point`, or the reason it is not allowed. Does not mutate.
    pub fn evaluate_insertion(
        &self,
        v: usize,
        point: InsertionPoint,
        inst: &Instance,
    ) -> Result<f64, InsertionError> {
        let children = self.children_csr();
        self.evaluate_insertion_inner(v, point, inst, &children)
    }

    fn evaluate_insertion_inner(
        &self,
        v: usize,
        point: InsertionPoint,
        inst: &Instance,
        children: &ChildrenIndex,
    ) -> Result<f64, InsertionError> {
        if v >= self.n || inst.is_supply(v) || self.parent[v] != NO_PARENT || self.attached[v] {
            return Err(InsertionError::NotDetached(v));
        }
        let budget = inst.budget();
        match point {
            InsertionPoint::Vertex(j) => {
                if j >= self.n || !self.attached[j] {
                    return Err(InsertionError::InvalidPoint);
                }
                let base = self.path_weight[j] + inst.weight(j, v);
                for (_, relw) in self.fragment_relative_weights(v, inst, children) {
                    if !budget.admits(base + relw) {
                        return Err(InsertionError::Infeasible);
                    }
                }
                Ok(inst.cost(j, v))
            }
            InsertionPoint::Arc(i, j) => {
                if j >= self.n || !self.attached[j] || self.parent(j) != Some(i) {
                    return Err(InsertionError::InvalidPoint);
                }
                let base = self.path_weight[i] + inst.weight(i, v);
                for (_, relw) in self.fragment_relative_weights(v, inst, children) {
                    if !budget.admits(base + relw) {
                        return Err(InsertionError::Infeasible);
                    }
                }
                // Splicing moves j's whole subtree onto the new path through v.
                let shift = base + inst.weight(v, j) - self.path_weight[j];
                let mut stack = vec![j];
                while let Some(u) = stack.pop() {
                    if !budget.admits(self.path_weight[u] + shift) {
                        return Err(InsertionError::Infeasible);
                    }
                    stack.extend(children.of(u));
                }
                Ok(inst.cost(i, v) + inst.cost(v, j) - inst.cost(i, j))
            }
        }
    }

    /// Inserts the detached fragment rooted at `v` at `point`, updating all
    /// caches. Returns the cost delta. On error the forest is unchanged.
    pub fn apply_insertion(
        &mut self,
        v: usize,
        point: InsertionPoint,
        inst: &Instance,
    ) -> Result<f64, InsertionError> {
        let children = self.children_csr();
        let delta = self.evaluate_insertion_inner(v, point, inst, &children)?;
        match point {
            InsertionPoint::Vertex(j) => {
                let base = self.path_weight[j] + inst.weight(j, v);
                self.parent[v] = j;
                let root = self.root[j];
                for (u, relw) in self.fragment_relative_weights(v, inst, &children) {
                    self.path_weight[u] = base + relw;
                    self.root[u] = root;
                    self.attached[u] = true;
                }
            }
            InsertionPoint::Arc(i, j) => {
                let base = self.path_weight[i] + inst.weight(i, v);
                let shift = base + inst.weight(v, j) - self.path_weight[j];
                let mut stack = vec![j];
                while let Some(u) = stack.pop() {
                    self.path_weight[u] += shift;
                    stack.extend(children.of(u));
                }
                self.parent[v] = i;
                self.parent[j] = v;
                let root = self.root[i];
                for (u, relw) in self.fragment_relative_weights(v, inst, &children) {
                    self.path_weight[u] = base + relw;
                    self.root[u] = root;
                    self.attached[u] = true;
                }
            }
        }
        self.cost += delta;
        Ok(delta)
    }

    /// Exchanges the tree positions of demand vertices `a` and `b` and
    /// rebuilds the caches. Feasibility is the caller's concern.
    pub fn swap_positions(&mut self, a: usize, b: usize, inst: &Instance) {
        debug_assert!(!inst.is_supply(a) && !inst.is_supply(b) && a != b);
        let swap = |v: usize| {
            if v == a {
                b
            } else if v == b {
                a
            } else {
                v
            }
        };
        let old = self.parent.clone();
        for v in self.m..self.n {
            let q = old[swap(v)];
            self.parent[v] = if q == NO_PARENT { NO_PARENT } else { swap(q) };
        }
        self.recompute_caches(inst);
    }

    /// Redirects `v`'s parent arc to `new_parent` without touching caches.
    /// Callers must finish with [`Forest::recompute_caches`].
    pub(crate) fn reparent_raw(&mut self, v: usize, new_parent: usize) {
        self.parent[v] = new_parent;
    }
}

/// Compressed child adjacency, valid for one parent-map snapshot.
struct ChildrenIndex {
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl ChildrenIndex {
    #[inline]
    fn of(&self, v: usize) -> &[usize] {
        &self.items[self.starts[v]..self.starts[v + 1]]
    }
}

/// Total arc cost recomputed from the parent map, after validating the
/// structural invariants (arc count and acyclicity).
pub fn solution_cost(forest: &Forest, inst: &Instance) -> Result<f64, StructuralError> {
    let expected = inst.demand_count();
    let arcs = forest.arcs();
    if arcs.len() != expected {
        return Err(StructuralError::ArcCount {
            expected,
            actual: arcs.len(),
        });
    }
    for v in inst.demands() {
        chain_weight(forest, v, inst).map_err(|_| StructuralError::Cycle(v))?;
    }
    Ok(arcs.iter().map(|&(p, v)| inst.cost(p, v)).sum())
}

/// Root-path weight of `v` recomputed by walking the parent chain.
fn chain_weight(forest: &Forest, v: usize, inst: &Instance) -> Result<f64, ()> {
    let mut w = 0.0;
    let mut cur = v;
    for _ in 0..forest.n() {
        if inst.is_supply(cur) {
            return Ok(w);
        }
        match forest.parent(cur) {
            Some(p) => {
                w += inst.weight(p, cur);
                cur = p;
            }
            None => return Err(()),
        }
    }
    Err(())
}

/// Weight sum and reliability of the root path of demand vertex `v`,
/// recomputed from scratch.
pub fn path_metric(forest: &Forest, v: usize, inst: &Instance) -> Result<PathMetric, StructuralError> {
    let weight_sum = chain_weight(forest, v, inst).map_err(|_| StructuralError::Cycle(v))?;
    Ok(PathMetric {
        weight_sum,
        reliability: (-weight_sum).exp(),
    })
}

/// Validates every forest invariant from the parent map alone and reports
/// the first violation: arc count, acyclicity, supply-supply arcs, then the
/// per-path budget (in ascending vertex order).
pub fn check_feasible(forest: &Forest, inst: &Instance) -> Feasibility {
    let expected = inst.demand_count();
    let arcs = forest.arcs();
    if arcs.len() != expected {
        return Feasibility::ArcCount {
            expected,
            actual: arcs.len(),
        };
    }
    for v in inst.demands() {
        if chain_weight(forest, v, inst).is_err() {
            return Feasibility::Cycle { vertex: v };
        }
    }
    for &(p, v) in &arcs {
        if inst.is_supply(p) && inst.is_supply(v) {
            return Feasibility::SupplySupplyArc { a: p, b: v };
        }
    }
    let budget = inst.budget();
    for v in inst.demands() {
        let w = chain_weight(forest, v, inst).expect("acyclic by the check above");
        if !budget.admits(w) {
            return Feasibility::BudgetBreach {
                vertex: v,
                weight_sum: w,
                limit: budget.limit(),
            };
        }
    }
    Feasibility::Feasible
}

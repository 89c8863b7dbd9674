//! Desk-scale ground truth: exhaustive optimum, the unconstrained
//! contracted-MST bound, and MILP export for external verification.

pub mod milp;

use crate::forest::{check_feasible, Forest};
use crate::instance::Instance;
use crate::mst::prim_parents;
use thiserror::Error;

/// Enumeration budget for [`brute_force`]: maximum number of demand vertices.
pub const BRUTE_FORCE_MAX_DEMANDS: usize = 9;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("instance has {0} demand vertices; brute force handles at most {BRUTE_FORCE_MAX_DEMANDS}")]
    TooLarge(usize),
    #[error("instance admits no feasible forest")]
    Infeasible,
}

/// Exhaustive optimum over all rooted spanning forests, with cost and budget
/// pruning. Only valid at desk scale (`n - m <= 9`).
pub fn brute_force(inst: &Instance) -> Result<(Forest, f64), ExactError> {
    let k = inst.demand_count();
    if k > BRUTE_FORCE_MAX_DEMANDS {
        return Err(ExactError::TooLarge(k));
    }
    if k == 0 {
        let forest = Forest::from_parents(inst, &[]).expect("empty forest");
        return Ok((forest, 0.0));
    }

    let search = BruteForceSearch::new(inst);
    let (best_parents, best_cost) = search.run()?;
    let forest = Forest::from_parents(inst, &best_parents).expect("search emits valid parents");
    debug_assert!(check_feasible(&forest, inst).is_feasible());
    Ok((forest, best_cost))
}

struct BruteForceSearch<'a> {
    inst: &'a Instance,
    k: usize,
    /// Per demand: candidate parents sorted by arc cost, pre-filtered by the
    /// weight lower bound (an arc that cannot sit on any feasible path is
    /// dropped outright).
    candidates: Vec<Vec<usize>>,
    /// Cheapest candidate arc cost per demand, for the remaining-cost bound.
    min_arc_cost: Vec<f64>,
    /// Multi-source shortest-path weights from the supplies: a lower bound on
    /// any root-path weight a vertex can ever have.
    dmin: Vec<f64>,
}

impl<'a> BruteForceSearch<'a> {
    fn new(inst: &'a Instance) -> Self {
        let (n, m) = (inst.n(), inst.m());
        let k = n - m;
        let dmin = multi_source_weights(inst);
        let limit = inst.budget().limit() + crate::instance::PATH_TOL;

        let mut candidates = Vec::with_capacity(k);
        let mut min_arc_cost = Vec::with_capacity(k);
        for v in inst.demands() {
            let mut cand: Vec<usize> = (0..n)
                .filter(|&p| p != v && dmin[p] + inst.weight(p, v) <= limit)
                .collect();
            cand.sort_by(|&a, &b| {
                inst.cost(a, v)
                    .partial_cmp(&inst.cost(b, v))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            min_arc_cost.push(cand.first().map_or(f64::INFINITY, |&p| inst.cost(p, v)));
            candidates.push(cand);
        }
        Self {
            inst,
            k,
            candidates,
            min_arc_cost,
            dmin,
        }
    }

    fn run(&self) -> Result<(Vec<usize>, f64), ExactError> {
        let mut parents = vec![usize::MAX; self.k];
        let mut best: Option<(Vec<usize>, f64)> = self.direct_greedy();
        let mut suffix_lb = vec![0.0; self.k + 1];
        for d in (0..self.k).rev() {
            suffix_lb[d] = suffix_lb[d + 1] + self.min_arc_cost[d];
        }
        self.dfs(0, 0.0, &mut parents, &suffix_lb, &mut best);
        best.ok_or(ExactError::Infeasible)
    }

    /// Feasible warm start: every demand on its cheapest feasible direct arc.
    fn direct_greedy(&self) -> Option<(Vec<usize>, f64)> {
        let inst = self.inst;
        let limit = inst.budget().limit() + crate::instance::PATH_TOL;
        let mut parents = Vec::with_capacity(self.k);
        let mut cost = 0.0;
        for v in inst.demands() {
            let s = inst
                .supplies()
                .filter(|&s| inst.weight(s, v) <= limit)
                .min_by(|&a, &b| inst.cost(a, v).partial_cmp(&inst.cost(b, v)).unwrap())?;
            parents.push(s);
            cost += inst.cost(s, v);
        }
        Some((parents, cost))
    }

    fn dfs(
        &self,
        d: usize,
        partial_cost: f64,
        parents: &mut Vec<usize>,
        suffix_lb: &[f64],
        best: &mut Option<(Vec<usize>, f64)>,
    ) {
        if let Some((_, best_cost)) = best {
            if partial_cost + suffix_lb[d] >= *best_cost {
                return;
            }
        }
        if d == self.k {
            if let Some(cost) = self.complete_cost(parents) {
                if best.as_ref().is_none_or(|(_, bc)| cost < *bc) {
                    *best = Some((parents.clone(), cost));
                }
            }
            return;
        }
        let v = self.inst.m() + d;
        for &p in &self.candidates[d] {
            if self.creates_cycle(v, p, parents) {
                continue;
            }
            if !self.partial_chain_plausible(v, p, parents) {
                continue;
            }
            parents[d] = p;
            self.dfs(d + 1, partial_cost + self.inst.cost(p, v), parents, suffix_lb, best);
            parents[d] = usize::MAX;
        }
    }

    fn parent_of(&self, v: usize, parents: &[usize]) -> Option<usize> {
        let p = parents[v - self.inst.m()];
        (p != usize::MAX).then_some(p)
    }

    /// Would the arc (p, v) close a cycle among the assigned demands?
    fn creates_cycle(&self, v: usize, p: usize, parents: &[usize]) -> bool {
        let mut cur = p;
        while !self.inst.is_supply(cur) {
            if cur == v {
                return true;
            }
            match self.parent_of(cur, parents) {
                Some(next) => cur = next,
                None => return false,
            }
        }
        false
    }

    /// Walks up from `p` over assigned parents; prunes when even the most
    /// optimistic completion of the chain breaks the budget.
    fn partial_chain_plausible(&self, v: usize, p: usize, parents: &[usize]) -> bool {
        let inst = self.inst;
        let limit = inst.budget().limit() + crate::instance::PATH_TOL;
        let mut w = inst.weight(p, v);
        let mut cur = p;
        loop {
            if inst.is_supply(cur) {
                return w <= limit;
            }
            match self.parent_of(cur, parents) {
                Some(next) => {
                    w += inst.weight(next, cur);
                    cur = next;
                }
                None => return w + self.dmin[cur] <= limit,
            }
        }
    }

    /// Exact cost of a complete assignment, or None when some path breaks
    /// the budget. Acyclicity is guaranteed by the incremental check.
    fn complete_cost(&self, parents: &[usize]) -> Option<f64> {
        let inst = self.inst;
        let limit = inst.budget().limit() + crate::instance::PATH_TOL;
        let mut cost = 0.0;
        for (d, &p) in parents.iter().enumerate() {
            let v = inst.m() + d;
            cost += inst.cost(p, v);
            let mut w = inst.weight(p, v);
            let mut cur = p;
            while !inst.is_supply(cur) {
                let next = self.parent_of(cur, parents).expect("complete assignment");
                w += inst.weight(next, cur);
                cur = next;
            }
            if w > limit {
                return None;
            }
        }
        Some(cost)
    }
}

/// Shortest additive root-path weight each vertex could possibly have:
/// dense Dijkstra from all supplies at once.
fn multi_source_weights(inst: &Instance) -> Vec<f64> {
    let n = inst.n();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    for s in inst.supplies() {
        dist[s] = 0.0;
    }
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !done[v] && (u == usize::MAX || dist[v] < dist[u]) {
                u = v;
            }
        }
        if dist[u].is_infinite() {
            break;
        }
        done[u] = true;
        for v in 0..n {
            if !done[v] {
                let nd = dist[u] + inst.weight(u, v);
                if nd < dist[v] {
                    dist[v] = nd;
                }
            }
        }
    }
    dist
}

/// Optimal unconstrained k-rooted spanning forest: all supplies contracted
/// into one super-vertex, an MST computed, then expanded back. Ignores the
/// budget entirely, so its cost lower-bounds every feasible forest.
pub fn contracted_msf(inst: &Instance) -> (Forest, f64) {
    let k = inst.demand_count();
    if k == 0 {
        let forest = Forest::from_parents(inst, &[]).expect("empty forest");
        return (forest, 0.0);
    }
    // Contracted graph: node 0 is the merged supply, nodes 1..=k the demands.
    let best_supply: Vec<usize> = inst
        .demands()
        .map(|d| {
            inst.supplies()
                .min_by(|&a, &b| {
                    inst.cost(a, d)
                        .partial_cmp(&inst.cost(b, d))
                        .unwrap()
                        .then(a.cmp(&b))
                })
                .expect("at least one supply")
        })
        .collect();
    let contracted_cost = |a: usize, b: usize| -> f64 {
        debug_assert_ne!(a, b);
        if a == 0 {
            let d = inst.m() + b - 1;
            inst.cost(best_supply[b - 1], d)
        } else if b == 0 {
            let d = inst.m() + a - 1;
            inst.cost(best_supply[a - 1], d)
        } else {
            inst.cost(inst.m() + a - 1, inst.m() + b - 1)
        }
    };
    let prim = prim_parents(k + 1, 0, contracted_cost);
    let parents: Vec<usize> = (1..=k)
        .map(|node| {
            let p = prim[node];
            if p == 0 {
                best_supply[node - 1]
            } else {
                inst.m() + p - 1
            }
        })
        .collect();
    let forest = Forest::from_parents(inst, &parents).expect("prim emits a tree");
    let cost = forest.cost();
    (forest, cost)
}

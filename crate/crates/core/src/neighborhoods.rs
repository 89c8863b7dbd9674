//! The five improving local searches. Each one returns a solution no worse
//! than its input and reports whether it found a strict improvement, so
//! callers can drive it to a fixed point with `while op(..) {}`.
//!
//! - `ls1`: remove an arc, scatter the disconnected vertices, re-insert each
//!   at its cheapest feasible point (type I or II).
//! - `ls2`: relocate a whole subtree to a cheaper feasible type-II point.
//! - `ls3`: re-insert single leaves at their cheapest feasible points.
//! - `ls4`: swap the tree positions of two demand vertices.
//! - `ls5`: extract all leaves and re-allocate them optimally by an exact
//!   singleton/pair assignment model.

use crate::forest::{check_feasible, Forest, InsertionPoint};
use crate::instance::Instance;
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

/// Improvements smaller than this are treated as ties, which keeps the
/// cost-monotonicity of the operators robust to floating-point noise.
pub const COST_EPS: f64 = 1e-9;

/// The local search operators, in the order the engine banks them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalSearch {
    Ls1,
    Ls2,
    Ls3,
    Ls4,
    Ls5,
}

impl LocalSearch {
    pub const ALL: [LocalSearch; 5] = [
        LocalSearch::Ls1,
        LocalSearch::Ls2,
        LocalSearch::Ls3,
        LocalSearch::Ls4,
        LocalSearch::Ls5,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LocalSearch::Ls1 => "ls1",
            LocalSearch::Ls2 => "ls2",
            LocalSearch::Ls3 => "ls3",
            LocalSearch::Ls4 => "ls4",
            LocalSearch::Ls5 => "ls5",
        }
    }

    /// Runs the operator to its own fixed point. Returns true when the cost
    /// strictly improved.
    pub fn apply<R: Rng>(&self, forest: &mut Forest, inst: &Instance, rng: &mut R) -> bool {
        match self {
            LocalSearch::Ls1 => ls1(forest, inst, rng),
            LocalSearch::Ls2 => ls2(forest, inst, rng),
            LocalSearch::Ls3 => ls3(forest, inst, rng),
            LocalSearch::Ls4 => ls4(forest, inst, rng),
            LocalSearch::Ls5 => {
                // One ls5 round reshapes the leaf set, so iterate it like
                // the pass loops inside the other operators.
                let mut improved = false;
                while ls5(forest, inst) {
                    improved = true;
                }
                improved
            }
        }
    }
}

/// Cheapest feasible insertion point for the detached fragment rooted at
/// `v`: every attached vertex (type II) and every present arc between
/// attached vertices (type I). Ties go to type II, then lower indices.
pub fn cheapest_feasible_point(
    forest: &Forest,
    v: usize,
    inst: &Instance,
) -> Option<(InsertionPoint, f64)> {
    let mut best: Option<(InsertionPoint, f64)> = None;
    let mut consider = |point: InsertionPoint, delta: f64| {
        if best.as_ref().is_none_or(|&(_, b)| delta < b - COST_EPS) {
            best = Some((point, delta));
        }
    };
    for j in 0..inst.n() {
        if j == v || !forest.is_attached(j) {
            continue;
        }
        if let Ok(delta) = forest.evaluate_insertion(v, InsertionPoint::Vertex(j), inst) {
            consider(InsertionPoint::Vertex(j), delta);
        }
    }
    for (i, j) in forest.arcs() {
        if !forest.is_attached(j) {
            continue;
        }
        if let Ok(delta) = forest.evaluate_insertion(v, InsertionPoint::Arc(i, j), inst) {
            consider(InsertionPoint::Arc(i, j), delta);
        }
    }
    best
}

/// Arc removal with per-vertex cheapest re-insertion.
pub fn ls1<R: Rng>(forest: &mut Forest, inst: &Instance, rng: &mut R) -> bool {
    let mut improved_any = false;
    loop {
        let mut improved_pass = false;
        let mut arcs = forest.arcs();
        arcs.shuffle(rng);
        for (i, j) in arcs {
            if forest.parent(j) != Some(i) {
                continue; // arc vanished in an earlier accepted move
            }
            let snapshot = forest.clone();
            let frag = forest.detach_subtree((i, j), inst).expect("arc checked");
            forest.dissolve_fragment(&frag, inst);
            let mut scattered = frag;
            scattered.shuffle(rng);
            let mut complete = true;
            for &v in &scattered {
                match cheapest_feasible_point(forest, v, inst) {
                    Some((point, _)) => {
                        forest
                            .apply_insertion(v, point, inst)
                            .expect("evaluated feasible");
                    }
                    None => {
                        complete = false;
                        break;
                    }
                }
            }
            if complete && forest.cost() < snapshot.cost() - COST_EPS {
                improved_pass = true;
                improved_any = true;
            } else {
                *forest = snapshot;
            }
        }
        if !improved_pass {
            return improved_any;
        }
    }
}

/// Whole-subtree relocation to the best feasible type-II point.
pub fn ls2<R: Rng>(forest: &mut Forest, inst: &Instance, rng: &mut R) -> bool {
    let mut improved_any = false;
    loop {
        let mut improved_pass = false;
        let mut arcs = forest.arcs();
        arcs.shuffle(rng);
        for (i, j) in arcs {
            if forest.parent(j) != Some(i) {
                continue;
            }
            forest.detach_subtree((i, j), inst).expect("arc checked");
            let mut best: Option<(usize, f64)> = None;
            for p in 0..inst.n() {
                if !forest.is_attached(p) {
                    continue;
                }
                if let Ok(delta) = forest.evaluate_insertion(j, InsertionPoint::Vertex(p), inst) {
                    if best.is_none_or(|(_, b)| delta < b - COST_EPS) {
                        best = Some((p, delta));
                    }
                }
            }
            let (point, delta) = best.expect("original parent is always feasible");
            let target = if delta < inst.cost(i, j) - COST_EPS {
                improved_pass = true;
                improved_any = true;
                point
            } else {
                i
            };
            forest
                .apply_insertion(j, InsertionPoint::Vertex(target), inst)
                .expect("evaluated feasible");
        }
        if !improved_pass {
            return improved_any;
        }
    }
}

/// Single-leaf cheapest re-insertion (type I or II).
pub fn ls3<R: Rng>(forest: &mut Forest, inst: &Instance, rng: &mut R) -> bool {
    let mut improved_any = false;
    loop {
        let mut improved_pass = false;
        let mut leaves = forest.leaves();
        leaves.shuffle(rng);
        for v in leaves {
            // Skip vertices that gained children from an earlier move.
            if !forest.is_attached(v) || forest.fragment_preorder(v).len() > 1 {
                continue;
            }
            let p = forest.parent(v).expect("leaves are attached");
            forest.detach_subtree((p, v), inst).expect("leaf arc");
            let (point, delta) =
                cheapest_feasible_point(forest, v, inst).expect("original point is feasible");
            let chosen = if delta < inst.cost(p, v) - COST_EPS {
                improved_pass = true;
                improved_any = true;
                point
            } else {
                InsertionPoint::Vertex(p)
            };
            forest
                .apply_insertion(v, chosen, inst)
                .expect("evaluated feasible");
        }
        if !improved_pass {
            return improved_any;
        }
    }
}

/// Position swap of two demand vertices; accepted when feasible and cheaper.
pub fn ls4<R: Rng>(forest: &mut Forest, inst: &Instance, rng: &mut R) -> bool {
    let demands: Vec<usize> = inst.demands().collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (ai, &a) in demands.iter().enumerate() {
        for &b in &demands[ai + 1..] {
            pairs.push((a, b));
        }
    }
    let mut improved_any = false;
    loop {
        let mut improved_pass = false;
        pairs.shuffle(rng);
        for &(a, b) in &pairs {
            let mut candidate = forest.clone();
            candidate.swap_positions(a, b, inst);
            if candidate.cost() < forest.cost() - COST_EPS
                && check_feasible(&candidate, inst).is_feasible()
            {
                *forest = candidate;
                improved_pass = true;
                improved_any = true;
            }
        }
        if !improved_pass {
            return improved_any;
        }
    }
}

// ---------------------------------------------------------------------------
// ls5: exact leaf reallocation
// ---------------------------------------------------------------------------

/// One candidate placement for a sequence: a type-II point and the cost of
/// attaching the sequence under it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InsertionOption {
    pub point: usize,
    pub cost: f64,
}

/// A sequence of one or two extracted leaves, `head` attached to the point
/// and `tail` chained below `head` (`head == tail` for singletons), together
/// with its feasible insertion points.
#[derive(Clone, Debug)]
pub struct Sequence {
    pub head: usize,
    pub tail: usize,
    pub options: Vec<InsertionOption>,
}

impl Sequence {
    pub fn is_singleton(&self) -> bool {
        self.head == self.tail
    }

    fn best_option(&self) -> Option<InsertionOption> {
        self.options
            .iter()
            .copied()
            .min_by(|a, b| a.cost.partial_cmp(&b.cost).unwrap().then(a.point.cmp(&b.point)))
    }
}

/// The leaf-reallocation subproblem: cover every extracted leaf by exactly
/// one sequence, each sequence charged the cost of its chosen point.
#[derive(Clone, Debug)]
pub struct LeafReallocationProblem {
    pub leaves: Vec<usize>,
    pub sequences: Vec<Sequence>,
}

/// A solved reallocation: chosen `(sequence index, point)` pairs and the
/// total cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Reallocation {
    pub choices: Vec<(usize, usize)>,
    pub cost: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ReallocationError {
    #[error("no feasible cover exists for leaf {0}")]
    UncoverableLeaf(usize),
    #[error("problems with more than 63 leaves are not supported")]
    TooManyLeaves,
}

impl LeafReallocationProblem {
    /// Builds the subproblem for a restricted solution from which `leaves`
    /// have been detached: all singletons, plus both orientations of every
    /// pair, each with the type-II points that keep the budget satisfied.
    pub fn from_restricted(forest: &Forest, leaves: &[usize], inst: &Instance) -> Self {
        let budget = inst.budget();
        let points: Vec<usize> = (0..inst.n()).filter(|&j| forest.is_attached(j)).collect();
        let mut sequences = Vec::new();
        for (a_idx, &a) in leaves.iter().enumerate() {
            let singleton_options: Vec<InsertionOption> = points
                .iter()
                .filter(|&&j| budget.admits(forest.path_weight(j) + inst.weight(j, a)))
                .map(|&j| InsertionOption {
                    point: j,
                    cost: inst.cost(j, a),
                })
                .collect();
            sequences.push(Sequence {
                head: a,
                tail: a,
                options: singleton_options,
            });
            for &b in &leaves[a_idx + 1..] {
                for (head, tail) in [(a, b), (b, a)] {
                    let internal = inst.weight(head, tail);
                    let options: Vec<InsertionOption> = points
                        .iter()
                        .filter(|&&j| {
                            budget.admits(forest.path_weight(j) + inst.weight(j, head) + internal)
                        })
                        .map(|&j| InsertionOption {
                            point: j,
                            cost: inst.cost(j, head) + inst.cost(head, tail),
                        })
                        .collect();
                    if !options.is_empty() {
                        sequences.push(Sequence { head, tail, options });
                    }
                }
            }
        }
        Self {
            leaves: leaves.to_vec(),
            sequences,
        }
    }
}

/// Exact minimum-cost cover of the leaves by singletons and pairs, each part
/// charged its cheapest feasible point. Depth-first branch and bound pruned
/// by per-leaf potentials `u` with `u_l <= c_l` and `u_a + u_b <= p_ab`
/// (taken from the duals of an assignment relaxation), so the sum of
/// potentials over uncovered leaves under-estimates any completion.
pub fn solve_leaf_reallocation(
    prob: &LeafReallocationProblem,
) -> Result<Reallocation, ReallocationError> {
    let k = prob.leaves.len();
    if k > 63 {
        return Err(ReallocationError::TooManyLeaves);
    }
    if k == 0 {
        return Ok(Reallocation {
            choices: Vec::new(),
            cost: 0.0,
        });
    }
    let leaf_pos = |v: usize| prob.leaves.iter().position(|&l| l == v).expect("leaf");

    // Per sequence: members mask, best point and its cost.
    struct Part {
        seq: usize,
        mask: u64,
        point: usize,
        cost: f64,
    }
    let mut parts = Vec::new();
    for (s, seq) in prob.sequences.iter().enumerate() {
        let Some(best) = seq.best_option() else {
            continue;
        };
        let mut mask = 1u64 << leaf_pos(seq.head);
        if !seq.is_singleton() {
            mask |= 1u64 << leaf_pos(seq.tail);
        }
        parts.push(Part {
            seq: s,
            mask,
            point: best.point,
            cost: best.cost,
        });
    }

    // Cheapest cost per leaf set: singles[l] and pairs[a][b] (orientations
    // merged). These floor the potentials.
    let mut singles = vec![f64::INFINITY; k];
    let mut pair_floor = vec![f64::INFINITY; k * k];
    for part in &parts {
        let a = part.mask.trailing_zeros() as usize;
        if part.mask.count_ones() == 1 {
            singles[a] = singles[a].min(part.cost);
        } else {
            let b = 63 - part.mask.leading_zeros() as usize;
            pair_floor[a * k + b] = pair_floor[a * k + b].min(part.cost);
            pair_floor[b * k + a] = pair_floor[b * k + a].min(part.cost);
        }
    }
    for l in 0..k {
        let covered = singles[l].is_finite()
            || (0..k).any(|b| pair_floor[l * k + b].is_finite());
        if !covered {
            return Err(ReallocationError::UncoverableLeaf(prob.leaves[l]));
        }
    }

    // Per-leaf potentials from the assignment relaxation: cost matrix with
    // singleton costs on the diagonal and half pair costs off it. Any
    // partition induces a symmetric permutation of equal cost, so the
    // assignment duals satisfy u_l <= c_l and u_a + u_b <= p_ab, and the sum
    // of potentials over any leaf set under-estimates its cover cost.
    let mut relax = vec![f64::INFINITY; k * k];
    for l in 0..k {
        relax[l * k + l] = singles[l];
        for b in 0..k {
            if b != l && pair_floor[l * k + b].is_finite() {
                relax[l * k + b] = pair_floor[l * k + b] / 2.0;
            }
        }
    }
    let Some((row_dual, col_dual)) = assignment_duals(k, &relax) else {
        // The relaxation has no finite assignment, so no partition exists.
        let l = (0..k).find(|&l| singles[l].is_infinite());
        return Err(ReallocationError::UncoverableLeaf(
            prob.leaves[l.unwrap_or(0)],
        ));
    };
    let u: Vec<f64> = (0..k).map(|l| row_dual[l] + col_dual[l]).collect();

    // Parts indexed by their lowest member, by reduced cost ascending.
    let part_slack =
        |part: &Part| part.cost - (0..k).filter(|&l| part.mask & (1 << l) != 0).map(|l| u[l]).sum::<f64>();
    let mut by_first: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (idx, part) in parts.iter().enumerate() {
        by_first[part.mask.trailing_zeros() as usize].push(idx);
    }
    for list in &mut by_first {
        list.sort_by(|&a, &b| {
            part_slack(&parts[a])
                .partial_cmp(&part_slack(&parts[b]))
                .unwrap()
                .then(a.cmp(&b))
        });
    }

    // Warm start: the all-singleton cover, when each leaf has one.
    let mut warm: Option<(Vec<usize>, f64)> = None;
    if singles.iter().all(|c| c.is_finite()) {
        let mut choice = Vec::with_capacity(k);
        let mut cost = 0.0;
        for (l, list) in by_first.iter().enumerate() {
            let idx = list
                .iter()
                .copied()
                .filter(|&i| parts[i].mask == 1u64 << l)
                .min_by(|&a, &b| parts[a].cost.partial_cmp(&parts[b].cost).unwrap())
                .expect("singleton exists");
            cost += parts[idx].cost;
            choice.push(idx);
        }
        warm = Some((choice, cost));
    }

    struct Dfs<'a> {
        parts: &'a [Part],
        by_first: &'a [Vec<usize>],
        u: &'a [f64],
        full: u64,
        best_cost: f64,
        best_choice: Vec<usize>,
        stack: Vec<usize>,
    }
    impl Dfs<'_> {
        fn go(&mut self, covered: u64, cost: f64, remaining_lb: f64) {
            // The small slack keeps float drift in the potentials from ever
            // pruning a genuinely better completion.
            if cost + remaining_lb >= self.best_cost - 1e-9 {
                return;
            }
            if covered == self.full {
                self.best_cost = cost;
                self.best_choice = self.stack.clone();
                return;
            }
            let l = (!covered).trailing_zeros() as usize;
            for &idx in &self.by_first[l] {
                let part = &self.parts[idx];
                if part.mask & covered != 0 {
                    continue;
                }
                let mut lb = remaining_lb;
                for member in 0..self.u.len() {
                    if part.mask & (1 << member) != 0 {
                        lb -= self.u[member];
                    }
                }
                self.stack.push(idx);
                self.go(covered | part.mask, cost + part.cost, lb);
                self.stack.pop();
            }
        }
    }

    let total_lb: f64 = u.iter().sum();
    let mut dfs = Dfs {
        parts: &parts,
        by_first: &by_first,
        u: &u,
        full: (1u64 << k) - 1,
        best_cost: warm.as_ref().map_or(f64::INFINITY, |(_, c)| *c),
        best_choice: warm.map(|(c, _)| c).unwrap_or_default(),
        stack: Vec::new(),
    };
    dfs.go(0, 0.0, total_lb);
    if dfs.best_choice.is_empty() && k > 0 {
        // No all-singleton warm start and the search found no cover: some
        // leaf is only coverable through mutually conflicting pairs.
        let l = (0..k).find(|&l| singles[l].is_infinite());
        return Err(ReallocationError::UncoverableLeaf(
            prob.leaves[l.unwrap_or(0)],
        ));
    }
    let cost = dfs
        .best_choice
        .iter()
        .map(|&idx| parts[idx].cost)
        .sum::<f64>();
    Ok(Reallocation {
        choices: dfs
            .best_choice
            .iter()
            .map(|&idx| (parts[idx].seq, parts[idx].point))
            .collect(),
        cost,
    })
}

/// Square min-cost assignment by shortest augmenting paths, returning the
/// row and column potentials, which satisfy `w_ij >= row_i + col_j` for
/// every cell. `None` when no finite-cost perfect assignment exists.
fn assignment_duals(k: usize, w: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    // 1-based arrays with a virtual column 0, the usual formulation.
    let mut row_pot = vec![0.0f64; k + 1];
    let mut col_pot = vec![0.0f64; k + 1];
    let mut matched_row = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=k {
                if !used[j] {
                    let cur = w[(i0 - 1) * k + (j - 1)] - row_pot[i0] - col_pot[j];
                    if cur < min_slack[j] {
                        min_slack[j] = cur;
                        way[j] = j0;
                    }
                    if min_slack[j] < delta {
                        delta = min_slack[j];
                        j1 = j;
                    }
                }
            }
            if !delta.is_finite() {
                return None;
            }
            for j in 0..=k {
                if used[j] {
                    row_pot[matched_row[j]] += delta;
                    col_pot[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    Some((row_pot[1..].to_vec(), col_pot[1..].to_vec()))
}

/// Math-based leaf rearrangement: extract all leaves, solve the reallocation
/// model exactly, adopt the result only when it is strictly cheaper.
pub fn ls5(forest: &mut Forest, inst: &Instance) -> bool {
    let leaves = forest.leaves();
    if leaves.is_empty() {
        return false;
    }
    let mut original = Vec::with_capacity(leaves.len());
    let mut original_cost = 0.0;
    for &v in &leaves {
        let p = forest.parent(v).expect("leaves are attached");
        forest.detach_subtree((p, v), inst).expect("leaf arc");
        original.push((v, p));
        original_cost += inst.cost(p, v);
    }

    let prob = LeafReallocationProblem::from_restricted(forest, &leaves, inst);
    let solved = solve_leaf_reallocation(&prob).expect("original positions are always feasible");

    if solved.cost < original_cost - COST_EPS {
        for (seq_idx, point) in solved.choices {
            let seq = &prob.sequences[seq_idx];
            forest
                .apply_insertion(seq.head, InsertionPoint::Vertex(point), inst)
                .expect("option was checked feasible");
            if !seq.is_singleton() {
                forest
                    .apply_insertion(seq.tail, InsertionPoint::Vertex(seq.head), inst)
                    .expect("pair chain was checked feasible");
            }
        }
        true
    } else {
        for (v, p) in original {
            forest
                .apply_insertion(v, InsertionPoint::Vertex(p), inst)
                .expect("restoring the original position");
        }
        false
    }
}

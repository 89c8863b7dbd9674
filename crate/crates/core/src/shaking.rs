//! The six diversification operators. Outputs are always feasible but not
//! necessarily improving.
//!
//! The first three graft max-reliability paths into the forest: every vertex
//! on the new path is reparented to its path predecessor, which removes one
//! arc per reparenting and keeps the arc count intact. Path prefixes carry
//! the minimum possible weight, so grafting cannot push any root path past
//! the budget; a repair pass still runs afterwards as a guard.

use crate::construct::repair_to_feasible;
use crate::forest::{check_feasible, Forest, InsertionPoint};
use crate::instance::Instance;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

/// The shaking operators, in the order the engine banks them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shaking {
    Sh1,
    Sh2,
    Sh3,
    Sh4,
    Sh5,
    Sh6,
}

impl Shaking {
    pub const ALL: [Shaking; 6] = [
        Shaking::Sh1,
        Shaking::Sh2,
        Shaking::Sh3,
        Shaking::Sh4,
        Shaking::Sh5,
        Shaking::Sh6,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Shaking::Sh1 => "sh1",
            Shaking::Sh2 => "sh2",
            Shaking::Sh3 => "sh3",
            Shaking::Sh4 => "sh4",
            Shaking::Sh5 => "sh5",
            Shaking::Sh6 => "sh6",
        }
    }

    /// Applies the operator. `far_threshold` is the distance cutoff used by
    /// [`sh3`]; the others ignore it.
    pub fn apply<R: Rng>(
        &self,
        forest: &mut Forest,
        inst: &Instance,
        far_threshold: f64,
        rng: &mut R,
    ) {
        match self {
            Shaking::Sh1 => sh1(forest, inst, rng),
            Shaking::Sh2 => sh2(forest, inst, rng),
            Shaking::Sh3 => sh3(forest, inst, far_threshold, rng),
            Shaking::Sh4 => sh4(forest, inst, rng),
            Shaking::Sh5 => sh5(forest, inst, rng),
            Shaking::Sh6 => sh6(forest, inst, rng),
        }
    }
}

#[inline]
fn close(a: f64, b: f64) -> bool {
    a.is_finite() && b.is_finite() && (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Max-reliability supply-to-`target` path: a shortest path on the additive
/// weights from a virtual source joined to every supply. Among co-optimal
/// paths one is sampled uniformly, by counting paths on the shortest-path
/// DAG and walking backwards with count-proportional choices.
pub fn max_reliability_path<R: Rng>(inst: &Instance, target: usize, rng: &mut R) -> Vec<usize> {
    let n = inst.n();
    let mut dist = vec![f64::INFINITY; n];
    let mut order = vec![usize::MAX; n];
    let mut settled = vec![false; n];
    for s in inst.supplies() {
        dist[s] = 0.0;
    }
    for step in 0..n {
        let mut best = f64::INFINITY;
        for v in 0..n {
            if !settled[v] && dist[v] < best {
                best = dist[v];
            }
        }
        if best.is_infinite() {
            break;
        }
        let ties: Vec<usize> = (0..n)
            .filter(|&v| !settled[v] && close(dist[v], best))
            .collect();
        let u = *ties.choose(rng).expect("at least the minimizer ties");
        settled[u] = true;
        order[u] = step;
        for v in 0..n {
            if !settled[v] && v != u {
                let nd = dist[u] + inst.weight(u, v);
                if nd < dist[v] {
                    dist[v] = nd;
                }
            }
        }
    }

    // Tight predecessors, restricted to earlier-settled vertices so the
    // relation is acyclic even with zero-weight arcs. Supplies are sources
    // and take no predecessors, which keeps every path single-supply.
    let preds = |v: usize| -> Vec<usize> {
        (0..n)
            .filter(|&u| u != v && order[u] < order[v] && close(dist[u] + inst.weight(u, v), dist[v]))
            .collect()
    };
    let mut by_order: Vec<usize> = (0..n).filter(|&v| order[v] != usize::MAX).collect();
    by_order.sort_by_key(|&v| order[v]);
    let mut count = vec![0.0f64; n];
    for &v in &by_order {
        count[v] = if inst.is_supply(v) {
            1.0
        } else {
            preds(v).iter().map(|&u| count[u]).sum()
        };
    }

    let mut path = vec![target];
    let mut cur = target;
    while !inst.is_supply(cur) {
        let options = preds(cur);
        debug_assert!(!options.is_empty(), "every demand is reachable");
        let total: f64 = options.iter().map(|&u| count[u]).sum();
        let mut draw = rng.random_range(0.0..total.max(f64::MIN_POSITIVE));
        let mut chosen = options[options.len() - 1];
        for &u in &options {
            if draw < count[u] {
                chosen = u;
                break;
            }
            draw -= count[u];
        }
        path.push(chosen);
        cur = chosen;
    }
    path.reverse();
    path
}

/// Reparents every path vertex to its predecessor and repairs any budget
/// slip among reattached descendants. Restores the input on repair failure.
fn graft_max_rel_path<R: Rng>(forest: &mut Forest, target: usize, inst: &Instance, rng: &mut R) {
    let path = max_reliability_path(inst, target, rng);
    let snapshot = forest.clone();
    for win in path.windows(2) {
        forest.reparent_raw(win[1], win[0]);
    }
    forest.recompute_caches(inst);
    if repair_to_feasible(forest, inst, rng).is_err() {
        *forest = snapshot;
    }
}

/// Replaces one random demand vertex's root path by its max-reliability path.
pub fn sh1<R: Rng>(forest: &mut Forest, inst: &Instance, rng: &mut R) {
    let demands: Vec<usize> = inst.demands().collect();
    let Some(&target) = demands.choose(rng) else {
        return;
    };
    graft_max_rel_path(forest, target, inst, rng);
    debug_assert!(check_feasible(forest, inst).is_feasible());
}

/// As [`sh1`] for three distinct demand vertices (all of them when fewer exist).
pub fn sh2<R: Rng>(forest: &mut Forest, inst: &Instance, rng: &mut R) {
    let demands: Vec<usize> = inst.demands().collect();
    let targets: Vec<usize> = demands.choose_multiple(rng, 3).copied().collect();
    for target in targets {
        graft_max_rel_path(forest, target, inst, rng);
    }
    debug_assert!(check_feasible(forest, inst).is_feasible());
}

/// Grafts max-reliability paths for two demand vertices farther apart than
/// `far_threshold`; falls back to [`sh1`] when no such pair exists.
pub fn sh3<R: Rng>(forest: &mut Forest, inst: &Instance, far_threshold: f64, rng: &mut R) {
    let demands: Vec<usize> = inst.demands().collect();
    let mut far_pairs = Vec::new();
    for (ai, &a) in demands.iter().enumerate() {
        for &b in &demands[ai + 1..] {
            if inst.cost(a, b) > far_threshold {
                far_pairs.push((a, b));
            }
        }
    }
    let Some(&(a, b)) = far_pairs.choose(rng) else {
        sh1(forest, inst, rng);
        return;
    };
    graft_max_rel_path(forest, a, inst, rng);
    graft_max_rel_path(forest, b, inst, rng);
    debug_assert!(check_feasible(forest, inst).is_feasible());
}

/// First feasible random position swap of two demand vertices, regardless
/// of cost. Leaves the forest unchanged when every swap is infeasible.
pub fn sh4<R: Rng>(forest: &mut Forest, inst: &Instance, rng: &mut R) {
    let demands: Vec<usize> = inst.demands().collect();
    let mut pairs = Vec::new();
    for (ai, &a) in demands.iter().enumerate() {
        for &b in &demands[ai + 1..] {
            pairs.push((a, b));
        }
    }
    pairs.shuffle(rng);
    for (a, b) in pairs {
        let mut candidate = forest.clone();
        candidate.swap_positions(a, b, inst);
        if check_feasible(&candidate, inst).is_feasible() {
            *forest = candidate;
            return;
        }
    }
}

/// Removes a random arc and reattaches the detached subtree under random
/// vertices of the restricted solution until one fits; tries further arcs
/// when none does.
pub fn sh5<R: Rng>(forest: &mut Forest, inst: &Instance, rng: &mut R) {
    let mut arcs = forest.arcs();
    arcs.shuffle(rng);
    for (i, j) in arcs {
        if try_reattach_elsewhere(forest, (i, j), inst, rng) {
            return;
        }
    }
}

/// As [`sh5`] with a single arc draw: the attachment vertex is drawn
/// uniformly and redrawn on infeasibility; the input is restored when no
/// vertex admits the subtree.
pub fn sh6<R: Rng>(forest: &mut Forest, inst: &Instance, rng: &mut R) {
    let arcs = forest.arcs();
    let Some(&arc) = arcs.choose(rng) else {
        return;
    };
    try_reattach_elsewhere(forest, arc, inst, rng);
}

/// Detaches `(i, j)` and attaches the fragment under the first feasible
/// vertex of a random order. Restores the original arc when nothing fits.
/// Returns whether a (possibly identical) feasible attachment was made.
fn try_reattach_elsewhere<R: Rng>(
    forest: &mut Forest,
    (i, j): (usize, usize),
    inst: &Instance,
    rng: &mut R,
) -> bool {
    forest.detach_subtree((i, j), inst).expect("arc from the forest");
    let mut points: Vec<usize> = (0..inst.n()).filter(|&p| forest.is_attached(p)).collect();
    points.shuffle(rng);
    for p in points {
        if forest.apply_insertion(j, InsertionPoint::Vertex(p), inst).is_ok() {
            debug_assert!(check_feasible(forest, inst).is_feasible());
            return true;
        }
    }
    forest
        .apply_insertion(j, InsertionPoint::Vertex(i), inst)
        .expect("original position is feasible");
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::initialize;
    use crate::instance::{Instance, Provenance};
    use crate::instances::{generate, ConstraintSpec, Family, GenSpec};
    use crate::matrix::SymMatrix;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256StarStar;

    fn rng(seed: u64) -> Xoshiro256StarStar {
        Xoshiro256StarStar::seed_from_u64(seed)
    }

    fn random_instance(n: usize, m: usize, alpha: f64, seed: u64) -> Instance {
        generate(&GenSpec {
            family: Family::Euclidean,
            n,
            m,
            constraint: ConstraintSpec::Reliability { alpha },
            seed,
        })
        .unwrap()
    }

    /// All simple supply-to-target paths, exhaustively. Oracle use only.
    fn best_path_weight(inst: &Instance, target: usize) -> f64 {
        fn dfs(
            inst: &Instance,
            cur: usize,
            target: usize,
            seen: &mut Vec<bool>,
            w: f64,
            best: &mut f64,
        ) {
            if cur == target {
                *best = best.min(w);
                return;
            }
            for v in inst.demands() {
                if !seen[v] {
                    seen[v] = true;
                    dfs(inst, v, target, seen, w + inst.weight(cur, v), best);
                    seen[v] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        for s in inst.supplies() {
            let mut seen = vec![false; inst.n()];
            seen[s] = true;
            dfs(inst, s, target, &mut seen, 0.0, &mut best);
        }
        best
    }

    fn path_weight(inst: &Instance, path: &[usize]) -> f64 {
        path.windows(2).map(|w| inst.weight(w[0], w[1])).sum()
    }

    #[test]
    fn max_reliability_path_matches_exhaustive_oracle() {
        for seed in 0..20 {
            let inst = random_instance(8, 2, 0.8, seed);
            for target in inst.demands() {
                let path = max_reliability_path(&inst, target, &mut rng(seed));
                assert!(inst.is_supply(path[0]));
                assert_eq!(*path.last().unwrap(), target);
                assert!(path[1..].iter().all(|&v| !inst.is_supply(v)));
                let oracle = best_path_weight(&inst, target);
                assert_relative_eq!(path_weight(&inst, &path), oracle, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn two_hop_beats_direct_arc() {
        let mut cost = SymMatrix::zeros(4);
        for i in 0..4 {
            for j in (i + 1)..4 {
                cost.set(i, j, 1.0);
            }
        }
        let mut rel = SymMatrix::from_fn(4, |_, _| 0.5);
        rel.set(0, 3, 0.9);
        rel.set(0, 2, 0.95);
        rel.set(2, 3, 0.96);
        let inst = Instance::reliability(1, cost, rel, 0.5, Provenance::default()).unwrap();
        let path = max_reliability_path(&inst, 3, &mut rng(0));
        assert_eq!(path, vec![0, 2, 3]); // 0.95 * 0.96 = 0.912 > 0.9
    }

    #[test]
    fn forced_single_arc_path() {
        let mut cost = SymMatrix::zeros(3);
        cost.set(0, 1, 1.0);
        cost.set(0, 2, 1.0);
        cost.set(1, 2, 1.0);
        let mut rel = SymMatrix::from_fn(3, |_, _| 0.05);
        rel.set(0, 1, 0.95);
        let inst = Instance::reliability(1, cost, rel, 0.5, Provenance::default()).unwrap();
        assert_eq!(max_reliability_path(&inst, 1, &mut rng(1)), vec![0, 1]);
    }

    #[test]
    fn all_reliability_one_returns_a_perfect_path() {
        let mut cost = SymMatrix::zeros(5);
        for i in 0..5 {
            for j in (i + 1)..5 {
                cost.set(i, j, 1.0);
            }
        }
        let rel = SymMatrix::from_fn(5, |_, _| 1.0);
        let inst = Instance::reliability(1, cost, rel, 0.9, Provenance::default()).unwrap();
        for seed in 0..10 {
            let path = max_reliability_path(&inst, 4, &mut rng(seed));
            assert_relative_eq!(path_weight(&inst, &path), 0.0, epsilon = 1e-12);
            assert!(inst.is_supply(path[0]));
        }
    }

    #[test]
    fn sh1_fixed_point_when_current_path_is_optimal() {
        // Unique max-reliability path 0 -> 1 -> 2 already in the forest.
        let mut cost = SymMatrix::zeros(3);
        cost.set(0, 1, 1.0);
        cost.set(0, 2, 1.0);
        cost.set(1, 2, 1.0);
        let mut rel = SymMatrix::zeros(3);
        rel.set(0, 1, 0.99);
        rel.set(1, 2, 0.99);
        rel.set(0, 2, 0.5);
        let inst = Instance::reliability(1, cost, rel, 0.5, Provenance::default()).unwrap();
        let f0 = Forest::from_parents(&inst, &[0, 1]).unwrap();
        for seed in 0..10 {
            let mut f = f0.clone();
            sh1(&mut f, &inst, &mut rng(seed));
            assert_eq!(f.parent(1), Some(0));
            assert_eq!(f.parent(2), Some(1));
            assert_relative_eq!(f.cost(), f0.cost(), epsilon = 1e-12);
        }
    }

    #[test]
    fn sh1_graft_reroots_disjoint_path() {
        // Forest: 0 -> 1 -> 2; the max-reliability path to 2 goes 0 -> 3 -> 2,
        // vertex-disjoint from 2's current chain except at 2.
        let mut cost = SymMatrix::zeros(4);
        for i in 0..4 {
            for j in (i + 1)..4 {
                cost.set(i, j, 1.0);
            }
        }
        let mut rel = SymMatrix::from_fn(4, |_, _| 0.6);
        rel.set(0, 1, 0.9);
        rel.set(1, 2, 0.9);
        rel.set(0, 3, 0.99);
        rel.set(3, 2, 0.99);
        let inst = Instance::reliability(1, cost, rel, 0.5, Provenance::default()).unwrap();
        let mut f = Forest::from_parents(&inst, &[0, 1, 0]).unwrap();
        // Only demand 2's graft changes arcs; target selection is random, so
        // force it by grafting directly.
        graft_max_rel_path(&mut f, 2, &inst, &mut rng(0));
        assert_eq!(f.parent(2), Some(3));
        assert_eq!(f.parent(3), Some(0));
        assert_eq!(f.arcs().len(), 3);
        assert!(check_feasible(&f, &inst).is_feasible());
    }

    #[test]
    fn grafting_preserves_arc_count_on_random_instances() {
        for seed in 0..100 {
            let inst = random_instance(15, 3, 0.9, seed);
            let mut f = initialize(&inst, &mut rng(seed)).unwrap();
            sh1(&mut f, &inst, &mut rng(seed + 1));
            assert_eq!(f.arcs().len(), inst.demand_count());
            assert!(check_feasible(&f, &inst).is_feasible(), "seed {seed}");
        }
    }

    #[test]
    fn sh2_unchanged_when_every_path_is_already_optimal() {
        // Each demand's unique max-reliability path is its direct arc.
        let n = 5;
        let cost = SymMatrix::from_fn(n, |_, _| 1.0);
        let mut rel = SymMatrix::from_fn(n, |_, _| 0.6);
        for d in 1..n {
            rel.set(0, d, 0.99);
        }
        let inst = Instance::reliability(1, cost, rel, 0.9, Provenance::default()).unwrap();
        let f0 = Forest::from_parents(&inst, &[0, 0, 0, 0]).unwrap();
        for seed in 0..10 {
            let mut f = f0.clone();
            sh2(&mut f, &inst, &mut rng(seed));
            assert_eq!(f.arcs(), f0.arcs());
        }
    }

    #[test]
    fn sh2_uses_all_demands_when_fewer_than_three() {
        let inst = random_instance(3, 1, 0.9, 5);
        let mut f = initialize(&inst, &mut rng(5)).unwrap();
        sh2(&mut f, &inst, &mut rng(6));
        assert!(check_feasible(&f, &inst).is_feasible());
    }

    #[test]
    fn sh2_feasible_over_many_seeds() {
        for seed in 0..100 {
            let inst = random_instance(12, 2, 0.92, seed % 7);
            let mut f = initialize(&inst, &mut rng(seed)).unwrap();
            sh2(&mut f, &inst, &mut rng(seed + 1000));
            assert!(check_feasible(&f, &inst).is_feasible(), "seed {seed}");
        }
    }

    #[test]
    fn sh3_falls_back_to_sh1_when_no_far_pair_exists() {
        let inst = random_instance(10, 2, 0.9, 2);
        let mut f = initialize(&inst, &mut rng(2)).unwrap();
        // Threshold above every pairwise cost: must not panic, must stay feasible.
        sh3(&mut f, &inst, 1e9, &mut rng(3));
        assert!(check_feasible(&f, &inst).is_feasible());
    }

    #[test]
    fn sh3_grafts_the_unique_far_pair() {
        // Demands 1 and 2 are the only pair with cost above the threshold.
        let mut cost = SymMatrix::zeros(4);
        cost.set(0, 1, 1.0);
        cost.set(0, 2, 1.0);
        cost.set(0, 3, 1.0);
        cost.set(1, 2, 99.0);
        cost.set(1, 3, 2.0);
        cost.set(2, 3, 2.0);
        let mut rel = SymMatrix::from_fn(4, |_, _| 0.8);
        rel.set(0, 1, 0.99);
        rel.set(0, 2, 0.99);
        rel.set(0, 3, 0.99);
        let inst = Instance::reliability(1, cost, rel, 0.7, Provenance::default()).unwrap();
        // Start with 1 and 2 on suboptimal paths through 3.
        let mut f = Forest::from_parents(&inst, &[3, 3, 0]).unwrap();
        sh3(&mut f, &inst, 50.0, &mut rng(4));
        // Their max-reliability paths are the direct supply arcs.
        assert_eq!(f.parent(1), Some(0));
        assert_eq!(f.parent(2), Some(0));
        assert!(check_feasible(&f, &inst).is_feasible());
    }

    #[test]
    fn sh4_swaps_symmetric_vertices_without_cost_change() {
        let mut cost = SymMatrix::zeros(3);
        cost.set(0, 1, 4.0);
        cost.set(0, 2, 4.0);
        cost.set(1, 2, 1.0);
        let rel = SymMatrix::from_fn(3, |_, _| 0.99);
        let inst = Instance::reliability(1, cost, rel, 0.9, Provenance::default()).unwrap();
        let mut f = Forest::from_parents(&inst, &[0, 1]).unwrap();
        let before = f.cost();
        sh4(&mut f, &inst, &mut rng(0));
        assert_relative_eq!(f.cost(), before, epsilon = 1e-12);
        assert!(check_feasible(&f, &inst).is_feasible());
    }

    #[test]
    fn sh4_returns_input_when_all_swaps_infeasible() {
        // Two demands: 1 close to the supply (r high), 2 must hang below 1.
        // Swapped positions violate alpha, so the input comes back.
        let mut cost = SymMatrix::zeros(3);
        cost.set(0, 1, 1.0);
        cost.set(0, 2, 1.0);
        cost.set(1, 2, 1.0);
        let mut rel = SymMatrix::zeros(3);
        rel.set(0, 1, 0.96);
        rel.set(1, 2, 0.999);
        rel.set(0, 2, 0.90); // 2 cannot sit directly under the supply
        let inst = Instance::reliability(1, cost, rel, 0.95, Provenance::default()).unwrap();
        let f0 = Forest::from_parents(&inst, &[0, 1]).unwrap();
        assert!(check_feasible(&f0, &inst).is_feasible());
        let mut f = f0.clone();
        sh4(&mut f, &inst, &mut rng(7));
        assert_eq!(f.parent(1), Some(0));
        assert_eq!(f.parent(2), Some(1));
    }

    #[test]
    fn sh5_and_sh6_stay_feasible_over_many_seeds() {
        for seed in 0..100 {
            let inst = random_instance(12, 2, 0.93, seed % 9);
            let mut f = initialize(&inst, &mut rng(seed)).unwrap();
            sh5(&mut f, &inst, &mut rng(seed + 1));
            assert!(check_feasible(&f, &inst).is_feasible(), "sh5 seed {seed}");
            sh6(&mut f, &inst, &mut rng(seed + 2));
            assert!(check_feasible(&f, &inst).is_feasible(), "sh6 seed {seed}");
        }
    }

    #[test]
    fn sh6_single_arc_forest_reattaches_or_restores() {
        let inst = random_instance(2, 1, 0.9, 0);
        let mut f = Forest::from_parents(&inst, &[0]).unwrap();
        sh6(&mut f, &inst, &mut rng(0));
        assert_eq!(f.parent(1), Some(0));
        assert!(check_feasible(&f, &inst).is_feasible());
    }
}

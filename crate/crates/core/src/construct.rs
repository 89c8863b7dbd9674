//! Feasible initial solutions.
//!
//! Prim runs over the input graph with supply-supply arc costs forced to
//! zero; dropping those arcs from the resulting MST leaves a spanning forest
//! with one tree per supply. While some root path still breaks the budget, a
//! random violating leaf is plucked and re-attached at its cheapest feasible
//! type-II point. That move never hurts any other path, so the number of
//! violating vertices drops by one per iteration and the loop finishes in at
//! most `n - m` reinsertions.

use crate::forest::{check_feasible, Forest, InsertionPoint};
use crate::instance::Instance;
use crate::mst::prim_parents;
use rand::seq::IndexedRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConstructError {
    #[error("vertex {vertex} has no feasible insertion point; the instance violates the direct-arc guarantee")]
    NoFeasiblePosition { vertex: usize },
}

/// Builds a feasible forest: contracted-MST start, then leaf repair.
pub fn initialize<R: Rng>(inst: &Instance, rng: &mut R) -> Result<Forest, ConstructError> {
    let modified_cost = |i: usize, j: usize| {
        if inst.is_supply(i) && inst.is_supply(j) {
            0.0
        } else {
            inst.cost(i, j)
        }
    };
    let prim = prim_parents(inst.n(), 0, modified_cost);
    let parents: Vec<usize> = inst.demands().map(|v| prim[v]).collect();
    let mut forest = Forest::from_parents(inst, &parents).expect("prim emits a valid tree");

    repair_to_feasible(&mut forest, inst, rng)?;
    debug_assert!(check_feasible(&forest, inst).is_feasible());
    Ok(forest)
}

/// Re-attaches budget-violating leaves at their cheapest feasible type-II
/// points until every root path fits the budget. Shared by the constructor
/// and the path-grafting shaking operators.
pub fn repair_to_feasible<R: Rng>(
    forest: &mut Forest,
    inst: &Instance,
    rng: &mut R,
) -> Result<(), ConstructError> {
    let budget = inst.budget();
    let max_rounds = inst.demand_count();
    for _ in 0..=max_rounds {
        let violating: Vec<usize> = forest
            .leaves()
            .into_iter()
            .filter(|&v| !budget.admits(forest.path_weight(v)))
            .collect();
        let Some(&leaf) = violating.choose(rng) else {
            return Ok(());
        };
        let parent = forest.parent(leaf).expect("leaves are attached");
        forest
            .detach_subtree((parent, leaf), inst)
            .expect("leaf arc exists");
        let point = cheapest_feasible_type2_point(forest, leaf, inst)
            .ok_or(ConstructError::NoFeasiblePosition { vertex: leaf })?;
        forest
            .apply_insertion(leaf, InsertionPoint::Vertex(point), inst)
            .expect("point was checked feasible");
    }
    // One fix per round, at most n - m violating vertices to fix.
    unreachable!("repair loop exceeded its reinsertion bound");
}

/// Cheapest attached vertex under which `v` can hang within budget.
/// Ties break toward the lowest vertex id.
fn cheapest_feasible_type2_point(forest: &Forest, v: usize, inst: &Instance) -> Option<usize> {
    let budget = inst.budget();
    (0..inst.n())
        .filter(|&j| j != v && forest.is_attached(j))
        .filter(|&j| budget.admits(forest.path_weight(j) + inst.weight(j, v)))
        .min_by(|&a, &b| {
            inst.cost(a, v)
                .partial_cmp(&inst.cost(b, v))
                .unwrap()
                .then(a.cmp(&b))
        })
}

//! Problem instances: vertex partition, arc costs, per-arc reliabilities or
//! delays, and the per-path budget they induce.
//!
//! Vertices are `0..n`; supplies are `0..m` and demands `m..n`. All path
//! feasibility checks run in the additive weight domain: reliabilities are
//! mapped through `w = -ln r` once at construction and products of
//! reliabilities become sums of weights. Reliabilities are materialized again
//! only for reporting.

use crate::matrix::SymMatrix;
use thiserror::Error;

/// Slack applied to every additive budget comparison.
pub const PATH_TOL: f64 = 1e-9;

/// How the per-path constraint is expressed on the arcs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetMode {
    /// Product of arc reliabilities must stay at or above a threshold.
    Reliability,
    /// Sum of arc delays must stay at or below a bound.
    Delay,
}

/// Unified additive path constraint: a path is feasible iff the sum of its
/// arc weights is at most `limit` (plus [`PATH_TOL`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathBudget {
    mode: BudgetMode,
    threshold: f64,
    limit: f64,
}

impl PathBudget {
    /// Budget for a minimum path reliability `alpha` in (0, 1].
    pub fn reliability(alpha: f64) -> Result<Self, InstanceError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(InstanceError::BadThreshold { value: alpha });
        }
        Ok(Self {
            mode: BudgetMode::Reliability,
            threshold: alpha,
            limit: -alpha.ln(),
        })
    }

    /// Budget for a maximum path delay `bound` > 0.
    pub fn delay(bound: f64) -> Result<Self, InstanceError> {
        if bound <= 0.0 || !bound.is_finite() {
            return Err(InstanceError::BadThreshold { value: bound });
        }
        Ok(Self {
            mode: BudgetMode::Delay,
            threshold: bound,
            limit: bound,
        })
    }

    pub fn mode(&self) -> BudgetMode {
        self.mode
    }

    /// The raw threshold: `alpha` in reliability mode, the delay bound otherwise.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// The additive budget: `-ln alpha` in reliability mode, the bound otherwise.
    pub fn limit(&self) -> f64 {
        self.limit
    }

    /// Whether a path with the given additive weight sum is feasible.
    #[inline]
    pub fn admits(&self, weight_sum: f64) -> bool {
        weight_sum <= self.limit + PATH_TOL
    }
}

/// Where an instance came from. Not serialized; carried for reporting and
/// tests only.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub family: Option<String>,
    pub seed: Option<u64>,
    /// Planar coordinates for Euclidean families.
    pub coords: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("need 1 <= m < n, got n = {n}, m = {m}")]
    BadPartition { n: usize, m: usize },
    #[error("matrix dimension {got} does not match vertex count {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cost matrix must be nonnegative and finite with zero diagonal")]
    BadCosts,
    #[error("reliabilities must satisfy 0 < r <= 1")]
    BadReliability,
    #[error("delays must be nonnegative and finite")]
    BadDelay,
    #[error("threshold {value} out of range for the requested mode")]
    BadThreshold { value: f64 },
}

/// An immutable problem instance. Shareable across threads.
#[derive(Clone, Debug)]
pub struct Instance {
    n: usize,
    m: usize,
    cost: SymMatrix,
    /// Per-arc reliabilities (reliability mode) or delays (delay mode), as
    /// written to instance files.
    values: SymMatrix,
    /// Additive path weights: `-ln r` or the delay itself.
    weight: SymMatrix,
    budget: PathBudget,
    meta: Provenance,
}

impl Instance {
    /// Reliability-mode instance from a cost matrix, a reliability matrix and
    /// a minimum path reliability `alpha`.
    pub fn reliability(
        m: usize,
        cost: SymMatrix,
        rel: SymMatrix,
        alpha: f64,
        meta: Provenance,
    ) -> Result<Self, InstanceError> {
        let budget = PathBudget::reliability(alpha)?;
        Self::build(m, cost, rel, budget, meta)
    }

    /// Delay-mode instance from a cost matrix, a delay matrix and a maximum
    /// path delay `bound`.
    pub fn delay(
        m: usize,
        cost: SymMatrix,
        delays: SymMatrix,
        bound: f64,
        meta: Provenance,
    ) -> Result<Self, InstanceError> {
        let budget = PathBudget::delay(bound)?;
        Self::build(m, cost, delays, budget, meta)
    }

    pub fn build(
        m: usize,
        cost: SymMatrix,
        values: SymMatrix,
        budget: PathBudget,
        meta: Provenance,
    ) -> Result<Self, InstanceError> {
        let n = cost.n();
        // m == n (no demands) is allowed as a degenerate case: the empty
        // forest is its unique, zero-cost solution.
        if m < 1 || m > n {
            return Err(InstanceError::BadPartition { n, m });
        }
        if values.n() != n {
            return Err(InstanceError::DimensionMismatch {
                expected: n,
                got: values.n(),
            });
        }
        if !cost.entries_satisfy(|c| c >= 0.0 && c.is_finite()) {
            return Err(InstanceError::BadCosts);
        }
        match budget.mode() {
            BudgetMode::Reliability => {
                if !values.entries_satisfy(|r| r > 0.0 && r <= 1.0) {
                    return Err(InstanceError::BadReliability);
                }
            }
            BudgetMode::Delay => {
                if !values.entries_satisfy(|d| d >= 0.0 && d.is_finite()) {
                    return Err(InstanceError::BadDelay);
                }
            }
        }
        let weight = match budget.mode() {
            BudgetMode::Reliability => SymMatrix::from_fn(n, |i, j| -values.get(i, j).ln()),
            BudgetMode::Delay => values.clone(),
        };
        Ok(Self {
            n,
            m,
            cost,
            values,
            weight,
            budget,
            meta,
        })
    }

    /// Same matrices and mode, different threshold. Used to tighten or relax
    /// the budget on an existing instance.
    pub fn with_threshold(&self, threshold: f64) -> Result<Self, InstanceError> {
        let budget = match self.budget.mode() {
            BudgetMode::Reliability => PathBudget::reliability(threshold)?,
            BudgetMode::Delay => PathBudget::delay(threshold)?,
        };
        let mut out = self.clone();
        out.budget = budget;
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of supply vertices; supplies are `0..m`.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn supplies(&self) -> std::ops::Range<usize> {
        0..self.m
    }

    pub fn demands(&self) -> std::ops::Range<usize> {
        self.m..self.n
    }

    pub fn demand_count(&self) -> usize {
        self.n - self.m
    }

    #[inline]
    pub fn is_supply(&self, v: usize) -> bool {
        v < self.m
    }

    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost.get(i, j)
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weight.get(i, j)
    }

    /// Arc reliability `exp(-w)`. Meaningful in reliability mode.
    pub fn arc_reliability(&self, i: usize, j: usize) -> f64 {
        (-self.weight.get(i, j)).exp()
    }

    /// The raw per-arc value: reliability or delay, depending on the mode.
    pub fn arc_value(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn cost_matrix(&self) -> &SymMatrix {
        &self.cost
    }

    pub fn value_matrix(&self) -> &SymMatrix {
        &self.values
    }

    pub fn budget(&self) -> &PathBudget {
        &self.budget
    }

    pub fn meta(&self) -> &Provenance {
        &self.meta
    }

    /// Whether every demand vertex has a direct arc to some supply whose
    /// weight is within budget. Generated instances guarantee this; arbitrary
    /// instances may not.
    pub fn has_direct_feasibility(&self) -> bool {
        self.demands()
            .all(|d| self.supplies().any(|s| self.budget.admits(self.weight(s, d))))
    }

    /// Matrix-wise equality: partition, matrices and budget, ignoring `meta`.
    pub fn same_data(&self, other: &Instance) -> bool {
        self.n == other.n
            && self.m == other.m
            && self.cost == other.cost
            && self.values == other.values
            && self.budget == other.budget
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny_rel_instance(alpha: f64) -> Instance {
        // 1 supply, 2 demands.
        let mut cost = SymMatrix::zeros(3);
        cost.set(0, 1, 5.0);
        cost.set(0, 2, 7.0);
        cost.set(1, 2, 2.0);
        let mut rel = SymMatrix::zeros(3);
        rel.set(0, 1, 0.9);
        rel.set(0, 2, 0.95);
        rel.set(1, 2, 0.99);
        Instance::reliability(1, cost, rel, alpha, Provenance::default()).unwrap()
    }

    #[test]
    fn budget_limit_is_negative_log_of_alpha() {
        let b = PathBudget::reliability(0.8).unwrap();
        assert_relative_eq!(b.limit(), -(0.8f64.ln()), epsilon = 1e-15);
        assert_eq!(b.mode(), BudgetMode::Reliability);

        let d = PathBudget::delay(12.0).unwrap();
        assert_eq!(d.limit(), 12.0);
        assert_eq!(d.mode(), BudgetMode::Delay);
    }

    #[test]
    fn admits_applies_tolerance() {
        let b = PathBudget::delay(1.0).unwrap();
        assert!(b.admits(1.0));
        assert!(b.admits(1.0 + 0.5e-9));
        assert!(!b.admits(1.0 + 1e-8));
    }

    #[test]
    fn weight_is_negative_log_reliability() {
        let inst = tiny_rel_instance(0.8);
        assert_relative_eq!(inst.weight(0, 1), -(0.9f64.ln()), epsilon = 1e-15);
        assert_relative_eq!(inst.arc_reliability(0, 1), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_partition_and_ranges() {
        let cost = SymMatrix::zeros(3);
        let rel = SymMatrix::from_fn(3, |_, _| 0.9);
        assert!(matches!(
            Instance::reliability(4, cost.clone(), rel.clone(), 0.9, Provenance::default()),
            Err(InstanceError::BadPartition { .. })
        ));
        assert!(matches!(
            Instance::reliability(0, cost.clone(), rel.clone(), 0.9, Provenance::default()),
            Err(InstanceError::BadPartition { .. })
        ));

        let mut bad_rel = SymMatrix::zeros(3);
        bad_rel.set(0, 1, 1.5);
        bad_rel.set(0, 2, 0.9);
        bad_rel.set(1, 2, 0.9);
        assert!(matches!(
            Instance::reliability(1, cost.clone(), bad_rel, 0.9, Provenance::default()),
            Err(InstanceError::BadReliability)
        ));

        assert!(matches!(
            Instance::reliability(1, cost, SymMatrix::from_fn(3, |_, _| 0.9), 1.5, Provenance::default()),
            Err(InstanceError::BadThreshold { .. })
        ));
    }

    #[test]
    fn direct_feasibility_reflects_budget() {
        let inst = tiny_rel_instance(0.9);
        assert!(inst.has_direct_feasibility());
        // alpha above every direct reliability of demand 1 (r = 0.9).
        let tight = inst.with_threshold(0.93).unwrap();
        assert!(!tight.has_direct_feasibility());
    }

    #[test]
    fn with_threshold_keeps_matrices() {
        let inst = tiny_rel_instance(0.8);
        let relaxed = inst.with_threshold(0.5).unwrap();
        assert!(inst.cost_matrix() == relaxed.cost_matrix());
        assert_relative_eq!(relaxed.budget().limit(), -(0.5f64.ln()), epsilon = 1e-15);
    }
}

//! Random instance generation and the instance/solution text formats.
//!
//! Three generator families mirror the usual benchmarks: Euclidean instances
//! on the `[0,100] x [0,100]` grid, non-metric instances with integer costs,
//! and single-source delay-bounded instances (tr/tc/te) where the per-path
//! constraint is an additive delay budget. Generation is deterministic per
//! seed; the RNG is a seedable xoshiro generator, so the same seed produces
//! the same instance on every platform.

use crate::instance::{BudgetMode, Instance, PathBudget, Provenance};
use crate::forest::Forest;
use crate::matrix::SymMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

/// Instance family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Costs are Euclidean distances of random points, reliabilities in `[alpha, 1]`.
    Euclidean,
    /// Integer costs in `[1, 100]`, reliabilities in `[alpha, 1]`.
    NonMetric,
    /// Single source, integer delays in `[1, W]`, random integer costs.
    TrLike,
    /// Single source at the grid center, Euclidean costs, integer delays.
    TcLike,
    /// Single source at the grid corner, Euclidean costs, integer delays.
    TeLike,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Euclidean => "euclidean",
            Family::NonMetric => "nonmetric",
            Family::TrLike => "tr",
            Family::TcLike => "tc",
            Family::TeLike => "te",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "euclidean" => Some(Family::Euclidean),
            "nonmetric" => Some(Family::NonMetric),
            "tr" => Some(Family::TrLike),
            "tc" => Some(Family::TcLike),
            "te" => Some(Family::TeLike),
            _ => None,
        }
    }

    pub fn is_delay(&self) -> bool {
        matches!(self, Family::TrLike | Family::TcLike | Family::TeLike)
    }
}

/// The constraint side of a generation request.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintSpec {
    /// Minimum path reliability `alpha`; arc reliabilities drawn from `[alpha, 1]`.
    Reliability { alpha: f64 },
    /// Arc delays drawn from `[1, max_delay]`, path delay bounded by `bound`.
    Delay { max_delay: u32, bound: f64 },
}

/// A generation request: family, sizes, constraint and seed.
#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub constraint: ConstraintSpec,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("family {family} requires m = 1, got {m}")]
    SingleSourceFamily { family: &'static str, m: usize },
    #[error("need n >= m + 1, got n = {n}, m = {m}")]
    TooSmall { n: usize, m: usize },
    #[error("family {family} requires a {expected} constraint")]
    ConstraintMismatch {
        family: &'static str,
        expected: &'static str,
    },
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("delay bound must be at least 1, got {0}")]
    BadBound(f64),
    #[error("max delay must be at least 1, got {0}")]
    BadMaxDelay(u32),
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.n < self.m + 1 {
            return Err(GenError::TooSmall { n: self.n, m: self.m });
        }
        match (self.family.is_delay(), &self.constraint) {
            (false, ConstraintSpec::Reliability { alpha }) => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(GenError::BadAlpha(*alpha));
                }
            }
            (true, ConstraintSpec::Delay { max_delay, bound }) => {
                if self.m != 1 {
                    return Err(GenError::SingleSourceFamily {
                        family: self.family.name(),
                        m: self.m,
                    });
                }
                if *max_delay < 1 {
                    return Err(GenError::BadMaxDelay(*max_delay));
                }
                if *bound < 1.0 || !bound.is_finite() {
                    return Err(GenError::BadBound(*bound));
                }
            }
            (false, _) => {
                return Err(GenError::ConstraintMismatch {
                    family: self.family.name(),
                    expected: "reliability",
                })
            }
            (true, _) => {
                return Err(GenError::ConstraintMismatch {
                    family: self.family.name(),
                    expected: "delay",
                })
            }
        }
        Ok(())
    }

    fn rng(&self) -> Xoshiro256StarStar {
        Xoshiro256StarStar::seed_from_u64(self.seed)
    }

    fn provenance(&self, coords: Option<Vec<(f64, f64)>>) -> Provenance {
        Provenance {
            family: Some(self.family.name().to_string()),
            seed: Some(self.seed),
            coords,
        }
    }
}

/// Generates an instance of whichever family the spec names.
pub fn generate(spec: &GenSpec) -> Result<Instance, GenError> {
    match spec.family {
        Family::Euclidean => gen_euclidean(spec),
        Family::NonMetric => gen_nonmetric(spec),
        Family::TrLike | Family::TcLike | Family::TeLike => gen_dcmst_like(spec),
    }
}

fn draw_coords<R: Rng>(n: usize, rng: &mut R) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| (rng.random_range(0.0..=100.0), rng.random_range(0.0..=100.0)))
        .collect()
}

fn euclidean_costs(coords: &[(f64, f64)]) -> SymMatrix {
    SymMatrix::from_fn(coords.len(), |i, j| {
        let (xi, yi) = coords[i];
        let (xj, yj) = coords[j];
        ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt()
    })
}

fn draw_reliabilities<R: Rng>(n: usize, alpha: f64, rng: &mut R) -> SymMatrix {
    SymMatrix::from_fn(n, |_, _| rng.random_range(alpha..=1.0))
}

/// Euclidean family: uniform points on the grid, Euclidean costs,
/// reliabilities drawn from `[alpha, 1]` so every direct arc is feasible.
pub fn gen_euclidean(spec: &GenSpec) -> Result<Instance, GenError> {
    spec.validate()?;
    let ConstraintSpec::Reliability { alpha } = spec.constraint else {
        return Err(GenError::ConstraintMismatch {
            family: spec.family.name(),
            expected: "reliability",
        });
    };
    let mut rng = spec.rng();
    let coords = draw_coords(spec.n, &mut rng);
    let cost = euclidean_costs(&coords);
    let rel = draw_reliabilities(spec.n, alpha, &mut rng);
    Ok(Instance::reliability(spec.m, cost, rel, alpha, spec.provenance(Some(coords)))
        .expect("generated matrices satisfy the instance invariants"))
}

/// Non-metric family: integer costs uniform in `[1, 100]`.
pub fn gen_nonmetric(spec: &GenSpec) -> Result<Instance, GenError> {
    spec.validate()?;
    let ConstraintSpec::Reliability { alpha } = spec.constraint else {
        return Err(GenError::ConstraintMismatch {
            family: spec.family.name(),
            expected: "reliability",
        });
    };
    let mut rng = spec.rng();
    let cost = SymMatrix::from_fn(spec.n, |_, _| rng.random_range(1..=100) as f64);
    let rel = draw_reliabilities(spec.n, alpha, &mut rng);
    Ok(Instance::reliability(spec.m, cost, rel, alpha, spec.provenance(None))
        .expect("generated matrices satisfy the instance invariants"))
}

/// Delay-bounded single-source families (tr/tc/te). Direct source arcs whose
/// delay would exceed the bound are redrawn within it, so every generated
/// instance keeps the direct-arc feasibility guarantee.
pub fn gen_dcmst_like(spec: &GenSpec) -> Result<Instance, GenError> {
    spec.validate()?;
    let ConstraintSpec::Delay { max_delay, bound } = spec.constraint else {
        return Err(GenError::ConstraintMismatch {
            family: spec.family.name(),
            expected: "delay",
        });
    };
    let mut rng = spec.rng();
    let (cost, coords) = match spec.family {
        Family::TrLike => (
            SymMatrix::from_fn(spec.n, |_, _| rng.random_range(1..=100) as f64),
            None,
        ),
        Family::TcLike | Family::TeLike => {
            let mut coords = draw_coords(spec.n, &mut rng);
            coords[0] = if spec.family == Family::TcLike {
                (50.0, 50.0)
            } else {
                (0.0, 0.0)
            };
            (euclidean_costs(&coords), Some(coords))
        }
        _ => unreachable!("validated above"),
    };
    let mut delays = SymMatrix::from_fn(spec.n, |_, _| rng.random_range(1..=max_delay) as f64);
    let direct_cap = max_delay.min(bound.floor() as u32).max(1);
    for d in 1..spec.n {
        if delays.get(0, d) > bound {
            delays.set(0, d, rng.random_range(1..=direct_cap) as f64);
        }
    }
    Ok(Instance::delay(1, cost, delays, bound, spec.provenance(coords))
        .expect("generated matrices satisfy the instance invariants"))
}

// ---------------------------------------------------------------------------
// Text formats
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum ReadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("instance data invalid: {0}")]
    Invalid(#[from] crate::instance::InstanceError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> ReadError {
    ReadError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Renders an instance in the canonical text format:
/// a `rckrmsf 1` header, one line `n m mode threshold`, then the strict
/// lower triangles of the cost matrix and of the reliability (or delay)
/// matrix, one row per vertex.
pub fn instance_to_text(inst: &Instance) -> String {
    let mode = match inst.budget().mode() {
        BudgetMode::Reliability => "reliability",
        BudgetMode::Delay => "delay",
    };
    let mut out = String::new();
    writeln!(out, "rckrmsf 1").unwrap();
    writeln!(out, "{} {} {} {}", inst.n(), inst.m(), mode, inst.budget().threshold()).unwrap();
    for matrix in [inst.cost_matrix(), inst.value_matrix()] {
        for i in 1..inst.n() {
            let row: Vec<String> = (0..i).map(|j| matrix.get(i, j).to_string()).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
    }
    out
}

/// Parses the text produced by [`instance_to_text`].
pub fn instance_from_text(text: &str) -> Result<Instance, ReadError> {
    let mut lines = text.lines().enumerate();
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if header.trim() != "rckrmsf 1" {
        return Err(parse_err(ln + 1, "expected header \"rckrmsf 1\""));
    }
    let (ln, line) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing size line"))?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(parse_err(ln + 1, "expected \"n m mode threshold\""));
    }
    let n: usize = fields[0]
        .parse()
        .map_err(|_| parse_err(ln + 1, "bad vertex count"))?;
    let m: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(ln + 1, "bad supply count"))?;
    let mode = fields[2];
    let threshold: f64 = fields[3]
        .parse()
        .map_err(|_| parse_err(ln + 1, "bad threshold"))?;

    let mut read_matrix = |name: &str| -> Result<SymMatrix, ReadError> {
        let mut matrix = SymMatrix::zeros(n);
        for i in 1..n {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| parse_err(2 + i, format!("missing {name} row for vertex {i}")))?;
            let entries: Vec<&str> = line.split_whitespace().collect();
            if entries.len() != i {
                return Err(parse_err(
                    ln + 1,
                    format!("expected {i} {name} entries, found {}", entries.len()),
                ));
            }
            for (j, raw) in entries.iter().enumerate() {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| parse_err(ln + 1, format!("bad {name} value {raw:?}")))?;
                matrix.set(i, j, v);
            }
        }
        Ok(matrix)
    };

    let cost = read_matrix("cost")?;
    let values = read_matrix("value")?;
    let budget = match mode {
        "reliability" => PathBudget::reliability(threshold),
        "delay" => PathBudget::delay(threshold),
        other => return Err(parse_err(2, format!("unknown mode {other:?}"))),
    }
    .map_err(ReadError::Invalid)?;
    Ok(Instance::build(m, cost, values, budget, Provenance::default())?)
}

pub fn write_instance(inst: &Instance, path: &Path) -> std::io::Result<()> {
    fs::write(path, instance_to_text(inst))
}

pub fn read_instance(path: &Path) -> Result<Instance, ReadError> {
    instance_from_text(&fs::read_to_string(path)?)
}

/// Renders a fully attached forest as one `child parent` record per demand
/// vertex, ascending, with 1-based vertex ids.
pub fn solution_to_text(forest: &Forest, inst: &Instance) -> std::io::Result<String> {
    let mut out = String::new();
    writeln!(out, "rckrmsf-solution 1").unwrap();
    writeln!(out, "{} {} {}", inst.n(), inst.m(), forest.cost()).unwrap();
    for v in inst.demands() {
        let p = forest.parent(v).ok_or_else(|| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("vertex {v} is detached; only complete forests can be written"),
            )
        })?;
        writeln!(out, "{} {}", v + 1, p + 1).unwrap();
    }
    Ok(out)
}

pub fn write_solution(forest: &Forest, inst: &Instance, path: &Path) -> std::io::Result<()> {
    fs::write(path, solution_to_text(forest, inst)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::check_feasible;

    fn euclid_spec(seed: u64) -> GenSpec {
        GenSpec {
            family: Family::Euclidean,
            n: 20,
            m: 2,
            constraint: ConstraintSpec::Reliability { alpha: 0.95 },
            seed,
        }
    }

    #[test]
    fn euclidean_ranges_and_guarantee() {
        for seed in 0..100 {
            let spec = euclid_spec(seed);
            let inst = generate(&spec).unwrap();
            let coords = inst.meta().coords.as_ref().unwrap();
            assert!(coords
                .iter()
                .all(|&(x, y)| (0.0..=100.0).contains(&x) && (0.0..=100.0).contains(&y)));
            for i in 0..inst.n() {
                for j in (i + 1)..inst.n() {
                    let r = inst.arc_value(i, j);
                    assert!((0.95..=1.0).contains(&r), "r out of range: {r}");
                    assert!(inst.cost(i, j) >= 0.0);
                }
            }
            assert!(inst.has_direct_feasibility());
        }
    }

    #[test]
    fn nonmetric_costs_are_integers_in_range() {
        for seed in 0..100 {
            let inst = generate(&GenSpec {
                family: Family::NonMetric,
                n: 15,
                m: 3,
                constraint: ConstraintSpec::Reliability { alpha: 0.9 },
                seed,
            })
            .unwrap();
            for i in 0..inst.n() {
                for j in (i + 1)..inst.n() {
                    let c = inst.cost(i, j);
                    assert_eq!(c.fract(), 0.0);
                    assert!((1.0..=100.0).contains(&c));
                }
            }
            assert!(inst.has_direct_feasibility());
        }
    }

    #[test]
    fn dcmst_families_place_sources_and_bound_delays() {
        for seed in 0..100 {
            for family in [Family::TrLike, Family::TcLike, Family::TeLike] {
                let inst = generate(&GenSpec {
                    family,
                    n: 12,
                    m: 1,
                    constraint: ConstraintSpec::Delay {
                        max_delay: 10,
                        bound: 25.0,
                    },
                    seed,
                })
                .unwrap();
                for i in 0..inst.n() {
                    for j in (i + 1)..inst.n() {
                        let d = inst.arc_value(i, j);
                        assert_eq!(d.fract(), 0.0);
                        assert!((1.0..=10.0).contains(&d));
                    }
                }
                assert!(inst.has_direct_feasibility());
                match family {
                    Family::TcLike => {
                        assert_eq!(inst.meta().coords.as_ref().unwrap()[0], (50.0, 50.0))
                    }
                    Family::TeLike => {
                        assert_eq!(inst.meta().coords.as_ref().unwrap()[0], (0.0, 0.0))
                    }
                    _ => assert!(inst.meta().coords.is_none()),
                }
            }
        }
    }

    #[test]
    fn tight_delay_bound_repairs_direct_arcs() {
        let inst = generate(&GenSpec {
            family: Family::TrLike,
            n: 10,
            m: 1,
            constraint: ConstraintSpec::Delay {
                max_delay: 100,
                bound: 5.0,
            },
            seed: 3,
        })
        .unwrap();
        for d in inst.demands() {
            assert!(inst.weight(0, d) <= 5.0);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = instance_to_text(&generate(&euclid_spec(7)).unwrap());
        let b = instance_to_text(&generate(&euclid_spec(7)).unwrap());
        assert_eq!(a, b);
        let c = instance_to_text(&generate(&euclid_spec(8)).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn instance_round_trip_is_lossless() {
        for spec in [
            euclid_spec(42),
            GenSpec {
                family: Family::TcLike,
                n: 9,
                m: 1,
                constraint: ConstraintSpec::Delay {
                    max_delay: 5,
                    bound: 12.0,
                },
                seed: 42,
            },
        ] {
            let inst = generate(&spec).unwrap();
            let back = instance_from_text(&instance_to_text(&inst)).unwrap();
            assert!(inst.same_data(&back));
        }
    }

    #[test]
    fn truncated_file_reports_line() {
        let inst = generate(&euclid_spec(1)).unwrap();
        let text = instance_to_text(&inst);
        let truncated: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        match instance_from_text(&truncated) {
            Err(ReadError::Parse { line, .. }) => assert!(line >= 10),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn garbled_value_reports_line() {
        let inst = generate(&euclid_spec(1)).unwrap();
        let mut lines: Vec<String> = instance_to_text(&inst).lines().map(String::from).collect();
        lines[4] = lines[4].replace(char::is_numeric, "x");
        match instance_from_text(&lines.join("\n")) {
            Err(ReadError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn solution_lists_one_record_per_demand() {
        let inst = generate(&euclid_spec(5)).unwrap();
        let f = Forest::from_parents(&inst, &vec![0; inst.demand_count()]).unwrap();
        assert!(check_feasible(&f, &inst).is_feasible());
        let text = solution_to_text(&f, &inst).unwrap();
        assert_eq!(text.lines().count(), 2 + inst.demand_count());
    }
}

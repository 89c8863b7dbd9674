//! Genetic parameter tuning for the search engine.
//!
//! A chromosome holds one gene per tunable parameter, each gene indexing
//! into that parameter's candidate grid. Fitness is the mean best cost of a
//! single engine run per tuning instance, under per-instance seeds fixed
//! once up front, so fitness is deterministic and cacheable by chromosome.
//! Selection is truncation (the top 1/s of the population gets s copies in
//! the mating pool), recombination is one-point crossover, mutation redraws
//! one random gene, and the best chromosome ever seen always survives.

use crate::engine::{self, AlnsParams};
use crate::instance::Instance;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;
use std::collections::HashMap;
use std::fmt::Write as _;
use thiserror::Error;

/// Engine parameters that can be tuned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TunableParam {
    Theta0,
    Epsilon,
    Lambda,
    Eta,
    Zeta1,
    Zeta2,
    Zeta3,
    Phi1,
    Phi2,
    FarThreshold,
}

impl TunableParam {
    pub const ALL: [TunableParam; 10] = [
        TunableParam::Theta0,
        TunableParam::Epsilon,
        TunableParam::Lambda,
        TunableParam::Eta,
        TunableParam::Zeta1,
        TunableParam::Zeta2,
        TunableParam::Zeta3,
        TunableParam::Phi1,
        TunableParam::Phi2,
        TunableParam::FarThreshold,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TunableParam::Theta0 => "theta0",
            TunableParam::Epsilon => "epsilon",
            TunableParam::Lambda => "lambda",
            TunableParam::Eta => "eta",
            TunableParam::Zeta1 => "zeta1",
            TunableParam::Zeta2 => "zeta2",
            TunableParam::Zeta3 => "zeta3",
            TunableParam::Phi1 => "phi1",
            TunableParam::Phi2 => "phi2",
            TunableParam::FarThreshold => "far_threshold",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        TunableParam::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// Candidate values per tuned parameter, in a fixed order.
#[derive(Clone, Debug, Default)]
pub struct ParamGrids {
    pub entries: Vec<(TunableParam, Vec<f64>)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TuneError {
    #[error("no tuning instances supplied")]
    NoInstances,
    #[error("grids are empty or contain an empty candidate set")]
    BadGrids,
    #[error("population and generations must be at least 1, selection share in 1..=population")]
    BadConfig,
    #[error("decoded parameters invalid: {0}")]
    BadDecoded(#[from] engine::ParamError),
    #[error("tuning instance {index} unusable: {msg}")]
    BadInstance { index: usize, msg: String },
}

impl ParamGrids {
    pub fn validate(&self) -> Result<(), TuneError> {
        if self.entries.is_empty() || self.entries.iter().any(|(_, g)| g.is_empty()) {
            return Err(TuneError::BadGrids);
        }
        Ok(())
    }
}

/// GA settings.
#[derive(Clone, Debug)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    /// Truncation share `s`: the top `population / s` chromosomes each get
    /// `s` copies in the mating pool.
    pub selection_share: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 20,
            generations: 30,
            selection_share: 2,
        }
    }
}

/// One candidate parameter combination: gene `g` selects
/// `grids.entries[g].1[genes[g]]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Chromosome {
    pub genes: Vec<usize>,
}

impl Chromosome {
    /// Decodes into engine parameters on top of `base`.
    pub fn decode(&self, grids: &ParamGrids, base: &AlnsParams) -> AlnsParams {
        let mut params = base.clone();
        for (gene, (param, values)) in self.genes.iter().zip(&grids.entries) {
            let v = values[*gene];
            match param {
                TunableParam::Theta0 => params.theta0 = v,
                TunableParam::Epsilon => params.epsilon = v,
                TunableParam::Lambda => params.lambda = v,
                TunableParam::Eta => params.eta = v,
                TunableParam::Zeta1 => params.zeta1 = v,
                TunableParam::Zeta2 => params.zeta2 = v,
                TunableParam::Zeta3 => params.zeta3 = v,
                TunableParam::Phi1 => params.phi1 = v.round().max(1.0) as usize,
                TunableParam::Phi2 => params.phi2 = v.round().max(1.0) as usize,
                TunableParam::FarThreshold => params.far_threshold = Some(v),
            }
        }
        params
    }
}

#[derive(Clone, Debug)]
pub struct GenerationStats {
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

#[derive(Clone, Debug)]
pub struct TuningReport {
    pub best: Chromosome,
    pub best_fitness: f64,
    pub best_params: AlnsParams,
    pub generations: Vec<GenerationStats>,
    pub evaluations: usize,
}

impl TuningReport {
    /// Structured text: per-generation best/mean fitness plus the final
    /// parameter table.
    pub fn render(&self, grids: &ParamGrids) -> String {
        let mut out = String::new();
        writeln!(out, "tuning report").unwrap();
        writeln!(out, "evaluations: {}", self.evaluations).unwrap();
        writeln!(out, "best_fitness: {:.6}", self.best_fitness).unwrap();
        writeln!(out).unwrap();
        writeln!(out, "[generations]").unwrap();
        writeln!(out, "generation best mean").unwrap();
        for (g, stats) in self.generations.iter().enumerate() {
            writeln!(out, "{} {:.6} {:.6}", g + 1, stats.best_fitness, stats.mean_fitness).unwrap();
        }
        writeln!(out).unwrap();
        writeln!(out, "[parameters]").unwrap();
        writeln!(out, "parameter value").unwrap();
        for (gene, (param, values)) in self.best.genes.iter().zip(&grids.entries) {
            writeln!(out, "{} {}", param.name(), values[*gene]).unwrap();
        }
        out
    }
}

/// Runs the GA and returns the fittest chromosome ever evaluated.
pub fn ga_tune(
    instances: &[Instance],
    grids: &ParamGrids,
    config: &GaConfig,
    base: &AlnsParams,
    seed: u64,
) -> Result<TuningReport, TuneError> {
    if instances.is_empty() {
        return Err(TuneError::NoInstances);
    }
    grids.validate()?;
    if config.population == 0
        || config.generations == 0
        || config.selection_share == 0
        || config.selection_share > config.population
    {
        return Err(TuneError::BadConfig);
    }

    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let instance_seeds: Vec<u64> = (0..instances.len()).map(|_| rng.random()).collect();

    let gene_space: Vec<usize> = grids.entries.iter().map(|(_, g)| g.len()).collect();
    let random_chromosome = |rng: &mut Xoshiro256StarStar| Chromosome {
        genes: gene_space.iter().map(|&len| rng.random_range(0..len)).collect(),
    };

    let mut population: Vec<Chromosome> = (0..config.population)
        .map(|_| random_chromosome(&mut rng))
        .collect();

    let mut cache: HashMap<Chromosome, f64> = HashMap::new();
    let mut best: Option<(Chromosome, f64)> = None;
    let mut history = Vec::with_capacity(config.generations);

    for generation in 0..config.generations {
        // Evaluate everything not yet cached, in parallel.
        let pending: Vec<Chromosome> = {
            let mut seen = Vec::new();
            for c in &population {
                if !cache.contains_key(c) && !seen.contains(c) {
                    seen.push(c.clone());
                }
            }
            seen
        };
        let evaluated: Vec<(Chromosome, Result<f64, TuneError>)> = pending
            .into_par_iter()
            .map(|c| {
                let fit = fitness(&c, instances, &instance_seeds, grids, base);
                (c, fit)
            })
            .collect();
        for (c, fit) in evaluated {
            cache.insert(c, fit?);
        }

        let fitnesses: Vec<f64> = population.iter().map(|c| cache[c]).collect();
        for (c, &f) in population.iter().zip(&fitnesses) {
            if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                best = Some((c.clone(), f));
            }
        }
        history.push(GenerationStats {
            best_fitness: fitnesses.iter().copied().fold(f64::INFINITY, f64::min),
            mean_fitness: fitnesses.iter().sum::<f64>() / fitnesses.len() as f64,
        });

        if generation + 1 == config.generations {
            break;
        }

        // Truncation selection: rank, then s copies of the top 1/s.
        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| {
            fitnesses[a]
                .partial_cmp(&fitnesses[b])
                .unwrap()
                .then_with(|| population[a].genes.cmp(&population[b].genes))
        });
        let keep = (config.population / config.selection_share).max(1);
        let mut pool = Vec::with_capacity(keep * config.selection_share);
        for &idx in ranked.iter().take(keep) {
            for _ in 0..config.selection_share {
                pool.push(population[idx].clone());
            }
        }

        let elite = best.as_ref().expect("evaluated above").0.clone();
        let mut next = vec![elite];
        while next.len() < config.population {
            let pa = pool.choose(&mut rng).expect("pool not empty");
            let pb = pool.choose(&mut rng).expect("pool not empty");
            let (mut child_a, mut child_b) = one_point_crossover(pa, pb, &mut rng);
            mutate(&mut child_a, &gene_space, &mut rng);
            mutate(&mut child_b, &gene_space, &mut rng);
            next.push(child_a);
            if next.len() < config.population {
                next.push(child_b);
            }
        }
        population = next;
    }

    let (best, best_fitness) = best.expect("at least one generation ran");
    let best_params = best.decode(grids, base);
    best_params.validate()?;
    Ok(TuningReport {
        best_params,
        best,
        best_fitness,
        generations: history,
        evaluations: cache.len(),
    })
}

/// Mean best cost over the tuning set; the per-instance seeds are fixed, so
/// this is a pure function of the chromosome.
fn fitness(
    chromosome: &Chromosome,
    instances: &[Instance],
    instance_seeds: &[u64],
    grids: &ParamGrids,
    base: &AlnsParams,
) -> Result<f64, TuneError> {
    let params = chromosome.decode(grids, base);
    params.validate()?;
    let costs: Result<Vec<f64>, TuneError> = instances
        .par_iter()
        .zip(instance_seeds)
        .enumerate()
        .map(|(index, (inst, &seed))| {
            engine::run(inst, &params, seed)
                .map(|(_, stats)| stats.best_cost)
                .map_err(|e| TuneError::BadInstance {
                    index,
                    msg: e.to_string(),
                })
        })
        .collect();
    let costs = costs?;
    Ok(costs.iter().sum::<f64>() / costs.len() as f64)
}

/// One-point crossover: swap everything past a random cut. Length-1
/// chromosomes pass through unchanged.
fn one_point_crossover<R: Rng>(a: &Chromosome, b: &Chromosome, rng: &mut R) -> (Chromosome, Chromosome) {
    let len = a.genes.len();
    if len < 2 {
        return (a.clone(), b.clone());
    }
    let cut = rng.random_range(1..len);
    let mut ga = a.genes[..cut].to_vec();
    ga.extend_from_slice(&b.genes[cut..]);
    let mut gb = b.genes[..cut].to_vec();
    gb.extend_from_slice(&a.genes[cut..]);
    (Chromosome { genes: ga }, Chromosome { genes: gb })
}

/// Redraws one random gene to a different candidate where possible.
fn mutate<R: Rng>(c: &mut Chromosome, gene_space: &[usize], rng: &mut R) {
    let idx = rng.random_range(0..c.genes.len());
    let len = gene_space[idx];
    if len < 2 {
        return;
    }
    let mut next = rng.random_range(0..len - 1);
    if next >= c.genes[idx] {
        next += 1;
    }
    c.genes[idx] = next;
}

//! Real-valued evolutionary algorithm with truncation parent selection,
//! one-point crossover, single-gene Gaussian mutation and replace-worst
//! survivor selection. Fitness is minimized.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{BoxDomain, ObjectiveId, Point};
use crate::repressilator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Point,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EaConfig {
    pub pop_size: usize,
    pub generations: u64,
    /// Mutation standard deviation in raw gene units.
    pub mutation_std: f64,
    pub recomb: bool,
    pub mutate: bool,
    pub parent_fraction: f64,
    pub replacement_count: usize,
}

impl EaConfig {
    /// Defaults for the remaining fields: a quarter of the population breeds
    /// and a fifth of it is replaced per generation.
    pub fn new(pop_size: usize, generations: u64, mutation_std: f64, recomb: bool, mutate: bool) -> Self {
        Self {
            pop_size,
            generations,
            mutation_std,
            recomb,
            mutate,
            parent_fraction: 0.25,
            replacement_count: default_replacement(pop_size),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 {
            return Err(Error::config("pop_size", "must be at least 2"));
        }
        if !(self.mutation_std >= 0.0 && self.mutation_std.is_finite()) {
            return Err(Error::config("mutation_std", "must be nonnegative"));
        }
        if !(self.parent_fraction > 0.0 && self.parent_fraction <= 1.0) {
            return Err(Error::config("parent_fraction", "must be in (0, 1]"));
        }
        if self.replacement_count >= self.pop_size {
            return Err(Error::config(
                "replacement_count",
                "must be smaller than pop_size",
            ));
        }
        Ok(())
    }
}

pub fn default_replacement(pop_size: usize) -> usize {
    pop_size.div_ceil(5)
}

/// Search box and fitness function the operators work against.
pub struct Problem<F> {
    pub domain: BoxDomain,
    pub fitness: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Problem<F> {
    pub fn new(domain: BoxDomain, fitness: F) -> Self {
        Self { domain, fitness }
    }

    fn evaluate(&self, genome: Point) -> Individual {
        let fitness = (self.fitness)(&genome);
        Individual { genome, fitness }
    }
}

pub type RepressilatorProblem = Problem<fn(&[f64]) -> f64>;

/// The repressilator parameter fit.
pub fn repressilator_problem() -> RepressilatorProblem {
    Problem::new(
        ObjectiveId::Repressilator.domain(),
        repressilator::genome_fitness as fn(&[f64]) -> f64,
    )
}

pub fn init_population<F, R>(pop_size: usize, problem: &Problem<F>, rng: &mut R) -> Vec<Individual>
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Rng + ?Sized,
{
    let genomes: Vec<Point> = (0..pop_size)
        .map(|_| problem.domain.sample_uniform(rng))
        .collect();
    genomes.into_par_iter().map(|g| problem.evaluate(g)).collect()
}

/// Indices of the `ceil(fraction * n)` lowest-fitness individuals, ties
/// going to the earlier index.
pub fn select_parents(pop: &[Individual], fraction: f64) -> Vec<usize> {
    let k = ((fraction * pop.len() as f64).ceil() as usize).clamp(1, pop.len());
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    idx.sort_by(|&a, &b| pop[a].fitness.total_cmp(&pop[b].fitness));
    idx.truncate(k);
    idx
}

/// `a[..cut] ++ b[cut..]`.
pub fn crossover_at(a: &[f64], b: &[f64], cut: usize) -> Point {
    a[..cut].iter().chain(&b[cut..]).copied().collect()
}

/// Splices two genomes at a cut drawn uniformly from `1..len`.
pub fn one_point_crossover<R: Rng + ?Sized>(a: &[f64], b: &[f64], rng: &mut R) -> Point {
    let cut = rng.random_range(1..a.len());
    crossover_at(a, b, cut)
}

/// Adds `N(0, std^2)` to one uniformly chosen gene, then clamps to the box.
pub fn mutate<R: Rng + ?Sized>(genome: &[f64], std: f64, domain: &BoxDomain, rng: &mut R) -> Point {
    let mut out = genome.to_vec();
    let gene = rng.random_range(0..out.len());
    let noise = if std > 0.0 {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    } else {
        0.0
    };
    out[gene] += noise;
    domain.clamp(&mut out);
    out
}

/// One generation. Offspring draws happen sequentially; only fitness
/// evaluation runs in parallel, so results depend on the seed alone.
pub fn ea_step<F, R>(
    pop: &[Individual],
    recomb: bool,
    mutate_flag: bool,
    cfg: &EaConfig,
    problem: &Problem<F>,
    rng: &mut R,
) -> Result<Vec<Individual>>
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if pop.len() != cfg.pop_size {
        return Err(Error::config(
            "pop_size",
            format!("population has {} individuals, expected {}", pop.len(), cfg.pop_size),
        ));
    }
    if !recomb && !mutate_flag {
        return Ok(pop.to_vec());
    }
    let parents = select_parents(pop, cfg.parent_fraction);
    let mut genomes = Vec::with_capacity(cfg.replacement_count);
    for _ in 0..cfg.replacement_count {
        let mut child = if recomb {
            let (a, b) = if parents.len() >= 2 {
                let pair: Vec<&usize> = parents.choose_multiple(rng, 2).collect();
                (*pair[0], *pair[1])
            } else {
                (parents[0], parents[0])
            };
            one_point_crossover(&pop[a].genome, &pop[b].genome, rng)
        } else {
            pop[*parents.choose(rng).expect("at least one parent")].genome.clone()
        };
        if mutate_flag {
            child = mutate(&child, cfg.mutation_std, &problem.domain, rng);
        }
        genomes.push(child);
    }
    let offspring: Vec<Individual> = genomes.into_par_iter().map(|g| problem.evaluate(g)).collect();

    // Replace the worst; among equal fitness the later individual goes first.
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| pop[b].fitness.total_cmp(&pop[a].fitness).then(b.cmp(&a)));
    let mut next = pop.to_vec();
    for (slot, child) in order.into_iter().zip(offspring) {
        next[slot] = child;
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: u64,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub std_fitness: f64,
}

impl GenerationStats {
    pub fn of(generation: u64, pop: &[Individual]) -> Self {
        let n = pop.len() as f64;
        let best = pop.iter().map(|i| i.fitness).fold(f64::INFINITY, f64::min);
        let mean = pop.iter().map(|i| i.fitness).sum::<f64>() / n;
        let var = pop.iter().map(|i| (i.fitness - mean).powi(2)).sum::<f64>() / n;
        Self {
            generation,
            best_fitness: best,
            mean_fitness: mean,
            std_fitness: var.sqrt(),
        }
    }
}

/// Iteration-at-a-time evolution, also used by live runs.
pub struct EaState<F> {
    pub cfg: EaConfig,
    problem: Problem<F>,
    population: Vec<Individual>,
    pub stats: Vec<GenerationStats>,
}

impl<F: Fn(&[f64]) -> f64 + Sync> EaState<F> {
    pub fn new(cfg: &EaConfig, problem: Problem<F>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            problem,
            population: Vec::new(),
            stats: Vec::new(),
        })
    }

    pub fn next_iteration(&self) -> u64 {
        self.stats.len() as u64
    }

    pub fn is_finished(&self) -> bool {
        self.next_iteration() > self.cfg.generations
    }

    pub fn population(&self) -> &[Individual] {
        &self.population
    }

    pub fn best(&self) -> Option<&Individual> {
        self.population
            .iter()
            .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
    }

    /// Generation 0 initializes the population; later calls evolve it.
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<GenerationStats>> {
        if self.is_finished() {
            return Ok(None);
        }
        let generation = self.next_iteration();
        self.population = if generation == 0 {
            init_population(self.cfg.pop_size, &self.problem, rng)
        } else {
            ea_step(
                &self.population,
                self.cfg.recomb,
                self.cfg.mutate,
                &self.cfg,
                &self.problem,
                rng,
            )?
        };
        let stats = GenerationStats::of(generation, &self.population);
        self.stats.push(stats);
        Ok(Some(stats))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EaRun {
    pub stats: Vec<GenerationStats>,
    pub population: Vec<Individual>,
}

pub fn ea_run_with<F, R>(cfg: &EaConfig, problem: Problem<F>, rng: &mut R) -> Result<EaRun>
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Rng + ?Sized,
{
    let mut state = EaState::new(cfg, problem)?;
    while state.advance(rng)?.is_some() {}
    Ok(EaRun {
        stats: state.stats,
        population: state.population,
    })
}

/// Evolves repressilator parameters toward the reference trajectory.
pub fn ea_run<R: Rng + ?Sized>(cfg: &EaConfig, rng: &mut R) -> Result<EaRun> {
    ea_run_with(cfg, repressilator_problem(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn sphere_problem() -> Problem<fn(&[f64]) -> f64> {
        Problem::new(BoxDomain::cube(-5.0, 5.0, 4).unwrap(), |g: &[f64]| {
            g.iter().map(|v| v * v).sum()
        })
    }

    fn ind(fitness: f64) -> Individual {
        Individual {
            genome: vec![fitness; 4],
            fitness,
        }
    }

    #[test]
    fn selection_by_truncation() {
        let pop = vec![ind(3.0), ind(1.0), ind(2.0)];
        assert_eq!(select_parents(&pop, 1.0).len(), 3);
        assert_eq!(select_parents(&pop, 0.33), vec![1]);
        assert_eq!(select_parents(&pop, 0.34), vec![1, 2]);
        let flat = vec![ind(1.0); 5];
        assert_eq!(select_parents(&flat, 0.5), vec![0, 1, 2]);
    }

    #[test]
    fn crossover_splices() {
        let a = [1.0, 1.0, 1.0, 1000.0];
        let b = [2.0, 2.0, 2.0, 2000.0];
        assert_eq!(crossover_at(&a, &b, 2), vec![1.0, 1.0, 2.0, 2000.0]);
        let mut rng = rng_from_seed(0);
        assert_eq!(one_point_crossover(&a, &a, &mut rng), a.to_vec());
    }

    #[test]
    fn crossover_cut_is_uniform() {
        let a = [0.0; 4];
        let b = [1.0; 4];
        let mut rng = rng_from_seed(17);
        let mut counts = [0usize; 3];
        let n = 3000;
        for _ in 0..n {
            let child = one_point_crossover(&a, &b, &mut rng);
            let cut = child.iter().filter(|v| **v == 0.0).count();
            counts[cut - 1] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.05);
        }
    }

    #[test]
    fn mutation_rules() {
        let dom = ObjectiveId::Repressilator.domain();
        let g = vec![1.0, 2.0, 5.0, 1000.0];
        let mut rng = rng_from_seed(4);
        assert_eq!(mutate(&g, 0.0, &dom, &mut rng), g);
        for _ in 0..200 {
            let m = mutate(&g, 1.0, &dom, &mut rng);
            let changed = m.iter().zip(&g).filter(|(a, b)| a != b).count();
            assert_eq!(changed, 1);
        }
        let top = vec![10.0, 10.0, 20.0, 2500.0];
        for _ in 0..200 {
            let m = mutate(&top, 50.0, &dom, &mut rng);
            assert!(dom.contains(&m).unwrap());
        }
    }

    #[test]
    fn init_population_is_seeded_and_in_box() {
        let p = repressilator_problem();
        let a = init_population(12, &p, &mut rng_from_seed(8));
        let b = init_population(12, &p, &mut rng_from_seed(8));
        assert_eq!(a, b);
        for i in &a {
            assert!(p.domain.contains(&i.genome).unwrap());
            assert_eq!(i.fitness, repressilator::genome_fitness(&i.genome));
        }
        assert_eq!(init_population(1, &p, &mut rng_from_seed(1)).len(), 1);
    }

    #[test]
    fn step_flag_identity() {
        let p = sphere_problem();
        let cfg = EaConfig::new(10, 1, 0.5, false, false);
        let pop = init_population(10, &p, &mut rng_from_seed(2));
        assert_eq!(ea_step(&pop, false, false, &cfg, &p, &mut rng_from_seed(3)).unwrap(), pop);
    }

    #[test]
    fn identical_pair_survives_recombination() {
        let p = sphere_problem();
        let mut cfg = EaConfig::new(2, 1, 0.5, true, false);
        cfg.replacement_count = 1;
        let pop = vec![p.evaluate(vec![1.0, 2.0, 3.0, 4.0]); 2];
        let next = ea_step(&pop, true, false, &cfg, &p, &mut rng_from_seed(5)).unwrap();
        assert_eq!(next, pop);
    }

    #[test]
    fn step_keeps_size_and_best() {
        let p = sphere_problem();
        let cfg = EaConfig {
            replacement_count: 3,
            ..EaConfig::new(15, 1, 0.5, true, true)
        };
        let mut rng = rng_from_seed(6);
        let mut pop = init_population(15, &p, &mut rng);
        for _ in 0..50 {
            let best = GenerationStats::of(0, &pop).best_fitness;
            pop = ea_step(&pop, true, true, &cfg, &p, &mut rng).unwrap();
            assert_eq!(pop.len(), 15);
            assert!(GenerationStats::of(0, &pop).best_fitness <= best);
        }
    }

    #[test]
    fn step_config_errors() {
        let p = sphere_problem();
        let cfg = EaConfig {
            replacement_count: 4,
            ..EaConfig::new(4, 1, 0.5, true, true)
        };
        let pop = init_population(4, &p, &mut rng_from_seed(1));
        assert!(ea_step(&pop, true, true, &cfg, &p, &mut rng_from_seed(1)).is_err());
        assert!(EaConfig::new(1, 1, 1.0, true, true).validate().is_err());
    }

    #[test]
    fn zero_generations_reports_initial_population() {
        let run = ea_run_with(&EaConfig::new(6, 0, 1.0, true, true), sphere_problem(), &mut rng_from_seed(1))
            .unwrap();
        assert_eq!(run.stats.len(), 1);
        assert_eq!(run.stats[0].generation, 0);
    }

    #[test]
    fn sphere_runs_improve_tenfold() {
        for seed in 0..5 {
            let cfg = EaConfig::new(20, 30, 0.5, true, true);
            let run = ea_run_with(&cfg, sphere_problem(), &mut rng_from_seed(seed)).unwrap();
            let first = run.stats[0].best_fitness;
            let last = run.stats.last().unwrap().best_fitness;
            assert!(last < 0.1 * first, "seed {seed}: {first} -> {last}");
            for w in run.stats.windows(2) {
                assert!(w[1].best_fitness <= w[0].best_fitness);
                assert!(w[1].best_fitness <= w[1].mean_fitness);
            }
        }
    }
}

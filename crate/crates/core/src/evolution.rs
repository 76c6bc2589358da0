//! Genetic algorithm over Boolean-network topologies.
//!
//! A genome is the connection matrix followed by the gate matrix, flattened
//! row-major and relaxed to real genes in `[0, 3)`; flooring a gene recovers
//! its matrix digit. Real-coded operators (simulated binary crossover,
//! bounded polynomial mutation) act on the relaxation.
//!
//! Breeding randomness for generation `g` comes from its own seed, so a run
//! is reproducible regardless of the order in which fitness values arrive and
//! can be resumed from any generation boundary.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::network::{Gate, Link, Topology};
use crate::seed;
use crate::sim::{
    run_trial, ArenaConfig, ControllerSpec, InitialStates, StraightStats, TrialOptions, TrialRecord, TrialSeeds,
};
use crate::survival::{estimate_mean_fpt, FptEstimate, SurvivalDataset};

/// Exclusive upper bound of every gene.
pub const GENE_BOUND: f64 = 3.0;

/// Largest representable gene value.
#[inline]
pub fn gene_max() -> f64 {
    f64::from_bits(GENE_BOUND.to_bits() - 1)
}

#[inline]
fn clip_gene(x: f64) -> f64 {
    if x.is_nan() {
        return 0.0;
    }
    x.clamp(0.0, gene_max())
}

pub fn genome_len(size: usize) -> usize {
    size * size + size * (size - 1)
}

/// Real-valued encoding of a network topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    size: usize,
    genes: Vec<f64>,
}

impl Genome {
    pub fn new(size: usize, genes: Vec<f64>) -> Result<Self> {
        if size < 2 || size % 2 != 0 {
            return Err(Error::invalid(alloc::format!("invalid network size {size}")));
        }
        if genes.len() != genome_len(size) {
            return Err(Error::invalid(alloc::format!(
                "a {size}-node genome has {} genes, got {}",
                genome_len(size),
                genes.len()
            )));
        }
        if let Some(g) = genes.iter().find(|g| !(**g >= 0.0 && **g < GENE_BOUND)) {
            return Err(Error::invalid(alloc::format!("gene {g} outside [0, 3)")));
        }
        Ok(Self { size, genes })
    }

    pub fn random<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Self {
        let genes = (0..genome_len(size))
            .map(|_| rng.random_range(0.0..GENE_BOUND))
            .collect();
        Self { size, genes }
    }

    /// Encodes every digit at the center of its unit interval.
    pub fn from_topology(topology: &Topology) -> Self {
        let genes = topology
            .links()
            .iter()
            .map(|l| f64::from(l.digit()) + 0.5)
            .chain(topology.gates().iter().map(|g| f64::from(g.digit()) + 0.5))
            .collect();
        Self {
            size: topology.size(),
            genes,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn genes(&self) -> &[f64] {
        &self.genes
    }

    pub fn decode(&self) -> Topology {
        let digit = |g: f64| (libm::floor(g) as u8).min(2);
        let split = self.size * self.size;
        let links = self.genes[..split]
            .iter()
            .map(|g| Link::from_digit(digit(*g)).unwrap())
            .collect();
        let gates = self.genes[split..]
            .iter()
            .map(|g| Gate::from_digit(digit(*g)).unwrap())
            .collect();
        Topology::new(self.size, links, gates).expect("genome length matches its size")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CrossoverMode {
    /// Each gene pair is recombined with probability `p_crossover`.
    PerGene,
    /// The whole offspring is recombined with probability `p_crossover`.
    PerIndividual,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GaConfig {
    pub network_size: usize,
    pub population: usize,
    pub generations: usize,
    /// Trials per fitness evaluation.
    pub eval_trials: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub sbx_eta: f64,
    pub mutation_eta: f64,
    /// Trials per evaluation when re-assessing the hall of fame.
    pub post_eval_trials: usize,
    pub crossover_mode: CrossoverMode,
    /// Draw fresh evaluation environments every generation.
    pub reseed_per_generation: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            network_size: 20,
            population: 40,
            generations: 700,
            eval_trials: 8,
            p_crossover: 0.5,
            p_mutation: 0.05,
            sbx_eta: 20.0,
            mutation_eta: 20.0,
            post_eval_trials: 100,
            crossover_mode: CrossoverMode::PerGene,
            reseed_per_generation: false,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.population == 0 || self.population % 2 != 0 {
            return Err(Error::Config("population must be even and positive".into()));
        }
        if !prob(self.p_crossover) || !prob(self.p_mutation) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        if !(self.sbx_eta >= 0.0 && self.mutation_eta >= 0.0) {
            return Err(Error::Config("distribution indices must be non-negative".into()));
        }
        if self.eval_trials == 0 || self.post_eval_trials == 0 {
            return Err(Error::Config("evaluations need at least one trial".into()));
        }
        if self.network_size < 4 || self.network_size % 2 != 0 || self.network_size > crate::network::MAX_NODES {
            return Err(Error::Config("network size must be even, >= 4 and <= 64".into()));
        }
        Ok(())
    }
}

#[inline]
fn fitness_key(f: f64) -> f64 {
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

/// Binary tournament: two uniform draws, the lower fitness wins, ties are
/// broken by a fair coin.
pub fn tournament_select<R: Rng + ?Sized>(fitness: &[f64], rng: &mut R) -> Result<usize> {
    if fitness.is_empty() {
        return Err(Error::invalid("tournament over an empty population"));
    }
    let i = rng.random_range(0..fitness.len());
    let j = rng.random_range(0..fitness.len());
    let (fi, fj) = (fitness_key(fitness[i]), fitness_key(fitness[j]));
    Ok(if fi < fj {
        i
    } else if fj < fi {
        j
    } else if rng.random::<bool>() {
        i
    } else {
        j
    })
}

/// Spread factor of simulated binary crossover.
#[inline]
fn sbx_beta(u: f64, eta: f64) -> f64 {
    let exponent = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        libm::pow(2.0 * u, exponent)
    } else {
        libm::pow(1.0 / (2.0 * (1.0 - u)), exponent)
    }
}

/// One SBX child of a gene pair; which of the two siblings is kept is a fair coin.
#[inline]
fn sbx_gene<R: Rng + ?Sized>(x1: f64, x2: f64, eta: f64, rng: &mut R) -> f64 {
    if libm::fabs(x1 - x2) < 1e-14 {
        return x1;
    }
    let beta = sbx_beta(rng.random::<f64>(), eta);
    let child = if rng.random::<bool>() {
        0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2)
    } else {
        0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2)
    };
    clip_gene(child)
}

/// Simulated binary crossover producing a single offspring.
pub fn sbx_crossover<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    p_crossover: f64,
    eta: f64,
    mode: CrossoverMode,
    rng: &mut R,
) -> Result<Genome> {
    if a.genes.len() != b.genes.len() || a.size != b.size {
        return Err(Error::invalid("parents differ in length"));
    }
    let genes = match mode {
        CrossoverMode::PerGene => a
            .genes
            .iter()
            .zip(&b.genes)
            .map(|(&x1, &x2)| {
                if rng.random::<f64>() < p_crossover {
                    sbx_gene(x1, x2, eta, rng)
                } else {
                    x1
                }
            })
            .collect(),
        CrossoverMode::PerIndividual => {
            if rng.random::<f64>() < p_crossover {
                a.genes
                    .iter()
                    .zip(&b.genes)
                    .map(|(&x1, &x2)| sbx_gene(x1, x2, eta, rng))
                    .collect()
            } else {
                a.genes.clone()
            }
        }
    };
    Ok(Genome { size: a.size, genes })
}

/// Bounded polynomial mutation on `[0, 3)`, each gene with probability `p_mutation`.
pub fn polynomial_mutation<R: Rng + ?Sized>(genome: &Genome, p_mutation: f64, eta: f64, rng: &mut R) -> Genome {
    let (lo, hi) = (0.0, GENE_BOUND);
    let span = hi - lo;
    let power = 1.0 / (eta + 1.0);
    let genes = genome
        .genes
        .iter()
        .map(|&x| {
            if rng.random::<f64>() >= p_mutation {
                return x;
            }
            let d1 = (x - lo) / span;
            let d2 = (hi - x) / span;
            let u = rng.random::<f64>();
            let dq = if u < 0.5 {
                let val = 2.0 * u + (1.0 - 2.0 * u) * libm::pow(1.0 - d1, eta + 1.0);
                libm::pow(val, power) - 1.0
            } else {
                let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * libm::pow(1.0 - d2, eta + 1.0);
                1.0 - libm::pow(val, power)
            };
            clip_gene(x + dq * span)
        })
        .collect();
    Genome {
        size: genome.size,
        genes,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HallOfFame {
    pub genome: Genome,
    pub fitness: f64,
    pub generation: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    /// Mean over finite fitness values; infinite when every individual is a sentinel.
    pub mean_fitness: f64,
    pub best_index: usize,
    pub sentinels: usize,
    /// Best fitness seen so far, this generation included.
    pub hall_of_fame_fitness: f64,
}

/// Resumable state of an evolutionary run.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    config: GaConfig,
    seed: u64,
    generation: usize,
    population: Vec<Genome>,
    hall_of_fame: Option<HallOfFame>,
    log: Vec<GenerationStats>,
    finished: bool,
}

/// Population, fitness and statistics of one evaluated generation.
#[derive(Debug, Clone)]
pub struct GenerationReport {
    pub stats: GenerationStats,
    pub population: Vec<Genome>,
    pub fitness: Vec<f64>,
}

impl Evolution {
    pub fn new(config: GaConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed::derive_named(seed, "initial-population"));
        let population = (0..config.population)
            .map(|_| Genome::random(config.network_size, &mut rng))
            .collect();
        Ok(Self {
            config,
            seed,
            generation: 0,
            population,
            hall_of_fame: None,
            log: Vec::new(),
            finished: false,
        })
    }

    /// Rebuilds a run from checkpointed parts.
    pub fn restore(
        config: GaConfig,
        seed: u64,
        generation: usize,
        population: Vec<Genome>,
        hall_of_fame: Option<HallOfFame>,
        log: Vec<GenerationStats>,
    ) -> Result<Self> {
        config.validate()?;
        if population.len() != config.population || population.iter().any(|g| g.size != config.network_size) {
            return Err(Error::invalid("checkpoint population does not match the configuration"));
        }
        if log.len() != generation || generation > config.generations + 1 {
            return Err(Error::invalid("checkpoint generation does not match its log"));
        }
        let finished = generation > config.generations;
        Ok(Self {
            config,
            seed,
            generation,
            population,
            hall_of_fame,
            log,
            finished,
        })
    }

    pub fn config(&self) -> &GaConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Index of the generation whose population is held (evaluated next).
    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn population(&self) -> &[Genome] {
        &self.population
    }

    pub fn hall_of_fame(&self) -> Option<&HallOfFame> {
        self.hall_of_fame.as_ref()
    }

    pub fn log(&self) -> &[GenerationStats] {
        &self.log
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Evaluates the current population and, unless it was the last
    /// generation, replaces it with bred offspring.
    ///
    /// `evaluate` receives the generation index and the population and must
    /// return one fitness per genome (lower is better).
    pub fn step<E>(&mut self, mut evaluate: E) -> Result<GenerationReport>
    where
        E: FnMut(usize, &[Genome]) -> Vec<f64>,
    {
        if self.finished {
            return Err(Error::invalid("evolution already finished"));
        }
        let fitness = evaluate(self.generation, &self.population);
        if fitness.len() != self.population.len() {
            return Err(Error::invalid("evaluator returned the wrong number of fitness values"));
        }
        let best_index = (0..fitness.len())
            .min_by(|&a, &b| fitness_key(fitness[a]).total_cmp(&fitness_key(fitness[b])))
            .unwrap();
        let best_fitness = fitness_key(fitness[best_index]);
        let finite: Vec<f64> = fitness.iter().copied().filter(|f| f.is_finite()).collect();
        let mean_fitness = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let improves = self.hall_of_fame.as_ref().map_or(true, |h| best_fitness < h.fitness);
        if improves {
            self.hall_of_fame = Some(HallOfFame {
                genome: self.population[best_index].clone(),
                fitness: best_fitness,
                generation: self.generation,
            });
        }
        let stats = GenerationStats {
            generation: self.generation,
            best_fitness,
            mean_fitness,
            best_index,
            sentinels: fitness.len() - finite.len(),
            hall_of_fame_fitness: self.hall_of_fame.as_ref().unwrap().fitness,
        };
        self.log.push(stats);

        let evaluated = if self.generation >= self.config.generations {
            self.finished = true;
            self.generation += 1;
            core::mem::take(&mut self.population)
        } else {
            let offspring = self.breed(&fitness);
            self.generation += 1;
            core::mem::replace(&mut self.population, offspring)
        };
        Ok(GenerationReport {
            stats,
            population: evaluated,
            fitness,
        })
    }

    fn breed(&self, fitness: &[f64]) -> Vec<Genome> {
        let cfg = &self.config;
        let mut rng = seed::rng(seed::derive(
            seed::derive_named(self.seed, "breeding"),
            self.generation as u64,
        ));
        (0..cfg.population)
            .map(|_| {
                let a = tournament_select(fitness, &mut rng).unwrap();
                let b = tournament_select(fitness, &mut rng).unwrap();
                let child = sbx_crossover(
                    &self.population[a],
                    &self.population[b],
                    cfg.p_crossover,
                    cfg.sbx_eta,
                    cfg.crossover_mode,
                    &mut rng,
                )
                .unwrap();
                polynomial_mutation(&child, cfg.p_mutation, cfg.mutation_eta, &mut rng)
            })
            .collect()
    }

    /// Steps until the last generation has been evaluated.
    pub fn run<E>(&mut self, mut evaluate: E) -> Result<()>
    where
        E: FnMut(usize, &[Genome]) -> Vec<f64>,
    {
        while !self.finished {
            self.step(&mut evaluate)?;
        }
        Ok(())
    }
}

/// Fixed environments in which every genome of a generation is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalContext {
    pub arena: ArenaConfig,
    pub trial_seeds: Vec<u64>,
}

impl EvalContext {
    /// `trials` environments drawn from `seed`; identical for every genome.
    pub fn new(arena: ArenaConfig, seed: u64, trials: usize) -> Self {
        Self {
            arena,
            trial_seeds: (0..trials).map(|t| seed::derive(seed, t as u64)).collect(),
        }
    }
}

/// Controller of a genome: the decoded topology with per-robot random initial
/// states drawn from each robot's seed.
pub fn genome_controller(genome: &Genome) -> ControllerSpec {
    ControllerSpec::Network {
        topology: Arc::new(genome.decode()),
        initial: InitialStates::PerRobotRandom,
    }
}

/// Pooled estimate over a set of trial records.
pub fn estimate_from_records(records: &[TrialRecord]) -> FptEstimate {
    estimate_mean_fpt(&SurvivalDataset::from_records(records))
}

/// Sequential fitness of one genome: mean first-passage time over the
/// context's trials, or infinity when it cannot be fitted.
pub fn evaluate(genome: &Genome, ctx: &EvalContext) -> Result<(FptEstimate, StraightStats)> {
    let spec = genome_controller(genome);
    let options = TrialOptions {
        stop_when_all_found: true,
        ..TrialOptions::default()
    };
    let mut records = Vec::with_capacity(ctx.trial_seeds.len());
    let mut straight = StraightStats::default();
    for &s in &ctx.trial_seeds {
        let out = run_trial(&ctx.arena, &spec, TrialSeeds::new(s), options)?;
        straight.merge(&out.straight);
        records.push(out.record);
    }
    Ok((estimate_from_records(&records), straight))
}

/// Re-evaluation of a genome over `trials` fresh environments drawn from
/// `seed`, independent of the environments used during evolution.
pub fn post_evaluate(
    genome: &Genome,
    arena: &ArenaConfig,
    seed: u64,
    trials: usize,
) -> Result<(FptEstimate, StraightStats)> {
    let ctx = EvalContext::new(arena.clone(), seed::derive_named(seed, "post-evaluation"), trials);
    evaluate(genome, &ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn genome_round_trip_through_topology() {
        let mut rng = seed::rng(1);
        let top = Topology::random(6, &mut rng).unwrap();
        let g = Genome::from_topology(&top);
        assert_eq!(g.genes().len(), genome_len(6));
        assert_eq!(g.decode(), top);
    }

    #[test]
    fn genome_validation() {
        assert!(Genome::new(4, vec![0.0; 28]).is_ok());
        assert!(Genome::new(4, vec![0.0; 27]).is_err());
        let mut bad = vec![0.0; 28];
        bad[3] = 3.0;
        assert!(Genome::new(4, bad).is_err());
    }

    #[test]
    fn tournament_prefers_lower() {
        let mut rng = seed::rng(2);
        for _ in 0..1000 {
            let i = tournament_select(&[10.0, 20.0], &mut rng).unwrap();
            // index 1 only wins when it is drawn twice
            assert!(i == 0 || i == 1);
        }
        assert_eq!(tournament_select(&[5.0], &mut rng).unwrap(), 0);
        assert!(tournament_select(&[], &mut rng).is_err());
    }

    #[test]
    fn sbx_fixed_point_and_zero_probability() {
        let mut rng = seed::rng(3);
        let a = Genome::random(6, &mut rng);
        let b = Genome::random(6, &mut rng);
        let same = sbx_crossover(&a, &a, 1.0, 20.0, CrossoverMode::PerGene, &mut rng).unwrap();
        assert_eq!(same, a);
        let copy = sbx_crossover(&a, &b, 0.0, 20.0, CrossoverMode::PerGene, &mut rng).unwrap();
        assert_eq!(copy, a);
        let short = Genome::random(4, &mut rng);
        assert!(sbx_crossover(&a, &short, 0.5, 20.0, CrossoverMode::PerGene, &mut rng).is_err());
    }

    #[test]
    fn zero_mutation_is_identity() {
        let mut rng = seed::rng(4);
        let a = Genome::random(8, &mut rng);
        assert_eq!(polynomial_mutation(&a, 0.0, 20.0, &mut rng), a);
    }

    #[test]
    fn no_generations_keeps_initial_best() {
        let cfg = GaConfig {
            network_size: 4,
            population: 6,
            generations: 0,
            ..GaConfig::default()
        };
        let mut evo = Evolution::new(cfg, 11).unwrap();
        let initial = evo.population().to_vec();
        evo.run(|_, pop| pop.iter().map(|g| g.genes()[0]).collect()).unwrap();
        let best = initial
            .iter()
            .min_by(|a, b| a.genes()[0].total_cmp(&b.genes()[0]))
            .unwrap();
        assert_eq!(&evo.hall_of_fame().unwrap().genome, best);
        assert_eq!(evo.log().len(), 1);
        assert!(evo.is_finished());
    }
}

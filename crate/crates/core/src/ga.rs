//! PARGA: real-coded genetic search over power allocations.
//!
//! A chromosome is the flat gene vector of [`Problem::decode`]. Every
//! chromosome is repaired onto the surface `Σ genes = P_T` before it is
//! scored, so the whole population is always feasible.
//!
//! Randomness comes from ChaCha8 seeded with `GaConfig::seed`; generation
//! `t` draws from stream `t` of that seed (generation 0 builds the initial
//! population). All random draws for a generation happen before its fitness
//! evaluations, which run in parallel on rayon; results therefore do not
//! depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rates::{PowerAllocation, Problem};

/// Improvement below this counts as a stalled generation.
pub const STALL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of `P_T`.
    pub mutation_scale: f64,
    /// Fraction of each generation copied unchanged into the next.
    pub elite_rate: f64,
    pub crossover_rate: f64,
    pub max_generations: usize,
    /// Stop after this many consecutive generations without improvement.
    pub stall_generations: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 100,
            mutation_rate: 0.1,
            mutation_scale: 0.1,
            elite_rate: 0.1,
            crossover_rate: 0.9,
            max_generations: 200,
            stall_generations: 30,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::GaConfig(m.to_string()));
        if self.population_size < 2 {
            return fail("population_size must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return fail("mutation_rate must lie in [0, 1]");
        }
        if !(self.mutation_scale.is_finite() && self.mutation_scale > 0.0) {
            return fail("mutation_scale must be positive");
        }
        if !(self.elite_rate > 0.0 && self.elite_rate <= 1.0) {
            return fail("elite_rate must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return fail("crossover_rate must lie in [0, 1]");
        }
        if self.stall_generations == 0 {
            return fail("stall_generations must be positive");
        }
        Ok(())
    }

    /// `ceil(elite_rate * population_size)`, at least one.
    pub fn elite_count(&self) -> usize {
        ((self.elite_rate * self.population_size as f64).ceil() as usize)
            .clamp(1, self.population_size)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chromosome {
    pub genes: Vec<f64>,
    pub fitness: Option<f64>,
}

impl Chromosome {
    /// Repairs `genes` and wraps them, unevaluated.
    pub fn new(mut genes: Vec<f64>, total_power: f64) -> Self {
        repair(&mut genes, total_power);
        Chromosome {
            genes,
            fitness: None,
        }
    }

    /// Cached fitness; NaN-free by construction once evaluated.
    pub fn score(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub best: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub best_alloc: PowerAllocation,
    pub best_genes: Vec<f64>,
    pub best_fitness: f64,
    /// One entry per generation, generation 0 included.
    pub history: Vec<GenerationStats>,
    /// Generations evolved after the initial population.
    pub generations_run: usize,
}

/// Clips negative (and non-finite) genes to zero and rescales so they sum to
/// `total_power`. An all-zero vector becomes the uniform split.
pub fn repair(genes: &mut [f64], total_power: f64) {
    for g in genes.iter_mut() {
        if !(g.is_finite() && *g > 0.0) {
            *g = 0.0;
        }
    }
    let sum: f64 = genes.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        let factor = total_power / sum;
        genes.iter_mut().for_each(|g| *g *= factor);
    } else if !genes.is_empty() {
        let share = total_power / genes.len() as f64;
        genes.iter_mut().for_each(|g| *g = share);
    }
}

/// RNG for generation `generation` of a run seeded with `seed`.
pub fn generation_rng(seed: u64, generation: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(generation);
    rng
}

/// Uniform draw from the `P_T`-scaled simplex (Dirichlet(1,..,1) via
/// normalized exponentials).
fn random_simplex_point(dims: usize, total_power: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut genes: Vec<f64> = (0..dims).map(|_| Exp1.sample(rng)).collect();
    repair(&mut genes, total_power);
    genes
}

/// Generation 0: the repaired `seed_allocs` first, then uniform random
/// simplex points up to `population_size`.
pub fn init_population(
    config: &GaConfig,
    problem: &Problem,
    seed_allocs: &[PowerAllocation],
    rng: &mut impl Rng,
) -> Result<Vec<Chromosome>> {
    let dims = problem.gene_count();
    let mut population = Vec::with_capacity(config.population_size);
    for alloc in seed_allocs.iter().take(config.population_size) {
        let genes = alloc.to_genes();
        if genes.len() != dims {
            return Err(Error::Dimension {
                expected: dims,
                found: genes.len(),
            });
        }
        let chromosome = Chromosome::new(genes, problem.total_power);
        if !is_feasible(&chromosome.genes, problem.total_power) {
            return Err(Error::Internal(
                "seed allocation infeasible after repair".into(),
            ));
        }
        population.push(chromosome);
    }
    while population.len() < config.population_size {
        population.push(Chromosome {
            genes: random_simplex_point(dims, problem.total_power, rng),
            fitness: None,
        });
    }
    Ok(population)
}

/// Nonnegative genes summing to `total_power` within `1e-9`.
pub fn is_feasible(genes: &[f64], total_power: f64) -> bool {
    let sum: f64 = genes.iter().sum();
    genes.iter().all(|&g| g >= 0.0 && g.is_finite()) && (sum - total_power).abs() <= 1e-9
}

/// Sum rate of the decoded allocation, cached on the chromosome.
pub fn fitness(chromosome: &mut Chromosome, problem: &Problem) -> f64 {
    *chromosome
        .fitness
        .get_or_insert_with(|| problem.sum_rate_of(&chromosome.genes))
}

/// Scores every unevaluated chromosome in parallel.
pub fn evaluate_population(population: &mut [Chromosome], problem: &Problem) {
    population.par_iter_mut().for_each(|c| {
        fitness(c, problem);
    });
}

/// Stable sort, best first.
pub fn sort_by_fitness(population: &mut [Chromosome]) {
    population.sort_by(|a, b| b.score().total_cmp(&a.score()));
}

/// Binary tournament; ties go to the first draw.
pub fn tournament(population: &[Chromosome], rng: &mut impl Rng) -> usize {
    let a = rng.random_range(0..population.len());
    let b = rng.random_range(0..population.len());
    if population[b].score() > population[a].score() {
        b
    } else {
        a
    }
}

/// Elites of a population sorted best-first, plus parent index pairs for the
/// remaining slots (two children per pair).
pub fn select_parents(
    sorted: &[Chromosome],
    config: &GaConfig,
    rng: &mut impl Rng,
) -> (Vec<Chromosome>, Vec<(usize, usize)>) {
    let elites: Vec<Chromosome> = sorted[..config.elite_count().min(sorted.len())].to_vec();
    let open = config.population_size.saturating_sub(elites.len());
    let pairs = (0..open.div_ceil(2))
        .map(|_| (tournament(sorted, rng), tournament(sorted, rng)))
        .collect();
    (elites, pairs)
}

/// Uniform crossover with probability `crossover_rate`, otherwise copies.
/// Children are repaired and unevaluated unless they are exact copies.
pub fn crossover(
    a: &Chromosome,
    b: &Chromosome,
    config: &GaConfig,
    total_power: f64,
    rng: &mut impl Rng,
) -> (Chromosome, Chromosome) {
    if !rng.random_bool(config.crossover_rate) {
        return (a.clone(), b.clone());
    }
    let mut left = Vec::with_capacity(a.genes.len());
    let mut right = Vec::with_capacity(a.genes.len());
    for (&x, &y) in a.genes.iter().zip(&b.genes) {
        if rng.random_bool(0.5) {
            left.push(y);
            right.push(x);
        } else {
            left.push(x);
            right.push(y);
        }
    }
    let child = |genes: Vec<f64>| {
        if genes == a.genes {
            a.clone()
        } else if genes == b.genes {
            b.clone()
        } else {
            Chromosome::new(genes, total_power)
        }
    };
    (child(left), child(right))
}

/// Gaussian perturbation of each gene with probability `mutation_rate`,
/// std `mutation_scale * total_power`, followed by repair.
pub fn mutate(
    chromosome: Chromosome,
    config: &GaConfig,
    total_power: f64,
    rng: &mut impl Rng,
) -> Chromosome {
    let noise =
        Normal::new(0.0, config.mutation_scale * total_power).expect("validated mutation scale");
    let mut genes = chromosome.genes.clone();
    let mut touched = false;
    for g in genes.iter_mut() {
        if rng.random_bool(config.mutation_rate) {
            *g += noise.sample(rng);
            touched = true;
        }
    }
    if touched {
        Chromosome::new(genes, total_power)
    } else {
        chromosome
    }
}

/// Builds generation `t + 1` from generation `t` (sorted best-first).
pub fn next_generation(
    sorted: &[Chromosome],
    config: &GaConfig,
    total_power: f64,
    rng: &mut impl Rng,
) -> Vec<Chromosome> {
    let (mut next, pairs) = select_parents(sorted, config, rng);
    for (i, j) in pairs {
        let (c1, c2) = crossover(&sorted[i], &sorted[j], config, total_power, rng);
        for child in [c1, c2] {
            if next.len() < config.population_size {
                next.push(mutate(child, config, total_power, rng));
            }
        }
    }
    next
}

fn stats(sorted: &[Chromosome]) -> GenerationStats {
    let mean = sorted.iter().map(Chromosome::score).sum::<f64>() / sorted.len() as f64;
    GenerationStats {
        best: sorted[0].score(),
        mean,
    }
}

/// Runs PARGA with generation 0 seeded with the fixed 50/50 split.
pub fn run_parga(problem: &Problem, config: &GaConfig) -> Result<GaResult> {
    run_parga_observed(problem, config, |_, _| {})
}

/// [`run_parga`] that hands every evaluated generation (sorted best-first)
/// to `observer`.
pub fn run_parga_observed(
    problem: &Problem,
    config: &GaConfig,
    mut observer: impl FnMut(usize, &[Chromosome]),
) -> Result<GaResult> {
    config.validate()?;
    if problem.gains.is_all_zero() {
        return Err(Error::DegenerateChannel(
            "every effective gain is zero".into(),
        ));
    }
    if !(problem.total_power.is_finite() && problem.total_power > 0.0 && problem.noise_power > 0.0)
    {
        return Err(Error::Scenario(
            "total and noise power must be positive".into(),
        ));
    }

    let seeds = [fixed_split(problem)];
    let mut rng = generation_rng(config.seed, 0);
    let mut population = init_population(config, problem, &seeds, &mut rng)?;
    evaluate_population(&mut population, problem);
    sort_by_fitness(&mut population);
    observer(0, &population);

    let mut history = vec![stats(&population)];
    let mut stalled = 0;
    let mut generations_run = 0;
    for generation in 1..=config.max_generations {
        let mut rng = generation_rng(config.seed, generation as u64);
        let mut next = next_generation(&population, config, problem.total_power, &mut rng);
        evaluate_population(&mut next, problem);
        sort_by_fitness(&mut next);
        observer(generation, &next);

        let previous = history.last().expect("history starts non-empty").best;
        let current = stats(&next);
        history.push(current);
        population = next;
        generations_run = generation;

        if current.best - previous < STALL_EPS {
            stalled += 1;
            if stalled >= config.stall_generations {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    let best = &population[0];
    Ok(GaResult {
        best_alloc: problem.decode(&best.genes)?,
        best_genes: best.genes.clone(),
        best_fitness: best.score(),
        history,
        generations_run,
    })
}

/// The 50/50 common/private split expressed on the problem's channels.
fn fixed_split(problem: &Problem) -> PowerAllocation {
    let n_channels = problem.gains.channels.len() as f64;
    let half = 0.5 * problem.total_power / n_channels;
    PowerAllocation {
        p_common: vec![half; problem.gains.channels.len()],
        p_private: problem
            .gains
            .users_per_channel()
            .map(|n| vec![half / n as f64; n])
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{ChannelGains, EffectiveGains};

    fn single_user_problem(g_common: f64, g_private: f64, total_power: f64) -> Problem {
        Problem::new(
            EffectiveGains {
                channels: vec![ChannelGains {
                    users: vec![0],
                    common: vec![g_common],
                    private: vec![vec![g_private]],
                }],
            },
            1.0,
            total_power,
        )
    }

    fn three_user_problem() -> Problem {
        Problem::new(
            EffectiveGains {
                channels: vec![ChannelGains {
                    users: vec![0, 1, 2],
                    common: vec![1.5, 0.7, 2.0],
                    private: vec![
                        vec![1.0, 0.0, 0.0],
                        vec![0.0, 0.6, 0.0],
                        vec![0.0, 0.0, 0.8],
                    ],
                }],
            },
            1.0,
            10.0,
        )
    }

    #[test]
    fn repair_examples() {
        let mut g = vec![2.0, 2.0];
        repair(&mut g, 1.0);
        assert_eq!(g, vec![0.5, 0.5]);
        let mut g = vec![-1.0, 3.0];
        repair(&mut g, 1.0);
        assert_eq!(g, vec![0.0, 1.0]);
        let mut g = vec![0.0; 3];
        repair(&mut g, 1.0);
        assert_eq!(g, vec![1.0 / 3.0; 3]);
        let mut g = vec![f64::NAN, 1.0];
        repair(&mut g, 2.0);
        assert_eq!(g, vec![0.0, 2.0]);
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        assert!(GaConfig {
            population_size: 1,
            ..GaConfig::default()
        }
        .validate()
        .is_err());
        assert!(GaConfig {
            elite_rate: 0.0,
            ..GaConfig::default()
        }
        .validate()
        .is_err());
        assert!(GaConfig {
            mutation_rate: 1.5,
            ..GaConfig::default()
        }
        .validate()
        .is_err());
        assert_eq!(
            GaConfig {
                elite_rate: 0.001,
                ..GaConfig::default()
            }
            .elite_count(),
            1
        );
        assert_eq!(GaConfig::default().elite_count(), 10);
    }

    #[test]
    fn init_is_deterministic_feasible_and_seeded() {
        let problem = three_user_problem();
        let config = GaConfig::default();
        let seed = fixed_split(&problem);
        let a = init_population(
            &config,
            &problem,
            &[seed.clone()],
            &mut generation_rng(9, 0),
        )
        .unwrap();
        let b = init_population(
            &config,
            &problem,
            &[seed.clone()],
            &mut generation_rng(9, 0),
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        assert!(a.iter().all(|c| is_feasible(&c.genes, problem.total_power)));
        assert_eq!(a[0].genes, seed.to_genes());
    }

    #[test]
    fn init_rejects_wrong_seed_shape() {
        let problem = three_user_problem();
        let bad = PowerAllocation {
            p_common: vec![1.0],
            p_private: vec![vec![1.0]],
        };
        assert!(init_population(
            &GaConfig::default(),
            &problem,
            &[bad],
            &mut generation_rng(0, 0)
        )
        .is_err());
    }

    #[test]
    fn fitness_matches_rate_core_and_is_cached() {
        let problem = three_user_problem();
        let alloc = fixed_split(&problem);
        let mut c = Chromosome::new(alloc.to_genes(), problem.total_power);
        let f = fitness(&mut c, &problem);
        assert_eq!(f, problem.evaluate(&alloc).sum_rate);
        assert_eq!(c.fitness, Some(f));
        c.genes[0] = 0.0;
        assert_eq!(fitness(&mut c, &problem), f);
    }

    #[test]
    fn all_private_single_user_fitness() {
        let problem = single_user_problem(1.0, 3.0, 5.0);
        let mut c = Chromosome::new(vec![0.0, 5.0], 5.0);
        assert!((fitness(&mut c, &problem) - 16f64.log2()).abs() < 1e-15);
    }

    fn evaluated(genes: &[&[f64]], problem: &Problem) -> Vec<Chromosome> {
        let mut pop: Vec<Chromosome> = genes
            .iter()
            .map(|g| Chromosome::new(g.to_vec(), problem.total_power))
            .collect();
        evaluate_population(&mut pop, problem);
        sort_by_fitness(&mut pop);
        pop
    }

    #[test]
    fn pure_elitism_keeps_sorted_generation() {
        let problem = three_user_problem();
        let pop = evaluated(
            &[
                &[1.0, 2.0, 3.0, 4.0],
                &[4.0, 3.0, 2.0, 1.0],
                &[0.0, 5.0, 5.0, 0.0],
            ],
            &problem,
        );
        let config = GaConfig {
            population_size: 3,
            elite_rate: 1.0,
            ..GaConfig::default()
        };
        let next = next_generation(
            &pop,
            &config,
            problem.total_power,
            &mut generation_rng(1, 1),
        );
        assert_eq!(next, pop);
    }

    #[test]
    fn identical_population_breeds_itself() {
        let problem = three_user_problem();
        let g: &[f64] = &[1.0, 2.0, 3.0, 4.0];
        let pop = evaluated(&[g; 6], &problem);
        let config = GaConfig {
            population_size: 6,
            mutation_rate: 0.0,
            ..GaConfig::default()
        };
        let next = next_generation(
            &pop,
            &config,
            problem.total_power,
            &mut generation_rng(1, 1),
        );
        assert!(next.iter().all(|c| c.genes == pop[0].genes));
    }

    #[test]
    fn best_always_survives() {
        let problem = three_user_problem();
        let mut rng = generation_rng(4, 0);
        let config = GaConfig {
            population_size: 30,
            ..GaConfig::default()
        };
        let mut pop = init_population(&config, &problem, &[], &mut rng).unwrap();
        evaluate_population(&mut pop, &problem);
        sort_by_fitness(&mut pop);
        for t in 1..20 {
            let mut next = next_generation(
                &pop,
                &config,
                problem.total_power,
                &mut generation_rng(4, t),
            );
            assert!(next.contains(&pop[0]));
            evaluate_population(&mut next, &problem);
            sort_by_fitness(&mut next);
            pop = next;
        }
    }

    #[test]
    fn crossover_contracts() {
        let a = Chromosome::new(vec![1.0, 2.0, 3.0], 6.0);
        let b = Chromosome::new(vec![3.0, 2.0, 1.0], 6.0);
        let config = GaConfig::default();
        let (x, y) = crossover(&a, &a, &config, 6.0, &mut generation_rng(0, 3));
        assert_eq!(x.genes, a.genes);
        assert_eq!(y.genes, a.genes);
        let copy = GaConfig {
            crossover_rate: 0.0,
            ..config.clone()
        };
        let (x, y) = crossover(&a, &b, &copy, 6.0, &mut generation_rng(0, 3));
        assert_eq!((x, y), (a.clone(), b.clone()));
        let mut rng = generation_rng(0, 4);
        for _ in 0..100 {
            let (x, y) = crossover(&a, &b, &config, 6.0, &mut rng);
            assert!(is_feasible(&x.genes, 6.0) && is_feasible(&y.genes, 6.0));
        }
    }

    #[test]
    fn mutation_contracts() {
        let c = Chromosome::new(vec![1.0, 2.0, 3.0], 6.0);
        let none = GaConfig {
            mutation_rate: 0.0,
            ..GaConfig::default()
        };
        assert_eq!(mutate(c.clone(), &none, 6.0, &mut generation_rng(0, 1)), c);

        let mut rng = generation_rng(0, 2);
        for _ in 0..200 {
            let m = mutate(
                c.clone(),
                &GaConfig {
                    mutation_rate: 1.0,
                    mutation_scale: 1.0,
                    ..GaConfig::default()
                },
                6.0,
                &mut rng,
            );
            assert!(is_feasible(&m.genes, 6.0));
        }
        let tiny = GaConfig {
            mutation_rate: 1.0,
            mutation_scale: 1e-12,
            ..GaConfig::default()
        };
        let m = mutate(c.clone(), &tiny, 6.0, &mut rng);
        for (x, y) in m.genes.iter().zip(&c.genes) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_generations_returns_seeded_best() {
        let problem = three_user_problem();
        let config = GaConfig {
            max_generations: 0,
            ..GaConfig::default()
        };
        let r = run_parga(&problem, &config).unwrap();
        assert_eq!(r.generations_run, 0);
        assert_eq!(r.history.len(), 1);
        assert!(r.best_fitness >= problem.evaluate(&fixed_split(&problem)).sum_rate);
    }

    #[test]
    fn rejects_all_zero_gains() {
        let problem = single_user_problem(0.0, 0.0, 1.0);
        assert!(matches!(
            run_parga(&problem, &GaConfig::default()),
            Err(Error::DegenerateChannel(_))
        ));
    }

    #[test]
    fn run_is_reproducible_and_monotone() {
        let problem = three_user_problem();
        let config = GaConfig {
            seed: 77,
            ..GaConfig::default()
        };
        let a = run_parga(&problem, &config).unwrap();
        let b = run_parga(&problem, &config).unwrap();
        assert_eq!(a, b);
        assert!(a.history.windows(2).all(|w| w[1].best >= w[0].best));
        let c = run_parga(&problem, &GaConfig { seed: 78, ..config }).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn early_stop_respects_stall_window() {
        let problem = single_user_problem(1.0, 2.0, 1.0);
        let config = GaConfig {
            stall_generations: 5,
            max_generations: 500,
            ..GaConfig::default()
        };
        let r = run_parga(&problem, &config).unwrap();
        assert!(r.generations_run < 500);
        let tail = &r.history[r.history.len() - 6..];
        assert!(tail[5].best - tail[0].best < 5.0 * STALL_EPS);
    }
}

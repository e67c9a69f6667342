//! Genetic optimizer over handle placements.
//!
//! A chromosome packs `k` handles per net as `(x, y)` pairs, net blocks laid
//! out contiguously. Selection is fitness proportional on shifted fitness,
//! crossover swaps whole handles between two parents, and mutation resamples
//! genes uniformly. The best `elite_size` members survive unchanged.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetId, Problem};

/// Shift added after subtracting the minimum fitness so every weight is positive.
pub const SELECTION_EPSILON: f64 = 1e-6;

const STREAM_INIT: u64 = 0x1a17;
const STREAM_EVOLVE: u64 = 0xe70e;

/// Handles per net: `ceil(2 * total_pins / m)`, at least one.
pub fn handle_count(problem: &Problem) -> usize {
    let m = problem.net_count().max(1);
    let total = problem.total_pins();
    (2 * total).div_ceil(m).max(1)
}

/// Mixes a base seed with a path of integers into an independent stream seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    path.iter().fold(splitmix(base), |acc, &p| splitmix(acc ^ splitmix(p)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chromosome {
    pub genes: Vec<f64>,
    pub handles_per_net: usize,
}

impl Chromosome {
    pub fn net_count(&self) -> usize {
        self.genes.len() / (2 * self.handles_per_net)
    }

    /// Handle positions of one net (1-based id).
    pub fn handles(&self, net: NetId) -> impl Iterator<Item = (f64, f64)> + '_ {
        let k = self.handles_per_net;
        let start = (net as usize - 1) * 2 * k;
        self.genes[start..start + 2 * k].chunks_exact(2).map(|p| (p[0], p[1]))
    }

    /// Every handle with the net id of its block.
    pub fn labeled_handles(&self) -> impl Iterator<Item = (f64, f64, NetId)> + '_ {
        let k = self.handles_per_net;
        self.genes
            .chunks_exact(2)
            .enumerate()
            .map(move |(i, p)| (p[0], p[1], (i / k + 1) as NetId))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub elite_size: usize,
    pub mutation_rate: f64,
    pub crossover_swap_probability: f64,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 30,
            generations: 20,
            elite_size: 10,
            mutation_rate: 0.05,
            crossover_swap_probability: 0.5,
            rng_seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(Error::InvalidConfig("population_size must be positive".into()));
        }
        if self.elite_size >= self.population_size {
            return Err(Error::InvalidConfig(format!(
                "elite_size ({}) must be smaller than population_size ({})",
                self.elite_size, self.population_size
            )));
        }
        for (name, v) in [
            ("mutation_rate", self.mutation_rate),
            ("crossover_swap_probability", self.crossover_swap_probability),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

pub fn initialize_population(config: &GaConfig, handles_per_net: usize, net_count: usize) -> Vec<Chromosome> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.rng_seed, &[STREAM_INIT]));
    let len = 2 * handles_per_net * net_count;
    (0..config.population_size)
        .map(|_| Chromosome {
            genes: (0..len).map(|_| rng.gen::<f64>()).collect(),
            handles_per_net,
        })
        .collect()
}

/// Roulette weights: `f - min(f) + SELECTION_EPSILON`.
pub fn selection_weights(fitnesses: &[f64]) -> Vec<f64> {
    let min = fitnesses.iter().copied().fold(f64::INFINITY, f64::min);
    fitnesses.iter().map(|f| f - min + SELECTION_EPSILON).collect()
}

/// Draws one index with probability proportional to its weight.
pub fn select_parent<R: Rng>(weights: &WeightedIndex<f64>, rng: &mut R) -> usize {
    weights.sample(rng)
}

/// Swaps each handle pair between the parents with the given probability.
pub fn crossover<R: Rng>(a: &Chromosome, b: &Chromosome, swap_probability: f64, rng: &mut R) -> (Chromosome, Chromosome) {
    let mut ca = a.clone();
    let mut cb = b.clone();
    for (pa, pb) in ca.genes.chunks_exact_mut(2).zip(cb.genes.chunks_exact_mut(2)) {
        if rng.gen::<f64>() < swap_probability {
            pa.swap_with_slice(pb);
        }
    }
    (ca, cb)
}

/// Resamples each gene uniformly on `[0, 1]` with the given probability.
pub fn mutate<R: Rng>(chromosome: &mut Chromosome, rate: f64, rng: &mut R) {
    for g in &mut chromosome.genes {
        if rng.gen::<f64>() < rate {
            *g = rng.gen();
        }
    }
}

/// Indices sorted by descending fitness; ties keep the lower index first.
pub fn rank_by_fitness(fitnesses: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitnesses.len()).collect();
    order.sort_by(|&a, &b| fitnesses[b].total_cmp(&fitnesses[a]).then(a.cmp(&b)));
    order
}

#[derive(Debug, Clone)]
pub struct NextGeneration {
    pub population: Vec<Chromosome>,
    /// `elite_sources[i]` is the index in the previous population that member
    /// `i` was copied from; the children follow the elites.
    pub elite_sources: Vec<usize>,
}

/// Produces generation `generation` from the previous population and its fitness.
pub fn next_generation(
    population: &[Chromosome],
    fitnesses: &[f64],
    config: &GaConfig,
    generation: usize,
) -> NextGeneration {
    assert_eq!(population.len(), fitnesses.len());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.rng_seed, &[STREAM_EVOLVE, generation as u64]));

    let ranked = rank_by_fitness(fitnesses);
    let elite_sources: Vec<usize> = ranked.iter().copied().take(config.elite_size.min(population.len())).collect();
    let mut next: Vec<Chromosome> = elite_sources.iter().map(|&i| population[i].clone()).collect();

    let weights = WeightedIndex::new(selection_weights(fitnesses)).expect("selection weights are positive and finite");
    while next.len() < config.population_size {
        let first = select_parent(&weights, &mut rng);
        let second = select_parent(&weights, &mut rng);
        let (mut child, _) = crossover(
            &population[first],
            &population[second],
            config.crossover_swap_probability,
            &mut rng,
        );
        mutate(&mut child, config.mutation_rate, &mut rng);
        next.push(child);
    }

    NextGeneration {
        population: next,
        elite_sources,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{normalize_problem, BoardExtent, RawNet};
    use proptest::prelude::*;

    fn problem_with_pin_counts(counts: &[usize]) -> Problem {
        let raw: Vec<RawNet> = counts
            .iter()
            .enumerate()
            .map(|(i, &q)| RawNet {
                label: format!("N{i}"),
                pins: (0..q).map(|j| [i as f64 * 0.1 + 0.01, j as f64 * 0.01]).collect(),
            })
            .collect();
        normalize_problem(&raw, BoardExtent { width: 1.0, height: 1.0 }, 16).unwrap()
    }

    #[test]
    fn handle_count_examples() {
        assert_eq!(handle_count(&problem_with_pin_counts(&[5, 5, 5, 5, 5])), 10);
        assert_eq!(handle_count(&problem_with_pin_counts(&[2, 1, 1])), 3);
        assert_eq!(handle_count(&problem_with_pin_counts(&[1])), 2);
    }

    #[test]
    fn chromosome_layout() {
        let cfg = GaConfig {
            population_size: 30,
            ..Default::default()
        };
        let pop = initialize_population(&cfg, 10, 5);
        assert_eq!(pop.len(), 30);
        assert!(pop.iter().all(|c| c.genes.len() == 100 && c.genes.iter().all(|g| (0.0..=1.0).contains(g))));
        let c = &pop[0];
        assert_eq!(c.net_count(), 5);
        let h: Vec<_> = c.handles(2).collect();
        assert_eq!(h[0], (c.genes[20], c.genes[21]));
        let labeled: Vec<_> = c.labeled_handles().collect();
        assert_eq!(labeled.len(), 50);
        assert_eq!(labeled[9].2, 1);
        assert_eq!(labeled[10].2, 2);
    }

    #[test]
    fn initialization_is_deterministic_and_uniform() {
        let cfg = GaConfig {
            population_size: 1000,
            elite_size: 1,
            rng_seed: 42,
            ..Default::default()
        };
        let a = initialize_population(&cfg, 10, 5);
        assert_eq!(a, initialize_population(&cfg, 10, 5));
        let n = a.len() * 100;
        let mean: f64 = a.iter().flat_map(|c| c.genes.iter()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn elites_survive_verbatim() {
        let cfg = GaConfig {
            population_size: 8,
            elite_size: 3,
            rng_seed: 1,
            ..Default::default()
        };
        let pop = initialize_population(&cfg, 2, 2);
        let fit = [-5.0, -1.0, -3.0, -0.5, -7.0, -2.0, -9.0, -4.0];
        let next = next_generation(&pop, &fit, &cfg, 1);
        assert_eq!(next.elite_sources, vec![3, 1, 5]);
        for (i, &src) in next.elite_sources.iter().enumerate() {
            assert_eq!(next.population[i], pop[src]);
        }
        assert_eq!(next.population.len(), 8);
    }

    #[test]
    fn no_op_operators_copy_first_parent() {
        let cfg = GaConfig {
            population_size: 20,
            elite_size: 2,
            mutation_rate: 0.0,
            crossover_swap_probability: 0.0,
            rng_seed: 9,
            ..Default::default()
        };
        let pop = initialize_population(&cfg, 3, 2);
        let fit: Vec<f64> = (0..20).map(|i| -(i as f64)).collect();
        let next = next_generation(&pop, &fit, &cfg, 1);
        for child in &next.population[2..] {
            assert!(pop.contains(child));
        }
    }

    #[test]
    fn equal_fitness_selects_uniformly() {
        let w = WeightedIndex::new(selection_weights(&[-3.0; 4])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[select_parent(&w, &mut rng)] += 1;
        }
        assert!(counts.iter().all(|&c| (c as f64 / 40_000.0 - 0.25).abs() < 0.02), "{counts:?}");
    }

    #[test]
    fn two_to_one_weights_select_two_thirds() {
        let w = WeightedIndex::new([1.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let hits = (0..100_000).filter(|_| select_parent(&w, &mut rng) == 1).count();
        let freq = hits as f64 / 100_000.0;
        assert!((freq - 2.0 / 3.0).abs() <= 0.03, "freq {freq}");
    }

    #[test]
    fn rejects_bad_config() {
        let bad = GaConfig {
            elite_size: 30,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = GaConfig {
            mutation_rate: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(GaConfig::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn crossover_preserves_handle_multiset(seed in any::<u64>(), p in 0.0f64..=1.0) {
            let cfg = GaConfig { population_size: 2, elite_size: 0, rng_seed: seed, ..Default::default() };
            let pop = initialize_population(&cfg, 4, 3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (c1, c2) = crossover(&pop[0], &pop[1], p, &mut rng);
            for i in 0..12 {
                let before = [(pop[0].genes[2 * i], pop[0].genes[2 * i + 1]), (pop[1].genes[2 * i], pop[1].genes[2 * i + 1])];
                let after = [(c1.genes[2 * i], c1.genes[2 * i + 1]), (c2.genes[2 * i], c2.genes[2 * i + 1])];
                prop_assert!(after == before || after == [before[1], before[0]]);
            }
        }

        #[test]
        fn operators_keep_genes_in_unit_interval(seed in any::<u64>(), rate in 0.0f64..=1.0) {
            let cfg = GaConfig { population_size: 12, elite_size: 3, mutation_rate: rate, rng_seed: seed, ..Default::default() };
            let pop = initialize_population(&cfg, 3, 3);
            let fit: Vec<f64> = (0..12).map(|i| -((i * 7 % 5) as f64)).collect();
            let next = next_generation(&pop, &fit, &cfg, 2);
            prop_assert!(next.population.iter().flat_map(|c| c.genes.iter()).all(|g| (0.0..=1.0).contains(g)));
        }
    }
}

use rand::seq::index;
use rand::Rng;

use super::{GaConfig, GaError, Individual, RngStreams};
use crate::pulse_codec::{GeneSpace, Genome};

/// Picks `n_parents` parents, each the fittest of `k` distinct individuals
/// drawn uniformly. Ties go to the lower population index.
pub fn tournament_select<R: Rng + ?Sized>(
    population: &[Individual],
    k: usize,
    n_parents: usize,
    rng: &mut R,
) -> Result<Vec<Individual>, GaError> {
    Ok(tournament_indices(population, k, n_parents, rng)?
        .into_iter()
        .map(|i| population[i].clone())
        .collect())
}

pub(crate) fn tournament_indices<R: Rng + ?Sized>(
    population: &[Individual],
    k: usize,
    n_parents: usize,
    rng: &mut R,
) -> Result<Vec<usize>, GaError> {
    if k == 0 || k > population.len() {
        return Err(GaError::Config(format!(
            "tournament size {k} must be in 1..={}",
            population.len()
        )));
    }
    let fitness: Vec<f64> = population
        .iter()
        .enumerate()
        .map(|(i, ind)| ind.fitness.ok_or(GaError::Unevaluated(i)))
        .collect::<Result<_, _>>()?;
    let mut parents = Vec::with_capacity(n_parents);
    for _ in 0..n_parents {
        let mut drawn = index::sample(rng, population.len(), k).into_vec();
        drawn.sort_unstable();
        let winner = drawn
            .iter()
            .copied()
            .reduce(|best, i| if fitness[i] > fitness[best] { i } else { best })
            .expect("k >= 1");
        parents.push(winner);
    }
    Ok(parents)
}

/// Each gene comes from `parent_a` or `parent_b` with probability ½.
pub fn uniform_crossover<R: Rng + ?Sized>(parent_a: &Genome, parent_b: &Genome, rng: &mut R) -> Result<Genome, GaError> {
    let mask: Vec<bool> = (0..parent_a.len()).map(|_| rng.random_bool(0.5)).collect();
    crossover_with_mask(parent_a, parent_b, &mask)
}

/// `mask[i] == true` takes gene `i` from `parent_a`.
pub fn crossover_with_mask(parent_a: &Genome, parent_b: &Genome, mask: &[bool]) -> Result<Genome, GaError> {
    if parent_a.len() != parent_b.len() || mask.len() != parent_a.len() {
        return Err(GaError::Mismatch {
            a: parent_a.len(),
            b: parent_b.len(),
        });
    }
    Ok(parent_a
        .genes()
        .iter()
        .zip(parent_b.genes())
        .zip(mask)
        .map(|((&a, &b), &from_a)| if from_a { a } else { b })
        .collect::<Vec<_>>()
        .into())
}

/// With probability `p`, each gene is replaced by a uniform draw from its
/// domain.
pub fn random_mutation<R: Rng + ?Sized>(genome: &Genome, p: f64, space: &GeneSpace, rng: &mut R) -> Genome {
    genome
        .genes()
        .iter()
        .zip(space.domains())
        .map(|(&g, domain)| if rng.random_bool(p) { domain.sample(rng) } else { g })
        .collect::<Vec<_>>()
        .into()
}

/// Parent pairs for `n_children` children: consecutive overlapping pairs
/// `(0, 1), (1, 2), …, (n − 1, 0)`, repeated cyclically.
pub fn pairing_schedule(n_parents: usize, n_children: usize) -> Vec<(usize, usize)> {
    (0..n_children)
        .map(|c| (c % n_parents, (c + 1) % n_parents))
        .collect()
}

/// Elites (stable sort on fitness, descending) followed by the children.
pub fn next_generation(
    population: &[Individual],
    config: &GaConfig,
    space: &GeneSpace,
    streams: &mut RngStreams,
) -> Result<Vec<Individual>, GaError> {
    let fitness: Vec<f64> = population
        .iter()
        .enumerate()
        .map(|(i, ind)| ind.fitness.ok_or(GaError::Unevaluated(i)))
        .collect::<Result<_, _>>()?;
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));

    let mut next: Vec<Individual> = order[..config.elitism_size]
        .iter()
        .map(|&i| population[i].clone())
        .collect();

    let n_children = config.children_per_generation();
    if n_children == 0 {
        return Ok(next);
    }
    let parents = tournament_indices(
        population,
        config.tournament_size,
        config.parents_mating,
        &mut streams.selection,
    )?;
    for (a, b) in pairing_schedule(parents.len(), n_children) {
        let child = uniform_crossover(
            &population[parents[a]].genome,
            &population[parents[b]].genome,
            &mut streams.crossover,
        )?;
        let child = random_mutation(&child, config.mutation_probability, space, &mut streams.mutation);
        next.push(Individual::new(child));
    }
    Ok(next)
}

//! Genetic algorithm over stacked regression coefficients, with each child
//! decoded by nearest-regression assignment and refit (one Lloyd step).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::init::{random_partition_with, repair_with};
use super::Solution;
use crate::control::RunControl;
use crate::cost::{partition_sse, CostModel};
use crate::data::{Dataset, Partition};
use crate::error::{contract, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    /// Population size `H`.
    pub pop_size: usize,
    /// Probability that a child is mutated.
    pub mutation_prob: f64,
    /// Generations without improvement of the best SSE before stopping.
    pub max_stall: usize,
    pub seed: u64,
    /// Replace the worst member only when both children are worse than the
    /// whole population, as the algorithm is literally stated.
    pub literal_replacement: bool,
}

impl Default for GaParams {
    fn default() -> Self {
        Self { pop_size: 10, mutation_prob: 0.01, max_stall: 50, seed: 0, literal_replacement: false }
    }
}

impl GaParams {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.pop_size < 2 {
            return contract(format!("population size {} below 2", self.pop_size));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return contract(format!("mutation probability {} outside [0, 1]", self.mutation_prob));
        }
        Ok(())
    }
}

/// Genes `k*J .. (k+1)*J` hold the coefficients of cluster `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chromosome {
    pub genes: Vec<f64>,
    /// Reciprocal SSE of the decoded partition; NaN until evaluated.
    pub fitness: f64,
}

impl Chromosome {
    pub fn unevaluated(genes: Vec<f64>) -> Self {
        Self { genes, fitness: f64::NAN }
    }
}

/// Two independent fitness-proportional draws.
pub fn roulette_select<R: Rng + ?Sized>(population: &[Chromosome], rng: &mut R) -> Result<(usize, usize)> {
    if population.is_empty() {
        return contract("empty population");
    }
    if let Some(bad) = population.iter().find(|c| !(c.fitness.is_finite() && c.fitness > 0.0)) {
        return contract(format!("fitness {} is not positive and finite", bad.fitness));
    }
    let total: f64 = population.iter().map(|c| c.fitness).sum();
    let mut draw = || {
        let mut x = rng.random::<f64>() * total;
        for (idx, c) in population.iter().enumerate() {
            if x < c.fitness {
                return idx;
            }
            x -= c.fitness;
        }
        population.len() - 1
    };
    let a = draw();
    let b = draw();
    Ok((a, b))
}

/// Swaps the genes from position `cut` onward; `cut` lies in `1..len`.
pub fn crossover_at(h1: &Chromosome, h2: &Chromosome, cut: usize) -> (Chromosome, Chromosome) {
    assert_eq!(h1.genes.len(), h2.genes.len());
    assert!(cut >= 1 && cut < h1.genes.len(), "cut {cut} out of range");
    let mut a = h1.genes[..cut].to_vec();
    a.extend_from_slice(&h2.genes[cut..]);
    let mut b = h2.genes[..cut].to_vec();
    b.extend_from_slice(&h1.genes[cut..]);
    (Chromosome::unevaluated(a), Chromosome::unevaluated(b))
}

/// Single-point crossover at a uniform cut in `1..=len-1`.
pub fn crossover<R: Rng + ?Sized>(h1: &Chromosome, h2: &Chromosome, rng: &mut R) -> (Chromosome, Chromosome) {
    let len = h1.genes.len();
    if len < 2 {
        return (Chromosome::unevaluated(h1.genes.clone()), Chromosome::unevaluated(h2.genes.clone()));
    }
    let cut = rng.random_range(1..len);
    crossover_at(h1, h2, cut)
}

/// With probability `p`, perturbs one uniformly chosen gene `v` to
/// `v ± 2 δ v` (or `± 2 δ` when `v = 0`) with `δ ~ U(0, 1)`.
pub fn mutate<R: Rng + ?Sized>(h: &Chromosome, p: f64, rng: &mut R) -> Chromosome {
    let mut out = Chromosome::unevaluated(h.genes.clone());
    if h.genes.is_empty() || !rng.random_bool(p) {
        return out;
    }
    let pos = rng.random_range(0..h.genes.len());
    let delta: f64 = rng.random();
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let v = h.genes[pos];
    out.genes[pos] = if v == 0.0 { sign * 2.0 * delta } else { v + sign * 2.0 * delta * v };
    out
}

/// Nearest-regression labels before repair; ties go to the smallest cluster index.
pub fn assign_by_genes(dataset: &Dataset, genes: &[f64], k: usize) -> Vec<usize> {
    let j = dataset.num_predictors();
    assert_eq!(genes.len(), k * j, "genes must hold K*J coefficients");
    dataset
        .entities()
        .iter()
        .map(|e| {
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let err = e.sse_under(&genes[c * j..(c + 1) * j]);
                if err < best.0 {
                    best = (err, c);
                }
            }
            best.1
        })
        .collect()
}

/// Nearest-regression assignment followed by the minimum-size repair.
pub fn decode_chromosome(dataset: &Dataset, genes: &[f64], k: usize) -> Partition {
    let model = CostModel::new(dataset);
    decode_with(&model, genes, k)
}

fn decode_with(model: &CostModel, genes: &[f64], k: usize) -> Partition {
    let labels = assign_by_genes(model.dataset(), genes, k);
    repair_with(model, &Partition::new(labels, k), model.dataset().min_cluster_size())
}

/// Per-cluster least-squares coefficients, stacked.
pub fn encode(model: &CostModel, p: &Partition) -> Vec<f64> {
    let j = model.dataset().num_predictors();
    let mut genes = Vec::with_capacity(p.num_clusters() * j);
    for members in p.clusters() {
        if members.is_empty() {
            genes.extend(std::iter::repeat_n(0.0, j));
        } else {
            genes.extend(model.entity_fit(&members).beta);
        }
    }
    genes
}

struct Member {
    chromosome: Chromosome,
    partition: Partition,
    sse: f64,
}

fn evaluate(model: &CostModel, partition: Partition) -> Member {
    let sse = model.partition_cost(&partition);
    let genes = encode(model, &partition);
    Member { chromosome: Chromosome { genes, fitness: 1.0 / sse }, partition, sse }
}

/// Decode, refit and re-encode a child.
fn develop(model: &CostModel, child: &Chromosome, k: usize) -> Member {
    evaluate(model, decode_with(model, &child.genes, k))
}

pub fn run_ga_lloyd(dataset: &Dataset, params: &GaParams) -> Result<Solution> {
    run_ga_lloyd_controlled(dataset, params, &mut RunControl::unlimited())
}

pub fn run_ga_lloyd_controlled(dataset: &Dataset, params: &GaParams, control: &mut RunControl) -> Result<Solution> {
    params.validate()?;
    let model = CostModel::new(dataset);
    let (k, n) = (dataset.num_clusters(), dataset.min_cluster_size());
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut population: Vec<Member> =
        (0..params.pop_size).map(|_| evaluate(&model, random_partition_with(&model, k, n, &mut rng))).collect();
    let best_of = |pop: &[Member]| {
        (0..pop.len()).min_by(|&a, &b| pop[a].sse.total_cmp(&pop[b].sse).then(a.cmp(&b))).expect("nonempty")
    };
    let mut best = {
        let b = &population[best_of(&population)];
        (b.partition.clone(), b.sse)
    };
    control.record(best.1);

    let mut stall = 0;
    let mut generations = 0;
    let mut converged = true;
    while stall < params.max_stall && best.1 > 0.0 {
        if control.expired() {
            converged = false;
            break;
        }
        generations += 1;
        let chromosomes: Vec<Chromosome> = population.iter().map(|m| m.chromosome.clone()).collect();
        let (a, b) = roulette_select(&chromosomes, &mut rng)?;
        let (ca, cb) = crossover(&chromosomes[a], &chromosomes[b], &mut rng);
        let ca = mutate(&ca, params.mutation_prob, &mut rng);
        let cb = mutate(&cb, params.mutation_prob, &mut rng);
        let ma = develop(&model, &ca, k);
        let mb = develop(&model, &cb, k);
        let child = if mb.sse < ma.sse { mb } else { ma };

        let worst = (0..population.len())
            .max_by(|&x, &y| population[x].sse.total_cmp(&population[y].sse).then(y.cmp(&x)))
            .expect("nonempty");
        let replace = if params.literal_replacement {
            child.sse > population[worst].sse
        } else {
            child.sse < population[worst].sse
        };
        let improved = child.sse < best.1;
        if improved {
            best = (child.partition.clone(), child.sse);
            control.record(best.1);
        }
        if replace {
            population[worst] = child;
        }
        stall = if improved { 0 } else { stall + 1 };
    }

    let (mut partition, mut sse) = best;
    // Lloyd polish: refit and reassign while the total strictly drops.
    loop {
        let genes = encode(&model, &partition);
        let next = decode_with(&model, &genes, k);
        let next_sse = model.partition_cost(&next);
        if next_sse < sse {
            partition = next;
            sse = next_sse;
            control.record(sse);
        } else {
            break;
        }
    }
    let sse_exact = partition_sse(dataset, &partition)?;
    control.record(sse_exact);
    Ok(Solution { partition, sse: sse_exact, iterations: generations, converged, trace: control.trace().to_vec() })
}

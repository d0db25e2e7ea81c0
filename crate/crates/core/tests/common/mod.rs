#![allow(dead_code)]

use gclr_core::{Dataset, DatasetOptions, Entity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Entities with `obs` observations of `j` standard-normal-ish predictors.
pub fn random_dataset(seed: u64, entities: usize, obs: usize, j: usize, k: usize, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let es = (0..entities)
        .map(|i| {
            let x: Vec<f64> = (0..obs * j).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..obs).map(|_| rng.random_range(-5.0..5.0)).collect();
            Entity::new(format!("e{i}"), y, x, (1..=obs as u32).collect()).unwrap()
        })
        .collect();
    Dataset::with_options(es, n, k, DatasetOptions { allow_degenerate: true }).unwrap()
}

/// Each observation gets its own dummy, so a cluster fit is the pointwise mean.
pub fn identity_design(seed: u64, entities: usize, obs: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let es = (0..entities)
        .map(|i| {
            let mut x = vec![0.0; obs * obs];
            for l in 0..obs {
                x[l * obs + l] = 1.0;
            }
            let y: Vec<f64> = (0..obs).map(|_| rng.random_range(-10.0..10.0)).collect();
            Entity::new(format!("e{i}"), y, x, (1..=obs as u32).collect()).unwrap()
        })
        .collect();
    Dataset::with_options(es, 1, 1, DatasetOptions { allow_degenerate: true }).unwrap()
}

/// Weekly discount-plus-dummy design where every entity of cluster `c` is
/// generated exactly by `betas[c]`. The planted partition has zero error.
pub fn planted_exact(seed: u64, labels: &[usize], betas: &[Vec<f64>], n: usize) -> Dataset {
    let weeks = betas[0].len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let es = labels
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let j = weeks + 1;
            let mut x = vec![0.0; weeks * j];
            let mut y = Vec::with_capacity(weeks);
            for t in 0..weeks {
                let row = &mut x[t * j..(t + 1) * j];
                if rng.random_bool(0.1) {
                    row[0] = [0.15, 0.2, 0.25, 0.3][rng.random_range(0..4)];
                }
                row[t + 1] = 1.0;
                y.push(row.iter().zip(&betas[c]).map(|(a, b)| a * b).sum());
            }
            Entity::new(format!("e{i}"), y, x, (1..=weeks as u32).collect()).unwrap()
        })
        .collect();
    let k = betas.len();
    Dataset::with_options(es, n, k, DatasetOptions { allow_degenerate: true }).unwrap()
}

/// Coefficients for `k` clusters over `weeks` dummies: discount effect then seasonal levels.
pub fn planted_betas(seed: u64, k: usize, weeks: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            let mut b = vec![rng.random_range(50.0..150.0)];
            let level = rng.random_range(100.0..200.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            b.extend((0..weeks).map(|t| level * (1.0 + 0.8 * (phase + t as f64 * std::f64::consts::TAU / weeks as f64).sin())));
            b
        })
        .collect()
}

//! Synthetic retail instances: weekly sales driven by a promotion uplift,
//! a seasonal pattern and Gaussian noise.
//!
//! Each entity has 52 weekly observations. Predictors are the discount
//! fraction followed by 52 week-of-year dummies, so `J = 53`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetOptions, Entity, Partition};
use crate::error::{contract, Error, Result};

pub const WEEKS: usize = 52;
pub const NUM_PATTERNS: usize = 7;
pub const DISCOUNT_LEVELS: [f64; 4] = [0.15, 0.20, 0.25, 0.30];

/// Uplift interval for each discount level.
pub const UPLIFT_RANGES: [(f64, f64); 4] = [(0.4, 0.5), (0.5, 0.6), (0.6, 0.7), (0.7, 0.8)];

/// Seasonal multiplier of pattern `id` (1..=7) in week `t` (1..=52).
pub fn seasonal_pattern(id: usize, t: usize) -> Result<f64> {
    if !(1..=WEEKS).contains(&t) {
        return contract(format!("week {t} outside 1..=52"));
    }
    let t = t as f64;
    let v = match id {
        1 => 0.0,
        2 => 0.8 * (2.0 * PI * (t - 1.0) / 52.0).cos(),
        3 => 0.8 * (PI * (t - 1.0) / 51.0).sin(),
        4 => 0.8 * (t - 26.5) / 25.5,
        5 => -0.8 * (t - 26.5) / 25.5,
        6 => 0.8 * (-((t - 45.0) / 4.0).powi(2)).exp(),
        7 => 0.8 * (-((t - 8.0) / 4.0).powi(2)).exp(),
        _ => return contract(format!("seasonal pattern {id} outside 1..=7")),
    };
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub entities: usize,
    /// Planted cluster count, used by type 2 only.
    pub k: usize,
    pub seed: u64,
    /// Noise standard deviation is `S_A / noise_scale`; infinity disables noise.
    pub noise_scale: f64,
    /// Minimum cluster size of the returned dataset.
    pub n: usize,
}

impl SyntheticConfig {
    pub fn new(entities: usize, k: usize, seed: u64) -> Self {
        Self { entities, k, seed, noise_scale: 5.0, n: 2 }
    }
}

/// Generator inputs behind one entity's series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityParams {
    pub id: String,
    pub average_sales: f64,
    pub pattern: usize,
    /// Promotional weeks in increasing order, 1-based.
    pub promo_weeks: Vec<usize>,
    /// Discount fraction of each promotional week.
    pub discounts: Vec<f64>,
    /// Uplift `p_promo` of each promotional week.
    pub uplifts: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub dataset: Dataset,
    pub target: Option<Partition>,
    pub params: Vec<EntityParams>,
    /// Seasonal pattern of each planted cluster (type 2).
    pub cluster_patterns: Option<Vec<usize>>,
}

fn entity_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 + 1);
    rng
}

fn gen_entity(i: usize, pattern: usize, noise_scale: f64, rng: &mut ChaCha8Rng) -> Result<(Entity, EntityParams)> {
    let average_sales = rng.random_range(100.0..200.0);
    let count = rng.random_range(3..=6);
    let mut promo_weeks: Vec<usize> = sample(rng, WEEKS, count).into_iter().map(|w| w + 1).collect();
    promo_weeks.sort_unstable();
    let levels: Vec<usize> = promo_weeks.iter().map(|_| rng.random_range(0..DISCOUNT_LEVELS.len())).collect();
    let uplifts: Vec<f64> = levels
        .iter()
        .map(|&l| {
            let (lo, hi) = UPLIFT_RANGES[l];
            rng.random_range(lo..hi)
        })
        .collect();
    let discounts: Vec<f64> = levels.iter().map(|&l| DISCOUNT_LEVELS[l]).collect();

    let sd = average_sales / noise_scale;
    let noise = if sd > 0.0 {
        Some(Normal::new(0.0, sd).map_err(|e| Error::Contract(format!("noise deviation: {e}")))?)
    } else {
        None
    };
    let j = WEEKS + 1;
    let mut y = Vec::with_capacity(WEEKS);
    let mut x = vec![0.0; WEEKS * j];
    for t in 1..=WEEKS {
        let promo = promo_weeks.iter().position(|&w| w == t);
        let demand = match promo {
            Some(p) => average_sales * (1.0 + uplifts[p]),
            None => average_sales,
        };
        let seasonal = average_sales * seasonal_pattern(pattern, t)?;
        let eps = noise.as_ref().map_or(0.0, |d| d.sample(rng));
        y.push(demand + seasonal + eps);
        let row = &mut x[(t - 1) * j..t * j];
        row[0] = promo.map_or(0.0, |p| discounts[p]);
        row[t] = 1.0;
    }
    let id = format!("E{:04}", i + 1);
    let entity = Entity::new(id.clone(), y, x, (1..=WEEKS as u32).collect())?;
    Ok((entity, EntityParams { id, average_sales, pattern, promo_weeks, discounts, uplifts }))
}

fn dataset_for(entities: Vec<Entity>, cfg: &SyntheticConfig, k: usize) -> Result<Dataset> {
    let options = DatasetOptions { allow_degenerate: cfg.n * WEEKS <= WEEKS + 2 };
    Dataset::with_options(entities, cfg.n, k, options)
}

/// Independent entities, each with its own randomly chosen pattern.
pub fn gen_type1(cfg: &SyntheticConfig) -> Result<SyntheticInstance> {
    if cfg.entities == 0 {
        return contract("at least one entity is required");
    }
    let mut entities = Vec::with_capacity(cfg.entities);
    let mut params = Vec::with_capacity(cfg.entities);
    for i in 0..cfg.entities {
        let mut rng = entity_rng(cfg.seed, i);
        let pattern = rng.random_range(1..=NUM_PATTERNS);
        let (e, p) = gen_entity(i, pattern, cfg.noise_scale, &mut rng)?;
        entities.push(e);
        params.push(p);
    }
    let dataset = dataset_for(entities, cfg, cfg.k)?;
    Ok(SyntheticInstance { dataset, target: None, params, cluster_patterns: None })
}

/// Bounded attempts at drawing a planted assignment with every cluster of size `n`.
pub const ASSIGNMENT_RETRIES: usize = 1000;

/// Entities drawn from `K` planted clusters sharing a seasonal pattern.
pub fn gen_type2(cfg: &SyntheticConfig) -> Result<SyntheticInstance> {
    if cfg.k == 0 || cfg.entities < cfg.k * cfg.n {
        return Err(Error::Infeasible { entities: cfg.entities, k: cfg.k, n: cfg.n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let patterns: Vec<usize> = if cfg.k <= NUM_PATTERNS {
        sample(&mut rng, NUM_PATTERNS, cfg.k).into_iter().map(|p| p + 1).collect()
    } else {
        (0..cfg.k).map(|_| rng.random_range(1..=NUM_PATTERNS)).collect()
    };
    let mut labels = None;
    for _ in 0..ASSIGNMENT_RETRIES {
        let draw: Vec<usize> = (0..cfg.entities).map(|_| rng.random_range(0..cfg.k)).collect();
        let mut sizes = vec![0; cfg.k];
        for &c in &draw {
            sizes[c] += 1;
        }
        if sizes.iter().all(|&s| s >= cfg.n) {
            labels = Some(draw);
            break;
        }
    }
    let labels = labels.ok_or_else(|| {
        Error::Contract(format!("no planted assignment with clusters of size {} after {ASSIGNMENT_RETRIES} draws", cfg.n))
    })?;

    let mut entities = Vec::with_capacity(cfg.entities);
    let mut params = Vec::with_capacity(cfg.entities);
    for (i, &c) in labels.iter().enumerate() {
        let mut rng = entity_rng(cfg.seed, i);
        let (e, p) = gen_entity(i, patterns[c], cfg.noise_scale, &mut rng)?;
        entities.push(e);
        params.push(p);
    }
    let dataset = dataset_for(entities, cfg, cfg.k)?;
    Ok(SyntheticInstance {
        dataset,
        target: Some(Partition::new(labels, cfg.k)),
        params,
        cluster_patterns: Some(patterns),
    })
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    target: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    cluster_patterns: Option<Vec<usize>>,
    entities: Vec<EntityParams>,
}

/// Target partition stored in a sidecar file, if any.
pub fn read_target(sidecar: &Path) -> Result<Option<Vec<usize>>> {
    let s: Sidecar = serde_json::from_reader(File::open(sidecar)?)?;
    Ok(s.target)
}

/// Writes the instance CSV at `path` and the generator parameters next to it
/// with a `.json` extension.
pub fn write_instance(instance: &SyntheticInstance, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    instance.dataset.write_csv(&mut out)?;
    out.flush()?;
    let sidecar = Sidecar {
        target: instance.target.as_ref().map(|p| p.labels().to_vec()),
        cluster_patterns: instance.cluster_patterns.clone(),
        entities: instance.params.clone(),
    };
    let mut side = BufWriter::new(File::create(path.with_extension("json"))?);
    serde_json::to_writer_pretty(&mut side, &sidecar)?;
    side.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_dataset_with, validate_partition};

    #[test]
    fn pattern_values() {
        for t in 1..=52 {
            assert_eq!(seasonal_pattern(1, t).unwrap(), 0.0);
        }
        assert!((seasonal_pattern(2, 1).unwrap() - 0.8).abs() < 1e-15);
        let peak = (1..=52).max_by(|&a, &b| seasonal_pattern(6, a).unwrap().total_cmp(&seasonal_pattern(6, b).unwrap()));
        assert_eq!(peak, Some(45));
        assert!(seasonal_pattern(8, 1).is_err());
        assert!(seasonal_pattern(1, 53).is_err());
    }

    #[test]
    fn type1_ranges() {
        let inst = gen_type1(&SyntheticConfig::new(200, 2, 3)).unwrap();
        assert_eq!(inst.dataset.num_predictors(), 53);
        for (e, p) in inst.dataset.entities().iter().zip(&inst.params) {
            assert!((100.0..200.0).contains(&p.average_sales));
            assert!((3..=6).contains(&p.promo_weeks.len()));
            assert_eq!(e.len(), 52);
            for l in 0..52 {
                let row = e.row(l);
                let week = l + 1;
                assert_eq!(row[1..].iter().filter(|&&v| v == 1.0).count(), 1);
                assert_eq!(row[week], 1.0);
                match p.promo_weeks.iter().position(|&w| w == week) {
                    Some(q) => {
                        assert!(DISCOUNT_LEVELS.contains(&row[0]));
                        assert_eq!(row[0], p.discounts[q]);
                    }
                    None => assert_eq!(row[0], 0.0),
                }
            }
            for (d, u) in p.discounts.iter().zip(&p.uplifts) {
                let lvl = DISCOUNT_LEVELS.iter().position(|x| x == d).unwrap();
                let (lo, hi) = UPLIFT_RANGES[lvl];
                assert!(*u >= lo && *u < hi);
            }
        }
        assert!(inst.target.is_none());
    }

    #[test]
    fn noiseless_flat_entities_sell_the_average() {
        let mut cfg = SyntheticConfig::new(60, 2, 4);
        cfg.noise_scale = f64::INFINITY;
        let inst = gen_type1(&cfg).unwrap();
        let mut seen = 0;
        for (e, p) in inst.dataset.entities().iter().zip(&inst.params) {
            if p.pattern != 1 {
                continue;
            }
            seen += 1;
            for t in 1..=52 {
                if !p.promo_weeks.contains(&t) {
                    assert_eq!(e.y[t - 1], p.average_sales);
                }
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn type2_clusters_share_patterns() {
        let inst = gen_type2(&SyntheticConfig::new(20, 3, 8)).unwrap();
        let target = inst.target.as_ref().unwrap();
        assert!(validate_partition(target, &inst.dataset).is_empty());
        let patterns = inst.cluster_patterns.as_ref().unwrap();
        for (i, p) in inst.params.iter().enumerate() {
            assert_eq!(p.pattern, patterns[target.label(i)]);
        }
        let mut distinct = patterns.clone();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), 3);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticConfig::new(10, 2, 77);
        let a = gen_type2(&cfg).unwrap();
        let b = gen_type2(&cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.dataset, b.dataset);
    }

    #[test]
    fn write_then_parse_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.csv");
        let inst = gen_type2(&SyntheticConfig::new(8, 2, 5)).unwrap();
        write_instance(&inst, &path).unwrap();
        let back = parse_dataset_with(File::open(&path).unwrap(), 2, 2, inst.dataset.options()).unwrap();
        assert_eq!(back, inst.dataset);
        assert_eq!(read_target(&path.with_extension("json")).unwrap().unwrap(), inst.target.unwrap().labels());

        let t1 = gen_type1(&SyntheticConfig::new(4, 2, 5)).unwrap();
        let p1 = dir.path().join("t1.csv");
        write_instance(&t1, &p1).unwrap();
        let side = std::fs::read_to_string(p1.with_extension("json")).unwrap();
        assert!(!side.contains("\"target\""));
        let first = std::fs::read(&p1).unwrap();
        write_instance(&t1, &p1).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), first);
    }
}

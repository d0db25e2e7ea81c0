//! Instances, partitions and the instance CSV format.
//!
//! An instance is a list of entities, each owning `L_i` observations of a
//! response `y` and `J` predictors. The CSV layout is one row per
//! observation with header `entity_id,week,y,x1,...,xJ`, rows of one
//! entity contiguous.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// One clustered unit with its own observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: String,
    /// Response observations, length `L_i`.
    pub y: Vec<f64>,
    /// Predictors, row-major `L_i x J`.
    pub x: Vec<f64>,
    /// Week label of each observation (informational outside the two-stage heuristic).
    pub weeks: Vec<u32>,
}

impl Entity {
    pub fn new(id: impl Into<String>, y: Vec<f64>, x: Vec<f64>, weeks: Vec<u32>) -> Result<Self> {
        let id = id.into();
        let l = y.len();
        if l == 0 {
            return contract(format!("entity {id} has no observations"));
        }
        if x.len() % l != 0 || x.is_empty() {
            return contract(format!(
                "entity {id}: predictor block of {} values does not split into {l} rows",
                x.len()
            ));
        }
        if weeks.len() != l {
            return contract(format!("entity {id}: {} week labels for {l} observations", weeks.len()));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return contract(format!("entity {id} has non-finite observations"));
        }
        Ok(Self { id, y, x, weeks })
    }

    /// Number of observations `L_i`.
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn num_predictors(&self) -> usize {
        self.x.len() / self.y.len()
    }

    pub fn row(&self, l: usize) -> &[f64] {
        let j = self.num_predictors();
        &self.x[l * j..(l + 1) * j]
    }

    /// Squared error of this entity's observations under coefficients `beta`.
    pub fn sse_under(&self, beta: &[f64]) -> f64 {
        let mut total = 0.0;
        for (l, &y) in self.y.iter().enumerate() {
            let pred: f64 = self.row(l).iter().zip(beta).map(|(a, b)| a * b).sum();
            let r = y - pred;
            total += r * r;
        }
        total
    }
}

/// Toggles for dataset validation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DatasetOptions {
    /// Accept instances where `min L_i * n <= J + 1`, i.e. clusters of
    /// minimum size may be fitted without error.
    pub allow_degenerate: bool,
}

/// A validated instance together with the clustering targets `K` and `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    entities: Vec<Entity>,
    j: usize,
    n: usize,
    k: usize,
    options: DatasetOptions,
}

impl Dataset {
    pub fn new(entities: Vec<Entity>, n: usize, k: usize) -> Result<Self> {
        Self::with_options(entities, n, k, DatasetOptions::default())
    }

    pub fn with_options(entities: Vec<Entity>, n: usize, k: usize, options: DatasetOptions) -> Result<Self> {
        if entities.is_empty() {
            return contract("dataset has no entities");
        }
        if n == 0 || k == 0 {
            return contract("cluster count K and minimum size n must be positive");
        }
        let j = entities[0].num_predictors();
        if let Some(e) = entities.iter().find(|e| e.num_predictors() != j) {
            return contract(format!(
                "entity {} has {} predictors, expected {j}",
                e.id,
                e.num_predictors()
            ));
        }
        let mut seen = HashSet::new();
        if let Some(e) = entities.iter().find(|e| !seen.insert(e.id.as_str())) {
            return contract(format!("duplicate entity id {}", e.id));
        }
        if entities.len() < k * n {
            return Err(Error::Infeasible { entities: entities.len(), k, n });
        }
        let min_obs = entities.iter().map(Entity::len).min().unwrap_or(0);
        if !options.allow_degenerate && min_obs * n <= j + 1 {
            return Err(Error::Degenerate { min_obs, n, j });
        }
        Ok(Self { entities, j, n, k, options })
    }

    /// Same entities, different clustering targets.
    pub fn retarget(&self, k: usize, n: usize) -> Result<Self> {
        Self::with_options(self.entities.clone(), n, k, self.options)
    }

    pub fn retarget_with(&self, k: usize, n: usize, options: DatasetOptions) -> Result<Self> {
        Self::with_options(self.entities.clone(), n, k, options)
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn entity(&self, i: usize) -> &Entity {
        &self.entities[i]
    }

    /// Number of entities `I`.
    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Number of predictors `J`.
    pub fn num_predictors(&self) -> usize {
        self.j
    }

    pub fn min_cluster_size(&self) -> usize {
        self.n
    }

    pub fn num_clusters(&self) -> usize {
        self.k
    }

    pub fn options(&self) -> DatasetOptions {
        self.options
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.id == id)
    }

    /// Writes the instance CSV. Values use the shortest representation that
    /// parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["entity_id".to_string(), "week".to_string(), "y".to_string()];
        header.extend((1..=self.j).map(|c| format!("x{c}")));
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.j + 3);
        for e in &self.entities {
            for l in 0..e.len() {
                record.clear();
                record.push(e.id.clone());
                record.push(e.weeks[l].to_string());
                record.push(format_f64(e.y[l]));
                record.extend(e.row(l).iter().map(|&v| format_f64(v)));
                w.write_record(&record)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// Reads an instance CSV and validates it against `n` and `k`.
pub fn parse_dataset<R: Read>(source: R, n: usize, k: usize) -> Result<Dataset> {
    parse_dataset_with(source, n, k, DatasetOptions::default())
}

pub fn parse_dataset_with<R: Read>(source: R, n: usize, k: usize, options: DatasetOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?.clone();
    let j = check_header(&header)?;

    let mut entities: Vec<Entity> = Vec::new();
    let mut finished: HashSet<String> = HashSet::new();
    let mut current: Option<(String, Vec<f64>, Vec<f64>, Vec<u32>)> = None;

    for result in reader.records() {
        let record = result?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::Parse { line, message };
        if record.len() != j + 3 {
            return Err(bad(format!("expected {} fields, found {}", j + 3, record.len())));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(bad("empty entity_id".into()));
        }
        let week: u32 = record[1]
            .parse()
            .map_err(|_| bad(format!("week {:?} is not a non-negative integer", &record[1])))?;
        let mut values = Vec::with_capacity(j + 1);
        for field in record.iter().skip(2) {
            let v: f64 = field.parse().map_err(|_| bad(format!("{field:?} is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("{field:?} is not finite")));
            }
            values.push(v);
        }

        let same = matches!(&current, Some((cur, ..)) if *cur == id);
        if !same {
            if finished.contains(&id) {
                return Err(bad(format!("rows of entity {id} are not contiguous")));
            }
            if let Some((cid, y, x, w)) = current.take() {
                finished.insert(cid.clone());
                entities.push(Entity::new(cid, y, x, w)?);
            }
            current = Some((id, Vec::new(), Vec::new(), Vec::new()));
        }
        let (_, y, x, w) = current.as_mut().expect("current entity");
        y.push(values[0]);
        x.extend_from_slice(&values[1..]);
        w.push(week);
    }
    if let Some((cid, y, x, w)) = current.take() {
        entities.push(Entity::new(cid, y, x, w)?);
    }
    if entities.is_empty() {
        return Err(Error::Parse { line: 1, message: "no observations".into() });
    }
    Dataset::with_options(entities, n, k, options)
}

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    let bad = |message: String| Error::Parse { line: 1, message };
    if header.len() < 4 {
        return Err(bad(format!("header needs at least 4 columns, found {}", header.len())));
    }
    let fixed = ["entity_id", "week", "y"];
    for (pos, name) in fixed.iter().enumerate() {
        if &header[pos] != *name {
            return Err(bad(format!("column {} must be {name:?}, found {:?}", pos + 1, &header[pos])));
        }
    }
    for (c, name) in header.iter().skip(3).enumerate() {
        let want = format!("x{}", c + 1);
        if name != want {
            return Err(bad(format!("expected predictor column {want:?}, found {name:?}")));
        }
    }
    Ok(header.len() - 3)
}

/// Assignment of every entity to one of `K` clusters (labels are 0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Self {
        Self { labels, k }
    }

    /// Builds a partition from explicit clusters of entity indices.
    pub fn from_clusters(num_entities: usize, clusters: &[Vec<usize>]) -> Self {
        let mut labels = vec![usize::MAX; num_entities];
        for (c, members) in clusters.iter().enumerate() {
            for &i in members {
                labels[i] = c;
            }
        }
        Self { labels, k: clusters.len() }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn set_label(&mut self, i: usize, k: usize) {
        self.labels[i] = k;
    }

    pub fn num_clusters(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Members of every cluster, in increasing entity order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.labels.iter().enumerate() {
            if c < self.k {
                out[c].push(i);
            }
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for &c in &self.labels {
            if c < self.k {
                out[c] += 1;
            }
        }
        out
    }

    /// Relabels clusters by order of first appearance, so that label
    /// permutations of the same clustering compare equal.
    pub fn canonical(&self) -> Self {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&c| {
                if c >= self.k {
                    return c;
                }
                if map[c] == usize::MAX {
                    map[c] = next;
                    next += 1;
                }
                map[c]
            })
            .collect();
        Self { labels, k: self.k }
    }

    pub fn same_clustering(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

/// A broken assignment or cardinality constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Entity has no cluster.
    Unassigned { entity: usize },
    /// Label outside `[0, K)`.
    LabelOutOfRange { entity: usize, label: usize },
    /// Assignment mentions an entity the dataset does not have.
    UnknownEntity { entity: usize },
    /// Cluster count differs from the dataset's `K`.
    ClusterCount { expected: usize, found: usize },
    /// Cluster below the minimum size `n`.
    TooSmall { cluster: usize, size: usize, min: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unassigned { entity } => write!(f, "entity {entity} is not assigned to a cluster"),
            Violation::LabelOutOfRange { entity, label } => {
                write!(f, "entity {entity} has cluster label {label} outside the valid range")
            }
            Violation::UnknownEntity { entity } => write!(f, "assignment names unknown entity {entity}"),
            Violation::ClusterCount { expected, found } => {
                write!(f, "partition has {found} clusters, expected {expected}")
            }
            Violation::TooSmall { cluster, size, min } => {
                write!(f, "cluster {cluster} has {size} entities, minimum is {min}")
            }
        }
    }
}

/// Lists every violated assignment or minimum-size constraint; empty when
/// the partition is feasible for `dataset`.
pub fn validate_partition(p: &Partition, dataset: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    if p.num_clusters() != dataset.num_clusters() {
        out.push(Violation::ClusterCount {
            expected: dataset.num_clusters(),
            found: p.num_clusters(),
        });
    }
    let total = dataset.len();
    for i in 0..total {
        match p.labels.get(i) {
            None | Some(&usize::MAX) => out.push(Violation::Unassigned { entity: i }),
            Some(&label) if label >= p.num_clusters() => out.push(Violation::LabelOutOfRange { entity: i, label }),
            _ => {}
        }
    }
    for i in total..p.labels.len() {
        out.push(Violation::UnknownEntity { entity: i });
    }
    let n = dataset.min_cluster_size();
    for (cluster, size) in p.sizes().into_iter().enumerate() {
        if size < n {
            out.push(Violation::TooSmall { cluster, size, min: n });
        }
    }
    out
}

pub(crate) fn ensure_valid(p: &Partition, dataset: &Dataset) -> Result<()> {
    let violations = validate_partition(p, dataset);
    if violations.is_empty() {
        Ok(())
    } else {
        let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        contract(format!("invalid partition: {}", text.join("; ")))
    }
}

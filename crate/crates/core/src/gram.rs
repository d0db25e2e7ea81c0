//! Screening costs from augmented Gram matrices `[X y]^T [X y]`.
//!
//! Columns are reordered so that sparse predictors come first and the
//! response comes last, and matrices are stored in envelope (skyline) form:
//! row `i` keeps columns `first[i]..=i`. A Cholesky factorization stays inside
//! that envelope, so block designs such as week dummies cost little more
//! than a diagonal. The last pivot squared is the residual sum of squares.
//!
//! Forming normal equations squares the condition number, so these values
//! only screen candidates. Anything that decides an answer is recomputed
//! with the orthogonal [`crate::linalg::Factor`].

use crate::data::Entity;

/// Pivots below this fraction of their diagonal are treated as dependent.
const DEPENDENT: f64 = 1e-11;
/// Pivots below this fraction (and above [`DEPENDENT`]) are too close to call.
const AMBIGUOUS: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct GramLayout {
    p: usize,
    /// Position of each augmented column in the new order.
    position: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    len: usize,
}

impl GramLayout {
    /// Layout covering the sparsity of every entity in `entities`.
    pub fn new(entities: &[Entity], j: usize) -> Self {
        let p = j + 1;
        let mut pattern = vec![false; p * p];
        for e in entities {
            for l in 0..e.len() {
                let row = e.row(l);
                let nz: Vec<usize> = (0..j).filter(|&c| row[c] != 0.0).chain(std::iter::once(j)).collect();
                for &a in &nz {
                    for &b in &nz {
                        pattern[a * p + b] = true;
                    }
                }
            }
        }
        let degree = |c: usize| (0..j).filter(|&d| d != c && pattern[c * p + d]).count();
        let mut order: Vec<usize> = (0..j).collect();
        order.sort_by_key(|&c| (degree(c), c));
        order.push(j);
        let mut position = vec![0; p];
        for (pos, &c) in order.iter().enumerate() {
            position[c] = pos;
        }
        let mut first = vec![0; p];
        for (i, &ci) in order.iter().enumerate() {
            first[i] = (0..=i).find(|&k| k == i || pattern[ci * p + order[k]]).unwrap_or(i);
        }
        let mut offset = vec![0; p];
        let mut len = 0;
        for i in 0..p {
            offset[i] = len;
            len += i - first[i] + 1;
        }
        Self { p, position, first, offset, len }
    }

    pub fn packed_len(&self) -> usize {
        self.len
    }

    fn at(&self, i: usize, k: usize) -> usize {
        self.offset[i] + k - self.first[i]
    }

    /// Packed Gram matrix of one entity.
    pub fn entity_gram(&self, e: &Entity) -> Vec<f64> {
        let j = self.p - 1;
        let mut g = vec![0.0; self.len];
        let mut a = vec![0.0; self.p];
        for l in 0..e.len() {
            let row = e.row(l);
            for c in 0..j {
                a[self.position[c]] = row[c];
            }
            a[self.p - 1] = e.y[l];
            for i in 0..self.p {
                if a[i] == 0.0 {
                    continue;
                }
                for k in self.first[i]..=i {
                    g[self.at(i, k)] += a[i] * a[k];
                }
            }
        }
        g
    }

    /// Sum of squared responses held in a packed Gram matrix.
    pub fn yy(&self, g: &[f64]) -> f64 {
        g[self.len - 1]
    }

    /// Residual sum of squares, or `None` when a pivot is too close to
    /// singular to decide the rank.
    pub fn sse(&self, g: &[f64], scratch: &mut Vec<f64>) -> Option<f64> {
        let p = self.p;
        scratch.clear();
        scratch.extend_from_slice(g);
        let l = scratch.as_mut_slice();
        let mut dropped = vec![false; p];
        for i in 0..p {
            let fi = self.first[i];
            for jj in fi..i {
                let idx = self.at(i, jj);
                if dropped[jj] {
                    l[idx] = 0.0;
                    continue;
                }
                let start = fi.max(self.first[jj]);
                let mut s = l[idx];
                let (ri, rj) = (self.at(i, start), self.at(jj, start));
                for t in 0..jj - start {
                    s -= l[ri + t] * l[rj + t];
                }
                l[idx] = s / l[self.at(jj, jj)];
            }
            let di = self.at(i, i);
            let mut d = l[di];
            for t in self.at(i, fi)..di {
                d -= l[t] * l[t];
            }
            if i == p - 1 {
                return Some(d.max(0.0));
            }
            let scale = g[di];
            if scale <= 0.0 || d <= DEPENDENT * scale {
                dropped[i] = true;
                l[di] = 0.0;
            } else if d < AMBIGUOUS * scale {
                return None;
            } else {
                l[di] = d.sqrt();
            }
        }
        unreachable!("loop returns at the response column")
    }
}

pub fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Factor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn week_entity(rng: &mut ChaCha8Rng, id: usize) -> Entity {
        let weeks = 12;
        let j = weeks + 1;
        let mut x = vec![0.0; weeks * j];
        let mut y = Vec::new();
        for t in 0..weeks {
            if rng.random_bool(0.2) {
                x[t * j] = 0.25;
            }
            x[t * j + 1 + t] = 1.0;
            y.push(rng.random_range(50.0..150.0));
        }
        Entity::new(format!("w{id}"), y, x, (1..=weeks as u32).collect()).unwrap()
    }

    #[test]
    fn matches_orthogonal_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let es: Vec<Entity> = (0..6).map(|i| week_entity(&mut rng, i)).collect();
        let j = 13;
        let layout = GramLayout::new(&es, j);
        assert!(layout.packed_len() < 3 * (j + 1) + j, "arrowhead envelope expected");
        let mut scratch = Vec::new();
        for mask in 1u32..64 {
            let mut g = vec![0.0; layout.packed_len()];
            let mut f = Factor::empty(j);
            for (i, e) in es.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    add_into(&mut g, &layout.entity_gram(e));
                    f.merge(&Factor::from_observations(&e.x, &e.y, j));
                }
            }
            let exact = f.sse();
            let approx = layout.sse(&g, &mut scratch).unwrap();
            assert!((exact - approx).abs() <= 1e-9 * layout.yy(&g), "mask {mask}: {exact} vs {approx}");
        }
    }

    #[test]
    fn dense_designs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let j = 3;
        let es: Vec<Entity> = (0..4)
            .map(|i| {
                let x: Vec<f64> = (0..5 * j).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
                Entity::new(format!("d{i}"), y, x, vec![1, 2, 3, 4, 5]).unwrap()
            })
            .collect();
        let layout = GramLayout::new(&es, j);
        let mut scratch = Vec::new();
        for e in &es {
            let g = layout.entity_gram(e);
            let exact = Factor::from_observations(&e.x, &e.y, j).sse();
            assert!((layout.sse(&g, &mut scratch).unwrap() - exact).abs() < 1e-10);
        }
    }
}

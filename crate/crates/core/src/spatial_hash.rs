//! Uniform spatial hash answering "first inserted point within ε of q".

use std::hash::{BuildHasher, Hasher};

use rustc_hash::{FxBuildHasher, FxHashMap};

use crate::tree::MergeNorm;

pub(crate) fn distance(norm: MergeNorm, a: &[f64], b: &[f64]) -> f64 {
    match norm {
        MergeNorm::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        MergeNorm::Max => a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
    }
}

/// Index over points stored row-major in an external buffer. Buckets are
/// keyed by a hash of the integer cell coordinates; colliding cells only add
/// candidates, which are filtered by the exact distance test.
pub(crate) struct MergeIndex {
    dim: usize,
    eps: f64,
    norm: MergeNorm,
    cell: f64,
    buckets: FxHashMap<u64, Vec<u32>>,
    lo: Vec<i64>,
    hi: Vec<i64>,
    cur: Vec<i64>,
}

impl MergeIndex {
    pub(crate) fn new(dim: usize, eps: f64, norm: MergeNorm) -> Self {
        MergeIndex {
            dim,
            eps,
            norm,
            // A query ball of radius ε spans at most two cells of width 2ε per axis.
            cell: 2.0 * eps,
            buckets: FxHashMap::default(),
            lo: vec![0; dim],
            hi: vec![0; dim],
            cur: vec![0; dim],
        }
    }

    fn exact_key(x: &[f64]) -> u64 {
        let mut h = FxBuildHasher.build_hasher();
        for v in x {
            // -0.0 and 0.0 are the same point.
            h.write_u64((v + 0.0).to_bits());
        }
        h.finish()
    }

    fn cell_key(cells: &[i64]) -> u64 {
        let mut h = FxBuildHasher.build_hasher();
        for c in cells {
            h.write_i64(*c);
        }
        h.finish()
    }

    #[inline]
    fn cell_of(&self, v: f64) -> i64 {
        (v / self.cell).floor() as i64
    }

    pub(crate) fn insert(&mut self, id: u32, x: &[f64]) {
        let key = if self.eps == 0.0 {
            Self::exact_key(x)
        } else {
            for (c, v) in self.cur.iter_mut().zip(x) {
                *c = (v / self.cell).floor() as i64;
            }
            Self::cell_key(&self.cur)
        };
        self.buckets.entry(key).or_default().push(id);
    }

    /// Smallest id whose point lies within ε of `q`.
    pub(crate) fn find(&mut self, q: &[f64], points: &[f64]) -> Option<u32> {
        let dim = self.dim;
        let (eps, norm) = (self.eps, self.norm);
        let point = |id: u32| &points[id as usize * dim..(id as usize + 1) * dim];
        let mut best: Option<u32> = None;
        let scan = |ids: &Vec<u32>, best: &mut Option<u32>| {
            for &id in ids {
                if best.is_some_and(|b| b <= id) {
                    // Buckets are filled in insertion order.
                    break;
                }
                if distance(norm, q, point(id)) <= eps {
                    *best = Some(id);
                    break;
                }
            }
        };

        if self.eps == 0.0 {
            if let Some(ids) = self.buckets.get(&Self::exact_key(q)) {
                scan(ids, &mut best);
            }
            return best;
        }

        for k in 0..dim {
            self.lo[k] = self.cell_of(q[k] - self.eps);
            self.hi[k] = self.cell_of(q[k] + self.eps);
        }
        self.cur.copy_from_slice(&self.lo);
        loop {
            if let Some(ids) = self.buckets.get(&Self::cell_key(&self.cur)) {
                scan(ids, &mut best);
            }
            // Odometer increment over the cell box.
            let mut k = 0;
            loop {
                if k == dim {
                    return best;
                }
                if self.cur[k] < self.hi[k] {
                    self.cur[k] += 1;
                    break;
                }
                self.cur[k] = self.lo[k];
                k += 1;
            }
        }
    }
}

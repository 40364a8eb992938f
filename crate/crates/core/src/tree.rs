//! Forward construction of the pruned tree of discretely reachable states.
//!
//! Level `n + 1` is obtained by applying one Euler step with every control to
//! every node of level `n`. An image outside the constraint set is dropped
//! (constraint pruning); an image within `ε` of a node already present on the
//! next level is linked to the first such node (merge pruning); anything else
//! becomes a new node. Each level therefore stores its states plus an
//! `M`-wide successor table into the next level.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::problem::{euler_into, ConstraintSet, ControlGrid, ProblemSpec, TimeGrid};
use crate::spatial_hash::{distance, MergeIndex};

pub(crate) const INADMISSIBLE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeNorm {
    #[default]
    Euclidean,
    Max,
}

impl MergeNorm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        distance(self, a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeBuildParams {
    pub eps_merge: f64,
    pub merge_norm: MergeNorm,
}

impl TreeBuildParams {
    pub fn new(eps_merge: f64) -> Self {
        TreeBuildParams { eps_merge, merge_norm: MergeNorm::Euclidean }
    }
}

/// Everything the tree was built from.
#[derive(Debug, Clone)]
pub struct TreeMeta {
    pub problem: ProblemSpec,
    pub constraints: ConstraintSet,
    pub controls: ControlGrid,
    pub time_grid: TimeGrid,
    pub params: TreeBuildParams,
    pub x0: Vec<f64>,
    pub build_wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct Tree {
    dim: usize,
    levels: Vec<Vec<f64>>,
    succ: Vec<Vec<u32>>,
    meta: TreeMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeStats {
    pub nodes_per_level: Vec<usize>,
    pub total_nodes: usize,
    pub edges_total: usize,
    pub pruned_by_merge: usize,
    pub pruned_by_constraint: usize,
    pub build_wall_time: f64,
}

impl Tree {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of levels, `N̄ + 1`.
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn n_controls(&self) -> usize {
        self.meta.controls.len()
    }

    pub fn level_len(&self, n: usize) -> usize {
        self.levels[n].len() / self.dim
    }

    #[inline]
    pub fn state(&self, n: usize, i: usize) -> &[f64] {
        &self.levels[n][i * self.dim..(i + 1) * self.dim]
    }

    /// States of level `n`, row-major.
    pub fn level_states(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    pub fn meta(&self) -> &TreeMeta {
        &self.meta
    }

    pub fn total_nodes(&self) -> usize {
        (0..self.n_levels()).map(|n| self.level_len(n)).sum()
    }

    #[inline]
    pub(crate) fn successor_unchecked(&self, n: usize, i: usize, j: usize) -> Option<usize> {
        let s = self.succ[n][i * self.n_controls() + j];
        (s != INADMISSIBLE).then_some(s as usize)
    }
}

/// Builds the pruned tree rooted at `x0`.
pub fn build_tree(
    p: &ProblemSpec,
    c: &ConstraintSet,
    grid: &ControlGrid,
    tg: &TimeGrid,
    params: TreeBuildParams,
    x0: &[f64],
) -> Result<(Tree, TreeStats)> {
    let start = Instant::now();
    p.check_state(x0)?;
    if c.dim() != p.dim_state() {
        return Err(Error::DimensionMismatch { expected: p.dim_state(), got: c.dim() });
    }
    if grid.dim() != p.dim_control() {
        return Err(Error::DimensionMismatch { expected: p.dim_control(), got: grid.dim() });
    }
    if !(params.eps_merge >= 0.0) || !params.eps_merge.is_finite() {
        return Err(Error::InvalidParameter(format!("eps_merge must be finite and >= 0, got {}", params.eps_merge)));
    }
    tg.check_discount(p.discount())?;
    if !c.is_admissible(x0)? {
        return Err(Error::InadmissibleRoot(x0.to_vec()));
    }

    let dim = p.dim_state();
    let m = grid.len();
    let h = tg.h();
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(tg.n_steps() + 1);
    let mut succ: Vec<Vec<u32>> = Vec::with_capacity(tg.n_steps());
    levels.push(x0.to_vec());
    let mut img = vec![0.0; dim];

    for n in 0..tg.n_steps() {
        let t = tg.time(n);
        let current = &levels[n];
        let mut next: Vec<f64> = Vec::new();
        let mut edges = vec![INADMISSIBLE; current.len() / dim * m];
        let mut index = MergeIndex::new(dim, params.eps_merge, params.merge_norm);
        for (i, x) in current.chunks_exact(dim).enumerate() {
            for (j, u) in grid.iter().enumerate() {
                euler_into(p, x, u, t, h, &mut img)?;
                if !c.contains(&img) {
                    continue;
                }
                let k = match index.find(&img, &next) {
                    Some(k) => k,
                    None => {
                        let k = u32::try_from(next.len() / dim)
                            .ok()
                            .filter(|&k| k != INADMISSIBLE)
                            .ok_or_else(|| Error::InvalidParameter(format!("level {} exceeds u32 node capacity", n + 1)))?;
                        next.extend_from_slice(&img);
                        index.insert(k, &img);
                        k
                    }
                };
                edges[i * m + j] = k;
            }
        }
        if next.is_empty() {
            return Err(Error::EmptyLevel(n + 1));
        }
        levels.push(next);
        succ.push(edges);
    }

    let tree = Tree {
        dim,
        levels,
        succ,
        meta: TreeMeta {
            problem: p.clone(),
            constraints: c.clone(),
            controls: grid.clone(),
            time_grid: *tg,
            params,
            x0: x0.to_vec(),
            build_wall_time: start.elapsed().as_secs_f64(),
        },
    };
    let stats = tree_stats(&tree);
    Ok((tree, stats))
}

/// Successor of node `i` on level `n` under control `j`; `None` when the
/// Euler image left the constraint set.
pub fn query_successor(tr: &Tree, n: usize, i: usize, j: usize) -> Result<Option<usize>> {
    if n + 1 >= tr.n_levels() {
        return Err(Error::OutOfRange(format!("level {n} has no successors (last level {})", tr.n_levels() - 1)));
    }
    if i >= tr.level_len(n) {
        return Err(Error::OutOfRange(format!("node {i} on level {n} of size {}", tr.level_len(n))));
    }
    if j >= tr.n_controls() {
        return Err(Error::OutOfRange(format!("control {j} of {}", tr.n_controls())));
    }
    Ok(tr.successor_unchecked(n, i, j))
}

/// Recomputes the counters from the stored structure.
pub fn tree_stats(tr: &Tree) -> TreeStats {
    let nodes_per_level: Vec<usize> = (0..tr.n_levels()).map(|n| tr.level_len(n)).collect();
    let total_nodes = nodes_per_level.iter().sum();
    let pruned_by_constraint = tr.succ.iter().flatten().filter(|&&s| s == INADMISSIBLE).count();
    let raw: usize = tr.succ.iter().map(Vec::len).sum();
    let edges_total = raw - pruned_by_constraint;
    let created = total_nodes - 1;
    TreeStats {
        nodes_per_level,
        total_nodes,
        edges_total,
        pruned_by_merge: edges_total - created,
        pruned_by_constraint,
        build_wall_time: tr.meta.build_wall_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Obstacle;
    use crate::problem::Sense;

    fn eikonal() -> ProblemSpec {
        ProblemSpec::builder(2, 2).dynamics(|_, u, _, out| out.copy_from_slice(u)).horizon(0.0, 2.0).build().unwrap()
    }

    #[test]
    fn stationary_dynamics_single_node_per_level() {
        let p = ProblemSpec::builder(2, 1).dynamics(|_, _, _, out| out.fill(0.0)).build().unwrap();
        let grid = ControlGrid::scalar(&[-1.0, 0.0, 1.0]).unwrap();
        let tg = TimeGrid::from_steps(0.0, 1.0, 60).unwrap();
        for eps in [0.0, 1e-3] {
            let (tr, stats) =
                build_tree(&p, &ConstraintSet::unbounded(2), &grid, &tg, TreeBuildParams::new(eps), &[0.3, 0.1])
                    .unwrap();
            assert!(stats.nodes_per_level.iter().all(|&k| k == 1));
            assert_eq!(stats.total_nodes, 61);
            for n in 0..60 {
                for j in 0..3 {
                    assert_eq!(query_successor(&tr, n, 0, j).unwrap(), Some(0));
                }
            }
        }
    }

    #[test]
    fn eikonal_two_steps_lattice() {
        let lattice = |h: f64, eps: f64| {
            let tg = TimeGrid::from_step(0.0, 2.0 * h, h).unwrap();
            build_tree(&eikonal(), &ConstraintSet::unbounded(2), &ControlGrid::square9(), &tg, TreeBuildParams::new(eps), &[1.0, 1.0])
                .unwrap()
                .1
                .nodes_per_level
        };
        // Dyadic step: the sums x0 + h(a, b) are exact, so ε = 0 already merges.
        assert_eq!(lattice(0.0078125, 0.0), vec![1, 9, 25]);
        assert_eq!(lattice(0.005, 0.005 * 0.005), vec![1, 9, 25]);
        // With h = 0.005 and no tolerance, rounding splits e.g. (1 + h) - h from 1.
        assert!(lattice(0.005, 0.0)[2] > 25);
    }

    #[test]
    fn counters_identity() {
        let tg = TimeGrid::from_step(0.0, 0.05, 0.005).unwrap();
        let c = ConstraintSet::new(vec![0.97, 0.97], vec![1.0, 1.0]).unwrap();
        let (tr, stats) =
            build_tree(&eikonal(), &c, &ControlGrid::square9(), &tg, TreeBuildParams::new(2.5e-5), &[1.0, 1.0]).unwrap();
        let raw: usize = (0..tr.n_levels() - 1).map(|n| tr.level_len(n) * 9).sum();
        assert_eq!(stats.pruned_by_merge, raw - (stats.total_nodes - 1) - stats.pruned_by_constraint);
        assert!(stats.pruned_by_constraint > 0);
        assert_eq!(tree_stats(&tr), stats);
    }

    #[test]
    fn errors() {
        let tg = TimeGrid::from_step(0.0, 0.05, 0.005).unwrap();
        let c = ConstraintSet::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let grid = ControlGrid::square9();
        assert!(matches!(
            build_tree(&eikonal(), &c, &grid, &tg, TreeBuildParams::new(0.0), &[2.0, 2.0]),
            Err(Error::InadmissibleRoot(_))
        ));

        // Every control pushes right; the wall at x = 1.0 is reached on the first step.
        let push = ProblemSpec::builder(1, 1).dynamics(|_, u, _, out| out[0] = 1.0 + u[0]).build().unwrap();
        let wall = ConstraintSet::new(vec![0.0], vec![1.0]).unwrap();
        let tg = TimeGrid::from_steps(0.0, 1.0, 10).unwrap();
        let r = build_tree(&push, &wall, &ControlGrid::scalar(&[0.0, 1.0]).unwrap(), &tg, TreeBuildParams::new(0.0), &[0.95]);
        assert!(matches!(r, Err(Error::EmptyLevel(1))));

        let (tr, _) = build_tree(&eikonal(), &c, &grid, &TimeGrid::from_steps(0.0, 0.01, 2).unwrap(), TreeBuildParams::new(0.0), &[0.5, 0.5]).unwrap();
        assert!(query_successor(&tr, 2, 0, 0).is_err());
        assert!(query_successor(&tr, 0, 1, 0).is_err());
        assert!(query_successor(&tr, 0, 0, 9).is_err());
    }

    #[test]
    fn obstacle_pruning_keeps_nodes_outside() {
        let c = ConstraintSet::unbounded(2).with_obstacle(Obstacle::new(Sense::Leq, |x| {
            (x[0] - 0.9).powi(2) + (x[1] - 0.9).powi(2) - 0.0004
        }));
        let tg = TimeGrid::from_steps(0.0, 0.1, 20).unwrap();
        let (tr, stats) =
            build_tree(&eikonal(), &c, &ControlGrid::square9(), &tg, TreeBuildParams::new(2.5e-5), &[0.95, 0.95]).unwrap();
        assert!(stats.pruned_by_constraint > 0);
        for n in 0..tr.n_levels() {
            for i in 0..tr.level_len(n) {
                assert!(c.contains(tr.state(n, i)));
            }
        }
    }
}

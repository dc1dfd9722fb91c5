//! Multilevel edge-cut partitioning, federated scenario construction and
//! heterogeneity diagnostics.

mod metrics;
mod multilevel;
mod scenario;

pub use metrics::{
    count_missing_links, degree_heterogeneity, hellinger, js_divergence, label_heterogeneity, median,
};
pub use multilevel::{
    coarsen, partition_multilevel, partition_multilevel_traced, Coarsening, RefinementHistory,
    WeightedGraph,
};
pub use scenario::{
    build_disjoint, build_overlapping, build_scenario, describe_scenario, ClientSummary, ScenarioKind,
    ScenarioSpec, ScenarioStats,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::graph::Graph;
use crate::rng;

pub const DEFAULT_BALANCE_SLACK: f64 = 0.05;

/// Largest allowed part size: `⌊(1+ε)·⌈N/P⌉⌋`.
pub fn balance_cap(num_nodes: usize, num_parts: usize, eps: f64) -> usize {
    let even = num_nodes.div_ceil(num_parts);
    ((1.0 + eps) * even as f64).floor() as usize
}

/// Assignment of every node to one of `num_parts` parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    num_parts: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, num_parts: usize) -> Result<Self> {
        if let Some(&bad) = assignment.iter().find(|&&q| q >= num_parts) {
            return Err(arg_err!("part id {bad} >= {num_parts}"));
        }
        Ok(Self {
            assignment,
            num_parts,
        })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn num_parts(&self) -> usize {
        self.num_parts
    }

    pub fn part_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_parts];
        for &q in &self.assignment {
            sizes[q] += 1;
        }
        sizes
    }

    /// Node ids of each part, ascending.
    pub fn parts(&self) -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); self.num_parts];
        for (v, &q) in self.assignment.iter().enumerate() {
            parts[q].push(v);
        }
        parts
    }

    /// Number of edges of `g` whose endpoints lie in different parts.
    pub fn edge_cut(&self, g: &Graph) -> usize {
        g.edges()
            .filter(|&(u, v)| self.assignment[u] != self.assignment[v])
            .count()
    }

    pub fn is_balanced(&self, eps: f64) -> bool {
        let cap = balance_cap(self.assignment.len(), self.num_parts, eps);
        self.part_sizes().iter().all(|&s| s > 0 && s <= cap)
    }
}

/// Uniformly random partition with part sizes differing by at most one.
pub fn random_partition<R: Rng + ?Sized>(rng: &mut R, num_nodes: usize, num_parts: usize) -> Result<Partition> {
    if num_parts == 0 || num_parts > num_nodes {
        return Err(arg_err!("cannot split {num_nodes} nodes into {num_parts} parts"));
    }
    let mut order: Vec<usize> = (0..num_nodes).collect();
    rng::shuffle(rng, &mut order);
    let mut assignment = vec![0; num_nodes];
    for (i, &v) in order.iter().enumerate() {
        assignment[v] = i % num_parts;
    }
    Partition::new(assignment, num_parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_values() {
        assert_eq!(balance_cap(100, 5, 0.05), 21);
        assert_eq!(balance_cap(2485, 10, 0.05), 261);
        assert_eq!(balance_cap(7, 7, 0.05), 1);
        assert_eq!(balance_cap(10, 3, 0.0), 4);
    }

    #[test]
    fn random_partition_is_even() {
        let mut rng = rng::stream(0, rng::Purpose::Partition, &[]);
        let p = random_partition(&mut rng, 23, 5).unwrap();
        let mut sizes = p.part_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![4, 4, 5, 5, 5]);
    }
}

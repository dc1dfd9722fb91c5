//! Graph container, client datasets, split generation and graph statistics.

mod io;
mod planetoid;
mod splits;
mod stats;

pub use io::{load_client, load_dataset, write_client, write_dataset};
pub use planetoid::{parse_planetoid, read_planetoid, PlanetoidGraph};
pub use splits::{make_splits, SplitMask, SplitRatios};
pub use stats::{clustering_coefficient, degree_histogram, label_histogram};

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, data_err, Result};
use crate::numerics::{DenseMatrix, SparseMatrix};

/// Undirected, unweighted graph with node features and labels.
///
/// Adjacency is stored in compressed-row form with sorted, duplicate-free,
/// loop-free neighbor lists; every edge appears in both endpoint lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    features: DenseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Graph {
    /// Build from an arbitrary edge list. Edges are symmetrized; self-loops
    /// and duplicates are dropped.
    pub fn new(
        num_nodes: usize,
        edges: &[(usize, usize)],
        features: DenseMatrix,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(data_err!(
                "{} feature rows for {num_nodes} nodes",
                features.rows()
            ));
        }
        if labels.len() != num_nodes {
            return Err(data_err!("{} labels for {num_nodes} nodes", labels.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(data_err!("label {bad} >= declared class count {num_classes}"));
        }
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(data_err!("edge ({u},{v}) references a node >= {num_nodes}"));
            }
            if u != v {
                lists[u].push(v);
                lists[v].push(u);
            }
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for mut list in lists {
            list.sort_unstable();
            list.dedup();
            neighbors.extend(list);
            offsets.push(neighbors.len());
        }
        Ok(Self {
            offsets,
            neighbors,
            features,
            labels,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| v > u)
                .map(move |&v| (u, v))
        })
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// 0/1 adjacency as a sparse matrix (no self-loops).
    pub fn adjacency_matrix(&self) -> SparseMatrix {
        let n = self.num_nodes();
        SparseMatrix::try_new(
            n,
            n,
            self.offsets.clone(),
            self.neighbors.clone(),
            vec![1.0; self.neighbors.len()],
        )
        .expect("graph adjacency is a valid CSR structure")
    }

    /// Node ids of the largest connected component, ascending. Ties between
    /// equally large components go to the one containing the lowest id.
    pub fn largest_component(&self) -> Vec<usize> {
        let n = self.num_nodes();
        let mut comp = vec![usize::MAX; n];
        let mut best: Vec<usize> = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut members = vec![start];
            comp[start] = start;
            let mut head = 0;
            while head < members.len() {
                let u = members[head];
                head += 1;
                for &v in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = start;
                        members.push(v);
                    }
                }
            }
            if members.len() > best.len() {
                best = members;
            }
        }
        best.sort_unstable();
        best
    }

    /// Row-normalize features so each nonzero row sums to one.
    pub fn row_normalize_features(&mut self) {
        for r in 0..self.features.rows() {
            let row = self.features.row_mut(r);
            let sum: f64 = row.iter().sum();
            if sum != 0.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
    }

    /// Induced subgraph on `nodes` (any order, no duplicates). Local id `i`
    /// corresponds to global id `nodes[i]`.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<ClientDataset> {
        if nodes.is_empty() {
            return Err(arg_err!("induced_subgraph: empty node set"));
        }
        let n = self.num_nodes();
        let mut local = vec![usize::MAX; n];
        for (i, &g) in nodes.iter().enumerate() {
            if g >= n {
                return Err(arg_err!("node id {g} out of range (graph has {n} nodes)"));
            }
            if local[g] != usize::MAX {
                return Err(arg_err!("node id {g} listed twice"));
            }
            local[g] = i;
        }
        let mut edges = Vec::new();
        for (i, &g) in nodes.iter().enumerate() {
            for &h in self.neighbors(g) {
                let j = local[h];
                if j != usize::MAX && i < j {
                    edges.push((i, j));
                }
            }
        }
        let features = self.features.select_rows(nodes);
        let labels = nodes.iter().map(|&g| self.labels[g]).collect();
        let graph = Graph::new(nodes.len(), &edges, features, labels, self.num_classes)?;
        Ok(ClientDataset::new(graph, nodes.to_vec(), SplitMask::default()))
    }
}

/// Free-function form of [`Graph::induced_subgraph`].
pub fn induced_subgraph(g: &Graph, nodes: &[usize]) -> Result<ClientDataset> {
    g.induced_subgraph(nodes)
}

/// One client's data: induced subgraph, local→global id map and local splits.
///
/// The symmetrically normalized adjacency and a sparse copy of the features
/// are derived once at construction and shared by every training step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientDataset {
    graph: Graph,
    global_ids: Vec<usize>,
    splits: SplitMask,
    #[serde(skip)]
    derived: Option<Derived>,
}

#[derive(Debug, Clone)]
struct Derived {
    normalized: SparseMatrix,
    features: SparseMatrix,
}

impl PartialEq for ClientDataset {
    fn eq(&self, other: &Self) -> bool {
        self.graph == other.graph
            && self.global_ids == other.global_ids
            && self.splits == other.splits
    }
}

impl ClientDataset {
    pub fn new(graph: Graph, global_ids: Vec<usize>, splits: SplitMask) -> Self {
        let normalized = crate::gnn::normalize_adjacency(&graph.adjacency_matrix())
            .expect("graph adjacency is square");
        let features = SparseMatrix::from_dense(graph.features());
        Self {
            graph,
            global_ids,
            splits,
            derived: Some(Derived {
                normalized,
                features,
            }),
        }
    }

    pub fn with_splits(mut self, splits: SplitMask) -> Self {
        self.splits = splits;
        self
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn global_ids(&self) -> &[usize] {
        &self.global_ids
    }

    pub fn splits(&self) -> &SplitMask {
        &self.splits
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn labels(&self) -> &[usize] {
        self.graph.labels()
    }

    /// `D̃^{-1/2}(A+I)D̃^{-1/2}` of the client graph.
    pub fn normalized_adjacency(&self) -> &SparseMatrix {
        &self.derived().normalized
    }

    pub fn sparse_features(&self) -> &SparseMatrix {
        &self.derived().features
    }

    fn derived(&self) -> &Derived {
        self.derived
            .as_ref()
            .expect("ClientDataset built through ClientDataset::new")
    }
}

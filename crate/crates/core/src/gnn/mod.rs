//! Two-layer GCN classifier with a hand-written backward pass.

mod checkpoint;

pub use checkpoint::{decode_tensors, encode_tensors, read_tensors, write_tensors};

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, data_err, shape_err, Result};
use crate::graph::ClientDataset;
use crate::numerics::{accuracy, softmax_xent, spmm, spmm_transpose, DenseMatrix, SparseMatrix};

pub const DEFAULT_HIDDEN: usize = 128;
pub const NUM_LAYERS: usize = 2;

/// `D̃^{-1/2}(A+I)D̃^{-1/2}`, with `D̃` the row sums of `A+I`.
pub fn normalize_adjacency(a: &SparseMatrix) -> Result<SparseMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(shape_err!("normalize_adjacency: {}x{} is not square", n, a.cols()));
    }
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(a.nnz() + n);
    for r in 0..n {
        triplets.extend(a.row(r).map(|(c, v)| (r, c, v)));
        triplets.push((r, r, 1.0));
    }
    let with_loops = SparseMatrix::from_triplets(n, n, &triplets)?;
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|r| 1.0 / with_loops.row_values(r).iter().sum::<f64>().sqrt())
        .collect();
    let scaled: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|r| {
            let inv_sqrt = &inv_sqrt;
            with_loops
                .row(r)
                .map(move |(c, v)| (r, c, v * inv_sqrt[r] * inv_sqrt[c]))
        })
        .collect();
    SparseMatrix::from_triplets(n, n, &scaled)
}

/// Classifier weights: `w1` is d×h, `w2` is h×C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    pub w1: DenseMatrix,
    pub w2: DenseMatrix,
}

impl GcnParams {
    pub fn new(w1: DenseMatrix, w2: DenseMatrix) -> Result<Self> {
        if w1.cols() != w2.rows() {
            return Err(shape_err!("W1 {:?} and W2 {:?} disagree on hidden size", w1.shape(), w2.shape()));
        }
        if !w1.is_finite() || !w2.is_finite() {
            return Err(arg_err!("non-finite weights"));
        }
        Ok(Self { w1, w2 })
    }

    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Self {
            w1: DenseMatrix::zeros(inputs, hidden),
            w2: DenseMatrix::zeros(hidden, outputs),
        }
    }

    /// Glorot-uniform initialization of both layers.
    pub fn glorot<R: Rng + ?Sized>(rng: &mut R, inputs: usize, hidden: usize, outputs: usize) -> Self {
        let w1 = DenseMatrix::glorot(rng, inputs, hidden);
        let w2 = DenseMatrix::glorot(rng, hidden, outputs);
        Self { w1, w2 }
    }

    pub fn inputs(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn outputs(&self) -> usize {
        self.w2.cols()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_tensors(path, &[&self.w1, &self.w2])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut t = read_tensors(path)?;
        if t.len() != 2 {
            return Err(data_err!("expected 2 tensors in checkpoint, found {}", t.len()));
        }
        let w2 = t.pop().unwrap();
        let w1 = t.pop().unwrap();
        Self::new(w1, w2).map_err(|e| data_err!("{e}"))
    }
}

/// Gradients with the same layout as [`GcnParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GcnGrads {
    pub w1: DenseMatrix,
    pub w2: DenseMatrix,
}

impl GcnGrads {
    pub fn zeros_like(p: &GcnParams) -> Self {
        Self {
            w1: DenseMatrix::zeros(p.w1.rows(), p.w1.cols()),
            w2: DenseMatrix::zeros(p.w2.rows(), p.w2.cols()),
        }
    }

    pub fn add_scaled(&mut self, other: &GcnGrads, factor: f64) -> Result<()> {
        self.w1.add_scaled(&other.w1, factor)?;
        self.w2.add_scaled(&other.w2, factor)
    }

    pub fn scale(&mut self, factor: f64) {
        self.w1.scale(factor);
        self.w2.scale(factor);
    }
}

/// Per-layer propagation matrices over nested node sets.
///
/// `nodes[0]` are the input nodes whose features enter the first layer and
/// `nodes[L]` are the output nodes whose logits are produced. Layer `ℓ` maps
/// rows of `nodes[ℓ]` to rows of `nodes[ℓ+1]`, so its matrix has shape
/// `|nodes[ℓ+1]| × |nodes[ℓ]|`. Node ids are local to the client graph.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencySequence {
    layers: Vec<SparseMatrix>,
    nodes: Vec<Vec<usize>>,
}

impl AdjacencySequence {
    pub fn new(layers: Vec<SparseMatrix>, nodes: Vec<Vec<usize>>) -> Result<Self> {
        if nodes.len() != layers.len() + 1 {
            return Err(shape_err!(
                "{} layers need {} node lists, got {}",
                layers.len(),
                layers.len() + 1,
                nodes.len()
            ));
        }
        for (l, m) in layers.iter().enumerate() {
            if m.shape() != (nodes[l + 1].len(), nodes[l].len()) {
                return Err(shape_err!(
                    "layer {l} is {:?}, node lists give ({}, {})",
                    m.shape(),
                    nodes[l + 1].len(),
                    nodes[l].len()
                ));
            }
        }
        Ok(Self { layers, nodes })
    }

    /// Every layer uses the full matrix `adj` over all nodes.
    pub fn full(adj: &SparseMatrix, num_layers: usize) -> Self {
        let all: Vec<usize> = (0..adj.rows()).collect();
        Self {
            layers: vec![adj.clone(); num_layers],
            nodes: vec![all; num_layers + 1],
        }
    }

    /// Layers cut from `adj` along the nested sets `sets[0] ⊆ … ⊆ sets[L]`,
    /// with `sets[0]` the output nodes: layer `ℓ` is
    /// `adj[sets[L-ℓ-1], sets[L-ℓ]]`.
    pub fn from_nested_sets(adj: &SparseMatrix, sets: &[Vec<usize>]) -> Result<Self> {
        if sets.len() < 2 {
            return Err(arg_err!("need at least two node sets"));
        }
        let nodes: Vec<Vec<usize>> = sets.iter().rev().cloned().collect();
        let layers = (0..nodes.len() - 1)
            .map(|l| adj.submatrix(&nodes[l + 1], &nodes[l]))
            .collect();
        Self::new(layers, nodes)
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[SparseMatrix] {
        &self.layers
    }

    pub fn nodes(&self) -> &[Vec<usize>] {
        &self.nodes
    }

    pub fn input_nodes(&self) -> &[usize] {
        &self.nodes[0]
    }

    pub fn output_nodes(&self) -> &[usize] {
        &self.nodes[self.nodes.len() - 1]
    }
}

/// Activations kept from the forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: SparseMatrix,
    pre_activation: DenseMatrix,
    aggregated_hidden: DenseMatrix,
    pub logits: DenseMatrix,
}

impl ForwardCache {
    pub fn hidden(&self) -> DenseMatrix {
        self.pre_activation.map(|v| v.max(0.0))
    }
}

fn check_two_layers(adj: &AdjacencySequence) -> Result<()> {
    if adj.num_layers() != NUM_LAYERS {
        return Err(shape_err!("classifier has {NUM_LAYERS} layers, adjacency has {}", adj.num_layers()));
    }
    Ok(())
}

/// `logits = A₁ · ReLU(A₀ · X · W1) · W2`, where `X` holds the rows of
/// `features` listed in `adj.input_nodes()`. Logit row `i` belongs to
/// `adj.output_nodes()[i]`.
pub fn forward(params: &GcnParams, features: &SparseMatrix, adj: &AdjacencySequence) -> Result<ForwardCache> {
    check_two_layers(adj)?;
    if features.cols() != params.inputs() {
        return Err(shape_err!("{} feature columns, W1 expects {}", features.cols(), params.inputs()));
    }
    if let Some(&bad) = adj.input_nodes().iter().find(|&&v| v >= features.rows()) {
        return Err(shape_err!("input node {bad} has no feature row"));
    }
    let inputs = features.select_rows(adj.input_nodes());
    let xw = spmm(&inputs, &params.w1)?;
    let pre_activation = spmm(&adj.layers[0], &xw)?;
    let hidden = pre_activation.map(|v| v.max(0.0));
    let aggregated_hidden = spmm(&adj.layers[1], &hidden)?;
    let logits = aggregated_hidden.matmul(&params.w2)?;
    Ok(ForwardCache {
        inputs,
        pre_activation,
        aggregated_hidden,
        logits,
    })
}

/// Backpropagate `grad_logits` (same shape as the cached logits) to both
/// weight matrices. The adjacency is a constant.
pub fn backward(
    params: &GcnParams,
    adj: &AdjacencySequence,
    cache: &ForwardCache,
    grad_logits: &DenseMatrix,
) -> Result<GcnGrads> {
    if grad_logits.shape() != cache.logits.shape() {
        return Err(shape_err!("grad {:?} vs logits {:?}", grad_logits.shape(), cache.logits.shape()));
    }
    let w2 = cache.aggregated_hidden.transpose_matmul(grad_logits)?;
    let through_w2 = grad_logits.matmul_transpose(&params.w2)?;
    let mut grad_hidden = spmm_transpose(&adj.layers[1], &through_w2)?;
    for (g, &p) in grad_hidden
        .as_mut_slice()
        .iter_mut()
        .zip(cache.pre_activation.as_slice())
    {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
    let grad_xw = spmm_transpose(&adj.layers[0], &grad_hidden)?;
    let w1 = spmm_transpose(&cache.inputs, &grad_xw)?;
    Ok(GcnGrads { w1, w2 })
}

/// Map client-local node ids in `mask` to rows of the output layer.
fn output_rows(adj: &AdjacencySequence, num_nodes: usize, mask: &[usize]) -> Result<Vec<usize>> {
    let mut row_of = vec![usize::MAX; num_nodes];
    for (i, &v) in adj.output_nodes().iter().enumerate() {
        if v < num_nodes {
            row_of[v] = i;
        }
    }
    mask.iter()
        .map(|&v| match row_of.get(v) {
            Some(&r) if r != usize::MAX => Ok(r),
            _ => Err(arg_err!("mask node {v} is not an output node")),
        })
        .collect()
}

/// Mean cross-entropy over `mask` (client-local node ids, which must all be
/// output nodes of `adj`) and its gradients.
pub fn loss_and_grad(
    params: &GcnParams,
    features: &SparseMatrix,
    adj: &AdjacencySequence,
    labels: &[usize],
    mask: &[usize],
) -> Result<(f64, GcnGrads)> {
    if mask.is_empty() {
        return Err(arg_err!("loss_and_grad: empty mask"));
    }
    let cache = forward(params, features, adj)?;
    let rows = output_rows(adj, labels.len(), mask)?;
    let out_labels: Vec<usize> = adj.output_nodes().iter().map(|&v| labels[v]).collect();
    let (loss, grad_logits) = softmax_xent(&cache.logits, &out_labels, &rows)?;
    let grads = backward(params, adj, &cache, &grad_logits)?;
    Ok((loss, grads))
}

/// Logits for every node of the client, full normalized adjacency at both
/// layers.
pub fn full_logits(params: &GcnParams, dataset: &ClientDataset) -> Result<DenseMatrix> {
    let adj = AdjacencySequence::full(dataset.normalized_adjacency(), NUM_LAYERS);
    Ok(forward(params, dataset.sparse_features(), &adj)?.logits)
}

/// Accuracy over `mask` with the full (unsampled) adjacency.
pub fn evaluate(params: &GcnParams, dataset: &ClientDataset, mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(arg_err!("evaluate: empty mask"));
    }
    accuracy(&full_logits(params, dataset)?, dataset.labels(), mask)
}

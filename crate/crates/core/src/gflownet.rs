//! Learned neighbor sampler: a GCN policy scoring candidate nodes, Gumbel
//! top-k rollouts over layers, and the trajectory-balance objective.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, data_err, Result};
use crate::gnn::{self, AdjacencySequence, GcnGrads, GcnParams, NUM_LAYERS};
use crate::graph::ClientDataset;
use crate::numerics::{gumbel_top_k, sigmoid, DenseMatrix, SparseMatrix};

/// Inclusion probabilities are clamped to `[PROB_FLOOR, 1 − PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-6;
pub const DEFAULT_ALPHA: f64 = 1e5;
pub const DEFAULT_BUDGET: usize = 64;

/// Sampler policy: a two-layer GCN with one output logit per node
/// (`U1` is d×h, `U2` is h×1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfnParams {
    pub policy: GcnParams,
}

impl GfnParams {
    pub fn glorot<R: Rng + ?Sized>(rng: &mut R, inputs: usize, hidden: usize) -> Self {
        Self {
            policy: GcnParams::glorot(rng, inputs, hidden, 1),
        }
    }

    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Self {
            policy: GcnParams::zeros(inputs, hidden, 1),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.policy.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let policy = GcnParams::load(path)?;
        if policy.outputs() != 1 {
            return Err(data_err!("policy checkpoint has {} outputs, expected 1", policy.outputs()));
        }
        Ok(Self { policy })
    }
}

/// How many candidates each layer may add.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Budget {
    /// `k` nodes per layer drawn from the pooled candidate set of the batch.
    PerLayer(usize),
    /// `k · |roots|` nodes per layer, pooled.
    PerRoot(usize),
    /// Every candidate; the rollout saturates to the full neighborhood.
    Unlimited,
}

impl Budget {
    fn limit(self, roots: usize) -> usize {
        match self {
            Budget::PerLayer(k) => k,
            Budget::PerRoot(k) => k.saturating_mul(roots),
            Budget::Unlimited => usize::MAX,
        }
    }
}

/// What the policy sees when scoring candidates for layer `ℓ`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conditioning {
    /// The whole client graph; logits are computed once per rollout.
    #[default]
    FullGraph,
    /// The client graph with features outside `S^{ℓ−1}` zeroed.
    MaskedToSampled,
}

/// How `A_ℓ` is formed from the sampled set `S^ℓ`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjacencyMode {
    /// Normalized adjacency of the subgraph induced by `S^ℓ`.
    #[default]
    Induced,
    /// The client's normalized adjacency restricted to `S^ℓ`, keeping the
    /// client-graph degrees. With an unlimited budget the classifier then
    /// computes exactly what it computes on the full neighborhood.
    Restricted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub alpha: f64,
    pub log_z: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            log_z: 0.0,
        }
    }
}

impl RewardSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(arg_err!("alpha must be positive and finite, got {}", self.alpha));
        }
        if !self.log_z.is_finite() {
            return Err(arg_err!("log Z must be finite"));
        }
        Ok(())
    }
}

/// One sampling step.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    /// `N(S^{ℓ−1}) \ S^{ℓ−1}`, ascending.
    pub candidates: Vec<usize>,
    /// Clamped inclusion probability of each candidate.
    pub probs: Vec<f64>,
    /// Positions into `candidates` that were selected, ascending.
    pub selected: Vec<usize>,
    pub log_pf: f64,
}

impl LayerRecord {
    pub fn selected_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.selected.iter().map(|&i| self.candidates[i])
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `sets[ℓ]` is `S^ℓ`: `S^{ℓ−1}` followed by the newly selected nodes
    /// in ascending order.
    sets: Vec<Vec<usize>>,
    layers: Vec<LayerRecord>,
    adjacency: AdjacencySequence,
    mode: AdjacencyMode,
    pub sum_log_pf: f64,
    pub log_reward: Option<f64>,
}

impl Trajectory {
    pub fn roots(&self) -> &[usize] {
        &self.sets[0]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn layers(&self) -> &[LayerRecord] {
        &self.layers
    }

    /// Classifier propagation matrices (input nodes `S^L`, outputs `S^0`).
    pub fn adjacency(&self) -> &AdjacencySequence {
        &self.adjacency
    }

    /// `A_ℓ` over the nodes of `S^ℓ`, in the order of `sets()[ℓ]`.
    pub fn layer_adjacency(&self, dataset: &ClientDataset, layer: usize) -> Result<SparseMatrix> {
        layer_matrix(dataset, &self.sets[layer], self.mode)
    }

    pub fn num_sampled(&self) -> usize {
        self.sets.last().map_or(0, Vec::len)
    }
}

/// `N(S) \ S`, ascending.
pub fn candidates(dataset: &ClientDataset, state: &[usize]) -> Vec<usize> {
    let n = dataset.num_nodes();
    let mut in_state = vec![false; n];
    for &v in state {
        in_state[v] = true;
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for &v in state {
        for &u in dataset.graph().neighbors(v) {
            if !in_state[u] && !seen[u] {
                seen[u] = true;
                out.push(u);
            }
        }
    }
    out.sort_unstable();
    out
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Policy logits for every client node (one column), with the forward cache
/// and propagation sequence for backpropagation.
struct PolicyPass {
    adj: AdjacencySequence,
    cache: gnn::ForwardCache,
}

impl PolicyPass {
    fn run(gfn: &GfnParams, dataset: &ClientDataset, visible: Option<&[usize]>) -> Result<Self> {
        let adj = AdjacencySequence::full(dataset.normalized_adjacency(), NUM_LAYERS);
        let features = match visible {
            None => dataset.sparse_features().clone(),
            Some(state) => {
                let mut keep = vec![false; dataset.num_nodes()];
                for &v in state {
                    keep[v] = true;
                }
                dataset.sparse_features().mask_rows(&keep)
            }
        };
        let cache = gnn::forward(&gfn.policy, &features, &adj)?;
        Ok(Self { adj, cache })
    }

    fn logit(&self, v: usize) -> f64 {
        self.cache.logits[(v, 0)]
    }

    fn backward(&self, gfn: &GfnParams, grad_logits: &DenseMatrix) -> Result<GcnGrads> {
        gnn::backward(&gfn.policy, &self.adj, &self.cache, grad_logits)
    }
}

fn visible_state(conditioning: Conditioning, state: &[usize]) -> Option<&[usize]> {
    match conditioning {
        Conditioning::FullGraph => None,
        Conditioning::MaskedToSampled => Some(state),
    }
}

/// Candidates `N(S) \ S` and their clamped inclusion probabilities.
pub fn inclusion_probs(
    gfn: &GfnParams,
    dataset: &ClientDataset,
    state: &[usize],
    conditioning: Conditioning,
) -> Result<(Vec<usize>, Vec<f64>)> {
    if state.is_empty() {
        return Err(arg_err!("inclusion_probs: empty state"));
    }
    let cands = candidates(dataset, state);
    if cands.is_empty() {
        return Ok((cands, Vec::new()));
    }
    let pass = PolicyPass::run(gfn, dataset, visible_state(conditioning, state))?;
    let probs = cands.iter().map(|&v| clamp_prob(sigmoid(pass.logit(v)))).collect();
    Ok((cands, probs))
}

/// `Σ_{i∈selected} ln p_i + Σ_{j∉selected} ln(1 − p_j)`; `selected` holds
/// positions into `probs`.
pub fn forward_log_prob(probs: &[f64], selected: &[usize]) -> f64 {
    let mut chosen = vec![false; probs.len()];
    for &i in selected {
        chosen[i] = true;
    }
    probs
        .iter()
        .zip(&chosen)
        .map(|(&p, &c)| if c { p.ln() } else { (1.0 - p).ln() })
        .sum()
}

/// Sampler settings shared by rollouts and gradient evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub budget: Budget,
    pub num_layers: usize,
    pub conditioning: Conditioning,
    pub adjacency: AdjacencyMode,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            budget: Budget::PerLayer(DEFAULT_BUDGET),
            num_layers: NUM_LAYERS,
            conditioning: Conditioning::FullGraph,
            adjacency: AdjacencyMode::Induced,
        }
    }
}

fn layer_matrix(dataset: &ClientDataset, set: &[usize], mode: AdjacencyMode) -> Result<SparseMatrix> {
    match mode {
        AdjacencyMode::Induced => gnn::normalize_adjacency(&dataset.graph().adjacency_matrix().submatrix(set, set)),
        AdjacencyMode::Restricted => Ok(dataset.normalized_adjacency().submatrix(set, set)),
    }
}

/// Classifier layer `ℓ` maps `S^{L−ℓ}` to `S^{L−ℓ−1}` through the rows of
/// `A_{L−ℓ}` that belong to `S^{L−ℓ−1}`.
fn classifier_adjacency(dataset: &ClientDataset, sets: &[Vec<usize>], mode: AdjacencyMode) -> Result<AdjacencySequence> {
    if mode == AdjacencyMode::Restricted {
        return AdjacencySequence::from_nested_sets(dataset.normalized_adjacency(), sets);
    }
    let depth = sets.len() - 1;
    let mut layers = Vec::with_capacity(depth);
    for l in 0..depth {
        let (wide, narrow) = (&sets[depth - l], &sets[depth - l - 1]);
        let a = layer_matrix(dataset, wide, mode)?;
        // S^{ℓ−1} is a prefix of S^ℓ
        let rows: Vec<usize> = (0..narrow.len()).collect();
        layers.push(a.select_rows(&rows));
    }
    AdjacencySequence::new(layers, sets.iter().rev().cloned().collect())
}

/// Sample `L` layers starting from `roots`. At each layer the candidates
/// `N(S^{ℓ−1}) \ S^{ℓ−1}` are ranked by `ln p_i + G_i` and the best
/// `min(k, |candidates|)` join the state.
pub fn rollout<R: Rng + ?Sized>(
    gfn: &GfnParams,
    dataset: &ClientDataset,
    roots: &[usize],
    config: &RolloutConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    if roots.is_empty() {
        return Err(arg_err!("rollout: empty root set"));
    }
    if matches!(config.budget, Budget::PerLayer(0) | Budget::PerRoot(0)) {
        return Err(arg_err!("sampling budget must be at least 1"));
    }
    let mut sorted = roots.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) || sorted.last().is_some_and(|&v| v >= dataset.num_nodes()) {
        return Err(arg_err!("rollout: roots must be distinct client nodes"));
    }
    let mut state = roots.to_vec();
    let limit = config.budget.limit(roots.len());
    let mut full_pass: Option<PolicyPass> = None;
    let mut sets = vec![state.clone()];
    let mut layers = Vec::with_capacity(config.num_layers);
    let mut sum_log_pf = 0.0;
    for _ in 0..config.num_layers {
        let cands = candidates(dataset, &state);
        let mut record = LayerRecord {
            candidates: Vec::new(),
            probs: Vec::new(),
            selected: Vec::new(),
            log_pf: 0.0,
        };
        if !cands.is_empty() {
            let masked;
            let pass = match config.conditioning {
                Conditioning::FullGraph => {
                    if full_pass.is_none() {
                        full_pass = Some(PolicyPass::run(gfn, dataset, None)?);
                    }
                    full_pass.as_ref().unwrap()
                }
                Conditioning::MaskedToSampled => {
                    masked = PolicyPass::run(gfn, dataset, Some(&state))?;
                    &masked
                }
            };
            let probs: Vec<f64> = cands.iter().map(|&v| clamp_prob(sigmoid(pass.logit(v)))).collect();
            let log_p: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
            let selected = gumbel_top_k(rng, &log_p, limit.min(cands.len()));
            record.log_pf = forward_log_prob(&probs, &selected);
            state.extend(selected.iter().map(|&i| cands[i]));
            record.candidates = cands;
            record.probs = probs;
            record.selected = selected;
        }
        sum_log_pf += record.log_pf;
        layers.push(record);
        sets.push(state.clone());
    }
    let adjacency = classifier_adjacency(dataset, &sets, config.adjacency)?;
    Ok(Trajectory {
        sets,
        layers,
        adjacency,
        mode: config.adjacency,
        sum_log_pf,
        log_reward: None,
    })
}

/// `log R = −α · loss`. The reward itself is never exponentiated.
pub fn log_reward(classification_loss: f64, spec: &RewardSpec) -> f64 {
    -spec.alpha * classification_loss
}

/// `log Z + Σ log P_F − log R`, from the trajectory's recorded values.
pub fn tb_residual(traj: &Trajectory, spec: &RewardSpec) -> Result<f64> {
    let log_r = traj
        .log_reward
        .ok_or_else(|| arg_err!("trajectory has no reward yet"))?;
    Ok(spec.log_z + traj.sum_log_pf - log_r)
}

/// Squared trajectory-balance residual.
pub fn tb_loss(traj: &Trajectory, spec: &RewardSpec) -> Result<f64> {
    Ok(tb_residual(traj, spec)?.powi(2))
}

/// `Σ log P_F` of the recorded selections under the policy `gfn`, which may
/// differ from the policy that produced the trajectory.
pub fn trajectory_log_pf(
    gfn: &GfnParams,
    dataset: &ClientDataset,
    traj: &Trajectory,
    conditioning: Conditioning,
) -> Result<f64> {
    let mut total = 0.0;
    let full = match conditioning {
        Conditioning::FullGraph => Some(PolicyPass::run(gfn, dataset, None)?),
        Conditioning::MaskedToSampled => None,
    };
    for (l, rec) in traj.layers.iter().enumerate() {
        if rec.candidates.is_empty() {
            continue;
        }
        let masked;
        let pass = match &full {
            Some(p) => p,
            None => {
                masked = PolicyPass::run(gfn, dataset, Some(&traj.sets[l]))?;
                &masked
            }
        };
        let probs: Vec<f64> = rec
            .candidates
            .iter()
            .map(|&v| clamp_prob(sigmoid(pass.logit(v))))
            .collect();
        total += forward_log_prob(&probs, &rec.selected);
    }
    Ok(total)
}

/// Accumulate `∂ log P_F / ∂ logit` for one layer into `grad` (n×1).
fn accumulate_layer(pass: &PolicyPass, rec: &LayerRecord, scale: f64, grad: &mut DenseMatrix) {
    let mut chosen = vec![false; rec.candidates.len()];
    for &i in &rec.selected {
        chosen[i] = true;
    }
    for (&v, &c) in rec.candidates.iter().zip(&chosen) {
        let raw = sigmoid(pass.logit(v));
        if raw <= PROB_FLOOR || raw >= 1.0 - PROB_FLOOR {
            continue;
        }
        let d = if c { 1.0 - raw } else { -raw };
        grad[(v, 0)] += scale * d;
    }
}

/// Gradient of the trajectory-balance loss with respect to the policy
/// weights, evaluated at `gfn` on the recorded selections. Returns the
/// gradient and the residual under `gfn`. The Gumbel noise and the
/// classifier loss are constants.
pub fn tb_grad(
    traj: &Trajectory,
    spec: &RewardSpec,
    gfn: &GfnParams,
    dataset: &ClientDataset,
    conditioning: Conditioning,
) -> Result<(GcnGrads, f64)> {
    let log_r = traj
        .log_reward
        .ok_or_else(|| arg_err!("trajectory has no reward yet"))?;
    let log_pf = trajectory_log_pf(gfn, dataset, traj, conditioning)?;
    let residual = spec.log_z + log_pf - log_r;
    let scale = 2.0 * residual;
    let n = dataset.num_nodes();
    let mut total = GcnGrads::zeros_like(&gfn.policy);
    if residual == 0.0 {
        return Ok((total, residual));
    }
    match conditioning {
        Conditioning::FullGraph => {
            let pass = PolicyPass::run(gfn, dataset, None)?;
            let mut g = DenseMatrix::zeros(n, 1);
            for rec in &traj.layers {
                accumulate_layer(&pass, rec, scale, &mut g);
            }
            total = pass.backward(gfn, &g)?;
        }
        Conditioning::MaskedToSampled => {
            for (l, rec) in traj.layers.iter().enumerate() {
                if rec.candidates.is_empty() {
                    continue;
                }
                let pass = PolicyPass::run(gfn, dataset, Some(&traj.sets[l]))?;
                let mut g = DenseMatrix::zeros(n, 1);
                accumulate_layer(&pass, rec, scale, &mut g);
                total.add_scaled(&pass.backward(gfn, &g)?, 1.0)?;
            }
        }
    }
    Ok((total, residual))
}

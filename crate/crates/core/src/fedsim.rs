//! Federated simulation: local training with optional learned sampling,
//! server rounds, aggregation and per-round evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Result};
use crate::gflownet::{self, GfnParams, RewardSpec, RolloutConfig};
use crate::gnn::{self, AdjacencySequence, GcnParams, DEFAULT_HIDDEN, NUM_LAYERS};
use crate::graph::ClientDataset;
use crate::numerics::{accuracy, adam_step, softmax_xent, AdamState, DenseMatrix};
use crate::rng::{self, Purpose};

pub const DEFAULT_LR: f64 = 0.01;
pub const DEFAULT_GFN_LR: f64 = 0.001;
pub const DEFAULT_ROUNDS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Local,
    FedAvg,
    FedPer,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Local => "local",
            Strategy::FedAvg => "fedavg",
            Strategy::FedPer => "fedper",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(Strategy::Local),
            "fedavg" => Ok(Strategy::FedAvg),
            "fedper" => Ok(Strategy::FedPer),
            other => Err(arg_err!("unknown strategy `{other}` (expected local, fedavg or fedper)")),
        }
    }
}

/// Learned-sampler settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub rollout: RolloutConfig,
    pub reward: RewardSpec,
    pub lr: f64,
    pub hidden: usize,
    /// Also push the trajectory-balance term through the reward into the
    /// classifier, scaling its gradient by `1 + 2α·residual`.
    pub reward_coupling: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            rollout: RolloutConfig::default(),
            reward: RewardSpec::default(),
            lr: DEFAULT_GFN_LR,
            hidden: DEFAULT_HIDDEN,
            reward_coupling: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub rounds: usize,
    pub local_epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    /// `None` trains on every training node of the client at once.
    pub batch_size: Option<usize>,
    /// `None` trains on the full neighborhood.
    pub sampler: Option<SamplerConfig>,
    /// Evaluate through sampled neighborhoods instead of the full graph.
    pub eval_sampled: bool,
    pub seed: u64,
    /// Worker threads for client-level parallelism; `None` uses the rayon
    /// default.
    pub threads: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::FedAvg,
            rounds: DEFAULT_ROUNDS,
            local_epochs: 1,
            lr: DEFAULT_LR,
            hidden: DEFAULT_HIDDEN,
            batch_size: None,
            sampler: None,
            eval_sampled: false,
            seed: 0,
            threads: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(arg_err!("learning rate must be finite and non-negative, got {}", self.lr));
        }
        if self.hidden == 0 {
            return Err(arg_err!("hidden size must be positive"));
        }
        if self.batch_size == Some(0) {
            return Err(arg_err!("batch size must be positive"));
        }
        if self.threads == Some(0) {
            return Err(arg_err!("thread count must be positive"));
        }
        if self.eval_sampled && self.sampler.is_none() {
            return Err(arg_err!("sampled evaluation needs the sampler enabled"));
        }
        if let Some(s) = &self.sampler {
            s.reward.validate()?;
            if !(s.lr >= 0.0 && s.lr.is_finite()) {
                return Err(arg_err!("sampler learning rate must be finite and non-negative, got {}", s.lr));
            }
            if s.hidden == 0 {
                return Err(arg_err!("sampler hidden size must be positive"));
            }
            if s.rollout.num_layers != NUM_LAYERS {
                return Err(arg_err!("sampler must produce {NUM_LAYERS} layers"));
            }
            if matches!(
                s.rollout.budget,
                gflownet::Budget::PerLayer(0) | gflownet::Budget::PerRoot(0)
            ) {
                return Err(arg_err!("sampling budget must be at least 1"));
            }
        }
        Ok(())
    }
}

/// What the server sends to clients.
#[derive(Debug, Clone, PartialEq)]
pub enum Broadcast {
    Nothing,
    Full(GcnParams),
    Base(DenseMatrix),
}

/// Server-side state. It can only ever hold classifier weights.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub strategy: Strategy,
    pub shared: Broadcast,
    pub round: usize,
}

#[derive(Debug, Clone)]
pub struct ClientState {
    id: usize,
    dataset: ClientDataset,
    pub gnn: GcnParams,
    gfn: Option<GfnParams>,
    adam_gnn: [AdamState; 2],
    adam_gfn: Option<[AdamState; 2]>,
    seed: u64,
    round: usize,
    last_tb_residual: Option<f64>,
}

fn adam_pair(p: &GcnParams) -> [AdamState; 2] {
    [AdamState::for_param(&p.w1), AdamState::for_param(&p.w2)]
}

fn initial_classifier(seed: u64, client: usize, dataset: &ClientDataset, hidden: usize) -> GcnParams {
    let mut r = rng::stream(seed, Purpose::GnnInit, &[client as u64]);
    GcnParams::glorot(&mut r, dataset.graph().num_features(), hidden, dataset.graph().num_classes())
}

impl ClientState {
    pub fn new(id: usize, dataset: ClientDataset, config: &TrainConfig) -> Self {
        let gnn = initial_classifier(config.seed, id, &dataset, config.hidden);
        let gfn = config.sampler.map(|s| {
            let mut r = rng::stream(config.seed, Purpose::GfnInit, &[id as u64]);
            GfnParams::glorot(&mut r, dataset.graph().num_features(), s.hidden)
        });
        Self {
            id,
            adam_gnn: adam_pair(&gnn),
            adam_gfn: gfn.as_ref().map(|g| adam_pair(&g.policy)),
            dataset,
            gnn,
            gfn,
            seed: config.seed,
            round: 0,
            last_tb_residual: None,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn dataset(&self) -> &ClientDataset {
        &self.dataset
    }

    pub fn gfn(&self) -> Option<&GfnParams> {
        self.gfn.as_ref()
    }

    pub fn last_tb_residual(&self) -> Option<f64> {
        self.last_tb_residual
    }

    /// Overwrite the shared part of the local classifier.
    pub fn receive(&mut self, incoming: &Broadcast) -> Result<()> {
        match incoming {
            Broadcast::Nothing => {}
            Broadcast::Full(p) => {
                if p.w1.shape() != self.gnn.w1.shape() || p.w2.shape() != self.gnn.w2.shape() {
                    return Err(shape_err!("client {}: incoming model does not match the local one", self.id));
                }
                self.gnn = p.clone();
            }
            Broadcast::Base(w1) => {
                if w1.shape() != self.gnn.w1.shape() {
                    return Err(shape_err!("client {}: incoming base layer {:?}, local {:?}", self.id, w1.shape(), self.gnn.w1.shape()));
                }
                self.gnn.w1 = w1.clone();
            }
        }
        Ok(())
    }
}

/// Result of one round of local training.
#[derive(Debug, Clone)]
pub struct ClientUpdate {
    pub params: GcnParams,
    pub num_train: usize,
    /// Mean classifier loss over the round's batches.
    pub train_loss: f64,
    pub tb_residual: Option<f64>,
}

fn batches(state: &ClientState, config: &TrainConfig, epoch: usize) -> Vec<Vec<usize>> {
    let train = &state.dataset.splits().train;
    match config.batch_size {
        Some(b) if b < train.len() => {
            let mut order = train.clone();
            let mut r = rng::stream(
                state.seed,
                Purpose::BatchOrder,
                &[state.id as u64, state.round as u64, epoch as u64],
            );
            rng::shuffle(&mut r, &mut order);
            order.chunks(b).map(<[usize]>::to_vec).collect()
        }
        _ => vec![train.clone()],
    }
}

/// One round of local training on `state`: apply `incoming`, then for every
/// epoch and batch sample a computation graph (when the sampler is on), take
/// an Adam step on the classifier and one on the sampler policy.
pub fn run_client(state: &mut ClientState, incoming: &Broadcast, config: &TrainConfig) -> Result<ClientUpdate> {
    state.receive(incoming)?;
    if state.dataset.splits().train.is_empty() {
        return Err(arg_err!("client {} has no training nodes", state.id));
    }
    state.round += 1;
    let full = AdjacencySequence::full(state.dataset.normalized_adjacency(), NUM_LAYERS);
    let mut loss_sum = 0.0;
    let mut steps = 0usize;
    let mut residual = None;
    for epoch in 0..config.local_epochs {
        for (b, batch) in batches(state, config, epoch).into_iter().enumerate() {
            let ds = &state.dataset;
            let mut policy_step = None;
            let (loss, mut grads) = match (&config.sampler, &state.gfn) {
                (Some(s), Some(gfn)) => {
                    let mut r = rng::stream(
                        state.seed,
                        Purpose::Rollout,
                        &[state.id as u64, state.round as u64, epoch as u64, b as u64],
                    );
                    let mut traj = gflownet::rollout(gfn, ds, &batch, &s.rollout, &mut r)?;
                    let (loss, grads) =
                        gnn::loss_and_grad(&state.gnn, ds.sparse_features(), traj.adjacency(), ds.labels(), &batch)?;
                    traj.log_reward = Some(gflownet::log_reward(loss, &s.reward));
                    let (policy_grads, res) = gflownet::tb_grad(&traj, &s.reward, gfn, ds, s.rollout.conditioning)?;
                    policy_step = Some((policy_grads, res, s.lr));
                    residual = Some(res);
                    (loss, grads)
                }
                _ => gnn::loss_and_grad(&state.gnn, ds.sparse_features(), &full, ds.labels(), &batch)?,
            };
            if !loss.is_finite() {
                return Err(arg_err!("client {}: non-finite loss in round {}", state.id, state.round));
            }
            if let (Some((policy_grads, res, lr)), Some(gfn), Some(adam)) =
                (policy_step, state.gfn.as_mut(), state.adam_gfn.as_mut())
            {
                adam_step(&mut gfn.policy.w1, &policy_grads.w1, &mut adam[0], lr)?;
                adam_step(&mut gfn.policy.w2, &policy_grads.w2, &mut adam[1], lr)?;
                if let Some(s) = config.sampler.filter(|s| s.reward_coupling) {
                    grads.scale(1.0 + 2.0 * s.reward.alpha * res);
                }
            }
            adam_step(&mut state.gnn.w1, &grads.w1, &mut state.adam_gnn[0], config.lr)?;
            adam_step(&mut state.gnn.w2, &grads.w2, &mut state.adam_gnn[1], config.lr)?;
            loss_sum += loss;
            steps += 1;
        }
    }
    state.last_tb_residual = residual;
    Ok(ClientUpdate {
        params: state.gnn.clone(),
        num_train: state.dataset.splits().train.len(),
        train_loss: if steps == 0 { f64::NAN } else { loss_sum / steps as f64 },
        tb_residual: residual,
    })
}

fn weighted_mean(items: &[(&DenseMatrix, usize)]) -> Result<DenseMatrix> {
    let Some(&(first, _)) = items.first() else {
        return Err(arg_err!("aggregation needs at least one client"));
    };
    let total: usize = items.iter().map(|&(_, n)| n).sum();
    if total == 0 {
        return Err(arg_err!("aggregation over zero training samples"));
    }
    let mut out = DenseMatrix::zeros(first.rows(), first.cols());
    for &(m, n) in items {
        out.add_scaled(m, n as f64 / total as f64)?;
    }
    Ok(out)
}

/// Sample-weighted mean of full classifiers.
pub fn aggregate_fedavg(updates: &[(&GcnParams, usize)]) -> Result<GcnParams> {
    let w1: Vec<_> = updates.iter().map(|&(p, n)| (&p.w1, n)).collect();
    let w2: Vec<_> = updates.iter().map(|&(p, n)| (&p.w2, n)).collect();
    GcnParams::new(weighted_mean(&w1)?, weighted_mean(&w2)?)
}

/// Sample-weighted mean of base layers only.
pub fn aggregate_fedper(base_layers: &[(&DenseMatrix, usize)]) -> Result<DenseMatrix> {
    weighted_mean(base_layers)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientMetrics {
    pub client: usize,
    /// Absent when the client has no nodes in that split.
    pub train: Option<SplitMetrics>,
    pub val: Option<SplitMetrics>,
    pub test: Option<SplitMetrics>,
    pub tb_residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population standard deviation; `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub clients: Vec<ClientMetrics>,
    pub val_accuracy: Option<MeanStd>,
    pub test_accuracy: Option<MeanStd>,
    /// Mean and spread of the clients' latest trajectory-balance residuals.
    pub tb_residual: Option<MeanStd>,
}

impl RoundMetrics {
    pub fn from_clients(round: usize, clients: Vec<ClientMetrics>) -> Self {
        let collect = |f: fn(&ClientMetrics) -> Option<f64>| -> Vec<f64> { clients.iter().filter_map(f).collect() };
        let val = collect(|c| c.val.map(|m| m.accuracy));
        let test = collect(|c| c.test.map(|m| m.accuracy));
        let tb = collect(|c| c.tb_residual);
        Self {
            round,
            val_accuracy: MeanStd::of(&val),
            test_accuracy: MeanStd::of(&test),
            tb_residual: MeanStd::of(&tb),
            clients,
        }
    }
}

fn split_metrics(logits: &DenseMatrix, labels: &[usize], rows: &[usize]) -> Result<Option<SplitMetrics>> {
    if rows.is_empty() {
        return Ok(None);
    }
    let (loss, _) = softmax_xent(logits, labels, rows)?;
    Ok(Some(SplitMetrics {
        loss,
        accuracy: accuracy(logits, labels, rows)?,
    }))
}

fn sampled_split(state: &ClientState, config: &TrainConfig, split: usize, mask: &[usize]) -> Result<Option<SplitMetrics>> {
    if mask.is_empty() {
        return Ok(None);
    }
    let (Some(s), Some(gfn)) = (&config.sampler, &state.gfn) else {
        return Err(arg_err!("sampled evaluation needs the sampler enabled"));
    };
    let ds = &state.dataset;
    let mut r = rng::stream(
        state.seed,
        Purpose::Evaluation,
        &[state.id as u64, state.round as u64, split as u64],
    );
    let traj = gflownet::rollout(gfn, ds, mask, &s.rollout, &mut r)?;
    let logits = gnn::forward(&state.gnn, ds.sparse_features(), traj.adjacency())?.logits;
    let labels: Vec<usize> = traj.adjacency().output_nodes().iter().map(|&v| ds.labels()[v]).collect();
    let rows: Vec<usize> = (0..mask.len()).collect();
    split_metrics(&logits, &labels, &rows)
}

/// Loss and accuracy of one client's current classifier on each split.
pub fn evaluate_client(state: &ClientState, config: &TrainConfig) -> Result<ClientMetrics> {
    let splits = state.dataset.splits();
    let masks = [&splits.train, &splits.val, &splits.test];
    let mut out = [None; 3];
    if config.eval_sampled {
        for (i, mask) in masks.iter().enumerate() {
            out[i] = sampled_split(state, config, i, mask)?;
        }
    } else {
        let logits = gnn::full_logits(&state.gnn, &state.dataset)?;
        for (i, mask) in masks.iter().enumerate() {
            out[i] = split_metrics(&logits, state.dataset.labels(), mask)?;
        }
    }
    Ok(ClientMetrics {
        client: state.id,
        train: out[0],
        val: out[1],
        test: out[2],
        tb_residual: state.last_tb_residual,
    })
}

/// Evaluate every client and summarize across clients.
pub fn evaluate_all(clients: &[ClientState], config: &TrainConfig, round: usize) -> Result<RoundMetrics> {
    let per_client = clients
        .par_iter()
        .map(|c| evaluate_client(c, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(RoundMetrics::from_clients(round, per_client))
}

#[derive(Debug)]
pub struct SimulationOutcome {
    pub server: ServerState,
    pub clients: Vec<ClientState>,
    pub metrics: Vec<RoundMetrics>,
}

fn initial_broadcast(strategy: Strategy, datasets: &[ClientDataset], config: &TrainConfig) -> Broadcast {
    let model = || initial_classifier(config.seed, 0, &datasets[0], config.hidden);
    match strategy {
        Strategy::Local => Broadcast::Nothing,
        Strategy::FedAvg => Broadcast::Full(model()),
        Strategy::FedPer => Broadcast::Base(model().w1),
    }
}

/// Run `config.rounds` rounds over `datasets`, calling `sink` with each
/// round's metrics as soon as they are available. Round 0 is the evaluation
/// of the initial models.
pub fn run_server_with(
    datasets: Vec<ClientDataset>,
    config: &TrainConfig,
    mut sink: impl FnMut(&RoundMetrics) -> Result<()> + Send,
) -> Result<SimulationOutcome> {
    config.validate()?;
    if datasets.is_empty() {
        return Err(arg_err!("no clients"));
    }
    let (features, classes) = (datasets[0].graph().num_features(), datasets[0].graph().num_classes());
    if datasets
        .iter()
        .any(|d| d.graph().num_features() != features || d.graph().num_classes() != classes)
    {
        return Err(shape_err!("clients disagree on feature or class count"));
    }
    let body = move || -> Result<SimulationOutcome> {
        let mut server = ServerState {
            strategy: config.strategy,
            shared: initial_broadcast(config.strategy, &datasets, config),
            round: 0,
        };
        let mut clients: Vec<ClientState> = datasets
            .into_iter()
            .enumerate()
            .map(|(i, d)| ClientState::new(i, d, config))
            .collect();
        for c in &mut clients {
            c.receive(&server.shared)?;
        }
        let mut metrics = Vec::with_capacity(config.rounds + 1);
        let m = evaluate_all(&clients, config, 0)?;
        sink(&m)?;
        metrics.push(m);
        for round in 1..=config.rounds {
            let shared = &server.shared;
            let updates = clients
                .par_iter_mut()
                .map(|c| run_client(c, shared, config))
                .collect::<Result<Vec<_>>>()?;
            server.shared = match config.strategy {
                Strategy::Local => Broadcast::Nothing,
                Strategy::FedAvg => {
                    let items: Vec<_> = updates.iter().map(|u| (&u.params, u.num_train)).collect();
                    Broadcast::Full(aggregate_fedavg(&items)?)
                }
                Strategy::FedPer => {
                    let items: Vec<_> = updates.iter().map(|u| (&u.params.w1, u.num_train)).collect();
                    Broadcast::Base(aggregate_fedper(&items)?)
                }
            };
            server.round = round;
            for c in &mut clients {
                c.receive(&server.shared)?;
            }
            let m = evaluate_all(&clients, config, round)?;
            sink(&m)?;
            metrics.push(m);
        }
        Ok(SimulationOutcome {
            server,
            clients,
            metrics,
        })
    };
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| arg_err!("cannot start {n} worker threads: {e}"))?
            .install(body),
        None => body(),
    }
}

pub fn run_server(datasets: Vec<ClientDataset>, config: &TrainConfig) -> Result<SimulationOutcome> {
    run_server_with(datasets, config, |_| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gflownet::Budget;
    use crate::graph::{make_splits, Graph, SplitRatios};
    use rand::Rng;

    fn toy_clients(count: usize, n: usize, seed: u64) -> Vec<ClientDataset> {
        let mut r = rng::stream(seed, Purpose::Evaluation, &[]);
        (0..count)
            .map(|c| {
                let mut edges = Vec::new();
                for u in 0..n {
                    for v in u + 1..n {
                        if r.random::<f64>() < 0.2 {
                            edges.push((u, v));
                        }
                    }
                }
                let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..3)).collect();
                let feats = (0..n * 6)
                    .map(|i| if r.random::<f64>() < 0.3 { 1.0 + (labels[i / 6] == i % 3) as u8 as f64 } else { 0.0 })
                    .collect();
                let g = Graph::new(n, &edges, DenseMatrix::from_vec(n, 6, feats).unwrap(), labels, 3).unwrap();
                let ds = g.induced_subgraph(&(0..n).collect::<Vec<_>>()).unwrap();
                let splits = make_splits(n, SplitRatios::STANDARD, seed * 31 + c as u64).unwrap();
                ds.with_splits(splits)
            })
            .collect()
    }

    fn config(strategy: Strategy, rounds: usize) -> TrainConfig {
        TrainConfig {
            strategy,
            rounds,
            hidden: 8,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    fn with_sampler(mut c: TrainConfig, budget: Budget) -> TrainConfig {
        c.sampler = Some(SamplerConfig {
            rollout: RolloutConfig {
                budget,
                ..RolloutConfig::default()
            },
            hidden: 4,
            ..SamplerConfig::default()
        });
        c
    }

    #[test]
    fn fedavg_two_clients_example() {
        let a = GcnParams::new(DenseMatrix::filled(1, 1, 0.0), DenseMatrix::filled(1, 1, 0.0)).unwrap();
        let b = GcnParams::new(DenseMatrix::filled(1, 1, 4.0), DenseMatrix::filled(1, 1, 4.0)).unwrap();
        let g = aggregate_fedavg(&[(&a, 1), (&b, 3)]).unwrap();
        assert_eq!(g.w1[(0, 0)], 3.0);
        assert_eq!(g.w2[(0, 0)], 3.0);
        assert!(aggregate_fedavg(&[(&a, 0), (&b, 0)]).is_err());
        assert!(aggregate_fedavg(&[]).is_err());
    }

    #[test]
    fn aggregation_is_idempotent_and_matches_mean() {
        let mut r = rng::stream(1, Purpose::GnnInit, &[]);
        let ps: Vec<GcnParams> = (0..4).map(|_| GcnParams::glorot(&mut r, 5, 3, 2)).collect();
        let same = aggregate_fedavg(&[(&ps[0], 7), (&ps[0], 2)]).unwrap();
        assert!((same.w1.as_slice().iter().zip(ps[0].w1.as_slice())).all(|(a, b)| (a - b).abs() < 1e-15));
        let items: Vec<_> = ps.iter().map(|p| (&p.w1, 5)).collect();
        let mean = aggregate_fedper(&items).unwrap();
        for i in 0..mean.as_slice().len() {
            let oracle = ps.iter().map(|p| p.w1.as_slice()[i]).sum::<f64>() / 4.0;
            assert!((mean.as_slice()[i] - oracle).abs() < 1e-15);
        }
        assert_eq!(aggregate_fedper(&[(&ps[1].w1, 3)]).unwrap(), ps[1].w1);
    }

    #[test]
    fn zero_learning_rates_keep_weights() {
        let ds = toy_clients(1, 20, 1).remove(0);
        let mut cfg = with_sampler(config(Strategy::FedAvg, 1), Budget::PerLayer(3));
        cfg.lr = 0.0;
        cfg.sampler.as_mut().unwrap().lr = 0.0;
        let mut state = ClientState::new(0, ds, &cfg);
        let incoming = GcnParams::glorot(&mut rng::stream(9, Purpose::GnnInit, &[]), 6, 8, 3);
        let policy = state.gfn().unwrap().clone();
        let update = run_client(&mut state, &Broadcast::Full(incoming.clone()), &cfg).unwrap();
        assert_eq!(update.params, incoming);
        assert_eq!(state.gfn().unwrap(), &policy);
        assert!(update.tb_residual.unwrap().is_finite());
    }

    #[test]
    fn unlimited_budget_matches_full_step() {
        let ds = toy_clients(1, 25, 2).remove(0);
        let plain = config(Strategy::Local, 1);
        let mut sampled = with_sampler(plain.clone(), Budget::Unlimited);
        sampled.sampler.as_mut().unwrap().rollout.adjacency = gflownet::AdjacencyMode::Restricted;
        let mut a = ClientState::new(0, ds.clone(), &plain);
        let mut b = ClientState::new(0, ds, &sampled);
        let ua = run_client(&mut a, &Broadcast::Nothing, &plain).unwrap();
        let ub = run_client(&mut b, &Broadcast::Nothing, &sampled).unwrap();
        assert!((ua.train_loss - ub.train_loss).abs() < 1e-12);
        for (x, y) in ua.params.w1.as_slice().iter().zip(ub.params.w1.as_slice()) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!(ub.tb_residual.unwrap().is_finite());
    }

    #[test]
    fn zero_rounds_gives_initial_evaluation_only() {
        let out = run_server(toy_clients(3, 20, 3), &config(Strategy::Local, 0)).unwrap();
        assert_eq!(out.metrics.len(), 1);
        assert_eq!(out.metrics[0].round, 0);
        assert!(out.metrics[0].clients.iter().all(|c| c.tb_residual.is_none()));
    }

    #[test]
    fn fedavg_single_client_equals_local() {
        for sampler in [false, true] {
            let mut fed = config(Strategy::FedAvg, 4);
            if sampler {
                fed = with_sampler(fed, Budget::PerLayer(4));
            }
            let local = TrainConfig {
                strategy: Strategy::Local,
                ..fed.clone()
            };
            let a = run_server(toy_clients(1, 30, 4), &fed).unwrap();
            let b = run_server(toy_clients(1, 30, 4), &local).unwrap();
            assert_eq!(a.metrics, b.metrics);
            assert_eq!(a.clients[0].gnn, b.clients[0].gnn);
        }
    }

    #[test]
    fn local_clients_are_isolated() {
        let cfg = with_sampler(config(Strategy::Local, 3), Budget::PerLayer(3));
        let clients = toy_clients(3, 20, 5);
        let together = run_server(clients.clone(), &cfg).unwrap();
        let mut state = ClientState::new(1, clients[1].clone(), &cfg);
        for _ in 0..3 {
            run_client(&mut state, &Broadcast::Nothing, &cfg).unwrap();
        }
        assert_eq!(together.clients[1].gnn, state.gnn);
    }

    #[test]
    fn fedper_keeps_heads_personal() {
        let cfg = config(Strategy::FedPer, 3);
        let out = run_server(toy_clients(3, 20, 6), &cfg).unwrap();
        let c = &out.clients;
        assert_eq!(c[0].gnn.w1, c[1].gnn.w1);
        assert_eq!(c[1].gnn.w1, c[2].gnn.w1);
        assert_ne!(c[0].gnn.w2, c[1].gnn.w2);
        assert!(matches!(out.server.shared, Broadcast::Base(_)));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let base = with_sampler(config(Strategy::FedAvg, 3), Budget::PerLayer(3));
        let one = TrainConfig { threads: Some(1), ..base.clone() };
        let four = TrainConfig { threads: Some(4), ..base };
        let a = run_server(toy_clients(5, 20, 7), &one).unwrap();
        let b = run_server(toy_clients(5, 20, 7), &four).unwrap();
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn sink_sees_every_round() {
        let mut seen = Vec::new();
        run_server_with(toy_clients(2, 20, 8), &config(Strategy::FedAvg, 2), |m| {
            seen.push(m.round);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn sampled_evaluation_runs() {
        let mut cfg = with_sampler(config(Strategy::FedAvg, 1), Budget::PerLayer(2));
        cfg.eval_sampled = true;
        let out = run_server(toy_clients(2, 20, 9), &cfg).unwrap();
        let acc = out.metrics[1].test_accuracy.unwrap().mean;
        assert!((0.0..=1.0).contains(&acc));
    }

    #[test]
    fn mean_std_examples() {
        let m = MeanStd::of(&[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!((m.mean, m.std), (0.5, 0.5));
        assert_eq!(MeanStd::of(&[0.7]).unwrap().std, 0.0);
        assert_eq!(MeanStd::of(&[]), None);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = config(Strategy::FedAvg, 1);
        c.eval_sampled = true;
        assert!(c.validate().is_err());
        let c = with_sampler(config(Strategy::FedAvg, 1), Budget::PerLayer(0));
        assert!(c.validate().is_err());
        let mut c = with_sampler(config(Strategy::FedAvg, 1), Budget::PerLayer(1));
        c.sampler.as_mut().unwrap().reward.alpha = 0.0;
        assert!(c.validate().is_err());
        assert!("fedprox".parse::<Strategy>().is_err());
        assert_eq!("fedper".parse::<Strategy>().unwrap(), Strategy::FedPer);
    }
}

use serde::{Deserialize, Serialize};

use super::metrics::{count_missing_links, degree_heterogeneity, label_heterogeneity};
use super::{partition_multilevel, DEFAULT_BALANCE_SLACK};
use crate::error::{arg_err, Result};
use crate::graph::{clustering_coefficient, make_splits, ClientDataset, Graph, SplitRatios};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Disjoint,
    Overlapping,
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScenarioKind::Disjoint => "disjoint",
            ScenarioKind::Overlapping => "overlapping",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub num_parts: usize,
    /// Overlapping only.
    pub samples_per_part: usize,
    /// Overlapping only.
    pub sample_fraction: f64,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub balance_slack: f64,
}

impl ScenarioSpec {
    pub fn disjoint(num_parts: usize, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Disjoint,
            num_parts,
            samples_per_part: 1,
            sample_fraction: 1.0,
            seed,
            ratios: SplitRatios::STANDARD,
            balance_slack: DEFAULT_BALANCE_SLACK,
        }
    }

    pub fn overlapping(num_parts: usize, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Overlapping,
            samples_per_part: 5,
            sample_fraction: 0.5,
            ..Self::disjoint(num_parts, seed)
        }
    }

    pub fn num_clients(&self) -> usize {
        match self.kind {
            ScenarioKind::Disjoint => self.num_parts,
            ScenarioKind::Overlapping => self.num_parts * self.samples_per_part,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ratios.validate()?;
        if self.num_parts == 0 {
            return Err(arg_err!("need at least one part"));
        }
        if self.kind == ScenarioKind::Overlapping {
            if self.samples_per_part == 0 {
                return Err(arg_err!("samples_per_part must be positive"));
            }
            if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
                return Err(arg_err!("sample_fraction must lie in (0, 1], got {}", self.sample_fraction));
            }
        }
        Ok(())
    }
}

fn client_split_seed(seed: u64, client: usize) -> u64 {
    rng::derive_key(seed, &[Purpose::Splits as u64, client as u64])
}

fn make_client(g: &Graph, nodes: &[usize], ratios: SplitRatios, seed: u64, client: usize) -> Result<ClientDataset> {
    let ds = g.induced_subgraph(nodes)?;
    let splits = make_splits(ds.num_nodes(), ratios, client_split_seed(seed, client))?;
    Ok(ds.with_splits(splits))
}

/// One client per part of a multilevel partition.
pub fn build_disjoint(g: &Graph, num_parts: usize, seed: u64, ratios: SplitRatios) -> Result<Vec<ClientDataset>> {
    build_scenario(g, &ScenarioSpec {
        ratios,
        ..ScenarioSpec::disjoint(num_parts, seed)
    })
}

/// `samples_per_part` random node samples of `⌈fraction·|part|⌉` nodes from
/// each part of a multilevel partition. Client `part·samples_per_part + s`
/// is sample `s` of `part`.
pub fn build_overlapping(
    g: &Graph,
    num_parts: usize,
    samples_per_part: usize,
    fraction: f64,
    seed: u64,
    ratios: SplitRatios,
) -> Result<Vec<ClientDataset>> {
    build_scenario(g, &ScenarioSpec {
        kind: ScenarioKind::Overlapping,
        num_parts,
        samples_per_part,
        sample_fraction: fraction,
        seed,
        ratios,
        balance_slack: DEFAULT_BALANCE_SLACK,
    })
}

pub fn build_scenario(g: &Graph, spec: &ScenarioSpec) -> Result<Vec<ClientDataset>> {
    spec.validate()?;
    let parts = partition_multilevel(g, spec.num_parts, spec.seed, spec.balance_slack)?.parts();
    match spec.kind {
        ScenarioKind::Disjoint => parts
            .iter()
            .enumerate()
            .map(|(c, nodes)| make_client(g, nodes, spec.ratios, spec.seed, c))
            .collect(),
        ScenarioKind::Overlapping => {
            let mut clients = Vec::with_capacity(spec.num_clients());
            for (q, nodes) in parts.iter().enumerate() {
                if nodes.len() < 2 {
                    return Err(arg_err!("part {q} has {} node(s); sampling needs at least 2", nodes.len()));
                }
                let take = ((spec.sample_fraction * nodes.len() as f64).ceil() as usize).min(nodes.len());
                for s in 0..spec.samples_per_part {
                    let mut r = rng::stream(spec.seed, Purpose::OverlapSample, &[q as u64, s as u64]);
                    let mut chosen: Vec<usize> = rng::sample_without_replacement(&mut r, nodes.len(), take)
                        .into_iter()
                        .map(|i| nodes[i])
                        .collect();
                    chosen.sort_unstable();
                    let c = q * spec.samples_per_part + s;
                    clients.push(make_client(g, &chosen, spec.ratios, spec.seed, c)?);
                }
            }
            Ok(clients)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientSummary {
    pub nodes: usize,
    pub edges: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub clustering: f64,
}

/// Scenario report: missing links, heterogeneity (absent with fewer than two
/// clients) and mean client clustering coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStats {
    pub mode: ScenarioKind,
    pub num_parts: usize,
    pub num_clients: usize,
    pub seed: u64,
    pub missing_links: usize,
    pub label_heterogeneity: Option<f64>,
    pub degree_heterogeneity: Option<f64>,
    pub mean_clustering: f64,
    pub clients: Vec<ClientSummary>,
}

pub fn describe_scenario(g: &Graph, spec: &ScenarioSpec, clients: &[ClientDataset]) -> Result<ScenarioStats> {
    let summaries: Vec<ClientSummary> = clients
        .iter()
        .map(|c| ClientSummary {
            nodes: c.num_nodes(),
            edges: c.graph().num_edges(),
            train: c.splits().train.len(),
            val: c.splits().val.len(),
            test: c.splits().test.len(),
            clustering: clustering_coefficient(c.graph()),
        })
        .collect();
    let many = clients.len() >= 2;
    Ok(ScenarioStats {
        mode: spec.kind,
        num_parts: spec.num_parts,
        num_clients: clients.len(),
        seed: spec.seed,
        missing_links: count_missing_links(g, clients),
        label_heterogeneity: if many { Some(label_heterogeneity(clients)?) } else { None },
        degree_heterogeneity: if many { Some(degree_heterogeneity(clients)?) } else { None },
        mean_clustering: summaries.iter().map(|s| s.clustering).sum::<f64>() / summaries.len().max(1) as f64,
        clients: summaries,
    })
}

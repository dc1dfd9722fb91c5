//! The `ingest`, `partition` and `train` pipelines.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sgfl_core::fedsim::{self, MeanStd, RoundMetrics, SplitMetrics};
use sgfl_core::graph::{self, clustering_coefficient, ClientDataset, Graph};
use sgfl_core::partition::{self, ScenarioStats};

use crate::config::{self, IngestConfig, PartitionConfig, TrainSettings};
use crate::error::{CliError, Result};

pub const DATASET_INFO: &str = "dataset.json";
pub const SCENARIO_INFO: &str = "scenario.json";
pub const SUMMARY: &str = "summary.json";
pub const METRICS: &str = "metrics.csv";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub clustering: f64,
    /// Citation lines naming unknown papers, dropped during parsing.
    pub skipped_links: usize,
    pub class_names: Vec<String>,
}

pub fn cmd_ingest(cfg: &IngestConfig) -> Result<DatasetInfo> {
    cfg.validate()?;
    let mut parsed = graph::read_planetoid(&cfg.content, &cfg.cites, cfg.largest_component)?;
    if cfg.normalize_features {
        parsed.graph.row_normalize_features();
    }
    let g = &parsed.graph;
    let name = if cfg.name.is_empty() {
        dataset_name(&cfg.content)
    } else {
        cfg.name.clone()
    };
    let info = DatasetInfo {
        name,
        num_nodes: g.num_nodes(),
        num_edges: g.num_edges(),
        num_features: g.num_features(),
        num_classes: g.num_classes(),
        clustering: clustering_coefficient(g),
        skipped_links: parsed.skipped_links,
        class_names: parsed.class_names.clone(),
    };
    create_dir(&cfg.out)?;
    graph::write_dataset(&cfg.out, g)?;
    write_json(&cfg.out.join(DATASET_INFO), &info)?;
    config::save(cfg, &cfg.out)?;
    Ok(info)
}

fn dataset_name(content: &Path) -> String {
    let file = content.file_name().and_then(|f| f.to_str()).unwrap_or("dataset");
    file.split('.').next().unwrap_or(file).to_string()
}

/// Load a dataset directory written by `ingest`.
pub fn load_dataset(dir: &Path) -> Result<(Graph, DatasetInfo)> {
    let g = graph::load_dataset(dir)?;
    let info: DatasetInfo = read_json(&dir.join(DATASET_INFO))?;
    if info.num_nodes != g.num_nodes() {
        return Err(CliError::Data(format!("{}: {} disagrees with the stored graph", dir.display(), DATASET_INFO)));
    }
    Ok((g, info))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub dataset: String,
    pub dataset_nodes: usize,
    #[serde(flatten)]
    pub stats: ScenarioStats,
}

impl ScenarioInfo {
    /// Column label such as `cora disjoint-10`.
    pub fn label(&self) -> String {
        format!("{} {}-{}", self.dataset, self.stats.mode, self.stats.num_clients)
    }
}

pub fn client_dir(scenario: &Path, client: usize) -> PathBuf {
    scenario.join(format!("client-{client:03}"))
}

pub fn build_clients(g: &Graph, cfg: &PartitionConfig) -> Result<Vec<ClientDataset>> {
    Ok(partition::build_scenario(g, &cfg.spec()?)?)
}

pub fn cmd_partition(cfg: &PartitionConfig) -> Result<ScenarioInfo> {
    cfg.validate()?;
    let (g, dataset) = load_dataset(&cfg.dataset)?;
    let spec = cfg.spec()?;
    let clients = partition::build_scenario(&g, &spec)?;
    let info = ScenarioInfo {
        dataset: dataset.name,
        dataset_nodes: g.num_nodes(),
        stats: partition::describe_scenario(&g, &spec, &clients)?,
    };
    create_dir(&cfg.out)?;
    for (i, c) in clients.iter().enumerate() {
        graph::write_client(client_dir(&cfg.out, i), c)?;
    }
    write_json(&cfg.out.join(SCENARIO_INFO), &info)?;
    config::save(cfg, &cfg.out)?;
    Ok(info)
}

pub fn load_scenario(dir: &Path) -> Result<(ScenarioInfo, Vec<ClientDataset>)> {
    let info: ScenarioInfo = read_json(&dir.join(SCENARIO_INFO))?;
    let clients = (0..info.stats.num_clients)
        .map(|i| graph::load_client(client_dir(dir, i)).map_err(CliError::from))
        .collect::<Result<Vec<_>>>()?;
    Ok((info, clients))
}

fn push_row(out: &mut String, round: usize, client: usize, split: &str, m: &SplitMetrics, tb: Option<f64>) {
    use std::fmt::Write as _;
    let tb = tb.map(|v| v.to_string()).unwrap_or_default();
    let _ = writeln!(out, "{round},{client},{split},{},{},{tb}", m.loss, m.accuracy);
}

pub const METRICS_HEADER: &str = "round,client,split,loss,accuracy,tb_residual";

/// CSV rows for one round; the residual goes on the train row.
pub fn metrics_rows(m: &RoundMetrics) -> String {
    let mut out = String::new();
    for c in &m.clients {
        for (name, split) in [("train", &c.train), ("val", &c.val), ("test", &c.test)] {
            if let Some(s) = split {
                let tb = if name == "train" { c.tb_residual } else { None };
                push_row(&mut out, m.round, c.client, name, s, tb);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub final_round: usize,
    pub val_accuracy: MeanStd,
    pub test_accuracy: MeanStd,
    /// Mean trajectory-balance residual in the final round.
    pub tb_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub scenario: String,
    pub dataset_nodes: usize,
    pub rounds: usize,
    pub alpha: Option<f64>,
    pub gfn_lr: Option<f64>,
    pub k: Option<i64>,
    pub seeds: Vec<SeedResult>,
    /// Mean and population std over seeds of the client-averaged accuracy.
    pub val_accuracy: MeanStd,
    pub test_accuracy: MeanStd,
}

fn final_result(seed: u64, metrics: &[RoundMetrics]) -> Result<SeedResult> {
    let last = metrics
        .last()
        .ok_or_else(|| CliError::Runtime("simulation produced no metrics".into()))?;
    let missing = |what| CliError::Runtime(format!("no client has {what} nodes"));
    Ok(SeedResult {
        seed,
        final_round: last.round,
        val_accuracy: last.val_accuracy.ok_or_else(|| missing("validation"))?,
        test_accuracy: last.test_accuracy.ok_or_else(|| missing("test"))?,
        tb_residual: last.tb_residual.map(|t| t.mean),
    })
}

/// Train on already loaded clients, writing `seed-*/metrics.csv` and
/// `summary.json` under `cfg.out`.
pub fn train_clients(
    cfg: &TrainSettings,
    scenario: &ScenarioInfo,
    clients: &[ClientDataset],
    threads: Option<usize>,
) -> Result<Summary> {
    cfg.validate()?;
    create_dir(&cfg.out)?;
    config::save(cfg, &cfg.out)?;
    let mut results = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let core = cfg.core(seed, threads)?;
        let dir = cfg.out.join(format!("seed-{seed}"));
        create_dir(&dir)?;
        let path = dir.join(METRICS);
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut sink = BufWriter::new(file);
        writeln!(sink, "{METRICS_HEADER}").map_err(|e| CliError::io(&path, e))?;
        let outcome = fedsim::run_server_with(clients.to_vec(), &core, |m| {
            sink.write_all(metrics_rows(m).as_bytes())
                .map_err(|e| sgfl_core::Error::Data(format!("{}: {e}", path.display())))
        })?;
        sink.flush().map_err(|e| CliError::io(&path, e))?;
        results.push(final_result(seed, &outcome.metrics)?);
    }
    let over = |f: fn(&SeedResult) -> f64| MeanStd::of(&results.iter().map(f).collect::<Vec<_>>()).unwrap();
    let summary = Summary {
        method: cfg.method(),
        scenario: scenario.label(),
        dataset_nodes: scenario.dataset_nodes,
        rounds: cfg.rounds,
        alpha: cfg.fedgrains.then_some(cfg.sampler.alpha),
        gfn_lr: cfg.fedgrains.then_some(cfg.sampler.gfn_lr),
        k: cfg.fedgrains.then_some(cfg.sampler.k),
        val_accuracy: over(|r| r.val_accuracy.mean),
        test_accuracy: over(|r| r.test_accuracy.mean),
        seeds: results,
    };
    write_json(&cfg.out.join(SUMMARY), &summary)?;
    Ok(summary)
}

pub fn cmd_train(cfg: &TrainSettings, threads: Option<usize>) -> Result<Summary> {
    cfg.validate()?;
    let (info, clients) = load_scenario(&cfg.scenario)?;
    train_clients(cfg, &info, &clients, threads)
}

pub fn load_summary(dir: &Path) -> Result<Summary> {
    read_json(&dir.join(SUMMARY))
}

#[cfg(test)]
mod tests {
    use super::*;
    use sgfl_core::fedsim::ClientMetrics;

    #[test]
    fn rows_put_residual_on_train_only() {
        let s = SplitMetrics { loss: 0.5, accuracy: 0.25 };
        let m = RoundMetrics::from_clients(
            3,
            vec![ClientMetrics {
                client: 1,
                train: Some(s),
                val: None,
                test: Some(s),
                tb_residual: Some(2.0),
            }],
        );
        assert_eq!(metrics_rows(&m), "3,1,train,0.5,0.25,2\n3,1,test,0.5,0.25,\n");
    }

    #[test]
    fn dataset_name_strips_extensions() {
        assert_eq!(dataset_name(Path::new("/x/cora.content.gz")), "cora");
        assert_eq!(dataset_name(Path::new("citeseer.content")), "citeseer");
    }
}

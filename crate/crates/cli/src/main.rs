use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sgfl_cli::commands::{cmd_ingest, cmd_partition, cmd_train};
use sgfl_cli::config::{self, BudgetKind, IngestConfig, PartitionConfig, TrainSettings};
use sgfl_cli::report::cmd_report;
use sgfl_cli::{CliError, Result};
use sgfl_core::fedsim::Strategy;
use sgfl_core::gflownet::{AdjacencyMode, Conditioning};
use sgfl_core::partition::ScenarioKind;

#[derive(Parser)]
#[command(name = "sgfl", version, about = "Subgraph federated learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a Planetoid-format citation dataset.
    Ingest(IngestArgs),
    /// Split a dataset into federated clients.
    Partition(PartitionArgs),
    /// Run federated training over a scenario.
    Train(TrainArgs),
    /// Compare finished runs.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// TOML file with defaults for every option below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    content: Option<PathBuf>,
    #[arg(long)]
    cites: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    /// Keep every connected component.
    #[arg(long)]
    all_components: bool,
    /// Keep raw feature values.
    #[arg(long)]
    raw_features: bool,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ScenarioKind>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    samples_per_part: Option<usize>,
    #[arg(long)]
    sample_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_ratio: Option<f64>,
    #[arg(long)]
    val_ratio: Option<f64>,
    #[arg(long)]
    test_ratio: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    /// Learned neighbor sampling: on or off.
    #[arg(long, value_parser = parse_switch)]
    fedgrains: Option<bool>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    local_epochs: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    k: Option<i64>,
    #[arg(long, value_parser = parse_budget)]
    budget: Option<BudgetKind>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    gfn_lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_parser = parse_conditioning)]
    conditioning: Option<Conditioning>,
    #[arg(long, value_parser = parse_adjacency)]
    adjacency: Option<AdjacencyMode>,
    #[arg(long)]
    reward_coupling: bool,
    #[arg(long)]
    eval_sampled: bool,
    /// Training seeds, comma separated or repeated.
    #[arg(long = "seed", value_delimiter = ',')]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Training output directories.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse().map_err(|e: sgfl_core::Error| e.to_string())
}

fn parse_switch(s: &str) -> std::result::Result<bool, String> {
    match s {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(format!("expected on or off, got `{s}`")),
    }
}

fn parse_mode(s: &str) -> std::result::Result<ScenarioKind, String> {
    match s {
        "disjoint" => Ok(ScenarioKind::Disjoint),
        "overlapping" => Ok(ScenarioKind::Overlapping),
        _ => Err(format!("expected disjoint or overlapping, got `{s}`")),
    }
}

fn parse_budget(s: &str) -> std::result::Result<BudgetKind, String> {
    match s {
        "per-layer" => Ok(BudgetKind::PerLayer),
        "per-root" => Ok(BudgetKind::PerRoot),
        "unlimited" => Ok(BudgetKind::Unlimited),
        _ => Err(format!("expected per-layer, per-root or unlimited, got `{s}`")),
    }
}

fn parse_conditioning(s: &str) -> std::result::Result<Conditioning, String> {
    match s {
        "full-graph" => Ok(Conditioning::FullGraph),
        "masked-to-sampled" => Ok(Conditioning::MaskedToSampled),
        _ => Err(format!("expected full-graph or masked-to-sampled, got `{s}`")),
    }
}

fn parse_adjacency(s: &str) -> std::result::Result<AdjacencyMode, String> {
    match s {
        "induced" => Ok(AdjacencyMode::Induced),
        "restricted" => Ok(AdjacencyMode::Restricted),
        _ => Err(format!("expected induced or restricted, got `{s}`")),
    }
}

fn base<T: Default + serde::de::DeserializeOwned>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => config::load(p),
        None => Ok(T::default()),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let mut cfg: IngestConfig = base(&a.config)?;
    set(&mut cfg.content, a.content);
    set(&mut cfg.cites, a.cites);
    set(&mut cfg.out, a.out);
    set(&mut cfg.name, a.name);
    if a.all_components {
        cfg.largest_component = false;
    }
    if a.raw_features {
        cfg.normalize_features = false;
    }
    let info = cmd_ingest(&cfg)?;
    println!(
        "{}: {} nodes, {} edges, {} features, {} classes, clustering {:.5}",
        info.name, info.num_nodes, info.num_edges, info.num_features, info.num_classes, info.clustering
    );
    Ok(())
}

fn partition(a: PartitionArgs) -> Result<()> {
    let mut cfg: PartitionConfig = base(&a.config)?;
    set(&mut cfg.dataset, a.dataset);
    set(&mut cfg.out, a.out);
    set(&mut cfg.mode, a.mode);
    set(&mut cfg.clients, a.clients);
    set(&mut cfg.samples_per_part, a.samples_per_part);
    set(&mut cfg.sample_fraction, a.sample_fraction);
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.split.train, a.train_ratio);
    set(&mut cfg.split.val, a.val_ratio);
    set(&mut cfg.split.test, a.test_ratio);
    let info = cmd_partition(&cfg)?;
    let s = &info.stats;
    print!("{}: {} clients, {} missing links", info.label(), s.num_clients, s.missing_links);
    if let (Some(l), Some(d)) = (s.label_heterogeneity, s.degree_heterogeneity) {
        print!(", label heterogeneity {l:.4}, degree heterogeneity {d:.4}");
    }
    println!();
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg: TrainSettings = base(&a.config)?;
    set(&mut cfg.scenario, a.scenario);
    set(&mut cfg.out, a.out);
    set(&mut cfg.strategy, a.strategy);
    set(&mut cfg.fedgrains, a.fedgrains);
    set(&mut cfg.rounds, a.rounds);
    set(&mut cfg.local_epochs, a.local_epochs);
    set(&mut cfg.lr, a.lr);
    set(&mut cfg.hidden, a.hidden);
    if a.batch_size.is_some() {
        cfg.batch_size = a.batch_size;
    }
    if !a.seeds.is_empty() {
        cfg.seeds = a.seeds;
    }
    if a.eval_sampled {
        cfg.eval_sampled = true;
    }
    let s = &mut cfg.sampler;
    set(&mut s.k, a.k);
    set(&mut s.budget, a.budget);
    set(&mut s.alpha, a.alpha);
    set(&mut s.gfn_lr, a.gfn_lr);
    set(&mut s.conditioning, a.conditioning);
    set(&mut s.adjacency, a.adjacency);
    if a.reward_coupling {
        s.reward_coupling = true;
    }
    let threads = config::threads_from_env()?;
    let summary = cmd_train(&cfg, threads)?;
    for r in &summary.seeds {
        println!(
            "seed {}: round {} val {:.4} test {:.4}",
            r.seed, r.final_round, r.val_accuracy.mean, r.test_accuracy.mean
        );
    }
    println!(
        "{} on {}: test {:.2} ± {:.2}",
        summary.method,
        summary.scenario,
        100.0 * summary.test_accuracy.mean,
        100.0 * summary.test_accuracy.std
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let r = cmd_report(&a.runs)?;
    print!("{}", r.table);
    if let Some(grid) = &r.grid {
        println!();
        print!("{grid}");
    }
    if let Some(path) = a.csv {
        std::fs::write(&path, r.csv()).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", CliError::Config(first.to_string()).render());
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Partition(a) => partition(a),
        Command::Train(a) => train(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.render());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

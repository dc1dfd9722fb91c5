//! Comparison tables over finished training runs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use sgfl_core::fedsim::MeanStd;

use crate::commands::{load_summary, Summary};
use crate::error::{CliError, Result};

/// One table cell: every seed of every run sharing a method and scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub method: String,
    pub scenario: String,
    pub alpha: Option<f64>,
    pub gfn_lr: Option<f64>,
    pub k: Option<i64>,
    pub runs: usize,
    pub test: MeanStd,
    pub val: MeanStd,
    pub best: bool,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub cells: Vec<Cell>,
    pub table: String,
    /// Validation accuracy over the α × η_GFN grid, when either varies.
    pub grid: Option<String>,
}

impl Report {
    pub fn csv(&self) -> String {
        let mut out = String::from("method,scenario,alpha,gfn_lr,k,runs,test_mean,test_std,val_mean,val_std,best\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                c.method,
                c.scenario,
                opt(c.alpha),
                opt(c.gfn_lr),
                c.k.map(|k| k.to_string()).unwrap_or_default(),
                c.runs,
                c.test.mean,
                c.test.std,
                c.val.mean,
                c.val.std,
                c.best
            );
        }
        out
    }
}

fn pct(m: &MeanStd) -> String {
    format!("{:.2} ± {:.2}", 100.0 * m.mean, 100.0 * m.std)
}

type Key = (String, String, Option<u64>, Option<u64>, Option<i64>);

fn key(s: &Summary) -> Key {
    (
        s.method.clone(),
        s.scenario.clone(),
        s.alpha.map(f64::to_bits),
        s.gfn_lr.map(f64::to_bits),
        s.k,
    )
}

fn distinct<T: Ord>(items: impl Iterator<Item = T>) -> usize {
    items.collect::<BTreeSet<_>>().len()
}

pub fn build_report(summaries: &[Summary]) -> Result<Report> {
    if summaries.is_empty() {
        return Err(CliError::Config("report needs at least one run directory".into()));
    }
    for a in summaries {
        for b in summaries {
            if a.scenario == b.scenario && (a.dataset_nodes != b.dataset_nodes || a.rounds != b.rounds) {
                return Err(CliError::Data(format!(
                    "runs labelled `{}` disagree on dataset size or round count",
                    a.scenario
                )));
            }
        }
    }
    let mut keys: Vec<Key> = Vec::new();
    for s in summaries {
        if !keys.contains(&key(s)) {
            keys.push(key(s));
        }
    }
    let mut cells: Vec<Cell> = keys
        .iter()
        .map(|k| {
            let group: Vec<&Summary> = summaries.iter().filter(|s| &key(s) == k).collect();
            let tests: Vec<f64> = group.iter().flat_map(|s| s.seeds.iter().map(|r| r.test_accuracy.mean)).collect();
            let vals: Vec<f64> = group.iter().flat_map(|s| s.seeds.iter().map(|r| r.val_accuracy.mean)).collect();
            let first = group[0];
            Cell {
                method: first.method.clone(),
                scenario: first.scenario.clone(),
                alpha: first.alpha,
                gfn_lr: first.gfn_lr,
                k: first.k,
                runs: group.len(),
                test: MeanStd::of(&tests).unwrap(),
                val: MeanStd::of(&vals).unwrap(),
                best: false,
            }
        })
        .collect();

    let sampled: Vec<&Cell> = cells.iter().filter(|c| c.alpha.is_some()).collect();
    let vary_alpha = distinct(sampled.iter().map(|c| c.alpha.map(f64::to_bits))) > 1;
    let vary_lr = distinct(sampled.iter().map(|c| c.gfn_lr.map(f64::to_bits))) > 1;
    let vary_k = distinct(sampled.iter().map(|c| c.k)) > 1;
    let row_label = |c: &Cell| {
        let mut label = c.method.clone();
        if vary_alpha {
            if let Some(a) = c.alpha {
                let _ = write!(label, " α={a:e}");
            }
        }
        if vary_lr {
            if let Some(l) = c.gfn_lr {
                let _ = write!(label, " η={l}");
            }
        }
        if vary_k {
            if let Some(k) = c.k {
                let _ = write!(label, " k={k}");
            }
        }
        label
    };

    let mut columns: Vec<String> = Vec::new();
    let mut rows: Vec<String> = Vec::new();
    for c in &cells {
        if !columns.contains(&c.scenario) {
            columns.push(c.scenario.clone());
        }
        let r = row_label(c);
        if !rows.contains(&r) {
            rows.push(r);
        }
    }
    for col in &columns {
        let best = cells
            .iter()
            .filter(|c| &c.scenario == col)
            .map(|c| c.test.mean)
            .fold(f64::NEG_INFINITY, f64::max);
        for c in cells.iter_mut().filter(|c| &c.scenario == col) {
            c.best = c.test.mean == best;
        }
    }

    let width = rows.iter().map(|r| r.chars().count()).max().unwrap_or(6).max(6);
    let mut table = String::new();
    let _ = write!(table, "{:width$}", "method");
    for col in &columns {
        let _ = write!(table, " | {col:>18}");
    }
    table.push('\n');
    for r in &rows {
        let _ = write!(table, "{r:width$}");
        for col in &columns {
            let cell = cells.iter().find(|c| &c.scenario == col && &row_label(c) == r);
            let text = match cell {
                Some(c) => format!("{}{}", pct(&c.test), if c.best { "*" } else { " " }),
                None => "-".to_string(),
            };
            let _ = write!(table, " | {text:>18}");
        }
        table.push('\n');
    }

    let grid = (vary_alpha || vary_lr).then(|| {
        let mut out = String::new();
        for col in &columns {
            let here: Vec<&Cell> = cells.iter().filter(|c| &c.scenario == col && c.alpha.is_some()).collect();
            let mut alphas: Vec<f64> = here.iter().filter_map(|c| c.alpha).collect();
            alphas.sort_by(f64::total_cmp);
            alphas.dedup();
            let mut lrs: Vec<f64> = here.iter().filter_map(|c| c.gfn_lr).collect();
            lrs.sort_by(f64::total_cmp);
            lrs.dedup();
            let _ = writeln!(out, "validation accuracy, {col}");
            let _ = write!(out, "{:>8}", "α \\ η");
            for l in &lrs {
                let _ = write!(out, " | {:>15}", l.to_string());
            }
            out.push('\n');
            for a in &alphas {
                let _ = write!(out, "{:>8}", format!("{a:e}"));
                for l in &lrs {
                    let vals: Vec<f64> = here
                        .iter()
                        .filter(|c| c.alpha == Some(*a) && c.gfn_lr == Some(*l))
                        .map(|c| c.val.mean)
                        .collect();
                    let text = MeanStd::of(&vals).map_or("-".to_string(), |m| format!("{:.2}", 100.0 * m.mean));
                    let _ = write!(out, " | {text:>15}");
                }
                out.push('\n');
            }
        }
        out
    });

    Ok(Report { cells, table, grid })
}

pub fn cmd_report(dirs: &[PathBuf]) -> Result<Report> {
    let summaries = dirs.iter().map(|d| load_summary(d)).collect::<Result<Vec<_>>>()?;
    build_report(&summaries)
}

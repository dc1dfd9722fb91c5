//! Planetoid-style citation text files.
//!
//! `.content`: one node per line, `id f_1 ... f_d label`, whitespace separated.
//! `.cites`: one `cited citing` pair per line. Either file may be gzip
//! compressed.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::Graph;
use crate::error::{data_err, Error, Result};
use crate::numerics::DenseMatrix;

#[derive(Debug, Clone)]
pub struct PlanetoidGraph {
    pub graph: Graph,
    /// Original paper id of each node.
    pub node_ids: Vec<String>,
    /// Class names, sorted; label `c` is `class_names[c]`.
    pub class_names: Vec<String>,
    /// Citation lines whose endpoints are not both in the content file.
    pub skipped_links: usize,
}

/// Parse content and cites text. With `largest_component`, the graph is
/// restricted to its largest connected component and relabeled in order.
pub fn parse_planetoid(content: &str, cites: &str, largest_component: bool) -> Result<PlanetoidGraph> {
    let mut node_ids = Vec::new();
    let mut raw_labels = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    for (lineno, line) in content.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 2 {
            return Err(data_err!("content line {}: expected id and label", lineno + 1));
        }
        let d = fields.len() - 2;
        match width {
            None => width = Some(d),
            Some(w) if w != d => {
                return Err(data_err!(
                    "content line {}: {d} features, expected {w}",
                    lineno + 1
                ))
            }
            _ => {}
        }
        for f in &fields[1..fields.len() - 1] {
            let v: f64 = f
                .parse()
                .map_err(|_| data_err!("content line {}: bad feature {f:?}", lineno + 1))?;
            values.push(v);
        }
        node_ids.push(fields[0].to_string());
        raw_labels.push(fields[fields.len() - 1].to_string());
    }
    let n = node_ids.len();
    if n == 0 {
        return Err(data_err!("content file has no nodes"));
    }
    let mut index = HashMap::with_capacity(n);
    for (i, id) in node_ids.iter().enumerate() {
        if index.insert(id.as_str(), i).is_some() {
            return Err(data_err!("node id {id} appears twice"));
        }
    }

    let mut class_names = raw_labels.clone();
    class_names.sort();
    class_names.dedup();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| class_names.binary_search(l).unwrap())
        .collect();

    let mut edges = Vec::new();
    let mut skipped_links = 0;
    for (lineno, line) in cites.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => {}
            [a, b] => match (index.get(a), index.get(b)) {
                (Some(&u), Some(&v)) => edges.push((u, v)),
                _ => skipped_links += 1,
            },
            _ => return Err(data_err!("cites line {}: expected two ids", lineno + 1)),
        }
    }

    let features = DenseMatrix::from_vec(n, width.unwrap_or(0), values)?;
    let graph = Graph::new(n, &edges, features, labels, class_names.len())?;
    if !largest_component {
        return Ok(PlanetoidGraph {
            graph,
            node_ids,
            class_names,
            skipped_links,
        });
    }
    let keep = graph.largest_component();
    let sub = graph.induced_subgraph(&keep)?;
    Ok(PlanetoidGraph {
        graph: sub.graph().clone(),
        node_ids: keep.iter().map(|&i| node_ids[i].clone()).collect(),
        class_names,
        skipped_links,
    })
}

fn read_text(path: &Path) -> Result<String> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = String::new();
        GzDecoder::new(bytes.as_slice())
            .read_to_string(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        String::from_utf8(bytes).map_err(|_| data_err!("{}: not UTF-8 text", path.display()))
    }
}

/// Read a `.content`/`.cites` pair from disk (plain or gzip).
pub fn read_planetoid(
    content: impl AsRef<Path>,
    cites: impl AsRef<Path>,
    largest_component: bool,
) -> Result<PlanetoidGraph> {
    parse_planetoid(
        &read_text(content.as_ref())?,
        &read_text(cites.as_ref())?,
        largest_component,
    )
}

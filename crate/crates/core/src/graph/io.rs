//! On-disk dataset directory format.
//!
//! ```text
//! meta.json       {"num_nodes": N, "num_features": d, "num_classes": C}
//! features.f64    N*d little-endian f64, row-major
//! labels.u32      N little-endian u32
//! edges.u32       2E little-endian u32, (src, dst) pairs
//! global_ids.u32  client directories only: N little-endian u32
//! splits.json     client directories only: {"train": [...], "val": [...], "test": [...]}
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClientDataset, Graph, SplitMask};
use crate::error::{data_err, Error, Result};
use crate::numerics::DenseMatrix;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    num_nodes: usize,
    num_features: usize,
    num_classes: usize,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn decode_u32(path: &Path, bytes: &[u8]) -> Result<Vec<u32>> {
    if bytes.len() % 4 != 0 {
        return Err(data_err!("{}: length {} is not a multiple of 4", path.display(), bytes.len()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn encode_u32(values: impl IntoIterator<Item = usize>) -> Vec<u8> {
    values
        .into_iter()
        .flat_map(|v| (v as u32).to_le_bytes())
        .collect()
}

/// Load and validate a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta: Meta = serde_json::from_slice(&read(&meta_path)?)
        .map_err(|e| data_err!("{}: {e}", meta_path.display()))?;

    let feat_path = dir.join("features.f64");
    let raw = read(&feat_path)?;
    let expected = meta.num_nodes * meta.num_features * 8;
    if raw.len() != expected {
        return Err(data_err!(
            "{}: {} bytes, expected {expected} for {}x{} features",
            feat_path.display(),
            raw.len(),
            meta.num_nodes,
            meta.num_features
        ));
    }
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let features = DenseMatrix::from_vec(meta.num_nodes, meta.num_features, values)
        .map_err(|e| data_err!("{}: {e}", feat_path.display()))?;

    let label_path = dir.join("labels.u32");
    let labels: Vec<usize> = decode_u32(&label_path, &read(&label_path)?)?
        .into_iter()
        .map(|v| v as usize)
        .collect();
    if labels.len() != meta.num_nodes {
        return Err(data_err!(
            "{}: {} labels for {} nodes",
            label_path.display(),
            labels.len(),
            meta.num_nodes
        ));
    }

    let edge_path = dir.join("edges.u32");
    let flat = decode_u32(&edge_path, &read(&edge_path)?)?;
    if flat.len() % 2 != 0 {
        return Err(data_err!("{}: odd number of endpoints", edge_path.display()));
    }
    let edges: Vec<(usize, usize)> = flat
        .chunks_exact(2)
        .map(|p| (p[0] as usize, p[1] as usize))
        .collect();

    Graph::new(meta.num_nodes, &edges, features, labels, meta.num_classes)
}

/// Write a graph in dataset directory format; each undirected edge is
/// stored once as `(u, v)` with `u < v`.
pub fn write_dataset(dir: impl AsRef<Path>, g: &Graph) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = Meta {
        num_nodes: g.num_nodes(),
        num_features: g.num_features(),
        num_classes: g.num_classes(),
    };
    write(&dir.join("meta.json"), &serde_json::to_vec_pretty(&meta)?)?;
    let feats: Vec<u8> = g
        .features()
        .as_slice()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    write(&dir.join("features.f64"), &feats)?;
    write(&dir.join("labels.u32"), &encode_u32(g.labels().iter().copied()))?;
    write(
        &dir.join("edges.u32"),
        &encode_u32(g.edges().flat_map(|(u, v)| [u, v])),
    )?;
    Ok(())
}

pub fn write_client(dir: impl AsRef<Path>, client: &ClientDataset) -> Result<()> {
    let dir = dir.as_ref();
    write_dataset(dir, client.graph())?;
    write(
        &dir.join("global_ids.u32"),
        &encode_u32(client.global_ids().iter().copied()),
    )?;
    write(&dir.join("splits.json"), &serde_json::to_vec(client.splits())?)?;
    Ok(())
}

pub fn load_client(dir: impl AsRef<Path>) -> Result<ClientDataset> {
    let dir = dir.as_ref();
    let graph = load_dataset(dir)?;
    let id_path = dir.join("global_ids.u32");
    let global_ids: Vec<usize> = decode_u32(&id_path, &read(&id_path)?)?
        .into_iter()
        .map(|v| v as usize)
        .collect();
    if global_ids.len() != graph.num_nodes() {
        return Err(data_err!(
            "{}: {} ids for {} nodes",
            id_path.display(),
            global_ids.len(),
            graph.num_nodes()
        ));
    }
    let mut seen = global_ids.clone();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(data_err!("{}: duplicate global ids", id_path.display()));
    }
    let split_path = dir.join("splits.json");
    let splits: SplitMask = serde_json::from_slice(&read(&split_path)?)
        .map_err(|e| data_err!("{}: {e}", split_path.display()))?;
    let n = graph.num_nodes();
    let mut owner = vec![false; n];
    for &v in splits.train.iter().chain(&splits.val).chain(&splits.test) {
        if v >= n || owner[v] {
            return Err(data_err!(
                "{}: node {v} out of range or in two splits",
                split_path.display()
            ));
        }
        owner[v] = true;
    }
    Ok(ClientDataset::new(graph, global_ids, splits))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_graph() -> Graph {
        let feats = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 2.0], vec![-1.0, 0.25]]).unwrap();
        Graph::new(3, &[(0, 1), (2, 1)], feats, vec![0, 1, 1], 2).unwrap()
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = sample_graph();
        write_dataset(dir.path(), &g).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), g);
    }

    #[test]
    fn client_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = sample_graph()
            .induced_subgraph(&[2, 1])
            .unwrap()
            .with_splits(SplitMask {
                train: vec![0],
                val: vec![1],
                test: vec![],
            });
        write_client(dir.path(), &c).unwrap();
        assert_eq!(load_client(dir.path()).unwrap(), c);
    }

    #[test]
    fn empty_edge_file() {
        let dir = tempfile::tempdir().unwrap();
        let g = Graph::new(3, &[], DenseMatrix::zeros(3, 1), vec![0, 0, 0], 1).unwrap();
        write_dataset(dir.path(), &g).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded.num_nodes(), 3);
        assert_eq!(loaded.num_edges(), 0);
    }

    #[test]
    fn one_directional_edges_are_symmetrized() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &sample_graph()).unwrap();
        // both directions plus a self-loop
        fs::write(dir.path().join("edges.u32"), encode_u32([0, 1, 1, 0, 2, 2])).unwrap();
        let g = load_dataset(dir.path()).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert!(g.has_edge(1, 0));
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Io { .. })));
        write_dataset(dir.path(), &sample_graph()).unwrap();
        fs::write(dir.path().join("labels.u32"), encode_u32([0, 1])).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Data(_))));
        fs::write(dir.path().join("labels.u32"), encode_u32([0, 1, 7])).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Data(_))));
    }
}

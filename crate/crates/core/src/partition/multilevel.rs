use rand::Rng;

use super::{balance_cap, Partition};
use crate::error::{arg_err, Result};
use crate::graph::Graph;
use crate::rng::{self, Purpose};

const NONE: usize = usize::MAX;
const INITIAL_TRIALS: usize = 8;
const MAX_REFINE_PASSES: usize = 32;
const CYCLES: usize = 4;

/// Graph with integer node and edge weights, used during coarsening.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    edge_weights: Vec<u64>,
    node_weights: Vec<u64>,
}

impl WeightedGraph {
    pub fn num_nodes(&self) -> usize {
        self.node_weights.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn node_weight(&self, v: usize) -> u64 {
        self.node_weights[v]
    }

    pub fn total_weight(&self) -> u64 {
        self.node_weights.iter().sum()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let range = self.offsets[v]..self.offsets[v + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.edge_weights[range].iter().copied())
    }

    /// Weight of edge `(u, v)`, zero if absent.
    pub fn edge_weight(&self, u: usize, v: usize) -> u64 {
        self.neighbors(u)
            .find(|&(w, _)| w == v)
            .map_or(0, |(_, w)| w)
    }

    /// Total weight of edges whose endpoints lie in different parts.
    pub fn cut(&self, part: &[usize]) -> u64 {
        (0..self.num_nodes())
            .flat_map(|u| self.neighbors(u).map(move |(v, w)| (u, v, w)))
            .filter(|&(u, v, _)| u < v && part[u] != part[v])
            .map(|(_, _, w)| w)
            .sum()
    }
}

impl From<&Graph> for WeightedGraph {
    fn from(g: &Graph) -> Self {
        let n = g.num_nodes();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for v in 0..n {
            targets.extend_from_slice(g.neighbors(v));
            offsets.push(targets.len());
        }
        let edge_weights = vec![1; targets.len()];
        Self {
            offsets,
            targets,
            edge_weights,
            node_weights: vec![1; n],
        }
    }
}

/// One coarsening step: `map[v]` is the coarse node containing fine node `v`.
#[derive(Debug, Clone)]
pub struct Coarsening {
    pub graph: WeightedGraph,
    pub map: Vec<usize>,
    /// No pair could be matched; `graph` is the input unchanged.
    pub fixed_point: bool,
}

/// Heavy-edge matching in random visit order, then contraction.
pub fn coarsen<R: Rng + ?Sized>(g: &WeightedGraph, rng: &mut R) -> Coarsening {
    let n = g.num_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(rng, &mut order);
    let mut mate = vec![NONE; n];
    let mut matched_any = false;
    for &u in &order {
        if mate[u] != NONE {
            continue;
        }
        let mut best = NONE;
        let mut best_w = 0;
        for (v, w) in g.neighbors(u) {
            if mate[v] == NONE && v != u && (w > best_w || (w == best_w && v < best)) {
                best = v;
                best_w = w;
            }
        }
        if best == NONE {
            mate[u] = u;
        } else {
            mate[u] = best;
            mate[best] = u;
            matched_any = true;
        }
    }
    if !matched_any {
        return Coarsening {
            graph: g.clone(),
            map: (0..n).collect(),
            fixed_point: true,
        };
    }

    let mut map = vec![NONE; n];
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for v in 0..n {
        if map[v] == NONE {
            let c = groups.len();
            map[v] = c;
            map[mate[v]] = c;
            groups.push((v, mate[v]));
        }
    }

    let cn = groups.len();
    let mut offsets = Vec::with_capacity(cn + 1);
    let mut targets = Vec::new();
    let mut edge_weights = Vec::new();
    let mut node_weights = Vec::with_capacity(cn);
    let mut acc = vec![0u64; cn];
    let mut touched: Vec<usize> = Vec::new();
    offsets.push(0);
    for (c, &(a, b)) in groups.iter().enumerate() {
        let members: &[usize] = if a == b { &[a][..] } else { &[a, b][..] };
        let mut weight = 0;
        for &v in members {
            weight += g.node_weight(v);
            for (u, w) in g.neighbors(v) {
                let cu = map[u];
                if cu == c {
                    continue;
                }
                if acc[cu] == 0 {
                    touched.push(cu);
                }
                acc[cu] += w;
            }
        }
        touched.sort_unstable();
        for &cu in &touched {
            targets.push(cu);
            edge_weights.push(acc[cu]);
            acc[cu] = 0;
        }
        touched.clear();
        offsets.push(targets.len());
        node_weights.push(weight);
    }
    Coarsening {
        graph: WeightedGraph {
            offsets,
            targets,
            edge_weights,
            node_weights,
        },
        map,
        fixed_point: false,
    }
}

/// Mutable partition state over one level's weighted graph.
struct State<'a> {
    g: &'a WeightedGraph,
    part: Vec<usize>,
    weights: Vec<u64>,
    counts: Vec<usize>,
    conn: Vec<u64>,
    touched: Vec<usize>,
}

impl<'a> State<'a> {
    fn new(g: &'a WeightedGraph, part: Vec<usize>, p: usize) -> Self {
        let mut weights = vec![0; p];
        let mut counts = vec![0; p];
        for (v, &q) in part.iter().enumerate() {
            weights[q] += g.node_weight(v);
            counts[q] += 1;
        }
        Self {
            g,
            part,
            weights,
            counts,
            conn: vec![0; p],
            touched: Vec::new(),
        }
    }

    /// Fill `conn` with the edge weight from `v` into each part.
    fn connect(&mut self, v: usize) {
        for &q in &self.touched {
            self.conn[q] = 0;
        }
        self.touched.clear();
        for (u, w) in self.g.neighbors(v) {
            let q = self.part[u];
            if self.conn[q] == 0 {
                self.touched.push(q);
            }
            self.conn[q] += w;
        }
    }

    fn move_node(&mut self, v: usize, to: usize) {
        let from = self.part[v];
        let w = self.g.node_weight(v);
        self.weights[from] -= w;
        self.counts[from] -= 1;
        self.weights[to] += w;
        self.counts[to] += 1;
        self.part[v] = to;
    }

    /// One pass of greedy boundary moves that never increase the cut and
    /// respect the cap. Returns the number of moves.
    fn refine_pass(&mut self, order: &[usize], cap: u64) -> usize {
        let mut moves = 0;
        for &v in order {
            let from = self.part[v];
            if self.counts[from] == 1 {
                continue;
            }
            self.connect(v);
            let internal = self.conn[from];
            let vw = self.g.node_weight(v);
            let mut best = NONE;
            let mut best_ext = 0;
            for &q in &self.touched {
                if q == from || self.weights[q] + vw > cap {
                    continue;
                }
                let ext = self.conn[q];
                if ext > best_ext || (ext == best_ext && best != NONE && q < best) {
                    best = q;
                    best_ext = ext;
                }
            }
            if best == NONE {
                continue;
            }
            // zero-gain moves are taken only when they even out part weights
            if best_ext > internal || (best_ext == internal && self.weights[best] + vw < self.weights[from]) {
                self.move_node(v, best);
                moves += 1;
            }
        }
        moves
    }

    /// Move nodes out of over-cap parts, cheapest cut increase first, until
    /// every part fits or no legal move remains.
    fn balance(&mut self, cap: u64) {
        let p = self.weights.len();
        loop {
            let Some(src) = (0..p)
                .filter(|&q| self.weights[q] > cap && self.counts[q] > 1)
                .max_by(|&a, &b| self.weights[a].cmp(&self.weights[b]).then(b.cmp(&a)))
            else {
                return;
            };
            let mut best: Option<(i64, usize, usize)> = None;
            for v in 0..self.g.num_nodes() {
                if self.part[v] != src {
                    continue;
                }
                let vw = self.g.node_weight(v);
                self.connect(v);
                let internal = self.conn[src] as i64;
                for q in 0..p {
                    if q == src || self.weights[q] + vw > cap {
                        continue;
                    }
                    let cost = internal - self.conn[q] as i64;
                    if best.is_none_or(|(c, _, _)| cost < c) {
                        best = Some((cost, v, q));
                    }
                }
            }
            match best {
                Some((_, v, q)) => self.move_node(v, q),
                None => return,
            }
        }
    }

    /// Give every empty part one node taken from the part with the most
    /// nodes, choosing the node whose removal cuts the fewest edges.
    fn fill_empty(&mut self) {
        let p = self.weights.len();
        for q in 0..p {
            if self.counts[q] > 0 {
                continue;
            }
            let donor = (0..p)
                .max_by(|&a, &b| self.counts[a].cmp(&self.counts[b]).then(b.cmp(&a)))
                .unwrap();
            let mut best: Option<(u64, usize)> = None;
            for v in 0..self.g.num_nodes() {
                if self.part[v] != donor {
                    continue;
                }
                self.connect(v);
                let cost = self.conn[donor];
                if best.is_none_or(|(c, _)| cost < c) {
                    best = Some((cost, v));
                }
            }
            let (_, v) = best.expect("donor part is nonempty");
            self.move_node(v, q);
        }
    }

    fn overweight(&self, cap: u64) -> u64 {
        self.weights.iter().map(|&w| w.saturating_sub(cap)).sum()
    }
}

/// Greedy graph growing: parts are grown one at a time from a random seed
/// node by absorbing the frontier node most strongly connected to the part.
fn grow<R: Rng + ?Sized>(g: &WeightedGraph, p: usize, rng: &mut R) -> Vec<usize> {
    let n = g.num_nodes();
    let mut part = vec![NONE; n];
    let mut unassigned = n;
    let mut remaining = g.total_weight();
    let mut gain = vec![0u64; n];
    for q in 0..p {
        if q == p - 1 {
            for slot in part.iter_mut().filter(|s| **s == NONE) {
                *slot = q;
            }
            break;
        }
        let target = remaining as f64 / (p - q) as f64;
        let reserve = p - 1 - q;
        let mut frontier: Vec<usize> = Vec::new();
        let mut weight = 0u64;
        while unassigned > reserve && (weight as f64) < target {
            let pick = frontier
                .iter()
                .enumerate()
                .max_by(|a, b| gain[*a.1].cmp(&gain[*b.1]).then(b.1.cmp(a.1)))
                .map(|(i, &v)| (i, v));
            let v = match pick {
                Some((i, v)) => {
                    frontier.swap_remove(i);
                    v
                }
                None => {
                    let free: Vec<usize> = (0..n).filter(|&v| part[v] == NONE).collect();
                    free[rng::index_below(rng, free.len())]
                }
            };
            part[v] = q;
            unassigned -= 1;
            weight += g.node_weight(v);
            for (u, w) in g.neighbors(v) {
                if part[u] == NONE {
                    if gain[u] == 0 {
                        frontier.push(u);
                    }
                    gain[u] += w;
                }
            }
        }
        for &u in &frontier {
            gain[u] = 0;
        }
        remaining -= weight;
    }
    part
}

fn refine_to_convergence(state: &mut State<'_>, order: &[usize], cap: u64, history: &mut Vec<u64>) {
    history.push(state.g.cut(&state.part));
    for _ in 0..MAX_REFINE_PASSES {
        if state.refine_pass(order, cap) == 0 {
            break;
        }
        history.push(state.g.cut(&state.part));
    }
}

/// Edge cut after each refinement pass, per level from coarsest to finest.
/// Each level's first entry is the cut before its first pass.
pub type RefinementHistory = Vec<Vec<u64>>;

/// Multilevel partition into `p` parts; see [`partition_multilevel_traced`].
pub fn partition_multilevel(g: &Graph, p: usize, seed: u64, eps: f64) -> Result<Partition> {
    partition_multilevel_traced(g, p, seed, eps).map(|(part, _)| part)
}

/// Coarsen by heavy-edge matching until at most `max(30p, 200)` nodes remain
/// (or matching stalls), grow an initial partition on the coarsest graph,
/// then project back level by level with balancing and boundary refinement.
pub fn partition_multilevel_traced(
    g: &Graph,
    p: usize,
    seed: u64,
    eps: f64,
) -> Result<(Partition, RefinementHistory)> {
    let n = g.num_nodes();
    if p == 0 || p > n {
        return Err(arg_err!("cannot split {n} nodes into {p} parts"));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(arg_err!("balance slack must be finite and non-negative, got {eps}"));
    }
    if p == 1 {
        return Ok((Partition::new(vec![0; n], 1)?, vec![vec![0]]));
    }
    let cap = balance_cap(n, p, eps) as u64;
    let mut rng = rng::stream(seed, Purpose::Partition, &[]);
    let finest = WeightedGraph::from(g);
    let mut best: Option<(u64, u64, Vec<usize>, RefinementHistory)> = None;
    for _ in 0..CYCLES {
        let (part, history) = cycle(&finest, p, cap, &mut rng);
        let key = (
            part.iter()
                .fold(vec![0u64; p], |mut w, &q| {
                    w[q] += 1;
                    w
                })
                .iter()
                .map(|&w| w.saturating_sub(cap))
                .sum::<u64>(),
            finest.cut(&part),
        );
        if best.as_ref().is_none_or(|b| key < (b.0, b.1)) {
            best = Some((key.0, key.1, part, history));
        }
    }
    let (_, _, part, history) = best.unwrap();
    Ok((Partition::new(part, p)?, history))
}

/// One coarsen / initial partition / uncoarsen cycle.
fn cycle<R: Rng + ?Sized>(finest: &WeightedGraph, p: usize, cap: u64, rng: &mut R) -> (Vec<usize>, RefinementHistory) {
    let threshold = (30 * p).max(200);
    let mut levels: Vec<WeightedGraph> = vec![finest.clone()];
    let mut maps: Vec<Vec<usize>> = Vec::new();
    while levels.last().unwrap().num_nodes() > threshold {
        let current = levels.last().unwrap();
        let step = coarsen(current, rng);
        let shrunk = step.graph.num_nodes() as f64;
        if step.fixed_point || shrunk > 0.95 * current.num_nodes() as f64 {
            break;
        }
        maps.push(step.map);
        levels.push(step.graph);
    }

    let coarsest = levels.last().unwrap();
    let mut order: Vec<usize> = (0..coarsest.num_nodes()).collect();
    let mut best: Option<(u64, u64, Vec<usize>, Vec<u64>)> = None;
    for _ in 0..INITIAL_TRIALS {
        let mut state = State::new(coarsest, grow(coarsest, p, rng), p);
        state.balance(cap);
        rng::shuffle(rng, &mut order);
        let mut trace = Vec::new();
        refine_to_convergence(&mut state, &order, cap, &mut trace);
        let key = (state.overweight(cap), coarsest.cut(&state.part));
        if best.as_ref().is_none_or(|b| key < (b.0, b.1)) {
            best = Some((key.0, key.1, state.part, trace));
        }
    }
    let (_, _, mut part, trace) = best.unwrap();
    let mut history = vec![trace];

    for level in (0..levels.len() - 1).rev() {
        let map = &maps[level];
        let fine = &levels[level];
        part = (0..fine.num_nodes()).map(|v| part[map[v]]).collect();
        let mut state = State::new(fine, part, p);
        state.balance(cap);
        let mut order: Vec<usize> = (0..fine.num_nodes()).collect();
        rng::shuffle(rng, &mut order);
        let mut trace = Vec::new();
        refine_to_convergence(&mut state, &order, cap, &mut trace);
        history.push(trace);
        part = state.part;
    }

    let mut state = State::new(&levels[0], part, p);
    state.fill_empty();
    state.balance(cap);
    (state.part, history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DenseMatrix;
    use crate::rng::stream;

    fn plain(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::new(n, edges, DenseMatrix::zeros(n, 1), vec![0; n], 1).unwrap()
    }

    #[test]
    fn single_edge_contracts_to_one_heavy_node() {
        let g = WeightedGraph::from(&plain(2, &[(0, 1)]));
        let c = coarsen(&g, &mut stream(0, Purpose::Partition, &[]));
        assert!(!c.fixed_point);
        assert_eq!(c.graph.num_nodes(), 1);
        assert_eq!(c.graph.node_weight(0), 2);
        assert_eq!(c.graph.num_edges(), 0);
    }

    #[test]
    fn four_cycle_contracts_to_weighted_pair() {
        let g = WeightedGraph::from(&plain(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]));
        for seed in 0..20 {
            let c = coarsen(&g, &mut stream(seed, Purpose::Partition, &[]));
            assert_eq!(c.graph.num_nodes(), 2);
            assert_eq!(c.graph.node_weight(0), 2);
            assert_eq!(c.graph.node_weight(1), 2);
            assert_eq!(c.graph.edge_weight(0, 1), 2);
        }
    }

    #[test]
    fn edgeless_graph_is_fixed_point() {
        let g = WeightedGraph::from(&plain(5, &[]));
        let c = coarsen(&g, &mut stream(0, Purpose::Partition, &[]));
        assert!(c.fixed_point);
        assert_eq!(c.graph, g);
    }

    #[test]
    fn coarsening_preserves_weight_and_cut() {
        let mut rng = stream(3, Purpose::Evaluation, &[]);
        let n = 300;
        let edges: Vec<(usize, usize)> = (0..900)
            .map(|_| (rng::index_below(&mut rng, n), rng::index_below(&mut rng, n)))
            .collect();
        let g = WeightedGraph::from(&plain(n, &edges));
        let c = coarsen(&g, &mut rng);
        assert_eq!(c.graph.total_weight(), n as u64);
        assert!(c.graph.num_nodes() * 2 >= n);
        let coarse_part: Vec<usize> = (0..c.graph.num_nodes()).map(|v| v % 3).collect();
        let fine_part: Vec<usize> = c.map.iter().map(|&cv| coarse_part[cv]).collect();
        assert_eq!(c.graph.cut(&coarse_part), g.cut(&fine_part));
    }

    #[test]
    fn two_triangles_split_at_bridge() {
        let g = plain(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]);
        // exhaustive search over balanced 2-partitions
        let mut best = usize::MAX;
        for mask in 0u32..64 {
            if mask.count_ones() == 3 {
                let part: Vec<usize> = (0..6).map(|v| ((mask >> v) & 1) as usize).collect();
                best = best.min(Partition::new(part, 2).unwrap().edge_cut(&g));
            }
        }
        assert_eq!(best, 1);
        for seed in 0..10 {
            let p = partition_multilevel(&g, 2, seed, 0.05).unwrap();
            assert_eq!(p.edge_cut(&g), 1);
            assert_ne!(p.assignment()[2], p.assignment()[3]);
        }
    }

    #[test]
    fn one_part() {
        let g = plain(4, &[(0, 1), (2, 3)]);
        let p = partition_multilevel(&g, 1, 0, 0.05).unwrap();
        assert_eq!(p.assignment(), &[0, 0, 0, 0]);
        assert_eq!(p.edge_cut(&g), 0);
    }

    #[test]
    fn too_many_parts() {
        let g = plain(3, &[]);
        assert!(partition_multilevel(&g, 4, 0, 0.05).is_err());
        assert!(partition_multilevel(&g, 0, 0, 0.05).is_err());
        assert!(partition_multilevel(&g, 3, 0, 0.05).is_ok());
    }
}

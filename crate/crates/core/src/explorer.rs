//! Graph of minima connected by their best known paths.
//!
//! Concatenating a path from A to B with one from B to C gives a path from
//! A to C whose highest point is the larger of the two saddles. The lowest
//! known saddle between any two minima is therefore the bottleneck value on
//! the minimum spanning tree of the graph, and exploration only needs to
//! improve the worst tree edge.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autoneb::{auto_neb, AutoNebSchedule};
use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::landscape::{Landscape, ParamVector};

const SADDLE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub params: ParamVector,
    pub min_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub u: usize,
    pub v: usize,
    pub saddle_loss: f64,
    pub chain: Option<Chain>,
}

impl Edge {
    pub fn connects(&self, a: usize, b: usize) -> bool {
        (self.u == a && self.v == b) || (self.u == b && self.v == a)
    }
}

/// Outcome of [`LandscapeGraph::insert_edge`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeUpdate {
    Added(usize),
    Replaced { old: usize, new: usize },
    /// An edge at least as low already exists for the pair.
    Kept(usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LandscapeGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    ignored: BTreeSet<usize>,
    next_edge_id: usize,
}

impl LandscapeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, params: ParamVector, min_loss: f64) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { id, params, min_loss });
        id
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Stored edges in id order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<&Edge> {
        self.edges.iter().find(|e| e.connects(a, b))
    }

    pub fn ignored(&self) -> &BTreeSet<usize> {
        &self.ignored
    }

    /// Excludes an edge from future worst-edge searches.
    pub fn ignore(&mut self, edge: usize) {
        self.ignored.insert(edge);
    }

    /// True once every pair of nodes has a stored edge.
    pub fn is_complete(&self) -> bool {
        let n = self.nodes.len();
        self.edges.len() == n * n.saturating_sub(1) / 2
    }

    /// Records a path between `u` and `v`, keeping only the lowest saddle
    /// ever seen for the pair.
    pub fn insert_edge(&mut self, u: usize, v: usize, saddle_loss: f64, chain: Option<Chain>) -> Result<EdgeUpdate> {
        for n in [u, v] {
            if n >= self.nodes.len() {
                return Err(Error::UnknownNode(n));
            }
        }
        if u == v {
            return Err(Error::InvalidConfig(format!("self-loop on node {u}")));
        }
        if !saddle_loss.is_finite() {
            return Err(Error::NonFiniteOutput);
        }
        let floor = self.nodes[u].min_loss.max(self.nodes[v].min_loss);
        if saddle_loss < floor - SADDLE_SLACK {
            return Err(Error::InvalidConfig(format!(
                "saddle loss {saddle_loss} lies below endpoint loss {floor} for edge {u}-{v}"
            )));
        }
        let id = self.next_edge_id;
        let edge = Edge { id, u, v, saddle_loss, chain };
        match self.edges.iter().position(|e| e.connects(u, v)) {
            Some(k) if self.edges[k].saddle_loss <= saddle_loss => Ok(EdgeUpdate::Kept(self.edges[k].id)),
            Some(k) => {
                let old = self.edges.remove(k).id;
                self.ignored.remove(&old);
                self.edges.push(edge);
                self.next_edge_id += 1;
                Ok(EdgeUpdate::Replaced { old, new: id })
            }
            None => {
                self.edges.push(edge);
                self.next_edge_id += 1;
                Ok(EdgeUpdate::Added(id))
            }
        }
    }

    /// Connected components as sorted node lists, ordered by smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut dsu = DisjointSets::new(self.nodes.len());
        for e in &self.edges {
            dsu.union(e.u, e.v);
        }
        dsu.groups()
    }
}

/// Union–find with path halving and union by size.
#[derive(Debug, Clone)]
struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }

    fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
        for x in 0..n {
            let r = self.find(x);
            by_root[r].push(x);
        }
        let mut groups: Vec<Vec<usize>> = by_root.into_iter().filter(|g| !g.is_empty()).collect();
        groups.sort();
        groups
    }
}

/// Kruskal over all stored edges; ties go to the lower edge id. Returns
/// edge ids of a minimum spanning forest in acceptance order.
pub fn minimum_spanning_forest(graph: &LandscapeGraph) -> Vec<usize> {
    let mut order: Vec<&Edge> = graph.edges.iter().collect();
    order.sort_by(|a, b| a.saddle_loss.total_cmp(&b.saddle_loss).then(a.id.cmp(&b.id)));
    let mut dsu = DisjointSets::new(graph.nodes.len());
    order.into_iter().filter(|e| dsu.union(e.u, e.v)).map(|e| e.id).collect()
}

/// Minimum spanning tree by saddle loss; fails if the graph is not
/// connected.
pub fn kruskal_mst(graph: &LandscapeGraph) -> Result<Vec<usize>> {
    let forest = minimum_spanning_forest(graph);
    if forest.len() + 1 < graph.nodes.len() {
        return Err(Error::Disconnected { components: graph.components() });
    }
    Ok(forest)
}

/// Lowest achievable maximum saddle over all paths from `a` to `c`: the
/// largest edge on their tree path. `bound(a, a)` is the minimum's own
/// loss.
pub fn ultrametric_bound(graph: &LandscapeGraph, a: usize, c: usize) -> Result<f64> {
    for n in [a, c] {
        if n >= graph.nodes.len() {
            return Err(Error::UnknownNode(n));
        }
    }
    if a == c {
        return Ok(graph.nodes[a].min_loss);
    }
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); graph.nodes.len()];
    for id in minimum_spanning_forest(graph) {
        let e = graph.edge(id).expect("forest edge exists");
        adjacency[e.u].push((e.v, e.saddle_loss));
        adjacency[e.v].push((e.u, e.saddle_loss));
    }
    // tree paths are unique, so a plain DFS carrying the running max suffices
    let mut stack = vec![(a, usize::MAX, f64::NEG_INFINITY)];
    while let Some((node, parent, worst)) = stack.pop() {
        if node == c {
            return Ok(worst);
        }
        for &(next, w) in &adjacency[node] {
            if next != parent {
                stack.push((next, node, worst.max(w)));
            }
        }
    }
    Err(Error::Disconnected { components: graph.components() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreConfig {
    /// Maximum number of path computations, including the initial star.
    pub budget: usize,
    /// Stop once `(max − min) / |max|` over tree saddles drops below this.
    #[serde(default = "default_stop_ratio")]
    pub stop_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_stop_ratio() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    AllPairsKnown,
    BudgetExhausted,
    SimilarSaddles,
    AllEdgesIgnored,
}

#[derive(Debug, Clone)]
pub struct ExploreOutcome {
    pub graph: LandscapeGraph,
    pub mst: Vec<usize>,
    /// Number of path computations performed.
    pub runs: usize,
    /// Largest tree saddle after the star phase and after each later run.
    pub mst_max_history: Vec<f64>,
    pub stop: StopReason,
}

fn mst_saddles<'a>(graph: &'a LandscapeGraph, mst: &'a [usize]) -> impl Iterator<Item = f64> + 'a {
    mst.iter().map(move |&id| graph.edge(id).expect("tree edge").saddle_loss)
}

fn mst_max(graph: &LandscapeGraph, mst: &[usize]) -> f64 {
    mst_saddles(graph, mst).fold(f64::NEG_INFINITY, f64::max)
}

fn saddles_similar(graph: &LandscapeGraph, mst: &[usize], stop_ratio: f64) -> bool {
    let max = mst_max(graph, mst);
    let min = mst_saddles(graph, mst).fold(f64::INFINITY, f64::min);
    let spread = if max == min { 0.0 } else { (max - min) / max.abs() };
    spread < stop_ratio
}

/// Builds a graph over `minima`: first connects minimum 0 to every other
/// one, then repeatedly removes the highest non-ignored tree edge and tries
/// to bridge the two resulting components with a pair that has no stored
/// path yet, chosen uniformly at random from a generator seeded by
/// `cfg.seed`.
pub fn explore<L: Landscape + ?Sized>(
    minima: &[ParamVector],
    landscape: &L,
    schedule: &AutoNebSchedule,
    cfg: &ExploreConfig,
) -> Result<ExploreOutcome> {
    let n = minima.len();
    if n < 2 {
        return Err(Error::InvalidConfig("exploration needs at least two minima".into()));
    }
    if cfg.budget < n - 1 {
        return Err(Error::InvalidConfig(format!("budget {} cannot connect {n} minima", cfg.budget)));
    }
    schedule.validate()?;
    let mut graph = LandscapeGraph::new();
    for m in minima {
        let loss = landscape.loss(m)?;
        graph.add_node(m.clone(), loss);
    }
    let mut runs = 0;
    let connect = |graph: &mut LandscapeGraph, u: usize, v: usize| -> Result<()> {
        let out = auto_neb(&minima[u], &minima[v], landscape, schedule)?;
        graph.insert_edge(u, v, out.saddle.loss, Some(out.chain))?;
        Ok(())
    };

    for other in 1..n {
        connect(&mut graph, 0, other)?;
        runs += 1;
    }
    let mut mst = kruskal_mst(&graph)?;
    let mut history = vec![mst_max(&graph, &mst)];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let stop = loop {
        if graph.is_complete() {
            break StopReason::AllPairsKnown;
        }
        if runs >= cfg.budget {
            break StopReason::BudgetExhausted;
        }
        if saddles_similar(&graph, &mst, cfg.stop_ratio) {
            break StopReason::SimilarSaddles;
        }
        let worst = mst
            .iter()
            .filter(|id| !graph.ignored().contains(id))
            .map(|&id| graph.edge(id).expect("tree edge"))
            .fold(None, |best: Option<&Edge>, e| match best {
                Some(b) if b.saddle_loss > e.saddle_loss || (b.saddle_loss == e.saddle_loss && b.id < e.id) => Some(b),
                _ => Some(e),
            })
            .map(|e| e.id);
        let Some(worst) = worst else {
            break StopReason::AllEdgesIgnored;
        };

        let mut sides = DisjointSets::new(n);
        for &id in mst.iter().filter(|&&id| id != worst) {
            let e = graph.edge(id).expect("tree edge");
            sides.union(e.u, e.v);
        }
        let mut eligible = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if sides.find(a) != sides.find(b) && graph.edge_between(a, b).is_none() {
                    eligible.push((a, b));
                }
            }
        }
        if eligible.is_empty() {
            graph.ignore(worst);
            continue;
        }
        let (a, b) = eligible[rng.gen_range(0..eligible.len())];
        connect(&mut graph, a, b)?;
        runs += 1;
        mst = kruskal_mst(&graph)?;
        history.push(mst_max(&graph, &mst));
    };

    Ok(ExploreOutcome { graph, mst, runs, mst_max_history: history, stop })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> LandscapeGraph {
        let mut g = LandscapeGraph::new();
        for _ in 0..n {
            g.add_node(ParamVector::zeros(1), 0.0);
        }
        for &(u, v, w) in edges {
            g.insert_edge(u, v, w, None).unwrap();
        }
        g
    }

    fn weights(g: &LandscapeGraph, ids: &[usize]) -> Vec<f64> {
        ids.iter().map(|&id| g.edge(id).unwrap().saddle_loss).collect()
    }

    #[test]
    fn triangle_mst() {
        let g = graph(3, &[(0, 1, 0.5), (1, 2, 0.3), (2, 0, 0.4)]);
        let mst = kruskal_mst(&g).unwrap();
        assert_eq!(weights(&g, &mst), vec![0.3, 0.4]);
    }

    #[test]
    fn star_is_its_own_tree() {
        let g = graph(4, &[(0, 1, 0.9), (0, 2, 0.1), (0, 3, 0.5)]);
        let mut mst = kruskal_mst(&g).unwrap();
        mst.sort();
        assert_eq!(mst, vec![0, 1, 2]);
    }

    #[test]
    fn best_edge_per_pair() {
        let mut g = graph(2, &[(0, 1, 0.7)]);
        assert_eq!(g.insert_edge(1, 0, 0.9, None).unwrap(), EdgeUpdate::Kept(0));
        assert_eq!(g.insert_edge(1, 0, 0.2, None).unwrap(), EdgeUpdate::Replaced { old: 0, new: 1 });
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.edges()[0].saddle_loss, 0.2);
    }

    #[test]
    fn edge_below_endpoint_rejected() {
        let mut g = LandscapeGraph::new();
        g.add_node(ParamVector::zeros(1), 1.0);
        g.add_node(ParamVector::zeros(1), 0.0);
        assert!(g.insert_edge(0, 1, 0.5, None).is_err());
        assert!(g.insert_edge(0, 1, 1.0 - 1e-12, None).is_ok());
        assert!(g.insert_edge(0, 0, 2.0, None).is_err());
        assert!(matches!(g.insert_edge(0, 5, 2.0, None), Err(Error::UnknownNode(5))));
    }

    #[test]
    fn disconnected_graph_reports_components() {
        let g = graph(4, &[(0, 1, 0.5), (2, 3, 0.1)]);
        match kruskal_mst(&g) {
            Err(Error::Disconnected { components }) => assert_eq!(components, vec![vec![0, 1], vec![2, 3]]),
            other => panic!("{other:?}"),
        }
        assert!(ultrametric_bound(&g, 0, 2).is_err());
        assert_eq!(ultrametric_bound(&g, 2, 3).unwrap(), 0.1);
    }

    #[test]
    fn bound_examples() {
        let g = graph(3, &[(0, 1, 0.5), (1, 2, 0.3)]);
        assert_eq!(ultrametric_bound(&g, 0, 2).unwrap(), 0.5);
        let mut h = LandscapeGraph::new();
        h.add_node(ParamVector::zeros(1), 0.25);
        assert_eq!(ultrametric_bound(&h, 0, 0).unwrap(), 0.25);
    }

    #[test]
    fn ties_prefer_lower_edge_id() {
        let g = graph(3, &[(0, 1, 0.5), (1, 2, 0.5), (0, 2, 0.5)]);
        assert_eq!(kruskal_mst(&g).unwrap(), vec![0, 1]);
    }
}

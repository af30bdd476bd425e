//! Sink-rooted, loop-free multigraphs and the structural operations used by
//! the lacking-polynomial recurrence: deletion, general contraction, bridge
//! tests, tree-branch pruning and splitting at the sink.
//!
//! Vertices are dense indices. The sink is always index [`SINK`] (zero) and the
//! remaining vertices follow in sorted label order, so every graph built from
//! the same data has the same indexing.

use std::collections::{BTreeMap, VecDeque};

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::det::bareiss_determinant;
use crate::error::{Error, Result};

pub const SINK: usize = 0;

/// Separator used when naming a contracted vertex `x.y`.
pub const CONTRACTION_SEPARATOR: char = '.';

/// One edge entry of the JSON graph format: `["a","b"]` or `["a","b",k]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeSpec {
    Multi(String, String, usize),
    Simple(String, String),
}

impl EdgeSpec {
    pub fn parts(&self) -> (&str, &str, usize) {
        match self {
            EdgeSpec::Multi(a, b, k) => (a, b, *k),
            EdgeSpec::Simple(a, b) => (a, b, 1),
        }
    }
}

/// The on-disk graph format: `{"sink": "s", "edges": [["s","v1",1], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub sink: String,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiGraph {
    labels: Vec<String>,
    /// Multiplicity per unordered pair, keyed `(lo, hi)` with `lo < hi`.
    edges: BTreeMap<(usize, usize), usize>,
    /// Sorted `(neighbour, multiplicity)` lists.
    adj: Vec<Vec<(usize, usize)>>,
    degree: Vec<usize>,
}

fn key(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl MultiGraph {
    /// Builds and validates a graph from labelled edges `(a, b, multiplicity)`.
    /// The vertex set is the set of edge endpoints. Repeated pairs accumulate.
    pub fn build<S: AsRef<str>>(sink: &str, edges: &[(S, S, usize)]) -> Result<Self> {
        let mut labels: Vec<String> = vec![sink.to_owned()];
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for (a, b, k) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            if a == b {
                return Err(Error::LoopEdge(a.to_owned()));
            }
            if *k == 0 {
                return Err(Error::ZeroMultiplicity(a.to_owned(), b.to_owned()));
            }
            for l in [a, b] {
                if l != sink && !index.contains_key(l) {
                    index.insert(l, 0);
                }
            }
        }
        if !edges
            .iter()
            .any(|(a, b, _)| a.as_ref() == sink || b.as_ref() == sink)
        {
            return Err(Error::NoSink);
        }
        labels.extend(index.keys().map(|s| s.to_string()));
        let g = Self::from_parts(
            labels,
            edges.iter().map(|(a, b, k)| (a.as_ref(), b.as_ref(), *k)),
        )?;
        if !g.is_connected() {
            return Err(Error::NotConnected);
        }
        Ok(g)
    }

    pub fn from_spec(spec: &GraphSpec) -> Result<Self> {
        let edges: Vec<(&str, &str, usize)> = spec.edges.iter().map(EdgeSpec::parts).collect();
        Self::build(&spec.sink, &edges)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GraphSpec = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            sink: self.labels[SINK].clone(),
            edges: self
                .edges
                .iter()
                .map(|(&(u, v), &k)| {
                    EdgeSpec::Multi(self.labels[u].clone(), self.labels[v].clone(), k)
                })
                .collect(),
        }
    }

    /// Normalizing constructor shared by every operation. `labels[0]` is the
    /// sink; the others are re-sorted. Does not check connectivity.
    fn from_parts<'a>(
        labels: Vec<String>,
        edges: impl IntoIterator<Item = (&'a str, &'a str, usize)>,
    ) -> Result<Self> {
        let mut rest: Vec<String> = labels[1..].to_vec();
        rest.sort();
        let mut sorted = Vec::with_capacity(labels.len());
        sorted.push(labels[0].clone());
        sorted.extend(rest);
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, l) in sorted.iter().enumerate() {
            if index.insert(l.as_str(), i).is_some() {
                return Err(Error::DuplicateVertexLabel(l.clone()));
            }
        }
        let mut map = BTreeMap::new();
        for (a, b, k) in edges {
            let ia = *index
                .get(a)
                .ok_or_else(|| Error::UnknownVertex(a.to_owned()))?;
            let ib = *index
                .get(b)
                .ok_or_else(|| Error::UnknownVertex(b.to_owned()))?;
            if ia == ib {
                return Err(Error::LoopEdge(a.to_owned()));
            }
            if k > 0 {
                *map.entry(key(ia, ib)).or_insert(0) += k;
            }
        }
        Ok(Self::from_indexed(sorted, map))
    }

    fn from_indexed(labels: Vec<String>, edges: BTreeMap<(usize, usize), usize>) -> Self {
        let n = labels.len();
        let mut adj = vec![Vec::new(); n];
        let mut degree = vec![0; n];
        for (&(u, v), &k) in &edges {
            adj[u].push((v, k));
            adj[v].push((u, k));
            degree[u] += k;
            degree[v] += k;
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Self {
            labels,
            edges,
            adj,
            degree,
        }
    }

    /// Rebuilds with a new label list (sink first) and label-keyed edges.
    fn relabelled(&self, labels: Vec<String>, edges: Vec<(String, String, usize)>) -> Self {
        Self::from_parts(
            labels,
            edges.iter().map(|(a, b, k)| (a.as_str(), b.as_str(), *k)),
        )
        .expect("labels produced internally are unique and cover every edge")
    }

    /// Number of vertices including the sink.
    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    /// Number of non-sink vertices, `|V|`.
    pub fn non_sink_count(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn non_sink(&self) -> std::ops::Range<usize> {
        1..self.labels.len()
    }

    /// Number of edge copies, `|E|`.
    pub fn edge_count(&self) -> usize {
        self.edges.values().sum()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degree[v]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    pub fn multiplicity(&self, u: usize, v: usize) -> usize {
        self.edges.get(&key(u, v)).copied().unwrap_or(0)
    }

    /// Endpoint pairs `(lo, hi)` with their multiplicities, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = ((usize, usize), usize)> + '_ {
        self.edges.iter().map(|(&p, &k)| (p, k))
    }

    pub fn neighbours(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }

    /// Every edge copy as `(lo, hi)`, parallel copies adjacent, pairs in
    /// lexicographic order. Position in this list is the copy's edge id.
    pub fn edge_copies(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .flat_map(|(&p, &k)| std::iter::repeat_n(p, k))
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        self.reachable_from(SINK, None).iter().all(|&r| r)
    }

    /// BFS reachability, optionally ignoring one copy of the pair `skip`.
    fn reachable_from(&self, start: usize, skip: Option<(usize, usize)>) -> Vec<bool> {
        let mut seen = vec![false; self.vertex_count()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            for &(w, k) in &self.adj[u] {
                if seen[w] || (k == 1 && skip == Some(key(u, w))) {
                    continue;
                }
                seen[w] = true;
                queue.push_back(w);
            }
        }
        seen
    }

    fn check_inner_edge(&self, x: usize, y: usize) -> Result<(usize, usize)> {
        if x >= self.vertex_count() || y >= self.vertex_count() || self.multiplicity(x, y) == 0 {
            return Err(Error::NoSuchEdge(x, y));
        }
        if x == SINK || y == SINK {
            return Err(Error::SinkAdjacentEdge(x, y));
        }
        Ok(key(x, y))
    }

    /// `G \ e`: removes one copy of `{x, y}`. Neither endpoint may be the sink.
    /// The result may be disconnected if the copy was a bridge.
    pub fn delete_edge(&self, x: usize, y: usize) -> Result<Self> {
        let k = self.check_inner_edge(x, y)?;
        let mut edges = self.edges.clone();
        match edges.get_mut(&k) {
            Some(m) if *m > 1 => *m -= 1,
            _ => {
                edges.remove(&k);
            }
        }
        Ok(Self::from_indexed(self.labels.clone(), edges))
    }

    /// `G.e`: merges `x` and `y` into a vertex labelled `x.y` (lower index first),
    /// contracting one copy of `{x, y}`. The remaining `k - 1` parallel copies
    /// become edges between the merged vertex and the sink.
    pub fn contract_edge(&self, x: usize, y: usize) -> Result<Self> {
        let (a, b) = self.check_inner_edge(x, y)?;
        let mut merged = format!(
            "{}{}{}",
            self.labels[a], CONTRACTION_SEPARATOR, self.labels[b]
        );
        while self.labels.contains(&merged) {
            merged.push('\'');
        }
        let name = |v: usize| -> String {
            if v == a || v == b {
                merged.clone()
            } else {
                self.labels[v].clone()
            }
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        for (&(u, v), &k) in &self.edges {
            if (u, v) == (a, b) {
                if k > 1 {
                    edges.push((merged.clone(), self.labels[SINK].clone(), k - 1));
                }
            } else {
                edges.push((name(u), name(v), k));
            }
        }
        let labels: Vec<String> = std::iter::once(self.labels[SINK].clone())
            .chain(
                self.non_sink()
                    .filter(|&v| v != a && v != b)
                    .map(|v| self.labels[v].clone()),
            )
            .chain(std::iter::once(merged.clone()))
            .collect();
        Ok(self.relabelled(labels, edges))
    }

    /// True iff removing one copy of `{x, y}` disconnects the graph. A copy of a
    /// parallel pair is never a bridge.
    pub fn is_bridge(&self, x: usize, y: usize) -> Result<bool> {
        if x >= self.vertex_count() || y >= self.vertex_count() || self.multiplicity(x, y) == 0 {
            return Err(Error::NoSuchEdge(x, y));
        }
        if self.multiplicity(x, y) > 1 {
            return Ok(false);
        }
        Ok(!self.reachable_from(x, Some(key(x, y)))[y])
    }

    /// All pairs that are neither bridges nor incident to the sink, in lexicographic order.
    pub fn reducible_edges(&self) -> Vec<(usize, usize)> {
        self.edges
            .keys()
            .copied()
            .filter(|&(u, v)| u != SINK && v != SINK)
            .filter(|&(u, v)| !self.is_bridge(u, v).unwrap_or(true))
            .collect()
    }

    /// Lexicographically smallest reducible pair.
    pub fn find_reducible_edge(&self) -> Option<(usize, usize)> {
        self.edges
            .keys()
            .copied()
            .filter(|&(u, v)| u != SINK && v != SINK)
            .find(|&(u, v)| !self.is_bridge(u, v).unwrap_or(true))
    }

    /// Keeps the sink and the vertices flagged in `keep`, with every edge among them.
    fn induced(&self, keep: &[bool]) -> Self {
        let labels: Vec<String> = std::iter::once(self.labels[SINK].clone())
            .chain(
                self.non_sink()
                    .filter(|&v| keep[v])
                    .map(|v| self.labels[v].clone()),
            )
            .collect();
        let kept = |v: usize| v == SINK || keep[v];
        let edges = self
            .edges
            .iter()
            .filter(|(&(u, v), _)| kept(u) && kept(v))
            .map(|(&(u, v), &k)| (self.labels[u].clone(), self.labels[v].clone(), k))
            .collect();
        self.relabelled(labels, edges)
    }

    /// Removes all tree branches by repeatedly stripping non-sink vertices of
    /// degree at most one. The sink is never removed.
    pub fn prune_tree_branches(&self) -> Self {
        let mut degree = self.degree.clone();
        let mut keep = vec![true; self.vertex_count()];
        let mut stack: Vec<usize> = self.non_sink().filter(|&v| degree[v] <= 1).collect();
        while let Some(v) = stack.pop() {
            if !keep[v] {
                continue;
            }
            keep[v] = false;
            for &(w, k) in &self.adj[v] {
                if keep[w] {
                    degree[w] -= k;
                    if w != SINK && degree[w] <= 1 {
                        stack.push(w);
                    }
                }
            }
        }
        if keep.iter().all(|&k| k) {
            return self.clone();
        }
        self.induced(&keep)
    }

    /// Splits the graph into pieces that share only the sink. Pieces are ordered
    /// by their smallest vertex index. The sink-only graph has no pieces.
    pub fn sink_components(&self) -> Vec<Self> {
        let n = self.vertex_count();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for start in self.non_sink() {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &(w, _) in &self.adj[u] {
                    if w != SINK && comp[w] == usize::MAX {
                        comp[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        if count == 1 {
            return vec![self.clone()];
        }
        (0..count)
            .map(|c| {
                let keep: Vec<bool> = comp.iter().map(|&x| x == c).collect();
                self.induced(&keep)
            })
            .collect()
    }

    /// `|E| - |V|`, with `|V|` excluding the sink.
    pub fn cycle_count(&self) -> i64 {
        self.edge_count() as i64 - self.non_sink_count() as i64
    }

    /// Laplacian restricted to the non-sink vertices, over any signed scalar.
    pub fn reduced_laplacian<T: Clone + From<i64> + Zero>(&self) -> Vec<Vec<T>> {
        let n = self.non_sink_count();
        let mut m = vec![vec![T::zero(); n]; n];
        for v in self.non_sink() {
            m[v - 1][v - 1] = T::from(self.degree[v] as i64);
            for &(w, k) in &self.adj[v] {
                if w != SINK {
                    m[v - 1][w - 1] = T::from(-(k as i64));
                }
            }
        }
        m
    }

    /// Number of spanning trees (parallel copies counted separately), by the
    /// matrix-tree theorem with exact fraction-free elimination.
    pub fn spanning_tree_count(&self) -> BigUint {
        let det: BigInt = bareiss_determinant(self.reduced_laplacian::<BigInt>());
        det.to_biguint().unwrap_or_else(BigUint::zero)
    }

    /// Joins `other` to `self` at the sink; non-sink labels of `other` get `prefix`.
    pub fn glue_at_sink(&self, other: &Self, prefix: &str) -> Self {
        let relabel = |v: usize| -> String {
            if v == SINK {
                self.labels[SINK].clone()
            } else {
                format!("{prefix}{}", other.labels[v])
            }
        };
        let mut labels = self.labels.clone();
        labels.extend(other.non_sink().map(relabel));
        let mut edges: Vec<(String, String, usize)> = self
            .edges
            .iter()
            .map(|(&(u, v), &k)| (self.labels[u].clone(), self.labels[v].clone(), k))
            .collect();
        edges.extend(
            other
                .edges
                .iter()
                .map(|(&(u, v), &k)| (relabel(u), relabel(v), k)),
        );
        self.relabelled(labels, edges)
    }

    /// Adds a new vertex `label` joined to `at` by a single edge.
    pub fn with_pendant(&self, at: usize, label: &str) -> Result<Self> {
        if self.index_of(label).is_some() {
            return Err(Error::DuplicateVertexLabel(label.to_owned()));
        }
        let mut labels = self.labels.clone();
        labels.push(label.to_owned());
        let mut edges: Vec<(String, String, usize)> = self
            .edges
            .iter()
            .map(|(&(u, v), &k)| (self.labels[u].clone(), self.labels[v].clone(), k))
            .collect();
        edges.push((self.labels[at].clone(), label.to_owned(), 1));
        Ok(self.relabelled(labels, edges))
    }
}

impl std::fmt::Display for MultiGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "sink {}:", self.labels[SINK])?;
        for (&(u, v), &k) in &self.edges {
            write!(f, " {}-{}", self.labels[u], self.labels[v])?;
            if k > 1 {
                write!(f, "x{k}")?;
            }
        }
        Ok(())
    }
}

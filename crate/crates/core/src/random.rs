//! Seeded random graphs for property campaigns.

use rand::Rng;

use crate::multigraph::{MultiGraph, SINK};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomGraphParams {
    /// Largest number of non-sink vertices.
    pub max_vertices: usize,
    /// Largest number of edge copies.
    pub max_edges: usize,
    pub max_multiplicity: usize,
}

impl Default for RandomGraphParams {
    fn default() -> Self {
        Self {
            max_vertices: 5,
            max_edges: 7,
            max_multiplicity: 3,
        }
    }
}

fn vertex_label(i: usize) -> String {
    if i == SINK {
        "s".to_owned()
    } else {
        format!("v{i}")
    }
}

/// Uniform labelled tree on `n` vertices from a random Pruefer sequence.
fn random_tree<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &x in &seq {
        degree[x] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &x in &seq {
        let leaf = (0..n)
            .find(|&v| degree[v] == 1)
            .expect("a leaf always exists");
        edges.push((leaf, x));
        degree[leaf] -= 1;
        degree[x] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// A connected multigraph: a uniform spanning tree on the sink plus `1..=max_vertices`
/// vertices, topped up with random extra copies up to a random edge total.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, params: &RandomGraphParams) -> MultiGraph {
    let cap = params.max_vertices.min(params.max_edges).max(1);
    let n = rng.random_range(1..=cap);
    let mut mult = std::collections::BTreeMap::new();
    for (u, v) in random_tree(rng, n + 1) {
        *mult.entry((u.min(v), u.max(v))).or_insert(0usize) += 1;
    }
    let target = rng.random_range(n..=params.max_edges.max(n));
    let mut total = n;
    let mut attempts = 0;
    while total < target && attempts < 1000 {
        attempts += 1;
        let u = rng.random_range(0..=n);
        let v = rng.random_range(0..=n);
        if u == v {
            continue;
        }
        let k = mult.entry((u.min(v), u.max(v))).or_insert(0);
        if *k < params.max_multiplicity {
            *k += 1;
            total += 1;
        }
    }
    let edges: Vec<(String, String, usize)> = mult
        .into_iter()
        .filter(|&(_, k)| k > 0)
        .map(|((u, v), k)| (vertex_label(u), vertex_label(v), k))
        .collect();
    MultiGraph::build("s", &edges).expect("a spanning tree plus extra edges is connected")
}

/// Hangs a random tree with `size` new vertices off a random non-sink vertex.
pub fn attach_random_branch<R: Rng + ?Sized>(
    rng: &mut R,
    g: &MultiGraph,
    size: usize,
) -> MultiGraph {
    assert!(
        g.non_sink_count() > 0,
        "a tree branch needs a non-sink root"
    );
    let root = g.label(rng.random_range(1..g.vertex_count())).to_owned();
    let mut out = g.clone();
    let mut hung = vec![root];
    for i in 0..size {
        let mut label = format!("t{i}");
        while out.index_of(&label).is_some() {
            label.push('\'');
        }
        let parent = &hung[rng.random_range(0..hung.len())];
        let at = out.index_of(parent).expect("parent was added earlier");
        out = out.with_pendant(at, &label).expect("label is fresh");
        hung.push(label);
    }
    out
}

//! Deterministically (DR) and stochastically (SR) recurrent configurations.
//!
//! A stable configuration is SR iff some orientation of the edge copies gives
//! every non-sink vertex at least `1 + l(v)` incoming copies; it is DR iff
//! such an orientation can be chosen acyclic, equivalently iff it passes the
//! burning test. SR membership is decided here by a max-flow feasibility
//! problem, with exhaustive orientation enumeration and a reachability search
//! over the stochastic dynamics kept as independent checks.

use std::collections::{BTreeSet, HashSet, VecDeque};

use petgraph::algo::ford_fulkerson;
use petgraph::graph::{DiGraph, EdgeIndex};

use crate::error::{Error, Result};
use crate::multigraph::{MultiGraph, SINK};
use crate::sandpile::{check_len, check_stable, eta_max, lacking_vector, Configuration};

/// Bounds on the exponential enumerations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest `|E|` for which all `2^|E|` orientations are walked.
    pub max_edges: usize,
    /// Largest number of configurations a state-space walk may visit.
    pub max_states: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_edges: 24,
            max_states: 1 << 24,
        }
    }
}

impl Limits {
    fn check_edges(&self, g: &MultiGraph) -> Result<()> {
        let edges = g.edge_count();
        if edges > self.max_edges || edges >= 64 {
            return Err(Error::TooManyEdges {
                edges,
                bound: self.max_edges,
            });
        }
        Ok(())
    }

    fn check_states(&self, size: u128) -> Result<()> {
        if size > self.max_states {
            return Err(Error::StateSpaceTooLarge {
                size,
                bound: self.max_states,
            });
        }
        Ok(())
    }
}

/// A direction for every edge copy of a graph, in [`MultiGraph::edge_copies`]
/// order. `true` means the copy points from its lower-index endpoint to the
/// higher one (so a sink copy with `true` points away from the sink).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Orientation {
    toward_hi: Vec<bool>,
}

impl Orientation {
    pub fn new(toward_hi: Vec<bool>) -> Self {
        Self { toward_hi }
    }

    /// Bit `i` of `mask` is the direction of edge copy `i`.
    pub fn from_mask(g: &MultiGraph, mask: u64) -> Self {
        Self {
            toward_hi: (0..g.edge_count()).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    /// Builds an orientation from a list of arcs `(from, to)`, one per edge copy.
    pub fn from_arcs(g: &MultiGraph, arcs: &[(usize, usize)]) -> Result<Self> {
        let copies = g.edge_copies();
        let mut used = vec![false; copies.len()];
        let mut toward_hi = vec![true; copies.len()];
        for &(from, to) in arcs {
            let k = (from.min(to), from.max(to));
            let slot = (0..copies.len())
                .find(|&i| !used[i] && copies[i] == k)
                .ok_or(Error::NoSuchEdge(from, to))?;
            used[slot] = true;
            toward_hi[slot] = to > from;
        }
        if used.iter().any(|u| !u) {
            return Err(Error::InvalidParams(
                "orientation must direct every edge copy".into(),
            ));
        }
        Ok(Self { toward_hi })
    }

    pub fn directions(&self) -> &[bool] {
        &self.toward_hi
    }

    /// `(from, to)` for every edge copy.
    pub fn arcs(&self, g: &MultiGraph) -> Vec<(usize, usize)> {
        g.edge_copies()
            .into_iter()
            .zip(&self.toward_hi)
            .map(|((lo, hi), &up)| if up { (lo, hi) } else { (hi, lo) })
            .collect()
    }

    /// Indegree of every vertex, sink included.
    pub fn indegrees(&self, g: &MultiGraph) -> Vec<usize> {
        let mut deg = vec![0; g.vertex_count()];
        for (_, to) in self.arcs(g) {
            deg[to] += 1;
        }
        deg
    }
}

pub fn indegree(g: &MultiGraph, o: &Orientation, v: usize) -> usize {
    o.indegrees(g)[v]
}

/// True iff `in(v) >= 1 + l(v)` at every non-sink vertex.
pub fn is_compatible(g: &MultiGraph, eta: &Configuration, o: &Orientation) -> Result<bool> {
    let lack = lacking_vector(g, eta)?;
    let indeg = o.indegrees(g);
    Ok(g.non_sink().all(|v| indeg[v] > lack[v - 1] as usize))
}

/// Walks the stable configurations of `g` in mixed-radix order over
/// `0..=d(v)` per vertex, the first vertex most significant.
pub fn stable_configurations(g: &MultiGraph, limits: &Limits) -> Result<Vec<Configuration>> {
    let size: u128 = g.non_sink().map(|v| g.degree(v) as u128 + 1).product();
    limits.check_states(size)?;
    let degrees: Vec<u32> = g.non_sink().map(|v| g.degree(v) as u32).collect();
    Ok(boxes(&vec![0; degrees.len()], &degrees).collect())
}

/// Every configuration with `lo[i] <= c[i] <= hi[i]`, in lexicographic order.
fn boxes<'a>(lo: &'a [u32], hi: &'a [u32]) -> impl Iterator<Item = Configuration> + 'a {
    let empty = lo.iter().zip(hi).any(|(l, h)| l > h);
    let mut current: Option<Vec<u32>> = if empty { None } else { Some(lo.to_vec()) };
    std::iter::from_fn(move || {
        let out = current.clone()?;
        let mut next = out.clone();
        let mut i = next.len();
        loop {
            if i == 0 {
                current = None;
                break;
            }
            i -= 1;
            if next[i] < hi[i] {
                next[i] += 1;
                current = Some(next);
                break;
            }
            next[i] = lo[i];
        }
        Some(Configuration::new(out))
    })
}

fn comp_box(g: &MultiGraph, indeg: &[usize]) -> Option<(Vec<u32>, Vec<u32>)> {
    let mut lo = Vec::with_capacity(g.non_sink_count());
    let mut hi = Vec::with_capacity(g.non_sink_count());
    for v in g.non_sink() {
        if indeg[v] == 0 {
            return None;
        }
        let d = g.degree(v);
        lo.push((d + 1).saturating_sub(indeg[v]) as u32);
        hi.push(d as u32);
    }
    Some((lo, hi))
}

/// `comp(O)`: the stable configurations compatible with `o`, a box
/// `max(0, d(v) - in(v) + 1) <= eta_v <= d(v)`; empty if some `in(v) = 0`.
pub fn comp_set(g: &MultiGraph, o: &Orientation) -> BTreeSet<Configuration> {
    match comp_box(g, &o.indegrees(g)) {
        Some((lo, hi)) => boxes(&lo, &hi).collect(),
        None => BTreeSet::new(),
    }
}

/// Visits every orientation as a bitmask in Gray-code order, passing the
/// current mask and the indegree vector (sink included).
fn for_each_orientation(g: &MultiGraph, mut visit: impl FnMut(u64, &[usize])) {
    let copies = g.edge_copies();
    let mut indeg = vec![0usize; g.vertex_count()];
    for &(lo, _) in &copies {
        indeg[lo] += 1;
    }
    let mut mask = 0u64;
    visit(mask, &indeg);
    for i in 1u64..(1u64 << copies.len()) {
        let bit = i.trailing_zeros() as usize;
        let (lo, hi) = copies[bit];
        mask ^= 1 << bit;
        if mask >> bit & 1 == 1 {
            indeg[lo] -= 1;
            indeg[hi] += 1;
        } else {
            indeg[hi] -= 1;
            indeg[lo] += 1;
        }
        visit(mask, &indeg);
    }
}

/// `Sto(G)` as the union of `comp(O)` over all orientations.
pub fn sto_enumerate(g: &MultiGraph, limits: &Limits) -> Result<BTreeSet<Configuration>> {
    limits.check_edges(g)?;
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    for_each_orientation(g, |_, indeg| {
        if g.non_sink().all(|v| indeg[v] > 0) {
            seen.insert(indeg.to_vec());
        }
    });
    let mut out = BTreeSet::new();
    for indeg in seen {
        if let Some((lo, hi)) = comp_box(g, &indeg) {
            out.extend(boxes(&lo, &hi));
        }
    }
    Ok(out)
}

/// Answer of [`is_sr`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrMembership {
    pub member: bool,
    /// A compatible orientation when `member` holds.
    pub witness: Option<Orientation>,
}

/// Decides whether some orientation gives each non-sink vertex at least
/// `demand[v]` incoming copies (`demand` indexed by vertex, sink ignored),
/// with one copy of `forced = (from, to)` fixed in advance. Returns a witness.
///
/// Network: source -> pair node (capacity = free copies) -> endpoint -> target
/// (capacity = demand). Feasible iff the max flow meets the total demand.
fn orientation_with_demands(
    g: &MultiGraph,
    demand: &[usize],
    forced: Option<(usize, usize)>,
) -> Option<Orientation> {
    let mut demand = demand.to_vec();
    if let Some((_, to)) = forced {
        demand[to] = demand[to].saturating_sub(1);
    }
    if g.non_sink().any(|v| demand[v] > g.degree(v)) {
        return None;
    }
    let needed: usize = g.non_sink().map(|v| demand[v]).sum();

    let mut net: DiGraph<(), u32> = DiGraph::new();
    let source = net.add_node(());
    let target = net.add_node(());
    let vertex_nodes: Vec<_> = (0..g.vertex_count()).map(|_| net.add_node(())).collect();
    for v in g.non_sink() {
        if demand[v] > 0 {
            net.add_edge(vertex_nodes[v], target, demand[v] as u32);
        }
    }
    let forced_key = forced.map(|(a, b)| (a.min(b), a.max(b)));
    // (pair, arc into lo, free copies)
    let mut pair_edges: Vec<((usize, usize), Option<EdgeIndex>, usize)> = Vec::new();
    for ((lo, hi), k) in g.pairs() {
        let free = if Some((lo, hi)) == forced_key {
            k - 1
        } else {
            k
        };
        if free == 0 {
            pair_edges.push(((lo, hi), None, 0));
            continue;
        }
        let node = net.add_node(());
        net.add_edge(source, node, free as u32);
        let to_lo = (lo != SINK).then(|| net.add_edge(node, vertex_nodes[lo], free as u32));
        net.add_edge(node, vertex_nodes[hi], free as u32);
        pair_edges.push(((lo, hi), to_lo, free));
    }
    let (flow, flows) = ford_fulkerson(&net, source, target);
    if flow as usize != needed {
        return None;
    }

    let mut toward_hi = Vec::with_capacity(g.edge_count());
    // Copies carrying no flow default to pointing at the higher index.
    for ((lo, hi), to_lo, free) in pair_edges {
        let into_lo = to_lo.map_or(0, |e| flows[e.index()] as usize);
        let mut copies = vec![false; into_lo];
        copies.resize(free, true);
        if Some((lo, hi)) == forced_key {
            let (from, _) = forced.expect("forced key implies forced arc");
            copies.insert(0, from == lo);
        }
        toward_hi.extend(copies);
    }
    Some(Orientation::new(toward_hi))
}

fn demands(g: &MultiGraph, eta: &Configuration) -> Result<Vec<usize>> {
    let lack = lacking_vector(g, eta)?;
    let mut demand = vec![0; g.vertex_count()];
    for v in g.non_sink() {
        demand[v] = 1 + lack[v - 1] as usize;
    }
    Ok(demand)
}

/// SR membership by flow feasibility, with a compatible orientation as witness.
pub fn is_sr(g: &MultiGraph, eta: &Configuration) -> Result<SrMembership> {
    let demand = demands(g, eta)?;
    let witness = orientation_with_demands(g, &demand, None);
    Ok(SrMembership {
        member: witness.is_some(),
        witness,
    })
}

/// SR membership restricted to orientations in which one copy of `{from, to}`
/// points `from -> to`. Returns a witness when one exists.
pub fn compatible_with_forced_arc(
    g: &MultiGraph,
    eta: &Configuration,
    from: usize,
    to: usize,
) -> Result<Option<Orientation>> {
    let demand = demands(g, eta)?;
    if g.multiplicity(from, to) == 0 {
        return Err(Error::NoSuchEdge(from, to));
    }
    Ok(orientation_with_demands(g, &demand, Some((from, to))))
}

/// Result of the burning algorithm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Burning {
    pub recurrent: bool,
    /// Burnt vertices in burning order, starting with the sink.
    pub order: Vec<usize>,
}

/// Burning algorithm: starting from the sink, burn any vertex holding more
/// grains than it has edge copies to unburnt vertices. Always burns the
/// smallest eligible index.
pub fn burning_test(g: &MultiGraph, eta: &Configuration) -> Result<Burning> {
    burning_test_with(g, eta, |eligible| eligible[0])
}

/// Burning algorithm with a caller-chosen pick among the eligible vertices
/// (`choose` receives them in increasing order and returns one).
pub fn burning_test_with(
    g: &MultiGraph,
    eta: &Configuration,
    mut choose: impl FnMut(&[usize]) -> usize,
) -> Result<Burning> {
    check_stable(g, eta)?;
    let mut burnt = vec![false; g.vertex_count()];
    burnt[SINK] = true;
    let mut unburnt_edges: Vec<usize> = (0..g.vertex_count())
        .map(|v| {
            g.neighbours(v)
                .iter()
                .filter(|&&(w, _)| w != SINK)
                .map(|&(_, k)| k)
                .sum()
        })
        .collect();
    let mut order = vec![SINK];
    loop {
        let eligible: Vec<usize> = g
            .non_sink()
            .filter(|&v| !burnt[v] && eta.grains(v) as usize > unburnt_edges[v])
            .collect();
        if eligible.is_empty() {
            break;
        }
        let v = choose(&eligible);
        debug_assert!(eligible.contains(&v));
        burnt[v] = true;
        order.push(v);
        for &(w, k) in g.neighbours(v) {
            unburnt_edges[w] -= k;
        }
    }
    Ok(Burning {
        recurrent: order.len() == g.vertex_count(),
        order,
    })
}

/// Kahn elimination over all vertices, sink included.
fn is_acyclic_mask(g: &MultiGraph, copies: &[(usize, usize)], mask: u64, indeg: &[usize]) -> bool {
    let n = g.vertex_count();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &(lo, hi)) in copies.iter().enumerate() {
        if mask >> i & 1 == 1 {
            out[lo].push(hi);
        } else {
            out[hi].push(lo);
        }
    }
    let mut indeg = indeg.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut removed = 0;
    while let Some(v) = stack.pop() {
        removed += 1;
        for &w in &out[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                stack.push(w);
            }
        }
    }
    removed == n
}

pub fn is_acyclic(g: &MultiGraph, o: &Orientation) -> bool {
    let mask = o
        .directions()
        .iter()
        .enumerate()
        .fold(0u64, |m, (i, &b)| m | (u64::from(b) << i));
    is_acyclic_mask(g, &g.edge_copies(), mask, &o.indegrees(g))
}

/// DR membership by searching for a compatible acyclic orientation.
pub fn is_dr_via_acyclic(g: &MultiGraph, eta: &Configuration, limits: &Limits) -> Result<bool> {
    let lack = lacking_vector(g, eta)?;
    limits.check_edges(g)?;
    let copies = g.edge_copies();
    let mut found = false;
    for_each_orientation(g, |mask, indeg| {
        if !found
            && g.non_sink().all(|v| indeg[v] > lack[v - 1] as usize)
            && is_acyclic_mask(g, &copies, mask, indeg)
        {
            found = true;
        }
    });
    Ok(found)
}

/// `Det(G)`: every stable configuration passing the burning test.
pub fn det_enumerate(g: &MultiGraph, limits: &Limits) -> Result<BTreeSet<Configuration>> {
    let mut out = BTreeSet::new();
    for eta in stable_configurations(g, limits)? {
        if burning_test(g, &eta)?.recurrent {
            out.insert(eta);
        }
    }
    Ok(out)
}

/// `Sto(G)` computed from the dynamics alone: the stable configurations
/// reachable from the maximal one when each step adds a grain anywhere and an
/// unstable vertex may send grains along any nonempty subset of its edge
/// copies. Makes no use of orientations.
pub fn sto_reachability_oracle(g: &MultiGraph, limits: &Limits) -> Result<BTreeSet<Configuration>> {
    let size: u128 = g.non_sink().map(|v| g.degree(v) as u128 + 1).product();
    limits.check_states(size)?;
    let start = eta_max(g);
    check_len(g, &start)?;
    let grain_bound = start.total() + 1;

    let mut visited: HashSet<Vec<u32>> = HashSet::new();
    let mut stable = BTreeSet::new();
    let mut queue = VecDeque::new();
    visited.insert(start.as_slice().to_vec());
    queue.push_back(start.as_slice().to_vec());

    while let Some(state) = queue.pop_front() {
        if visited.len() as u128 > limits.max_states {
            return Err(Error::StateSpaceTooLarge {
                size: visited.len() as u128,
                bound: limits.max_states,
            });
        }
        let unstable: Vec<usize> = g
            .non_sink()
            .filter(|&v| state[v - 1] as usize > g.degree(v))
            .collect();
        let mut push = |next: Vec<u32>| {
            debug_assert!(next.iter().map(|&x| u64::from(x)).sum::<u64>() <= grain_bound);
            if visited.insert(next.clone()) {
                queue.push_back(next);
            }
        };
        if unstable.is_empty() {
            stable.insert(Configuration::new(state.clone()));
            for v in g.non_sink() {
                let mut next = state.clone();
                next[v - 1] += 1;
                push(next);
            }
            continue;
        }
        for x in unstable {
            let nbrs = g.neighbours(x);
            // Mixed-radix walk over how many copies of each neighbour pair fire.
            let mut counts = vec![0usize; nbrs.len()];
            loop {
                let mut i = 0;
                while i < counts.len() && counts[i] == nbrs[i].1 {
                    counts[i] = 0;
                    i += 1;
                }
                if i == counts.len() {
                    break;
                }
                counts[i] += 1;
                let mut next = state.clone();
                for (&(w, _), &c) in nbrs.iter().zip(&counts) {
                    next[x - 1] -= c as u32;
                    if w != SINK {
                        next[w - 1] += c as u32;
                    }
                }
                push(next);
            }
        }
    }
    Ok(stable)
}

//! Configurations and toppling dynamics.
//!
//! Deterministic topplings (ASM) send one grain along every incident edge
//! copy. Stochastic topplings (SSM) send one grain along each incident copy
//! independently with probability `p`, so a toppling may move nothing. Grains
//! sent to the sink are counted and discarded.

use std::collections::{BTreeMap, VecDeque};

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Bernoulli, Distribution};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::multigraph::{MultiGraph, SINK};

/// Name of the generator behind [`run_chain`], recorded in its output.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// Default cap on topplings per stabilisation.
pub const DEFAULT_MAX_TOPPLINGS: u64 = 10_000_000;

/// Grain counts on the non-sink vertices: entry `i` belongs to vertex `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(Vec<u32>);

impl Configuration {
    pub fn new(grains: Vec<u32>) -> Self {
        Self(grains)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// Grains on vertex `v` (a non-sink vertex index).
    pub fn grains(&self, v: usize) -> u32 {
        self.0[v - 1]
    }

    pub fn set(&mut self, v: usize, value: u32) {
        self.0[v - 1] = value;
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&g| u64::from(g)).sum()
    }
}

impl From<Vec<u32>> for Configuration {
    fn from(v: Vec<u32>) -> Self {
        Self(v)
    }
}

impl std::fmt::Display for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, g) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{g}")?;
        }
        write!(f, "]")
    }
}

pub(crate) fn check_len(g: &MultiGraph, eta: &Configuration) -> Result<()> {
    if eta.len() != g.non_sink_count() {
        return Err(Error::LengthMismatch {
            expected: g.non_sink_count(),
            got: eta.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_stable(g: &MultiGraph, eta: &Configuration) -> Result<()> {
    check_len(g, eta)?;
    if !is_stable(g, eta) {
        return Err(Error::UnstableConfiguration);
    }
    Ok(())
}

/// `eta_v <= d(v)` at every non-sink vertex.
pub fn is_stable(g: &MultiGraph, eta: &Configuration) -> bool {
    g.non_sink().all(|v| eta.grains(v) as usize <= g.degree(v))
}

/// The degree vector, the largest stable configuration.
pub fn eta_max(g: &MultiGraph) -> Configuration {
    Configuration(g.non_sink().map(|v| g.degree(v) as u32).collect())
}

/// `d(v) - eta_v` for a stable configuration.
pub fn lacking_number(g: &MultiGraph, eta: &Configuration, v: usize) -> Result<u32> {
    check_stable(g, eta)?;
    if v == SINK {
        return Err(Error::SinkVertex(v));
    }
    Ok(g.degree(v) as u32 - eta.grains(v))
}

/// Per-vertex lacking numbers, indexed like the configuration.
pub fn lacking_vector(g: &MultiGraph, eta: &Configuration) -> Result<Vec<u32>> {
    check_stable(g, eta)?;
    Ok(g.non_sink()
        .map(|v| g.degree(v) as u32 - eta.grains(v))
        .collect())
}

/// Sum of the lacking numbers.
pub fn total_lacking(g: &MultiGraph, eta: &Configuration) -> Result<u32> {
    Ok(lacking_vector(g, eta)?.iter().sum())
}

/// `eta + 1_v`.
pub fn add_grain(eta: &Configuration, v: usize) -> Result<Configuration> {
    if v == SINK {
        return Err(Error::SinkVertex(v));
    }
    if v > eta.len() {
        return Err(Error::InvalidParams(format!("vertex {v} out of range")));
    }
    let mut out = eta.clone();
    out.0[v - 1] += 1;
    Ok(out)
}

fn is_unstable_at(g: &MultiGraph, grains: &[u32], v: usize) -> bool {
    grains[v - 1] as usize > g.degree(v)
}

/// Full toppling in place; returns the grains absorbed by the sink.
fn full_topple(g: &MultiGraph, grains: &mut [u32], x: usize) -> u64 {
    grains[x - 1] -= g.degree(x) as u32;
    let mut to_sink = 0;
    for &(w, k) in g.neighbours(x) {
        if w == SINK {
            to_sink += k as u64;
        } else {
            grains[w - 1] += k as u32;
        }
    }
    to_sink
}

/// Deterministic toppling at `x`. Only legal when `eta_x > d(x)`.
pub fn topple_asm(g: &MultiGraph, eta: &Configuration, x: usize) -> Result<Configuration> {
    check_len(g, eta)?;
    if x == SINK || x >= g.vertex_count() || !is_unstable_at(g, &eta.0, x) {
        return Err(Error::IllegalToppling(x));
    }
    let mut out = eta.clone();
    full_topple(g, &mut out.0, x);
    Ok(out)
}

/// Result of a stabilisation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stabilized {
    pub config: Configuration,
    pub topplings: u64,
    pub to_sink: u64,
}

/// Stabilises by repeatedly toppling the smallest unstable vertex.
pub fn stabilize_asm(g: &MultiGraph, eta: &Configuration) -> Result<Stabilized> {
    check_len(g, eta)?;
    let mut grains = eta.0.clone();
    let mut topplings = 0;
    let mut to_sink = 0;
    let mut queue: VecDeque<usize> = g
        .non_sink()
        .filter(|&v| is_unstable_at(g, &grains, v))
        .collect();
    while let Some(x) = queue.pop_front() {
        while is_unstable_at(g, &grains, x) {
            to_sink += full_topple(g, &mut grains, x);
            topplings += 1;
        }
        for &(w, _) in g.neighbours(x) {
            if w != SINK && is_unstable_at(g, &grains, w) && !queue.contains(&w) {
                queue.push_back(w);
            }
        }
    }
    Ok(Stabilized {
        config: Configuration(grains),
        topplings,
        to_sink,
    })
}

/// The incident edge copies of `x`, as the neighbour at the other end, in
/// neighbour order with parallel copies adjacent.
pub fn incident_copies(g: &MultiGraph, x: usize) -> Vec<usize> {
    g.neighbours(x)
        .iter()
        .flat_map(|&(w, k)| std::iter::repeat_n(w, k))
        .collect()
}

/// Outcome of one stochastic toppling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsmToppling {
    pub config: Configuration,
    /// One flag per entry of [`incident_copies`]: whether a grain moved along it.
    pub fired: Vec<bool>,
    pub to_sink: u64,
}

fn stochastic_topple<R: Rng + ?Sized>(
    g: &MultiGraph,
    grains: &mut [u32],
    x: usize,
    coin: &Bernoulli,
    rng: &mut R,
    mut record: impl FnMut(bool),
) -> u64 {
    let mut to_sink = 0;
    for &(w, k) in g.neighbours(x) {
        for _ in 0..k {
            let fire = coin.sample(rng);
            record(fire);
            if fire {
                grains[x - 1] -= 1;
                if w == SINK {
                    to_sink += 1;
                } else {
                    grains[w - 1] += 1;
                }
            }
        }
    }
    to_sink
}

fn coin(p: f64) -> Result<Bernoulli> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "p must lie in (0, 1], got {p}"
        )));
    }
    Bernoulli::new(p).map_err(|e| Error::InvalidParams(e.to_string()))
}

/// Stochastic toppling at `x` with firing probability `p`.
pub fn topple_ssm<R: Rng + ?Sized>(
    g: &MultiGraph,
    eta: &Configuration,
    x: usize,
    p: f64,
    rng: &mut R,
) -> Result<SsmToppling> {
    check_len(g, eta)?;
    if x == SINK || x >= g.vertex_count() || !is_unstable_at(g, &eta.0, x) {
        return Err(Error::IllegalToppling(x));
    }
    let coin = coin(p)?;
    let mut grains = eta.0.clone();
    let mut fired = Vec::with_capacity(g.degree(x));
    let to_sink = stochastic_topple(g, &mut grains, x, &coin, rng, |f| fired.push(f));
    Ok(SsmToppling {
        config: Configuration(grains),
        fired,
        to_sink,
    })
}

/// Which unstable vertex a stochastic stabilisation topples next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopplingPolicy {
    /// Queue of unstable vertices; a vertex still unstable after toppling goes to the back.
    #[default]
    Fifo,
    /// Uniformly random unstable vertex at each toppling.
    RandomEligible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticParams {
    pub p: f64,
    /// Grain-addition weights per non-sink vertex; all strictly positive.
    pub mu: Vec<f64>,
    pub seed: u64,
    pub max_topplings: u64,
    pub policy: TopplingPolicy,
}

impl StochasticParams {
    pub fn uniform(g: &MultiGraph, p: f64, seed: u64) -> Self {
        Self {
            p,
            mu: vec![1.0; g.non_sink_count()],
            seed,
            max_topplings: DEFAULT_MAX_TOPPLINGS,
            policy: TopplingPolicy::Fifo,
        }
    }

    pub fn validate(&self, g: &MultiGraph) -> Result<()> {
        coin(self.p)?;
        if self.mu.len() != g.non_sink_count() {
            return Err(Error::InvalidParams(format!(
                "mu has {} weights, graph has {} non-sink vertices",
                self.mu.len(),
                g.non_sink_count()
            )));
        }
        if self.mu.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParams(
                "mu weights must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Stochastic stabilisation in place; returns `(topplings, to_sink)`.
fn stabilize_ssm_in_place<R: Rng + ?Sized>(
    g: &MultiGraph,
    grains: &mut [u32],
    coin: &Bernoulli,
    policy: TopplingPolicy,
    cap: u64,
    rng: &mut R,
) -> Result<(u64, u64)> {
    let mut topplings = 0u64;
    let mut to_sink = 0u64;
    match policy {
        TopplingPolicy::Fifo => {
            let mut queued = vec![false; g.vertex_count()];
            let mut queue = VecDeque::new();
            for v in g.non_sink() {
                if is_unstable_at(g, grains, v) {
                    queued[v] = true;
                    queue.push_back(v);
                }
            }
            while let Some(x) = queue.pop_front() {
                queued[x] = false;
                if topplings >= cap {
                    return Err(Error::SafetyCapExceeded(cap));
                }
                to_sink += stochastic_topple(g, grains, x, coin, rng, |_| ());
                topplings += 1;
                for &(w, _) in g.neighbours(x) {
                    if w != SINK && !queued[w] && is_unstable_at(g, grains, w) {
                        queued[w] = true;
                        queue.push_back(w);
                    }
                }
                if is_unstable_at(g, grains, x) {
                    queued[x] = true;
                    queue.push_back(x);
                }
            }
        }
        TopplingPolicy::RandomEligible => {
            let mut unstable: Vec<usize> = Vec::with_capacity(g.non_sink_count());
            loop {
                unstable.clear();
                unstable.extend(g.non_sink().filter(|&v| is_unstable_at(g, grains, v)));
                if unstable.is_empty() {
                    break;
                }
                if topplings >= cap {
                    return Err(Error::SafetyCapExceeded(cap));
                }
                let x = unstable[rng.random_range(0..unstable.len())];
                to_sink += stochastic_topple(g, grains, x, coin, rng, |_| ());
                topplings += 1;
            }
        }
    }
    Ok((topplings, to_sink))
}

/// Applies stochastic topplings until stable, following `params.policy`.
/// Fails with `SafetyCapExceeded` after `params.max_topplings` topplings.
pub fn stabilize_ssm<R: Rng + ?Sized>(
    g: &MultiGraph,
    eta: &Configuration,
    params: &StochasticParams,
    rng: &mut R,
) -> Result<Stabilized> {
    check_len(g, eta)?;
    let coin = coin(params.p)?;
    let mut grains = eta.0.clone();
    let (topplings, to_sink) = stabilize_ssm_in_place(
        g,
        &mut grains,
        &coin,
        params.policy,
        params.max_topplings,
        rng,
    )?;
    Ok(Stabilized {
        config: Configuration(grains),
        topplings,
        to_sink,
    })
}

/// Occupancy histogram and toppling statistics of a seeded chain run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainStats {
    pub rng: &'static str,
    pub seed: u64,
    pub p: f64,
    pub mu: Vec<f64>,
    pub policy: TopplingPolicy,
    pub burn_in: u64,
    /// Recorded steps (after burn-in); the occupancy counts sum to this.
    pub steps: u64,
    #[serde(serialize_with = "serialize_occupancy")]
    pub occupancy: BTreeMap<Configuration, u64>,
    pub topplings_mean: f64,
    pub topplings_max: u64,
    /// Grains absorbed by the sink during recorded steps.
    pub grains_to_sink: u64,
}

fn serialize_occupancy<S: Serializer>(
    occupancy: &BTreeMap<Configuration, u64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Entry<'a> {
        config: &'a Configuration,
        count: u64,
    }
    s.collect_seq(
        occupancy
            .iter()
            .map(|(config, &count)| Entry { config, count }),
    )
}

impl ChainStats {
    /// Occupancy as frequencies.
    pub fn distribution(&self) -> BTreeMap<Configuration, f64> {
        self.occupancy
            .iter()
            .map(|(c, &n)| (c.clone(), n as f64 / self.steps.max(1) as f64))
            .collect()
    }
}

/// Runs `burn_in + steps` grain additions from a stable `start`, each site
/// drawn from `params.mu` and followed by stochastic stabilisation, and
/// records the last `steps` states. Reproducible from `params.seed`.
pub fn run_chain(
    g: &MultiGraph,
    start: &Configuration,
    params: &StochasticParams,
    steps: u64,
    burn_in: u64,
) -> Result<ChainStats> {
    check_stable(g, start)?;
    params.validate(g)?;
    let coin = coin(params.p)?;
    let sites = WeightedIndex::new(&params.mu).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut grains = start.0.clone();
    let mut occupancy = BTreeMap::new();
    let mut topplings_total = 0u64;
    let mut topplings_max = 0u64;
    let mut grains_to_sink = 0u64;
    for step in 0..burn_in + steps {
        let v = sites.sample(&mut rng) + 1;
        grains[v - 1] += 1;
        let (topplings, to_sink) = stabilize_ssm_in_place(
            g,
            &mut grains,
            &coin,
            params.policy,
            params.max_topplings,
            &mut rng,
        )?;
        if step >= burn_in {
            topplings_total += topplings;
            topplings_max = topplings_max.max(topplings);
            grains_to_sink += to_sink;
            *occupancy.entry(Configuration(grains.clone())).or_insert(0) += 1;
        }
    }
    Ok(ChainStats {
        rng: RNG_NAME,
        seed: params.seed,
        p: params.p,
        mu: params.mu.clone(),
        policy: params.policy,
        burn_in,
        steps,
        occupancy,
        topplings_mean: if steps == 0 {
            0.0
        } else {
            topplings_total as f64 / steps as f64
        },
        topplings_max,
        grains_to_sink,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> MultiGraph {
        MultiGraph::build(
            "s",
            &[
                ("s", "v1", 1),
                ("v1", "v2", 1),
                ("v1", "v3", 1),
                ("v2", "v3", 1),
            ],
        )
        .unwrap()
    }

    fn cfg(v: &[u32]) -> Configuration {
        Configuration::new(v.to_vec())
    }

    #[test]
    fn stability() {
        let g = triangle();
        assert!(is_stable(&g, &cfg(&[3, 2, 2])));
        assert!(!is_stable(&g, &cfg(&[4, 2, 2])));
        assert!(is_stable(&g, &cfg(&[0, 0, 0])));
        assert_eq!(eta_max(&g), cfg(&[3, 2, 2]));
        let bundle = MultiGraph::build("s", &[("s", "u", 3)]).unwrap();
        assert_eq!(eta_max(&bundle), cfg(&[3]));
    }

    #[test]
    fn lacking_numbers() {
        let g = triangle();
        assert_eq!(lacking_vector(&g, &cfg(&[2, 2, 2])).unwrap(), vec![1, 0, 0]);
        assert_eq!(total_lacking(&g, &cfg(&[2, 2, 2])).unwrap(), 1);
        assert_eq!(lacking_number(&g, &cfg(&[2, 2, 2]), 1).unwrap(), 1);
        assert_eq!(total_lacking(&g, &eta_max(&g)).unwrap(), 0);
        assert_eq!(
            total_lacking(&g, &cfg(&[4, 2, 2])).unwrap_err(),
            Error::UnstableConfiguration
        );
        assert!(matches!(
            total_lacking(&g, &cfg(&[1, 2])).unwrap_err(),
            Error::LengthMismatch { .. }
        ));
    }

    #[test]
    fn grain_addition() {
        assert_eq!(add_grain(&cfg(&[3, 2, 2]), 1).unwrap(), cfg(&[4, 2, 2]));
        assert_eq!(add_grain(&cfg(&[0, 0, 0]), 3).unwrap(), cfg(&[0, 0, 1]));
        let twice = add_grain(&add_grain(&cfg(&[2, 2, 2]), 1).unwrap(), 1).unwrap();
        assert_eq!(twice, cfg(&[4, 2, 2]));
        assert_eq!(
            add_grain(&cfg(&[0]), SINK).unwrap_err(),
            Error::SinkVertex(0)
        );
    }

    #[test]
    fn asm_topplings() {
        let g = triangle();
        assert_eq!(
            topple_asm(&g, &cfg(&[4, 2, 2]), 1).unwrap(),
            cfg(&[1, 3, 3])
        );
        assert_eq!(
            topple_asm(&g, &cfg(&[1, 3, 3]), 2).unwrap(),
            cfg(&[2, 1, 4])
        );
        assert_eq!(
            topple_asm(&g, &cfg(&[3, 2, 2]), 1).unwrap_err(),
            Error::IllegalToppling(1)
        );
    }

    #[test]
    fn asm_stabilisation() {
        let g = triangle();
        let s = stabilize_asm(&g, &cfg(&[4, 2, 2])).unwrap();
        assert_eq!(s.config, cfg(&[3, 2, 2]));
        assert_eq!(s.topplings, 3);
        assert_eq!(s.to_sink, 1);
        let already = stabilize_asm(&g, &cfg(&[1, 1, 1])).unwrap();
        assert_eq!((already.config, already.topplings), (cfg(&[1, 1, 1]), 0));
        let bundle = MultiGraph::build("s", &[("s", "u", 3)]).unwrap();
        let s = stabilize_asm(&bundle, &cfg(&[5])).unwrap();
        assert_eq!((s.config, s.topplings), (cfg(&[2]), 1));
    }

    #[test]
    fn ssm_with_p_one_is_full_toppling() {
        let g = triangle();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let t = topple_ssm(&g, &cfg(&[4, 2, 2]), 1, 1.0, &mut rng).unwrap();
            assert_eq!(t.config, cfg(&[1, 3, 3]));
            assert_eq!(t.fired, vec![true; 3]);
            assert_eq!(t.to_sink, 1);
        }
    }

    #[test]
    fn ssm_empty_draw_leaves_configuration() {
        let g = triangle();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut saw_empty = false;
        for _ in 0..500 {
            let t = topple_ssm(&g, &cfg(&[4, 2, 2]), 1, 0.2, &mut rng).unwrap();
            if t.fired.iter().all(|f| !f) {
                assert_eq!(t.config, cfg(&[4, 2, 2]));
                saw_empty = true;
            }
        }
        assert!(saw_empty);
    }

    #[test]
    fn ssm_rejects_illegal_and_bad_p() {
        let g = triangle();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            topple_ssm(&g, &cfg(&[3, 2, 2]), 1, 0.5, &mut rng).unwrap_err(),
            Error::IllegalToppling(1)
        );
        assert!(matches!(
            topple_ssm(&g, &cfg(&[4, 2, 2]), 1, 0.0, &mut rng).unwrap_err(),
            Error::InvalidParams(_)
        ));
    }

    #[test]
    fn ssm_stabilisation_conserves_grains() {
        let g = triangle();
        let mut params = StochasticParams::uniform(&g, 0.5, 9);
        for policy in [TopplingPolicy::Fifo, TopplingPolicy::RandomEligible] {
            params.policy = policy;
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let start = cfg(&[4, 2, 2]);
            let s = stabilize_ssm(&g, &start, &params, &mut rng).unwrap();
            assert!(is_stable(&g, &s.config));
            assert!(s.config.total() <= 8);
            assert_eq!(start.total() - s.config.total(), s.to_sink);
        }
    }

    #[test]
    fn ssm_cap() {
        let g = triangle();
        let mut params = StochasticParams::uniform(&g, 0.5, 0);
        params.max_topplings = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            stabilize_ssm(&g, &cfg(&[40, 20, 20]), &params, &mut rng).unwrap_err(),
            Error::SafetyCapExceeded(1)
        );
    }

    #[test]
    fn chain_zero_steps_and_determinism() {
        let g = triangle();
        let params = StochasticParams::uniform(&g, 0.5, 42);
        let empty = run_chain(&g, &eta_max(&g), &params, 0, 0).unwrap();
        assert!(empty.occupancy.is_empty());
        assert_eq!(empty.grains_to_sink, 0);
        let a = run_chain(&g, &eta_max(&g), &params, 2000, 10).unwrap();
        let b = run_chain(&g, &eta_max(&g), &params, 2000, 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.occupancy.values().sum::<u64>(), 2000);
    }

    #[test]
    fn chain_rejects_bad_params() {
        let g = triangle();
        let mut params = StochasticParams::uniform(&g, 0.5, 1);
        params.mu = vec![1.0, 0.0, 1.0];
        assert!(matches!(
            run_chain(&g, &eta_max(&g), &params, 1, 0).unwrap_err(),
            Error::InvalidParams(_)
        ));
        let params = StochasticParams::uniform(&g, 0.5, 1);
        assert_eq!(
            run_chain(&g, &cfg(&[4, 2, 2]), &params, 1, 0).unwrap_err(),
            Error::UnstableConfiguration
        );
    }

    #[test]
    fn chain_stats_json_shape() {
        let g = triangle();
        let stats = run_chain(
            &g,
            &eta_max(&g),
            &StochasticParams::uniform(&g, 0.5, 1),
            50,
            0,
        )
        .unwrap();
        let v = serde_json::to_value(&stats).unwrap();
        assert_eq!(v["rng"], "ChaCha8Rng");
        assert!(v["occupancy"][0]["config"].is_array());
        assert_eq!(v["policy"], "fifo");
    }
}

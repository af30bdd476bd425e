//! Property checks against deliberately naive oracles kept in this file.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sandpile_core::lackpoly::{
    bijection_f, classify_config, lacking_poly_enum, lacking_poly_recurrence,
    lacking_poly_recurrence_with, SplitClass,
};
use sandpile_core::random::{attach_random_branch, random_graph, RandomGraphParams};
use sandpile_core::recurrent::{
    burning_test, det_enumerate, is_compatible, is_dr_via_acyclic, is_sr, stable_configurations,
    sto_enumerate, sto_reachability_oracle, Limits,
};
use sandpile_core::sandpile::{
    is_stable, lacking_vector, stabilize_asm, stabilize_ssm, topple_asm, topple_ssm,
    StochasticParams,
};
use sandpile_core::{Configuration, MultiGraph, Orientation, SINK};

fn graph_from_seed(seed: u64) -> MultiGraph {
    random_graph(
        &mut ChaCha8Rng::seed_from_u64(seed),
        &RandomGraphParams::default(),
    )
}

/// Union of comp(O) built one orientation at a time, with no indegree sharing.
fn naive_sto(g: &MultiGraph) -> BTreeSet<Configuration> {
    let mut out = BTreeSet::new();
    for mask in 0..1u64 << g.edge_count() {
        let o = Orientation::from_mask(g, mask);
        for eta in stable_configurations(g, &Limits::default()).unwrap() {
            if is_compatible(g, &eta, &o).unwrap() {
                out.insert(eta);
            }
        }
    }
    out
}

/// Spanning trees by subset enumeration; `through` restricts to trees using the pair.
fn brute_trees(g: &MultiGraph, through: Option<(usize, usize)>) -> u64 {
    let copies = g.edge_copies();
    let n = g.vertex_count();
    (0..1u64 << copies.len())
        .filter(|m| m.count_ones() as usize == n - 1)
        .filter(|&m| {
            through.is_none_or(|p| {
                copies
                    .iter()
                    .enumerate()
                    .any(|(i, &c)| m >> i & 1 == 1 && c == p)
            })
        })
        .filter(|&m| {
            let mut comp: Vec<usize> = (0..n).collect();
            for (i, &(u, v)) in copies.iter().enumerate() {
                if m >> i & 1 == 1 {
                    let (cu, cv) = (comp[u], comp[v]);
                    if cu == cv {
                        return false;
                    }
                    comp.iter_mut().filter(|c| **c == cv).for_each(|c| *c = cu);
                }
            }
            true
        })
        .count() as u64
}

/// All terminal states of the legal-toppling state graph reachable from `eta`.
fn all_order_outcomes(g: &MultiGraph, eta: &Configuration) -> BTreeSet<Configuration> {
    fn go(
        g: &MultiGraph,
        eta: &Configuration,
        memo: &mut HashMap<Configuration, BTreeSet<Configuration>>,
    ) -> BTreeSet<Configuration> {
        if let Some(r) = memo.get(eta) {
            return r.clone();
        }
        let mut out = BTreeSet::new();
        let mut any = false;
        for x in g.non_sink() {
            if let Ok(next) = topple_asm(g, eta, x) {
                any = true;
                out.extend(go(g, &next, memo));
            }
        }
        if !any {
            out.insert(eta.clone());
        }
        memo.insert(eta.clone(), out.clone());
        out
    }
    go(g, eta, &mut HashMap::new())
}

fn random_config(rng: &mut ChaCha8Rng, g: &MultiGraph, extra: u32) -> Configuration {
    Configuration::new(
        g.non_sink()
            .map(|v| rng.random_range(0..=g.degree(v) as u32 + extra))
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sr_routes_agree(seed in any::<u64>()) {
        let g = graph_from_seed(seed);
        let limits = Limits::default();
        let naive = naive_sto(&g);
        prop_assert_eq!(&sto_enumerate(&g, &limits).unwrap(), &naive);
        prop_assert_eq!(&sto_reachability_oracle(&g, &limits).unwrap(), &naive);
        for eta in stable_configurations(&g, &limits).unwrap() {
            let m = is_sr(&g, &eta).unwrap();
            prop_assert_eq!(m.member, naive.contains(&eta));
            if let Some(w) = m.witness {
                prop_assert!(is_compatible(&g, &eta, &w).unwrap());
            }
        }
    }

    #[test]
    fn dr_routes_agree(seed in any::<u64>()) {
        let g = graph_from_seed(seed);
        let limits = Limits::default();
        let det = det_enumerate(&g, &limits).unwrap();
        for eta in stable_configurations(&g, &limits).unwrap() {
            prop_assert_eq!(burning_test(&g, &eta).unwrap().recurrent, is_dr_via_acyclic(&g, &eta, &limits).unwrap());
        }
        prop_assert_eq!(BigUint::from(det.len()), g.spanning_tree_count());
        prop_assert!(det.is_subset(&sto_enumerate(&g, &limits).unwrap()));
    }

    #[test]
    fn matrix_tree_matches_subsets(seed in any::<u64>()) {
        let g = graph_from_seed(seed);
        let trees = brute_trees(&g, None);
        prop_assert_eq!(g.spanning_tree_count(), BigUint::from(trees));
        prop_assert!(trees >= 1);
    }

    #[test]
    fn doubling_a_pair_adds_trees_through_it(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let g = graph_from_seed(seed);
        prop_assume!(g.edge_count() <= 6);
        let pairs: Vec<_> = g.pairs().collect();
        let ((u, v), k) = pairs[pick.index(pairs.len())];
        let spec = g.to_spec();
        let edges: Vec<(String, String, usize)> = spec.edges.iter().map(|e| {
            let (a, b, m) = e.parts();
            let doubled = (g.index_of(a), g.index_of(b)) == (Some(u), Some(v));
            (a.to_owned(), b.to_owned(), if doubled { 2 * m } else { m })
        }).collect();
        let doubled = MultiGraph::build(&spec.sink, &edges).unwrap();
        prop_assert_eq!(doubled.multiplicity(u, v), 2 * k);
        let through = brute_trees(&g, Some((u, v)));
        prop_assert_eq!(doubled.spanning_tree_count(), g.spanning_tree_count() + BigUint::from(through));
    }

    #[test]
    fn recurrence_matches_enumeration(seed in any::<u64>(), choice_seed in any::<u64>()) {
        let g = graph_from_seed(seed);
        let by_enum = lacking_poly_enum(&g, &Limits::default()).unwrap();
        let by_rec = lacking_poly_recurrence(&g).unwrap();
        prop_assert_eq!(&by_enum, &by_rec);
        prop_assert_eq!(by_rec.degree().map(|d| d as i64), Some(g.cycle_count()));
        prop_assert_eq!(by_rec.coeff(0), BigUint::from(1u32));
        let mut rng = ChaCha8Rng::seed_from_u64(choice_seed);
        let shuffled = lacking_poly_recurrence_with(&g, &mut |_, e| e[rng.random_range(0..e.len())]).unwrap();
        prop_assert_eq!(&shuffled, &by_rec);
        let branched = attach_random_branch(&mut rng, &g, 2);
        prop_assert_eq!(&lacking_poly_recurrence(&branched).unwrap(), &by_rec);
        prop_assert_eq!(&branched.prune_tree_branches().prune_tree_branches(), &branched.prune_tree_branches());
    }

    #[test]
    fn classification_matches_orientation_search(seed in any::<u64>()) {
        let g = graph_from_seed(seed);
        let limits = Limits::default();
        for (a, b) in g.reducible_edges() {
            let deleted = sto_enumerate(&g.delete_edge(a, b).unwrap(), &limits).unwrap();
            let contracted = sto_enumerate(&g.contract_edge(a, b).unwrap(), &limits).unwrap();
            let mut seen_a = BTreeSet::new();
            let mut seen_b = BTreeSet::new();
            for eta in sto_enumerate(&g, &limits).unwrap() {
                let lack = lacking_vector(&g, &eta).unwrap();
                let naive_a = lack[b - 1] > 0 && (0..1u64 << g.edge_count()).any(|m| {
                    let o = Orientation::from_mask(&g, m);
                    o.arcs(&g).contains(&(a, b)) && is_compatible(&g, &eta, &o).unwrap()
                });
                let class = classify_config(&g, &eta, a, b).unwrap();
                prop_assert_eq!(class == SplitClass::A, naive_a);
                let img = bijection_f(&g, &eta, a, b).unwrap();
                let fresh = match class {
                    SplitClass::A => seen_a.insert(img.config),
                    SplitClass::B => seen_b.insert(img.config),
                };
                prop_assert!(fresh);
            }
            prop_assert_eq!(&seen_a, &deleted);
            prop_assert_eq!(&seen_b, &contracted);
        }
    }

    #[test]
    fn deletion_and_contraction_counts(seed in any::<u64>()) {
        let g = graph_from_seed(seed);
        for (a, b) in g.reducible_edges() {
            let d = g.delete_edge(a, b).unwrap();
            let c = g.contract_edge(a, b).unwrap();
            prop_assert_eq!(d.edge_count() + 1, g.edge_count());
            prop_assert_eq!(c.edge_count() + 1, g.edge_count());
            prop_assert_eq!(c.non_sink_count() + 1, g.non_sink_count());
            prop_assert_eq!(d.cycle_count(), g.cycle_count() - 1);
            prop_assert_eq!(c.cycle_count(), g.cycle_count());
            prop_assert_eq!(c.degrees().iter().sum::<usize>(), 2 * c.edge_count());
            prop_assert!(c.is_connected());
            for v in g.non_sink().filter(|&v| v != a && v != b) {
                let w = c.index_of(g.label(v)).unwrap();
                prop_assert_eq!(c.degree(w), g.degree(v));
            }
        }
    }

    #[test]
    fn pruning_commutes_with_splitting(seed in any::<u64>(), other in any::<u64>()) {
        let g = graph_from_seed(seed).glue_at_sink(&graph_from_seed(other), "o");
        let pruned = g.prune_tree_branches();
        let mut a: Vec<String> = g.sink_components().iter()
            .map(MultiGraph::prune_tree_branches)
            .filter(|p| p.non_sink_count() > 0)
            .map(|p| p.to_string()).collect();
        let mut b: Vec<String> = pruned.sink_components().iter().map(|p| p.to_string()).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn product_rule(seed in any::<u64>(), other in any::<u64>()) {
        let g = graph_from_seed(seed);
        let h = graph_from_seed(other);
        let glued = g.glue_at_sink(&h, "o");
        let limits = Limits::default();
        let product = &lacking_poly_enum(&g, &limits).unwrap() * &lacking_poly_enum(&h, &limits).unwrap();
        prop_assert_eq!(lacking_poly_enum(&glued, &limits).unwrap(), product);
    }
}

#[test]
fn abelian_property_exhaustive() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..60 {
        let g = graph_from_seed(seed);
        if g.non_sink_count() > 4 {
            continue;
        }
        for _ in 0..3 {
            let eta = random_config(&mut rng, &g, 3);
            let outcomes = all_order_outcomes(&g, &eta);
            let expected = stabilize_asm(&g, &eta).unwrap().config;
            assert_eq!(outcomes, BTreeSet::from([expected]), "{g} from {eta}");
        }
    }
}

#[test]
fn ssm_with_p_one_equals_asm_on_1000_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..1000 {
        let g = graph_from_seed(i);
        let eta = random_config(&mut rng, &g, 3 * g.degree(1) as u32 + 3);
        let params = StochasticParams::uniform(&g, 1.0, i);
        let asm = stabilize_asm(&g, &eta).unwrap();
        let ssm = stabilize_ssm(&g, &eta, &params, &mut rng).unwrap();
        assert_eq!(asm.config, ssm.config, "{g} from {eta}");
        assert!(is_stable(&g, &ssm.config));
        assert_eq!(eta.total() - ssm.config.total(), ssm.to_sink);
    }
}

#[test]
fn single_topplings_conserve_grains() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for seed in 0..200 {
        let g = graph_from_seed(seed);
        let x = rng.random_range(1..g.vertex_count());
        let mut eta = random_config(&mut rng, &g, 2);
        eta.set(x, g.degree(x) as u32 + 1 + rng.random_range(0..3));
        let full = topple_asm(&g, &eta, x).unwrap();
        assert_eq!(eta.total() - full.total(), g.multiplicity(x, SINK) as u64);
        let partial = topple_ssm(&g, &eta, x, 0.4, &mut rng).unwrap();
        assert_eq!(eta.total() - partial.config.total(), partial.to_sink);
        assert_eq!(
            eta.grains(x) - partial.config.grains(x),
            partial.fired.iter().filter(|f| **f).count() as u32
        );
    }
}

#[test]
fn stochastic_toppling_subset_law() {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let g = MultiGraph::build(
        "s",
        &[
            ("s", "v1", 1),
            ("v1", "v2", 1),
            ("v1", "v3", 1),
            ("v2", "v3", 1),
        ],
    )
    .unwrap();
    let eta = Configuration::new(vec![4, 2, 2]);
    let p = 0.5;
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut counts = [0u64; 8];
    for _ in 0..draws {
        let t = topple_ssm(&g, &eta, 1, p, &mut rng).unwrap();
        let idx = t
            .fired
            .iter()
            .enumerate()
            .fold(0, |m, (i, &f)| m | (usize::from(f) << i));
        counts[idx] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .enumerate()
        .map(|(subset, &n)| {
            let size = (subset as u32).count_ones() as i32;
            let expected = draws as f64 * p.powi(size) * (1.0 - p).powi(3 - size);
            (n as f64 - expected).powi(2) / expected
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new(7.0).unwrap().cdf(chi2);
    assert!(p_value > 0.001, "chi2 {chi2}, p-value {p_value}");
}

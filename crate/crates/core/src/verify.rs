//! Invariant campaign run by `sandpile verify`: every cross-check between the
//! independent routes in this crate, evaluated on one graph at a time.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::lackpoly::{
    bijection_check, lacking_poly_enum, lacking_poly_recurrence, lacking_poly_recurrence_with,
};
use crate::multigraph::MultiGraph;
use crate::random::{attach_random_branch, random_graph, RandomGraphParams};
use crate::recurrent::{
    burning_test, burning_test_with, det_enumerate, is_compatible, is_dr_via_acyclic, is_sr,
    stable_configurations, sto_enumerate, sto_reachability_oracle, Limits,
};
use crate::sandpile::{eta_max, stabilize_asm, stabilize_ssm, Configuration, StochasticParams};

/// Brute-force tree enumeration is skipped above this many edge copies.
const BRUTE_TREE_MAX_EDGES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VerifyOptions {
    pub limits: Limits,
    pub seed: u64,
    /// Test hook: the reachability oracle loses one configuration.
    pub corrupt_oracle: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphReport {
    pub graph: String,
    pub checks: Vec<CheckResult>,
}

impl GraphReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Checks(Vec<CheckResult>);

impl Checks {
    fn push(&mut self, name: &'static str, failure: Option<String>) {
        self.0.push(CheckResult {
            name,
            passed: failure.is_none(),
            counterexample: failure,
        });
    }

    fn check(&mut self, name: &'static str, ok: bool, detail: impl FnOnce() -> String) {
        self.push(name, (!ok).then(detail));
    }
}

fn show(set: &BTreeSet<Configuration>) -> String {
    set.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Spanning trees by trying every `|V|`-subset of edge copies with union-find.
pub fn brute_force_tree_count(g: &MultiGraph) -> u64 {
    let copies = g.edge_copies();
    let n = g.vertex_count();
    let want = n - 1;
    let mut count = 0;
    for mask in 0u64..(1u64 << copies.len()) {
        if mask.count_ones() as usize != want {
            continue;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        let mut acyclic = true;
        for (i, &(u, v)) in copies.iter().enumerate() {
            if mask >> i & 1 == 1 {
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                if ru == rv {
                    acyclic = false;
                    break;
                }
                parent[ru] = rv;
            }
        }
        if acyclic {
            count += 1;
        }
    }
    count
}

/// Runs every invariant on `g`.
pub fn verify_graph(g: &MultiGraph, opts: &VerifyOptions) -> Result<GraphReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let limits = &opts.limits;
    let mut c = Checks(Vec::new());
    let graph_json = serde_json::to_string(&g.to_spec()).expect("graph spec serializes");

    // multigraph
    c.check(
        "degree-sum",
        g.degrees().iter().sum::<usize>() == 2 * g.edge_count(),
        || graph_json.clone(),
    );
    let trees = g.spanning_tree_count();
    if g.edge_count() <= BRUTE_TREE_MAX_EDGES {
        let brute = brute_force_tree_count(g);
        c.check(
            "tree-count-brute-force",
            trees == BigUint::from(brute),
            || format!("{graph_json}: matrix-tree {trees}, brute force {brute}"),
        );
    }
    let mut structural = None;
    for (a, b) in g.reducible_edges() {
        let del = g.delete_edge(a, b)?;
        let con = g.contract_edge(a, b)?;
        let ok = del.edge_count() + 1 == g.edge_count()
            && con.edge_count() + 1 == g.edge_count()
            && con.vertex_count() + 1 == g.vertex_count()
            && del.cycle_count() == g.cycle_count() - 1
            && con.cycle_count() == g.cycle_count()
            && con.degrees().iter().sum::<usize>() == 2 * con.edge_count()
            && con.is_connected()
            && del.is_connected();
        if !ok && structural.is_none() {
            structural = Some(format!("{graph_json}: edge {a}-{b}"));
        }
    }
    c.push("delete-contract-counts", structural);
    let pruned = g.prune_tree_branches();
    let mut comps_then_prune: Vec<MultiGraph> = g
        .sink_components()
        .iter()
        .map(MultiGraph::prune_tree_branches)
        .filter(|p| p.non_sink_count() > 0)
        .collect();
    let mut prune_then_comps = pruned.sink_components();
    comps_then_prune.sort_by_key(|p| p.to_string());
    prune_then_comps.sort_by_key(|p| p.to_string());
    c.check(
        "prune-idempotent-and-commutes",
        pruned.prune_tree_branches() == pruned && comps_then_prune == prune_then_comps,
        || graph_json.clone(),
    );

    // recurrent sets
    let sto = sto_enumerate(g, limits)?;
    let mut oracle = sto_reachability_oracle(g, limits)?;
    if opts.corrupt_oracle {
        let last = oracle.iter().next_back().cloned();
        if let Some(last) = last {
            oracle.remove(&last);
        }
    }
    let stable = stable_configurations(g, limits)?;
    let mut by_flow = BTreeSet::new();
    let mut bad_witness = None;
    for eta in &stable {
        let m = is_sr(g, eta)?;
        if m.member {
            if let Some(w) = &m.witness {
                if !is_compatible(g, eta, w)? && bad_witness.is_none() {
                    bad_witness = Some(format!("{graph_json}: {eta}"));
                }
            }
            by_flow.insert(eta.clone());
        }
    }
    c.check("sto-enumeration-equals-oracle", sto == oracle, || {
        format!(
            "{graph_json}: enumeration {{{}}} oracle {{{}}}",
            show(&sto),
            show(&oracle)
        )
    });
    c.check("sto-enumeration-equals-flow", sto == by_flow, || {
        format!(
            "{graph_json}: enumeration {{{}}} flow {{{}}}",
            show(&sto),
            show(&by_flow)
        )
    });
    c.push("sr-witness-compatible", bad_witness);
    c.check("eta-max-is-sr", sto.contains(&eta_max(g)), || {
        graph_json.clone()
    });

    let det = det_enumerate(g, limits)?;
    let mut dr_mismatch = None;
    let mut order_mismatch = None;
    for eta in &stable {
        let burn = burning_test(g, eta)?.recurrent;
        if burn != is_dr_via_acyclic(g, eta, limits)? && dr_mismatch.is_none() {
            dr_mismatch = Some(format!("{graph_json}: {eta} burning={burn}"));
        }
        let shuffled = burning_test_with(g, eta, |e| e[rng.random_range(0..e.len())])?.recurrent;
        if shuffled != burn && order_mismatch.is_none() {
            order_mismatch = Some(format!("{graph_json}: {eta}"));
        }
    }
    c.push("burning-equals-acyclic-orientation", dr_mismatch);
    c.push("burning-order-independent", order_mismatch);
    c.check(
        "det-count-equals-spanning-trees",
        BigUint::from(det.len()) == trees,
        || format!("{graph_json}: |Det|={} trees={trees}", det.len()),
    );
    c.check("det-subset-of-sto", det.is_subset(&sto), || {
        graph_json.clone()
    });

    // lacking polynomial
    let by_enum = lacking_poly_enum(g, limits)?;
    let by_rec = lacking_poly_recurrence(g)?;
    c.check(
        "poly-recurrence-equals-enumeration",
        by_enum == by_rec,
        || format!("{graph_json}: enumeration {by_enum}, recurrence {by_rec}"),
    );
    c.check(
        "poly-degree-equals-cycles",
        by_rec.degree().map(|d| d as i64) == Some(g.cycle_count()),
        || format!("{graph_json}: {by_rec}, c(G)={}", g.cycle_count()),
    );
    c.check(
        "poly-constant-one",
        by_rec.coeff(0) == BigUint::from(1u32),
        || format!("{graph_json}: {by_rec}"),
    );
    c.check(
        "poly-at-one-counts-sto",
        by_rec.eval(&BigUint::from(1u32)) == BigUint::from(sto.len()),
        || format!("{graph_json}: {by_rec}, |Sto|={}", sto.len()),
    );
    let randomized =
        lacking_poly_recurrence_with(g, &mut |_, edges| edges[rng.random_range(0..edges.len())])?;
    c.check("poly-edge-choice-independent", randomized == by_rec, || {
        format!("{graph_json}: {randomized} vs {by_rec}")
    });
    let branch_size = rng.random_range(1..=3);
    let branched = attach_random_branch(&mut rng, g, branch_size);
    let branched_poly = lacking_poly_recurrence(&branched)?;
    c.check(
        "poly-tree-branch-invariant",
        branched_poly == by_rec,
        || format!("{graph_json}: with branch {branched_poly}"),
    );
    let doubled = g.glue_at_sink(g, "copy_");
    if doubled.edge_count() <= limits.max_edges {
        let doubled_poly = lacking_poly_enum(&doubled, limits)?;
        let squared = &by_rec * &by_rec;
        c.check("poly-product-rule", doubled_poly == squared, || {
            format!("{graph_json}: glued {doubled_poly}, squared {squared}")
        });
    }
    let mut bijection_failure = None;
    for (a, b) in g.reducible_edges() {
        let report = bijection_check(g, a, b, limits)?;
        if !report.holds() && bijection_failure.is_none() {
            bijection_failure = Some(format!("{graph_json}: {report:?}"));
        }
    }
    c.push("split-bijection", bijection_failure);
    c.check(
        "sto-count-at-least-trees",
        BigUint::from(sto.len()) >= trees && ((BigUint::from(sto.len()) == trees) == (det == sto)),
        || graph_json.clone(),
    );

    // dynamics
    let params = StochasticParams::uniform(g, 1.0, opts.seed);
    let mut p_one_mismatch = None;
    for _ in 0..10 {
        let eta = Configuration::new(
            g.non_sink()
                .map(|v| rng.random_range(0..=3 * g.degree(v) as u32 + 2))
                .collect(),
        );
        let asm = stabilize_asm(g, &eta)?;
        let ssm = stabilize_ssm(g, &eta, &params, &mut rng)?;
        if asm.config != ssm.config && p_one_mismatch.is_none() {
            p_one_mismatch = Some(format!(
                "{graph_json}: {eta} -> {} vs {}",
                asm.config, ssm.config
            ));
        }
    }
    c.push("ssm-p1-equals-asm", p_one_mismatch);

    Ok(GraphReport {
        graph: graph_json,
        checks: c.0,
    })
}

/// Runs [`verify_graph`] on `count` seeded random graphs.
pub fn verify_random(
    count: usize,
    params: &RandomGraphParams,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<Vec<GraphReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let g = random_graph(&mut rng, params);
            verify_graph(
                &g,
                &VerifyOptions {
                    seed: seed.wrapping_add(i as u64),
                    ..*opts
                },
            )
        })
        .collect()
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

    #[test]
    fn triangle_passes_everything() {
        let report = verify_graph(&triangle(), &VerifyOptions::default()).unwrap();
        assert!(report.passed(), "{report:#?}");
    }

    #[test]
    fn corrupted_oracle_is_caught() {
        let opts = VerifyOptions {
            corrupt_oracle: true,
            ..VerifyOptions::default()
        };
        let report = verify_graph(&triangle(), &opts).unwrap();
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].name, "sto-enumeration-equals-oracle");
        assert!(failed[0].counterexample.is_some());
    }

    #[test]
    fn brute_force_trees() {
        assert_eq!(brute_force_tree_count(&triangle()), 3);
    }
}

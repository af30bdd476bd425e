use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use sandpile_core::lackpoly::{coefficients_json, lacking_poly_enum, lacking_poly_recurrence};
use sandpile_core::random::RandomGraphParams;
use sandpile_core::recurrent::{burning_test, det_enumerate, is_sr, sto_enumerate};
use sandpile_core::sandpile::{eta_max, run_chain, DEFAULT_MAX_TOPPLINGS};
use sandpile_core::verify::{verify_graph, verify_random, GraphReport, VerifyOptions};
use sandpile_core::{Configuration, Error, Limits, MultiGraph, StochasticParams, TopplingPolicy};

use crate::{
    MemberArgs, Model, Policy, PolyArgs, PolyMethod, RecurrentArgs, SimulateArgs, VerifyArgs,
};

pub const MAX_TOPPLINGS_ENV: &str = "SANDPILE_MAX_TOPPLINGS";

pub struct Context {
    pub limits: Limits,
}

pub struct Outcome {
    pub digest: Option<String>,
    pub params: Value,
    pub result: Value,
    /// Set when the command ran but an internal consistency check failed.
    pub violation: Option<String>,
}

#[derive(Debug)]
pub enum Failure {
    Input { kind: &'static str, message: String },
    Core(Error),
}

impl Failure {
    fn input(kind: &'static str, message: impl Into<String>) -> Self {
        Failure::Input {
            kind,
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Input { kind, .. } => kind,
            Failure::Core(e) => e.kind(),
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Input { message, .. } => message.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CmdResult = Result<Outcome, Failure>;

struct Loaded {
    graph: MultiGraph,
    digest: String,
}

fn load(path: &str) -> Result<Loaded, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::input("Io", format!("{path}: {e}")))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text =
        std::str::from_utf8(&bytes).map_err(|e| Failure::input("Io", format!("{path}: {e}")))?;
    Ok(Loaded {
        graph: MultiGraph::from_json(text)?,
        digest,
    })
}

fn parse_csv<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Failure>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| Failure::input("InvalidArgument", format!("{what}: {s:?}: {e}")))
        })
        .collect()
}

fn non_sink_labels(g: &MultiGraph) -> Vec<&str> {
    g.non_sink().map(|v| g.label(v)).collect()
}

fn configs_json(set: &BTreeSet<Configuration>) -> Value {
    json!(set.iter().map(Configuration::as_slice).collect::<Vec<_>>())
}

fn ok(digest: Option<String>, params: Value, result: Value) -> CmdResult {
    Ok(Outcome {
        digest,
        params,
        result,
        violation: None,
    })
}

pub fn validate(_: &Context, path: &str) -> CmdResult {
    let Loaded { graph: g, digest } = load(path)?;
    let degrees: BTreeMap<&str, usize> = (0..g.vertex_count())
        .map(|v| (g.label(v), g.degree(v)))
        .collect();
    let edges: Vec<Value> = g
        .pairs()
        .map(|((u, v), k)| json!([g.label(u), g.label(v), k]))
        .collect();
    ok(
        Some(digest),
        json!({}),
        json!({
            "sink": g.label(sandpile_core::SINK),
            "non_sink": non_sink_labels(&g),
            "vertices": g.vertex_count(),
            "edges": g.edge_count(),
            "degrees": degrees,
            "multiplicities": edges,
            "cycle_rank": g.cycle_count(),
        }),
    )
}

pub fn recurrent(ctx: &Context, a: &RecurrentArgs) -> CmdResult {
    let Loaded { graph: g, digest } = load(&a.graph)?;
    let set = match a.model {
        Model::Det => det_enumerate(&g, &ctx.limits)?,
        Model::Sto => sto_enumerate(&g, &ctx.limits)?,
    };
    let mut result = json!({
        "model": a.model,
        "vertices": non_sink_labels(&g),
        "count": set.len(),
    });
    if !a.count {
        result["configurations"] = configs_json(&set);
    }
    ok(
        Some(digest),
        json!({ "model": a.model, "count_only": a.count }),
        result,
    )
}

pub fn member(_: &Context, a: &MemberArgs) -> CmdResult {
    let Loaded { graph: g, digest } = load(&a.graph)?;
    let eta = Configuration::new(parse_csv(&a.config, "config")?);
    let params = json!({ "model": a.model, "config": eta.as_slice() });
    let label_arcs = |arcs: Vec<(usize, usize)>| -> Vec<[&str; 2]> {
        arcs.into_iter()
            .map(|(u, v)| [g.label(u), g.label(v)])
            .collect()
    };
    let result = match a.model {
        Model::Sto => {
            let m = is_sr(&g, &eta)?;
            json!({
                "model": a.model,
                "member": m.member,
                "witness": m.witness.map(|o| label_arcs(o.arcs(&g))),
            })
        }
        Model::Det => {
            let b = burning_test(&g, &eta)?;
            let order: Vec<&str> = b.order.iter().map(|&v| g.label(v)).collect();
            json!({ "model": a.model, "member": b.recurrent, "burn_order": order })
        }
    };
    ok(Some(digest), params, result)
}

pub fn poly(ctx: &Context, a: &PolyArgs) -> CmdResult {
    let Loaded { graph: g, digest } = load(&a.graph)?;
    let params = json!({ "method": a.method });
    let describe = |p: &sandpile_core::LackingPolynomial| json!({ "coefficients": coefficients_json(p), "polynomial": p.to_string() });
    match a.method {
        PolyMethod::Recurrence => ok(
            Some(digest),
            params,
            describe(&lacking_poly_recurrence(&g)?),
        ),
        PolyMethod::Enumerate => ok(
            Some(digest),
            params,
            describe(&lacking_poly_enum(&g, &ctx.limits)?),
        ),
        PolyMethod::Both => {
            let by_enum = lacking_poly_enum(&g, &ctx.limits)?;
            let by_rec = lacking_poly_recurrence(&g)?;
            let agree = by_enum == by_rec;
            let mut result = describe(&by_rec);
            result["enumerate"] = describe(&by_enum);
            result["recurrence"] = describe(&by_rec);
            result["agree"] = json!(agree);
            Ok(Outcome {
                digest: Some(digest),
                params,
                result,
                violation: (!agree)
                    .then(|| format!("recurrence gives {by_rec}, enumeration gives {by_enum}")),
            })
        }
    }
}

fn max_topplings() -> Result<u64, Failure> {
    match std::env::var(MAX_TOPPLINGS_ENV) {
        Ok(s) => s.trim().parse().map_err(|e| {
            Failure::input("InvalidArgument", format!("{MAX_TOPPLINGS_ENV}={s:?}: {e}"))
        }),
        Err(_) => Ok(DEFAULT_MAX_TOPPLINGS),
    }
}

pub fn simulate(ctx: &Context, a: &SimulateArgs) -> CmdResult {
    let Loaded { graph: g, digest } = load(&a.graph)?;
    let mu = if a.mu == "uniform" {
        vec![1.0; g.non_sink_count()]
    } else {
        parse_csv(&a.mu, "mu")?
    };
    let start = match &a.start {
        Some(s) => Configuration::new(parse_csv(s, "start")?),
        None => eta_max(&g),
    };
    let params = StochasticParams {
        p: a.p,
        mu,
        seed: a.seed,
        max_topplings: max_topplings()?,
        policy: match a.policy {
            Policy::Fifo => TopplingPolicy::Fifo,
            Policy::RandomEligible => TopplingPolicy::RandomEligible,
        },
    };
    let stats = run_chain(&g, &start, &params, a.steps, a.burnin)?;
    let support: BTreeSet<Configuration> = stats.occupancy.keys().cloned().collect();

    let mut violation = None;
    let support_check = match sto_enumerate(&g, &ctx.limits) {
        Ok(sto) => {
            let within = support.is_subset(&sto);
            let mut check = json!({
                "support_size": support.len(),
                "sto_size": sto.len(),
                "within_sto": within,
                "equals_sto": support == sto,
            });
            if !within {
                violation = Some(
                    "chain visited a configuration outside the stochastic recurrent set".to_owned(),
                );
            }
            if a.p == 1.0 {
                let det = det_enumerate(&g, &ctx.limits)?;
                let within_det = support.is_subset(&det);
                check["det_size"] = json!(det.len());
                check["within_det"] = json!(within_det);
                check["equals_det"] = json!(support == det);
                if !within_det {
                    violation =
                        Some("deterministic chain left the deterministic recurrent set".to_owned());
                }
            }
            check
        }
        Err(e) if e.is_resource_limit() => json!({ "skipped": e.to_string() }),
        Err(e) => return Err(e.into()),
    };
    let mut result = serde_json::to_value(&stats).expect("chain stats serialise");
    result["vertices"] = json!(non_sink_labels(&g));
    result["support_check"] = support_check;
    Ok(Outcome {
        digest: Some(digest),
        params: json!({
            "p": a.p,
            "steps": a.steps,
            "seed": a.seed,
            "mu": params.mu,
            "burnin": a.burnin,
            "policy": params.policy,
            "start": start.as_slice(),
            "max_topplings": params.max_topplings,
        }),
        result,
        violation,
    })
}

fn summarise(reports: &[GraphReport]) -> (Value, Option<String>) {
    let failures: Vec<Value> = reports
        .iter()
        .enumerate()
        .flat_map(|(i, r)| {
            r.checks.iter().filter(|c| !c.passed).map(move |c| {
                json!({
                    "case": i,
                    "graph": serde_json::from_str::<Value>(&r.graph).unwrap_or(Value::String(r.graph.clone())),
                    "check": c.name,
                    "counterexample": c.counterexample,
                })
            })
        })
        .collect();
    let checks: usize = reports.iter().map(|r| r.checks.len()).sum();
    let cases: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "graph": serde_json::from_str::<Value>(&r.graph).unwrap_or(Value::String(r.graph.clone())),
                "passed": r.passed(),
                "checks": r.checks.iter().map(|c| json!({ "name": c.name, "passed": c.passed })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let violation =
        (!failures.is_empty()).then(|| format!("{} of {checks} checks failed", failures.len()));
    let result = json!({
        "graphs": reports.len(),
        "checks": checks,
        "all_passed": failures.is_empty(),
        "failures": failures,
        "cases": cases,
    });
    (result, violation)
}

pub fn verify(ctx: &Context, a: &VerifyArgs) -> CmdResult {
    let opts = VerifyOptions {
        limits: ctx.limits,
        seed: a.seed,
        corrupt_oracle: a.corrupt_oracle,
    };
    let (digest, params, reports) = match (&a.graph, a.random) {
        (Some(path), _) => {
            let Loaded { graph: g, digest } = load(path)?;
            (
                Some(digest),
                json!({ "seed": a.seed }),
                vec![verify_graph(&g, &opts)?],
            )
        }
        (None, Some(count)) => {
            let gen = RandomGraphParams {
                max_vertices: a.max_vertices,
                max_edges: a.max_edges,
                max_multiplicity: a.max_multiplicity,
            };
            if gen.max_vertices == 0 || gen.max_multiplicity == 0 {
                return Err(Failure::input(
                    "InvalidArgument",
                    "random graphs need at least one vertex and multiplicity",
                ));
            }
            let params = json!({
                "random": count,
                "max_vertices": gen.max_vertices,
                "max_edges": gen.max_edges,
                "max_multiplicity": gen.max_multiplicity,
                "seed": a.seed,
            });
            let reports = verify_random(count, &gen, a.seed, &opts)?;
            let mut hasher = Sha256::new();
            for r in &reports {
                hasher.update(r.graph.as_bytes());
                hasher.update(b"\n");
            }
            (Some(hex::encode(hasher.finalize())), params, reports)
        }
        (None, None) => unreachable!("clap requires a graph or --random"),
    };
    let (result, violation) = summarise(&reports);
    Ok(Outcome {
        digest,
        params,
        result,
        violation,
    })
}

pub fn count_trees(_: &Context, path: &str) -> CmdResult {
    let Loaded { graph: g, digest } = load(path)?;
    let count: serde_json::Number = g
        .spanning_tree_count()
        .to_string()
        .parse()
        .expect("decimal integers are valid JSON numbers");
    ok(Some(digest), json!({}), json!({ "spanning_trees": count }))
}

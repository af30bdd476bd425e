//! The lacking polynomial `L_G(x) = sum over SR configurations of x^l(eta)`,
//! computed by enumeration and by deletion-contraction, together with the
//! configuration-level bijection behind the recurrence
//! `L_G = x * L_{G \ e} + L_{G.e}`.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::multigraph::{MultiGraph, SINK};
use crate::poly::Polynomial;
use crate::recurrent::{compatible_with_forced_arc, is_sr, sto_enumerate, Limits};
use crate::sandpile::{check_stable, lacking_vector, total_lacking, Configuration};
use crate::LackingPolynomial;

/// Histogram of total lacking numbers over the enumerated SR set.
pub fn lacking_poly_enum(g: &MultiGraph, limits: &Limits) -> Result<LackingPolynomial> {
    let mut p = Polynomial::zero();
    for eta in sto_enumerate(g, limits)? {
        p.add_monomial(total_lacking(g, &eta)? as usize);
    }
    Ok(p)
}

/// Deletion-contraction evaluation, always splitting on the lexicographically
/// smallest reducible edge.
pub fn lacking_poly_recurrence(g: &MultiGraph) -> Result<LackingPolynomial> {
    lacking_poly_recurrence_with(g, &mut |_, edges| edges[0])
}

/// Picks one of the (nonempty) reducible edges of the given graph.
pub type EdgeChooser<'a> = dyn FnMut(&MultiGraph, &[(usize, usize)]) -> (usize, usize) + 'a;

/// Deletion-contraction with a caller-chosen reducible edge at each step.
pub fn lacking_poly_recurrence_with(
    g: &MultiGraph,
    choose: &mut EdgeChooser<'_>,
) -> Result<LackingPolynomial> {
    let g = g.prune_tree_branches();
    if g.non_sink_count() == 0 {
        return Ok(Polynomial::one());
    }
    let parts = g.sink_components();
    if parts.len() > 1 {
        let mut acc = Polynomial::one();
        for part in &parts {
            acc = &acc * &lacking_poly_recurrence_with(part, choose)?;
        }
        return Ok(acc);
    }
    if g.non_sink_count() == 1 {
        return Ok(Polynomial::geometric(g.multiplicity(SINK, 1)));
    }
    let edges = g.reducible_edges();
    if edges.is_empty() {
        return Err(Error::IrreducibleComponent);
    }
    let (a, b) = choose(&g, &edges);
    let deleted = lacking_poly_recurrence_with(&g.delete_edge(a, b)?, choose)?;
    let contracted = lacking_poly_recurrence_with(&g.contract_edge(a, b)?, choose)?;
    Ok(&deleted.shift() + &contracted)
}

/// Which side of the recurrence an SR configuration maps to, for an edge `{a, b}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SplitClass {
    /// Some compatible orientation points an `{a, b}` copy `a -> b` and `l(b) > 0`.
    A,
    /// Every other SR configuration.
    B,
}

/// The labelling used when none is given: `a` is the smaller index.
pub fn split_labeling(x: usize, y: usize) -> (usize, usize) {
    (x.min(y), x.max(y))
}

fn check_reducible(g: &MultiGraph, a: usize, b: usize) -> Result<()> {
    let ok = a != b
        && a != SINK
        && b != SINK
        && a < g.vertex_count()
        && b < g.vertex_count()
        && g.multiplicity(a, b) > 0
        && !g.is_bridge(a, b)?;
    if ok {
        Ok(())
    } else {
        Err(Error::BadEdge(a, b))
    }
}

/// Classifies an SR configuration relative to the reducible edge `{a, b}`
/// with orientation label `a -> b`.
pub fn classify_config(
    g: &MultiGraph,
    eta: &Configuration,
    a: usize,
    b: usize,
) -> Result<SplitClass> {
    check_stable(g, eta)?;
    check_reducible(g, a, b)?;
    if !is_sr(g, eta)?.member {
        return Err(Error::NotRecurrent);
    }
    if g.degree(b) as u32 == eta.grains(b) {
        return Ok(SplitClass::B);
    }
    Ok(match compatible_with_forced_arc(g, eta, a, b)? {
        Some(_) => SplitClass::A,
        None => SplitClass::B,
    })
}

/// Image of an SR configuration under the split bijection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BijectionImage {
    pub class: SplitClass,
    /// `G \ e` for class A, `G.e` for class B.
    pub graph: MultiGraph,
    pub config: Configuration,
}

/// Maps `eta` in `Sto(G)` to `Sto(G \ e)` (class A: one grain fewer at `a`)
/// or to `Sto(G.e)` (class B: the merged vertex lacks `l(a) + l(b)`).
pub fn bijection_f(
    g: &MultiGraph,
    eta: &Configuration,
    a: usize,
    b: usize,
) -> Result<BijectionImage> {
    let class = classify_config(g, eta, a, b)?;
    match class {
        SplitClass::A => {
            let mut config = eta.clone();
            config.set(a, eta.grains(a) - 1);
            Ok(BijectionImage {
                class,
                graph: g.delete_edge(a, b)?,
                config,
            })
        }
        SplitClass::B => {
            let lack = lacking_vector(g, eta)?;
            let merged_lack = lack[a - 1] + lack[b - 1];
            let target = g.contract_edge(a, b)?;
            let grains = target
                .non_sink()
                .map(|v| match g.index_of(target.label(v)) {
                    Some(old) => eta.grains(old),
                    None => target.degree(v) as u32 - merged_lack,
                })
                .collect();
            Ok(BijectionImage {
                class,
                graph: target,
                config: Configuration::new(grains),
            })
        }
    }
}

/// Outcome of checking the split bijection exhaustively on one graph and edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BijectionReport {
    pub edge: (usize, usize),
    pub class_a: usize,
    pub class_b: usize,
    pub injective: bool,
    pub onto_deleted: bool,
    pub onto_contracted: bool,
    pub lacking_bookkeeping: bool,
}

impl BijectionReport {
    pub fn holds(&self) -> bool {
        self.injective && self.onto_deleted && self.onto_contracted && self.lacking_bookkeeping
    }
}

/// Applies [`bijection_f`] to every SR configuration of `g` and compares the
/// images with the enumerated SR sets of `G \ e` and `G.e`.
pub fn bijection_check(
    g: &MultiGraph,
    a: usize,
    b: usize,
    limits: &Limits,
) -> Result<BijectionReport> {
    let deleted = g.delete_edge(a, b)?;
    let contracted = g.contract_edge(a, b)?;
    let mut images: BTreeMap<SplitClass, BTreeSet<Configuration>> = BTreeMap::new();
    let mut injective = true;
    let mut bookkeeping = true;
    let mut counts = [0usize; 2];
    for eta in sto_enumerate(g, limits)? {
        let image = bijection_f(g, &eta, a, b)?;
        let before = total_lacking(g, &eta)?;
        let after = total_lacking(&image.graph, &image.config);
        bookkeeping &= match (image.class, after) {
            (SplitClass::A, Ok(l)) => l + 1 == before,
            (SplitClass::B, Ok(l)) => l == before,
            (_, Err(_)) => false,
        };
        counts[image.class as usize] += 1;
        injective &= images.entry(image.class).or_default().insert(image.config);
    }
    let empty = BTreeSet::new();
    Ok(BijectionReport {
        edge: (a, b),
        class_a: counts[0],
        class_b: counts[1],
        injective,
        onto_deleted: *images.get(&SplitClass::A).unwrap_or(&empty)
            == sto_enumerate(&deleted, limits)?,
        onto_contracted: *images.get(&SplitClass::B).unwrap_or(&empty)
            == sto_enumerate(&contracted, limits)?,
        lacking_bookkeeping: bookkeeping,
    })
}

/// Coefficients as JSON numbers, ascending degree.
pub fn coefficients_json(p: &Polynomial<BigUint>) -> serde_json::Value {
    serde_json::Value::Array(
        p.coeffs()
            .iter()
            .map(|c| {
                serde_json::Value::Number(
                    c.to_string()
                        .parse()
                        .expect("decimal integers are valid JSON numbers"),
                )
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recurrent::sto_enumerate;

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

    fn coeffs(p: &LackingPolynomial) -> Vec<u64> {
        p.coeffs().iter().map(|c| c.try_into().unwrap()).collect()
    }

    #[test]
    fn triangle_polynomial_both_ways() {
        let g = triangle();
        assert_eq!(
            coeffs(&lacking_poly_enum(&g, &Limits::default()).unwrap()),
            vec![1, 3]
        );
        assert_eq!(coeffs(&lacking_poly_recurrence(&g).unwrap()), vec![1, 3]);
        let p = lacking_poly_recurrence(&g).unwrap();
        assert_eq!(p.eval(&BigUint::from(1u32)), BigUint::from(4u32));
    }

    #[test]
    fn triangle_recurrence_branches() {
        let g = triangle();
        assert_eq!(
            coeffs(&lacking_poly_recurrence(&g.delete_edge(2, 3).unwrap()).unwrap()),
            vec![1]
        );
        assert_eq!(
            coeffs(&lacking_poly_recurrence(&g.contract_edge(2, 3).unwrap()).unwrap()),
            vec![1, 2]
        );
    }

    #[test]
    fn sink_bundle_is_geometric() {
        for k in 1..6 {
            let g = MultiGraph::build("s", &[("s", "u", k)]).unwrap();
            assert_eq!(coeffs(&lacking_poly_recurrence(&g).unwrap()), vec![1; k]);
        }
    }

    #[test]
    fn tree_is_one() {
        let tree = MultiGraph::build("s", &[("s", "a", 1), ("a", "b", 1), ("a", "c", 1)]).unwrap();
        assert_eq!(coeffs(&lacking_poly_recurrence(&tree).unwrap()), vec![1]);
        assert_eq!(
            coeffs(&lacking_poly_enum(&tree, &Limits::default()).unwrap()),
            vec![1]
        );
    }

    #[test]
    fn classification_on_triangle() {
        let g = triangle();
        assert_eq!(
            classify_config(&g, &cfg(&[3, 2, 1]), 2, 3).unwrap(),
            SplitClass::A
        );
        assert_eq!(
            classify_config(&g, &cfg(&[3, 2, 2]), 2, 3).unwrap(),
            SplitClass::B
        );
        assert_eq!(
            classify_config(&g, &cfg(&[2, 2, 2]), 2, 3).unwrap(),
            SplitClass::B
        );
        assert_eq!(
            classify_config(&g, &cfg(&[1, 2, 2]), 2, 3).unwrap_err(),
            Error::NotRecurrent
        );
        assert_eq!(
            classify_config(&g, &cfg(&[3, 2, 2]), 0, 1).unwrap_err(),
            Error::BadEdge(0, 1)
        );
    }

    #[test]
    fn bijection_images_on_triangle() {
        let g = triangle();
        let a = bijection_f(&g, &cfg(&[3, 2, 1]), 2, 3).unwrap();
        assert_eq!(a.class, SplitClass::A);
        assert_eq!(a.config, cfg(&[3, 1, 1]));
        assert_eq!(a.graph, g.delete_edge(2, 3).unwrap());

        let b = bijection_f(&g, &cfg(&[3, 2, 2]), 2, 3).unwrap();
        assert_eq!(b.class, SplitClass::B);
        assert_eq!(b.config, cfg(&[3, 2]));

        let mut contracted = BTreeSet::new();
        let mut deleted = BTreeSet::new();
        for eta in sto_enumerate(&g, &Limits::default()).unwrap() {
            let img = bijection_f(&g, &eta, 2, 3).unwrap();
            let fresh = match img.class {
                SplitClass::A => deleted.insert(img.config),
                SplitClass::B => contracted.insert(img.config),
            };
            assert!(fresh);
        }
        assert_eq!(deleted, BTreeSet::from([cfg(&[3, 1, 1])]));
        assert_eq!(
            contracted,
            BTreeSet::from([cfg(&[3, 2]), cfg(&[3, 1]), cfg(&[2, 2])])
        );
        assert!(bijection_check(&g, 2, 3, &Limits::default())
            .unwrap()
            .holds());
    }

    #[test]
    fn bijection_with_parallel_edge() {
        let g = MultiGraph::build("s", &[("s", "a", 1), ("a", "b", 2)]).unwrap();
        let report = bijection_check(&g, 1, 2, &Limits::default()).unwrap();
        assert!(report.holds(), "{report:?}");
        let img = bijection_f(&g, &cfg(&[3, 2]), 1, 2).unwrap();
        assert_eq!(img.class, SplitClass::B);
        assert_eq!(img.config, cfg(&[2]));
    }

    #[test]
    fn json_coefficients() {
        let p = Polynomial::new(vec![BigUint::from(1u32), BigUint::from(3u32)]);
        assert_eq!(coefficients_json(&p).to_string(), "[1,3]");
    }
}

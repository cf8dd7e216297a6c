//! Finite-valued structural causal models and exact inference by enumeration.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dag::{fsed_graph, CausalDag, NodeSet};
use super::dsep::check_disjoint;
use crate::error::{Error, Result};

/// Node name → value index.
pub type Assignment = BTreeMap<String, usize>;

/// Builds an [`Assignment`] from `(node, value)` pairs.
pub fn assignment<S: AsRef<str>>(pairs: &[(S, usize)]) -> Assignment {
    pairs
        .iter()
        .map(|(n, v)| (n.as_ref().to_string(), *v))
        .collect()
}

const ROW_TOLERANCE: f64 = 1e-12;

/// `P(node | parents)`. Parents are in lexicographic order and rows are
/// indexed mixed-radix with the first parent most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub parents: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteScm {
    dag: CausalDag,
    cardinality: BTreeMap<String, usize>,
    cpt: BTreeMap<String, Cpt>,
}

impl DiscreteScm {
    pub fn new(
        dag: CausalDag,
        cardinality: BTreeMap<String, usize>,
        cpt: BTreeMap<String, Cpt>,
    ) -> Result<Self> {
        for node in dag.nodes() {
            let card = *cardinality
                .get(node)
                .ok_or_else(|| Error::InvalidModel(format!("no cardinality for `{node}`")))?;
            if card == 0 {
                return Err(Error::InvalidModel(format!("zero cardinality for `{node}`")));
            }
            let table = cpt
                .get(node)
                .ok_or_else(|| Error::InvalidModel(format!("no CPT for `{node}`")))?;
            let parents: Vec<String> = dag.parents(node).into_iter().map(String::from).collect();
            if table.parents != parents {
                return Err(Error::InvalidModel(format!(
                    "CPT parents of `{node}` are {:?}, graph says {:?}",
                    table.parents, parents
                )));
            }
            let n_rows: usize = parents.iter().map(|p| cardinality.get(p).copied().unwrap_or(0)).product();
            if table.rows.len() != n_rows {
                return Err(Error::InvalidModel(format!(
                    "CPT of `{node}` has {} rows, expected {n_rows}",
                    table.rows.len()
                )));
            }
            for (r, row) in table.rows.iter().enumerate() {
                if row.len() != card {
                    return Err(Error::InvalidModel(format!(
                        "CPT row {r} of `{node}` has length {}, expected {card}",
                        row.len()
                    )));
                }
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::InvalidModel(format!("CPT row {r} of `{node}` has a negative entry")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::InvalidModel(format!("CPT row {r} of `{node}` sums to {sum}")));
                }
            }
        }
        if let Some(extra) = cardinality.keys().find(|n| !dag.contains(n)) {
            return Err(Error::UnknownNode(extra.clone()));
        }
        if let Some(extra) = cpt.keys().find(|n| !dag.contains(n)) {
            return Err(Error::UnknownNode(extra.clone()));
        }
        Ok(DiscreteScm { dag, cardinality, cpt })
    }

    pub fn dag(&self) -> &CausalDag {
        &self.dag
    }

    pub fn cardinality(&self, node: &str) -> Result<usize> {
        self.cardinality
            .get(node)
            .copied()
            .ok_or_else(|| Error::UnknownNode(node.to_string()))
    }

    pub fn cpt(&self, node: &str) -> Option<&Cpt> {
        self.cpt.get(node)
    }

    fn check_assignment(&self, a: &Assignment) -> Result<()> {
        for (node, value) in a {
            let card = self.cardinality(node)?;
            if *value >= card {
                return Err(Error::AssignmentConflict(format!(
                    "value {value} out of range for `{node}` (cardinality {card})"
                )));
            }
        }
        Ok(())
    }

    /// Joint table under `do`, by truncated factorization. Intervened nodes
    /// contribute no factor and are pinned to their assigned value.
    pub fn joint(&self, intervention: &Assignment) -> Result<Joint> {
        self.check_assignment(intervention)?;
        let order = self.dag.topological_order()?;
        let index: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let cards: Vec<usize> = order.iter().map(|n| self.cardinality[n]).collect();
        let total: usize = cards.iter().product();

        let factors: Vec<(Vec<usize>, &Cpt)> = order
            .iter()
            .map(|n| {
                let cpt = &self.cpt[n];
                (cpt.parents.iter().map(|p| index[p.as_str()]).collect(), cpt)
            })
            .collect();
        let pinned: Vec<Option<usize>> = order.iter().map(|n| intervention.get(n).copied()).collect();

        let mut probs = vec![0.0; total];
        let mut values = vec![0usize; order.len()];
        for (flat, slot) in probs.iter_mut().enumerate() {
            decode(flat, &cards, &mut values);
            if pinned.iter().zip(&values).any(|(p, v)| matches!(p, Some(x) if x != v)) {
                continue;
            }
            let mut weight = 1.0;
            for (i, (parents, cpt)) in factors.iter().enumerate() {
                if pinned[i].is_some() {
                    continue;
                }
                let mut row = 0;
                for &p in parents {
                    row = row * cards[p] + values[p];
                }
                weight *= cpt.rows[row][values[i]];
                if weight == 0.0 {
                    break;
                }
            }
            *slot = weight;
        }
        Ok(Joint { order, cards, probs })
    }
}

/// Row-major index → per-node values (last node fastest).
fn decode(mut flat: usize, cards: &[usize], out: &mut [usize]) {
    for i in (0..cards.len()).rev() {
        out[i] = flat % cards[i];
        flat /= cards[i];
    }
}

/// A full joint table over all nodes of a model.
#[derive(Debug, Clone)]
pub struct Joint {
    order: Vec<String>,
    cards: Vec<usize>,
    probs: Vec<f64>,
}

impl Joint {
    fn position(&self, node: &str) -> Result<usize> {
        self.order
            .iter()
            .position(|n| n == node)
            .ok_or_else(|| Error::UnknownNode(node.to_string()))
    }

    /// Dense marginal over `nodes` (mixed radix, first node most significant)
    /// restricted to states consistent with `given`. Not normalized.
    pub fn restricted_marginal(&self, nodes: &[&str], given: &Assignment) -> Result<Vec<f64>> {
        let positions: Vec<usize> = nodes.iter().map(|n| self.position(n)).collect::<Result<_>>()?;
        let given_pos: Vec<(usize, usize)> = given
            .iter()
            .map(|(n, v)| Ok((self.position(n)?, *v)))
            .collect::<Result<_>>()?;
        let size: usize = positions.iter().map(|&p| self.cards[p]).product();
        let mut out = vec![0.0; size];
        let mut values = vec![0usize; self.order.len()];
        for (flat, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            decode(flat, &self.cards, &mut values);
            if given_pos.iter().any(|&(i, v)| values[i] != v) {
                continue;
            }
            let mut idx = 0;
            for &pos in &positions {
                idx = idx * self.cards[pos] + values[pos];
            }
            out[idx] += p;
        }
        Ok(out)
    }

    pub fn probability(&self, event: &Assignment) -> Result<f64> {
        Ok(self.restricted_marginal(&[], event)?.iter().sum())
    }

    /// `P(target | given)`, failing on a zero-probability condition.
    pub fn conditional(&self, target: &str, given: &Assignment) -> Result<Vec<f64>> {
        let mass = self.restricted_marginal(&[target], given)?;
        let z: f64 = mass.iter().sum();
        if z <= 0.0 {
            return Err(Error::ZeroProbability(format!("P({}) = 0", describe(given))));
        }
        Ok(mass.into_iter().map(|m| m / z).collect())
    }
}

fn describe(a: &Assignment) -> String {
    if a.is_empty() {
        return "∅".to_string();
    }
    a.iter()
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// `P(target | do(intervention), given)` by brute-force enumeration.
pub fn interventional_distribution(
    scm: &DiscreteScm,
    intervention: &Assignment,
    given: &Assignment,
    target: &str,
) -> Result<Vec<f64>> {
    scm.check_assignment(given)?;
    scm.cardinality(target)?;
    if let Some(n) = intervention.keys().find(|n| given.contains_key(*n)) {
        return Err(Error::AssignmentConflict(format!("`{n}` is both intervened on and observed")));
    }
    if intervention.contains_key(target) || given.contains_key(target) {
        return Err(Error::AssignmentConflict(format!("target `{target}` is fixed by the query")));
    }
    let joint = scm.joint(intervention)?;
    let mass = joint.restricted_marginal(&[target], given)?;
    let z: f64 = mass.iter().sum();
    if z <= 0.0 {
        return Err(Error::ZeroProbability(format!(
            "P({} | do({})) = 0",
            describe(given),
            describe(intervention)
        )));
    }
    Ok(mass.into_iter().map(|m| m / z).collect())
}

/// Backdoor-adjusted estimate of `P(Y | do(C=c), E=e, Q=q)` on the FSED graph:
/// `Σ_t Σ_s P(Y|s,q) P(s|c,t) P(t|e)`, each factor an observational conditional.
pub fn backdoor_estimate(scm: &DiscreteScm, context: usize, event: usize, query: usize) -> Result<Vec<f64>> {
    if scm.dag() != &fsed_graph() {
        return Err(Error::GraphMismatch("backdoor estimate requires the FSED graph".into()));
    }
    let joint = scm.joint(&Assignment::new())?;
    let card = |n: &str| scm.cardinality(n);
    let (card_t, card_s, card_y) = (card("T")?, card("S")?, card("Y")?);
    let check = |node: &str, v: usize| -> Result<()> {
        let c = card(node)?;
        if v >= c {
            return Err(Error::AssignmentConflict(format!("value {v} out of range for `{node}`")));
        }
        Ok(())
    };
    check("C", context)?;
    check("E", event)?;
    check("Q", query)?;

    let p_t_given_e = joint
        .conditional("T", &assignment(&[("E", event)]))
        .map_err(|_| Error::ZeroProbability(format!("factor P(t|e): P(E={event}) = 0")))?;
    let mut out = vec![0.0; card_y];
    for t in 0..card_t {
        let w_t = p_t_given_e[t];
        if w_t == 0.0 {
            continue;
        }
        let p_s = joint
            .conditional("S", &assignment(&[("C", context), ("T", t)]))
            .map_err(|_| Error::ZeroProbability(format!("factor P(s|C,t): P(C={context}, T={t}) = 0")))?;
        for s in 0..card_s {
            let w = w_t * p_s[s];
            if w == 0.0 {
                continue;
            }
            let p_y = joint
                .conditional("Y", &assignment(&[("S", s), ("Q", query)]))
                .map_err(|_| Error::ZeroProbability(format!("factor P(Y|s,q): P(S={s}, Q={query}) = 0")))?;
            for (o, p) in out.iter_mut().zip(&p_y) {
                *o += w * p;
            }
        }
    }
    Ok(out)
}

/// Conditional independence `X ⫫ Y | Z` checked on the exact joint.
pub fn ci_brute_force(scm: &DiscreteScm, x: &NodeSet, y: &NodeSet, z: &NodeSet, tol: f64) -> Result<bool> {
    for s in [x, y, z] {
        scm.dag().check_set(s)?;
    }
    check_disjoint(&[x, y, z])?;
    let joint = scm.joint(&Assignment::new())?;
    let xs: Vec<&str> = x.iter().map(String::as_str).collect();
    let ys: Vec<&str> = y.iter().map(String::as_str).collect();
    let zs: Vec<&str> = z.iter().map(String::as_str).collect();
    let nodes: Vec<&str> = zs.iter().chain(&xs).chain(&ys).copied().collect();
    let table = joint.restricted_marginal(&nodes, &Assignment::new())?;

    let size = |set: &[&str]| -> Result<usize> {
        set.iter().map(|n| scm.cardinality(n)).product::<Result<usize>>()
    };
    let (nz, nx, ny) = (size(&zs)?, size(&xs)?, size(&ys)?);
    for zi in 0..nz {
        let block = &table[zi * nx * ny..(zi + 1) * nx * ny];
        let pz: f64 = block.iter().sum();
        if pz <= 0.0 {
            continue;
        }
        let px: Vec<f64> = (0..nx).map(|xi| block[xi * ny..(xi + 1) * ny].iter().sum::<f64>() / pz).collect();
        let py: Vec<f64> = (0..ny).map(|yi| (0..nx).map(|xi| block[xi * ny + yi]).sum::<f64>() / pz).collect();
        for xi in 0..nx {
            for yi in 0..ny {
                if (block[xi * ny + yi] / pz - px[xi] * py[yi]).abs() > tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// A CPT row drawn as uniform positives, then normalized.
pub fn random_row<R: Rng + ?Sized>(rng: &mut R, card: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..card).map(|_| rng.gen_range(0.01..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw.iter().map(|v| v / sum).collect();
    // pin the row sum to 1 up to one rounding of the last entry
    let head: f64 = row[..card - 1].iter().sum();
    row[card - 1] = 1.0 - head;
    row
}

/// Random CPTs for `dag` with the given cardinalities.
pub fn random_scm<R: Rng + ?Sized>(
    rng: &mut R,
    dag: &CausalDag,
    cardinality: &BTreeMap<String, usize>,
) -> Result<DiscreteScm> {
    let mut cpt = BTreeMap::new();
    for node in dag.nodes() {
        let parents: Vec<String> = dag.parents(node).into_iter().map(String::from).collect();
        let n_rows: usize = parents.iter().map(|p| cardinality[p]).product();
        let rows = (0..n_rows).map(|_| random_row(rng, cardinality[node])).collect();
        cpt.insert(node.to_string(), Cpt { parents, rows });
    }
    DiscreteScm::new(dag.clone(), cardinality.clone(), cpt)
}

/// A random SCM on the FSED graph with cardinalities in `2..=max_card`.
pub fn random_fsed_scm<R: Rng + ?Sized>(rng: &mut R, max_card: usize) -> Result<DiscreteScm> {
    let dag = fsed_graph();
    let cards = dag
        .nodes()
        .map(|n| (n.to_string(), rng.gen_range(2..=max_card.max(2))))
        .collect();
    random_scm(rng, &dag, &cards)
}

/// A random DAG on nodes `V0..V{n-1}`: a random order, each forward pair
/// joined with probability `edge_prob`.
pub fn random_dag<R: Rng + ?Sized>(rng: &mut R, n_nodes: usize, edge_prob: f64) -> CausalDag {
    use rand::seq::SliceRandom;
    let names: Vec<String> = (0..n_nodes).map(|i| format!("V{i}")).collect();
    let mut order = names.clone();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n_nodes {
        for j in i + 1..n_nodes {
            if rng.gen_bool(edge_prob) {
                edges.push((order[i].clone(), order[j].clone()));
            }
        }
    }
    CausalDag::new(&names, &edges).expect("forward edges of a permutation are acyclic")
}

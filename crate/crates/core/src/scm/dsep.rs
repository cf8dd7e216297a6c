//! d-separation by reachability and do-calculus rule conditions.

use std::collections::{BTreeSet, VecDeque};

use super::dag::{CausalDag, NodeSet};
use crate::error::{Error, Result};

pub(crate) fn check_disjoint(sets: &[&NodeSet]) -> Result<()> {
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if let Some(n) = a.intersection(b).next() {
                return Err(Error::OverlappingSets(n.clone()));
            }
        }
    }
    Ok(())
}

/// Nodes reachable from `sources` through active trails given `observed`
/// (Bayes-ball). Observed nodes are never reported as reachable.
pub fn reachable(dag: &CausalDag, sources: &NodeSet, observed: &NodeSet) -> NodeSet {
    // Ancestors of the observed set, inclusive: a collider is open iff it is in here.
    let mut open_colliders: NodeSet = observed.clone();
    for z in observed {
        open_colliders.extend(dag.ancestors(z));
    }

    #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
    enum Dir {
        Up,
        Down,
    }

    let mut queue: VecDeque<(String, Dir)> = sources.iter().map(|s| (s.clone(), Dir::Up)).collect();
    let mut visited: BTreeSet<(String, Dir)> = BTreeSet::new();
    let mut found = NodeSet::new();
    while let Some((node, dir)) = queue.pop_front() {
        if !visited.insert((node.clone(), dir)) {
            continue;
        }
        let is_observed = observed.contains(&node);
        if !is_observed {
            found.insert(node.clone());
        }
        match dir {
            Dir::Up if !is_observed => {
                for p in dag.parents(&node) {
                    queue.push_back((p.to_string(), Dir::Up));
                }
                for c in dag.children(&node) {
                    queue.push_back((c.to_string(), Dir::Down));
                }
            }
            Dir::Up => {}
            Dir::Down => {
                if !is_observed {
                    for c in dag.children(&node) {
                        queue.push_back((c.to_string(), Dir::Down));
                    }
                }
                if open_colliders.contains(&node) {
                    for p in dag.parents(&node) {
                        queue.push_back((p.to_string(), Dir::Up));
                    }
                }
            }
        }
    }
    found
}

/// True iff every trail between `x` and `y` is blocked by `z`.
pub fn d_separated(dag: &CausalDag, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> Result<bool> {
    for s in [x, y, z] {
        dag.check_set(s)?;
    }
    check_disjoint(&[x, y, z])?;
    let reach = reachable(dag, x, z);
    Ok(reach.is_disjoint(y))
}

/// Which do-calculus rule a condition belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DoRule {
    /// Insertion/deletion of observations.
    One,
    /// Action/observation exchange.
    Two,
    /// Insertion/deletion of actions.
    Three,
}

impl DoRule {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(DoRule::One),
            2 => Ok(DoRule::Two),
            3 => Ok(DoRule::Three),
            other => Err(Error::InvalidRule(other)),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            DoRule::One => 1,
            DoRule::Two => 2,
            DoRule::Three => 3,
        }
    }
}

/// The mutilated graph a rule tests in, along with the removed edge sets.
pub fn rule_graph(
    dag: &CausalDag,
    rule: DoRule,
    t_do: &NodeSet,
    z: &NodeSet,
    w: &NodeSet,
) -> Result<(CausalDag, NodeSet, NodeSet)> {
    let mut incoming = t_do.clone();
    let mut outgoing = NodeSet::new();
    match rule {
        DoRule::One => {}
        DoRule::Two => outgoing.extend(z.iter().cloned()),
        DoRule::Three => {
            let g_t = dag.mutilate(t_do, &NodeSet::new())?;
            let mut ancestors_of_w = NodeSet::new();
            for n in w {
                ancestors_of_w.extend(g_t.ancestors(n));
            }
            incoming.extend(z.iter().filter(|n| !ancestors_of_w.contains(*n)).cloned());
        }
    }
    let g = dag.mutilate(&incoming, &outgoing)?;
    Ok((g, incoming, outgoing))
}

/// Checks the graphical side condition of a do-calculus rule:
/// `Y ⫫ Z | T ∪ W` in the graph the rule prescribes.
pub fn rule_condition_holds(
    dag: &CausalDag,
    rule: u8,
    y: &NodeSet,
    t_do: &NodeSet,
    z: &NodeSet,
    w: &NodeSet,
) -> Result<bool> {
    let rule = DoRule::from_id(rule)?;
    for s in [y, t_do, z, w] {
        dag.check_set(s)?;
    }
    check_disjoint(&[y, t_do, z, w])?;
    let (g, _, _) = rule_graph(dag, rule, t_do, z, w)?;
    let given: NodeSet = t_do.union(w).cloned().collect();
    d_separated(&g, y, z, &given)
}
